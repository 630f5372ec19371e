#include "doctest.h"
#include "oracle.hpp"
#include "swps/signature.hpp"

using namespace swps;
using swps::testing::oracle_signature;
using swps::testing::random_path;
using swps::testing::rel_error;

namespace {

RowMatrix pts(std::initializer_list<std::initializer_list<double>> rows) {
  RowMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

TruncatedTensor random_tensor(Rng& rng, int d, int m) {
  auto t = TruncatedTensor::identity(d, m);
  for (int k = 1; k <= m; ++k) {
    for (auto& v : t.level(k)) v = uniform(rng, -1, 1);
  }
  return t;
}

}  // namespace

TEST_CASE("signature dimension") {
  CHECK(sig_dim(9, 2) == 90);
  CHECK(sig_dim(7, 1) == 7);
  CHECK(sig_dim(2, 3) == 14);
  CHECK_THROWS(sig_dim(1000, 5));
  CHECK_THROWS(sig_dim(0, 2));
}

TEST_CASE("segment signature") {
  const std::array<double, 2> ab{3.0, -2.0};
  const auto s = segment_sig(ab, 2);
  CHECK(s.level(1) == std::vector<double>{3, -2});
  CHECK(s.level(2) == std::vector<double>{4.5, -3, -3, 2});
  const std::array<double, 3> zero{0, 0, 0};
  const auto z = segment_sig(zero, 2);
  CHECK(z.flatten() == std::vector<double>(12, 0.0));
  const std::array<double, 3> v{0.1, -0.4, 2.2};
  CHECK(segment_sig(v, 3).level(1) == std::vector<double>{0.1, -0.4, 2.2});
}

TEST_CASE("chen product") {
  Rng rng = make_stream(41, {});
  const auto a = random_tensor(rng, 3, 2);
  CHECK(chen_mul(a, TruncatedTensor::identity(3, 2)).flatten() == a.flatten());
  CHECK(chen_mul(TruncatedTensor::identity(3, 2), a).flatten() == a.flatten());

  const std::array<double, 2> e1{1, 0}, e2{0, 1};
  const auto l = chen_mul(segment_sig(e1, 2), segment_sig(e2, 2));
  CHECK(l.level(1) == std::vector<double>{1, 1});
  CHECK(l.level(2) == std::vector<double>{0.5, 1, 0, 0.5});
  const auto oracle = oracle_signature(pts({{0, 0}, {1, 0}, {1, 1}}), 2, 10000);
  CHECK(rel_error(l.flatten(), oracle) <= 1e-4);

  for (int i = 0; i < 50; ++i) {
    const auto x = random_tensor(rng, 2, 3), y = random_tensor(rng, 2, 3), z = random_tensor(rng, 2, 3);
    CHECK(max_diff(chen_mul(x, chen_mul(y, z)).flatten(), chen_mul(chen_mul(x, y), z).flatten()) <= 1e-12);
  }
  CHECK_THROWS(chen_mul(random_tensor(rng, 2, 2), random_tensor(rng, 3, 2)));
  CHECK_THROWS(chen_mul(random_tensor(rng, 2, 2), random_tensor(rng, 2, 1)));
}

TEST_CASE("path signature examples") {
  CHECK(path_signature(pts({{0, 0}, {3, 4}}), 1) == std::vector<double>{3, 4});

  const auto l = path_signature(pts({{0, 0}, {1, 0}, {1, 1}}), 2);
  CHECK(l[2 + 1] == doctest::Approx(1.0));
  CHECK(l[2 + 2] == doctest::Approx(0.0));
  CHECK((l[3] - l[4]) / 2 == doctest::Approx(0.5));

  const RowMatrix sq = pts({{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0, 0}});
  const auto s = path_signature(sq, 2);
  CHECK(std::abs(s[0]) <= 1e-15);
  CHECK(std::abs(s[1]) <= 1e-15);
  CHECK(std::abs((s[3] - s[4]) / 2) == doctest::Approx(1.0));
  CHECK(rel_error(s, oracle_signature(sq, 2, 10000)) <= 1e-4);

  CHECK_THROWS(path_signature(pts({{1, 2}}), 2));
}

TEST_CASE("oracle: exact level one, convergence, budget") {
  const RowMatrix seg = pts({{0.5, -1}, {2, 3}});
  const auto o = oracle_signature(seg, 1, 100);
  CHECK(std::abs(o[0] - 1.5) <= 1e-6);
  CHECK(std::abs(o[1] - 4.0) <= 1e-6);

  Rng rng = make_stream(42, {});
  const RowMatrix p = random_path(rng, 6, 3);
  const auto exact = path_signature(p, 3);
  double prev = INFINITY;
  for (int sub : {10, 100, 1000, 10000}) {
    const double err = rel_error(exact, oracle_signature(p, 3, sub));
    CHECK(err < prev);
    prev = err;
  }
  CHECK_THROWS(oracle_signature(random_path(rng, 20, 2), 2, 100000));
}

TEST_CASE("path signature matches the oracle, degree 3 included") {
  Rng rng = make_stream(43, {});
  for (int i = 0; i < 10; ++i) {
    const int d = 1 + static_cast<int>(rng() % 3);
    const RowMatrix p = random_path(rng, 2 + static_cast<int>(rng() % 6), d);
    CHECK(rel_error(path_signature(p, 3), oracle_signature(p, 3, 20000)) <= 1e-3);
  }
}

TEST_CASE("shuffle, Chen, reparameterization and rotation properties") {
  Rng rng = make_stream(44, {});
  for (int i = 0; i < 200; ++i) {
    const int d = 1 + static_cast<int>(rng() % 4);
    const int n = 2 + static_cast<int>(rng() % 12);
    const RowMatrix p = random_path(rng, n, d);
    const auto s = path_signature(p, 2);
    for (int a = 0; a < d; ++a) {
      for (int b = 0; b < d; ++b) {
        CHECK(std::abs(s[static_cast<std::size_t>(d + a * d + b)] + s[static_cast<std::size_t>(d + b * d + a)] -
                       s[static_cast<std::size_t>(a)] * s[static_cast<std::size_t>(b)]) <= 1e-10);
      }
    }

    const RowMatrix q = random_path(rng, 2 + static_cast<int>(rng() % 8), d);
    const RowMatrix shift = p.row(n - 1) - q.row(0);
    const RowMatrix qs = q.rowwise() + shift.row(0);
    RowMatrix cat(n + qs.rows() - 1, d);
    cat << p, qs.bottomRows(qs.rows() - 1);
    CHECK(max_diff(path_signature(cat, 2),
                   chen_mul(path_signature_tensor(p, 2), path_signature_tensor(qs, 2)).flatten()) <= 1e-12);

    RowMatrix mid(n + 1, d);
    const Eigen::Index at = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n - 1));
    mid << p.topRows(at + 1), 0.3 * p.row(at) + 0.7 * p.row(at + 1), p.bottomRows(n - at - 1);
    CHECK(max_diff(path_signature(mid, 2), s) <= 1e-12);
  }

  for (int i = 0; i < 100; ++i) {
    const RowMatrix p = random_path(rng, 8, 2);
    const double a = uniform(rng, 0, 2 * kPi);
    RowMatrix r(p.rows(), 2);
    r.col(0) = p.col(0) * std::cos(a) + p.col(1) * std::sin(a);
    r.col(1) = -p.col(0) * std::sin(a) + p.col(1) * std::cos(a);
    const auto s = path_signature(p, 2), t = path_signature(r, 2);
    CHECK(std::abs((s[3] - s[4]) - (t[3] - t[4])) / 2 <= 1e-10);
    CHECK(std::abs(t[0] - (s[0] * std::cos(a) + s[1] * std::sin(a))) <= 1e-12);
  }
}

TEST_CASE("sliding windows") {
  const WindowSpec def;
  CHECK(def.window_count(100) == 96);
  CHECK(WindowSpec{4, 3, 2}.window_count(10) == 3);
  CHECK_THROWS(def.window_count(4));

  Rng rng = make_stream(45, {});
  const RowMatrix seq = random_path(rng, 10, 3);
  const auto w = sliding_window_signature(seq, {4, 3, 2});
  REQUIRE(w.rows() == 3);
  REQUIRE(w.cols() == sig_dim(3, 2));
  for (int j = 0; j < 3; ++j) {
    const auto expect = path_signature(seq.middleRows(3 * j, 4), 2);
    for (int c = 0; c < w.cols(); ++c) CHECK(w(j, c) == expect[static_cast<std::size_t>(c)]);
  }

  const RowMatrix five = random_path(rng, 5, 9);
  const auto single = sliding_window_signature(five, def);
  REQUIRE(single.rows() == 1);
  REQUIRE(single.cols() == 90);
  const auto whole = path_signature(five, 2);
  for (int c = 0; c < 90; ++c) CHECK(single(0, c) == whole[static_cast<std::size_t>(c)]);

  CHECK_THROWS(sliding_window_signature(random_path(rng, 3, 2), def));
  CHECK_THROWS_AS(WindowSpec({5, 1, 3}).validate(), ConfigError);
  CHECK_THROWS_AS(WindowSpec({1, 1, 2}).validate(), ConfigError);
  CHECK_THROWS_AS(WindowSpec({5, 0, 2}).validate(), ConfigError);
}
