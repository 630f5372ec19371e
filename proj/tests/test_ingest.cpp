#include <set>

#include "doctest.h"
#include "oracle.hpp"
#include "swps/ingest.hpp"

using namespace swps;

namespace {

void put16(std::vector<std::uint8_t>& b, int v) {
  const auto u = static_cast<std::uint16_t>(static_cast<std::int16_t>(v));
  b.push_back(static_cast<std::uint8_t>(u & 0xff));
  b.push_back(static_cast<std::uint8_t>(u >> 8));
}

// One record, tag "AB", a single stroke (10,20),(30,40), built by hand.
std::vector<std::uint8_t> hand_fixture() {
  std::vector<std::uint8_t> body = {'A', 'B', 0, 0};
  put16(body, 1);
  for (int v : {10, 20, 30, 40, -1, 0, -1, -1}) put16(body, v);
  std::vector<std::uint8_t> rec;
  put16(rec, static_cast<int>(body.size() + 2));
  rec.insert(rec.end(), body.begin(), body.end());
  return rec;
}

}  // namespace

TEST_CASE("binary records: hand-built fixture") {
  const auto bytes = hand_fixture();
  const auto samples = parse_stroke_binary(bytes);
  REQUIRE(samples.size() == 1);
  CHECK(samples[0].label == "AB");
  REQUIRE(samples[0].trajectory.strokes.size() == 1);
  CHECK(samples[0].trajectory.strokes[0] == Stroke{{10, 20}, {30, 40}});
  CHECK(write_stroke_binary(samples) == bytes);
}

TEST_CASE("binary records: empty stream") { CHECK(parse_stroke_binary({}).empty()); }

TEST_CASE("binary records: truncation reports the offset") {
  auto bytes = hand_fixture();
  const auto two = bytes;
  bytes.insert(bytes.end(), two.begin(), two.end());
  bytes.resize(bytes.size() - 5);
  try {
    parse_stroke_binary(bytes);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.position() >= two.size());
    CHECK(std::string(e.what()).find("offset") != std::string::npos);
  }
}

TEST_CASE("binary records: structural mismatches") {
  SUBCASE("stroke count") {
    auto bytes = hand_fixture();
    bytes[6] = 2;
    CHECK_THROWS_AS(parse_stroke_binary(bytes), StructuralError);
  }
  SUBCASE("record size") {
    auto bytes = hand_fixture();
    bytes.push_back(0);
    bytes.push_back(0);
    bytes[0] = static_cast<std::uint8_t>(bytes[0] + 2);
    CHECK_THROWS_AS(parse_stroke_binary(bytes), StructuralError);
  }
}

TEST_CASE("binary records: round trip on generated samples") {
  Rng rng = make_stream(5, {});
  std::vector<RawSample> samples;
  for (int i = 0; i < 200; ++i) {
    RawSample s;
    s.label = std::string(1 + rng() % 4, static_cast<char>('a' + rng() % 26));
    const int strokes = 1 + static_cast<int>(rng() % 4);
    for (int k = 0; k < strokes; ++k) {
      Stroke st;
      const int pts = 1 + static_cast<int>(rng() % 20);
      for (int p = 0; p < pts; ++p) {
        st.push_back({static_cast<double>(static_cast<int>(rng() % 2000)),
                      static_cast<double>(static_cast<int>(rng() % 2000)) - 1000.0});
      }
      s.trajectory.strokes.push_back(st);
    }
    samples.push_back(s);
  }
  const auto bytes = write_stroke_binary(samples);
  CHECK(parse_stroke_binary(bytes) == samples);
}

TEST_CASE("text format: grammar examples") {
  const auto ds = parse_text_dataset("A 0,0;1,0|1,0;1,1\n");
  REQUIRE(ds.size() == 1);
  CHECK(ds.samples[0].trajectory.strokes.size() == 2);

  const auto two = parse_text_dataset("B 0,0\nA 1,1\n");
  CHECK(two.labels.index("A") == 0);
  CHECK(two.labels.index("B") == 1);
  CHECK(two.label_of(0) == 1);
}

TEST_CASE("text format: errors carry the line number") {
  try {
    parse_text_dataset("A 0,0\n\nA 0,0;x,1\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_text_dataset("A 0,0||1,1\n"), StructuralError);
}

TEST_CASE("text format: serialize/parse round trip") {
  const auto ds = synth_generate(10, 20, 0.03, 9);
  const std::string text = serialize_text_dataset(ds);
  const auto back = parse_text_dataset(text);
  CHECK(back == ds);
  CHECK(serialize_text_dataset(back) == text);
}

TEST_CASE("synthetic glyphs") {
  CHECK(synth_template_count() >= 10);
  bool multi = false;
  for (std::size_t i = 0; i < synth_template_count(); ++i) {
    multi = multi || synth_template(i).strokes.size() > 1;
  }
  CHECK(multi);

  const auto clean = synth_generate(2, 3, 0.0, 7);
  REQUIRE(clean.size() == 6);
  for (std::size_t i = 0; i < clean.size(); ++i) {
    CHECK(clean.samples[i].trajectory == synth_template(static_cast<std::size_t>(clean.label_of(i))));
  }
  CHECK(synth_generate(2, 3, 0.01, 7) == synth_generate(2, 3, 0.01, 7));
  const auto big = synth_generate(10, 50, 0.02, 1);
  CHECK(big.size() == 500);
  CHECK(big.labels.size() == 10);
  CHECK_THROWS(synth_generate(static_cast<int>(synth_template_count()) + 1, 1, 0.0, 1));
}

TEST_CASE("stratified split") {
  const auto ds = synth_generate(3, 300, 0.01, 2);
  const auto [tr, te] = split(ds, {0.8, 11});
  std::map<int, int> ntr, nte;
  for (std::size_t i = 0; i < tr.size(); ++i) ++ntr[tr.label_of(i)];
  for (std::size_t i = 0; i < te.size(); ++i) ++nte[te.label_of(i)];
  for (int c = 0; c < 3; ++c) {
    CHECK(ntr[c] == 240);
    CHECK(nte[c] == 60);
  }
  CHECK(tr.labels == ds.labels);
  CHECK(te.labels == ds.labels);

  // partition of the original samples
  std::multiset<std::string> all, parts;
  for (const auto& s : ds.samples) all.insert(serialize_text_dataset(Dataset::from_samples({s})));
  for (const auto* d : {&tr, &te}) {
    for (const auto& s : d->samples) parts.insert(serialize_text_dataset(Dataset::from_samples({s})));
  }
  CHECK(all == parts);

  const auto again = split(ds, {0.8, 11});
  CHECK(again.first == tr);
  CHECK(again.second == te);

  const auto [a, b] = split(synth_generate(2, 2, 0.0, 1), {0.5, 1});
  CHECK(a.size() == 2);
  CHECK(b.size() == 2);
  CHECK_THROWS(split(synth_generate(2, 1, 0.0, 1), {0.5, 1}));
}
