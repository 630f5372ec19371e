#include "swps/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iconv.h>
#include <iterator>
#include <memory>
#include <set>
#include <sstream>

#include "swps/common.hpp"

namespace swps {

LabelMap::LabelMap(std::vector<std::string> tags) {
  std::sort(tags.begin(), tags.end());
  tags.erase(std::unique(tags.begin(), tags.end()), tags.end());
  tags_ = std::move(tags);
  for (std::size_t i = 0; i < tags_.size(); ++i) index_.emplace(tags_[i], static_cast<int>(i));
}

int LabelMap::index(const std::string& tag) const {
  auto it = index_.find(tag);
  if (it == index_.end()) throw std::out_of_range("unknown class tag '" + tag + "'");
  return it->second;
}

Dataset Dataset::from_samples(std::vector<RawSample> samples) {
  std::vector<std::string> tags;
  tags.reserve(samples.size());
  for (const auto& s : samples) tags.push_back(s.label);
  Dataset d;
  d.labels = LabelMap(std::move(tags));
  d.samples = std::move(samples);
  return d;
}

// ---------------------------------------------------------------------------
// Binary records

namespace {

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  bool done() const { return pos_ >= bytes_.size(); }

  std::uint16_t u16(const char* what) {
    need(2, what);
    std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::int16_t i16(const char* what) { return static_cast<std::int16_t>(u16(what)); }
  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n, const char* what) {
    if (pos_ + n > bytes_.size()) {
      throw ParseError("truncated record: expected " + std::string(what) + " at byte offset " +
                           std::to_string(pos_),
                       pos_);
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::string decode_tag(std::span<const std::uint8_t> raw, const std::string& codepage,
                       std::size_t offset) {
  std::size_t n = raw.size();
  while (n > 0 && raw[n - 1] == 0) --n;
  std::string bytes(raw.begin(), raw.begin() + static_cast<std::ptrdiff_t>(n));
  if (codepage.empty()) return bytes;

  iconv_t cd = iconv_open("UTF-8", codepage.c_str());
  if (cd == reinterpret_cast<iconv_t>(-1)) {
    throw ParseError("unsupported tag codepage '" + codepage + "'", offset);
  }
  std::unique_ptr<void, int (*)(iconv_t)> guard(cd, iconv_close);
  std::string out(bytes.size() * 4 + 4, '\0');
  char* in_ptr = bytes.data();
  std::size_t in_left = bytes.size();
  char* out_ptr = out.data();
  std::size_t out_left = out.size();
  if (iconv(cd, &in_ptr, &in_left, &out_ptr, &out_left) == static_cast<std::size_t>(-1)) {
    throw ParseError("tag bytes are not valid " + codepage, offset);
  }
  out.resize(out.size() - out_left);
  return out;
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

std::int16_t to_i16(double v) {
  if (!(v == std::floor(v)) || v < -32768.0 || v > 32767.0) {
    throw std::invalid_argument("coordinate " + std::to_string(v) +
                                " is not representable as int16");
  }
  return static_cast<std::int16_t>(v);
}

}  // namespace

std::vector<RawSample> parse_stroke_binary(std::span<const std::uint8_t> bytes,
                                           const BinaryImportOptions& opts) {
  std::vector<RawSample> samples;
  ByteReader r(bytes);
  while (!r.done()) {
    const std::size_t start = r.offset();
    const std::uint16_t record_size = r.u16("record size");
    const auto tag_bytes = r.take(4, "tag code");
    const std::uint16_t stroke_count = r.u16("stroke count");

    RawSample sample;
    sample.label = decode_tag(tag_bytes, opts.codepage, start + 2);
    Stroke current;
    for (;;) {
      const std::int16_t x = r.i16("point");
      const std::int16_t y = r.i16("point");
      if (x == -1 && y == -1) break;
      if (x == -1 && y == 0) {
        if (current.empty()) {
          throw StructuralError("empty stroke in record at byte offset " + std::to_string(start));
        }
        sample.trajectory.strokes.push_back(std::move(current));
        current.clear();
        continue;
      }
      current.push_back({static_cast<double>(x), static_cast<double>(y)});
    }
    if (!current.empty()) {
      throw StructuralError("unterminated stroke in record at byte offset " +
                            std::to_string(start));
    }
    if (sample.trajectory.strokes.size() != stroke_count) {
      throw StructuralError("record at byte offset " + std::to_string(start) + " declares " +
                            std::to_string(stroke_count) + " strokes but contains " +
                            std::to_string(sample.trajectory.strokes.size()));
    }
    if (sample.trajectory.strokes.empty()) {
      throw StructuralError("record at byte offset " + std::to_string(start) + " has no strokes");
    }
    if (r.offset() - start != record_size) {
      throw StructuralError("record at byte offset " + std::to_string(start) + " declares size " +
                            std::to_string(record_size) + " but spans " +
                            std::to_string(r.offset() - start) + " bytes");
    }
    samples.push_back(std::move(sample));
  }
  return samples;
}

std::vector<std::uint8_t> write_stroke_binary(const std::vector<RawSample>& samples) {
  std::vector<std::uint8_t> out;
  for (const auto& s : samples) {
    if (s.label.empty() || s.label.size() > 4) {
      throw std::invalid_argument("binary tags must be 1-4 bytes: '" + s.label + "'");
    }
    if (s.trajectory.strokes.empty() || s.trajectory.strokes.size() > 0xffff) {
      throw std::invalid_argument("stroke count out of range for tag '" + s.label + "'");
    }
    std::vector<std::uint8_t> rec;
    put_u16(rec, 0);  // patched below
    for (std::size_t i = 0; i < 4; ++i) {
      rec.push_back(i < s.label.size() ? static_cast<std::uint8_t>(s.label[i]) : 0);
    }
    put_u16(rec, static_cast<std::uint16_t>(s.trajectory.strokes.size()));
    for (const auto& stroke : s.trajectory.strokes) {
      if (stroke.empty()) throw std::invalid_argument("empty stroke");
      for (const auto& p : stroke) {
        const auto x = to_i16(p.x);
        const auto y = to_i16(p.y);
        if (x == -1 && (y == 0 || y == -1)) {
          throw std::invalid_argument("point collides with a terminator code");
        }
        put_u16(rec, static_cast<std::uint16_t>(x));
        put_u16(rec, static_cast<std::uint16_t>(y));
      }
      put_u16(rec, static_cast<std::uint16_t>(-1));
      put_u16(rec, 0);
    }
    put_u16(rec, static_cast<std::uint16_t>(-1));
    put_u16(rec, static_cast<std::uint16_t>(-1));
    if (rec.size() > 0xffff) throw std::invalid_argument("record exceeds 65535 bytes");
    rec[0] = static_cast<std::uint8_t>(rec.size() & 0xff);
    rec[1] = static_cast<std::uint8_t>(rec.size() >> 8);
    out.insert(out.end(), rec.begin(), rec.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Text format

namespace {

double parse_real(std::string_view tok, std::size_t line) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (!tok.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || tok.empty()) {
    throw ParseError("line " + std::to_string(line) + ": invalid number '" + std::string(tok) + "'",
                     line);
  }
  if (!std::isfinite(v)) {
    throw ParseError("line " + std::to_string(line) + ": non-finite coordinate", line);
  }
  return v;
}

std::vector<std::string_view> split_on(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (;;) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(s.substr(start));
      return parts;
    }
    parts.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

RawSample parse_record(std::string_view line, std::size_t line_no) {
  const auto sp = line.find(' ');
  if (sp == std::string_view::npos || sp == 0) {
    throw ParseError("line " + std::to_string(line_no) + ": expected '<tag> <strokes>'", line_no);
  }
  RawSample sample;
  sample.label = std::string(line.substr(0, sp));
  const auto body = line.substr(sp + 1);
  if (body.find_first_of(" \t\r") != std::string_view::npos) {
    throw ParseError("line " + std::to_string(line_no) + ": unexpected whitespace in strokes",
                     line_no);
  }
  for (auto stroke_text : split_on(body, '|')) {
    if (stroke_text.empty()) {
      throw StructuralError("line " + std::to_string(line_no) + ": empty stroke");
    }
    Stroke stroke;
    for (auto point_text : split_on(stroke_text, ';')) {
      const auto comma = point_text.find(',');
      if (comma == std::string_view::npos) {
        throw ParseError("line " + std::to_string(line_no) + ": malformed point '" +
                             std::string(point_text) + "'",
                         line_no);
      }
      stroke.push_back({parse_real(point_text.substr(0, comma), line_no),
                        parse_real(point_text.substr(comma + 1), line_no)});
    }
    sample.trajectory.strokes.push_back(std::move(stroke));
  }
  return sample;
}

void append_real(std::string& out, double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

}  // namespace

Dataset parse_text_dataset(std::istream& in) {
  std::vector<RawSample> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    samples.push_back(parse_record(line, line_no));
  }
  return Dataset::from_samples(std::move(samples));
}

Dataset parse_text_dataset(const std::string& text) {
  std::istringstream in(text);
  return parse_text_dataset(in);
}

std::string serialize_text_dataset(const Dataset& dataset) {
  std::string out;
  for (const auto& s : dataset.samples) {
    if (s.label.empty() || s.label.find_first_of(" \t\r\n") != std::string::npos) {
      throw std::invalid_argument("tag '" + s.label + "' is empty or contains whitespace");
    }
    out += s.label;
    out += ' ';
    bool first_stroke = true;
    for (const auto& stroke : s.trajectory.strokes) {
      if (stroke.empty()) throw std::invalid_argument("empty stroke in sample '" + s.label + "'");
      if (!first_stroke) out += '|';
      first_stroke = false;
      bool first_point = true;
      for (const auto& p : stroke) {
        if (!first_point) out += ';';
        first_point = false;
        append_real(out, p.x);
        out += ',';
        append_real(out, p.y);
      }
    }
    out += '\n';
  }
  return out;
}

Dataset load_dataset_file(const std::string& path, bool binary, const BinaryImportOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset '" + path + "'");
  if (!binary) return parse_text_dataset(in);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return Dataset::from_samples(parse_stroke_binary(bytes, opts));
}

// ---------------------------------------------------------------------------
// Synthetic glyphs

namespace {

Stroke arc(double cx, double cy, double r0, double r1, double a0, double a1, int n) {
  Stroke s;
  for (int i = 0; i <= n; ++i) {
    const double f = static_cast<double>(i) / n;
    const double a = a0 + (a1 - a0) * f;
    const double r = r0 + (r1 - r0) * f;
    s.push_back({cx + r * std::cos(a), cy + r * std::sin(a)});
  }
  return s;
}

// Version 1 of the template set. Changing any point changes every synthetic
// dataset, so append new templates instead of editing existing ones.
std::vector<Trajectory> build_templates() {
  std::vector<Trajectory> t;
  // loop: closed circle starting at the top, counter-clockwise
  t.push_back({{arc(0.5, 0.5, 0.4, 0.4, kPi / 2, kPi / 2 + 2 * kPi, 16)}});
  // one
  t.push_back({{{{0.35, 0.75}, {0.55, 0.95}, {0.55, 0.05}}}});
  // zed
  t.push_back({{{{0.1, 0.9}, {0.9, 0.9}, {0.1, 0.1}, {0.9, 0.1}}}});
  // vee
  t.push_back({{{{0.1, 0.9}, {0.5, 0.1}, {0.9, 0.9}}}});
  // seven
  t.push_back({{{{0.1, 0.9}, {0.9, 0.9}, {0.4, 0.05}}}});
  // plus (two strokes)
  t.push_back({{{{0.5, 0.9}, {0.5, 0.1}}, {{0.1, 0.5}, {0.9, 0.5}}}});
  // ess
  t.push_back({{{{0.8, 0.85},
                 {0.5, 0.95},
                 {0.2, 0.8},
                 {0.3, 0.6},
                 {0.5, 0.5},
                 {0.7, 0.4},
                 {0.8, 0.2},
                 {0.5, 0.05},
                 {0.2, 0.15}}}});
  // hook
  t.push_back({{{{0.7, 0.9}, {0.7, 0.25}, {0.6, 0.1}, {0.4, 0.05}, {0.25, 0.2}}}});
  // tee (two strokes)
  t.push_back({{{{0.1, 0.9}, {0.9, 0.9}}, {{0.5, 0.9}, {0.5, 0.1}}}});
  // check
  t.push_back({{{{0.1, 0.5}, {0.4, 0.1}, {0.9, 0.9}}}});
  // spiral: inward, one and a half turns
  t.push_back({{arc(0.5, 0.5, 0.45, 0.1, 0.0, 3 * kPi, 24)}});
  // eich (three strokes)
  t.push_back({{{{0.2, 0.9}, {0.2, 0.1}}, {{0.8, 0.9}, {0.8, 0.1}}, {{0.2, 0.5}, {0.8, 0.5}}}});
  // triangle, closed
  t.push_back({{{{0.5, 0.9}, {0.1, 0.1}, {0.9, 0.1}, {0.5, 0.9}}}});
  // em
  t.push_back({{{{0.1, 0.1}, {0.2, 0.9}, {0.5, 0.4}, {0.8, 0.9}, {0.9, 0.1}}}});
  return t;
}

const std::vector<Trajectory>& templates() {
  static const std::vector<Trajectory> t = build_templates();
  return t;
}

}  // namespace

std::size_t synth_template_count() { return templates().size(); }

const Trajectory& synth_template(std::size_t index) { return templates().at(index); }

std::string synth_tag(std::size_t index) {
  std::string s = std::to_string(index);
  if (s.size() < 2) s.insert(0, 2 - s.size(), '0');
  return "g" + s;
}

Dataset synth_generate(int n_classes, int per_class, double noise, std::uint64_t seed) {
  if (n_classes < 1 || static_cast<std::size_t>(n_classes) > synth_template_count()) {
    throw std::invalid_argument("n_classes must be in [1, " +
                                std::to_string(synth_template_count()) + "]");
  }
  if (per_class < 1) throw std::invalid_argument("per_class must be positive");
  if (!(noise >= 0.0) || !std::isfinite(noise)) {
    throw std::invalid_argument("noise must be finite and non-negative");
  }
  std::vector<RawSample> samples;
  samples.reserve(static_cast<std::size_t>(n_classes) * per_class);
  for (int c = 0; c < n_classes; ++c) {
    const auto& tmpl = synth_template(static_cast<std::size_t>(c));
    for (int k = 0; k < per_class; ++k) {
      Rng rng = make_stream(seed, {static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(k)});
      RawSample s{synth_tag(static_cast<std::size_t>(c)), tmpl};
      if (noise > 0.0) {
        for (auto& stroke : s.trajectory.strokes) {
          for (auto& p : stroke) {
            p.x += noise * gaussian(rng);
            p.y += noise * gaussian(rng);
          }
        }
      }
      samples.push_back(std::move(s));
    }
  }
  return Dataset::from_samples(std::move(samples));
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw std::invalid_argument("train_fraction must lie in (0, 1)");
  }
  std::vector<std::vector<std::size_t>> by_class(dataset.labels.size());
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    by_class[static_cast<std::size_t>(dataset.label_of(i))].push_back(i);
  }
  std::vector<bool> to_train(dataset.samples.size(), false);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    if (idx.size() < 2) {
      throw std::invalid_argument("class '" + dataset.labels.tag(c) +
                                  "' has fewer than 2 samples");
    }
    Rng rng = make_stream(spec.seed, {c});
    for (std::size_t i = idx.size() - 1; i > 0; --i) {
      std::swap(idx[i], idx[rng() % (i + 1)]);
    }
    auto n_train = static_cast<std::size_t>(
        std::floor(static_cast<double>(idx.size()) * spec.train_fraction + 1e-9));
    n_train = std::clamp<std::size_t>(n_train, 1, idx.size() - 1);
    for (std::size_t k = 0; k < n_train; ++k) to_train[idx[k]] = true;
  }
  Dataset train, test;
  train.labels = dataset.labels;
  test.labels = dataset.labels;
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    (to_train[i] ? train : test).samples.push_back(dataset.samples[i]);
  }
  return {std::move(train), std::move(test)};
}

}  // namespace swps
