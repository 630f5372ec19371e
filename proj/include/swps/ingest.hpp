#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "swps/trajectory.hpp"

namespace swps {

/// One labeled handwritten character as read from disk.
struct RawSample {
  std::string label;
  Trajectory trajectory;

  friend bool operator==(const RawSample&, const RawSample&) = default;
};

/// Bijection between class tags and contiguous indices, ordered by tag.
class LabelMap {
 public:
  LabelMap() = default;
  explicit LabelMap(std::vector<std::string> tags);  // sorted and deduplicated

  std::size_t size() const { return tags_.size(); }
  const std::string& tag(std::size_t index) const { return tags_.at(index); }
  /// Throws std::out_of_range for unknown tags.
  int index(const std::string& tag) const;
  bool contains(const std::string& tag) const { return index_.count(tag) != 0; }
  const std::vector<std::string>& tags() const { return tags_; }

  friend bool operator==(const LabelMap& a, const LabelMap& b) {
    return a.tags_ == b.tags_;
  }

 private:
  std::vector<std::string> tags_;
  std::map<std::string, int> index_;
};

struct Dataset {
  std::vector<RawSample> samples;
  LabelMap labels;

  /// Builds the label map from the sorted distinct tags of `samples`.
  static Dataset from_samples(std::vector<RawSample> samples);
  int label_of(std::size_t i) const { return labels.index(samples.at(i).label); }
  std::size_t size() const { return samples.size(); }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Binary stroke records
//
// Each record is laid out little-endian as
//   u16 record_size   total bytes of the record, this field included
//   u8[4] tag         class tag, right-padded with zero bytes
//   u16 stroke_count
//   (i16 x, i16 y)*   (-1, 0) ends a stroke, (-1, -1) ends the character
// ---------------------------------------------------------------------------

struct BinaryImportOptions {
  /// iconv codepage of the tag bytes (e.g. "GB2312"). Empty keeps the raw
  /// bytes as the tag.
  std::string codepage;
};

std::vector<RawSample> parse_stroke_binary(std::span<const std::uint8_t> bytes,
                                           const BinaryImportOptions& opts = {});

/// Inverse of parse_stroke_binary for raw-byte tags. Coordinates must be
/// integral and fit in int16; tags must be 1-4 bytes.
std::vector<std::uint8_t> write_stroke_binary(const std::vector<RawSample>& samples);

// ---------------------------------------------------------------------------
// Text dataset, one record per line:
//   record  := tag SP strokes NL
//   strokes := stroke ("|" stroke)*
//   stroke  := point (";" point)*
//   point   := real "," real
// ---------------------------------------------------------------------------

Dataset parse_text_dataset(std::istream& in);
Dataset parse_text_dataset(const std::string& text);
/// Shortest round-trip formatting of every coordinate.
std::string serialize_text_dataset(const Dataset& dataset);

Dataset load_dataset_file(const std::string& path, bool binary = false,
                          const BinaryImportOptions& opts = {});

// ---------------------------------------------------------------------------
// Synthetic glyphs
// ---------------------------------------------------------------------------

/// Number of built-in polyline templates.
std::size_t synth_template_count();
/// Template `index` in template units (roughly the unit square).
const Trajectory& synth_template(std::size_t index);
/// Tag of template `index` ("g00", "g01", ...).
std::string synth_tag(std::size_t index);

Dataset synth_generate(int n_classes, int per_class, double noise, std::uint64_t seed);

/// Stratified per-class split. Train gets floor(n_c * fraction) samples of
/// each class, the test side the remainder. Both keep `dataset.labels`.
std::pair<Dataset, Dataset> split(const Dataset& dataset, const SplitSpec& spec);

}  // namespace swps
