#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "swps/lru_net.hpp"

namespace swps {

// ---------------------------------------------------------------------------
// Checkpoints
//
//   char[8]  magic "SWPSCKPT"
//   u32      version (1)
//   u64      header length in bytes
//   header   UTF-8 JSON: model config, run config, parameter table
//   f64[]    parameters in param_refs order, each column-major
//   f64[]    per block: running mean then running variance
//
// All integers and doubles are little-endian. No timestamps are stored.
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  LruModel model;
  /// Opaque JSON text of the run configuration that produced the model.
  std::string run_config;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

/// Writes to a temporary sibling and renames it over `path`.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// ---------------------------------------------------------------------------
// Feature container: a concatenation of records
//
//   char[4]  magic "SWPF"
//   u32      version (1)
//   u32      rows (K)
//   u32      cols (dim)
//   f64[K * dim] row-major values
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kFeatureVersion = 1;

void append_feature_record(std::vector<std::uint8_t>& out, const RowMatrix& m);
std::vector<RowMatrix> decode_feature_records(const std::vector<std::uint8_t>& bytes);

/// Writes all bytes to `path` through a temporary file and rename.
void write_file_atomic(const std::string& path, const std::vector<std::uint8_t>& bytes);
void write_file_atomic(const std::string& path, const std::string& text);
std::vector<std::uint8_t> read_file_bytes(const std::string& path);
std::string read_file_text(const std::string& path);

}  // namespace swps
