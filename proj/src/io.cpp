#include "swps/io.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "json.hpp"

namespace swps {

static_assert(std::endian::native == std::endian::little,
              "binary formats are written in host order; big-endian hosts are unsupported");

namespace {

using nlohmann::json;

template <class T>
void put(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

void put_doubles(std::vector<std::uint8_t>& out, const double* d, std::size_t n) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(d);
  out.insert(out.end(), p, p + n * sizeof(double));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : b_(b) {}
  template <class T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, b_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void get_doubles(double* d, std::size_t n, const char* what) {
    need(n * sizeof(double), what);
    std::memcpy(d, b_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
  }
  std::string get_string(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t offset() const { return pos_; }
  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (pos_ + n > b_.size()) {
      throw ParseError(std::string("truncated data reading ") + what + " at byte offset " +
                           std::to_string(pos_),
                       pos_);
    }
  }
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

constexpr char kCkptMagic[8] = {'S', 'W', 'P', 'S', 'C', 'K', 'P', 'T'};
constexpr char kFeatMagic[4] = {'S', 'W', 'P', 'F'};

json model_config_json(const ModelConfig& c) {
  return {{"input_dim", c.input_dim}, {"hidden", c.hidden},   {"state", c.state},
          {"blocks", c.blocks},       {"classes", c.classes}, {"dropout", c.dropout},
          {"r_min", c.init.r_min},    {"r_max", c.init.r_max}, {"max_phase", c.init.max_phase},
          {"parallel_scan", c.parallel_scan}};
}

ModelConfig model_config_from(const json& j) {
  ModelConfig c;
  c.input_dim = j.at("input_dim").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.state = j.at("state").get<int>();
  c.blocks = j.at("blocks").get<int>();
  c.classes = j.at("classes").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.init.r_min = j.at("r_min").get<double>();
  c.init.r_max = j.at("r_max").get<double>();
  c.init.max_phase = j.at("max_phase").get<double>();
  c.parallel_scan = j.value("parallel_scan", false);
  return c;
}

// Zero-initialized parameters with the shapes implied by the config.
LruModel shaped_model(const ModelConfig& c) {
  LruModel m;
  m.config = c;
  const int H = c.hidden;
  m.params.enc_w = Matrix::Zero(H, c.input_dim);
  m.params.enc_b = Vector::Zero(H);
  for (int b = 0; b < c.blocks; ++b) {
    BlockParams blk;
    blk.norm.scale = Vector::Zero(H);
    blk.norm.shift = Vector::Zero(H);
    blk.lru.nu_log = Vector::Zero(c.state);
    blk.lru.theta = Vector::Zero(c.state);
    blk.lru.B_re = Matrix::Zero(c.state, H);
    blk.lru.B_im = Matrix::Zero(c.state, H);
    blk.lru.C_re = Matrix::Zero(H, c.state);
    blk.lru.C_im = Matrix::Zero(H, c.state);
    blk.lru.D = Vector::Zero(H);
    blk.gate_w = Matrix::Zero(2 * H, H);
    blk.gate_b = Vector::Zero(2 * H);
    m.params.blocks.push_back(std::move(blk));
    m.running.push_back({Vector::Zero(H), Vector::Zero(H)});
  }
  m.params.head_w = Matrix::Zero(c.classes, H);
  m.params.head_b = Vector::Zero(c.classes);
  return m;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  const auto& model = ckpt.model;
  json header;
  header["format"] = "swps-lru checkpoint";
  header["model"] = model_config_json(model.config);
  header["run_config"] = ckpt.run_config.empty() ? json::object() : json::parse(ckpt.run_config);
  json table = json::array();
  for (const auto& r : param_refs(model.params)) {
    table.push_back({{"name", r.name}, {"rows", r.rows}, {"cols", r.cols}});
  }
  header["params"] = std::move(table);
  header["running_blocks"] = model.running.size();
  const std::string text = header.dump(2);

  std::vector<std::uint8_t> out;
  out.insert(out.end(), kCkptMagic, kCkptMagic + 8);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& r : param_refs(model.params)) {
    put_doubles(out, r.data, static_cast<std::size_t>(r.size()));
  }
  for (const auto& rs : model.running) {
    put_doubles(out, rs.mean.data(), static_cast<std::size_t>(rs.mean.size()));
    put_doubles(out, rs.var.data(), static_cast<std::size_t>(rs.var.size()));
  }
  return out;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  const std::string magic = r.get_string(8, "magic");
  if (magic != std::string(kCkptMagic, 8)) throw ParseError("not a swps-lru checkpoint", 0);
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version), 8);
  }
  const auto len = r.get<std::uint64_t>("header length");
  const json header = json::parse(r.get_string(static_cast<std::size_t>(len), "header"));

  Checkpoint ckpt;
  ckpt.model = shaped_model(model_config_from(header.at("model")));
  const auto& run = header.at("run_config");
  ckpt.run_config = run.empty() ? std::string() : run.dump();

  auto refs = param_refs(ckpt.model.params);
  const auto& table = header.at("params");
  if (table.size() != refs.size()) throw StructuralError("checkpoint parameter table does not match its model config");
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (table[i].at("name") != refs[i].name || table[i].at("rows") != refs[i].rows ||
        table[i].at("cols") != refs[i].cols) {
      throw StructuralError("checkpoint parameter '" + refs[i].name + "' has an unexpected shape");
    }
    r.get_doubles(refs[i].data, static_cast<std::size_t>(refs[i].size()), refs[i].name.c_str());
  }
  for (auto& rs : ckpt.model.running) {
    r.get_doubles(rs.mean.data(), static_cast<std::size_t>(rs.mean.size()), "running mean");
    r.get_doubles(rs.var.data(), static_cast<std::size_t>(rs.var.size()), "running variance");
  }
  if (!r.done()) throw StructuralError("trailing bytes after checkpoint payload");
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(read_file_bytes(path)); }

void append_feature_record(std::vector<std::uint8_t>& out, const RowMatrix& m) {
  out.insert(out.end(), kFeatMagic, kFeatMagic + 4);
  put<std::uint32_t>(out, kFeatureVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
  put_doubles(out, m.data(), static_cast<std::size_t>(m.size()));
}

std::vector<RowMatrix> decode_feature_records(const std::vector<std::uint8_t>& bytes) {
  std::vector<RowMatrix> out;
  Reader r(bytes);
  while (!r.done()) {
    const std::size_t at = r.offset();
    if (r.get_string(4, "magic") != std::string(kFeatMagic, 4)) {
      throw ParseError("bad feature record magic at byte offset " + std::to_string(at), at);
    }
    const auto version = r.get<std::uint32_t>("version");
    if (version != kFeatureVersion) throw ParseError("unsupported feature record version", at);
    const auto rows = r.get<std::uint32_t>("rows");
    const auto cols = r.get<std::uint32_t>("cols");
    RowMatrix m(rows, cols);
    r.get_doubles(m.data(), static_cast<std::size_t>(m.size()), "feature values");
    out.push_back(std::move(m));
  }
  return out;
}

void write_file_atomic(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, target);
}

void write_file_atomic(const std::string& path, const std::string& text) {
  write_file_atomic(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_file_text(const std::string& path) {
  const auto b = read_file_bytes(path);
  return {b.begin(), b.end()};
}

}  // namespace swps
