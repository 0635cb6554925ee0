// Copyright 2026 The gnmt-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnmt/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace gnmt {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  template <class T>
  void put(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}

  template <class T>
  T get() {
    T v;
    need(sizeof(T));
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void bytes(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw FormatError("checkpoint truncated");
  }
  const std::string& in_;
  std::size_t pos_ = 0;
};

constexpr std::uint8_t kDtypeF64 = 0;
constexpr std::uint8_t kDtypeI8 = 1;

}  // namespace

const Tensor2D* Archive::find_tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

const Tensor2D& Archive::tensor(const std::string& name) const {
  if (const Tensor2D* t = find_tensor(name)) return *t;
  throw FormatError("checkpoint is missing tensor '" + name + "'");
}

const Int8Array& Archive::int8(const std::string& name) const {
  for (const auto& [n, a] : int8_arrays)
    if (n == name) return a;
  throw FormatError("checkpoint is missing int8 array '" + name + "'");
}

const std::string& Archive::meta_value(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw FormatError("checkpoint is missing metadata key '" + key + "'");
  return it->second;
}

std::string serialize_archive(const Archive& archive) {
  Writer w;
  w.bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(archive.format));
  std::string meta;
  for (const auto& [k, v] : archive.meta) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos)
      throw FormatError("metadata entry '" + k + "' cannot be serialized");
    meta += k + "=" + v + "\n";
  }
  w.put<std::uint32_t>(static_cast<std::uint32_t>(meta.size()));
  w.bytes(meta.data(), meta.size());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(archive.tensors.size() + archive.int8_arrays.size()));
  auto header = [&](const std::string& name, std::uint8_t dtype, std::size_t rows, std::size_t cols) {
    w.put<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.put<std::uint8_t>(dtype);
    w.put<std::uint64_t>(rows);
    w.put<std::uint64_t>(cols);
  };
  for (const auto& [name, t] : archive.tensors) {
    header(name, kDtypeF64, t.rows(), t.cols());
    w.bytes(t.data().data(), t.size() * sizeof(double));
  }
  for (const auto& [name, a] : archive.int8_arrays) {
    if (a.data.size() != a.rows * a.cols) throw ShapeError("int8 array '" + name + "' has inconsistent size");
    header(name, kDtypeI8, a.rows, a.cols);
    w.bytes(a.data.data(), a.data.size());
  }
  return w.take();
}

Archive deserialize_archive(const std::string& bytes) {
  Reader r(bytes);
  char magic[sizeof(kCheckpointMagic)];
  if (bytes.size() < sizeof(magic)) throw FormatError("checkpoint truncated");
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) throw FormatError("not a checkpoint (bad magic bytes)");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  Archive a;
  const auto fmt = r.get<std::uint32_t>();
  if (fmt != 1 && fmt != 2) throw FormatError("unknown checkpoint format flag " + std::to_string(fmt));
  a.format = static_cast<CheckpointFormat>(fmt);

  std::string meta(r.get<std::uint32_t>(), '\0');
  r.bytes(meta.data(), meta.size());
  std::istringstream lines(meta);
  for (std::string line; std::getline(lines, line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("malformed metadata line '" + line + "'");
    a.meta[line.substr(0, eq)] = line.substr(eq + 1);
  }

  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t e = 0; e < count; ++e) {
    std::string name(r.get<std::uint16_t>(), '\0');
    r.bytes(name.data(), name.size());
    const auto dtype = r.get<std::uint8_t>();
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    if (cols != 0 && rows > (std::uint64_t{1} << 40) / cols) throw FormatError("tensor '" + name + "' too large");
    if (dtype == kDtypeF64) {
      std::vector<double> data(rows * cols);
      r.bytes(data.data(), data.size() * sizeof(double));
      a.tensors.emplace_back(std::move(name), Tensor2D(rows, cols, std::move(data)));
    } else if (dtype == kDtypeI8) {
      Int8Array arr{rows, cols, std::vector<std::int8_t>(rows * cols)};
      r.bytes(arr.data.data(), arr.data.size());
      a.int8_arrays.emplace_back(std::move(name), std::move(arr));
    } else {
      throw FormatError("unknown dtype tag in tensor '" + name + "'");
    }
  }
  if (!r.done()) throw FormatError("trailing bytes after checkpoint payload");
  return a;
}

void write_archive(const std::filesystem::path& path, const Archive& archive) {
  const std::string bytes = serialize_archive(archive);
  // Write-then-rename so an interrupted save never leaves a torn file behind.
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

Archive read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_archive(ss.str());
}

std::string format_real(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw FormatError("cannot format real");
  return std::string(buf, end);
}

double parse_real(const std::string& s) {
  if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) throw FormatError("invalid real '" + s + "'");
  return v;
}

namespace {

int parse_int(const std::string& key, const std::string& s) {
  int v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) throw FormatError("invalid integer for '" + key + "': " + s);
  return v;
}

}  // namespace

void config_to_meta(const ModelConfig& c, std::map<std::string, std::string>& meta) {
  meta["model.encoder_layers"] = std::to_string(c.encoder_layers);
  meta["model.decoder_layers"] = std::to_string(c.decoder_layers);
  meta["model.hidden_size"] = std::to_string(c.hidden_size);
  meta["model.embedding_size"] = std::to_string(c.embedding_size);
  meta["model.residual_start_layer"] = std::to_string(c.residual_start_layer);
  meta["model.vocab_size"] = std::to_string(c.vocab_size);
  meta["model.attention_hidden"] = std::to_string(c.attention_hidden);
  meta["model.logit_clip"] = format_real(c.logit_clip);
  meta["model.accumulator_clip"] = format_real(c.accumulator_clip);
  meta["model.bos_id"] = std::to_string(c.bos_id);
  meta["model.eos_id"] = std::to_string(c.eos_id);
}

ModelConfig config_from_meta(const std::map<std::string, std::string>& meta) {
  auto get = [&](const std::string& k) -> const std::string& {
    auto it = meta.find(k);
    if (it == meta.end()) throw FormatError("checkpoint is missing metadata key '" + k + "'");
    return it->second;
  };
  ModelConfig c;
  c.encoder_layers = parse_int("encoder_layers", get("model.encoder_layers"));
  c.decoder_layers = parse_int("decoder_layers", get("model.decoder_layers"));
  c.hidden_size = parse_int("hidden_size", get("model.hidden_size"));
  c.embedding_size = parse_int("embedding_size", get("model.embedding_size"));
  c.residual_start_layer = parse_int("residual_start_layer", get("model.residual_start_layer"));
  c.vocab_size = parse_int("vocab_size", get("model.vocab_size"));
  c.attention_hidden = parse_int("attention_hidden", get("model.attention_hidden"));
  c.logit_clip = parse_real(get("model.logit_clip"));
  c.accumulator_clip = parse_real(get("model.accumulator_clip"));
  c.bos_id = parse_int("bos_id", get("model.bos_id"));
  c.eos_id = parse_int("eos_id", get("model.eos_id"));
  c.validate();
  return c;
}

Archive make_float_archive(const ModelParams& params, const ModelConfig& config) {
  Archive a;
  a.format = CheckpointFormat::kFloat;
  config_to_meta(config, a.meta);
  params.for_each([&](const std::string& name, const Tensor2D& t) { a.tensors.emplace_back("param." + name, t); });
  return a;
}

ModelParams params_from_archive(const Archive& archive, const ModelConfig& config) {
  ModelParams p = ModelParams::zeros(config);
  p.for_each([&](const std::string& name, Tensor2D& t) {
    const Tensor2D& src = archive.tensor("param." + name);
    if (!src.same_shape(t)) throw FormatError("tensor '" + name + "' has a shape inconsistent with the config");
    t = src;
  });
  return p;
}

void save_checkpoint(const ModelParams& params, const ModelConfig& config, const std::filesystem::path& path) {
  write_archive(path, make_float_archive(params, config));
}

LoadedModel load_checkpoint(const std::filesystem::path& path) {
  Archive a = read_archive(path);
  if (a.format != CheckpointFormat::kFloat) throw FormatError("'" + path.string() + "' is a quantized checkpoint");
  ModelConfig cfg = config_from_meta(a.meta);
  return {cfg, params_from_archive(a, cfg)};
}

}  // namespace gnmt
