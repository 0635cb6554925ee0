// Copyright 2026 The gnmt-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gnmt/model.hpp"
#include "gnmt/tensor.hpp"

namespace gnmt {

inline constexpr char kCheckpointMagic[8] = {'G', 'N', 'M', 'T', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class CheckpointFormat : std::uint32_t { kFloat = 1, kQuantized = 2 };

struct Int8Array {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::int8_t> data;

  friend bool operator==(const Int8Array&, const Int8Array&) = default;
};

/// On-disk container shared by float and quantized checkpoints.
///
/// Layout (little-endian): magic[8], u32 version, u32 format, u32 meta byte
/// count, meta text ("key=value" lines), u32 entry count, then per entry:
/// u16 name length, name, u8 dtype (0 = f64, 1 = i8), u64 rows, u64 cols,
/// rows*cols payload values.
struct Archive {
  CheckpointFormat format = CheckpointFormat::kFloat;
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, Tensor2D>> tensors;
  std::vector<std::pair<std::string, Int8Array>> int8_arrays;

  const Tensor2D& tensor(const std::string& name) const;
  const Tensor2D* find_tensor(const std::string& name) const;
  const Int8Array& int8(const std::string& name) const;
  const std::string& meta_value(const std::string& key) const;

  friend bool operator==(const Archive&, const Archive&) = default;
};

std::string serialize_archive(const Archive& archive);
Archive deserialize_archive(const std::string& bytes);
void write_archive(const std::filesystem::path& path, const Archive& archive);
Archive read_archive(const std::filesystem::path& path);

/// Shortest round-trip text form of a double ("inf" for infinity).
std::string format_real(double v);
double parse_real(const std::string& s);

void config_to_meta(const ModelConfig& config, std::map<std::string, std::string>& meta);
ModelConfig config_from_meta(const std::map<std::string, std::string>& meta);

Archive make_float_archive(const ModelParams& params, const ModelConfig& config);
ModelParams params_from_archive(const Archive& archive, const ModelConfig& config);

void save_checkpoint(const ModelParams& params, const ModelConfig& config, const std::filesystem::path& path);

struct LoadedModel {
  ModelConfig config;
  ModelParams params;
};
LoadedModel load_checkpoint(const std::filesystem::path& path);

}  // namespace gnmt
