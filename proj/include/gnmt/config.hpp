// Copyright 2026 The gnmt-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gnmt/decode.hpp"
#include "gnmt/model.hpp"
#include "gnmt/training.hpp"

namespace gnmt {

struct RunPaths {
  std::filesystem::path train_source, train_target;
  std::filesystem::path dev_source, dev_target;
  std::filesystem::path test_source, test_target;
  std::filesystem::path vocab;
  std::filesystem::path run_dir;

  friend bool operator==(const RunPaths&, const RunPaths&) = default;
};

/// Everything a run needs, read from a sectioned key = value file
/// ([model], [train], [decode], [paths], [run]).
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  ScoreParams decode;
  RunPaths paths;
  std::optional<std::uint64_t> seed;
  int vocab_tokens = 8000;  // wordpiece D
  int batch_cap = 35;
  bool quantize = false;
  bool rl = false;
  long checkpoint_interval = 0;  // 0: only the final checkpoint
  long eval_interval = 0;        // dev evaluation cadence during ML training

  static RunConfig load(const std::filesystem::path& path);
  /// Relative paths are resolved against `base_dir`.
  static RunConfig parse(const std::string& text, const std::filesystem::path& base_dir = {});
  void write(std::ostream& out) const;
  std::string to_string() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Line-aligned source/target files; throws on count mismatch or empty lines.
struct ParallelText {
  std::vector<std::string> source;
  std::vector<std::string> target;

  static ParallelText load(const std::filesystem::path& source, const std::filesystem::path& target);
};

std::vector<std::string> read_lines(const std::filesystem::path& path);

}  // namespace gnmt
