// Copyright 2026 The gnmt-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gnmt/model.hpp"
#include "gnmt/training.hpp"

namespace gnmt {

/// Synthetic reversal task: the target is the source read backwards.
struct ToyTask {
  int symbols = 20;
  int min_len = 3;
  int max_len = 8;

  /// Content symbols occupy ids kNumReserved .. kNumReserved + symbols - 1.
  int vocab_size() const { return static_cast<int>(kNumReserved) + symbols; }
  std::vector<SentencePair> generate(std::size_t pairs, std::uint64_t seed) const;
  /// Surface word for a content id ("a", "b", ...; "s26" beyond the alphabet).
  std::string word(TokenId id) const;
};

/// Toy model: 3 + 3 layers of width 32. Without clipping, delta and gamma
/// are infinite.
ModelConfig toy_model_config(const ToyTask& task, bool clip_trained = true);

/// Toy schedule: 4000 steps of batch 32, Adam for 3000, then SGD with the
/// rate halved every 333 steps; delta reaches its final value at step 2400.
TrainConfig toy_train_config(std::uint64_t seed = 1);

}  // namespace gnmt
