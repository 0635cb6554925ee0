// Copyright 2026 The gnmt-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnmt/toy.hpp"

#include <algorithm>

namespace gnmt {

std::vector<SentencePair> ToyTask::generate(std::size_t pairs, std::uint64_t seed) const {
  if (symbols < 1 || min_len < 1 || max_len < min_len) throw ConfigError("invalid toy task shape");
  Rng rng(seed);
  std::vector<SentencePair> out(pairs);
  for (SentencePair& p : out) {
    const auto len = static_cast<std::size_t>(min_len) + rng.below(static_cast<std::uint64_t>(max_len - min_len + 1));
    for (std::size_t i = 0; i < len; ++i)
      p.source.push_back(static_cast<TokenId>(kNumReserved + rng.below(static_cast<std::uint64_t>(symbols))));
    p.target.assign(p.source.rbegin(), p.source.rend());
    p.target.push_back(kEosId);
  }
  return out;
}

std::string ToyTask::word(TokenId id) const {
  const int k = id - static_cast<int>(kNumReserved);
  if (k < 0 || k >= symbols) throw UsageError("toy word: id outside the content range");
  if (k < 26) return std::string(1, static_cast<char>('a' + k));
  return "s" + std::to_string(k);
}

ModelConfig toy_model_config(const ToyTask& task, bool clip_trained) {
  ModelConfig c;
  c.vocab_size = task.vocab_size();
  c.encoder_layers = 3;
  c.decoder_layers = 3;
  c.hidden_size = 32;
  c.embedding_size = 32;
  c.attention_hidden = 32;
  if (!clip_trained) {
    c.accumulator_clip = kNoClip;
    c.logit_clip = kNoClip;
  }
  return c;
}

TrainConfig toy_train_config(std::uint64_t seed) {
  TrainConfig t;
  t.batch_size = 32;
  t.total_steps = 4000;
  t.adam_steps = 3000;
  t.adam_lr = 0.003;
  t.sgd_lr = 0.1;
  t.anneal_start = 3000;
  t.anneal_interval = 333;
  t.delta_anneal_steps = 2400;
  t.seed = seed;
  return t;
}

}  // namespace gnmt
