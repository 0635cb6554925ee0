// Copyright 2026 The gnmt-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>

#include "gnmt/model.hpp"

namespace gnmt::testing {

inline ModelConfig tiny_config(int vocab = 7, int layers = 2, int hidden = 4) {
  ModelConfig c;
  c.vocab_size = vocab;
  c.encoder_layers = layers;
  c.decoder_layers = layers;
  c.hidden_size = hidden;
  c.embedding_size = hidden;
  c.attention_hidden = hidden;
  return c;
}

// Weights drawn from U[-scale, scale].
inline ModelParams random_params(const ModelConfig& c, std::uint64_t seed, double scale = 0.5) {
  ModelParams p = ModelParams::init_uniform(c, seed);
  p.scale(scale / kInitRange);
  return p;
}

inline TokenSeq random_tokens(Rng& rng, std::size_t n, int vocab) {
  TokenSeq s(n);
  for (auto& t : s) t = static_cast<TokenId>(rng.below(static_cast<std::uint64_t>(vocab)));
  return s;
}

// Random content tokens (no BOS/EOS) followed by EOS.
inline TokenSeq random_target(Rng& rng, std::size_t n, const ModelConfig& c) {
  TokenSeq s;
  while (s.size() < n) {
    const auto t = static_cast<TokenId>(rng.below(static_cast<std::uint64_t>(c.vocab_size)));
    if (t != c.eos_id && t != c.bos_id) s.push_back(t);
  }
  s.push_back(c.eos_id);
  return s;
}

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "gnmt-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace gnmt::testing
