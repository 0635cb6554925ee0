// Copyright 2026 The gnmt-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "gnmt/tensor.hpp"

namespace gnmt {

inline constexpr double kNoClip = std::numeric_limits<double>::infinity();

/// Gate weights packed as four h-row blocks in the order
/// input (sigmoid), candidate (tanh), forget (sigmoid), output (sigmoid).
struct LstmCellParams {
  Tensor2D w_ih;  // 4h x in
  Tensor2D w_hh;  // 4h x h
  Tensor2D bias;  // 4h x 1

  static LstmCellParams zeros(std::size_t input_size, std::size_t hidden_size);
  std::size_t hidden_size() const { return w_hh.cols(); }
  std::size_t input_size() const { return w_ih.cols(); }

  friend bool operator==(const LstmCellParams&, const LstmCellParams&) = default;
};

struct LstmState {
  Tensor2D c;  // 1 x h
  Tensor2D m;  // 1 x h

  static LstmState zeros(std::size_t hidden_size) { return {Tensor2D(1, hidden_size), Tensor2D(1, hidden_size)}; }
};

/// Values saved by the forward pass for the backward pass.
struct LstmCache {
  std::vector<double> x;
  std::vector<double> m_prev;
  std::vector<double> c_prev;
  std::vector<double> gates;  // activated gates, 4h
  std::vector<double> c_raw;  // memory before clamping
  std::vector<double> c;
  double clip = kNoClip;
  bool valid = false;
};

struct LstmGrads {
  LstmCellParams params;
  LstmState prev;  // gradient w.r.t. (c_{t-1}, m_{t-1})
  Tensor2D x;
};

LstmState lstm_cell_forward(const LstmCellParams& params, const LstmState& prev, const Tensor2D& x,
                            std::optional<double> clip = std::nullopt, LstmCache* cache = nullptr);

/// Reverse-mode pass through one cell step. `upstream` holds dL/dc_t and dL/dm_t.
LstmGrads lstm_cell_backward(const LstmCellParams& params, const LstmCache& cache, const LstmState& upstream);

// Span versions used by the sequence model. Outputs of the backward kernel
// are accumulated (+=) into the provided buffers.
void lstm_forward_raw(const LstmCellParams& p, std::span<const double> x, std::span<const double> m_prev,
                      std::span<const double> c_prev, double clip, LstmCache& cache, std::span<double> c_out,
                      std::span<double> m_out);

void lstm_backward_raw(const LstmCellParams& p, const LstmCache& cache, std::span<const double> dm,
                       std::span<const double> dc, LstmCellParams& grads, std::span<double> dx,
                       std::span<double> dm_prev, std::span<double> dc_prev);

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace gnmt
