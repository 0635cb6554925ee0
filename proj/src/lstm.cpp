// Copyright 2026 The gnmt-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnmt/lstm.hpp"

#include <algorithm>
#include <cmath>

namespace gnmt {

LstmCellParams LstmCellParams::zeros(std::size_t input_size, std::size_t hidden_size) {
  return {Tensor2D(4 * hidden_size, input_size), Tensor2D(4 * hidden_size, hidden_size),
          Tensor2D(4 * hidden_size, 1)};
}

void lstm_forward_raw(const LstmCellParams& p, std::span<const double> x, std::span<const double> m_prev,
                      std::span<const double> c_prev, double clip, LstmCache& cache, std::span<double> c_out,
                      std::span<double> m_out) {
  const std::size_t h = p.hidden_size();
  if (p.w_ih.rows() != 4 * h || p.bias.rows() != 4 * h || x.size() != p.input_size() || m_prev.size() != h ||
      c_prev.size() != h || c_out.size() != h || m_out.size() != h)
    throw ShapeError("lstm_cell_forward: shape mismatch");

  cache.x.assign(x.begin(), x.end());
  cache.m_prev.assign(m_prev.begin(), m_prev.end());
  cache.c_prev.assign(c_prev.begin(), c_prev.end());
  cache.gates.assign(p.bias.data().begin(), p.bias.data().end());
  matvec_add(p.w_ih, x, cache.gates);
  matvec_add(p.w_hh, m_prev, cache.gates);

  double* g = cache.gates.data();
  for (std::size_t k = 0; k < h; ++k) {
    g[k] = sigmoid(g[k]);
    g[h + k] = std::tanh(g[h + k]);
    g[2 * h + k] = sigmoid(g[2 * h + k]);
    g[3 * h + k] = sigmoid(g[3 * h + k]);
  }
  cache.c_raw.resize(h);
  cache.c.resize(h);
  for (std::size_t k = 0; k < h; ++k) {
    const double raw = cache.c_prev[k] * g[2 * h + k] + g[h + k] * g[k];
    cache.c_raw[k] = raw;
    cache.c[k] = std::clamp(raw, -clip, clip);
    c_out[k] = cache.c[k];
    m_out[k] = cache.c[k] * g[3 * h + k];
  }
  cache.clip = clip;
  cache.valid = true;
}

void lstm_backward_raw(const LstmCellParams& p, const LstmCache& cache, std::span<const double> dm,
                       std::span<const double> dc, LstmCellParams& grads, std::span<double> dx,
                       std::span<double> dm_prev, std::span<double> dc_prev) {
  if (!cache.valid) throw UsageError("lstm_cell_backward: missing forward cache");
  const std::size_t h = p.hidden_size();
  const double* g = cache.gates.data();
  std::vector<double> dz(4 * h);
  for (std::size_t k = 0; k < h; ++k) {
    const double i = g[k], cand = g[h + k], f = g[2 * h + k], o = g[3 * h + k];
    const double d_out = dm[k] * cache.c[k];
    double d_c = dc[k] + dm[k] * o;
    // Exact subgradient of the clamp: zero outside the interval.
    if (std::abs(cache.c_raw[k]) > cache.clip) d_c = 0.0;
    dz[k] = d_c * cand * i * (1.0 - i);
    dz[h + k] = d_c * i * (1.0 - cand * cand);
    dz[2 * h + k] = d_c * cache.c_prev[k] * f * (1.0 - f);
    dz[3 * h + k] = d_out * o * (1.0 - o);
    dc_prev[k] += d_c * f;
  }
  outer_add(grads.w_ih, dz, cache.x);
  outer_add(grads.w_hh, dz, cache.m_prev);
  auto db = grads.bias.data();
  for (std::size_t r = 0; r < 4 * h; ++r) db[r] += dz[r];
  matvec_t_add(p.w_ih, dz, dx);
  matvec_t_add(p.w_hh, dz, dm_prev);
}

LstmState lstm_cell_forward(const LstmCellParams& params, const LstmState& prev, const Tensor2D& x,
                            std::optional<double> clip, LstmCache* cache) {
  const std::size_t h = params.hidden_size();
  if (prev.c.size() != h || prev.m.size() != h) throw ShapeError("lstm_cell_forward: state size mismatch");
  if (x.rows() != 1) throw ShapeError("lstm_cell_forward: input must be 1 x n");
  LstmCache local;
  LstmCache& c = cache ? *cache : local;
  LstmState out = LstmState::zeros(h);
  lstm_forward_raw(params, x.data(), prev.m.data(), prev.c.data(), clip.value_or(kNoClip), c, out.c.data(),
                   out.m.data());
  return out;
}

LstmGrads lstm_cell_backward(const LstmCellParams& params, const LstmCache& cache, const LstmState& upstream) {
  if (!cache.valid) throw UsageError("lstm_cell_backward: missing forward cache");
  const std::size_t h = params.hidden_size();
  if (upstream.c.size() != h || upstream.m.size() != h) throw ShapeError("lstm_cell_backward: upstream size mismatch");
  LstmGrads out{LstmCellParams::zeros(params.input_size(), h), LstmState::zeros(h), Tensor2D(1, params.input_size())};
  lstm_backward_raw(params, cache, upstream.m.data(), upstream.c.data(), out.params, out.x.data(), out.prev.m.data(),
                    out.prev.c.data());
  return out;
}

}  // namespace gnmt
