// Copyright 2026 The gnmt-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnmt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace gnmt {

namespace {

std::string shape_str(const Tensor2D& t) {
  std::ostringstream os;
  os << t.rows() << "x" << t.cols();
  return os.str();
}

}  // namespace

Tensor2D::Tensor2D(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) throw ShapeError("Tensor2D: data length does not match shape");
}

Tensor2D Tensor2D::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("Tensor2D::from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor2D(r, c, std::move(data));
}

Tensor2D Tensor2D::row_vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor2D(1, n, std::move(values));
}

Tensor2D Tensor2D::identity(std::size_t n) {
  Tensor2D t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

void Tensor2D::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor2D::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

Tensor2D matmul(const Tensor2D& a, const Tensor2D& b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: " + shape_str(a) + " x " + shape_str(b));
  Tensor2D out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto orow = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

void softmax_inplace(std::span<double> v) {
  if (v.empty()) throw ShapeError("softmax: empty input");
  const double mx = *std::max_element(v.begin(), v.end());
  double total = 0.0;
  for (double& x : v) {
    x = std::exp(x - mx);
    total += x;
  }
  for (double& x : v) x /= total;
}

void log_softmax_inplace(std::span<double> v) {
  if (v.empty()) throw ShapeError("log_softmax: empty input");
  const double mx = *std::max_element(v.begin(), v.end());
  double total = 0.0;
  for (double x : v) total += std::exp(x - mx);
  const double lse = mx + std::log(total);
  for (double& x : v) x -= lse;
}

Tensor2D softmax(const Tensor2D& v) {
  if (v.rows() != 1 || v.cols() == 0) throw ShapeError("softmax: expected non-empty 1 x n tensor, got " + shape_str(v));
  Tensor2D out = v;
  softmax_inplace(out.data());
  return out;
}

std::vector<Tensor2D> clip_global_norm(std::vector<Tensor2D> grads, double max_norm) {
  if (!(max_norm > 0.0)) throw UsageError("clip_global_norm: max_norm must be positive");
  double sq = 0.0;
  for (const auto& g : grads) sq += sum_of_squares(g.data());
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return grads;
  const double scale = max_norm / norm;
  for (auto& g : grads)
    for (double& x : g.data()) x *= scale;
  return grads;
}

Tensor2D uniform_init(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  if (rows == 0 || cols == 0) throw ShapeError("uniform_init: dimensions must be positive");
  Rng rng(seed);
  Tensor2D t(rows, cols);
  for (double& x : t.data()) x = rng.uniform(-kInitRange, kInitRange);
  return t;
}

void matvec_add(const Tensor2D& w, std::span<const double> x, std::span<double> out) {
  if (w.cols() != x.size() || w.rows() != out.size()) throw ShapeError("matvec: shape mismatch");
  const std::size_t n = w.cols();
  const double* wp = w.data().data();
  for (std::size_t r = 0; r < w.rows(); ++r, wp += n) {
    double acc = 0.0;
    for (std::size_t c = 0; c < n; ++c) acc += wp[c] * x[c];
    out[r] += acc;
  }
}

void matvec_t_add(const Tensor2D& w, std::span<const double> g, std::span<double> out) {
  if (w.rows() != g.size() || w.cols() != out.size()) throw ShapeError("matvec_t: shape mismatch");
  const std::size_t n = w.cols();
  const double* wp = w.data().data();
  double* op = out.data();
  for (std::size_t r = 0; r < w.rows(); ++r, wp += n) {
    const double gr = g[r];
    if (gr == 0.0) continue;
    for (std::size_t c = 0; c < n; ++c) op[c] += gr * wp[c];
  }
}

void outer_add(Tensor2D& dw, std::span<const double> g, std::span<const double> x) {
  if (dw.rows() != g.size() || dw.cols() != x.size()) throw ShapeError("outer: shape mismatch");
  const std::size_t n = dw.cols();
  double* wp = dw.data().data();
  for (std::size_t r = 0; r < dw.rows(); ++r, wp += n) {
    const double gr = g[r];
    if (gr == 0.0) continue;
    for (std::size_t c = 0; c < n; ++c) wp[c] += gr * x[c];
  }
}

double sum_of_squares(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

}  // namespace gnmt
