// Copyright 2026 The gnmt-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "gnmt/common.hpp"

namespace gnmt {

/// Dense row-major matrix of doubles. Vectors are 1 x n tensors.
class Tensor2D {
 public:
  Tensor2D() = default;
  Tensor2D(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Tensor2D(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Tensor2D from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor2D row_vector(std::vector<double> values);
  static Tensor2D identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  void fill(double v);
  bool same_shape(const Tensor2D& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  bool all_finite() const;

  friend bool operator==(const Tensor2D&, const Tensor2D&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Tensor2D matmul(const Tensor2D& a, const Tensor2D& b);

/// Numerically stable softmax of a 1 x n tensor.
Tensor2D softmax(const Tensor2D& v);

/// Rescales the gradient set so that its global L2 norm is at most max_norm.
/// Returns the tensors unchanged when the norm is already within bound.
std::vector<Tensor2D> clip_global_norm(std::vector<Tensor2D> grads, double max_norm);

/// I.i.d. entries drawn from U[-0.04, 0.04].
Tensor2D uniform_init(std::size_t rows, std::size_t cols, std::uint64_t seed);

inline constexpr double kInitRange = 0.04;

// ---------------------------------------------------------------------------
// Span kernels used on the hot paths of the model.

void softmax_inplace(std::span<double> v);
void log_softmax_inplace(std::span<double> v);

// out += W x
void matvec_add(const Tensor2D& w, std::span<const double> x, std::span<double> out);
// out += W^T g
void matvec_t_add(const Tensor2D& w, std::span<const double> g, std::span<double> out);
// dw += g x^T
void outer_add(Tensor2D& dw, std::span<const double> g, std::span<const double> x);

double sum_of_squares(std::span<const double> v);

}  // namespace gnmt
