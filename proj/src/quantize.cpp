// Copyright 2026 The gnmt-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnmt/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gnmt {

std::string narrowing_name(Narrowing n) {
  switch (n) {
    case Narrowing::kHighByte: return "high-byte";
    case Narrowing::kRound: return "round";
    case Narrowing::kWide: return "wide";
  }
  return "?";
}

Narrowing parse_narrowing(const std::string& s) {
  if (s == "high-byte") return Narrowing::kHighByte;
  if (s == "round") return Narrowing::kRound;
  if (s == "wide") return Narrowing::kWide;
  throw ConfigError("unknown narrowing mode '" + s + "' (expected high-byte, round or wide)");
}

std::int32_t narrow(std::int16_t v, Narrowing mode) {
  switch (mode) {
    case Narrowing::kHighByte: return v >> 8;
    case Narrowing::kRound: return static_cast<std::int32_t>(std::clamp(round_half_away(v / 256.0), -127.0, 127.0));
    case Narrowing::kWide: return v;
  }
  return v;
}

double narrowed_unit(double delta, Narrowing mode) {
  return (mode == Narrowing::kWide ? 1.0 : 256.0) * delta / kFixedMax;
}

std::int16_t saturate16(double v) {
  return static_cast<std::int16_t>(std::clamp(round_half_away(v), -static_cast<double>(kFixedMax),
                                              static_cast<double>(kFixedMax)));
}

QuantizedMatrix QuantizedMatrix::quantize(const Tensor2D& w) {
  if (!w.all_finite()) throw ShapeError("quantize_weights: non-finite entry");
  QuantizedMatrix qm;
  qm.rows = w.rows();
  qm.cols = w.cols();
  qm.q.assign(w.size(), 0);
  qm.scales.assign(w.rows(), 0.0);
  for (std::size_t r = 0; r < w.rows(); ++r) {
    double s = 0.0;
    for (double x : w.row(r)) s = std::max(s, std::abs(x));
    qm.scales[r] = s;
    if (s == 0.0) continue;
    for (std::size_t c = 0; c < w.cols(); ++c)
      qm.q[r * w.cols() + c] = static_cast<std::int8_t>(std::clamp(round_half_away(w(r, c) / s * 127.0), -127.0, 127.0));
  }
  return qm;
}

Tensor2D QuantizedMatrix::dequantize() const {
  Tensor2D w(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) w(r, c) = q[r * cols + c] * scales[r] / 127.0;
  return w;
}

FixedVec16 FixedVec16::from_real(std::span<const double> x, double delta) {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw ConfigError("fixed-point range must be a positive finite delta");
  FixedVec16 v;
  v.delta = delta;
  v.values.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) v.values[i] = saturate16(x[i] / delta * kFixedMax);
  return v;
}

FixedVec16 FixedVec16::zeros(std::size_t n, double delta) {
  FixedVec16 v;
  v.delta = delta;
  v.values.assign(n, 0);
  return v;
}

std::vector<double> FixedVec16::to_real() const {
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = real(i);
  return out;
}

FixedVec16 concat(const FixedVec16& a, const FixedVec16& b) {
  if (a.delta != b.delta) throw ConfigError("concat: fixed-point ranges differ");
  FixedVec16 out = a;
  out.values.insert(out.values.end(), b.values.begin(), b.values.end());
  return out;
}

std::vector<double> QuantizedProduct::to_real() const {
  std::vector<double> out(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) out[i] = acc[i] * scale[i];
  return out;
}

QuantizedProduct quantized_matmul(const QuantizedMatrix& qm, const FixedVec16& x, Narrowing mode) {
  if (qm.cols != x.size()) throw ShapeError("quantized_matmul: shape mismatch");
  std::vector<std::int32_t> x8(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) x8[j] = narrow(x.values[j], mode);
  QuantizedProduct p;
  p.acc.assign(qm.rows, 0);
  p.scale.resize(qm.rows);
  const double unit = narrowed_unit(x.delta, mode);
  for (std::size_t r = 0; r < qm.rows; ++r) {
    const std::int8_t* row = qm.q.data() + r * qm.cols;
    // Each term is below 2^22 in magnitude, far from the int64 limit.
    std::int64_t acc = 0;
    for (std::size_t j = 0; j < qm.cols; ++j) acc += static_cast<std::int64_t>(row[j]) * x8[j];
    p.acc[r] = acc;
    p.scale[r] = qm.scales[r] / 127.0 * unit;
  }
  return p;
}

const ActivationTables& ActivationTables::get() {
  static const ActivationTables tables;
  return tables;
}

ActivationTables::ActivationTables() : sigmoid_(65536), tanh_(65536) {
  for (int k = 0; k < 65536; ++k) {
    const double z = static_cast<double>(k - 32768) * kGateRange / kFixedMax;
    sigmoid_[k] = saturate16(kFixedMax / (1.0 + std::exp(-z)));
    tanh_[k] = saturate16(kFixedMax * std::tanh(z));
  }
}

std::int16_t ActivationTables::gate_input(double z) { return saturate16(z / kGateRange * kFixedMax); }

QuantizedLstmCell QuantizedLstmCell::from_float(const LstmCellParams& p, double delta) {
  QuantizedLstmCell c;
  c.w_ih = QuantizedMatrix::quantize(p.w_ih);
  c.w_hh = QuantizedMatrix::quantize(p.w_hh);
  c.bias.assign(p.bias.data().begin(), p.bias.data().end());
  c.delta = delta;
  return c;
}

QLstmState QLstmState::zeros(std::size_t h, double delta) {
  return {FixedVec16::zeros(h, delta), FixedVec16::zeros(h, delta)};
}

QLstmState quantized_lstm_step(const QuantizedLstmCell& cell, const QLstmState& prev, const FixedVec16& x, double delta,
                               Narrowing mode) {
  if (delta != cell.delta || prev.c.delta != delta || prev.m.delta != delta || x.delta != delta)
    throw ConfigError("quantized_lstm_step: delta " + format_real(delta) + " does not match the cell's delta " +
                      format_real(cell.delta));
  const std::size_t h = cell.hidden_size();
  if (prev.c.size() != h || prev.m.size() != h) throw ShapeError("quantized_lstm_step: state size mismatch");
  const QuantizedProduct px = quantized_matmul(cell.w_ih, x, mode);
  const QuantizedProduct pm = quantized_matmul(cell.w_hh, prev.m, mode);
  const ActivationTables& t = ActivationTables::get();
  std::vector<std::int16_t> gate(4 * h);
  for (std::size_t r = 0; r < 4 * h; ++r) {
    const double z = px.acc[r] * px.scale[r] + pm.acc[r] * pm.scale[r] + cell.bias[r];
    const std::int16_t zi = ActivationTables::gate_input(z);
    gate[r] = (r >= h && r < 2 * h) ? t.tanh(zi) : t.sigmoid(zi);
  }
  QLstmState next = QLstmState::zeros(h, delta);
  const double fm = kFixedMax;
  for (std::size_t k = 0; k < h; ++k) {
    const std::int32_t i = gate[k], cand = gate[h + k], f = gate[2 * h + k], o = gate[3 * h + k];
    // c and m live in delta units; gate values in units of 1/32767.
    const double c = static_cast<double>(prev.c.values[k] * f) / fm + static_cast<double>(cand * i) / (fm * delta);
    next.c.values[k] = saturate16(c);
    next.m.values[k] = saturate16(static_cast<double>(next.c.values[k] * o) / fm);
  }
  return next;
}

std::vector<double> quantized_logits(const QuantizedMatrix& w_s, const FixedVec16& y, double gamma, Narrowing mode) {
  if (!(gamma > 0.0)) throw ConfigError("quantized_logits: gamma must be positive");
  std::vector<double> logits = quantized_matmul(w_s, y, mode).to_real();
  for (double& z : logits) z = std::clamp(z, -gamma, gamma);
  return logits;
}

// ---------------------------------------------------------------------------

QuantizedModel QuantizedModel::from_float(const ModelParams& params, const ModelConfig& config, Narrowing mode) {
  config.validate();
  QuantizedModel q;
  q.config_ = config;
  q.narrowing_ = mode;
  if (config.clip_trained()) {
    q.delta_ = config.accumulator_clip;
  } else {
    q.delta_ = 1.0;
    q.warning_ = "model was trained without accumulator clipping; quantized accuracy may degrade";
  }
  q.gamma_ = std::isfinite(config.logit_clip) ? config.logit_clip : 25.0;
  q.source_embedding_ = params.source_embedding;
  q.target_embedding_ = params.target_embedding;
  q.encoder_forward_ = QuantizedLstmCell::from_float(params.encoder_forward, q.delta_);
  q.encoder_backward_ = QuantizedLstmCell::from_float(params.encoder_backward, q.delta_);
  for (const auto& c : params.encoder) q.encoder_.push_back(QuantizedLstmCell::from_float(c, q.delta_));
  for (const auto& c : params.decoder) q.decoder_.push_back(QuantizedLstmCell::from_float(c, q.delta_));
  q.attention_ = params.attention;
  q.softmax_ = QuantizedMatrix::quantize(params.softmax_w);
  return q;
}

FixedVec16 QuantizedModel::embed(const Tensor2D& table, TokenId tok) const {
  if (tok < 0 || static_cast<std::size_t>(tok) >= table.rows())
    throw UsageError("token id " + std::to_string(tok) + " outside vocabulary");
  return FixedVec16::from_real(table.row(static_cast<std::size_t>(tok)), delta_);
}

namespace {

FixedVec16 add_saturating(const FixedVec16& a, const FixedVec16& b) {
  FixedVec16 out = a;
  for (std::size_t k = 0; k < a.size(); ++k)
    out.values[k] = saturate16(static_cast<double>(a.values[k]) + static_cast<double>(b.values[k]));
  return out;
}

}  // namespace

QuantizedModel::Encoded QuantizedModel::encode(std::span<const TokenId> tokens) const {
  if (tokens.empty()) throw UsageError("encode: empty source sequence");
  const std::size_t M = tokens.size(), h = static_cast<std::size_t>(config_.hidden_size);
  std::vector<FixedVec16> emb;
  for (TokenId t : tokens) emb.push_back(embed(source_embedding_, t));

  std::vector<FixedVec16> fwd(M), bwd(M);
  QLstmState s = QLstmState::zeros(h, delta_);
  for (std::size_t t = 0; t < M; ++t) {
    s = quantized_lstm_step(encoder_forward_, s, emb[t], delta_, narrowing_);
    fwd[t] = s.m;
  }
  s = QLstmState::zeros(h, delta_);
  for (std::size_t t = M; t-- > 0;) {
    s = quantized_lstm_step(encoder_backward_, s, emb[t], delta_, narrowing_);
    bwd[t] = s.m;
  }
  std::vector<FixedVec16> layer(M);
  for (std::size_t t = 0; t < M; ++t) layer[t] = concat(fwd[t], bwd[t]);

  for (int l = 2; l <= config_.encoder_layers; ++l) {
    const bool residual = l >= std::max(config_.residual_start_layer, 3);
    s = QLstmState::zeros(h, delta_);
    std::vector<FixedVec16> next(M);
    for (std::size_t t = 0; t < M; ++t) {
      s = quantized_lstm_step(encoder_[static_cast<std::size_t>(l - 2)], s, layer[t], delta_, narrowing_);
      next[t] = residual ? add_saturating(s.m, layer[t]) : s.m;
    }
    layer = std::move(next);
  }
  std::vector<std::vector<double>> vectors;
  for (const auto& v : layer) vectors.push_back(v.to_real());
  return make_encoder_output(std::move(vectors), attention_);
}

QuantizedModel::State QuantizedModel::initial_state(const Encoded&) const {
  State s;
  const std::size_t h = static_cast<std::size_t>(config_.hidden_size);
  s.layers.assign(static_cast<std::size_t>(config_.decoder_layers), QLstmState::zeros(h, delta_));
  s.bottom_output = FixedVec16::zeros(h, delta_);
  s.context.assign(h, 0.0);
  return s;
}

QuantizedModel::Step QuantizedModel::step(const Encoded& enc, const State& state, TokenId prev) const {
  const std::vector<double> y_prev = state.bottom_output.to_real();
  AttentionResult att = attention(y_prev, enc, attention_);
  const FixedVec16 ctx = FixedVec16::from_real(att.context, delta_);

  Step out;
  out.state.layers.resize(decoder_.size());
  FixedVec16 below;
  for (std::size_t li = 0; li < decoder_.size(); ++li) {
    const int l = static_cast<int>(li) + 1;
    const FixedVec16 input = concat(l == 1 ? embed(target_embedding_, prev) : below, ctx);
    QLstmState next = quantized_lstm_step(decoder_[li], state.layers[li], input, delta_, narrowing_);
    FixedVec16 y = (l > 1 && l >= config_.residual_start_layer) ? add_saturating(next.m, below) : next.m;
    out.state.layers[li] = std::move(next);
    if (l == 1) out.state.bottom_output = y;
    below = std::move(y);
  }
  std::vector<double> logits = quantized_logits(softmax_, concat(below, ctx), gamma_, narrowing_);
  log_softmax_inplace(logits);
  out.log_probs = std::move(logits);
  out.state.context = std::move(att.context);
  out.state.attention = std::move(att.probs);
  return out;
}

namespace {

void put_matrix(Archive& a, const std::string& name, const QuantizedMatrix& m) {
  a.int8_arrays.emplace_back("q." + name, Int8Array{m.rows, m.cols, m.q});
  a.tensors.emplace_back("scale." + name, Tensor2D(m.rows, 1, m.scales));
}

QuantizedMatrix get_matrix(const Archive& a, const std::string& name) {
  const Int8Array& q = a.int8("q." + name);
  const Tensor2D& s = a.tensor("scale." + name);
  if (s.rows() != q.rows || s.cols() != 1) throw FormatError("scale vector for '" + name + "' has the wrong shape");
  for (std::int8_t v : q.data)
    if (v == -128) throw FormatError("int8 weight outside [-127, 127] in '" + name + "'");
  return {q.rows, q.cols, q.data, std::vector<double>(s.data().begin(), s.data().end())};
}

void put_cell(Archive& a, const std::string& name, const QuantizedLstmCell& c) {
  put_matrix(a, name + ".w_ih", c.w_ih);
  put_matrix(a, name + ".w_hh", c.w_hh);
  a.tensors.emplace_back(name + ".bias", Tensor2D(c.bias.size(), 1, c.bias));
}

QuantizedLstmCell get_cell(const Archive& a, const std::string& name, double delta) {
  QuantizedLstmCell c;
  c.w_ih = get_matrix(a, name + ".w_ih");
  c.w_hh = get_matrix(a, name + ".w_hh");
  const Tensor2D& b = a.tensor(name + ".bias");
  c.bias.assign(b.data().begin(), b.data().end());
  c.delta = delta;
  return c;
}

}  // namespace

Archive QuantizedModel::to_archive() const {
  Archive a;
  a.format = CheckpointFormat::kQuantized;
  config_to_meta(config_, a.meta);
  a.meta["quant.delta"] = format_real(delta_);
  a.meta["quant.gamma"] = format_real(gamma_);
  a.meta["quant.narrowing"] = narrowing_name(narrowing_);
  a.meta["quant.gate_range"] = format_real(kGateRange);
  if (!warning_.empty()) a.meta["quant.warning"] = warning_;
  a.tensors.emplace_back("source_embedding", source_embedding_);
  a.tensors.emplace_back("target_embedding", target_embedding_);
  put_cell(a, "encoder.1.fwd", encoder_forward_);
  put_cell(a, "encoder.1.bwd", encoder_backward_);
  for (std::size_t i = 0; i < encoder_.size(); ++i) put_cell(a, "encoder." + std::to_string(i + 2), encoder_[i]);
  for (std::size_t i = 0; i < decoder_.size(); ++i) put_cell(a, "decoder." + std::to_string(i + 1), decoder_[i]);
  a.tensors.emplace_back("attention.w_query", attention_.w_query);
  a.tensors.emplace_back("attention.w_key", attention_.w_key);
  a.tensors.emplace_back("attention.bias", attention_.bias);
  a.tensors.emplace_back("attention.v", attention_.v);
  put_matrix(a, "softmax.w", softmax_);
  return a;
}

QuantizedModel QuantizedModel::from_archive(const Archive& a) {
  if (a.format != CheckpointFormat::kQuantized) throw FormatError("not a quantized checkpoint");
  if (parse_real(a.meta_value("quant.gate_range")) != kGateRange)
    throw FormatError("quantized checkpoint uses a different gate table range");
  QuantizedModel q;
  q.config_ = config_from_meta(a.meta);
  q.delta_ = parse_real(a.meta_value("quant.delta"));
  q.gamma_ = parse_real(a.meta_value("quant.gamma"));
  q.narrowing_ = parse_narrowing(a.meta_value("quant.narrowing"));
  if (auto it = a.meta.find("quant.warning"); it != a.meta.end()) q.warning_ = it->second;
  if (q.config_.clip_trained() && q.config_.accumulator_clip != q.delta_)
    throw ConfigError("quantized checkpoint delta does not match the model's accumulator clip");
  q.source_embedding_ = a.tensor("source_embedding");
  q.target_embedding_ = a.tensor("target_embedding");
  q.encoder_forward_ = get_cell(a, "encoder.1.fwd", q.delta_);
  q.encoder_backward_ = get_cell(a, "encoder.1.bwd", q.delta_);
  for (int l = 2; l <= q.config_.encoder_layers; ++l)
    q.encoder_.push_back(get_cell(a, "encoder." + std::to_string(l), q.delta_));
  for (int l = 1; l <= q.config_.decoder_layers; ++l)
    q.decoder_.push_back(get_cell(a, "decoder." + std::to_string(l), q.delta_));
  q.attention_ = {a.tensor("attention.w_query"), a.tensor("attention.w_key"), a.tensor("attention.bias"),
                  a.tensor("attention.v")};
  q.softmax_ = get_matrix(a, "softmax.w");

  // Shapes must agree with what the config implies.
  const QuantizedModel ref = from_float(ModelParams::zeros(q.config_), q.config_, q.narrowing_);
  auto same = [](const QuantizedMatrix& x, const QuantizedMatrix& y) { return x.rows == y.rows && x.cols == y.cols; };
  bool ok = q.source_embedding_.same_shape(ref.source_embedding_) && q.target_embedding_.same_shape(ref.target_embedding_) &&
            same(q.softmax_, ref.softmax_) && q.attention_.w_query.same_shape(ref.attention_.w_query) &&
            q.attention_.w_key.same_shape(ref.attention_.w_key) && q.attention_.bias.same_shape(ref.attention_.bias) &&
            q.attention_.v.same_shape(ref.attention_.v);
  auto cell_ok = [&](const QuantizedLstmCell& x, const QuantizedLstmCell& y) {
    return same(x.w_ih, y.w_ih) && same(x.w_hh, y.w_hh) && x.bias.size() == y.bias.size();
  };
  ok = ok && cell_ok(q.encoder_forward_, ref.encoder_forward_) && cell_ok(q.encoder_backward_, ref.encoder_backward_);
  for (std::size_t i = 0; i < q.encoder_.size(); ++i) ok = ok && cell_ok(q.encoder_[i], ref.encoder_[i]);
  for (std::size_t i = 0; i < q.decoder_.size(); ++i) ok = ok && cell_ok(q.decoder_[i], ref.decoder_[i]);
  if (!ok) throw FormatError("quantized checkpoint shapes are inconsistent with its config");
  return q;
}

void QuantizedModel::save(const std::filesystem::path& path) const { write_archive(path, to_archive()); }

QuantizedModel QuantizedModel::load(const std::filesystem::path& path) { return from_archive(read_archive(path)); }

double ParityReport::relative_log_perplexity_delta() const {
  const double base = std::abs(float_path.log_perplexity);
  return base == 0.0 ? std::abs(log_perplexity_delta()) : std::abs(log_perplexity_delta()) / base;
}

ParityReport parity_report(const ModelParams& params, const ModelConfig& config, const QuantizedModel& quantized,
                           std::span<const SentencePair> corpus) {
  const FloatModel fm(params, config);
  ParityReport rep = compare_models(fm, quantized, corpus);
  rep.warning = quantized.warning();
  return rep;
}

}  // namespace gnmt
