// Copyright 2026 The gnmt-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnmt/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

namespace gnmt {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

double central_difference(const std::function<double()>& f, double& x, double h) {
  const double x0 = x;
  x = x0 + h;
  const double p1 = f();
  x = x0 - h;
  const double m1 = f();
  x = x0 + 2 * h;
  const double p2 = f();
  x = x0 - 2 * h;
  const double m2 = f();
  x = x0;
  return (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h);
}

GradCheckReport run_gradcheck(const GradCheckConfig& gc) {
  GradCheckReport report;
  report.tolerance = gc.tolerance;
  Rng rng(gc.seed);
  for (int trial = 0; trial < gc.trials; ++trial) {
    GradCheckTrial t;
    ModelConfig& cfg = t.config;
    const int layers = 2 + static_cast<int>(rng.below(3));
    cfg.encoder_layers = layers;
    cfg.decoder_layers = layers;
    cfg.hidden_size = 2 + static_cast<int>(rng.below(7));
    cfg.embedding_size = 2 + static_cast<int>(rng.below(7));
    cfg.attention_hidden = 2 + static_cast<int>(rng.below(7));
    cfg.vocab_size = 5 + static_cast<int>(rng.below(8));
    cfg.residual_start_layer = 2 + static_cast<int>(rng.below(2));
    // Odd trials run with both clips active; the clamps are exercised away
    // from their boundaries because the stencil steps are small.
    t.clipped = trial % 2 == 1;
    cfg.accumulator_clip = t.clipped ? 0.6 : kNoClip;
    cfg.logit_clip = t.clipped ? 1.5 : kNoClip;

    ModelParams params = ModelParams::zeros(cfg);
    params.for_each([&](const std::string&, Tensor2D& x) {
      for (double& v : x.data()) v = rng.uniform(-gc.init_scale, gc.init_scale);
    });
    const std::size_t src_len = 2 + rng.below(3), tgt_len = 1 + rng.below(3);
    for (std::size_t i = 0; i < src_len; ++i)
      t.source.push_back(static_cast<TokenId>(rng.below(static_cast<std::uint64_t>(cfg.vocab_size))));
    for (std::size_t i = 0; i < tgt_len; ++i)
      t.target.push_back(static_cast<TokenId>(rng.below(static_cast<std::uint64_t>(cfg.vocab_size))));
    t.target.push_back(cfg.eos_id);

    const ForwardOptions opt = ForwardOptions::inference(cfg);
    LossAndGrads lg = forward_backward(t.source, t.target, params, cfg, opt);
    if (gc.corrupt) lg.grads.attention.v.data()[0] += 0.01 + 0.5 * std::abs(lg.grads.attention.v.data()[0]);

    auto loss = [&] { return -prefix_log_prob(t.source, t.target, params, cfg, opt); };
    auto analytic = lg.grads.tensors();
    std::size_t idx = 0;
    params.for_each([&](const std::string& name, Tensor2D& x) {
      GradCheckTensor r{name, 0, 0.0};
      auto g = analytic[idx++]->data();
      auto xs = x.data();
      for (std::size_t k = 0; k < xs.size(); ++k) {
        const double n = central_difference(loss, xs[k], gc.step);
        r.max_rel_error = std::max(r.max_rel_error, relative_error(g[k], n, gc.abs_floor));
        ++r.coords;
      }
      t.max_rel_error = std::max(t.max_rel_error, r.max_rel_error);
      t.tensors.push_back(std::move(r));
    });
    report.max_rel_error = std::max(report.max_rel_error, t.max_rel_error);
    report.trials.push_back(std::move(t));
  }
  return report;
}

void GradCheckReport::print(std::ostream& out) const {
  out << std::setprecision(3);
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto& t = trials[i];
    out << "trial " << i << ": layers " << t.config.encoder_layers << "+" << t.config.decoder_layers << " hidden "
        << t.config.hidden_size << " vocab " << t.config.vocab_size << (t.clipped ? " clipped" : " unclipped")
        << "  max rel err " << std::scientific << t.max_rel_error << std::defaultfloat << '\n';
    for (const auto& r : t.tensors)
      if (r.max_rel_error >= tolerance)
        out << "  FAIL " << r.name << " (" << r.coords << " coords) rel err " << std::scientific << r.max_rel_error
            << std::defaultfloat << '\n';
  }
  out << (passed() ? "PASS" : "FAIL") << " max relative error " << std::scientific << max_rel_error << " (tolerance "
      << tolerance << ")" << std::defaultfloat << '\n';
}

}  // namespace gnmt
