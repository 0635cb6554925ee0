// Copyright 2026 The gnmt-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "gnmt/checkpoint.hpp"
#include "gnmt/decode.hpp"
#include "gnmt/gradcheck.hpp"
#include "gnmt/metrics.hpp"
#include "gnmt/model.hpp"
#include "gnmt/quantize.hpp"
#include "gnmt/segmentation.hpp"
#include "gnmt/toy.hpp"
#include "gnmt/training.hpp"

namespace py = pybind11;
using namespace gnmt;

namespace {

// Float checkpoint plus the step-model view over it.
struct PyModel {
  ModelConfig config;
  ModelParams params;

  FloatModel view() const { return FloatModel(params, config); }
};

py::dict hypothesis_dict(const Hypothesis& h) {
  py::dict d;
  d["tokens"] = h.tokens;
  d["log_prob"] = h.log_prob;
  d["score"] = h.score;
  return d;
}

template <class M>
py::list translate_impl(const M& model, const std::vector<TokenSeq>& sources, const ScoreParams& sp, int batch_cap) {
  const auto results = batch_decode(model, sources, sp, batch_cap);
  py::list out;
  for (const auto& r : results) out.append(hypothesis_dict(r.best()));
  return out;
}

std::vector<std::pair<TokenSeq, TokenSeq>> as_tuples(const std::vector<SentencePair>& v) {
  std::vector<std::pair<TokenSeq, TokenSeq>> out;
  for (const auto& p : v) out.emplace_back(p.source, p.target);
  return out;
}

std::vector<SentencePair> from_tuples(const std::vector<std::pair<TokenSeq, TokenSeq>>& v) {
  std::vector<SentencePair> out;
  for (const auto& [s, t] : v) out.push_back({s, t});
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bindings for the gnmt library";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<UsageError>(m, "UsageError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<DecodeError>(m, "DecodeError", base.ptr());
  py::register_exception<TrainingError>(m, "TrainingError", base.ptr());

  m.attr("PAD_ID") = kPadId;
  m.attr("BOS_ID") = kBosId;
  m.attr("EOS_ID") = kEosId;
  m.attr("NUM_RESERVED") = kNumReserved;

  // Segmentation.
  py::class_<WordpieceVocab>(m, "WordpieceVocab")
      .def(py::init<std::vector<std::string>, std::string>(), py::arg("pieces"), py::arg("marker") = "_")
      .def_static("load", &WordpieceVocab::load, py::arg("path"), py::arg("marker") = "_")
      .def("save", &WordpieceVocab::save)
      .def("__len__", &WordpieceVocab::size)
      .def_property_readonly("pieces", &WordpieceVocab::pieces)
      .def("piece", &WordpieceVocab::piece)
      .def("id", &WordpieceVocab::id)
      .def("segment", py::overload_cast<std::string_view>(&WordpieceVocab::segment, py::const_))
      .def("segment_pieces", &WordpieceVocab::segment_pieces)
      .def("detokenize", [](const WordpieceVocab& v, const TokenSeq& ids) { return v.detokenize(ids); });
  m.def("train_wordpiece", &train_wordpiece, py::arg("corpus"), py::arg("desired_tokens"),
        py::arg("char_cap") = 500, py::arg("marker") = "_");
  m.def("basic_piece_count", &basic_piece_count, py::arg("corpus"), py::arg("char_cap") = 500,
        py::arg("marker") = "_");

  py::class_<MixedVocabConfig>(m, "MixedVocabConfig")
      .def(py::init<>())
      .def_readwrite("word_vocab", &MixedVocabConfig::word_vocab)
      .def_readwrite("begin_prefix", &MixedVocabConfig::begin_prefix)
      .def_readwrite("middle_prefix", &MixedVocabConfig::middle_prefix)
      .def_readwrite("end_prefix", &MixedVocabConfig::end_prefix);
  m.def("encode_mixed", &encode_mixed);
  m.def("decode_mixed",
        [](const std::vector<std::string>& t, const MixedVocabConfig& c) { return decode_mixed(t, c); });

  // Metrics.
  m.def("gleu", [](const TokenSeq& out, const TokenSeq& ref) { return gleu(out, ref); });
  m.def("corpus_bleu", &corpus_bleu, py::arg("hypotheses"), py::arg("references"));

  // Decoding parameters.
  py::class_<ScoreParams>(m, "ScoreParams")
      .def(py::init<>())
      .def_readwrite("lp_alpha", &ScoreParams::lp_alpha)
      .def_readwrite("cp_beta", &ScoreParams::cp_beta)
      .def_readwrite("beam_width", &ScoreParams::beam_width)
      .def_readwrite("prune_margin", &ScoreParams::prune_margin)
      .def_readwrite("max_len_factor", &ScoreParams::max_len_factor)
      .def_readwrite("max_len", &ScoreParams::max_len)
      .def("validate", &ScoreParams::validate);
  m.def("length_penalty", &length_penalty);
  m.def("coverage_penalty", [](const std::vector<double>& mass, double beta) { return coverage_penalty(mass, beta); });

  // Models.
  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("vocab_size", &ModelConfig::vocab_size)
      .def_readwrite("encoder_layers", &ModelConfig::encoder_layers)
      .def_readwrite("decoder_layers", &ModelConfig::decoder_layers)
      .def_readwrite("hidden_size", &ModelConfig::hidden_size)
      .def_readwrite("embedding_size", &ModelConfig::embedding_size)
      .def_readwrite("attention_hidden", &ModelConfig::attention_hidden)
      .def_readwrite("accumulator_clip", &ModelConfig::accumulator_clip)
      .def_readwrite("logit_clip", &ModelConfig::logit_clip)
      .def_readwrite("bos_id", &ModelConfig::bos_id)
      .def_readwrite("eos_id", &ModelConfig::eos_id)
      .def("validate", &ModelConfig::validate);

  py::class_<PyModel>(m, "Model")
      .def(py::init([](const ModelConfig& c, std::uint64_t seed) {
             c.validate();
             return PyModel{c, ModelParams::init_uniform(c, seed)};
           }),
           py::arg("config"), py::arg("seed"))
      .def_static("load",
                  [](const std::filesystem::path& p) {
                    LoadedModel l = load_checkpoint(p);
                    return PyModel{l.config, std::move(l.params)};
                  })
      .def("save", [](const PyModel& self, const std::filesystem::path& p) { save_checkpoint(self.params, self.config, p); })
      .def_readonly("config", &PyModel::config)
      .def_property_readonly("parameter_count", [](const PyModel& self) { return self.params.parameter_count(); })
      .def("log_prob",
           [](const PyModel& self, const TokenSeq& src, const TokenSeq& tgt) {
             return sequence_log_prob(src, tgt, self.params, self.config);
           })
      .def("greedy",
           [](const PyModel& self, const TokenSeq& src, int max_len) {
             return greedy_decode(self.view(), src, max_len).tokens;
           })
      .def(
          "translate",
          [](const PyModel& self, const std::vector<TokenSeq>& sources, const ScoreParams& sp, int batch_cap) {
            return translate_impl(self.view(), sources, sp, batch_cap);
          },
          py::arg("sources"), py::arg("params") = ScoreParams{}, py::arg("batch_cap") = 64)
      .def(
          "train",
          [](PyModel& self, const std::vector<std::pair<TokenSeq, TokenSeq>>& data, const TrainConfig& tc) {
            const auto pairs = from_tuples(data);
            OptimizerState state = OptimizerState::fresh(self.config);
            std::vector<double> losses;
            py::gil_scoped_release release;
            train_ml(pairs, self.params, state, self.config, tc, [&](const StepReport& r) { losses.push_back(r.loss); });
            return losses;
          },
          py::arg("data"), py::arg("config"));

  py::enum_<Narrowing>(m, "Narrowing")
      .value("HIGH_BYTE", Narrowing::kHighByte)
      .value("ROUND", Narrowing::kRound)
      .value("WIDE", Narrowing::kWide);

  py::class_<QuantizedModel>(m, "QuantizedModel")
      .def_static(
          "from_model",
          [](const PyModel& fm, Narrowing mode) { return QuantizedModel::from_float(fm.params, fm.config, mode); },
          py::arg("model"), py::arg("narrowing") = Narrowing::kHighByte)
      .def_static("load", &QuantizedModel::load)
      .def("save", &QuantizedModel::save)
      .def_property_readonly("delta", &QuantizedModel::delta)
      .def_property_readonly("gamma", &QuantizedModel::gamma)
      .def_property_readonly("warning", &QuantizedModel::warning)
      .def("log_prob",
           [](const QuantizedModel& q, const TokenSeq& src, const TokenSeq& tgt) {
             return forced_log_prob(q, src, tgt);
           })
      .def("greedy",
           [](const QuantizedModel& q, const TokenSeq& src, int max_len) { return greedy_decode(q, src, max_len).tokens; })
      .def(
          "translate",
          [](const QuantizedModel& q, const std::vector<TokenSeq>& sources, const ScoreParams& sp, int batch_cap) {
            return translate_impl(q, sources, sp, batch_cap);
          },
          py::arg("sources"), py::arg("params") = ScoreParams{}, py::arg("batch_cap") = 64)
      .def("__eq__", [](const QuantizedModel& a, const QuantizedModel& b) { return a == b; });

  // Training and toy task.
  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("adam_steps", &TrainConfig::adam_steps)
      .def_readwrite("adam_lr", &TrainConfig::adam_lr)
      .def_readwrite("sgd_lr", &TrainConfig::sgd_lr)
      .def_readwrite("anneal_start", &TrainConfig::anneal_start)
      .def_readwrite("anneal_interval", &TrainConfig::anneal_interval)
      .def_readwrite("grad_norm_cap", &TrainConfig::grad_norm_cap)
      .def_readwrite("total_steps", &TrainConfig::total_steps)
      .def_readwrite("delta_anneal_steps", &TrainConfig::delta_anneal_steps)
      .def_readwrite("seed", &TrainConfig::seed)
      .def("validate", &TrainConfig::validate);

  py::class_<ToyTask>(m, "ToyTask")
      .def(py::init<>())
      .def_readwrite("symbols", &ToyTask::symbols)
      .def_readwrite("min_len", &ToyTask::min_len)
      .def_readwrite("max_len", &ToyTask::max_len)
      .def_property_readonly("vocab_size", &ToyTask::vocab_size)
      .def(
          "generate", [](const ToyTask& t, std::size_t n, std::uint64_t seed) { return as_tuples(t.generate(n, seed)); },
          py::arg("pairs"), py::arg("seed"));
  m.def("toy_model_config", &toy_model_config, py::arg("task"), py::arg("clip_trained") = true);
  m.def("toy_train_config", &toy_train_config, py::arg("seed") = 1);

  m.def(
      "gradcheck",
      [](int trials, std::uint64_t seed) {
        GradCheckConfig gc;
        gc.trials = trials;
        gc.seed = seed;
        const GradCheckReport r = run_gradcheck(gc);
        return py::make_tuple(r.passed(), r.max_rel_error);
      },
      py::arg("trials") = 6, py::arg("seed") = 7);
}
