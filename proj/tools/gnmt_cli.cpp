// Copyright 2026 The gnmt-desk Authors
// SPDX-License-Identifier: Apache-2.0

// gnmt: command-line front end for vocabulary induction, training, decoding,
// evaluation and quantization.
//
// Exit codes: 0 success, 1 the command ran but its check failed (gradcheck),
// 2 usage or configuration error, 3 bad input data or file format,
// 4 training diverged, 5 other runtime error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gnmt/checkpoint.hpp"
#include "gnmt/config.hpp"
#include "gnmt/decode.hpp"
#include "gnmt/gradcheck.hpp"
#include "gnmt/metrics.hpp"
#include "gnmt/model.hpp"
#include "gnmt/quantize.hpp"
#include "gnmt/segmentation.hpp"
#include "gnmt/toy.hpp"
#include "gnmt/training.hpp"
#include "gnmt/utf8.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace gnmt {
namespace {

constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitTraining = 4;
constexpr int kExitRuntime = 5;

constexpr const char* kFingerprintKey = "vocab.fingerprint";

void warn(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

// FNV-1a over the piece list; stable across platforms and runs.
std::string vocab_fingerprint(const WordpieceVocab& v) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const std::string& p : v.pieces()) {
    for (unsigned char c : p) h = (h ^ c) * 0x100000001b3ULL;
    h = (h ^ 0x0a) * 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void check_fingerprint(const Archive& a, const WordpieceVocab& v) {
  auto it = a.meta.find(kFingerprintKey);
  if (it == a.meta.end()) {
    warn("checkpoint records no vocabulary fingerprint; cannot verify the vocabulary");
    return;
  }
  if (it->second != vocab_fingerprint(v))
    throw ConfigError("vocabulary does not match the one the checkpoint was trained with");
}

void require_file(const fs::path& p, const std::string& what) {
  if (p.empty()) throw ConfigError(what + " path is not set");
  if (!fs::is_regular_file(p)) throw ConfigError(what + " '" + p.string() + "' does not exist");
}

std::vector<std::string> read_input(const std::string& path) {
  if (path.empty() || path == "-") {
    std::vector<std::string> lines;
    for (std::string line; std::getline(std::cin, line);) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      lines.push_back(std::move(line));
    }
    return lines;
  }
  require_file(path, "input");
  return read_lines(path);
}

std::vector<SentencePair> segment_corpus(const ParallelText& text, const WordpieceVocab& vocab, TokenId eos) {
  std::vector<SentencePair> out;
  out.reserve(text.source.size());
  for (std::size_t i = 0; i < text.source.size(); ++i) {
    SentencePair p{vocab.segment(text.source[i]), vocab.segment(text.target[i])};
    if (p.source.empty() || p.target.empty())
      throw UsageError("line " + std::to_string(i + 1) + " has no words after segmentation");
    p.target.push_back(eos);
    out.push_back(std::move(p));
  }
  return out;
}

// Drops EOS and control ids the model may emit; detokenize rejects them.
std::string render(const WordpieceVocab& vocab, const TokenSeq& tokens) {
  TokenSeq kept;
  for (TokenId t : tokens)
    if (t >= static_cast<TokenId>(kNumReserved) || t == kUnknownCharId) kept.push_back(t);
  return vocab.detokenize(kept);
}

// ---------------------------------------------------------------------------
// Model loading: float or quantized checkpoints behind one interface.

struct LoadedForDecoding {
  ModelConfig config;
  std::optional<ModelParams> params;       // float checkpoint
  std::optional<QuantizedModel> quantized;  // --quantized
  Archive archive;
};

LoadedForDecoding load_for_decoding(const fs::path& path, bool quantized, Narrowing narrowing) {
  require_file(path, "checkpoint");
  LoadedForDecoding m;
  m.archive = read_archive(path);
  if (m.archive.format == CheckpointFormat::kQuantized) {
    if (!quantized) throw UsageError("'" + path.string() + "' is a quantized checkpoint; pass --quantized");
    m.quantized = QuantizedModel::from_archive(m.archive);
    m.config = m.quantized->config();
    if (!m.quantized->warning().empty()) warn(m.quantized->warning());
    return m;
  }
  m.config = config_from_meta(m.archive.meta);
  m.params = params_from_archive(m.archive, m.config);
  if (quantized) {
    m.quantized = QuantizedModel::from_float(*m.params, m.config, narrowing);
    if (!m.quantized->warning().empty()) warn(m.quantized->warning());
  }
  return m;
}

template <class Fn>
auto with_model(const LoadedForDecoding& m, Fn&& fn) {
  if (m.quantized) return fn(*m.quantized);
  return fn(FloatModel(*m.params, m.config));
}

// ---------------------------------------------------------------------------
// Shared option groups.

struct DecodeFlags {
  std::optional<int> beam;
  std::optional<double> lp_alpha, cp_beta, prune_margin;
  std::optional<int> batch_cap;

  void add(CLI::App* app) {
    app->add_option("--beam", beam, "beam width");
    app->add_option("--lp-alpha", lp_alpha, "length penalty exponent");
    app->add_option("--cp-beta", cp_beta, "coverage penalty weight");
    app->add_option("--prune-margin", prune_margin, "pruning margin in natural-log units");
    app->add_option("--batch-cap", batch_cap, "sentences decoded together");
  }

  void apply(RunConfig& rc) const {
    if (beam) rc.decode.beam_width = *beam;
    if (lp_alpha) rc.decode.lp_alpha = *lp_alpha;
    if (cp_beta) rc.decode.cp_beta = *cp_beta;
    if (prune_margin) rc.decode.prune_margin = *prune_margin;
    if (batch_cap) rc.batch_cap = *batch_cap;
    rc.decode.validate();
    if (rc.batch_cap < 1) throw ConfigError("batch cap must be >= 1");
  }
};

RunConfig load_config(const std::string& path) {
  if (path.empty()) return RunConfig{};
  require_file(path, "config");
  return RunConfig::load(path);
}

WordpieceVocab load_vocab(const std::string& flag, const RunConfig& rc) {
  const fs::path p = flag.empty() ? rc.paths.vocab : fs::path(flag);
  require_file(p, "vocabulary");
  return WordpieceVocab::load(p);
}

// A config passed next to a checkpoint may disagree with the model the
// checkpoint holds; the checkpoint wins.
void reconcile_model_config(const RunConfig& rc, const std::string& config_path, const ModelConfig& from_ckpt) {
  if (config_path.empty()) return;
  ModelConfig mine = rc.model;
  mine.vocab_size = from_ckpt.vocab_size;
  if (!(mine == from_ckpt)) warn("model settings in the config differ from the checkpoint; using the checkpoint's");
}

std::uint64_t require_seed(const std::optional<std::uint64_t>& flag, RunConfig& rc) {
  if (flag) rc.seed = *flag;
  if (!rc.seed) throw UsageError("a seed is required: pass --seed or set run.seed");
  rc.train.seed = *rc.seed;
  return *rc.seed;
}

// ---------------------------------------------------------------------------
// wordpiece-train

int cmd_wordpiece_train(const std::vector<std::string>& corpora, std::size_t tokens, std::size_t char_cap,
                        const std::string& out) {
  std::vector<std::string> lines;
  for (const auto& c : corpora) {
    require_file(c, "corpus");
    auto more = read_lines(c);
    lines.insert(lines.end(), more.begin(), more.end());
  }
  if (auto w = vocabulary_size_warning(tokens)) warn(*w);
  const WordpieceVocab v = train_wordpiece(lines, tokens, char_cap);
  v.save(out);
  std::cerr << "wrote " << v.size() - kNumReserved << " pieces to " << out << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// encode

int cmd_encode(const std::string& vocab_path, const std::string& input, bool pieces) {
  require_file(vocab_path, "vocabulary");
  const WordpieceVocab v = WordpieceVocab::load(vocab_path);
  for (const std::string& line : read_input(input)) {
    if (pieces) {
      const auto ps = v.segment_pieces(line);
      for (std::size_t i = 0; i < ps.size(); ++i) std::cout << (i ? " " : "") << ps[i];
    } else {
      const TokenSeq ids = v.segment(line);
      for (std::size_t i = 0; i < ids.size(); ++i) std::cout << (i ? " " : "") << ids[i];
    }
    std::cout << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------
// toy-data: the reversal task as line-aligned text files plus a vocabulary.

int cmd_toy_data(const std::string& dir, std::uint64_t seed, std::size_t train_n, std::size_t dev_n,
                 std::size_t test_n) {
  const ToyTask task;
  fs::create_directories(dir);
  auto write = [&](const std::string& name, const std::vector<SentencePair>& pairs) {
    std::ofstream src(fs::path(dir) / (name + ".src")), tgt(fs::path(dir) / (name + ".tgt"));
    for (const auto& p : pairs) {
      for (std::size_t i = 0; i < p.source.size(); ++i) src << (i ? " " : "") << task.word(p.source[i]);
      src << '\n';
      for (std::size_t i = 0; i + 1 < p.target.size(); ++i) tgt << (i ? " " : "") << task.word(p.target[i]);
      tgt << '\n';
    }
    if (!src || !tgt) throw Error("cannot write toy data to '" + dir + "'");
  };
  write("train", task.generate(train_n, mix_seed(seed, 1)));
  write("dev", task.generate(dev_n, mix_seed(seed, 2)));
  write("test", task.generate(test_n, mix_seed(seed, 3)));
  // Every symbol is a one-letter word; the bare letters keep it representable.
  std::vector<std::string> pieces;
  for (int k = 0; k < task.symbols; ++k) {
    const std::string w = task.word(static_cast<TokenId>(kNumReserved + k));
    pieces.push_back(w);
    pieces.push_back("_" + w);
  }
  WordpieceVocab(pieces).save(fs::path(dir) / "vocab.txt");

  // A ready-to-run config with the toy model and schedule; paths are
  // relative to the config file.
  RunConfig rc;
  rc.model = toy_model_config(task);
  rc.model.vocab_size = 0;
  rc.train = toy_train_config(seed);
  rc.seed = seed;
  rc.paths = {"train.src", "train.tgt", "dev.src", "dev.tgt", "test.src", "test.tgt", "vocab.txt", "run"};
  std::ofstream cfg(fs::path(dir) / "toy.ini");
  rc.write(cfg);
  if (!cfg) throw Error("cannot write toy config to '" + dir + "'");
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainData {
  WordpieceVocab vocab;
  std::vector<SentencePair> train;
  std::vector<SentencePair> dev;
};

TrainData load_train_data(RunConfig& rc) {
  const RunPaths& p = rc.paths;
  require_file(p.train_source, "train_source");
  require_file(p.train_target, "train_target");
  require_file(p.vocab, "vocabulary");
  const bool has_dev = !p.dev_source.empty() || !p.dev_target.empty();
  if (has_dev) {
    require_file(p.dev_source, "dev_source");
    require_file(p.dev_target, "dev_target");
  }
  if (p.run_dir.empty()) throw ConfigError("paths.run_dir is not set");
  TrainData d{WordpieceVocab::load(p.vocab), {}, {}};
  const int v = static_cast<int>(d.vocab.size());
  if (rc.model.vocab_size == 0) rc.model.vocab_size = v;
  if (rc.model.vocab_size != v)
    throw ConfigError("model.vocab_size " + std::to_string(rc.model.vocab_size) + " does not match the vocabulary (" +
                      std::to_string(v) + " entries)");
  rc.model.validate();
  d.train = segment_corpus(ParallelText::load(p.train_source, p.train_target), d.vocab, rc.model.eos_id);
  if (has_dev) d.dev = segment_corpus(ParallelText::load(p.dev_source, p.dev_target), d.vocab, rc.model.eos_id);
  return d;
}

double greedy_bleu(const ModelParams& params, const ModelConfig& config, const std::vector<SentencePair>& data) {
  const FloatModel fm(params, config);
  std::vector<TokenSeq> hyp, ref;
  for (const auto& p : data) {
    TokenSeq g = greedy_decode(fm, p.source, static_cast<int>(2 * p.source.size())).tokens;
    if (!g.empty() && g.back() == config.eos_id) g.pop_back();
    hyp.push_back(std::move(g));
    ref.emplace_back(p.target.begin(), p.target.end() - 1);
  }
  return corpus_bleu(hyp, ref);
}

void write_effective_config(const RunConfig& rc) {
  fs::create_directories(rc.paths.run_dir);
  std::ofstream out(rc.paths.run_dir / "config.ini");
  rc.write(out);
  if (!out) throw Error("cannot write the effective config to '" + rc.paths.run_dir.string() + "'");
}

void save_training_checkpoint(const fs::path& path, const ModelParams& params, const ModelConfig& model,
                              const OptimizerState& state, const std::string& fingerprint) {
  Archive a = make_training_archive(params, model, state);
  a.meta[kFingerprintKey] = fingerprint;
  write_archive(path, a);
}

int cmd_train(const std::string& config_path, const std::optional<std::uint64_t>& seed_flag,
              const std::string& resume) {
  if (config_path.empty()) throw UsageError("train needs --config");
  RunConfig rc = load_config(config_path);
  const std::uint64_t seed = require_seed(seed_flag, rc);
  rc.train.validate();
  TrainData data = load_train_data(rc);
  const fs::path run = rc.paths.run_dir;
  write_effective_config(rc);
  const std::string fp = vocab_fingerprint(data.vocab);

  ModelParams params = ModelParams::init_uniform(rc.model, seed);
  OptimizerState state = OptimizerState::fresh(rc.model);
  if (!resume.empty()) {
    require_file(resume, "resume checkpoint");
    const Archive a = read_archive(resume);
    check_fingerprint(a, data.vocab);
    if (!(config_from_meta(a.meta) == rc.model)) throw ConfigError("resume checkpoint has a different model config");
    params = params_from_archive(a, rc.model);
    state = optimizer_from_archive(a, rc.model);
    std::cerr << "resuming at step " << state.step << '\n';
  }

  std::ofstream log(run / "train.log", resume.empty() ? std::ios::trunc : std::ios::app);
  if (resume.empty()) log << "step\tphase\tloss\tgrad_norm\tlr\tdelta\n";
  std::vector<fs::path> periodic;
  double best_dev = -1.0;
  const bool track_dev = rc.eval_interval > 0 && !data.dev.empty();

  auto after_step = [&](const StepReport& r) {
    write_log_line(log, r);
    const long done = r.step + 1;
    if (rc.checkpoint_interval > 0 && done % rc.checkpoint_interval == 0) {
      const fs::path p = run / ("step-" + std::to_string(done) + ".ckpt");
      save_training_checkpoint(p, params, rc.model, state, fp);
      periodic.push_back(p);
      if (periodic.size() > 3) {
        fs::remove(periodic.front());
        periodic.erase(periodic.begin());
      }
    }
    if (track_dev && done % rc.eval_interval == 0) {
      const double b = greedy_bleu(params, rc.model, data.dev);
      std::cerr << "step " << done << " dev BLEU " << format_real(b) << '\n';
      if (b > best_dev) {
        best_dev = b;
        save_training_checkpoint(run / "best.ckpt", params, rc.model, state, fp);
      }
    }
  };
  train_ml(data.train, params, state, rc.model, rc.train, after_step);
  save_training_checkpoint(run / "final.ckpt", params, rc.model, state, fp);

  if (rc.quantize) {
    const QuantizedModel q = QuantizedModel::from_float(params, rc.model);
    if (!q.warning().empty()) warn(q.warning());
    Archive qa = q.to_archive();
    qa.meta[kFingerprintKey] = fp;
    write_archive(run / "final.qckpt", qa);
  }
  std::cerr << "trained " << state.step << " steps; final checkpoint " << (run / "final.ckpt").string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// refine-rl

int cmd_refine_rl(const std::string& config_path, const std::optional<std::uint64_t>& seed_flag,
                  const std::string& ckpt, const std::string& out) {
  if (config_path.empty()) throw UsageError("refine-rl needs --config");
  RunConfig rc = load_config(config_path);
  require_seed(seed_flag, rc);
  require_file(ckpt, "checkpoint");
  const Archive a = read_archive(ckpt);
  if (a.format != CheckpointFormat::kFloat) throw UsageError("refine-rl needs a float checkpoint");
  const ModelConfig model = config_from_meta(a.meta);
  rc.model = model;
  TrainData data = load_train_data(rc);
  if (data.dev.empty()) throw ConfigError("refine-rl needs a dev set (paths.dev_source / paths.dev_target)");
  check_fingerprint(a, data.vocab);
  if (rc.train.rl_samples < 2) throw ConfigError("train.rl_samples must be >= 2 for refine-rl");

  fs::create_directories(rc.paths.run_dir);
  std::ofstream log(rc.paths.run_dir / "rl.log");
  log << "step\tphase\tloss\tgrad_norm\tlr\tdelta\n";
  const RefineResult r =
      refine_with_rl(params_from_archive(a, model), data.train,
                     [&](const ModelParams& p) { return greedy_bleu(p, model, data.dev); }, model, rc.train,
                     [&](const StepReport& s) { write_log_line(log, s); });
  Archive outa = make_float_archive(r.params, model);
  outa.meta[kFingerprintKey] = vocab_fingerprint(data.vocab);
  const fs::path dst = out.empty() ? rc.paths.run_dir / "rl.ckpt" : fs::path(out);
  write_archive(dst, outa);
  std::cout << json{{"initial_dev_bleu", r.initial_score},
                    {"best_dev_bleu", r.best_score},
                    {"evaluations", r.evaluations},
                    {"steps", r.steps}}
                   .dump()
            << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// translate

int cmd_translate(const std::string& config_path, const std::string& vocab_flag, const std::string& ckpt,
                  const std::string& input, bool quantized, const std::string& narrowing, const DecodeFlags& flags) {
  RunConfig rc = load_config(config_path);
  flags.apply(rc);
  const WordpieceVocab vocab = load_vocab(vocab_flag, rc);
  const LoadedForDecoding m = load_for_decoding(ckpt, quantized, parse_narrowing(narrowing));
  check_fingerprint(m.archive, vocab);
  reconcile_model_config(rc, config_path, m.config);

  const std::vector<std::string> lines = read_input(input);
  std::vector<TokenSeq> sources;
  std::vector<std::size_t> nonempty;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    TokenSeq s = vocab.segment(lines[i]);
    if (s.empty()) continue;
    nonempty.push_back(i);
    sources.push_back(std::move(s));
  }
  std::vector<std::string> out(lines.size());
  const auto results = with_model(m, [&](const auto& model) { return batch_decode(model, sources, rc.decode, rc.batch_cap); });
  for (std::size_t k = 0; k < results.size(); ++k) out[nonempty[k]] = render(vocab, results[k].best().tokens);
  for (const auto& line : out) std::cout << line << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

template <StepModel M>
json evaluate_column(const M& model, const WordpieceVocab& vocab, const std::vector<SentencePair>& data,
                     const RunConfig& rc, std::vector<TokenSeq>* greedy_out) {
  std::vector<TokenSeq> sources;
  for (const auto& p : data) sources.push_back(p.source);
  const auto results = batch_decode(model, sources, rc.decode, rc.batch_cap);
  WordInterner words;
  std::vector<TokenSeq> hyp, ref;
  double nll = 0.0, gleu_sum = 0.0;
  std::size_t tokens = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    hyp.push_back(words(render(vocab, results[i].best().tokens)));
    ref.push_back(words(render(vocab, data[i].target)));
    gleu_sum += gleu(hyp.back(), ref.back());
    nll -= forced_log_prob(model, data[i].source, data[i].target);
    tokens += data[i].target.size();
    if (greedy_out)
      greedy_out->push_back(greedy_decode(model, data[i].source, static_cast<int>(2 * data[i].source.size())).tokens);
  }
  const double lp = nll / static_cast<double>(tokens);
  return json{{"bleu", corpus_bleu(hyp, ref)},
              {"gleu", gleu_sum / static_cast<double>(data.size())},
              {"log_perplexity", lp},
              {"perplexity", std::exp(lp)}};
}

int cmd_evaluate(const std::string& config_path, const std::string& vocab_flag, const std::string& ckpt,
                 std::string source, std::string target, bool quantized, bool parity, const std::string& narrowing,
                 const DecodeFlags& flags) {
  RunConfig rc = load_config(config_path);
  flags.apply(rc);
  if (source.empty()) source = rc.paths.test_source.string();
  if (target.empty()) target = rc.paths.test_target.string();
  require_file(source, "test source");
  require_file(target, "test target");
  const WordpieceVocab vocab = load_vocab(vocab_flag, rc);
  const LoadedForDecoding m = load_for_decoding(ckpt, quantized || parity, parse_narrowing(narrowing));
  check_fingerprint(m.archive, vocab);
  reconcile_model_config(rc, config_path, m.config);
  const auto data = segment_corpus(ParallelText::load(source, target), vocab, m.config.eos_id);
  if (data.empty()) throw UsageError("empty test corpus");

  json out;
  out["sentences"] = data.size();
  std::size_t tokens = 0;
  for (const auto& p : data) tokens += p.target.size();
  out["target_tokens"] = tokens;
  if (!parity) {
    json col = with_model(m, [&](const auto& model) { return evaluate_column(model, vocab, data, rc, nullptr); });
    for (auto& [k, v] : col.items()) out[k] = v;
  } else {
    if (!m.params) throw UsageError("--parity needs a float checkpoint");
    std::vector<TokenSeq> gf, gq;
    out["float"] = evaluate_column(FloatModel(*m.params, m.config), vocab, data, rc, &gf);
    out["quantized"] = evaluate_column(*m.quantized, vocab, data, rc, &gq);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < gf.size(); ++i) agree += gf[i] == gq[i];
    const double lf = out["float"]["log_perplexity"], lq = out["quantized"]["log_perplexity"];
    out["greedy_agreement"] = static_cast<double>(agree) / static_cast<double>(gf.size());
    out["log_perplexity_delta"] = lq - lf;
    out["relative_log_perplexity_delta"] = lf == 0.0 ? std::abs(lq - lf) : std::abs(lq - lf) / std::abs(lf);
    out["bleu_delta"] = out["quantized"]["bleu"].get<double>() - out["float"]["bleu"].get<double>();
    out["narrowing"] = narrowing_name(m.quantized->narrowing());
    if (!m.quantized->warning().empty()) out["warning"] = m.quantized->warning();
  }
  std::cout << out.dump() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// quantize

int cmd_quantize(const std::string& ckpt, const std::string& out, const std::string& narrowing) {
  require_file(ckpt, "checkpoint");
  const Archive a = read_archive(ckpt);
  if (a.format != CheckpointFormat::kFloat) throw UsageError("'" + ckpt + "' is already quantized");
  const ModelConfig c = config_from_meta(a.meta);
  const QuantizedModel q = QuantizedModel::from_float(params_from_archive(a, c), c, parse_narrowing(narrowing));
  if (!q.warning().empty()) warn(q.warning());
  Archive qa = q.to_archive();
  if (auto it = a.meta.find(kFingerprintKey); it != a.meta.end()) qa.meta[kFingerprintKey] = it->second;
  write_archive(out, qa);
  std::cerr << "wrote quantized model (delta " << format_real(q.delta()) << ", gamma " << format_real(q.gamma())
            << ", " << narrowing_name(q.narrowing()) << ") to " << out << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// gradcheck

int cmd_gradcheck(std::uint64_t seed, int trials, double tolerance, bool corrupt) {
  GradCheckConfig gc;
  gc.seed = seed;
  gc.trials = trials;
  gc.tolerance = tolerance;
  gc.corrupt = corrupt;
  if (trials < 1) throw UsageError("--trials must be >= 1");
  const GradCheckReport r = run_gradcheck(gc);
  r.print(std::cout);
  return r.passed() ? 0 : kExitCheckFailed;
}

int run(int argc, char** argv) {
  CLI::App app{"gnmt: neural machine translation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "gnmt 0.1.0");

  // wordpiece-train
  std::vector<std::string> wp_corpus;
  std::size_t wp_tokens = 8000, wp_char_cap = 500;
  std::string wp_out;
  auto* wp = app.add_subcommand("wordpiece-train", "induce a wordpiece vocabulary");
  wp->add_option("--corpus", wp_corpus, "training text, one sentence per line")->required();
  wp->add_option("--tokens", wp_tokens, "desired number of pieces (D)");
  wp->add_option("--char-cap", wp_char_cap, "most frequent characters kept");
  wp->add_option("--out", wp_out, "vocabulary file to write")->required();

  // encode
  std::string enc_vocab, enc_input;
  bool enc_pieces = false;
  auto* enc = app.add_subcommand("encode", "segment text into wordpiece ids");
  enc->add_option("--vocab", enc_vocab, "vocabulary file")->required();
  enc->add_option("--input", enc_input, "input file (default stdin)");
  enc->add_flag("--pieces", enc_pieces, "print pieces instead of ids");

  // toy-data
  std::string toy_dir;
  std::uint64_t toy_seed = 1;
  std::size_t toy_train = 2000, toy_dev = 200, toy_test = 200;
  auto* toy = app.add_subcommand("toy-data", "write the synthetic reversal task");
  toy->add_option("--out-dir", toy_dir, "output directory")->required();
  toy->add_option("--seed", toy_seed, "generator seed");
  toy->add_option("--train", toy_train, "training pairs");
  toy->add_option("--dev", toy_dev, "dev pairs");
  toy->add_option("--test", toy_test, "test pairs");

  // train
  std::string tr_config, tr_resume;
  std::optional<std::uint64_t> tr_seed;
  auto* tr = app.add_subcommand("train", "maximum-likelihood training");
  tr->add_option("--config", tr_config, "run config")->required();
  tr->add_option("--seed", tr_seed, "overrides run.seed");
  tr->add_option("--resume", tr_resume, "training checkpoint to continue from");

  // refine-rl
  std::string rl_config, rl_ckpt, rl_out;
  std::optional<std::uint64_t> rl_seed;
  auto* rl = app.add_subcommand("refine-rl", "refine a trained model with the mixed RL objective");
  rl->add_option("--config", rl_config, "run config")->required();
  rl->add_option("--seed", rl_seed, "overrides run.seed");
  rl->add_option("--checkpoint", rl_ckpt, "float checkpoint to refine")->required();
  rl->add_option("--out", rl_out, "refined checkpoint (default run_dir/rl.ckpt)");

  // translate
  std::string tl_config, tl_vocab, tl_ckpt, tl_input, tl_narrowing = "high-byte";
  bool tl_quantized = false;
  DecodeFlags tl_flags;
  auto* tl = app.add_subcommand("translate", "beam-search decode lines of text");
  tl->add_option("--config", tl_config, "run config (decode settings, vocabulary path)");
  tl->add_option("--vocab", tl_vocab, "vocabulary file");
  tl->add_option("--checkpoint", tl_ckpt, "model checkpoint")->required();
  tl->add_option("--input", tl_input, "input file (default stdin)");
  tl->add_flag("--quantized", tl_quantized, "decode with the quantized model");
  tl->add_option("--narrowing", tl_narrowing, "high-byte, round or wide");
  tl_flags.add(tl);

  // evaluate
  std::string ev_config, ev_vocab, ev_ckpt, ev_source, ev_target, ev_narrowing = "high-byte";
  bool ev_quantized = false, ev_parity = false;
  DecodeFlags ev_flags;
  auto* ev = app.add_subcommand("evaluate", "BLEU, GLEU and log-perplexity on a test corpus");
  ev->add_option("--config", ev_config, "run config");
  ev->add_option("--vocab", ev_vocab, "vocabulary file");
  ev->add_option("--checkpoint", ev_ckpt, "model checkpoint")->required();
  ev->add_option("--source", ev_source, "test source (default paths.test_source)");
  ev->add_option("--target", ev_target, "test target (default paths.test_target)");
  ev->add_flag("--quantized", ev_quantized, "evaluate the quantized model");
  ev->add_flag("--parity", ev_parity, "report float and quantized columns side by side");
  ev->add_option("--narrowing", ev_narrowing, "high-byte, round or wide");
  ev_flags.add(ev);

  // quantize
  std::string q_ckpt, q_out, q_narrowing = "high-byte";
  auto* qz = app.add_subcommand("quantize", "write an 8-bit quantized checkpoint");
  qz->add_option("--checkpoint", q_ckpt, "float checkpoint")->required();
  qz->add_option("--out", q_out, "quantized checkpoint to write")->required();
  qz->add_option("--narrowing", q_narrowing, "high-byte, round or wide");

  // gradcheck
  std::uint64_t gc_seed = 7;
  int gc_trials = 6;
  double gc_tol = 1e-4;
  bool gc_corrupt = false;
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of every gradient");
  gc->add_option("--seed", gc_seed, "suite seed");
  gc->add_option("--trials", gc_trials, "random configurations");
  gc->add_option("--tolerance", gc_tol, "maximum relative error");
  gc->add_flag("--corrupt", gc_corrupt, "perturb one analytic gradient (negative control)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  if (*wp) return cmd_wordpiece_train(wp_corpus, wp_tokens, wp_char_cap, wp_out);
  if (*enc) return cmd_encode(enc_vocab, enc_input, enc_pieces);
  if (*toy) return cmd_toy_data(toy_dir, toy_seed, toy_train, toy_dev, toy_test);
  if (*tr) return cmd_train(tr_config, tr_seed, tr_resume);
  if (*rl) return cmd_refine_rl(rl_config, rl_seed, rl_ckpt, rl_out);
  if (*tl) return cmd_translate(tl_config, tl_vocab, tl_ckpt, tl_input, tl_quantized, tl_narrowing, tl_flags);
  if (*ev)
    return cmd_evaluate(ev_config, ev_vocab, ev_ckpt, ev_source, ev_target, ev_quantized, ev_parity, ev_narrowing,
                        ev_flags);
  if (*qz) return cmd_quantize(q_ckpt, q_out, q_narrowing);
  if (*gc) return cmd_gradcheck(gc_seed, gc_trials, gc_tol, gc_corrupt);
  return kExitUsage;
}

}  // namespace
}  // namespace gnmt

int main(int argc, char** argv) {
  using namespace gnmt;
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const DecodeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const TrainingError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitTraining;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
