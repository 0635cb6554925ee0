// Copyright 2026 The gnmt-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnmt/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "gnmt/checkpoint.hpp"

namespace gnmt {

namespace {

struct Field {
  const char* section;
  const char* key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <class T>
T parse_integer(const std::string& key, const std::string& s) {
  T v{};
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) throw ConfigError("invalid integer for " + key + ": '" + s + "'");
  return v;
}

double parse_double(const std::string& key, const std::string& s) {
  try {
    return parse_real(s);
  } catch (const FormatError&) {
    throw ConfigError("invalid number for " + key + ": '" + s + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "off" || s == "no") return false;
  throw ConfigError("invalid boolean for " + key + ": '" + s + "'");
}

#define GNMT_INT(sec, name, member)                                                         \
  Field {                                                                                   \
    sec, name, [](const RunConfig& c) { return std::to_string(c.member); },                 \
        [](RunConfig& c, const std::string& v) {                                            \
          c.member = parse_integer<decltype(c.member)>(std::string(sec) + "." + name, v);   \
        }                                                                                   \
  }
#define GNMT_REAL(sec, name, member)                                                                      \
  Field {                                                                                                 \
    sec, name, [](const RunConfig& c) { return format_real(c.member); },                                  \
        [](RunConfig& c, const std::string& v) { c.member = parse_double(std::string(sec) + "." + name, v); } \
  }
#define GNMT_BOOL(sec, name, member)                                                                    \
  Field {                                                                                               \
    sec, name, [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); },             \
        [](RunConfig& c, const std::string& v) { c.member = parse_bool(std::string(sec) + "." + name, v); } \
  }
#define GNMT_PATH(name, member)                                                                 \
  Field {                                                                                       \
    "paths", name, [](const RunConfig& c) { return c.paths.member.string(); },                  \
        [](RunConfig& c, const std::string& v) { c.paths.member = std::filesystem::path(v); }   \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      GNMT_INT("model", "encoder_layers", model.encoder_layers),
      GNMT_INT("model", "decoder_layers", model.decoder_layers),
      GNMT_INT("model", "hidden_size", model.hidden_size),
      GNMT_INT("model", "embedding_size", model.embedding_size),
      GNMT_INT("model", "residual_start_layer", model.residual_start_layer),
      GNMT_INT("model", "vocab_size", model.vocab_size),
      GNMT_INT("model", "attention_hidden", model.attention_hidden),
      GNMT_REAL("model", "logit_clip", model.logit_clip),
      GNMT_REAL("model", "accumulator_clip", model.accumulator_clip),
      GNMT_INT("train", "batch_size", train.batch_size),
      GNMT_INT("train", "adam_steps", train.adam_steps),
      GNMT_REAL("train", "adam_lr", train.adam_lr),
      GNMT_REAL("train", "adam_beta1", train.adam_beta1),
      GNMT_REAL("train", "adam_beta2", train.adam_beta2),
      GNMT_REAL("train", "adam_epsilon", train.adam_epsilon),
      GNMT_REAL("train", "sgd_lr", train.sgd_lr),
      GNMT_INT("train", "anneal_start", train.anneal_start),
      GNMT_INT("train", "anneal_interval", train.anneal_interval),
      GNMT_REAL("train", "anneal_factor", train.anneal_factor),
      GNMT_REAL("train", "grad_norm_cap", train.grad_norm_cap),
      GNMT_REAL("train", "dropout_prob", train.dropout_prob),
      GNMT_REAL("train", "mix_alpha", train.mix_alpha),
      GNMT_INT("train", "rl_samples", train.rl_samples),
      GNMT_REAL("train", "rl_lr", train.rl_lr),
      GNMT_REAL("train", "rl_max_len_factor", train.rl_max_len_factor),
      GNMT_INT("train", "rl_eval_interval", train.rl_eval_interval),
      GNMT_INT("train", "rl_patience", train.rl_patience),
      GNMT_INT("train", "rl_max_steps", train.rl_max_steps),
      GNMT_REAL("train", "delta_start", train.delta_start),
      GNMT_INT("train", "total_steps", train.total_steps),
      GNMT_INT("train", "delta_anneal_steps", train.delta_anneal_steps),
      GNMT_REAL("decode", "lp_alpha", decode.lp_alpha),
      GNMT_REAL("decode", "cp_beta", decode.cp_beta),
      GNMT_INT("decode", "beam_width", decode.beam_width),
      GNMT_REAL("decode", "prune_margin", decode.prune_margin),
      GNMT_REAL("decode", "max_len_factor", decode.max_len_factor),
      GNMT_INT("decode", "batch_cap", batch_cap),
      GNMT_PATH("train_source", train_source),
      GNMT_PATH("train_target", train_target),
      GNMT_PATH("dev_source", dev_source),
      GNMT_PATH("dev_target", dev_target),
      GNMT_PATH("test_source", test_source),
      GNMT_PATH("test_target", test_target),
      GNMT_PATH("vocab", vocab),
      GNMT_PATH("run_dir", run_dir),
      GNMT_INT("run", "vocab_tokens", vocab_tokens),
      GNMT_BOOL("run", "quantize", quantize),
      GNMT_BOOL("run", "rl", rl),
      GNMT_INT("run", "checkpoint_interval", checkpoint_interval),
      GNMT_INT("run", "eval_interval", eval_interval),
      Field{"run", "seed", [](const RunConfig& c) { return c.seed ? std::to_string(*c.seed) : std::string(); },
            [](RunConfig& c, const std::string& v) {
              if (v.empty())
                c.seed.reset();
              else
                c.seed = parse_integer<std::uint64_t>("run.seed", v);
            }},
  };
  return f;
}

#undef GNMT_INT
#undef GNMT_REAL
#undef GNMT_BOOL
#undef GNMT_PATH

}  // namespace

RunConfig RunConfig::parse(const std::string& text, const std::filesystem::path& base_dir) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  RunConfig cfg;
  std::set<std::string> known;
  for (const Field& f : fields()) known.insert(std::string(f.section) + "." + f.key);
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError("config key '" + section + "' must live inside a section");
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      if (!known.count(full)) throw ConfigError("unknown config key '" + full + "'");
      for (const Field& f : fields())
        if (full == std::string(f.section) + "." + f.key) f.set(cfg, value.data());
    }
  }
  if (!base_dir.empty()) {
    for (auto* p : {&cfg.paths.train_source, &cfg.paths.train_target, &cfg.paths.dev_source, &cfg.paths.dev_target,
                    &cfg.paths.test_source, &cfg.paths.test_target, &cfg.paths.vocab, &cfg.paths.run_dir})
      if (!p->empty() && p->is_relative()) *p = base_dir / *p;
  }
  cfg.train.validate();
  cfg.decode.validate();
  if (cfg.batch_cap < 1) throw ConfigError("decode.batch_cap must be >= 1");
  if (cfg.seed) cfg.train.seed = *cfg.seed;
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.parent_path());
}

void RunConfig::write(std::ostream& out) const {
  std::string section;
  for (const Field& f : fields()) {
    if (section != f.section) {
      if (!section.empty()) out << '\n';
      section = f.section;
      out << '[' << section << "]\n";
    }
    out << f.key << " = " << f.get(*this) << '\n';
  }
}

std::string RunConfig::to_string() const {
  std::ostringstream ss;
  write(ss);
  return ss.str();
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read '" + path.string() + "'");
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

ParallelText ParallelText::load(const std::filesystem::path& source, const std::filesystem::path& target) {
  ParallelText t{read_lines(source), read_lines(target)};
  if (t.source.size() != t.target.size())
    throw UsageError("parallel corpus is misaligned: " + std::to_string(t.source.size()) + " source lines vs " +
                     std::to_string(t.target.size()) + " target lines");
  for (std::size_t i = 0; i < t.source.size(); ++i)
    if (t.source[i].empty() || t.target[i].empty())
      throw UsageError("empty line " + std::to_string(i + 1) + " in parallel corpus");
  return t;
}

}  // namespace gnmt
