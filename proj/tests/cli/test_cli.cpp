// Copyright 2026 The gnmt-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "gnmt/checkpoint.hpp"
#include "gnmt/config.hpp"
#include "gnmt/segmentation.hpp"
#include "helpers.hpp"

namespace gnmt {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

class Cli : public ::testing::Test {
 protected:
  Result run(const std::string& args, const std::string& stdin_text = "") {
    const fs::path in = dir_ / "stdin.txt", out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    std::ofstream(in) << stdin_text;
    const std::string cmd = "cd " + quote(dir_.path().string()) + " && " + quote(GNMT_CLI_PATH) + " " + args + " < " +
                            quote(in.string()) + " > " + quote(out.string()) + " 2> " + quote(err.string());
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
  }

  fs::path path(const std::string& name) const { return dir_ / name; }

  void write(const std::string& name, const std::string& text) { std::ofstream(dir_ / name) << text; }

  // A small but complete run: toy data, a two-layer model, a few steps.
  void make_small_run(long steps = 20) {
    ASSERT_EQ(run("toy-data --out-dir data --seed 4 --train 60 --dev 8 --test 8").code, 0);
    write("small.ini", "[model]\nencoder_layers = 2\ndecoder_layers = 2\nhidden_size = 6\nembedding_size = 6\n"
                       "attention_hidden = 6\n[train]\nbatch_size = 4\nadam_steps = 10\nanneal_start = 15\n"
                       "anneal_interval = 5\nsgd_lr = 0.1\ndelta_anneal_steps = 20\ntotal_steps = " +
                           std::to_string(steps) +
                           "\nrl_samples = 3\nrl_eval_interval = 2\nrl_patience = 1\nrl_max_steps = 4\n"
                           "[paths]\ntrain_source = data/train.src\ntrain_target = data/train.tgt\n"
                           "dev_source = data/dev.src\ndev_target = data/dev.tgt\ntest_source = data/test.src\n"
                           "test_target = data/test.tgt\nvocab = data/vocab.txt\nrun_dir = run\n");
  }

  testing::TempDir dir_;
};

// ---------------------------------------------------------------------------

TEST_F(Cli, WordpieceTrainWritesExactlyDPieces) {
  write("corpus.txt", "the cat sat\nthe hat\nat that\n");
  const std::size_t basic = basic_piece_count({"the cat sat", "the hat", "at that"}, 500);
  const std::size_t d = basic + 5;
  const Result r = run("wordpiece-train --corpus corpus.txt --tokens " + std::to_string(d) + " --out v1.txt");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("outside the recommended"), std::string::npos);
  const WordpieceVocab v = WordpieceVocab::load(path("v1.txt"));
  EXPECT_EQ(v.size(), kNumReserved + d);
  EXPECT_EQ(read_lines(path("v1.txt")).size(), kNumReserved + d);

  ASSERT_EQ(run("wordpiece-train --corpus corpus.txt --tokens " + std::to_string(d) + " --out v2.txt").code, 0);
  EXPECT_EQ(slurp(path("v1.txt")), slurp(path("v2.txt")));

  const Result small = run("wordpiece-train --corpus corpus.txt --tokens 3 --out v3.txt");
  EXPECT_EQ(small.code, 2);
  EXPECT_NE(small.err.find("desired_tokens"), std::string::npos);
  EXPECT_FALSE(fs::exists(path("v3.txt")));
}

TEST_F(Cli, EncodePrintsIdsOrPieces) {
  write("corpus.txt", "ab ab ba\n");
  ASSERT_EQ(run("wordpiece-train --corpus corpus.txt --tokens 6 --out v.txt").code, 0);
  const WordpieceVocab v = WordpieceVocab::load(path("v.txt"));
  const Result ids = run("encode --vocab v.txt", "ab ba\n\nba\n");
  ASSERT_EQ(ids.code, 0) << ids.err;
  std::ostringstream want;
  for (const std::string line : {"ab ba", "", "ba"}) {
    const TokenSeq s = v.segment(line);
    for (std::size_t i = 0; i < s.size(); ++i) want << (i ? " " : "") << s[i];
    want << '\n';
  }
  EXPECT_EQ(ids.out, want.str());
  const Result pieces = run("encode --vocab v.txt --pieces", "ba\n");
  std::string joined;
  for (const auto& p : v.segment_pieces("ba")) joined += (joined.empty() ? "" : " ") + p;
  EXPECT_EQ(pieces.out, joined + "\n");
}

TEST_F(Cli, UsageErrorsExitWithTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("translate").code, 2);
  const Result missing = run("encode --vocab nowhere.txt");
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.err.find("nowhere.txt"), std::string::npos);
  EXPECT_TRUE(missing.out.empty());
}

TEST_F(Cli, TrainRequiresASeedAndExistingPaths) {
  make_small_run();
  const Result no_seed = run("train --config small.ini");
  EXPECT_EQ(no_seed.code, 2);
  EXPECT_NE(no_seed.err.find("seed"), std::string::npos);
  EXPECT_FALSE(fs::exists(path("run")));

  fs::remove(path("data/dev.tgt"));
  const Result no_dev = run("train --config small.ini --seed 3");
  EXPECT_EQ(no_dev.code, 2);
  EXPECT_NE(no_dev.err.find("dev_target"), std::string::npos);
  EXPECT_FALSE(fs::exists(path("run")));
}

TEST_F(Cli, TrainWritesLogConfigAndCheckpoints) {
  make_small_run();
  const Result r = run("train --config small.ini --seed 3");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto log = read_lines(path("run/train.log"));
  ASSERT_EQ(log.size(), 21u);
  EXPECT_EQ(log[0], "step\tphase\tloss\tgrad_norm\tlr\tdelta");
  EXPECT_EQ(log[1].substr(0, 7), "0\tadam\t");
  EXPECT_EQ(log[20].substr(0, 6), "19\tsgd");

  // The effective config is re-emitted verbatim and parses back to itself.
  const std::string emitted = slurp(path("run/config.ini"));
  const RunConfig rc = RunConfig::parse(emitted);
  EXPECT_EQ(rc.to_string(), emitted);
  EXPECT_EQ(rc.seed, 3u);
  EXPECT_EQ(rc.model.vocab_size, static_cast<int>(WordpieceVocab::load(path("data/vocab.txt")).size()));

  const LoadedModel m = load_checkpoint(path("run/final.ckpt"));
  EXPECT_EQ(m.config, rc.model);
  EXPECT_EQ(read_archive(path("run/final.ckpt")).meta.at("train.step"), "20");
}

TEST_F(Cli, TrainingIsByteDeterministic) {
  make_small_run();
  ASSERT_EQ(run("train --config small.ini --seed 3").code, 0);
  const std::string a = slurp(path("run/final.ckpt"));
  const std::string log_a = slurp(path("run/train.log"));
  ASSERT_EQ(run("train --config small.ini --seed 3").code, 0);
  EXPECT_EQ(slurp(path("run/final.ckpt")), a);
  EXPECT_EQ(slurp(path("run/train.log")), log_a);
  ASSERT_EQ(run("train --config small.ini --seed 4").code, 0);
  EXPECT_NE(slurp(path("run/final.ckpt")), a);
}

TEST_F(Cli, ResumeContinuesTheStepCounter) {
  make_small_run(20);
  ASSERT_EQ(run("train --config small.ini --seed 3").code, 0);
  const std::string straight = slurp(path("run/final.ckpt"));

  make_small_run(8);
  ASSERT_EQ(run("train --config small.ini --seed 3").code, 0);
  fs::copy_file(path("run/final.ckpt"), path("half.ckpt"));
  make_small_run(20);
  const Result r = run("train --config small.ini --seed 3 --resume half.ckpt");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("resuming at step 8"), std::string::npos);
  EXPECT_EQ(slurp(path("run/final.ckpt")), straight);
  const auto log = read_lines(path("run/train.log"));
  EXPECT_EQ(log.back().substr(0, 3), "19\t");
  EXPECT_EQ(log[9].substr(0, 2), "8\t");
}

TEST_F(Cli, PeriodicCheckpointsKeepTheLastThree) {
  make_small_run();
  std::ofstream(path("small.ini"), std::ios::app) << "[run]\ncheckpoint_interval = 4\neval_interval = 10\n";
  ASSERT_EQ(run("train --config small.ini --seed 3").code, 0);
  EXPECT_FALSE(fs::exists(path("run/step-4.ckpt")));
  EXPECT_FALSE(fs::exists(path("run/step-8.ckpt")));
  EXPECT_TRUE(fs::exists(path("run/step-12.ckpt")));
  EXPECT_TRUE(fs::exists(path("run/step-20.ckpt")));
  EXPECT_TRUE(fs::exists(path("run/best.ckpt")));
}

TEST_F(Cli, TranslateIsDeterministicAndPreservesLines) {
  make_small_run();
  ASSERT_EQ(run("train --config small.ini --seed 3").code, 0);
  const std::string input = "a b c\n\nd e\nf\n";
  const Result a = run("translate --config small.ini --checkpoint run/final.ckpt --beam 3", input);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(std::count(a.out.begin(), a.out.end(), '\n'), 4);
  EXPECT_EQ(a.out.substr(a.out.find('\n'), 2), "\n\n");
  const Result b = run("translate --config small.ini --checkpoint run/final.ckpt --beam 3", input);
  EXPECT_EQ(a.out, b.out);

  const Result empty = run("translate --config small.ini --checkpoint run/final.ckpt", "");
  EXPECT_EQ(empty.code, 0);
  EXPECT_TRUE(empty.out.empty());

  const Result bad = run("translate --config small.ini --checkpoint run/final.ckpt --lp-alpha 3", input);
  EXPECT_EQ(bad.code, 2);
}

TEST_F(Cli, TranslateRejectsAForeignVocabulary) {
  make_small_run();
  ASSERT_EQ(run("train --config small.ini --seed 3").code, 0);
  write("corpus.txt", "a b c d\n");
  ASSERT_EQ(run("wordpiece-train --corpus corpus.txt --tokens 12 --out other.txt").code, 0);
  const Result r = run("translate --vocab other.txt --checkpoint run/final.ckpt", "a b\n");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("vocabulary does not match"), std::string::npos);
}

TEST_F(Cli, QuantizedDecodingRunsTheQuantizedPath) {
  make_small_run();
  ASSERT_EQ(run("train --config small.ini --seed 3").code, 0);
  const Result q = run("quantize --checkpoint run/final.ckpt --out run/final.qckpt");
  ASSERT_EQ(q.code, 0) << q.err;
  EXPECT_EQ(read_archive(path("run/final.qckpt")).format, CheckpointFormat::kQuantized);
  const std::string input = "a b c\nd e\n";
  const Result from_file = run("translate --config small.ini --checkpoint run/final.qckpt --quantized", input);
  ASSERT_EQ(from_file.code, 0) << from_file.err;
  const Result on_the_fly = run("translate --config small.ini --checkpoint run/final.ckpt --quantized", input);
  EXPECT_EQ(from_file.out, on_the_fly.out);
  EXPECT_EQ(run("translate --config small.ini --checkpoint run/final.qckpt --quantized", input).out, from_file.out);
  EXPECT_EQ(run("translate --config small.ini --checkpoint run/final.qckpt", input).code, 2);
  EXPECT_EQ(run("quantize --checkpoint run/final.qckpt --out again.qckpt").code, 2);
}

TEST_F(Cli, EvaluateReportsPerplexityFromPerTokenLogProbs) {
  make_small_run();
  ASSERT_EQ(run("train --config small.ini --seed 3").code, 0);
  write("three.src", "a b\nc d e\nf\n");
  write("three.tgt", "b a\ne d c\nf\n");
  const Result r = run("evaluate --config small.ini --checkpoint run/final.ckpt --source three.src --target three.tgt");
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);

  // Recompute through the model's sequence probabilities.
  const LoadedModel m = load_checkpoint(path("run/final.ckpt"));
  const WordpieceVocab v = WordpieceVocab::load(path("data/vocab.txt"));
  double nll = 0.0;
  std::size_t tokens = 0;
  const std::vector<std::pair<std::string, std::string>> pairs = {{"a b", "b a"}, {"c d e", "e d c"}, {"f", "f"}};
  for (const auto& [s, t] : pairs) {
    TokenSeq y = v.segment(t);
    y.push_back(m.config.eos_id);
    nll -= sequence_log_prob(v.segment(s), y, m.params, m.config);
    tokens += y.size();
  }
  EXPECT_EQ(j["sentences"], 3);
  EXPECT_EQ(j["target_tokens"], tokens);
  EXPECT_NEAR(j["log_perplexity"].get<double>(), nll / tokens, 1e-12);
  EXPECT_NEAR(j["perplexity"].get<double>(), std::exp(nll / tokens), 1e-9);
  EXPECT_GE(j["bleu"].get<double>(), 0.0);
  EXPECT_LE(j["gleu"].get<double>(), 1.0);

  const Result p = run("evaluate --config small.ini --checkpoint run/final.ckpt --source three.src --target three.tgt --parity");
  ASSERT_EQ(p.code, 0) << p.err;
  const json pj = json::parse(p.out);
  ASSERT_TRUE(pj.contains("float"));
  ASSERT_TRUE(pj.contains("quantized"));
  EXPECT_NEAR(pj["float"]["log_perplexity"].get<double>(), j["log_perplexity"].get<double>(), 0.0);
  for (const char* k : {"greedy_agreement", "log_perplexity_delta", "relative_log_perplexity_delta", "bleu_delta"})
    EXPECT_TRUE(pj.contains(k)) << k;

  write("short.tgt", "b a\n");
  EXPECT_EQ(run("evaluate --config small.ini --checkpoint run/final.ckpt --source three.src --target short.tgt").code, 2);
}

TEST_F(Cli, RefineRlKeepsTheBestDevScore) {
  make_small_run();
  ASSERT_EQ(run("train --config small.ini --seed 3").code, 0);
  const Result r = run("refine-rl --config small.ini --seed 3 --checkpoint run/final.ckpt --out rl.ckpt");
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_GE(j["best_dev_bleu"].get<double>(), j["initial_dev_bleu"].get<double>());
  EXPECT_TRUE(fs::exists(path("rl.ckpt")));
  EXPECT_GT(read_lines(path("run/rl.log")).size(), 1u);
  EXPECT_EQ(slurp(path("rl.ckpt")),
            (run("refine-rl --config small.ini --seed 3 --checkpoint run/final.ckpt --out rl2.ckpt"), slurp(path("rl2.ckpt"))));
}

TEST_F(Cli, GradcheckPassesAndCatchesCorruption) {
  const Result ok = run("gradcheck --trials 2");
  EXPECT_EQ(ok.code, 0) << ok.out;
  EXPECT_NE(ok.out.find("PASS"), std::string::npos);
  EXPECT_EQ(run("gradcheck --trials 2").out, ok.out);
  const Result bad = run("gradcheck --trials 1 --corrupt");
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.out.find("FAIL"), std::string::npos);
}

// The full reversal task through the command line: about a minute and a half
// of training on one core.
TEST_F(Cli, ToyTaskReachesHighDevScores) {
  ASSERT_EQ(run("toy-data --out-dir toy --seed 1").code, 0);
  const Result t = run("train --config toy/toy.ini");
  ASSERT_EQ(t.code, 0) << t.err;
  const Result e = run("evaluate --config toy/toy.ini --checkpoint toy/run/final.ckpt --source toy/dev.src --target toy/dev.tgt");
  ASSERT_EQ(e.code, 0) << e.err;
  const json j = json::parse(e.out);
  EXPECT_GE(j["gleu"].get<double>(), 0.95) << e.out;
  EXPECT_GE(j["bleu"].get<double>(), 0.95) << e.out;
}

}  // namespace
}  // namespace gnmt
