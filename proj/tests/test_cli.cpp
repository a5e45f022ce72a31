#include <gtest/gtest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "fixtures.hpp"
#include "syntaxshap/cli.hpp"
#include "syntaxshap/report.hpp"

using namespace syntaxshap;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string conllu_block(const std::string& id, const std::vector<std::string>& words,
                         const std::vector<int>& heads) {
  std::string text;
  for (const auto& w : words) text += (text.empty() ? "" : " ") + w;
  std::string out = "# sent_id = " + id + "\n# text = " + text + "\n";
  for (std::size_t k = 0; k < words.size(); ++k) {
    out += std::to_string(k + 1) + "\t" + words[k] + "\t_\t_\t_\t_\t" + std::to_string(heads[k]) +
           "\t" + (heads[k] == 0 ? "root" : "dep") + "\t_\t_\n";
  }
  return out + "\n";
}

std::vector<std::string> words(int n) {
  std::vector<std::string> out;
  for (int k = 0; k < n; ++k) out.push_back("w" + std::to_string(k));
  return out;
}

std::vector<int> chain_heads(int n) {
  std::vector<int> heads(n);
  for (int k = 0; k < n; ++k) heads[k] = k;
  return heads;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("syntaxshap_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    config_.out = dir_ / "out";
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& content) {
    write_file(dir_ / name, content);
    return dir_ / name;
  }

  // Four small sentences plus one over the token limit.
  void standard_inputs() {
    std::string doc = conllu_block("s1", {"A", "mom", "is", "a"}, {2, 0, 2, 3}) +
                      conllu_block("s2", {"the", "cat", "sat", "down"}, {2, 3, 0, 3}) +
                      conllu_block("s3", {"dogs", "are", "not", "cats"}, {2, 0, 2, 2}) +
                      conllu_block("s4", {"she", "ran"}, {2, 0}) +
                      conllu_block("long", words(16), chain_heads(16));
    config_.conllu = write("parses.conllu", doc);
  }

  json read_json(const fs::path& p) { return json::parse(read_file(p)); }

  fs::path dir_;
  cli::RunConfig config_;
  std::ostringstream log_;
};

std::size_t count_files(const fs::path& dir) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.is_regular_file();
  return n;
}

}  // namespace

TEST_F(CliTest, ExplainWritesOneFilePerMethodAndSeed) {
  config_.conllu = write("one.conllu", conllu_block("s1", {"A", "mom", "is", "a"}, {2, 0, 2, 3}));
  config_.command = "explain";
  config_.methods = {Method::kSyntaxShap, Method::kSyntaxShapW};
  config_.seeds = {0};
  ASSERT_EQ(cli::run(config_, log_), 0) << log_.str();
  EXPECT_EQ(count_files(config_.out / "explanations"), 2u);
  auto j = read_json(config_.out / "explanations" / "s1__syntaxshap__seed0.json");
  EXPECT_EQ(j["tokens"].size(), 4u);
  EXPECT_EQ(j["values"].size(), 4u);
}

TEST_F(CliTest, ExplainRejectsLongSentences) {
  standard_inputs();
  config_.command = "explain";
  config_.seeds = {0};
  ASSERT_EQ(cli::run(config_, log_), 0);
  auto rejects = read_file(config_.out / "rejects.jsonl");
  EXPECT_NE(rejects.find("\"id\":\"long\",\"reason\":\"too_long\""), std::string::npos) << rejects;
  auto summary = read_json(config_.out / "summary.json");
  EXPECT_EQ(summary["sentences"], 5);
  EXPECT_EQ(summary["explained"], 4);
  EXPECT_EQ(summary["rejected"], 1);
}

TEST_F(CliTest, ExplainIsByteIdenticalAcrossRuns) {
  standard_inputs();
  config_.command = "explain";
  config_.workers = 3;
  ASSERT_EQ(cli::run(config_, log_), 0);
  auto first = config_.out;
  config_.out = dir_ / "again";
  config_.workers = 1;
  ASSERT_EQ(cli::run(config_, log_), 0);
  std::size_t compared = 0;
  for (const auto& e : fs::recursive_directory_iterator(first)) {
    if (!e.is_regular_file()) continue;
    auto other = config_.out / fs::relative(e.path(), first);
    ASSERT_TRUE(fs::exists(other)) << other;
    EXPECT_EQ(read_file(e.path()), read_file(other)) << e.path();
    ++compared;
  }
  EXPECT_EQ(compared, 4u * 3u * 4u + 2u);
}

TEST_F(CliTest, ExplainFailsWhenEverySentenceIsRejected) {
  config_.command = "explain";
  config_.conllu = write("long.conllu", conllu_block("long", words(16), chain_heads(16)));
  EXPECT_EQ(cli::run(config_, log_), 1);
}

TEST_F(CliTest, DatasetJoinAndRejectReasons) {
  standard_inputs();
  config_.command = "explain";
  config_.seeds = {0};
  config_.methods = {Method::kSyntaxShap};
  config_.dataset = write("data.jsonl",
                          "{\"id\": \"s1\", \"sentence\": \"A mom is a\"}\n"
                          "{\"id\": \"x\", \"sentence\": \"the cat sat down\"}\n"
                          "{\"id\": \"p\", \"sentence\": \"Hi, you\"}\n"
                          "{\"id\": \"m\", \"sentence\": \"never parsed\"}\n");
  ASSERT_EQ(cli::run(config_, log_), 0);
  EXPECT_TRUE(fs::exists(config_.out / "explanations" / "x__syntaxshap__seed0.json"));
  auto rejects = read_file(config_.out / "rejects.jsonl");
  EXPECT_NE(rejects.find("\"reason\":\"punctuation\""), std::string::npos);
  EXPECT_NE(rejects.find("\"reason\":\"missing_parse\""), std::string::npos);
}

TEST_F(CliTest, MultiSpanParsesAreRejected) {
  config_.command = "explain";
  config_.conllu = write("two.conllu", conllu_block("ok", {"a", "b"}, {0, 1}) +
                                           conllu_block("two", {"a", "b"}, {0, 0}));
  ASSERT_EQ(cli::run(config_, log_), 0);
  EXPECT_NE(read_file(config_.out / "rejects.jsonl").find("\"id\":\"two\",\"reason\":\"multi_span\""),
            std::string::npos);
}

TEST_F(CliTest, EvaluateReportsMeanAndVariance) {
  standard_inputs();
  config_.command = "evaluate";
  config_.methods = {Method::kSyntaxShap, Method::kRandom};
  config_.metric.k = 5;
  ASSERT_EQ(cli::run(config_, log_), 0) << log_.str();
  auto summary = read_json(config_.out / "evaluate_summary.json");
  ASSERT_EQ(summary["methods"].size(), 2u);
  const auto& m = summary["methods"][0];
  EXPECT_EQ(m["n_seeds"], 4);
  EXPECT_EQ(m["div_at_k"]["per_seed"].size(), 4u);
  EXPECT_TRUE(m["div_at_k"].contains("mean"));
  EXPECT_TRUE(m["div_at_k"].contains("variance"));
  auto csv = read_file(config_.out / "evaluate_summary.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "method,n_seeds,fid_mean,fid_var,fid_rand_mean,fid_rand_var,div_at_k_mean,"
            "div_at_k_var,acc_at_k_mean,acc_at_k_var");
  EXPECT_TRUE(fs::exists(config_.out / "metrics" / "random__seed3.csv"));
}

TEST_F(CliTest, EvaluateWithFullKeepHasZeroFidelity) {
  standard_inputs();
  config_.command = "evaluate";
  config_.metric.t = 1.0;
  config_.seeds = {0};
  ASSERT_EQ(cli::run(config_, log_), 0);
  auto j = read_json(config_.out / "metrics" / "syntaxshap__seed0.json");
  for (const auto& s : j["sentences"]) EXPECT_EQ(s["fid"].get<double>(), 0.0);
}

TEST_F(CliTest, EvaluateFromExplanationsAndMissingIds) {
  standard_inputs();
  config_.command = "explain";
  config_.seeds = {0};
  config_.methods = {Method::kSyntaxShap};
  ASSERT_EQ(cli::run(config_, log_), 0);
  auto inline_out = dir_ / "inline";

  cli::RunConfig eval = config_;
  eval.command = "evaluate";
  eval.explanations = config_.out / "explanations";
  eval.out = dir_ / "from_files";
  ASSERT_EQ(cli::run(eval, log_), 0) << log_.str();
  eval.explanations.clear();
  eval.out = inline_out;
  ASSERT_EQ(cli::run(eval, log_), 0);
  EXPECT_EQ(read_file(dir_ / "from_files" / "metrics" / "syntaxshap__seed0.json"),
            read_file(inline_out / "metrics" / "syntaxshap__seed0.json"));

  fs::remove(config_.out / "explanations" / "s2__syntaxshap__seed0.json");
  eval.explanations = config_.out / "explanations";
  eval.out = dir_ / "missing";
  std::ostringstream log;
  EXPECT_EQ(cli::run(eval, log), 1);
  EXPECT_NE(log.str().find("s2"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir_ / "missing" / "evaluate_summary.json"));
}

TEST_F(CliTest, EvaluateEmptyDatasetWritesNothing) {
  config_.command = "evaluate";
  config_.conllu = write("empty.conllu", "");
  EXPECT_EQ(cli::run(config_, log_), 1);
  EXPECT_FALSE(fs::exists(config_.out / "evaluate_summary.json"));
}

TEST_F(CliTest, PairsGroupsAndMalformedLines) {
  standard_inputs();
  config_.command = "pairs";
  config_.methods = {Method::kSyntaxShap};
  config_.seeds = {0};
  config_.pairs = write("pairs.jsonl",
                        "{\"id\": \"p1\", \"sentence_a\": \"A mom is a\", \"sentence_b\": "
                        "\"the cat sat down\"}\n"
                        "not json\n"
                        "{\"id\": \"p2\", \"sentence_a\": \"dogs are not cats\", \"sentence_b\": "
                        "\"A mom is a\", \"negation_token\": \"not\"}\n"
                        "{\"id\": \"p3\"}\n");
  ASSERT_EQ(cli::run(config_, log_), 0) << log_.str();
  auto j = read_json(config_.out / "coherency.json");
  EXPECT_EQ(j["malformed"], 2);
  EXPECT_EQ(j["usable"], 2);
  const auto& r = j["reports"][0];
  EXPECT_EQ(r["n_equal"].get<int>() + r["n_different"].get<int>() + r["skipped"].size(), 2u);
}

TEST_F(CliTest, PairsAllEqualHasNoDifference) {
  standard_inputs();
  config_.command = "pairs";
  config_.methods = {Method::kSyntaxShap};
  config_.seeds = {0};
  config_.pairs = write("pairs.jsonl",
                        "{\"id\": \"p1\", \"sentence_a\": \"A mom is a\", \"sentence_b\": "
                        "\"A mom is a\"}\n");
  ASSERT_EQ(cli::run(config_, log_), 0);
  auto j = read_json(config_.out / "coherency.json");
  const auto& r = j["reports"][0];
  EXPECT_EQ(r["n_equal"], 1);
  EXPECT_TRUE(r["difference"].is_null());
  EXPECT_DOUBLE_EQ(r["mean_equal"].get<double>(), 1.0);
}

TEST_F(CliTest, AlignFiveRecords) {
  std::string doc, lines;
  for (int k = 0; k < 5; ++k) {
    auto id = "n" + std::to_string(k);
    std::vector<std::string> ws = {"birds", "do", "not", "swim" + std::to_string(k)};
    doc += conllu_block(id, ws, {4, 4, 4, 0});
    lines += "{\"id\": \"" + id + "\", \"sentence\": \"birds do not swim" + std::to_string(k) +
             "\", \"negation_token\": \"not\"}\n";
  }
  config_.conllu = write("neg.conllu", doc);
  config_.pairs = write("align.jsonl", lines);
  config_.command = "align";
  config_.methods = {Method::kSyntaxShap};
  config_.seeds = {0};
  ASSERT_EQ(cli::run(config_, log_), 0) << log_.str();
  auto j = read_json(config_.out / "alignment.json");
  const auto& r = j["reports"][0];
  EXPECT_EQ(r["n"], 5);
  std::size_t total = 0;
  for (const auto& [rank, count] : r["rank_counts"].items()) total += count.get<std::size_t>();
  EXPECT_EQ(total, 5u);
}

TEST_F(CliTest, CountsTable) {
  config_.conllu = write("counts.conllu", conllu_block("chain", words(10), chain_heads(10)) +
                                              conllu_block("rc", {"a", "b", "c"}, {0, 1, 1}) +
                                              conllu_block("one", {"a"}, {0}));
  config_.command = "counts";
  ASSERT_EQ(cli::run(config_, log_), 0);
  auto j = read_json(config_.out / "counts.json")["sentences"];
  ASSERT_EQ(j.size(), 3u);
  EXPECT_EQ(j[0]["pair_count"], 55);
  EXPECT_EQ(j[0]["naive_shapley_count"], 5120);
  EXPECT_EQ(j[0]["observed_pairs"], 55);
  // Prefixes {x1..xk} plus every prefix joined by one later word: 11 + 45.
  EXPECT_EQ(j[0]["observed_unique"], 56);
  EXPECT_EQ(j[1]["pair_count"], 7);
  EXPECT_EQ(j[1]["naive_shapley_count"], 12);
  EXPECT_EQ(j[1]["n_l"], json::array({1, 2}));
  EXPECT_EQ(j[2]["pair_count"], 1);
  EXPECT_EQ(j[2]["naive_shapley_count"], 1);
}

TEST_F(CliTest, ValidationErrors) {
  config_.command = "explain";
  config_.seeds.clear();
  EXPECT_THROW(cli::run(config_, log_), std::invalid_argument);
  config_.seeds = {0};
  config_.conllu = dir_ / "nope.conllu";
  EXPECT_THROW(cli::run(config_, log_), std::invalid_argument);
  config_.conllu.clear();
  config_.oracle = "ftp://x";
  EXPECT_THROW(cli::make_oracle(config_), std::invalid_argument);
}

TEST_F(CliTest, BinaryWithConfigFileAndFlagOverride) {
  config_.conllu = write("one.conllu", conllu_block("s1", {"A", "mom", "is", "a"}, {2, 0, 2, 3}));
  auto out = dir_ / "bin_out";
  auto cfg = write("run.toml", "conllu = \"" + config_.conllu.string() +
                                   "\"\nseeds = [\"0\", \"1\"]\nmethods = [\"syntaxshap\"]\n"
                                   "out = \"" + (dir_ / "ignored").string() + "\"\n");
  std::string cmd = std::string(SYNTAXSHAP_CLI_PATH) + " explain --config " + cfg.string() +
                    " --out " + out.string() + " 2>/dev/null";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_EQ(count_files(out / "explanations"), 2u);
  EXPECT_FALSE(fs::exists(dir_ / "ignored"));
  std::string bad = std::string(SYNTAXSHAP_CLI_PATH) + " explain --methods nope --conllu " +
                    config_.conllu.string() + " 2>/dev/null";
  EXPECT_NE(std::system(bad.c_str()), 0);
}
