#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "syntaxshap/attribution.hpp"
#include "syntaxshap/deptree.hpp"
#include "syntaxshap/metrics.hpp"
#include "syntaxshap/oracle.hpp"

namespace syntaxshap::cli {

inline constexpr const char* kAuthTokenEnv = "SYNTAXSHAP_ORACLE_TOKEN";

struct RunConfig {
  std::string command;
  std::filesystem::path dataset;       // JSONL {"id", "sentence"}
  std::filesystem::path conllu;        // parses, matched by sent_id then text
  std::filesystem::path pairs;         // JSONL pair or alignment records
  std::filesystem::path explanations;  // existing explain output for evaluate
  std::string oracle = "toy";          // "toy" or an http:// endpoint
  std::uint64_t toy_seed = 0;
  std::size_t toy_vocab = 64;
  std::vector<Method> methods = {Method::kSyntaxShap, Method::kSyntaxShapW, Method::kRandom};
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3};
  MetricConfig metric;
  FilterConfig filter;
  std::filesystem::path out = "out";
  std::size_t workers = 1;
  int timeout_ms = 30000;
  int retries = 2;

  // Throws std::invalid_argument on a bad combination of settings.
  void validate() const;
};

// A sentence that passed filtering, expanded to model tokens.
struct PreparedSentence {
  std::string id;
  std::string sentence;
  TokenizedTree tree;
};

struct PreparedDataset {
  std::vector<PreparedSentence> kept;
  std::vector<Rejection> rejected;  // includes a human-readable reason
  std::vector<std::string> messages;
};

struct DatasetRecord {
  std::string id;
  std::string sentence;
};

// JSONL reader; throws std::runtime_error naming the bad line.
std::vector<DatasetRecord> read_dataset_jsonl(const std::filesystem::path& path);

// Joins dataset records with their parses and applies the filtering rules.
// Without dataset records, every parsed block becomes a record.
PreparedDataset prepare_dataset(const std::vector<DatasetRecord>& records,
                                const std::vector<SentenceParse>& parses,
                                const ValueOracle& oracle, const FilterConfig& filter);

OraclePtr make_oracle(const RunConfig& config);

// Each command returns a process exit code and logs to `log`.
int cmd_explain(const RunConfig& config, std::ostream& log);
int cmd_evaluate(const RunConfig& config, std::ostream& log);
int cmd_pairs(const RunConfig& config, std::ostream& log);
int cmd_align(const RunConfig& config, std::ostream& log);
int cmd_counts(const RunConfig& config, std::ostream& log);

int run(const RunConfig& config, std::ostream& log);

// File name for one explanation: <id>__<method>__seed<k>.json, id sanitized.
std::string explanation_file_name(const std::string& id, Method method, std::uint64_t seed);

}  // namespace syntaxshap::cli
