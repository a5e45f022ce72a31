#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "syntaxshap/attribution.hpp"
#include "syntaxshap/oracle.hpp"

namespace syntaxshap {

struct MetricConfig {
  double t = 0.5;       // fraction of tokens kept, in (0, 1]
  std::size_t k = 10;   // top-K size
  MaskStrategy strategy = MaskStrategy::kZeroAttention;
  std::uint64_t seed = 0;

  // Throws std::invalid_argument when t or k are out of range.
  void validate() const;
};

struct MaskedSentence {
  std::vector<Token> tokens;
  std::vector<bool> keep;
};

// Number of tokens kept at fraction t: ceil(t n), at least 1. A 1e-9 slack
// keeps products such as 0.3 * 10 from rounding up.
std::size_t keep_count(std::size_t n, double t);

// Keeps the keep_count(n, t) best-ranked tokens.
MaskedSentence top_tokens(std::span<const Token> tokens, const AttributionResult& result, double t);

// One explained sentence.
struct ExplainedSentence {
  std::string id;
  std::vector<Token> tokens;
  AttributionResult result;
};

struct SentenceMetrics {
  std::string id;
  double fid = 0.0;
  double fid_rand = 0.0;
  double div_at_k = 0.0;
  double acc_at_k = 0.0;
};

struct SkippedRecord {
  std::string id;
  std::string error;
};

struct MetricReport {
  MetricConfig config;
  std::vector<SentenceMetrics> sentences;
  std::vector<SkippedRecord> skipped;
  std::size_t n = 0;
  double fid = 0.0;
  double fid_rand = 0.0;
  double div_at_k = 0.0;
  double acc_at_k = 0.0;
};

// Per-sentence Fid, Fid_rand, div@K and acc@K and their means. Fid uses the
// configured strategy; Fid_rand always uses random replacement. Records whose
// oracle calls fail are skipped and listed.
MetricReport evaluate_metrics(std::span<const ExplainedSentence> records,
                              const ValueOracle& oracle, const MetricConfig& config);

// Mean drop in the explained token's probability after masking.
struct MetricValue {
  double value = 0.0;
  std::size_t n = 0;
  std::vector<SkippedRecord> skipped;
};

MetricValue fidelity(std::span<const ExplainedSentence> records, const ValueOracle& oracle,
                     const MetricConfig& config);
MetricValue fidelity_random(std::span<const ExplainedSentence> records,
                            const ValueOracle& oracle, const MetricConfig& config);
MetricValue prob_divergence_at_k(std::span<const ExplainedSentence> records,
                                 const ValueOracle& oracle, const MetricConfig& config);
MetricValue accuracy_at_k(std::span<const ExplainedSentence> records, const ValueOracle& oracle,
                          const MetricConfig& config);

// --- coherency -------------------------------------------------------------

// Cosine of two equal-length rank vectors, without centering.
double rank_cosine(std::span<const int> a, std::span<const int> b);

// Ranks of `values` after removing the given positions.
std::vector<int> ranks_excluding(std::span<const double> values,
                                 std::span<const std::size_t> excluded);

struct SentencePair {
  std::string id;
  bool predictions_equal = false;
  std::vector<int> ranks_a;
  std::vector<int> ranks_b;
};

struct CoherencyReport {
  std::optional<double> mean_equal;
  std::optional<double> mean_different;
  std::optional<double> difference;  // mean_equal - mean_different
  std::size_t n_equal = 0;
  std::size_t n_different = 0;
  std::vector<std::string> skipped;  // ids with mismatched lengths
  std::vector<std::pair<std::string, double>> cosines;
};

CoherencyReport coherency(std::span<const SentencePair> pairs);

// --- semantic alignment ----------------------------------------------------

struct AlignmentRecord {
  std::string id;
  std::vector<int> ranks;
  std::optional<std::size_t> negation_index;  // token position
};

struct AlignmentReport {
  std::map<int, std::size_t> rank_counts;  // rank -> records
  std::size_t n = 0;
  std::optional<double> top_rank_share;
  std::optional<double> mean_rank;
  std::vector<std::string> rejected;
};

AlignmentReport semantic_alignment(std::span<const AlignmentRecord> records);

}  // namespace syntaxshap
