#include "syntaxshap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace syntaxshap {

void MetricConfig::validate() const {
  if (!(t > 0.0 && t <= 1.0)) {
    throw std::invalid_argument("t must lie in (0, 1], got " + std::to_string(t));
  }
  if (k < 1) throw std::invalid_argument("K must be at least 1");
}

std::size_t keep_count(std::size_t n, double t) {
  auto kept = static_cast<std::size_t>(std::ceil(t * static_cast<double>(n) - 1e-9));
  return std::clamp<std::size_t>(kept, 1, n);
}

MaskedSentence top_tokens(std::span<const Token> tokens, const AttributionResult& result,
                          double t) {
  if (result.ranks.size() != tokens.size()) {
    throw std::invalid_argument("rank vector does not match the token count");
  }
  const auto kept = keep_count(tokens.size(), t);
  MaskedSentence out;
  out.tokens.assign(tokens.begin(), tokens.end());
  out.keep.resize(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    out.keep[i] = static_cast<std::size_t>(result.ranks[i]) <= kept;
  }
  return out;
}

namespace {

struct RecordScores {
  double fid = 0.0;
  double div = 0.0;
  double acc = 0.0;
};

RecordScores score_record(const ExplainedSentence& record, const ValueOracle& oracle,
                          const MetricConfig& config, MaskStrategy strategy) {
  const TokenId target = record.result.target_token;
  ValueRequest full;
  for (const auto& t : record.tokens) full.tokens.push_back(t.id);
  full.keep.assign(record.tokens.size(), true);
  full.strategy = strategy;
  full.targets = {target};
  full.top_k = config.k;
  full.seed = config.seed;
  const auto full_response = oracle.evaluate(full);

  auto masked_sentence = top_tokens(record.tokens, record.result, config.t);
  ValueRequest masked = full;
  masked.keep = masked_sentence.keep;
  for (const auto& top : full_response.top) masked.targets.push_back(top.id);
  const auto masked_response = oracle.evaluate(masked);

  RecordScores s;
  s.fid = full_response.target_probs.at(0) - masked_response.target_probs.at(0);
  std::set<TokenId> full_ids;
  for (std::size_t k = 0; k < full_response.top.size(); ++k) {
    s.div += full_response.top[k].prob - masked_response.target_probs.at(k + 1);
    full_ids.insert(full_response.top[k].id);
  }
  std::size_t common = 0;
  for (const auto& top : masked_response.top) common += full_ids.count(top.id);
  s.acc = static_cast<double>(common) / static_cast<double>(config.k);
  return s;
}

template <typename Pick>
MetricValue average(std::span<const ExplainedSentence> records, const ValueOracle& oracle,
                    const MetricConfig& config, MaskStrategy strategy, Pick pick) {
  config.validate();
  MetricValue out;
  double sum = 0.0;
  for (const auto& r : records) {
    try {
      sum += pick(score_record(r, oracle, config, strategy));
      ++out.n;
    } catch (const std::exception& e) {
      out.skipped.push_back({r.id, e.what()});
    }
  }
  out.value = out.n == 0 ? 0.0 : sum / static_cast<double>(out.n);
  return out;
}

}  // namespace

MetricValue fidelity(std::span<const ExplainedSentence> records, const ValueOracle& oracle,
                     const MetricConfig& config) {
  return average(records, oracle, config, config.strategy,
                 [](const RecordScores& s) { return s.fid; });
}

MetricValue fidelity_random(std::span<const ExplainedSentence> records,
                            const ValueOracle& oracle, const MetricConfig& config) {
  return average(records, oracle, config, MaskStrategy::kRandomReplace,
                 [](const RecordScores& s) { return s.fid; });
}

MetricValue prob_divergence_at_k(std::span<const ExplainedSentence> records,
                                 const ValueOracle& oracle, const MetricConfig& config) {
  return average(records, oracle, config, config.strategy,
                 [](const RecordScores& s) { return s.div; });
}

MetricValue accuracy_at_k(std::span<const ExplainedSentence> records, const ValueOracle& oracle,
                          const MetricConfig& config) {
  return average(records, oracle, config, config.strategy,
                 [](const RecordScores& s) { return s.acc; });
}

MetricReport evaluate_metrics(std::span<const ExplainedSentence> records,
                              const ValueOracle& oracle, const MetricConfig& config) {
  config.validate();
  MetricReport report;
  report.config = config;
  for (const auto& r : records) {
    try {
      auto main = score_record(r, oracle, config, config.strategy);
      auto rand = score_record(r, oracle, config, MaskStrategy::kRandomReplace);
      report.sentences.push_back({r.id, main.fid, rand.fid, main.div, main.acc});
    } catch (const std::exception& e) {
      report.skipped.push_back({r.id, e.what()});
    }
  }
  report.n = report.sentences.size();
  if (report.n > 0) {
    for (const auto& s : report.sentences) {
      report.fid += s.fid;
      report.fid_rand += s.fid_rand;
      report.div_at_k += s.div_at_k;
      report.acc_at_k += s.acc_at_k;
    }
    const auto n = static_cast<double>(report.n);
    report.fid /= n;
    report.fid_rand /= n;
    report.div_at_k /= n;
    report.acc_at_k /= n;
  }
  return report;
}

// --- coherency -------------------------------------------------------------

double rank_cosine(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw std::invalid_argument("rank vectors differ in length");
  if (a.empty()) throw std::invalid_argument("empty rank vectors");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  return dot / std::sqrt(na * nb);
}

std::vector<int> ranks_excluding(std::span<const double> values,
                                 std::span<const std::size_t> excluded) {
  std::vector<double> kept;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::find(excluded.begin(), excluded.end(), i) == excluded.end()) {
      kept.push_back(values[i]);
    }
  }
  return ranks(kept);
}

CoherencyReport coherency(std::span<const SentencePair> pairs) {
  CoherencyReport report;
  double sum_equal = 0.0, sum_different = 0.0;
  for (const auto& p : pairs) {
    if (p.ranks_a.size() != p.ranks_b.size() || p.ranks_a.empty()) {
      report.skipped.push_back(p.id);
      continue;
    }
    const double c = rank_cosine(p.ranks_a, p.ranks_b);
    report.cosines.emplace_back(p.id, c);
    if (p.predictions_equal) {
      sum_equal += c;
      ++report.n_equal;
    } else {
      sum_different += c;
      ++report.n_different;
    }
  }
  if (report.n_equal > 0) report.mean_equal = sum_equal / static_cast<double>(report.n_equal);
  if (report.n_different > 0) {
    report.mean_different = sum_different / static_cast<double>(report.n_different);
  }
  if (report.mean_equal && report.mean_different) {
    report.difference = *report.mean_equal - *report.mean_different;
  }
  return report;
}

// --- semantic alignment ----------------------------------------------------

AlignmentReport semantic_alignment(std::span<const AlignmentRecord> records) {
  AlignmentReport report;
  std::size_t top = 0;
  double rank_sum = 0.0;
  for (const auto& r : records) {
    if (!r.negation_index || *r.negation_index >= r.ranks.size()) {
      report.rejected.push_back(r.id);
      continue;
    }
    const int rank = r.ranks[*r.negation_index];
    ++report.rank_counts[rank];
    ++report.n;
    rank_sum += rank;
    if (rank == 1) ++top;
  }
  if (report.n > 0) {
    report.top_rank_share = static_cast<double>(top) / static_cast<double>(report.n);
    report.mean_rank = rank_sum / static_cast<double>(report.n);
  }
  return report;
}

}  // namespace syntaxshap
