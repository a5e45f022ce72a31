#include "syntaxshap/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "syntaxshap/coalition.hpp"
#include "syntaxshap/report.hpp"

namespace syntaxshap::cli {

using nlohmann::json;
using nlohmann::ordered_json;

void RunConfig::validate() const {
  if (seeds.empty()) throw std::invalid_argument("at least one seed is required");
  if (methods.empty()) throw std::invalid_argument("at least one method is required");
  if (workers == 0) throw std::invalid_argument("workers must be at least 1");
  if (filter.max_tokens < filter.min_tokens) {
    throw std::invalid_argument("max-tokens is below min-tokens");
  }
  metric.validate();
  for (const auto* p : {&dataset, &conllu, &pairs, &explanations}) {
    if (!p->empty() && !std::filesystem::exists(*p)) {
      throw std::invalid_argument("path does not exist: " + p->string());
    }
  }
}

std::string explanation_file_name(const std::string& id, Method method, std::uint64_t seed) {
  std::string safe;
  for (char c : id) {
    bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    safe += ok ? c : '_';
  }
  if (safe.empty()) safe = "_";
  return safe + "__" + std::string(to_string(method)) + "__seed" + std::to_string(seed) +
         ".json";
}

namespace {

// Runs fn(i) for i in [0, n) on up to `workers` threads.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : threads) t.join();
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::vector<SentenceParse> load_parses(const RunConfig& config) {
  if (config.conllu.empty()) throw std::invalid_argument("--conllu is required");
  return read_conllu(read_file(config.conllu));
}

std::vector<DatasetRecord> load_records(const RunConfig& config) {
  if (config.dataset.empty()) return {};
  return read_dataset_jsonl(config.dataset);
}

// JSONL objects, one per non-blank line; malformed lines are reported via
// `bad` instead of thrown when it is non-null.
std::vector<json> read_jsonl(const std::filesystem::path& path, std::size_t* bad) {
  std::istringstream in(read_file(path));
  std::vector<json> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = json::parse(line);
      if (!j.is_object()) throw std::runtime_error("not an object");
      out.push_back(std::move(j));
    } catch (const std::exception& e) {
      if (bad == nullptr) {
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " +
                                 e.what());
      }
      ++*bad;
    }
  }
  return out;
}

std::string string_field(const json& j, const char* name) {
  if (!j.contains(name) || !j.at(name).is_string()) {
    throw std::runtime_error(std::string("missing string field '") + name + "'");
  }
  return j.at(name).get<std::string>();
}

TokenizedTree tokenize_tree(const DependencyTree& tree, const ValueOracle& oracle) {
  if (auto spans = misc_token_spans(tree)) return expand_subtokens(tree, *spans);
  std::vector<std::string> words;
  for (const auto& n : tree.nodes()) words.push_back(n.text);
  auto pieces = oracle.tokenize(words);
  if (pieces.size() != words.size()) {
    throw AlignmentError("tokenizer returned " + std::to_string(pieces.size()) +
                         " entries for " + std::to_string(words.size()) + " words");
  }
  std::vector<TokenSpan> spans;
  for (std::size_t w = 0; w < pieces.size(); ++w) {
    for (auto& tok : pieces[w]) spans.push_back({tok, static_cast<int>(w + 1)});
  }
  return expand_subtokens(tree, spans);
}

// Token positions of words equal (case-insensitively) to any of `words`.
std::vector<std::size_t> positions_of(const TokenizedTree& tree,
                                      const std::vector<std::string>& words) {
  std::vector<std::size_t> out;
  for (const auto& n : tree.tree().nodes()) {
    const auto form = lower(n.text);
    if (std::find(words.begin(), words.end(), form) == words.end()) continue;
    auto [first, last] = tree.token_range(n.word_index);
    for (auto t = first; t < last; ++t) out.push_back(t);
  }
  return out;
}

ordered_json rejection_json(const Rejection& r) {
  ordered_json j;
  j["id"] = r.id;
  j["reason"] = r.reason;
  if (!r.detail.empty()) j["detail"] = r.detail;
  return j;
}

ExplainOptions options_for(const RunConfig& config, std::uint64_t seed) {
  return {config.metric.strategy, seed};
}

struct Explained {
  std::vector<ExplainedSentence> by_method_seed;  // methods x seeds, row-major
  std::optional<std::string> error;
};

// All (method, seed) explanations for one sentence, sharing one cache.
Explained explain_sentence(const PreparedSentence& s, const RunConfig& config,
                           const OraclePtr& oracle) {
  Explained out;
  try {
    auto memo = memoized(oracle);
    const auto tokens = s.tree.tokens();
    for (auto method : config.methods) {
      for (auto seed : config.seeds) {
        const auto options = options_for(config, seed);
        const TokenId target = predict_next_token(*memo, tokens, options.strategy, seed);
        out.by_method_seed.push_back({s.id, tokens, explain(method, s.tree, *memo, target, options)});
      }
    }
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

double population_variance(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return var / static_cast<double>(xs.size());
}

double mean_of(const std::vector<double>& xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

}  // namespace

std::vector<DatasetRecord> read_dataset_jsonl(const std::filesystem::path& path) {
  std::vector<DatasetRecord> out;
  std::size_t line = 0;
  for (const auto& j : read_jsonl(path, nullptr)) {
    ++line;
    try {
      out.push_back({string_field(j, "id"), string_field(j, "sentence")});
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ": record " + std::to_string(line) + ": " +
                               e.what());
    }
  }
  return out;
}

PreparedDataset prepare_dataset(const std::vector<DatasetRecord>& records,
                                const std::vector<SentenceParse>& parses,
                                const ValueOracle& oracle, const FilterConfig& filter) {
  std::unordered_map<std::string, std::size_t> by_id, by_text;
  for (std::size_t k = 0; k < parses.size(); ++k) {
    if (auto id = parses[k].comment_value("sent_id")) by_id.emplace(*id, k);
    by_text.emplace(parses[k].text(), k);
  }
  std::vector<DatasetRecord> all = records;
  if (all.empty()) {
    for (std::size_t k = 0; k < parses.size(); ++k) {
      auto id = parses[k].comment_value("sent_id").value_or("s" + std::to_string(k + 1));
      all.push_back({id, parses[k].text()});
    }
  }

  PreparedDataset out;
  for (const auto& r : all) {
    SentenceRecord sr{r.id, r.sentence, 0, false};
    auto reject = [&](std::string reason, std::string detail = {}) {
      out.rejected.push_back({r.id, std::move(reason), std::move(detail)});
    };
    if (r.sentence.find_first_of(filter.punctuation) != std::string::npos) {
      reject("punctuation");
      continue;
    }
    const SentenceParse* parse = nullptr;
    if (auto it = by_id.find(r.id); it != by_id.end()) {
      parse = &parses[it->second];
    } else if (auto jt = by_text.find(r.sentence); jt != by_text.end()) {
      parse = &parses[jt->second];
    }
    if (parse == nullptr) {
      reject("missing_parse");
      continue;
    }
    if (!parse->tree) {
      bool multi = *parse->issue == StructureIssue::kMultipleRoots ||
                   *parse->issue == StructureIssue::kNoRoot;
      reject(multi ? "multi_span" : "invalid_tree", parse->message);
      continue;
    }
    std::optional<TokenizedTree> tokenized;
    try {
      tokenized.emplace(tokenize_tree(*parse->tree, oracle));
    } catch (const std::exception& e) {
      reject("tokenization", e.what());
      continue;
    }
    sr.token_count = tokenized->size();
    if (auto reason = rejection_reason(sr, filter)) {
      reject(*reason, std::to_string(sr.token_count) + " tokens");
      continue;
    }
    try {
      LevelLayout layout(*tokenized);
      for (int l = 1; l <= layout.depth(); ++l) count_updates(layout, l);
    } catch (const SizeError& e) {
      reject("too_wide", e.what());
      continue;
    }
    out.kept.push_back({r.id, r.sentence, std::move(*tokenized)});
  }
  return out;
}

OraclePtr make_oracle(const RunConfig& config) {
  if (config.oracle == "toy") return toy_hash_lm(config.toy_seed, config.toy_vocab);
  if (config.oracle.starts_with("http://")) {
    RemoteOptions options;
    options.timeout = std::chrono::milliseconds(config.timeout_ms);
    options.retries = config.retries;
    if (const char* token = std::getenv(kAuthTokenEnv)) options.auth_token = token;
    return remote_oracle(config.oracle, options);
  }
  throw std::invalid_argument("--oracle must be 'toy' or an http:// URL, got '" +
                              config.oracle + "'");
}

// --- explain ---------------------------------------------------------------

int cmd_explain(const RunConfig& config, std::ostream& log) {
  auto oracle = make_oracle(config);
  auto prepared = prepare_dataset(load_records(config), load_parses(config), *oracle,
                                  config.filter);
  const std::size_t total = prepared.kept.size() + prepared.rejected.size();
  if (total == 0) {
    log << "error: no input sentences\n";
    return 1;
  }

  std::vector<Explained> explained(prepared.kept.size());
  parallel_for(prepared.kept.size(), config.workers, [&](std::size_t i) {
    explained[i] = explain_sentence(prepared.kept[i], config, oracle);
  });

  const auto dir = config.out / "explanations";
  std::filesystem::create_directories(dir);
  std::vector<Rejection> rejects = prepared.rejected;
  std::size_t files = 0, ok = 0;
  for (std::size_t i = 0; i < explained.size(); ++i) {
    const auto& s = prepared.kept[i];
    if (explained[i].error) {
      rejects.push_back({s.id, "attribution_failed", *explained[i].error});
      continue;
    }
    ++ok;
    for (const auto& e : explained[i].by_method_seed) {
      write_file(dir / explanation_file_name(s.id, e.result.method, e.result.seed),
                 dump_json(explanation_json(s.id, e.tokens, e.result)) + "\n");
      ++files;
    }
  }

  std::string rejects_text;
  for (const auto& r : rejects) rejects_text += dump_json(rejection_json(r), 0) + "\n";
  write_file(config.out / "rejects.jsonl", rejects_text);

  std::map<std::string, std::size_t> by_reason;
  for (const auto& r : rejects) ++by_reason[r.reason];
  ordered_json summary;
  summary["sentences"] = total;
  summary["explained"] = ok;
  summary["rejected"] = rejects.size();
  summary["rejected_by_reason"] = by_reason;
  summary["files"] = files;
  summary["oracle"] = oracle->metadata().model;
  write_file(config.out / "summary.json", dump_json(summary) + "\n");

  log << "explained " << ok << " of " << total << " sentences (" << files << " files, "
      << rejects.size() << " rejected)\n";
  return ok > 0 ? 0 : 1;
}

// --- evaluate --------------------------------------------------------------

int cmd_evaluate(const RunConfig& config, std::ostream& log) {
  auto oracle = make_oracle(config);
  auto prepared = prepare_dataset(load_records(config), load_parses(config), *oracle,
                                  config.filter);
  if (prepared.kept.empty()) {
    log << "error: empty dataset after filtering (" << prepared.rejected.size()
        << " rejected); no report written\n";
    return 1;
  }
  const auto& kept = prepared.kept;
  const std::size_t n_methods = config.methods.size();
  const std::size_t n_seeds = config.seeds.size();

  // explanations[m * n_seeds + s][sentence]
  std::vector<std::vector<std::optional<ExplainedSentence>>> explanations(
      n_methods * n_seeds, std::vector<std::optional<ExplainedSentence>>(kept.size()));
  std::vector<std::string> failures;
  if (!config.explanations.empty()) {
    std::set<std::string> missing;
    for (std::size_t m = 0; m < n_methods; ++m) {
      for (std::size_t s = 0; s < n_seeds; ++s) {
        for (std::size_t i = 0; i < kept.size(); ++i) {
          auto path = config.explanations /
                      explanation_file_name(kept[i].id, config.methods[m], config.seeds[s]);
          if (!std::filesystem::exists(path)) {
            missing.insert(kept[i].id);
            continue;
          }
          explanations[m * n_seeds + s][i] = explanation_from_json(json::parse(read_file(path)));
        }
      }
    }
    if (!missing.empty()) {
      log << "error: missing explanations for " << missing.size() << " sentence(s):";
      for (const auto& id : missing) log << ' ' << id;
      log << "\n";
      return 1;
    }
  } else {
    std::vector<Explained> explained(kept.size());
    parallel_for(kept.size(), config.workers, [&](std::size_t i) {
      explained[i] = explain_sentence(kept[i], config, oracle);
    });
    for (std::size_t i = 0; i < kept.size(); ++i) {
      if (explained[i].error) {
        failures.push_back(kept[i].id + ": " + *explained[i].error);
        continue;
      }
      for (std::size_t k = 0; k < explained[i].by_method_seed.size(); ++k) {
        explanations[k][i] = std::move(explained[i].by_method_seed[k]);
      }
    }
  }

  // Per-sentence descriptors for the token-count and dependency-distance views.
  std::unordered_map<std::string, std::pair<std::size_t, std::optional<double>>> shape;
  for (const auto& s : kept) {
    std::optional<double> add;
    if (s.tree.tree().size() >= 2) add = avg_dependency_distance(s.tree.tree());
    shape[s.id] = {s.tree.size(), add};
  }

  const auto metrics_dir = config.out / "metrics";
  ordered_json summary;
  summary["config"] = {{"t", config.metric.t},
                       {"k", config.metric.k},
                       {"strategy", std::string(to_string(config.metric.strategy))},
                       {"seeds", config.seeds}};
  summary["sentences"] = kept.size();
  summary["rejected"] = prepared.rejected.size();
  summary["failed"] = failures;
  ordered_json methods_json = ordered_json::array();
  std::ostringstream csv;
  csv << "method,n_seeds,fid_mean,fid_var,fid_rand_mean,fid_rand_var,div_at_k_mean,"
         "div_at_k_var,acc_at_k_mean,acc_at_k_var\n";

  for (std::size_t m = 0; m < n_methods; ++m) {
    std::vector<double> fid, fid_rand, div, acc;
    for (std::size_t s = 0; s < n_seeds; ++s) {
      std::vector<ExplainedSentence> records;
      for (auto& e : explanations[m * n_seeds + s]) {
        if (e) records.push_back(*e);
      }
      MetricConfig mc = config.metric;
      mc.seed = config.seeds[s];
      std::vector<MetricReport> parts(records.size());
      parallel_for(records.size(), config.workers, [&](std::size_t i) {
        parts[i] = evaluate_metrics(std::span(&records[i], 1), *oracle, mc);
      });
      MetricReport report;
      report.config = mc;
      for (auto& p : parts) {
        report.sentences.insert(report.sentences.end(), p.sentences.begin(), p.sentences.end());
        report.skipped.insert(report.skipped.end(), p.skipped.begin(), p.skipped.end());
      }
      report.n = report.sentences.size();
      for (const auto& r : report.sentences) {
        report.fid += r.fid;
        report.fid_rand += r.fid_rand;
        report.div_at_k += r.div_at_k;
        report.acc_at_k += r.acc_at_k;
      }
      if (report.n > 0) {
        const auto n = static_cast<double>(report.n);
        report.fid /= n;
        report.fid_rand /= n;
        report.div_at_k /= n;
        report.acc_at_k /= n;
      }
      fid.push_back(report.fid);
      fid_rand.push_back(report.fid_rand);
      div.push_back(report.div_at_k);
      acc.push_back(report.acc_at_k);

      auto j = metric_report_json(report);
      j["method"] = std::string(to_string(config.methods[m]));
      // Means of div@K grouped by token count and by dependency distance
      // (rounded to the nearest 0.5).
      std::map<std::size_t, std::pair<double, std::size_t>> by_count;
      std::map<double, std::pair<double, std::size_t>> by_add;
      for (const auto& r : report.sentences) {
        const auto& [count, add] = shape.at(r.id);
        auto& c = by_count[count];
        c.first += r.div_at_k;
        ++c.second;
        if (add) {
          auto& a = by_add[std::round(*add * 2.0) / 2.0];
          a.first += r.div_at_k;
          ++a.second;
        }
      }
      ordered_json jc = ordered_json::object(), ja = ordered_json::object();
      for (const auto& [count, v] : by_count) {
        jc[std::to_string(count)] = {{"n", v.second},
                                     {"div_at_k", v.first / static_cast<double>(v.second)}};
      }
      for (const auto& [add, v] : by_add) {
        ja[format_double(add)] = {{"n", v.second},
                                  {"div_at_k", v.first / static_cast<double>(v.second)}};
      }
      j["div_at_k_by_token_count"] = std::move(jc);
      j["div_at_k_by_dependency_distance"] = std::move(ja);

      const auto stem = std::string(to_string(config.methods[m])) + "__seed" +
                        std::to_string(config.seeds[s]);
      write_file(metrics_dir / (stem + ".json"), dump_json(j) + "\n");
      write_file(metrics_dir / (stem + ".csv"), metric_report_csv(report));
    }

    ordered_json mj;
    mj["method"] = std::string(to_string(config.methods[m]));
    mj["n_seeds"] = n_seeds;
    for (auto [name, xs] : {std::pair{"fid", &fid}, std::pair{"fid_rand", &fid_rand},
                            std::pair{"div_at_k", &div}, std::pair{"acc_at_k", &acc}}) {
      mj[name] = {{"mean", mean_of(*xs)}, {"variance", population_variance(*xs)},
                  {"per_seed", *xs}};
    }
    methods_json.push_back(std::move(mj));
    csv << to_string(config.methods[m]) << ',' << n_seeds;
    for (const auto* xs : {&fid, &fid_rand, &div, &acc}) {
      csv << ',' << format_double(mean_of(*xs)) << ',' << format_double(population_variance(*xs));
    }
    csv << '\n';
  }
  summary["methods"] = std::move(methods_json);
  write_file(config.out / "evaluate_summary.json", dump_json(summary) + "\n");
  write_file(config.out / "evaluate_summary.csv", csv.str());
  log << "evaluated " << kept.size() << " sentences x " << n_methods << " methods x " << n_seeds
      << " seeds\n";
  return 0;
}

// --- pairs / align -----------------------------------------------------------

namespace {

struct PreparedPair {
  std::string id;
  PreparedSentence a;
  PreparedSentence b;
  std::vector<std::string> negation;
};

const std::vector<std::string> kNegationWords = {"not", "no", "without"};

std::vector<std::string> negation_words(const json& j) {
  if (j.contains("negation_token") && j.at("negation_token").is_string()) {
    return {lower(j.at("negation_token").get<std::string>())};
  }
  return kNegationWords;
}

ordered_json skipped_json(const std::vector<Rejection>& skipped) {
  ordered_json out = ordered_json::array();
  for (const auto& r : skipped) out.push_back(rejection_json(r));
  return out;
}

}  // namespace

int cmd_pairs(const RunConfig& config, std::ostream& log) {
  if (config.pairs.empty()) throw std::invalid_argument("--pairs is required");
  auto oracle = make_oracle(config);
  auto parses = load_parses(config);
  std::size_t malformed = 0;
  auto lines = read_jsonl(config.pairs, &malformed);

  std::vector<PreparedPair> pairs;
  std::vector<Rejection> skipped;
  for (const auto& j : lines) {
    std::string id, sa, sb;
    try {
      id = string_field(j, "id");
      sa = string_field(j, "sentence_a");
      sb = string_field(j, "sentence_b");
    } catch (const std::exception&) {
      ++malformed;
      continue;
    }
    auto prepared = prepare_dataset({{id + "/a", sa}, {id + "/b", sb}}, parses, *oracle,
                                    config.filter);
    if (prepared.kept.size() != 2) {
      for (const auto& r : prepared.rejected) skipped.push_back(r);
      continue;
    }
    pairs.push_back({id, std::move(prepared.kept[0]), std::move(prepared.kept[1]),
                     negation_words(j)});
  }

  ordered_json reports = ordered_json::array();
  std::ostringstream csv;
  csv << "method,seed,mean_equal,mean_different,difference,n_equal,n_different\n";
  for (auto method : config.methods) {
    for (auto seed : config.seeds) {
      std::vector<std::optional<SentencePair>> built(pairs.size());
      std::vector<std::string> errors(pairs.size());
      parallel_for(pairs.size(), config.workers, [&](std::size_t i) {
        const auto& p = pairs[i];
        try {
          auto memo = memoized(oracle);
          const auto options = options_for(config, seed);
          const auto ta = p.a.tree.tokens();
          const auto tb = p.b.tree.tokens();
          const auto target_a = predict_next_token(*memo, ta, options.strategy, seed);
          const auto target_b = predict_next_token(*memo, tb, options.strategy, seed);
          auto ra = explain(method, p.a.tree, *memo, target_a, options);
          auto rb = explain(method, p.b.tree, *memo, target_b, options);
          built[i] = SentencePair{p.id, target_a == target_b,
                                  ranks_excluding(ra.values, positions_of(p.a.tree, p.negation)),
                                  ranks_excluding(rb.values, positions_of(p.b.tree, p.negation))};
        } catch (const std::exception& e) {
          errors[i] = e.what();
        }
      });
      std::vector<SentencePair> ready;
      ordered_json failed = ordered_json::array();
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (built[i]) {
          ready.push_back(std::move(*built[i]));
        } else {
          failed.push_back({{"id", pairs[i].id}, {"error", errors[i]}});
        }
      }
      auto report = coherency(ready);
      for (const auto& id : report.skipped) {
        log << "warning: pair " << id << " has unequal lengths after exclusion; skipped\n";
      }
      ordered_json j;
      j["method"] = std::string(to_string(method));
      j["seed"] = seed;
      auto body = coherency_json(report);
      for (auto it = body.begin(); it != body.end(); ++it) j[it.key()] = it.value();
      j["failed"] = std::move(failed);
      reports.push_back(std::move(j));
      auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : ""; };
      csv << to_string(method) << ',' << seed << ',' << opt(report.mean_equal) << ','
          << opt(report.mean_different) << ',' << opt(report.difference) << ','
          << report.n_equal << ',' << report.n_different << '\n';
    }
  }

  ordered_json out;
  out["pairs"] = lines.size() + malformed;
  out["malformed"] = malformed;
  out["usable"] = pairs.size();
  out["skipped"] = skipped_json(skipped);
  out["reports"] = std::move(reports);
  write_file(config.out / "coherency.json", dump_json(out) + "\n");
  write_file(config.out / "coherency.csv", csv.str());
  log << "coherency over " << pairs.size() << " pairs (" << malformed << " malformed, "
      << skipped.size() << " sentences rejected)\n";
  return 0;
}

int cmd_align(const RunConfig& config, std::ostream& log) {
  if (config.pairs.empty()) throw std::invalid_argument("--pairs is required");
  auto oracle = make_oracle(config);
  auto parses = load_parses(config);
  std::size_t malformed = 0;
  auto lines = read_jsonl(config.pairs, &malformed);

  struct Item {
    PreparedSentence sentence;
    std::vector<std::string> negation;
  };
  std::vector<Item> items;
  std::vector<Rejection> skipped;
  std::size_t unlabeled = 0;
  for (const auto& j : lines) {
    std::string id, sentence;
    try {
      id = string_field(j, "id");
      sentence = string_field(j, "sentence");
    } catch (const std::exception&) {
      ++malformed;
      continue;
    }
    if (j.contains("ignored") && j.at("ignored").is_boolean() && !j.at("ignored").get<bool>()) {
      ++unlabeled;
      continue;
    }
    auto prepared = prepare_dataset({{id, sentence}}, parses, *oracle, config.filter);
    if (prepared.kept.empty()) {
      skipped.insert(skipped.end(), prepared.rejected.begin(), prepared.rejected.end());
      continue;
    }
    items.push_back({std::move(prepared.kept[0]), negation_words(j)});
  }

  ordered_json reports = ordered_json::array();
  for (auto method : config.methods) {
    for (auto seed : config.seeds) {
      std::vector<AlignmentRecord> records(items.size());
      std::vector<std::string> errors(items.size());
      parallel_for(items.size(), config.workers, [&](std::size_t i) {
        const auto& item = items[i];
        records[i].id = item.sentence.id;
        try {
          auto memo = memoized(oracle);
          const auto options = options_for(config, seed);
          const auto tokens = item.sentence.tree.tokens();
          const auto target = predict_next_token(*memo, tokens, options.strategy, seed);
          auto result = explain(method, item.sentence.tree, *memo, target, options);
          records[i].ranks = result.ranks;
          auto pos = positions_of(item.sentence.tree, item.negation);
          if (!pos.empty()) records[i].negation_index = pos.front();
        } catch (const std::exception& e) {
          errors[i] = e.what();
        }
      });
      ordered_json failed = ordered_json::array();
      std::vector<AlignmentRecord> usable;
      for (std::size_t i = 0; i < items.size(); ++i) {
        if (errors[i].empty()) {
          usable.push_back(std::move(records[i]));
        } else {
          failed.push_back({{"id", items[i].sentence.id}, {"error", errors[i]}});
        }
      }
      ordered_json j;
      j["method"] = std::string(to_string(method));
      j["seed"] = seed;
      auto body = alignment_json(semantic_alignment(usable));
      for (auto it = body.begin(); it != body.end(); ++it) j[it.key()] = it.value();
      j["failed"] = std::move(failed);
      reports.push_back(std::move(j));
    }
  }
  ordered_json out;
  out["records"] = lines.size() + malformed;
  out["malformed"] = malformed;
  out["unlabeled"] = unlabeled;
  out["usable"] = items.size();
  out["skipped"] = skipped_json(skipped);
  out["reports"] = std::move(reports);
  write_file(config.out / "alignment.json", dump_json(out) + "\n");
  log << "alignment over " << items.size() << " records (" << malformed << " malformed)\n";
  return 0;
}

// --- counts ------------------------------------------------------------------

int cmd_counts(const RunConfig& config, std::ostream& log) {
  auto oracle = make_oracle(config);
  auto prepared = prepare_dataset(load_records(config), load_parses(config), *oracle,
                                  config.filter);
  const auto seed = config.seeds.front();
  struct Row {
    LevelLayout layout;
    PredictedEvaluations predicted;
    std::optional<OracleCalls> observed;
    std::string error;
  };
  std::vector<std::optional<Row>> rows(prepared.kept.size());
  parallel_for(prepared.kept.size(), config.workers, [&](std::size_t i) {
    const auto& s = prepared.kept[i];
    Row row{LevelLayout(s.tree), {}, std::nullopt, {}};
    row.predicted = predicted_evaluations(row.layout);
    try {
      const auto tokens = s.tree.tokens();
      const auto options = options_for(config, seed);
      const auto target = predict_next_token(*oracle, tokens, options.strategy, seed);
      row.observed = syntaxshap(s.tree, *oracle, target, options).oracle_calls;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows[i] = std::move(row);
  });

  ordered_json table = ordered_json::array();
  std::ostringstream csv;
  csv << "id,n,L,n_l,pair_count,naive_shapley_count,observed_pairs,observed_unique\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = *rows[i];
    const auto n = row.layout.size();
    std::vector<std::size_t> widths;
    for (int l = 1; l <= row.layout.depth(); ++l) widths.push_back(row.layout.width(l));
    ordered_json j;
    j["id"] = prepared.kept[i].id;
    j["n"] = n;
    j["L"] = row.layout.depth();
    j["n_l"] = widths;
    j["pair_count"] = row.predicted.pair_count;
    // n 2^{n-1} fits an unsigned 64-bit integer up to n = 58.
    if (n <= 58) {
      j["naive_shapley_count"] = static_cast<std::uint64_t>(row.predicted.naive_shapley_count);
    } else {
      j["naive_shapley_count"] = row.predicted.naive_shapley_count;
    }
    if (row.observed) {
      j["observed_pairs"] = row.observed->pairs;
      j["observed_unique"] = row.observed->unique;
    } else {
      j["observed_pairs"] = nullptr;
      j["observed_unique"] = nullptr;
      j["error"] = row.error;
    }
    std::string widths_text;
    for (auto w : widths) widths_text += (widths_text.empty() ? "" : " ") + std::to_string(w);
    csv << prepared.kept[i].id << ',' << n << ',' << row.layout.depth() << ',' << widths_text
        << ',' << row.predicted.pair_count << ',' << j["naive_shapley_count"].dump() << ','
        << (row.observed ? std::to_string(row.observed->pairs) : "") << ','
        << (row.observed ? std::to_string(row.observed->unique) : "") << '\n';
    table.push_back(std::move(j));
  }
  ordered_json out;
  out["sentences"] = std::move(table);
  ordered_json rejected = ordered_json::array();
  for (const auto& r : prepared.rejected) rejected.push_back(rejection_json(r));
  out["rejected"] = std::move(rejected);
  write_file(config.out / "counts.json", dump_json(out) + "\n");
  write_file(config.out / "counts.csv", csv.str());
  log << "counted " << rows.size() << " sentences\n";
  return 0;
}

int run(const RunConfig& config, std::ostream& log) {
  config.validate();
  if (config.command == "explain") return cmd_explain(config, log);
  if (config.command == "evaluate") return cmd_evaluate(config, log);
  if (config.command == "pairs") return cmd_pairs(config, log);
  if (config.command == "align") return cmd_align(config, log);
  if (config.command == "counts") return cmd_counts(config, log);
  throw std::invalid_argument("unknown command '" + config.command + "'");
}

}  // namespace syntaxshap::cli
