#include "syntaxshap/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace syntaxshap {

using nlohmann::json;
using nlohmann::ordered_json;

std::string format_double(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

void dump(const ordered_json& j, int indent, int depth, std::string& out) {
  const std::string pad = indent > 0 ? std::string((depth + 1) * indent, ' ') : "";
  const std::string close_pad = indent > 0 ? std::string(depth * indent, ' ') : "";
  const char* nl = indent > 0 ? "\n" : "";
  const char* sep = indent > 0 ? ": " : ":";
  switch (j.type()) {
    case json::value_t::number_float:
      out += format_double(j.get<double>());
      return;
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{";
      out += nl;
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) {
          out += ",";
          out += nl;
        }
        first = false;
        out += pad;
        out += ordered_json(it.key()).dump();
        out += sep;
        dump(it.value(), indent, depth + 1, out);
      }
      out += nl;
      out += close_pad;
      out += "}";
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      // Scalar arrays stay on one line.
      bool scalar = true;
      for (const auto& v : j) scalar = scalar && !v.is_structured();
      out += "[";
      if (!scalar) out += nl;
      bool first = true;
      for (const auto& v : j) {
        if (!first) out += scalar ? ", " : std::string(",") + nl;
        first = false;
        if (!scalar) out += pad;
        dump(v, indent, depth + 1, out);
      }
      if (!scalar) {
        out += nl;
        out += close_pad;
      }
      out += "]";
      return;
    }
    default:
      out += j.dump();
  }
}

}  // namespace

std::string dump_json(const ordered_json& j, int indent) {
  std::string out;
  dump(j, indent, 0, out);
  return out;
}

ordered_json explanation_json(const std::string& id, std::span<const Token> tokens,
                              const AttributionResult& result) {
  ordered_json texts = ordered_json::array();
  ordered_json ids = ordered_json::array();
  for (const auto& t : tokens) {
    texts.push_back(t.text);
    ids.push_back(t.id);
  }
  ordered_json j;
  j["id"] = id;
  j["tokens"] = std::move(texts);
  j["token_ids"] = std::move(ids);
  j["method"] = std::string(to_string(result.method));
  j["seed"] = result.seed;
  j["target_token"] = result.target_token;
  j["values"] = result.values;
  j["ranks"] = result.ranks;
  j["oracle_calls"] = {{"pairs", result.oracle_calls.pairs},
                       {"unique", result.oracle_calls.unique}};
  return j;
}

ExplainedSentence explanation_from_json(const json& j) {
  try {
    ExplainedSentence s;
    s.id = j.at("id").get<std::string>();
    auto texts = j.at("tokens").get<std::vector<std::string>>();
    auto ids = j.at("token_ids").get<std::vector<TokenId>>();
    if (texts.size() != ids.size()) throw std::runtime_error("tokens and token_ids differ");
    for (std::size_t i = 0; i < ids.size(); ++i) s.tokens.push_back({ids[i], texts[i]});
    s.result.method = parse_method(j.at("method").get<std::string>());
    s.result.seed = j.at("seed").get<std::uint64_t>();
    s.result.target_token = j.at("target_token").get<TokenId>();
    s.result.values = j.at("values").get<std::vector<double>>();
    s.result.ranks = j.at("ranks").get<std::vector<int>>();
    s.result.oracle_calls.pairs = j.at("oracle_calls").at("pairs").get<std::uint64_t>();
    s.result.oracle_calls.unique = j.at("oracle_calls").at("unique").get<std::uint64_t>();
    if (s.result.values.size() != s.tokens.size() || s.result.ranks.size() != s.tokens.size()) {
      throw std::runtime_error("values/ranks do not match the token count");
    }
    return s;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed explanation: ") + e.what());
  }
}

ordered_json metric_report_json(const MetricReport& report) {
  ordered_json j;
  j["config"] = {{"t", report.config.t},
                 {"k", report.config.k},
                 {"strategy", std::string(to_string(report.config.strategy))},
                 {"seed", report.config.seed}};
  j["n"] = report.n;
  j["fid"] = report.fid;
  j["fid_rand"] = report.fid_rand;
  j["div_at_k"] = report.div_at_k;
  j["acc_at_k"] = report.acc_at_k;
  ordered_json rows = ordered_json::array();
  for (const auto& s : report.sentences) {
    rows.push_back({{"id", s.id},
                    {"fid", s.fid},
                    {"fid_rand", s.fid_rand},
                    {"div_at_k", s.div_at_k},
                    {"acc_at_k", s.acc_at_k}});
  }
  j["sentences"] = std::move(rows);
  ordered_json skipped = ordered_json::array();
  for (const auto& s : report.skipped) skipped.push_back({{"id", s.id}, {"error", s.error}});
  j["skipped"] = std::move(skipped);
  return j;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string metric_report_csv(const MetricReport& report) {
  std::ostringstream os;
  os << "id,fid,fid_rand,div_at_k,acc_at_k\n";
  for (const auto& s : report.sentences) {
    os << csv_field(s.id) << ',' << format_double(s.fid) << ',' << format_double(s.fid_rand)
       << ',' << format_double(s.div_at_k) << ',' << format_double(s.acc_at_k) << '\n';
  }
  os << "__mean__," << format_double(report.fid) << ',' << format_double(report.fid_rand) << ','
     << format_double(report.div_at_k) << ',' << format_double(report.acc_at_k) << '\n';
  return os.str();
}

namespace {

ordered_json optional_number(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

}  // namespace

ordered_json coherency_json(const CoherencyReport& report) {
  ordered_json j;
  j["mean_equal"] = optional_number(report.mean_equal);
  j["mean_different"] = optional_number(report.mean_different);
  j["difference"] = optional_number(report.difference);
  j["n_equal"] = report.n_equal;
  j["n_different"] = report.n_different;
  j["skipped"] = report.skipped;
  ordered_json cos = ordered_json::array();
  for (const auto& [id, c] : report.cosines) cos.push_back({{"id", id}, {"cosine", c}});
  j["cosines"] = std::move(cos);
  return j;
}

ordered_json alignment_json(const AlignmentReport& report) {
  ordered_json j;
  ordered_json counts = ordered_json::object();
  for (const auto& [rank, n] : report.rank_counts) counts[std::to_string(rank)] = n;
  j["rank_counts"] = std::move(counts);
  j["n"] = report.n;
  j["top_rank_share"] = optional_number(report.top_rank_share);
  j["mean_rank"] = optional_number(report.mean_rank);
  j["rejected"] = report.rejected;
  return j;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace syntaxshap
