#include "syntaxshap/deptree.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

namespace syntaxshap {

std::string_view to_string(StructureIssue issue) {
  switch (issue) {
    case StructureIssue::kNoRoot:
      return "no_root";
    case StructureIssue::kMultipleRoots:
      return "multiple_roots";
    case StructureIssue::kCycle:
      return "cycle";
    case StructureIssue::kBadHead:
      return "bad_head";
  }
  return "unknown";
}

namespace {

std::optional<std::string> find_comment(const std::vector<std::string>& comments,
                                        std::string_view key) {
  for (const auto& c : comments) {
    std::string_view line = c;
    if (!line.starts_with('#')) continue;
    line.remove_prefix(1);
    while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
    if (!line.starts_with(key)) continue;
    line.remove_prefix(key.size());
    while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
    if (!line.starts_with('=')) continue;
    line.remove_prefix(1);
    while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
    return std::string(line);
  }
  return std::nullopt;
}

std::string join_forms(const std::vector<WordNode>& nodes) {
  std::string out;
  for (const auto& n : nodes) {
    if (!out.empty()) out += ' ';
    out += n.text;
  }
  return out;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(s.substr(start));
      return parts;
    }
    parts.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

// Levels by walking head links; throws StructureError on cycles/bad heads.
std::vector<int> compute_levels(const std::vector<WordNode>& nodes, int& root) {
  const int n = static_cast<int>(nodes.size());
  root = 0;
  int roots = 0;
  for (const auto& node : nodes) {
    if (node.head_index < 0 || node.head_index > n) {
      throw StructureError(StructureIssue::kBadHead,
                           "word " + std::to_string(node.word_index) +
                               " has head " + std::to_string(node.head_index) +
                               " outside the sentence");
    }
    if (node.head_index == node.word_index) {
      throw StructureError(StructureIssue::kCycle,
                           "word " + std::to_string(node.word_index) +
                               " is its own head");
    }
    if (node.head_index == 0) {
      ++roots;
      root = node.word_index;
    }
  }
  if (roots == 0) {
    throw StructureError(StructureIssue::kNoRoot, "sentence has no root");
  }
  if (roots > 1) {
    throw StructureError(StructureIssue::kMultipleRoots,
                         "sentence has " + std::to_string(roots) + " roots");
  }

  std::vector<int> levels(n, 0);
  levels[root - 1] = 1;
  for (int i = 1; i <= n; ++i) {
    // Walk up until a word with a known level; path length bounds the walk.
    std::vector<int> path;
    int cur = i;
    while (levels[cur - 1] == 0) {
      path.push_back(cur);
      if (static_cast<int>(path.size()) > n) {
        throw StructureError(StructureIssue::kCycle,
                             "head links starting at word " +
                                 std::to_string(i) + " form a cycle");
      }
      cur = nodes[cur - 1].head_index;
    }
    int level = levels[cur - 1];
    for (auto it = path.rbegin(); it != path.rend(); ++it) {
      levels[*it - 1] = ++level;
    }
  }
  return levels;
}

}  // namespace

DependencyTree::DependencyTree(std::vector<WordNode> nodes,
                               std::vector<std::string> comments)
    : nodes_(std::move(nodes)), comments_(std::move(comments)) {
  if (nodes_.empty()) {
    throw StructureError(StructureIssue::kNoRoot, "empty sentence");
  }
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    if (nodes_[k].word_index != static_cast<int>(k + 1)) {
      throw StructureError(StructureIssue::kBadHead,
                           "word indices must be 1..n in order");
    }
  }
  levels_ = compute_levels(nodes_, root_);
  depth_ = *std::max_element(levels_.begin(), levels_.end());
  level_sets_.assign(depth_, {});
  for (std::size_t k = 0; k < levels_.size(); ++k) {
    level_sets_[levels_[k] - 1].push_back(static_cast<int>(k + 1));
  }
}

const std::vector<int>& DependencyTree::level_set(int l) const {
  if (l < 1 || l > depth_) {
    throw std::out_of_range("level " + std::to_string(l) + " outside [1, " +
                            std::to_string(depth_) + "]");
  }
  return level_sets_[l - 1];
}

std::size_t DependencyTree::level_width(int l) const {
  if (l == 0) return 0;
  return level_set(l).size();
}

std::vector<int> DependencyTree::words_above(int l) const {
  std::vector<int> out;
  for (std::size_t k = 0; k < levels_.size(); ++k) {
    if (levels_[k] < l) out.push_back(static_cast<int>(k + 1));
  }
  return out;
}

std::optional<std::string> DependencyTree::comment_value(std::string_view key) const {
  return find_comment(comments_, key);
}

std::string DependencyTree::text() const {
  if (auto t = comment_value("text")) return *t;
  return join_forms(nodes_);
}

std::optional<std::string> SentenceParse::comment_value(std::string_view key) const {
  return find_comment(comments, key);
}

std::string SentenceParse::text() const {
  if (auto t = comment_value("text")) return *t;
  return join_forms(nodes);
}

// --- CoNLL-U ----------------------------------------------------------------

std::vector<SentenceParse> read_conllu(std::string_view document) {
  std::vector<SentenceParse> out;
  SentenceParse current;
  bool open = false;

  auto flush = [&]() {
    if (!open) return;
    if (current.nodes.empty()) {
      // Comment-only block: nothing to explain.
      current = SentenceParse{};
      open = false;
      return;
    }
    try {
      current.tree.emplace(current.nodes, current.comments);
    } catch (const StructureError& e) {
      current.issue = e.issue();
      current.message = e.what();
    }
    out.push_back(std::move(current));
    current = SentenceParse{};
    open = false;
  };

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= document.size()) {
    auto end = document.find('\n', pos);
    if (end == std::string_view::npos) end = document.size();
    std::string_view line = document.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    if (line.empty()) {
      flush();
      if (end == document.size()) break;
      continue;
    }
    if (!open) {
      open = true;
      current.first_line = line_no;
    }
    if (line.front() == '#') {
      if (!current.nodes.empty()) {
        throw ParseError(line_no, "comment after word lines");
      }
      current.comments.emplace_back(line);
      continue;
    }
    auto cols = split(line, '\t');
    if (cols.size() != 10) {
      throw ParseError(line_no, "expected 10 tab-separated columns, got " +
                                    std::to_string(cols.size()));
    }
    // Multiword-token ranges (1-2) and empty nodes (1.1) are not tree nodes.
    if (cols[0].find('-') != std::string_view::npos ||
        cols[0].find('.') != std::string_view::npos) {
      continue;
    }
    WordNode node;
    if (!parse_int(cols[0], node.word_index) || node.word_index < 1) {
      throw ParseError(line_no, "bad word index '" + std::string(cols[0]) + "'");
    }
    if (node.word_index != static_cast<int>(current.nodes.size() + 1)) {
      throw ParseError(line_no, "word index " + std::to_string(node.word_index) +
                                    " out of sequence");
    }
    if (!parse_int(cols[6], node.head_index) || node.head_index < 0) {
      throw ParseError(line_no, "bad head '" + std::string(cols[6]) + "'");
    }
    if (cols[1].empty()) throw ParseError(line_no, "empty FORM column");
    node.text = cols[1];
    node.lemma = cols[2];
    node.upos = cols[3];
    node.xpos = cols[4];
    node.feats = cols[5];
    node.deprel = cols[7];
    node.deps = cols[8];
    node.misc = cols[9];
    current.nodes.push_back(std::move(node));
  }
  flush();
  return out;
}

std::vector<DependencyTree> parse_conllu(std::string_view document) {
  std::vector<DependencyTree> trees;
  for (auto& s : read_conllu(document)) {
    if (!s.tree) {
      throw StructureError(*s.issue, "sentence at line " +
                                         std::to_string(s.first_line) + ": " +
                                         s.message);
    }
    trees.push_back(std::move(*s.tree));
  }
  return trees;
}

std::string serialize_conllu(std::span<const DependencyTree> trees) {
  std::ostringstream os;
  for (const auto& tree : trees) {
    for (const auto& c : tree.comments()) os << c << '\n';
    for (const auto& n : tree.nodes()) {
      os << n.word_index << '\t' << n.text << '\t' << n.lemma << '\t' << n.upos
         << '\t' << n.xpos << '\t' << n.feats << '\t' << n.head_index << '\t'
         << n.deprel << '\t' << n.deps << '\t' << n.misc << '\n';
    }
    os << '\n';
  }
  return os.str();
}

// --- subtokens ---------------------------------------------------------------

TokenizedTree::TokenizedTree(DependencyTree tree, std::vector<TokenNode> token_nodes)
    : tree_(std::move(tree)), token_nodes_(std::move(token_nodes)) {
  ranges_.assign(tree_.size(), {0, 0});
  int expected = 1;
  std::size_t start = 0;
  for (std::size_t t = 0; t < token_nodes_.size(); ++t) {
    const auto& tn = token_nodes_[t];
    if (tn.word_index < 1 || tn.word_index > static_cast<int>(tree_.size())) {
      throw AlignmentError("token " + std::to_string(t) + " references unknown word " +
                           std::to_string(tn.word_index));
    }
    if (tn.word_index == expected + 1 && t > 0) {
      ranges_[expected - 1] = {start, t};
      start = t;
      expected = tn.word_index;
    } else if (tn.word_index != expected) {
      throw AlignmentError("token " + std::to_string(t) + " for word " +
                           std::to_string(tn.word_index) +
                           " breaks sentence order (expected word " +
                           std::to_string(expected) + " or " +
                           std::to_string(expected + 1) + ")");
    }
    if (tn.level != tree_.level(tn.word_index)) {
      throw AlignmentError("token " + std::to_string(t) +
                           " level differs from its word's level");
    }
  }
  if (token_nodes_.empty() || expected != static_cast<int>(tree_.size())) {
    throw AlignmentError("token spans do not cover every word");
  }
  ranges_[expected - 1] = {start, token_nodes_.size()};
}

std::vector<Token> TokenizedTree::tokens() const {
  std::vector<Token> out;
  out.reserve(token_nodes_.size());
  for (const auto& tn : token_nodes_) out.push_back(tn.token);
  return out;
}

std::vector<int> TokenizedTree::levels() const {
  std::vector<int> out;
  out.reserve(token_nodes_.size());
  for (const auto& tn : token_nodes_) out.push_back(tn.level);
  return out;
}

std::pair<std::size_t, std::size_t> TokenizedTree::token_range(int word_index) const {
  return ranges_.at(word_index - 1);
}

TokenizedTree expand_subtokens(const DependencyTree& tree,
                               std::span<const TokenSpan> token_spans) {
  std::vector<TokenNode> nodes;
  nodes.reserve(token_spans.size());
  for (const auto& span : token_spans) {
    if (span.word_index < 1 || span.word_index > static_cast<int>(tree.size())) {
      throw AlignmentError("span references unknown word " +
                           std::to_string(span.word_index));
    }
    nodes.push_back({span.token, span.word_index, tree.level(span.word_index)});
  }
  return TokenizedTree(tree, std::move(nodes));
}

TokenizedTree identity_tokens(const DependencyTree& tree) {
  std::vector<TokenSpan> spans;
  for (const auto& n : tree.nodes()) {
    spans.push_back({Token{n.word_index, n.text}, n.word_index});
  }
  return expand_subtokens(tree, spans);
}

std::optional<std::vector<TokenSpan>> misc_token_spans(const DependencyTree& tree) {
  std::vector<TokenSpan> spans;
  for (const auto& n : tree.nodes()) {
    std::optional<std::string_view> ids, forms;
    std::string_view misc = n.misc;
    for (auto field : split(misc, '|')) {
      if (field.starts_with("TokenIds=")) ids = field.substr(9);
      if (field.starts_with("TokenForms=")) forms = field.substr(11);
    }
    if (!ids) return std::nullopt;
    auto id_parts = split(*ids, ',');
    std::vector<std::string_view> form_parts;
    if (forms) form_parts = split(*forms, ',');
    if (forms && form_parts.size() != id_parts.size()) {
      throw AlignmentError("word " + std::to_string(n.word_index) +
                           ": TokenForms and TokenIds lengths differ");
    }
    for (std::size_t k = 0; k < id_parts.size(); ++k) {
      Token tok;
      if (!parse_int(id_parts[k], tok.id)) {
        throw AlignmentError("word " + std::to_string(n.word_index) +
                             ": bad token id '" + std::string(id_parts[k]) + "'");
      }
      if (forms) {
        tok.text = form_parts[k];
      } else if (id_parts.size() == 1) {
        tok.text = n.text;
      } else {
        tok.text = n.text + "#" + std::to_string(k);
      }
      spans.push_back({std::move(tok), n.word_index});
    }
  }
  return spans;
}

double avg_dependency_distance(const DependencyTree& tree) {
  if (tree.size() < 2) {
    throw std::domain_error("dependency distance needs at least two words");
  }
  double sum = 0.0;
  for (const auto& n : tree.nodes()) {
    if (n.head_index == 0) continue;
    sum += std::abs(n.word_index - n.head_index);
  }
  return sum / static_cast<double>(tree.size() - 1);
}

// --- filtering ---------------------------------------------------------------

std::optional<std::string> rejection_reason(const SentenceRecord& record,
                                            const FilterConfig& config) {
  if (record.sentence.find_first_of(config.punctuation) != std::string::npos) {
    return "punctuation";
  }
  if (record.multi_span) return "multi_span";
  if (record.token_count > config.max_tokens) return "too_long";
  if (record.token_count < config.min_tokens) return "too_short";
  return std::nullopt;
}

FilterResult filter_dataset(std::span<const SentenceRecord> records,
                            const FilterConfig& config) {
  FilterResult result;
  for (const auto& r : records) {
    if (auto reason = rejection_reason(r, config)) {
      result.rejected.push_back({r.id, *reason, {}});
    } else {
      result.kept.push_back(r);
    }
  }
  return result;
}

}  // namespace syntaxshap
