#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace syntaxshap {

// Raised on a CoNLL-U line that cannot be read. `line()` is 1-based.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

enum class StructureIssue { kNoRoot, kMultipleRoots, kCycle, kBadHead };

std::string_view to_string(StructureIssue issue);

// Raised when head links do not form a single rooted tree.
class StructureError : public std::runtime_error {
 public:
  StructureError(StructureIssue issue, const std::string& what)
      : std::runtime_error(what), issue_(issue) {}
  StructureIssue issue() const { return issue_; }
  // Sentences with zero or several roots are the parser's "multi-span" case.
  bool multi_span() const {
    return issue_ == StructureIssue::kMultipleRoots ||
           issue_ == StructureIssue::kNoRoot;
  }

 private:
  StructureIssue issue_;
};

class AlignmentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One CoNLL-U word line. Indices are 1-based as in the file format; head 0
// marks the root. The remaining columns are carried verbatim.
struct WordNode {
  int word_index = 0;
  std::string text;
  int head_index = 0;
  std::string deprel;

  std::string lemma = "_";
  std::string upos = "_";
  std::string xpos = "_";
  std::string feats = "_";
  std::string deps = "_";
  std::string misc = "_";

  bool operator==(const WordNode&) const = default;
};

// A sentence's dependency tree, leveled by distance to the root. The root is
// level 1; level 0 is reserved for the empty coalition and never holds a node.
class DependencyTree {
 public:
  // Validates the head links and computes levels. Throws StructureError.
  explicit DependencyTree(std::vector<WordNode> nodes,
                          std::vector<std::string> comments = {});

  std::size_t size() const { return nodes_.size(); }
  const std::vector<WordNode>& nodes() const { return nodes_; }
  const WordNode& node(int word_index) const { return nodes_.at(word_index - 1); }
  const std::vector<std::string>& comments() const { return comments_; }

  // Level of each word, in word order (entry k is word k+1).
  std::span<const int> levels() const { return levels_; }
  int level(int word_index) const { return levels_.at(word_index - 1); }
  int depth() const { return depth_; }
  int root() const { return root_; }

  // X_l: 1-based word indices at level l, ascending. l in [1, depth].
  const std::vector<int>& level_set(int l) const;
  // n_l for l in [0, depth]; n_0 = 0.
  std::size_t level_width(int l) const;
  // X_{<l}: all words with level below l, ascending.
  std::vector<int> words_above(int l) const;

  // Value of a `# key = value` comment, if present.
  std::optional<std::string> comment_value(std::string_view key) const;
  // `# text` comment, or forms joined with spaces.
  std::string text() const;

  bool operator==(const DependencyTree& other) const {
    return nodes_ == other.nodes_ && comments_ == other.comments_;
  }

 private:
  std::vector<WordNode> nodes_;
  std::vector<std::string> comments_;
  std::vector<int> levels_;
  std::vector<std::vector<int>> level_sets_;  // index l-1
  int depth_ = 0;
  int root_ = 0;
};

// A model token. `id` is opaque to the engine (the model tokenizer's id).
struct Token {
  std::int64_t id = 0;
  std::string text;
  bool operator==(const Token&) const = default;
};

struct TokenSpan {
  Token token;
  int word_index = 0;
};

struct TokenNode {
  Token token;
  int word_index = 0;
  int level = 0;
};

// Dependency tree re-expressed over model tokens. A word split into several
// tokens is duplicated: each piece is its own feature at the word's level.
// Feature indices are 0-based token positions.
class TokenizedTree {
 public:
  TokenizedTree(DependencyTree tree, std::vector<TokenNode> token_nodes);

  const DependencyTree& tree() const { return tree_; }
  const std::vector<TokenNode>& token_nodes() const { return token_nodes_; }
  std::size_t size() const { return token_nodes_.size(); }
  std::vector<Token> tokens() const;
  std::vector<int> levels() const;
  // Half-open token range [first, second) owned by a 1-based word index.
  std::pair<std::size_t, std::size_t> token_range(int word_index) const;

 private:
  DependencyTree tree_;
  std::vector<TokenNode> token_nodes_;
  std::vector<std::pair<std::size_t, std::size_t>> ranges_;
};

// Outcome of reading one sentence block when structural problems are data.
struct SentenceParse {
  std::size_t first_line = 0;
  std::vector<WordNode> nodes;
  std::vector<std::string> comments;
  std::optional<DependencyTree> tree;
  std::optional<StructureIssue> issue;
  std::string message;

  std::optional<std::string> comment_value(std::string_view key) const;
  std::string text() const;
};

// Strict reader: any malformed line or bad tree throws.
std::vector<DependencyTree> parse_conllu(std::string_view document);

// Lenient reader: malformed lines still throw ParseError, but each block's
// structural problems are reported per sentence.
std::vector<SentenceParse> read_conllu(std::string_view document);

std::string serialize_conllu(std::span<const DependencyTree> trees);

// Expands words into model tokens. Spans must cover every word, in order.
TokenizedTree expand_subtokens(const DependencyTree& tree,
                               std::span<const TokenSpan> token_spans);

// One token per word; the token id is the 1-based word index.
TokenizedTree identity_tokens(const DependencyTree& tree);

// Token pieces listed in the MISC column as `TokenIds=1,2|TokenForms=a,b`.
// Returns nullopt when any word lacks TokenIds.
std::optional<std::vector<TokenSpan>> misc_token_spans(const DependencyTree& tree);

// Mean |word_index - head_index| over non-root words. Throws
// std::domain_error for single-word trees.
double avg_dependency_distance(const DependencyTree& tree);

// --- dataset filtering ----------------------------------------------------

inline constexpr std::string_view kDefaultPunctuation =
    "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";
inline constexpr std::size_t kDefaultMaxTokens = 15;

struct SentenceRecord {
  std::string id;
  std::string sentence;
  // Number of model tokens after subtoken expansion.
  std::size_t token_count = 0;
  bool multi_span = false;
};

struct FilterConfig {
  std::size_t max_tokens = kDefaultMaxTokens;
  std::size_t min_tokens = 1;
  std::string punctuation{kDefaultPunctuation};
};

struct Rejection {
  std::string id;
  std::string reason;  // too_long, too_short, multi_span, punctuation
  std::string detail;
};

struct FilterResult {
  std::vector<SentenceRecord> kept;
  std::vector<Rejection> rejected;
};

// First matching rule, or nullopt if the record is kept.
std::optional<std::string> rejection_reason(const SentenceRecord& record,
                                            const FilterConfig& config);

FilterResult filter_dataset(std::span<const SentenceRecord> records,
                            const FilterConfig& config = {});

}  // namespace syntaxshap
