#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "hmer/decode.hpp"
#include "hmer/srt.hpp"

namespace hmer {

struct TerminalRule {
  int lhs = 0;
  std::string token;
  int line = 0;
};

// lhs -> relation(head, dependent): the dependent stands in `relation` to the
// head, i.e. the tree link runs from the head's attachment terminal to the
// dependent's.
struct BinaryRule {
  int lhs = 0;
  Relation relation = Relation::kRight;
  int head = 0;
  int dependent = 0;
  int line = 0;
};

// Two-dimensional context-free grammar in Chomsky normal form. Rules carry no
// weights; all probability mass comes from the classifier.
class Grammar {
 public:
  std::vector<std::string> nonterminals;
  int start = 0;
  std::vector<TerminalRule> terminal_rules;
  std::vector<BinaryRule> binary_rules;
  std::vector<std::string> warnings;

  std::optional<int> find_nonterminal(std::string_view name) const;
  std::set<std::string> terminals() const;
  const std::string& name(int nonterminal) const { return nonterminals[static_cast<std::size_t>(nonterminal)]; }
};

// Line-oriented grammar text:
//   start: S              (optional; default is the first defined nonterminal)
//   NT -> 'token'
//   NT -> Rel(Head, Dependent)
//   # comment
// Throws ValidationError citing the line for non-CNF rules, unknown relations
// and undefined nonterminals. Unreachable nonterminals are pruned with a
// warning.
Grammar parse_grammar(std::string_view text);

// Components of a partial parse used to pick which terminals carry a relation.
// Terminals are identified by segment index.
struct Components {
  std::vector<int> baseline;
  int rsup = -1;  // end of the Sup chain hanging off the Right component
  int rsub = -1;
  int lsup = -1;  // same chains hanging off the Left component
  int lsub = -1;
  bool has_main = false;  // baseline is a single dominant symbol
  std::uint8_t right_links = 0;  // relations already leaving the Right component

  int left() const { return baseline.front(); }
  int right() const { return baseline.back(); }
  int main() const { return has_main ? baseline.front() : -1; }
};

struct ParseNode {
  int nonterminal = 0;
  int first_segment = 0;
  int last_segment = 0;
  double probability = 0.0;
  int rule = -1;  // index into terminal_rules or binary_rules
  bool terminal = true;

  // Terminal nodes.
  std::string symbol;
  int first_stroke = 0;
  int last_stroke = 0;

  // Binary nodes.
  Relation relation = Relation::kRight;
  int attach_from = -1;
  int attach_to = -1;
  std::shared_ptr<const ParseNode> head;
  std::shared_ptr<const ParseNode> dependent;

  Components components;
};

using NodePtr = std::shared_ptr<const ParseNode>;

// Terminal that carries an outgoing `relation` of `node`, or -1 when the
// relation cannot attach (the terminal already has that relation).
int outbound_terminal(const Components& node, Relation relation);
int inbound_terminal(const Components& node);
// Components of relation(head, dependent) given the chosen attachment.
Components compose_components(const Components& head, const Components& dependent, Relation relation,
                              int attach_from);

// Scores for the relation from segment `from` to segment `to` when the two are
// not temporally adjacent. Implementations must be safe for concurrent calls.
class RelationOracle {
 public:
  virtual ~RelationOracle() = default;
  virtual std::vector<RelationScore> score(const CandidateLattice& lattice, int from, int to) const = 0;
};

// Oracle backed by a plain function; handy for tests and tooling.
class FunctionRelationOracle : public RelationOracle {
 public:
  using Fn = std::function<std::vector<RelationScore>(const CandidateLattice&, int, int)>;
  explicit FunctionRelationOracle(Fn fn) : fn_(std::move(fn)) {}
  std::vector<RelationScore> score(const CandidateLattice& lattice, int from, int to) const override {
    return fn_(lattice, from, to);
  }

 private:
  Fn fn_;
};

// Per-parse memo of terminal-pair relation scores.
class PairRelationCache {
 public:
  PairRelationCache(const CandidateLattice& lattice, const RelationOracle& oracle)
      : lattice_(lattice), oracle_(oracle) {}

  // Scores from the existing boundary when `to` directly follows `from` in
  // writing order, otherwise from the oracle.
  const std::vector<RelationScore>& scores(int from, int to);
  int oracle_calls() const { return oracle_calls_; }

 private:
  const CandidateLattice& lattice_;
  const RelationOracle& oracle_;
  std::map<std::pair<int, int>, std::vector<RelationScore>> memo_;
  int oracle_calls_ = 0;
};

// P(r) for every link relation r between head and dependent; relations the
// classifier did not propose are absent.
std::map<Relation, double> classify_pair_relation(const ParseNode& head, const ParseNode& dependent,
                                                  PairRelationCache& cache);

struct CykOptions {
  int beam = 5;  // alternatives per chart cell and nonterminal; 0 keeps all
  // Relations whose dependent may be written before its head.
  std::set<Relation> order_free = {Relation::kAbove, Relation::kBelow};
};

struct ParseResult {
  std::vector<NodePtr> parses;         // full-span start-symbol entries, descending
  std::vector<NodePtr> partial_cover;  // best cover of the segments when parses is empty
  int oracle_calls = 0;

  bool complete() const { return !parses.empty(); }
};

ParseResult cyk_parse(const Grammar& grammar, const CandidateLattice& lattice, const RelationOracle& oracle,
                      const CykOptions& options = {});

// Relation-labelled derivation as a symbol relation tree.
SrtNode parse_to_srt(const ParseNode& root);
std::string emit_latex(const ParseNode& root);

}  // namespace hmer
