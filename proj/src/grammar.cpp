#include "hmer/grammar.hpp"

#include <algorithm>
#include <regex>
#include <sstream>
#include <tuple>

#include "hmer/error.hpp"

namespace hmer {

std::optional<int> Grammar::find_nonterminal(std::string_view name) const {
  for (std::size_t i = 0; i < nonterminals.size(); ++i) {
    if (nonterminals[i] == name) return static_cast<int>(i);
  }
  return std::nullopt;
}

std::set<std::string> Grammar::terminals() const {
  std::set<std::string> out;
  for (const auto& r : terminal_rules) out.insert(r.token);
  return out;
}

namespace {

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\'') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

bool blank_line(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

[[noreturn]] void fail(int line, const std::string& what) {
  throw ValidationError("grammar line " + std::to_string(line) + ": " + what);
}

}  // namespace

Grammar parse_grammar(std::string_view text) {
  static const std::string nt = R"([A-Za-z_][A-Za-z0-9_]*)";
  static const std::regex start_re(R"(^\s*start\s*:\s*()" + nt + R"()\s*$)");
  static const std::regex terminal_re(R"(^\s*()" + nt + R"()\s*->\s*'([^']+)'\s*$)");
  static const std::regex binary_re(R"(^\s*()" + nt + R"()\s*->\s*([A-Za-z]+)\s*\(\s*()" + nt +
                                    R"()\s*,\s*()" + nt + R"()\s*\)\s*$)");
  static const std::regex unit_re(R"(^\s*()" + nt + R"()\s*->\s*()" + nt + R"()\s*$)");
  static const std::regex arrow_re(R"(^\s*()" + nt + R"()\s*->)");

  struct RawBinary {
    std::string lhs, head, dependent;
    Relation relation;
    int line;
  };
  struct RawTerminal {
    std::string lhs, token;
    int line;
  };
  std::vector<std::string> defined;  // in order of first definition
  std::vector<RawBinary> binaries;
  std::vector<RawTerminal> terminals;
  std::string start_name;

  auto define = [&](const std::string& name) {
    if (std::find(defined.begin(), defined.end(), name) == defined.end()) defined.push_back(name);
  };

  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = strip_comment(raw);
    if (blank_line(line)) continue;
    std::smatch m;
    if (std::regex_match(line, m, start_re)) {
      if (!start_name.empty()) fail(line_no, "start symbol declared twice");
      start_name = m[1];
    } else if (std::regex_match(line, m, terminal_re)) {
      define(m[1]);
      terminals.push_back({m[1], m[2], line_no});
    } else if (std::regex_match(line, m, binary_re)) {
      auto rel = relation_from_name(m[2].str());
      if (!rel) fail(line_no, "unknown relation '" + m[2].str() + "'");
      if (*rel == Relation::kNoRel) fail(line_no, "NoRel cannot label a grammar rule");
      define(m[1]);
      binaries.push_back({m[1], m[3], m[4], *rel, line_no});
    } else if (std::regex_match(line, m, unit_re)) {
      fail(line_no, "unit rule '" + m[1].str() + " -> " + m[2].str() + "' is not in Chomsky normal form");
    } else if (std::regex_search(line, m, arrow_re)) {
      fail(line_no, "rule is not in Chomsky normal form");
    } else {
      fail(line_no, "cannot parse '" + line + "'");
    }
  }
  if (defined.empty()) throw ValidationError("grammar defines no rules");
  if (start_name.empty()) start_name = defined.front();
  if (std::find(defined.begin(), defined.end(), start_name) == defined.end()) {
    throw ValidationError("start symbol '" + start_name + "' has no rules");
  }
  for (const auto& b : binaries) {
    for (const auto* name : {&b.head, &b.dependent}) {
      if (std::find(defined.begin(), defined.end(), *name) == defined.end()) {
        fail(b.line, "nonterminal '" + *name + "' has no rules");
      }
    }
  }

  // Reachability from the start symbol.
  std::set<std::string> reachable{start_name};
  for (bool grew = true; grew;) {
    grew = false;
    for (const auto& b : binaries) {
      if (!reachable.count(b.lhs)) continue;
      grew |= reachable.insert(b.head).second;
      grew |= reachable.insert(b.dependent).second;
    }
  }

  Grammar g;
  for (const auto& name : defined) {
    if (reachable.count(name)) {
      g.nonterminals.push_back(name);
    } else {
      g.warnings.push_back("nonterminal '" + name + "' is unreachable from '" + start_name + "' and was pruned");
    }
  }
  g.start = *g.find_nonterminal(start_name);
  for (const auto& t : terminals) {
    if (auto lhs = g.find_nonterminal(t.lhs)) g.terminal_rules.push_back({*lhs, t.token, t.line});
  }
  for (const auto& b : binaries) {
    auto lhs = g.find_nonterminal(b.lhs);
    if (!lhs) continue;
    g.binary_rules.push_back({*lhs, b.relation, *g.find_nonterminal(b.head), *g.find_nonterminal(b.dependent), b.line});
  }
  return g;
}

namespace {

std::uint8_t relation_bit(Relation r) { return static_cast<std::uint8_t>(1u << static_cast<unsigned>(r)); }

}  // namespace

int outbound_terminal(const Components& node, Relation relation) {
  const bool taken = (node.right_links & relation_bit(relation)) != 0;
  if (node.has_main) return taken ? -1 : node.main();
  switch (relation) {
    case Relation::kSup:
      return node.rsup >= 0 ? node.rsup : node.right();
    case Relation::kSub:
      return node.rsub >= 0 ? node.rsub : node.right();
    default:
      return taken ? -1 : node.right();
  }
}

int inbound_terminal(const Components& node) { return node.has_main ? node.main() : node.left(); }

Components compose_components(const Components& head, const Components& dependent, Relation relation,
                              int attach_from) {
  Components out;
  if (relation == Relation::kRight) {
    out.baseline = head.baseline;
    out.baseline.insert(out.baseline.end(), dependent.baseline.begin(), dependent.baseline.end());
    out.rsup = dependent.rsup;
    out.rsub = dependent.rsub;
    out.lsup = head.lsup;
    out.lsub = head.lsub;
    out.right_links = dependent.right_links;
    out.has_main = false;
    return out;
  }
  out = head;
  if (attach_from == head.right()) out.right_links |= relation_bit(relation);
  const bool single = head.baseline.size() == 1;
  if (relation == Relation::kSup) {
    const int end = dependent.lsup >= 0 ? dependent.lsup : dependent.left();
    out.rsup = end;
    if (single) out.lsup = end;
  } else if (relation == Relation::kSub) {
    const int end = dependent.lsub >= 0 ? dependent.lsub : dependent.left();
    out.rsub = end;
    if (single) out.lsub = end;
  }
  return out;
}

const std::vector<RelationScore>& PairRelationCache::scores(int from, int to) {
  auto key = std::make_pair(from, to);
  auto it = memo_.find(key);
  if (it != memo_.end()) return it->second;
  std::vector<RelationScore> s;
  if (to == from + 1 && static_cast<std::size_t>(from) < lattice_.boundaries.size()) {
    s = lattice_.boundaries[static_cast<std::size_t>(from)].alternatives;
  } else {
    ++oracle_calls_;
    s = oracle_.score(lattice_, from, to);
  }
  return memo_.emplace(key, std::move(s)).first->second;
}

namespace {

std::optional<double> lookup(const std::vector<RelationScore>& scores, Relation r) {
  for (const auto& s : scores) {
    if (s.relation == r) return s.probability;
  }
  return std::nullopt;
}

}  // namespace

std::map<Relation, double> classify_pair_relation(const ParseNode& head, const ParseNode& dependent,
                                                  PairRelationCache& cache) {
  std::map<Relation, double> out;
  const int to = inbound_terminal(dependent.components);
  for (Relation r : kLinkRelations) {
    const int from = outbound_terminal(head.components, r);
    if (from < 0) continue;
    if (auto p = lookup(cache.scores(from, to), r)) out[r] = *p;
  }
  return out;
}

namespace {

using Key = std::tuple<int, int, int, int, int, int, bool, std::uint8_t>;

Key key_of(const Components& c) {
  return {c.left(), c.right(), c.rsup, c.rsub, c.lsup, c.lsub, c.has_main, c.right_links};
}

// Entries of one chart cell, grouped by nonterminal and sorted descending.
using Cell = std::map<int, std::vector<NodePtr>>;

void finalize(std::map<int, std::map<Key, NodePtr>>& pending, Cell& cell, int beam) {
  for (auto& [nt, by_key] : pending) {
    std::vector<NodePtr> entries;
    entries.reserve(by_key.size());
    for (auto& [key, node] : by_key) entries.push_back(std::move(node));
    // Stable on key order, so ties resolve deterministically.
    std::stable_sort(entries.begin(), entries.end(),
                     [](const NodePtr& a, const NodePtr& b) { return a->probability > b->probability; });
    if (beam > 0 && entries.size() > static_cast<std::size_t>(beam)) entries.resize(static_cast<std::size_t>(beam));
    cell[nt] = std::move(entries);
  }
}

void offer(std::map<int, std::map<Key, NodePtr>>& pending, NodePtr node) {
  auto& slot = pending[node->nonterminal][key_of(node->components)];
  if (!slot || node->probability > slot->probability) slot = std::move(node);
}

}  // namespace

ParseResult cyk_parse(const Grammar& grammar, const CandidateLattice& lattice, const RelationOracle& oracle,
                      const CykOptions& options) {
  const int n = static_cast<int>(lattice.segments.size());
  if (n < 1) throw ContractError("lattice has no segments");
  for (const auto& s : lattice.segments) {
    if (s.candidates.empty()) throw ContractError("segment without symbol candidates");
  }
  PairRelationCache cache(lattice, oracle);
  // chart[i][len - 1] covers segments i .. i + len - 1.
  std::vector<std::vector<Cell>> chart(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) chart[static_cast<std::size_t>(i)].resize(static_cast<std::size_t>(n - i));
  auto cell = [&](int first, int last) -> Cell& {
    return chart[static_cast<std::size_t>(first)][static_cast<std::size_t>(last - first)];
  };

  for (int i = 0; i < n; ++i) {
    const auto& seg = lattice.segments[static_cast<std::size_t>(i)];
    std::map<int, std::map<Key, NodePtr>> pending;
    for (std::size_t r = 0; r < grammar.terminal_rules.size(); ++r) {
      const auto& rule = grammar.terminal_rules[r];
      for (const auto& cand : seg.candidates) {
        if (cand.label != rule.token) continue;
        auto node = std::make_shared<ParseNode>();
        node->nonterminal = rule.lhs;
        node->first_segment = node->last_segment = i;
        node->probability = cand.probability;
        node->rule = static_cast<int>(r);
        node->terminal = true;
        node->symbol = cand.label;
        node->first_stroke = seg.first_stroke;
        node->last_stroke = seg.last_stroke;
        node->components.baseline = {i};
        node->components.has_main = is_dominant_symbol(cand.label);
        offer(pending, std::move(node));
      }
    }
    finalize(pending, cell(i, i), options.beam);
  }

  for (int len = 2; len <= n; ++len) {
    for (int first = 0; first + len - 1 < n; ++first) {
      const int last = first + len - 1;
      std::map<int, std::map<Key, NodePtr>> pending;
      for (int split = first; split < last; ++split) {
        const Cell& early = cell(first, split);
        const Cell& late = cell(split + 1, last);
        for (std::size_t r = 0; r < grammar.binary_rules.size(); ++r) {
          const auto& rule = grammar.binary_rules[r];
          auto combine = [&](const Cell& head_cell, const Cell& dep_cell) {
            auto h = head_cell.find(rule.head);
            auto d = dep_cell.find(rule.dependent);
            if (h == head_cell.end() || d == dep_cell.end()) return;
            for (const auto& head : h->second) {
              const int from = outbound_terminal(head->components, rule.relation);
              if (from < 0) continue;
              for (const auto& dep : d->second) {
                const int to = inbound_terminal(dep->components);
                auto p_rel = lookup(cache.scores(from, to), rule.relation);
                if (!p_rel) continue;
                auto node = std::make_shared<ParseNode>();
                node->nonterminal = rule.lhs;
                node->first_segment = first;
                node->last_segment = last;
                node->probability = head->probability * dep->probability * *p_rel;
                node->rule = static_cast<int>(r);
                node->terminal = false;
                node->relation = rule.relation;
                node->attach_from = from;
                node->attach_to = to;
                node->head = head;
                node->dependent = dep;
                node->components = compose_components(head->components, dep->components, rule.relation, from);
                offer(pending, std::move(node));
              }
            }
          };
          combine(early, late);
          if (options.order_free.count(rule.relation)) combine(late, early);
        }
      }
      finalize(pending, cell(first, last), options.beam);
    }
  }

  ParseResult result;
  if (auto it = cell(0, n - 1).find(grammar.start); it != cell(0, n - 1).end()) result.parses = it->second;

  if (result.parses.empty()) {
    // Best product cover of [0, n) by any nonterminal entries.
    std::vector<double> best(static_cast<std::size_t>(n + 1), -1.0);
    std::vector<NodePtr> piece(static_cast<std::size_t>(n + 1));
    std::vector<int> from(static_cast<std::size_t>(n + 1), -1);
    best[0] = 1.0;
    for (int j = 1; j <= n; ++j) {
      for (int i = 0; i < j; ++i) {
        if (best[static_cast<std::size_t>(i)] < 0.0) continue;
        for (const auto& [nt, entries] : cell(i, j - 1)) {
          if (entries.empty()) continue;
          const double p = best[static_cast<std::size_t>(i)] * entries.front()->probability;
          if (p > best[static_cast<std::size_t>(j)]) {
            best[static_cast<std::size_t>(j)] = p;
            piece[static_cast<std::size_t>(j)] = entries.front();
            from[static_cast<std::size_t>(j)] = i;
          }
        }
      }
    }
    if (best[static_cast<std::size_t>(n)] >= 0.0) {
      for (int j = n; j > 0; j = from[static_cast<std::size_t>(j)]) {
        result.partial_cover.push_back(piece[static_cast<std::size_t>(j)]);
      }
      std::reverse(result.partial_cover.begin(), result.partial_cover.end());
    }
  }
  result.oracle_calls = cache.oracle_calls();
  return result;
}

namespace {

struct Edge {
  int from;
  Relation relation;
  int to;
};

void collect(const ParseNode& node, std::map<int, const ParseNode*>& terminals, std::vector<Edge>& edges) {
  if (node.terminal) {
    terminals[node.first_segment] = &node;
    return;
  }
  edges.push_back({node.attach_from, node.relation, node.attach_to});
  collect(*node.head, terminals, edges);
  collect(*node.dependent, terminals, edges);
}

SrtNode build(int segment, const std::map<int, const ParseNode*>& terminals, const std::vector<Edge>& edges) {
  const ParseNode& t = *terminals.at(segment);
  SrtNode node;
  node.label = t.symbol;
  for (int s = t.first_stroke; s <= t.last_stroke; ++s) node.strokes.push_back(s);
  for (const auto& e : edges) {
    if (e.from == segment) node.add_child(e.relation, build(e.to, terminals, edges));
  }
  return node;
}

}  // namespace

SrtNode parse_to_srt(const ParseNode& root) {
  std::map<int, const ParseNode*> terminals;
  std::vector<Edge> edges;
  collect(root, terminals, edges);
  return canonicalize(build(root.components.left(), terminals, edges));
}

std::string emit_latex(const ParseNode& root) { return srt_to_latex(parse_to_srt(root)); }

}  // namespace hmer
