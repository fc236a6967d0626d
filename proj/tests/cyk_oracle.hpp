#pragma once

// Exhaustive derivation enumeration for checking the CYK chart. Every
// derivation of every span is rebuilt from scratch; nothing is memoized or
// pruned. Attachment uses the library's component functions so both sides
// score the same derivation space.

#include <algorithm>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "hmer/grammar.hpp"

namespace hmer::test {

struct Derivation {
  double probability = 0.0;
  Components components;
};

class DerivationEnumerator {
 public:
  DerivationEnumerator(const Grammar& g, const CandidateLattice& lattice, const RelationOracle& oracle,
                       std::set<Relation> order_free = {Relation::kAbove, Relation::kBelow})
      : g_(g), lattice_(lattice), oracle_(oracle), order_free_(std::move(order_free)) {}

  using Emit = std::function<void(const Derivation&)>;

  void enumerate(int nt, int first, int last, const Emit& emit) const {
    if (first == last) {
      const auto& seg = lattice_.segments[static_cast<std::size_t>(first)];
      for (const auto& rule : g_.terminal_rules) {
        if (rule.lhs != nt) continue;
        for (const auto& cand : seg.candidates) {
          if (cand.label != rule.token) continue;
          Derivation d;
          d.probability = cand.probability;
          d.components.baseline = {first};
          d.components.has_main = is_dominant_symbol(cand.label);
          emit(d);
        }
      }
      return;
    }
    for (const auto& rule : g_.binary_rules) {
      if (rule.lhs != nt) continue;
      for (int split = first; split < last; ++split) {
        combine(rule, first, split, split + 1, last, emit);
        if (order_free_.count(rule.relation)) combine(rule, split + 1, last, first, split, emit);
      }
    }
  }

  // Best start-symbol probability over the full span; -1 when none exists.
  double best(long* count = nullptr) const {
    double top = -1.0;
    long n = 0;
    enumerate(g_.start, 0, static_cast<int>(lattice_.segments.size()) - 1, [&](const Derivation& d) {
      top = std::max(top, d.probability);
      ++n;
    });
    if (count) *count = n;
    return top;
  }

 private:
  std::vector<RelationScore> scores(int from, int to) const {
    if (to == from + 1 && static_cast<std::size_t>(from) < lattice_.boundaries.size()) {
      return lattice_.boundaries[static_cast<std::size_t>(from)].alternatives;
    }
    return oracle_.score(lattice_, from, to);
  }

  void combine(const BinaryRule& rule, int hf, int hl, int df, int dl, const Emit& emit) const {
    enumerate(rule.head, hf, hl, [&](const Derivation& head) {
      const int from = outbound_terminal(head.components, rule.relation);
      if (from < 0) return;
      enumerate(rule.dependent, df, dl, [&](const Derivation& dep) {
        const int to = inbound_terminal(dep.components);
        for (const auto& s : scores(from, to)) {
          if (s.relation != rule.relation) continue;
          Derivation d;
          d.probability = head.probability * dep.probability * s.probability;
          d.components = compose_components(head.components, dep.components, rule.relation, from);
          emit(d);
        }
      });
    });
  }

  const Grammar& g_;
  const CandidateLattice& lattice_;
  const RelationOracle& oracle_;
  std::set<Relation> order_free_;
};

// Random relation alternatives: `k` distinct link relations with random
// probabilities, descending.
inline std::vector<RelationScore> random_relation_scores(std::mt19937_64& rng, int k) {
  std::vector<Relation> rels(kLinkRelations.begin(), kLinkRelations.end());
  std::shuffle(rels.begin(), rels.end(), rng);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  std::vector<RelationScore> out;
  for (int i = 0; i < k; ++i) out.push_back({rels[static_cast<std::size_t>(i)], u(rng)});
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.probability > b.probability; });
  return out;
}

// A lattice of one-stroke segments with random candidates drawn from
// `alphabet` and random boundary relations, plus a table-backed oracle.
struct RandomParseProblem {
  CandidateLattice lattice;
  std::map<std::pair<int, int>, std::vector<RelationScore>> pair_scores;

  FunctionRelationOracle oracle() const {
    return FunctionRelationOracle([this](const CandidateLattice&, int from, int to) {
      auto it = pair_scores.find({from, to});
      return it == pair_scores.end() ? std::vector<RelationScore>{} : it->second;
    });
  }
};

inline RandomParseProblem random_parse_problem(std::mt19937_64& rng, int segments,
                                               const std::vector<std::string>& alphabet, int max_candidates,
                                               int relations_per_pair) {
  RandomParseProblem p;
  std::uniform_int_distribution<int> ncand(1, max_candidates);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int i = 0; i < segments; ++i) {
    SegmentHypothesis seg;
    seg.first_stroke = seg.last_stroke = i;
    std::vector<std::string> labels = alphabet;
    std::shuffle(labels.begin(), labels.end(), rng);
    const int n = std::min<int>(ncand(rng), static_cast<int>(labels.size()));
    for (int c = 0; c < n; ++c) seg.candidates.push_back({0, labels[static_cast<std::size_t>(c)], u(rng)});
    std::sort(seg.candidates.begin(), seg.candidates.end(),
              [](const auto& a, const auto& b) { return a.probability > b.probability; });
    p.lattice.segments.push_back(seg);
    if (i > 0) {
      BoundaryDecision b;
      b.offstroke_index = i;
      b.alternatives = random_relation_scores(rng, relations_per_pair);
      b.decided = b.alternatives.front().relation;
      p.lattice.boundaries.push_back(b);
    }
  }
  for (int a = 0; a < segments; ++a) {
    for (int b = 0; b < segments; ++b) {
      if (a != b) p.pair_scores[{a, b}] = random_relation_scores(rng, relations_per_pair);
    }
  }
  return p;
}

}  // namespace hmer::test
