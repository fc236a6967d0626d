#include "hmer/decode.hpp"

#include <algorithm>
#include <numeric>

#include <nlohmann/json.hpp>

#include "hmer/error.hpp"

namespace hmer {

std::vector<BoundaryDecision> classify_offstrokes(const Posteriors& posteriors,
                                                  std::span<const FrameSpan> span_map,
                                                  const ClassInventory& inventory, int top_relations,
                                                  BoundaryRule rule) {
  if (posteriors.cols() != inventory.size()) throw ContractError("posterior width does not match the inventory");
  std::vector<BoundaryDecision> out;
  for (const auto& span : span_map) {
    if (span.kind != SpanKind::kOffStroke) continue;
    if (span.begin < 0 || span.begin >= posteriors.rows()) throw ContractError("off-stroke frame out of range");
    BoundaryDecision d;
    d.offstroke_index = span.source_index;
    d.blank_score = posteriors(span.begin, ClassInventory::kBlank);
    double best = -1.0;
    Relation best_rel = Relation::kNoRel;
    for (Relation r : kAllRelations) {
      const double p = posteriors(span.begin, inventory.relation_index(r));
      d.relation_scores[static_cast<std::size_t>(r)] = p;
      if (p > best) {
        best = p;
        best_rel = r;
      }
      d.alternatives.push_back({r, p});
    }
    bool inside_symbol = false;
    if (rule == BoundaryRule::kSymbolAware && inventory.symbol_count() > 0) {
      const double top_symbol = posteriors.row(span.begin).segment(inventory.symbol_begin(), inventory.symbol_count()).maxCoeff();
      inside_symbol = top_symbol > std::max(best, d.blank_score);
    }
    if (best > d.blank_score && !inside_symbol) d.decided = best_rel;
    std::stable_sort(d.alternatives.begin(), d.alternatives.end(),
                     [](const RelationScore& a, const RelationScore& b) { return a.probability > b.probability; });
    d.alternatives.resize(std::min<std::size_t>(d.alternatives.size(), static_cast<std::size_t>(std::max(top_relations, 0))));
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<SegmentHypothesis> classify_segments(const Posteriors& posteriors,
                                                 std::span<const FrameSpan> span_map,
                                                 std::span<const BoundaryDecision> decisions,
                                                 const ClassInventory& inventory, int top_symbols) {
  if (top_symbols < 1) throw ConfigError("top_symbols must be at least 1");
  std::vector<const FrameSpan*> strokes;
  for (const auto& span : span_map) {
    if (span.kind == SpanKind::kStroke) strokes.push_back(&span);
  }
  const int n = static_cast<int>(strokes.size());
  std::vector<const FrameSpan*> offstrokes(static_cast<std::size_t>(n), nullptr);  // by source index
  for (const auto& span : span_map) {
    if (span.kind == SpanKind::kOffStroke && span.source_index > 0 && span.source_index < n) {
      offstrokes[static_cast<std::size_t>(span.source_index)] = &span;
    }
  }
  std::vector<bool> splits_before(static_cast<std::size_t>(n), false);
  for (const auto& d : decisions) {
    if (d.offstroke_index <= 0 || d.offstroke_index >= n) throw ContractError("decision outside the stroke range");
    if (!d.is_blank()) splits_before[static_cast<std::size_t>(d.offstroke_index)] = true;
  }

  const int sym0 = inventory.symbol_begin();
  const int sym_n = inventory.symbol_count();
  std::vector<SegmentHypothesis> segments;
  int first = 0;
  for (int s = 1; s <= n; ++s) {
    if (s < n && !splits_before[static_cast<std::size_t>(s)]) continue;
    SegmentHypothesis seg;
    seg.first_stroke = first;
    seg.last_stroke = s - 1;
    Eigen::VectorXd score = Eigen::VectorXd::Zero(sym_n);
    auto take = [&](const FrameSpan& span) {
      for (int t = span.begin; t < span.end; ++t) {
        score = score.cwiseMax(posteriors.row(t).segment(sym0, sym_n).transpose());
      }
    };
    for (int k = first; k < s; ++k) {
      take(*strokes[static_cast<std::size_t>(k)]);
      if (k > first && offstrokes[static_cast<std::size_t>(k)]) take(*offstrokes[static_cast<std::size_t>(k)]);
    }
    const double total = score.sum();
    std::vector<int> order(static_cast<std::size_t>(sym_n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return score(a) > score(b); });
    for (int i = 0; i < std::min(top_symbols, sym_n); ++i) {
      const int c = order[static_cast<std::size_t>(i)];
      const double p = total > 0.0 ? score(c) / total : 1.0 / sym_n;
      if (p <= 0.0) break;
      seg.candidates.push_back({sym0 + c, inventory.symbols()[static_cast<std::size_t>(c)], p});
    }
    segments.push_back(std::move(seg));
    first = s;
  }
  return segments;
}

CandidateLattice build_lattice(const Posteriors& posteriors, std::span<const FrameSpan> span_map,
                               const ClassInventory& inventory, int top_symbols, int top_relations,
                               BoundaryRule rule) {
  auto decisions = classify_offstrokes(posteriors, span_map, inventory, top_relations, rule);
  CandidateLattice lattice;
  lattice.segments = classify_segments(posteriors, span_map, decisions, inventory, top_symbols);
  for (auto& d : decisions) {
    if (!d.is_blank()) lattice.boundaries.push_back(std::move(d));
  }
  return lattice;
}

void CandidateLattice::check_invariants(int stroke_count) const {
  if (segments.empty()) throw ContractError("lattice has no segments");
  if (boundaries.size() + 1 != segments.size()) throw ContractError("boundary count must be segment count - 1");
  int next = 0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    if (s.first_stroke != next || s.last_stroke < s.first_stroke) {
      throw ContractError("segments do not partition the strokes at segment " + std::to_string(i));
    }
    if (i > 0 && boundaries[i - 1].offstroke_index != s.first_stroke) {
      throw ContractError("boundary " + std::to_string(i - 1) + " is not at a segment start");
    }
    next = s.last_stroke + 1;
  }
  if (next != stroke_count) throw ContractError("segments do not cover every stroke");
}

PairSequence synthesize_pair_sequence(const Ink& ink, const SegmentHypothesis& a, const SegmentHypothesis& b,
                                      double epsilon) {
  if (a.stroke_count() < 1 || b.stroke_count() < 1) throw ContractError("empty stroke range");
  const bool overlap = !(a.last_stroke < b.first_stroke || b.last_stroke < a.first_stroke);
  if (overlap) throw ContractError("pair segments overlap");
  std::vector<int> order;
  for (int s = a.first_stroke; s <= a.last_stroke; ++s) order.push_back(s);
  for (int s = b.first_stroke; s <= b.last_stroke; ++s) order.push_back(s);
  PairSequence out;
  out.features = featurize(select_strokes(ink, order), epsilon);
  out.connecting_offstroke = a.stroke_count();
  out.connecting_frame = out.features.offstroke_frame(out.connecting_offstroke);
  return out;
}

std::string lattice_to_json(const CandidateLattice& lattice, int indent) {
  using nlohmann::json;
  json segments = json::array();
  for (const auto& s : lattice.segments) {
    json cands = json::array();
    for (const auto& c : s.candidates) cands.push_back({{"symbol", c.label}, {"probability", c.probability}});
    segments.push_back({{"strokes", {s.first_stroke, s.last_stroke}}, {"candidates", std::move(cands)}});
  }
  json boundaries = json::array();
  for (const auto& b : lattice.boundaries) {
    json scores = json::object();
    for (Relation r : kAllRelations) scores[std::string(relation_name(r))] = b.score(r);
    json alts = json::array();
    for (const auto& a : b.alternatives) alts.push_back({{"relation", relation_name(a.relation)}, {"probability", a.probability}});
    boundaries.push_back({{"offstroke", b.offstroke_index},
                          {"decided", b.decided ? json(relation_name(*b.decided)) : json("blank")},
                          {"blank", b.blank_score},
                          {"relation_scores", std::move(scores)},
                          {"alternatives", std::move(alts)}});
  }
  return json{{"segments", std::move(segments)}, {"boundaries", std::move(boundaries)}}.dump(indent);
}

}  // namespace hmer
