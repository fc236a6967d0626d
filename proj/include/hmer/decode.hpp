#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hmer/ink.hpp"
#include "hmer/inventory.hpp"
#include "hmer/net.hpp"

namespace hmer {

inline constexpr int kDefaultTopSymbols = 5;
inline constexpr int kDefaultTopRelations = 3;

struct RelationScore {
  Relation relation;
  double probability;
};

// Relation decision at one off-stroke frame. `offstroke_index` is i for the
// off-stroke between strokes i-1 and i of the classified sequence.
struct BoundaryDecision {
  int offstroke_index = 0;
  std::array<double, kRelationCount> relation_scores{};
  double blank_score = 0.0;
  std::optional<Relation> decided;  // nullopt means blank
  std::vector<RelationScore> alternatives;  // top relations, descending

  bool is_blank() const { return !decided.has_value(); }
  double score(Relation r) const { return relation_scores[static_cast<std::size_t>(r)]; }
};

struct SymbolCandidate {
  int class_index = 0;
  std::string label;
  double probability = 0.0;
};

// Strokes first..last (inclusive) of the classified sequence form one symbol.
struct SegmentHypothesis {
  int first_stroke = 0;
  int last_stroke = 0;
  std::vector<SymbolCandidate> candidates;  // descending

  int stroke_count() const { return last_stroke - first_stroke + 1; }
};

struct CandidateLattice {
  std::vector<SegmentHypothesis> segments;
  std::vector<BoundaryDecision> boundaries;  // between segments i and i+1

  // Throws ContractError when segments do not partition the strokes in order.
  void check_invariants(int stroke_count) const;
};

// kLiteral: the best relation wins only when its probability exceeds the
// blank probability; exact ties go to blank.
// kSymbolAware: as kLiteral, except that a frame whose most probable class is
// a symbol is read as lying inside that symbol and decides blank. A trained
// network tends to fire a multi-stroke symbol's label at the off-stroke
// between its strokes, where relation and blank are then both near zero.
enum class BoundaryRule { kLiteral, kSymbolAware };

// One decision per off-stroke.
std::vector<BoundaryDecision> classify_offstrokes(const Posteriors& posteriors,
                                                  std::span<const FrameSpan> span_map,
                                                  const ClassInventory& inventory,
                                                  int top_relations = kDefaultTopRelations,
                                                  BoundaryRule rule = BoundaryRule::kSymbolAware);

// Segments are the maximal stroke runs between non-blank decisions. Each
// symbol class scores the maximum of its posterior over the segment's frames
// (its strokes and the off-strokes inside it); the scores are renormalized
// over symbol classes.
std::vector<SegmentHypothesis> classify_segments(const Posteriors& posteriors,
                                                 std::span<const FrameSpan> span_map,
                                                 std::span<const BoundaryDecision> decisions,
                                                 const ClassInventory& inventory,
                                                 int top_symbols = kDefaultTopSymbols);

CandidateLattice build_lattice(const Posteriors& posteriors, std::span<const FrameSpan> span_map,
                               const ClassInventory& inventory, int top_symbols = kDefaultTopSymbols,
                               int top_relations = kDefaultTopRelations,
                               BoundaryRule rule = BoundaryRule::kSymbolAware);

struct PairSequence {
  FeatureSequence features;
  int connecting_frame = 0;
  // Index of the connecting off-stroke in the synthesized sequence.
  int connecting_offstroke = 0;
};

// Strokes of segment A, one pen-up frame from A's last point to B's first
// point, then the strokes of segment B. `ink` must already be normalized.
PairSequence synthesize_pair_sequence(const Ink& ink, const SegmentHypothesis& a,
                                      const SegmentHypothesis& b, double epsilon = kDefaultEpsilon);

std::string lattice_to_json(const CandidateLattice& lattice, int indent = -1);

}  // namespace hmer
