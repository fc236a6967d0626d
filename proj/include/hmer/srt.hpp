#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace hmer {

// Spatial relations. NoRel only appears on linearized paths, never as a tree
// link. The numeric order is the order of the relation output classes.
enum class Relation : std::uint8_t { kAbove, kBelow, kSub, kSup, kRight, kInside, kNoRel };

inline constexpr int kRelationCount = 7;
inline constexpr std::array<Relation, 7> kAllRelations = {
    Relation::kAbove, Relation::kBelow, Relation::kSub,    Relation::kSup,
    Relation::kRight, Relation::kInside, Relation::kNoRel};
// The six relations a tree link (and a grammar rule) may carry.
inline constexpr std::array<Relation, 6> kLinkRelations = {
    Relation::kAbove, Relation::kBelow, Relation::kSub,
    Relation::kSup,   Relation::kRight, Relation::kInside};

std::string_view relation_name(Relation r);
std::optional<Relation> relation_from_name(std::string_view name);

struct SrtChild;

// Symbol relation tree node: a symbol, the strokes that form it, and its
// outgoing relation links.
struct SrtNode {
  std::string label;
  std::vector<int> strokes;  // sorted
  std::vector<SrtChild> children;

  int first_stroke() const { return strokes.front(); }
  const SrtNode* child(Relation r) const;
  SrtNode& add_child(Relation r, SrtNode child);
};

struct SrtChild {
  Relation relation;
  SrtNode node;
};

bool operator==(const SrtNode& a, const SrtNode& b);

// Throws ValidationError on duplicate strokes, non-contiguous stroke
// coverage, NoRel links, repeated relations or empty nodes.
void validate_srt(const SrtNode& root);

SrtNode parse_srt(std::string_view document);
std::string srt_to_json(const SrtNode& root, int indent = -1);

std::size_t srt_node_count(const SrtNode& root);
std::size_t srt_stroke_count(const SrtNode& root);

// Children sorted by the fixed order Above, Below, Inside, Sub, Sup, Right so
// that equality does not depend on how the tree was assembled.
SrtNode canonicalize(const SrtNode& root);
bool srt_equal(const SrtNode& a, const SrtNode& b);
// Same as srt_equal but ignores symbol labels.
bool srt_structure_equal(const SrtNode& a, const SrtNode& b);

struct PathNode {
  std::string label;
  std::vector<int> strokes;

  friend bool operator==(const PathNode&, const PathNode&) = default;
};

// Consecutive symbols with the relation between each neighbouring pair.
struct LabeledPath {
  std::vector<PathNode> nodes;
  std::vector<Relation> relations;  // nodes.size() - 1 entries

  // Strokes of every node in path order.
  std::vector<int> stroke_order() const;
  friend bool operator==(const LabeledPath&, const LabeledPath&) = default;
};

std::vector<LabeledPath> derive_paths_all(const SrtNode& root);
LabeledPath derive_path_writing_order(const SrtNode& root);
LabeledPath extract_random_path(const SrtNode& root, std::mt19937_64& rng);

class ClassInventory;

// CTC targets of a path plus the per-stroke / per-off-stroke reference used by
// the constraint loss and the evaluation: stroke k of the path carries its
// symbol class; off-stroke k (between path strokes k and k+1) carries the
// relation class between two symbols, or -1 inside a symbol.
struct PathTargets {
  std::vector<int> labels;
  std::vector<int> stroke_labels;
  std::vector<int> offstroke_labels;
};

PathTargets path_targets(const LabeledPath& path, const ClassInventory& inventory);

// Emits space-separated LaTeX tokens. Throws EmissionError for relations the
// symbol cannot carry.
std::string srt_to_latex(const SrtNode& root);

// Re-tokenizes LaTeX into single-space-separated tokens.
std::string normalize_latex(std::string_view latex);

bool is_dominant_symbol(std::string_view label);
bool is_fraction_bar(std::string_view label);

}  // namespace hmer
