#pragma once

#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "hmer/dataset.hpp"
#include "hmer/ink.hpp"
#include "hmer/srt.hpp"

namespace hmer {

// Strokes drawn inside a unit-height box, y pointing down; `aspect` is the
// box width over its height.
struct GlyphTemplate {
  std::vector<Stroke> strokes;
  double aspect = 0.6;
};

// Placement of a child box relative to its parent box, in parent heights.
// Right/Sup/Sub: dx is the horizontal gap after the parent, dy the offset of
// the child's top from the parent's top. Above/Below: dx is unused and dy is
// the vertical gap to the fraction bar.
struct RelationLayout {
  double dx = 0.0;
  double dy = 0.0;
  double scale = 1.0;
};

struct CorpusSpec {
  std::map<std::string, GlyphTemplate> glyphs;
  std::vector<std::string> atoms;  // symbols that may stand alone; default all
  std::string fraction_bar = "-";
  std::vector<Relation> relations = {Relation::kRight, Relation::kSup, Relation::kSub, Relation::kAbove,
                                     Relation::kBelow};
  std::map<Relation, RelationLayout> layout;
  int count = 50;
  int min_symbols = 1;
  int max_symbols = 5;
  int max_depth = 2;
  double jitter = 0.02;        // point noise, in symbol heights
  double placement_jitter = 0.05;
  double scale_jitter = 0.1;
  int points_per_segment = 6;  // densification of template segments
  std::string name_prefix = "synth";
};

// Throws ConfigError for unknown symbols, unsupported relations or bad ranges.
CorpusSpec parse_corpus_spec(std::string_view document);
// Five glyphs 1, 2, x, - and + with the default layout.
CorpusSpec default_corpus_spec();

std::vector<Sample> generate_corpus(const CorpusSpec& spec, std::uint64_t seed);

}  // namespace hmer
