#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "hmer/decode.hpp"
#include "hmer/error.hpp"
#include "hmer/loss.hpp"
#include "support.hpp"

using namespace hmer;
using hmer::test::ink_of;

namespace {

const ClassInventory kInv({"x", "y", "z"});

std::vector<FrameSpan> spans_for(const std::vector<int>& stroke_lengths) {
  std::vector<FrameSpan> spans;
  int t = 0;
  for (std::size_t i = 0; i < stroke_lengths.size(); ++i) {
    if (i > 0) spans.push_back({SpanKind::kOffStroke, static_cast<int>(i), t, t + 1}), ++t;
    spans.push_back({SpanKind::kStroke, static_cast<int>(i), t, t + stroke_lengths[i]});
    t += stroke_lengths[i];
  }
  return spans;
}

// One off-stroke frame between two one-frame strokes; `row` fills frame 1.
Posteriors boundary_posteriors(const std::vector<std::pair<int, double>>& row) {
  Posteriors y = Posteriors::Constant(3, kInv.size(), 0.0);
  y(0, kInv.symbol_index("x")) = 1.0;
  y(2, kInv.symbol_index("y")) = 1.0;
  for (const auto& [k, p] : row) y(1, k) = p;
  return y;
}

BoundaryDecision decide(const Posteriors& y, BoundaryRule rule) {
  const auto d = classify_offstrokes(y, spans_for({1, 1}), kInv, 3, rule);
  REQUIRE(d.size() == 1);
  return d[0];
}

int rel(Relation r) { return kInv.relation_index(r); }

}  // namespace

TEST_CASE("classify_offstrokes examples under both rules") {
  for (auto rule : {BoundaryRule::kLiteral, BoundaryRule::kSymbolAware}) {
    const auto right = decide(boundary_posteriors({{rel(Relation::kRight), 0.6}, {0, 0.3}, {1, 0.1}}), rule);
    CHECK(right.decided == Relation::kRight);
    CHECK(right.offstroke_index == 1);
    CHECK(right.blank_score == 0.3);
    CHECK(right.score(Relation::kRight) == 0.6);

    const auto blank = decide(boundary_posteriors({{rel(Relation::kSup), 0.4}, {0, 0.5}, {1, 0.1}}), rule);
    CHECK(blank.is_blank());

    const auto tie = decide(boundary_posteriors({{rel(Relation::kSub), 0.45}, {0, 0.45}, {1, 0.1}}), rule);
    CHECK(tie.is_blank());
  }
}

TEST_CASE("symbol-dominated off-strokes are blank under the symbol-aware rule") {
  const auto y = boundary_posteriors({{rel(Relation::kRight), 2e-7}, {0, 1e-7}, {kInv.symbol_index("x"), 1.0 - 3e-7}});
  CHECK(decide(y, BoundaryRule::kLiteral).decided == Relation::kRight);
  CHECK(decide(y, BoundaryRule::kSymbolAware).is_blank());
}

TEST_CASE("alternatives keep the top relations in order") {
  const auto d = decide(boundary_posteriors({{rel(Relation::kRight), 0.3},
                                             {rel(Relation::kSup), 0.25},
                                             {rel(Relation::kSub), 0.2},
                                             {rel(Relation::kAbove), 0.05},
                                             {0, 0.2}}),
                        BoundaryRule::kLiteral);
  REQUIRE(d.alternatives.size() == 3);
  CHECK(d.alternatives[0].relation == Relation::kRight);
  CHECK(d.alternatives[1].relation == Relation::kSup);
  CHECK(d.alternatives[2].relation == Relation::kSub);
}

TEST_CASE("decisions are invariant under monotone rescaling") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    Posteriors y = test::softmax(test::random_logits(3, kInv.size(), rng, 2.0));
    const auto base = decide(y, BoundaryRule::kLiteral);
    Posteriors scaled = y;
    const double a = 0.1 + u(rng);
    for (int k = 0; k < kInv.size(); ++k) {
      if (k == 0 || kInv.is_relation_class(k)) scaled(1, k) = a * std::pow(y(1, k), 1.7) + 1e-3;
    }
    CHECK(decide(scaled, BoundaryRule::kLiteral).decided == base.decided);
  }
}

TEST_CASE("classify_segments aggregation") {
  Posteriors one = Posteriors::Constant(1, kInv.size(), 0.0);
  one(0, kInv.symbol_index("x")) = 0.7;
  one(0, kInv.symbol_index("y")) = 0.2;
  one(0, kInv.symbol_index("z")) = 0.05;
  const auto segs = classify_segments(one, spans_for({1}), {}, kInv, 5);
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].candidates[0].label == "x");
  CHECK(segs[0].candidates[0].probability == doctest::Approx(0.7 / 0.95));
  CHECK(segs[0].candidates.size() == 3);

  Posteriors two = Posteriors::Constant(2, kInv.size(), 0.0);
  two(0, kInv.symbol_index("x")) = 0.9;
  two(1, kInv.symbol_index("x")) = 0.4;
  two(1, kInv.symbol_index("y")) = 0.45;
  const auto s2 = classify_segments(two, spans_for({2}), {}, kInv, 5);
  CHECK(s2[0].candidates[0].label == "x");
  CHECK(s2[0].candidates[0].probability == doctest::Approx(0.9 / 1.35));

  const auto top1 = classify_segments(two, spans_for({2}), {}, kInv, 1);
  CHECK(top1[0].candidates.size() == 1);
}

TEST_CASE("lattice extremes") {
  std::mt19937_64 rng(6);
  const auto spans = spans_for({2, 2, 2, 2});
  Posteriors y = test::softmax(test::random_logits(11, kInv.size(), rng));
  for (int t : {2, 5, 8}) {
    y.row(t).setZero();
    y(t, 0) = 1.0;
  }
  const auto merged = build_lattice(y, spans, kInv);
  CHECK(merged.segments.size() == 1);
  CHECK(merged.boundaries.empty());
  for (int t : {2, 5, 8}) {
    y.row(t).setZero();
    y(t, rel(Relation::kRight)) = 1.0;
  }
  const auto split = build_lattice(y, spans, kInv);
  CHECK(split.segments.size() == 4);
  CHECK(split.boundaries.size() == 3);
  CHECK_NOTHROW(split.check_invariants(4));
}

TEST_CASE("a two-stroke symbol yields no boundary") {
  // x (2 strokes) Right y Sup z; frames: s0 o1 s1 o2 s2 o3 s3
  const auto spans = spans_for({1, 1, 1, 1});
  Posteriors y = Posteriors::Constant(7, kInv.size(), 0.0);
  y(0, kInv.symbol_index("x")) = 1.0;
  y(1, 0) = 1.0;
  y(2, kInv.symbol_index("x")) = 1.0;
  y(3, rel(Relation::kRight)) = 1.0;
  y(4, kInv.symbol_index("y")) = 1.0;
  y(5, rel(Relation::kSup)) = 1.0;
  y(6, kInv.symbol_index("z")) = 1.0;
  const auto lattice = build_lattice(y, spans, kInv);
  REQUIRE(lattice.segments.size() == 3);
  CHECK(lattice.segments[0].first_stroke == 0);
  CHECK(lattice.segments[0].last_stroke == 1);
  CHECK(lattice.segments[0].candidates[0].label == "x");
  CHECK(lattice.segments[2].candidates[0].label == "z");
  REQUIRE(lattice.boundaries.size() == 2);
  CHECK(lattice.boundaries[0].decided == Relation::kRight);
  CHECK(lattice.boundaries[0].offstroke_index == 2);
  CHECK(lattice.boundaries[1].decided == Relation::kSup);
}

TEST_CASE("segments are the runs between non-blank decisions") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 7;
    const auto spans = spans_for(std::vector<int>(static_cast<std::size_t>(n), 2));
    const Posteriors y = test::softmax(test::random_logits(3 * n - 1, kInv.size(), rng, 2.0));
    const auto decisions = classify_offstrokes(y, spans, kInv);
    const auto lattice = build_lattice(y, spans, kInv);
    CHECK_NOTHROW(lattice.check_invariants(n));
    std::size_t cuts = 0;
    for (const auto& d : decisions) cuts += !d.is_blank();
    CHECK(lattice.segments.size() == cuts + 1);
    for (const auto& s : lattice.segments) {
      for (std::size_t c = 0; c < s.candidates.size(); ++c) {
        CHECK(s.candidates[c].probability > 0.0);
        CHECK(s.candidates[c].probability <= 1.0);
        if (c > 0) CHECK(s.candidates[c].probability <= s.candidates[c - 1].probability);
      }
    }
  }
}

TEST_CASE("check_invariants rejects a broken lattice") {
  CandidateLattice l;
  l.segments = {{0, 0, {}}, {2, 2, {}}};
  l.boundaries.resize(1);
  l.boundaries[0].offstroke_index = 2;
  CHECK_THROWS_AS(l.check_invariants(3), ContractError);
}

TEST_CASE("synthesize_pair_sequence geometry and lengths") {
  const Ink ink = ink_of({{{0, 0}, {0.2, 0.5}, {0.1, 1.0}},
                          {{0.3, 0.2}, {0.5, 0.2}},
                          {{0.6, 0}, {0.6, 1}},
                          {{0.8, 0.1}, {0.9, 0.9}, {1.0, 0.1}},
                          {{1.1, 0.5}, {1.3, 0.5}}});
  const FeatureSequence full = featurize(ink);
  const SegmentHypothesis s0{0, 0, {}}, s1{1, 1, {}}, s34{3, 4, {}};

  const PairSequence adjacent = synthesize_pair_sequence(ink, s0, s1);
  const auto& a = adjacent.features.frames[static_cast<std::size_t>(adjacent.connecting_frame)];
  const auto& b = full.frames[static_cast<std::size_t>(full.offstroke_frame(1))];
  CHECK(a.sin_dir == b.sin_dir);
  CHECK(a.cos_dir == b.cos_dir);
  CHECK(a.norm_dist == b.norm_dist);
  CHECK(adjacent.connecting_offstroke == 1);

  auto stroke_frames = [&](int s) {
    for (const auto& span : full.span_map)
      if (span.kind == SpanKind::kStroke && span.source_index == s) return span.length();
    return -1;
  };
  const PairSequence far = synthesize_pair_sequence(ink, s0, s34);
  CHECK(far.features.size() == stroke_frames(0) + 1 + stroke_frames(3) + 1 + stroke_frames(4));

  // Query order, not writing order: segment {3,4} first, then {0}.
  const PairSequence swapped = synthesize_pair_sequence(ink, s34, s0);
  const std::vector<int> order = {3, 4, 0};
  const FeatureSequence by_hand = featurize(select_strokes(ink, order));
  REQUIRE(swapped.features.size() == by_hand.size());
  CHECK(swapped.connecting_offstroke == 2);
  CHECK(swapped.connecting_frame == by_hand.offstroke_frame(2));
  for (int t = 0; t < by_hand.size(); ++t) {
    CHECK(swapped.features.frames[static_cast<std::size_t>(t)].norm_dist == by_hand.frames[static_cast<std::size_t>(t)].norm_dist);
  }

  CHECK_THROWS_AS(synthesize_pair_sequence(ink, {2, 1, {}}, s0), ContractError);
  CHECK_THROWS_AS(synthesize_pair_sequence(ink, s34, {4, 4, {}}), ContractError);
}

TEST_CASE("pair sequence relation equals the original pass on the same sub-ink") {
  const Ink ink = normalize(ink_of({{{0, 0}, {0.2, 1.0}}, {{0.4, 0.2}, {0.5, 0.8}}, {{0.7, 0}, {0.8, 1}}}));
  std::mt19937_64 rng(3);
  const Model m = init_model({1, 4, 4, kInv.size()}, rng);
  const PairSequence pair = synthesize_pair_sequence(ink, {0, 0, {}}, {1, 1, {}});
  const std::vector<int> order = {0, 1};
  const FeatureSequence sub = featurize(select_strokes(ink, order));
  const auto d1 = classify_offstrokes(forward(m, pair.features).posteriors, pair.features.span_map, kInv);
  const auto d2 = classify_offstrokes(forward(m, sub).posteriors, sub.span_map, kInv);
  CHECK(d1[0].relation_scores == d2[0].relation_scores);
  CHECK(d1[0].blank_score == d2[0].blank_score);
}

TEST_CASE("lattice_to_json field mapping") {
  const auto spans = spans_for({1, 1});
  const auto y = boundary_posteriors({{rel(Relation::kRight), 0.6}, {0, 0.3}, {1, 0.1}});
  const auto j = nlohmann::json::parse(lattice_to_json(build_lattice(y, spans, kInv)));
  REQUIRE(j["segments"].size() == 2);
  CHECK(j["segments"][1]["strokes"] == nlohmann::json::array({1, 1}));
  CHECK(j["segments"][0]["candidates"][0]["symbol"] == "x");
  CHECK(j["boundaries"][0]["decided"] == "Right");
  CHECK(j["boundaries"][0]["blank"] == 0.3);
  CHECK(j["boundaries"][0]["relation_scores"]["Right"] == 0.6);
}
