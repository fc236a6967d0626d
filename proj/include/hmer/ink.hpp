#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hmer {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

using Stroke = std::vector<Point>;

// Digital ink: strokes in writing order. Index i of `strokes` is stroke s_i.
struct Ink {
  std::vector<Stroke> strokes;

  std::size_t point_count() const;
  friend bool operator==(const Ink&, const Ink&) = default;
};

enum class InkFormat { kNative, kInkML };

InkFormat ink_format_from_string(std::string_view name);

// Parses a document. Throws ParseError on malformed input (the message names
// the offending token and line) and ValidationError on empty ink.
Ink parse_ink(std::string_view document, InkFormat format);

// Native wire format: {"strokes": [[[x,y],...],...]}.
std::string to_native_json(const Ink& ink);

// Translates the bounding box to the origin and scales uniformly so its
// height is 1 (width when the height is 0; translation only for a point).
Ink normalize(const Ink& ink);

// Ramer simplification with a point-to-segment distance test. Always keeps
// the first and last point.
std::vector<Point> ramer_simplify(std::span<const Point> points, double epsilon);

inline constexpr double kDefaultEpsilon = 0.02;

struct FeatureVector {
  double sin_dir = 0.0;
  double cos_dir = 1.0;
  double norm_dist = 0.0;
  double pen_state = 0.0;
};

enum class SpanKind { kStroke, kOffStroke };

// Frames [begin, end) of the feature sequence produced by one stroke or by
// the off-stroke o_i that precedes stroke s_i (source_index = i).
struct FrameSpan {
  SpanKind kind = SpanKind::kStroke;
  int source_index = 0;
  int begin = 0;
  int end = 0;

  int length() const { return end - begin; }
  friend bool operator==(const FrameSpan&, const FrameSpan&) = default;
};

struct FeatureSequence {
  std::vector<FeatureVector> frames;
  std::vector<FrameSpan> span_map;

  int size() const { return static_cast<int>(frames.size()); }
  // Frame index of the single off-stroke frame before stroke `stroke_index`.
  int offstroke_frame(int stroke_index) const;
  // Throws ContractError if the span map invariants do not hold.
  void check_invariants() const;
};

// Builds the frame sequence: every stroke is Ramer-simplified, each retained
// point becomes a pen-down frame, and each gap between strokes becomes one
// pen-up frame.
FeatureSequence featurize(const Ink& ink, double epsilon = kDefaultEpsilon);

// Ink made of `ink.strokes[i]` for each i in `stroke_order`, in that order.
Ink select_strokes(const Ink& ink, std::span<const int> stroke_order);

}  // namespace hmer
