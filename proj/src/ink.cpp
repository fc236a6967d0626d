#include "hmer/ink.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hmer/error.hpp"

namespace hmer {

using nlohmann::json;

std::size_t Ink::point_count() const {
  std::size_t n = 0;
  for (const auto& s : strokes) n += s.size();
  return n;
}

InkFormat ink_format_from_string(std::string_view name) {
  if (name == "native" || name == "json") return InkFormat::kNative;
  if (name == "inkml") return InkFormat::kInkML;
  throw ConfigError("unknown ink format '" + std::string(name) + "'");
}

namespace {

int line_of(std::string_view text, std::size_t offset) {
  return 1 + static_cast<int>(std::count(text.begin(),
                                         text.begin() + std::min(offset, text.size()), '\n'));
}

void check_non_empty(const Ink& ink) {
  if (ink.strokes.empty()) throw ValidationError("ink has no strokes");
  for (std::size_t i = 0; i < ink.strokes.size(); ++i) {
    if (ink.strokes[i].empty()) {
      throw ValidationError("stroke " + std::to_string(i) + " has no points");
    }
  }
}

Ink parse_native(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ParseError("malformed native ink at line " +
                     std::to_string(line_of(document, e.byte)) + ", offset " +
                     std::to_string(e.byte) + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("strokes") || !doc["strokes"].is_array()) {
    throw ParseError("native ink must be an object with a 'strokes' array");
  }
  Ink ink;
  for (const auto& stroke : doc["strokes"]) {
    if (!stroke.is_array()) throw ParseError("stroke must be an array of points");
    Stroke s;
    s.reserve(stroke.size());
    for (const auto& p : stroke) {
      if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
        throw ParseError("point must be a [x, y] pair of numbers, got " + p.dump());
      }
      Point pt{p[0].get<double>(), p[1].get<double>()};
      if (!std::isfinite(pt.x) || !std::isfinite(pt.y)) {
        throw ParseError("non-finite coordinate in " + p.dump());
      }
      s.push_back(pt);
    }
    ink.strokes.push_back(std::move(s));
  }
  check_non_empty(ink);
  return ink;
}

bool parse_double(std::string_view token, double& out) {
  // from_chars rejects a leading '+', which InkML writers occasionally emit.
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  const char* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

Stroke parse_trace_body(std::string_view document, std::size_t body_begin,
                        std::string_view body) {
  Stroke stroke;
  std::size_t pos = 0;
  while (pos <= body.size()) {
    std::size_t comma = body.find(',', pos);
    if (comma == std::string_view::npos) comma = body.size();
    std::string_view point_text = body.substr(pos, comma - pos);

    std::vector<double> channels;
    std::size_t i = 0;
    while (i < point_text.size()) {
      while (i < point_text.size() && std::isspace(static_cast<unsigned char>(point_text[i]))) ++i;
      std::size_t j = i;
      while (j < point_text.size() && !std::isspace(static_cast<unsigned char>(point_text[j]))) ++j;
      if (j > i) {
        std::string_view token = point_text.substr(i, j - i);
        double v = 0.0;
        if (!parse_double(token, v)) {
          std::size_t offset = body_begin + pos + i;
          throw ParseError("non-numeric token '" + std::string(token) + "' in <trace> at line " +
                           std::to_string(line_of(document, offset)) + ", offset " +
                           std::to_string(offset));
        }
        channels.push_back(v);
      }
      i = j;
    }
    if (channels.size() == 1) {
      std::size_t offset = body_begin + pos;
      throw ParseError("trace point with a single channel at line " +
                       std::to_string(line_of(document, offset)));
    }
    if (channels.size() >= 2) stroke.push_back({channels[0], channels[1]});
    pos = comma + 1;
  }
  return stroke;
}

Ink parse_inkml(std::string_view document) {
  if (document.find("<ink") == std::string_view::npos) {
    throw ParseError("InkML document has no <ink> element");
  }
  Ink ink;
  std::size_t pos = 0;
  while (true) {
    std::size_t open = document.find("<trace", pos);
    if (open == std::string_view::npos) break;
    // Skip <traceFormat>, <traceGroup> and friends.
    char next = open + 6 < document.size() ? document[open + 6] : '\0';
    if (next != '>' && next != ' ' && next != '\t' && next != '\n' && next != '\r' && next != '/') {
      pos = open + 6;
      continue;
    }
    std::size_t tag_end = document.find('>', open);
    if (tag_end == std::string_view::npos) {
      throw ParseError("unterminated <trace> tag at line " + std::to_string(line_of(document, open)));
    }
    if (document[tag_end - 1] == '/') {
      throw ParseError("empty <trace/> at line " + std::to_string(line_of(document, open)));
    }
    std::size_t close = document.find("</trace>", tag_end);
    if (close == std::string_view::npos) {
      throw ParseError("missing </trace> for trace at line " + std::to_string(line_of(document, open)));
    }
    std::string_view body = document.substr(tag_end + 1, close - tag_end - 1);
    ink.strokes.push_back(parse_trace_body(document, tag_end + 1, body));
    pos = close + 8;
  }
  check_non_empty(ink);
  return ink;
}

}  // namespace

Ink parse_ink(std::string_view document, InkFormat format) {
  return format == InkFormat::kNative ? parse_native(document) : parse_inkml(document);
}

std::string to_native_json(const Ink& ink) {
  json strokes = json::array();
  for (const auto& s : ink.strokes) {
    json pts = json::array();
    for (const auto& p : s) pts.push_back({p.x, p.y});
    strokes.push_back(std::move(pts));
  }
  return json{{"strokes", std::move(strokes)}}.dump();
}

Ink normalize(const Ink& ink) {
  double min_x = std::numeric_limits<double>::infinity();
  double min_y = min_x;
  double max_x = -min_x;
  double max_y = -min_x;
  for (const auto& s : ink.strokes) {
    for (const auto& p : s) {
      min_x = std::min(min_x, p.x);
      min_y = std::min(min_y, p.y);
      max_x = std::max(max_x, p.x);
      max_y = std::max(max_y, p.y);
    }
  }
  if (ink.point_count() == 0) return ink;

  const double height = max_y - min_y;
  const double width = max_x - min_x;
  double scale = 1.0;
  if (height > 0.0) {
    scale = 1.0 / height;
  } else if (width > 0.0) {
    scale = 1.0 / width;
  }
  Ink out = ink;
  for (auto& s : out.strokes) {
    for (auto& p : s) {
      p.x = (p.x - min_x) * scale;
      p.y = (p.y - min_y) * scale;
    }
  }
  return out;
}

namespace {

double segment_distance(const Point& p, const Point& a, const Point& b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 0.0) {
    t = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0);
  }
  return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

void ramer_recurse(std::span<const Point> points, std::size_t first, std::size_t last,
                   double epsilon, std::vector<bool>& keep) {
  if (last <= first + 1) return;
  double max_dist = -1.0;
  std::size_t index = first;
  for (std::size_t i = first + 1; i < last; ++i) {
    double d = segment_distance(points[i], points[first], points[last]);
    if (d > max_dist) {
      max_dist = d;
      index = i;
    }
  }
  if (max_dist > epsilon) {
    keep[index] = true;
    ramer_recurse(points, first, index, epsilon, keep);
    ramer_recurse(points, index, last, epsilon, keep);
  }
}

}  // namespace

std::vector<Point> ramer_simplify(std::span<const Point> points, double epsilon) {
  if (points.size() <= 2) return {points.begin(), points.end()};
  std::vector<bool> keep(points.size(), false);
  keep.front() = keep.back() = true;
  ramer_recurse(points, 0, points.size() - 1, epsilon, keep);
  std::vector<Point> out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (keep[i]) out.push_back(points[i]);
  }
  return out;
}

namespace {

FeatureVector direction_feature(const Point& from, const Point& to, double pen_state) {
  FeatureVector f;
  f.pen_state = pen_state;
  const double dx = to.x - from.x;
  const double dy = to.y - from.y;
  const double len = std::hypot(dx, dy);
  if (len > 0.0) {
    f.sin_dir = dy / len;
    f.cos_dir = dx / len;
    f.norm_dist = len;
  }
  return f;
}

}  // namespace

FeatureSequence featurize(const Ink& ink, double epsilon) {
  FeatureSequence seq;
  Point previous_end{};
  for (std::size_t si = 0; si < ink.strokes.size(); ++si) {
    const auto points = ramer_simplify(ink.strokes[si], epsilon);
    if (si > 0) {
      const int at = seq.size();
      seq.frames.push_back(direction_feature(previous_end, points.front(), 0.0));
      seq.span_map.push_back({SpanKind::kOffStroke, static_cast<int>(si), at, at + 1});
    }
    const int begin = seq.size();
    for (std::size_t k = 0; k < points.size(); ++k) {
      const Point& before = points[k == 0 ? 0 : k - 1];
      const Point& after = points[k + 1 == points.size() ? k : k + 1];
      seq.frames.push_back(direction_feature(before, after, 1.0));
    }
    seq.span_map.push_back({SpanKind::kStroke, static_cast<int>(si), begin, seq.size()});
    previous_end = points.back();
  }
  return seq;
}

int FeatureSequence::offstroke_frame(int stroke_index) const {
  for (const auto& span : span_map) {
    if (span.kind == SpanKind::kOffStroke && span.source_index == stroke_index) return span.begin;
  }
  throw ContractError("no off-stroke precedes stroke " + std::to_string(stroke_index));
}

void FeatureSequence::check_invariants() const {
  if (span_map.empty()) throw ContractError("empty span map");
  int cursor = 0;
  for (std::size_t i = 0; i < span_map.size(); ++i) {
    const auto& span = span_map[i];
    const SpanKind expected = i % 2 == 0 ? SpanKind::kStroke : SpanKind::kOffStroke;
    if (span.kind != expected) throw ContractError("span kinds do not alternate at span " + std::to_string(i));
    if (span.begin != cursor || span.end <= span.begin) {
      throw ContractError("span " + std::to_string(i) + " does not continue the partition");
    }
    if (span.kind == SpanKind::kOffStroke && span.length() != 1) {
      throw ContractError("off-stroke span " + std::to_string(i) + " is not a single frame");
    }
    cursor = span.end;
  }
  if (span_map.back().kind != SpanKind::kStroke) throw ContractError("span map ends with an off-stroke");
  if (cursor != size()) throw ContractError("span map does not cover every frame");
}

Ink select_strokes(const Ink& ink, std::span<const int> stroke_order) {
  Ink out;
  out.strokes.reserve(stroke_order.size());
  for (int i : stroke_order) {
    if (i < 0 || static_cast<std::size_t>(i) >= ink.strokes.size()) {
      throw ContractError("stroke index " + std::to_string(i) + " out of range");
    }
    out.strokes.push_back(ink.strokes[static_cast<std::size_t>(i)]);
  }
  return out;
}

}  // namespace hmer
