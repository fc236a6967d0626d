#include "hmer/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include <nlohmann/json.hpp>

#include "hmer/error.hpp"

namespace hmer {

using nlohmann::json;

namespace {

std::map<Relation, RelationLayout> default_layout() {
  return {{Relation::kRight, {0.3, 0.0, 1.0}},
          {Relation::kSup, {0.1, -0.3, 0.5}},
          {Relation::kSub, {0.1, 0.75, 0.5}},
          {Relation::kAbove, {0.0, 0.15, 0.7}},
          {Relation::kBelow, {0.0, 0.15, 0.7}}};
}

std::map<std::string, GlyphTemplate> default_glyphs() {
  return {
      {"1", {{{{0.2, 0.15}, {0.6, 0.0}, {0.6, 1.0}}}, 0.45}},
      {"2", {{{{0.05, 0.25}, {0.3, 0.0}, {0.75, 0.05}, {0.9, 0.3}, {0.05, 1.0}, {1.0, 1.0}}}, 0.6}},
      {"x", {{{{0.0, 0.0}, {1.0, 1.0}}, {{1.0, 0.0}, {0.0, 1.0}}}, 0.7}},
      {"-", {{{{0.0, 0.5}, {1.0, 0.5}}}, 0.7}},
      {"+", {{{{0.0, 0.5}, {1.0, 0.5}}, {{0.5, 0.0}, {0.5, 1.0}}}, 0.8}},
  };
}

bool has_relation(const CorpusSpec& spec, Relation r) {
  return std::find(spec.relations.begin(), spec.relations.end(), r) != spec.relations.end();
}

void validate(const CorpusSpec& spec) {
  if (spec.glyphs.empty()) throw ConfigError("corpus spec defines no glyphs");
  for (const auto& [name, g] : spec.glyphs) {
    if (g.strokes.empty()) throw ConfigError("glyph '" + name + "' has no strokes");
    for (const auto& s : g.strokes) {
      if (s.empty()) throw ConfigError("glyph '" + name + "' has an empty stroke");
    }
    if (!(g.aspect > 0.0)) throw ConfigError("glyph '" + name + "' needs a positive aspect");
  }
  if (spec.atoms.empty()) throw ConfigError("corpus spec has no atom symbols");
  for (const auto& a : spec.atoms) {
    if (!spec.glyphs.count(a)) throw ConfigError("unknown symbol '" + a + "' in atoms");
  }
  for (Relation r : spec.relations) {
    if (r == Relation::kInside || r == Relation::kNoRel) {
      throw ConfigError("relation " + std::string(relation_name(r)) + " is not supported by the generator");
    }
  }
  if (has_relation(spec, Relation::kAbove) != has_relation(spec, Relation::kBelow)) {
    throw ConfigError("Above and Below must be enabled together (fractions)");
  }
  if (has_relation(spec, Relation::kAbove) && !spec.glyphs.count(spec.fraction_bar)) {
    throw ConfigError("unknown symbol '" + spec.fraction_bar + "' for the fraction bar");
  }
  if (spec.count < 1) throw ConfigError("count must be at least 1");
  if (spec.min_symbols < 1 || spec.max_symbols < spec.min_symbols) {
    throw ConfigError("symbol range must satisfy 1 <= min_symbols <= max_symbols");
  }
  if (spec.max_depth < 0) throw ConfigError("max_depth must be non-negative");
  if (spec.points_per_segment < 1) throw ConfigError("points_per_segment must be at least 1");
  if (spec.jitter < 0.0 || spec.placement_jitter < 0.0 || spec.scale_jitter < 0.0 || spec.scale_jitter >= 1.0) {
    throw ConfigError("jitter values must be non-negative (scale_jitter below 1)");
  }
}

struct Box {
  double x0, y0, x1, y1;
  void grow(const Box& b) {
    x0 = std::min(x0, b.x0);
    y0 = std::min(y0, b.y0);
    x1 = std::max(x1, b.x1);
    y1 = std::max(y1, b.y1);
  }
};

struct Placed {
  std::vector<std::pair<SrtNode*, Stroke>> strokes;  // writing order
  Box box{0, 0, 0, 0};

  void translate(double dx, double dy) {
    for (auto& [node, s] : strokes) {
      for (auto& p : s) {
        p.x += dx;
        p.y += dy;
      }
    }
    box = {box.x0 + dx, box.y0 + dy, box.x1 + dx, box.y1 + dy};
  }
  void append(Placed&& other) {
    for (auto& s : other.strokes) strokes.push_back(std::move(s));
    box.grow(other.box);
  }
};

class Generator {
 public:
  Generator(const CorpusSpec& spec, std::uint64_t seed) : spec_(spec), rng_(seed) {}

  Sample next(const std::string& name) {
    SrtNode root;
    for (int attempt = 0;; ++attempt) {
      const int target = uniform(spec_.min_symbols, spec_.max_symbols);
      int used = 0;
      root = grow(target, 0, used);
      if (used >= spec_.min_symbols || attempt > 100) break;
    }
    Placed placed = place(root, 0.0, 0.0, 1.0);
    Sample s;
    s.name = name;
    for (auto& [node, stroke] : placed.strokes) {
      node->strokes.push_back(static_cast<int>(s.ink.strokes.size()));
      s.ink.strokes.push_back(std::move(stroke));
    }
    s.tree = canonicalize(root);
    check_sample(s);
    return s;
  }

 private:
  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin(double p) { return std::bernoulli_distribution(p)(rng_); }
  double noise(double sd) { return sd > 0.0 ? std::normal_distribution<double>(0.0, sd)(rng_) : 0.0; }

  // Builds a subtree of at most `budget` symbols; `used` receives its size.
  SrtNode grow(int budget, int depth, int& used) {
    SrtNode node;
    used = 1;
    const bool fractions = has_relation(spec_, Relation::kAbove);
    if (fractions && budget >= 3 && depth < spec_.max_depth && coin(0.3)) {
      node.label = spec_.fraction_bar;
      int n = 0;
      int d = 0;
      SrtNode num = grow(uniform(1, budget - 2), depth + 1, n);
      SrtNode den = grow(uniform(1, budget - 1 - n), depth + 1, d);
      node.add_child(Relation::kAbove, std::move(num));
      node.add_child(Relation::kBelow, std::move(den));
      used += n + d;
    } else {
      node.label = spec_.atoms[static_cast<std::size_t>(uniform(0, static_cast<int>(spec_.atoms.size()) - 1))];
      for (Relation r : {Relation::kSub, Relation::kSup}) {
        if (!has_relation(spec_, r) || depth >= spec_.max_depth || budget - used < 1) continue;
        if (!coin(r == Relation::kSup ? 0.35 : 0.25)) continue;
        int k = 0;
        node.add_child(r, grow(uniform(1, std::min(2, budget - used)), depth + 1, k));
        used += k;
      }
    }
    if (has_relation(spec_, Relation::kRight) && budget - used >= 1 && coin(0.8)) {
      int k = 0;
      node.add_child(Relation::kRight, grow(uniform(1, budget - used), depth, k));
      used += k;
    }
    return node;
  }

  Stroke draw(const Stroke& tmpl, double x, double y, double w, double h) {
    Stroke out;
    auto at = [&](const Point& p) { return Point{x + p.x * w, y + p.y * h}; };
    out.push_back(at(tmpl.front()));
    for (std::size_t i = 1; i < tmpl.size(); ++i) {
      const Point a = at(tmpl[i - 1]);
      const Point b = at(tmpl[i]);
      for (int k = 1; k <= spec_.points_per_segment; ++k) {
        const double t = static_cast<double>(k) / spec_.points_per_segment;
        out.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
      }
    }
    for (auto& p : out) {
      p.x += noise(spec_.jitter * h);
      p.y += noise(spec_.jitter * h);
    }
    return out;
  }

  Placed glyph(SrtNode& node, double x, double y, double size, double width) {
    Placed p;
    p.box = {x, y, x + width, y + size};
    for (const auto& s : spec_.glyphs.at(node.label).strokes) p.strokes.emplace_back(&node, draw(s, x, y, width, size));
    return p;
  }

  const RelationLayout& layout(Relation r) const { return spec_.layout.at(r); }
  double wobble(double v, double size) { return v * size + noise(spec_.placement_jitter * size); }

  // (x, y) is the top-left corner of the node's own glyph box of height size.
  Placed place(SrtNode& node, double x, double y, double size) {
    size *= 1.0 + std::uniform_real_distribution<double>(-spec_.scale_jitter, spec_.scale_jitter)(rng_);
    SrtNode* above = nullptr;
    SrtNode* below = nullptr;
    SrtNode* sub = nullptr;
    SrtNode* sup = nullptr;
    SrtNode* right = nullptr;
    for (auto& c : node.children) {
      switch (c.relation) {
        case Relation::kAbove: above = &c.node; break;
        case Relation::kBelow: below = &c.node; break;
        case Relation::kSub: sub = &c.node; break;
        case Relation::kSup: sup = &c.node; break;
        case Relation::kRight: right = &c.node; break;
        default: throw ContractError("generator produced an unsupported relation");
      }
    }

    Placed out;
    if (above && below) {
      Placed num = place(*above, 0.0, 0.0, size * layout(Relation::kAbove).scale);
      Placed den = place(*below, 0.0, 0.0, size * layout(Relation::kBelow).scale);
      const double width = std::max(num.box.x1 - num.box.x0, den.box.x1 - den.box.x0) + 0.3 * size;
      const double mid = y + 0.5 * size;
      num.translate(x + 0.5 * width - 0.5 * (num.box.x0 + num.box.x1),
                    mid - wobble(layout(Relation::kAbove).dy, size) - num.box.y1);
      den.translate(x + 0.5 * width - 0.5 * (den.box.x0 + den.box.x1),
                    mid + wobble(layout(Relation::kBelow).dy, size) - den.box.y0);
      Placed bar = glyph(node, x, y, size, width);
      out = std::move(num);
      out.append(std::move(bar));
      out.append(std::move(den));
    } else {
      const double width = spec_.glyphs.at(node.label).aspect * size;
      out = glyph(node, x, y, size, width);
      for (auto [child, r] : {std::pair{sub, Relation::kSub}, std::pair{sup, Relation::kSup}}) {
        if (!child) continue;
        const auto& l = layout(r);
        out.append(place(*child, x + width + wobble(l.dx, size), y + wobble(l.dy, size), size * l.scale));
      }
    }
    if (right) {
      const auto& l = layout(Relation::kRight);
      out.append(place(*right, out.box.x1 + wobble(l.dx, size), y + wobble(l.dy, size), size * l.scale));
    }
    return out;
  }

  const CorpusSpec& spec_;
  std::mt19937_64 rng_;
};

Stroke parse_points(const json& j) {
  Stroke s;
  for (const auto& p : j) s.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  return s;
}

}  // namespace

CorpusSpec default_corpus_spec() {
  CorpusSpec spec;
  spec.glyphs = default_glyphs();
  for (const auto& [name, g] : spec.glyphs) spec.atoms.push_back(name);
  spec.layout = default_layout();
  return spec;
}

CorpusSpec parse_corpus_spec(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed corpus spec: ") + e.what());
  }
  CorpusSpec spec = default_corpus_spec();
  try {
    if (doc.contains("glyphs")) {
      spec.glyphs.clear();
      for (const auto& [name, g] : doc.at("glyphs").items()) {
        GlyphTemplate t;
        t.aspect = g.value("aspect", 0.6);
        for (const auto& s : g.at("strokes")) t.strokes.push_back(parse_points(s));
        spec.glyphs[name] = std::move(t);
      }
      spec.atoms.clear();
      for (const auto& [name, g] : spec.glyphs) spec.atoms.push_back(name);
    }
    if (doc.contains("atoms")) spec.atoms = doc.at("atoms").get<std::vector<std::string>>();
    spec.fraction_bar = doc.value("fraction_bar", spec.fraction_bar);
    if (doc.contains("relations")) {
      spec.relations.clear();
      for (const auto& name : doc.at("relations").get<std::vector<std::string>>()) {
        auto r = relation_from_name(name);
        if (!r) throw ConfigError("unknown relation '" + name + "' in corpus spec");
        spec.relations.push_back(*r);
      }
    }
    if (doc.contains("layout")) {
      for (const auto& [name, l] : doc.at("layout").items()) {
        auto r = relation_from_name(name);
        if (!r || !spec.layout.count(*r)) throw ConfigError("no layout for relation '" + name + "'");
        auto& dst = spec.layout[*r];
        dst.dx = l.value("dx", dst.dx);
        dst.dy = l.value("dy", dst.dy);
        dst.scale = l.value("scale", dst.scale);
      }
    }
    spec.count = doc.value("count", spec.count);
    spec.min_symbols = doc.value("min_symbols", spec.min_symbols);
    spec.max_symbols = doc.value("max_symbols", spec.max_symbols);
    spec.max_depth = doc.value("max_depth", spec.max_depth);
    spec.jitter = doc.value("jitter", spec.jitter);
    spec.placement_jitter = doc.value("placement_jitter", spec.placement_jitter);
    spec.scale_jitter = doc.value("scale_jitter", spec.scale_jitter);
    spec.points_per_segment = doc.value("points_per_segment", spec.points_per_segment);
    spec.name_prefix = doc.value("name_prefix", spec.name_prefix);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid corpus spec: ") + e.what());
  }
  validate(spec);
  return spec;
}

std::vector<Sample> generate_corpus(const CorpusSpec& spec, std::uint64_t seed) {
  validate(spec);
  Generator gen(spec, seed);
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(spec.count));
  for (int i = 0; i < spec.count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%04d", i);
    out.push_back(gen.next(spec.name_prefix + "_" + name));
  }
  return out;
}

}  // namespace hmer
