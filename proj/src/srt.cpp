#include "hmer/srt.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "hmer/error.hpp"
#include "hmer/inventory.hpp"

namespace hmer {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 7> kRelationNames = {
    "Above", "Below", "Sub", "Sup", "Right", "Inside", "NoRel"};

}  // namespace

std::string_view relation_name(Relation r) {
  return kRelationNames[static_cast<std::size_t>(r)];
}

std::optional<Relation> relation_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kRelationNames.size(); ++i) {
    if (kRelationNames[i] == name) return static_cast<Relation>(i);
  }
  return std::nullopt;
}

const SrtNode* SrtNode::child(Relation r) const {
  for (const auto& c : children) {
    if (c.relation == r) return &c.node;
  }
  return nullptr;
}

SrtNode& SrtNode::add_child(Relation r, SrtNode child) {
  children.push_back(SrtChild{r, std::move(child)});
  return children.back().node;
}

bool operator==(const SrtNode& a, const SrtNode& b) {
  if (a.label != b.label || a.strokes != b.strokes || a.children.size() != b.children.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.children.size(); ++i) {
    if (a.children[i].relation != b.children[i].relation) return false;
    if (!(a.children[i].node == b.children[i].node)) return false;
  }
  return true;
}

namespace {

void collect_strokes(const SrtNode& node, std::vector<int>& all) {
  if (node.strokes.empty()) throw ValidationError("node '" + node.label + "' has no strokes");
  if (node.label.empty()) throw ValidationError("node with empty label");
  all.insert(all.end(), node.strokes.begin(), node.strokes.end());
  std::set<Relation> seen;
  for (const auto& c : node.children) {
    if (c.relation == Relation::kNoRel) {
      throw ValidationError("NoRel link under node '" + node.label + "'");
    }
    if (!seen.insert(c.relation).second) {
      throw ValidationError("node '" + node.label + "' has two " +
                            std::string(relation_name(c.relation)) + " children");
    }
    collect_strokes(c.node, all);
  }
}

}  // namespace

void validate_srt(const SrtNode& root) {
  std::vector<int> all;
  collect_strokes(root, all);
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (i > 0 && all[i] == all[i - 1]) {
      throw ValidationError("stroke index " + std::to_string(all[i]) + " appears in two nodes");
    }
  }
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (all[i] != static_cast<int>(i)) {
      throw ValidationError("stroke indexes do not cover 0.." + std::to_string(all.size() - 1));
    }
  }
}

namespace {

SrtNode node_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("SRT node must be an object");
  SrtNode node;
  if (!j.contains("label") || !j["label"].is_string()) throw ParseError("SRT node needs a string 'label'");
  node.label = j["label"].get<std::string>();
  if (!j.contains("strokes") || !j["strokes"].is_array()) throw ParseError("SRT node needs a 'strokes' array");
  for (const auto& s : j["strokes"]) {
    if (!s.is_number_integer()) throw ParseError("stroke index must be an integer");
    node.strokes.push_back(s.get<int>());
  }
  std::sort(node.strokes.begin(), node.strokes.end());
  if (j.contains("children")) {
    if (!j["children"].is_array()) throw ParseError("'children' must be an array");
    for (const auto& c : j["children"]) {
      if (!c.is_object() || !c.contains("rel") || !c["rel"].is_string() || !c.contains("node")) {
        throw ParseError("child must be {\"rel\": ..., \"node\": ...}");
      }
      auto name = c["rel"].get<std::string>();
      auto rel = relation_from_name(name);
      if (!rel) throw ValidationError("unknown relation '" + name + "'");
      node.children.push_back(SrtChild{*rel, node_from_json(c["node"])});
    }
  }
  return node;
}

json node_to_json(const SrtNode& node) {
  json children = json::array();
  for (const auto& c : node.children) {
    children.push_back({{"rel", relation_name(c.relation)}, {"node", node_to_json(c.node)}});
  }
  json j{{"label", node.label}, {"strokes", node.strokes}};
  if (!children.empty()) j["children"] = std::move(children);
  return j;
}

}  // namespace

SrtNode parse_srt(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed SRT document: ") + e.what());
  }
  SrtNode root = node_from_json(doc);
  validate_srt(root);
  return root;
}

std::string srt_to_json(const SrtNode& root, int indent) { return node_to_json(root).dump(indent); }

std::size_t srt_node_count(const SrtNode& root) {
  std::size_t n = 1;
  for (const auto& c : root.children) n += srt_node_count(c.node);
  return n;
}

std::size_t srt_stroke_count(const SrtNode& root) {
  std::size_t n = root.strokes.size();
  for (const auto& c : root.children) n += srt_stroke_count(c.node);
  return n;
}

namespace {

int canonical_rank(Relation r) {
  switch (r) {
    case Relation::kAbove: return 0;
    case Relation::kBelow: return 1;
    case Relation::kInside: return 2;
    case Relation::kSub: return 3;
    case Relation::kSup: return 4;
    case Relation::kRight: return 5;
    case Relation::kNoRel: return 6;
  }
  return 6;
}

bool structure_equal(const SrtNode& a, const SrtNode& b, bool labels) {
  if (labels && a.label != b.label) return false;
  if (a.strokes != b.strokes || a.children.size() != b.children.size()) return false;
  for (std::size_t i = 0; i < a.children.size(); ++i) {
    if (a.children[i].relation != b.children[i].relation) return false;
    if (!structure_equal(a.children[i].node, b.children[i].node, labels)) return false;
  }
  return true;
}

}  // namespace

SrtNode canonicalize(const SrtNode& root) {
  SrtNode out{root.label, root.strokes, {}};
  std::sort(out.strokes.begin(), out.strokes.end());
  for (const auto& c : root.children) out.children.push_back(SrtChild{c.relation, canonicalize(c.node)});
  std::stable_sort(out.children.begin(), out.children.end(), [](const SrtChild& a, const SrtChild& b) {
    return canonical_rank(a.relation) < canonical_rank(b.relation);
  });
  return out;
}

bool srt_equal(const SrtNode& a, const SrtNode& b) {
  return structure_equal(canonicalize(a), canonicalize(b), true);
}

bool srt_structure_equal(const SrtNode& a, const SrtNode& b) {
  return structure_equal(canonicalize(a), canonicalize(b), false);
}

std::vector<int> LabeledPath::stroke_order() const {
  std::vector<int> order;
  for (const auto& n : nodes) order.insert(order.end(), n.strokes.begin(), n.strokes.end());
  return order;
}

namespace {

PathNode as_path_node(const SrtNode& n) { return PathNode{n.label, n.strokes}; }

// Parent link of every node keyed by its first stroke.
using LinkMap = std::map<int, std::pair<int, Relation>>;

void collect_links(const SrtNode& node, LinkMap& links) {
  for (const auto& c : node.children) {
    links[c.node.first_stroke()] = {node.first_stroke(), c.relation};
    collect_links(c.node, links);
  }
}

LabeledPath with_relations(std::vector<const SrtNode*> nodes, const SrtNode& root) {
  LinkMap links;
  collect_links(root, links);
  LabeledPath path;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    path.nodes.push_back(as_path_node(*nodes[i]));
    if (i == 0) continue;
    Relation rel = Relation::kNoRel;
    auto it = links.find(nodes[i]->first_stroke());
    if (it != links.end() && it->second.first == nodes[i - 1]->first_stroke()) rel = it->second.second;
    path.relations.push_back(rel);
  }
  return path;
}

void trace_leaves(const SrtNode& node, std::vector<const SrtNode*>& prefix,
                  std::vector<std::vector<const SrtNode*>>& out) {
  prefix.push_back(&node);
  if (node.children.empty()) {
    out.push_back(prefix);
  } else {
    for (const auto& c : node.children) trace_leaves(c.node, prefix, out);
  }
  prefix.pop_back();
}

void collect_nodes(const SrtNode& node, std::vector<const SrtNode*>& out) {
  out.push_back(&node);
  for (const auto& c : node.children) collect_nodes(c.node, out);
}

void random_path(const SrtNode& r, std::mt19937_64& rng, std::vector<const SrtNode*>& p) {
  if (r.children.empty()) {
    p.push_back(&r);
  } else if (r.children.size() == 1) {
    p.push_back(&r);
    random_path(r.children.front().node, rng, p);
  } else {
    // nullptr stands for r itself in the shuffled [r, r.childs] list.
    std::vector<const SrtNode*> order{nullptr};
    for (const auto& c : r.children) order.push_back(&c.node);
    std::shuffle(order.begin(), order.end(), rng);
    for (const SrtNode* node : order) {
      if (node == nullptr) {
        p.push_back(&r);
      } else {
        random_path(*node, rng, p);
      }
    }
  }
}

}  // namespace

std::vector<LabeledPath> derive_paths_all(const SrtNode& root) {
  std::vector<const SrtNode*> prefix;
  std::vector<std::vector<const SrtNode*>> traces;
  trace_leaves(root, prefix, traces);
  std::vector<LabeledPath> paths;
  for (auto& t : traces) paths.push_back(with_relations(std::move(t), root));
  return paths;
}

LabeledPath derive_path_writing_order(const SrtNode& root) {
  std::vector<const SrtNode*> nodes;
  collect_nodes(root, nodes);
  std::sort(nodes.begin(), nodes.end(),
            [](const SrtNode* a, const SrtNode* b) { return a->first_stroke() < b->first_stroke(); });
  return with_relations(std::move(nodes), root);
}

LabeledPath extract_random_path(const SrtNode& root, std::mt19937_64& rng) {
  std::vector<const SrtNode*> nodes;
  random_path(root, rng, nodes);
  return with_relations(std::move(nodes), root);
}

PathTargets path_targets(const LabeledPath& path, const ClassInventory& inventory) {
  PathTargets t;
  for (std::size_t i = 0; i < path.nodes.size(); ++i) {
    const int sym = inventory.symbol_index(path.nodes[i].label);
    if (i > 0) {
      const int rel = inventory.relation_index(path.relations[i - 1]);
      t.labels.push_back(rel);
      t.offstroke_labels.push_back(rel);
    }
    t.labels.push_back(sym);
    for (std::size_t k = 0; k < path.nodes[i].strokes.size(); ++k) {
      if (k > 0) t.offstroke_labels.push_back(-1);
      t.stroke_labels.push_back(sym);
    }
  }
  return t;
}

bool is_fraction_bar(std::string_view label) { return label == "-" || label == "\\frac"; }

bool is_dominant_symbol(std::string_view label) {
  return label == "\\sqrt" || is_fraction_bar(label) || label == "\\lim" || label == "\\sum" ||
         label == "\\int";
}

namespace {

bool is_big_operator(std::string_view label) {
  return label == "\\sum" || label == "\\int" || label == "\\lim" || label == "\\prod";
}

void emit(const SrtNode& node, std::vector<std::string>& out);

void emit_group(const SrtNode* node, std::vector<std::string>& out) {
  out.emplace_back("{");
  if (node != nullptr) emit(*node, out);
  out.emplace_back("}");
}

[[noreturn]] void unsupported(const SrtNode& node, Relation r) {
  throw EmissionError("relation " + std::string(relation_name(r)) + " is not supported on symbol '" +
                      node.label + "'");
}

void emit(const SrtNode& node, std::vector<std::string>& out) {
  const SrtNode* above = node.child(Relation::kAbove);
  const SrtNode* below = node.child(Relation::kBelow);
  const SrtNode* inside = node.child(Relation::kInside);
  const SrtNode* sub = node.child(Relation::kSub);
  const SrtNode* sup = node.child(Relation::kSup);

  if (is_fraction_bar(node.label) && (above || below || node.label == "\\frac")) {
    if (inside) unsupported(node, Relation::kInside);
    out.emplace_back("\\frac");
    emit_group(above, out);
    emit_group(below, out);
  } else if (is_big_operator(node.label)) {
    if (inside) unsupported(node, Relation::kInside);
    if (below && sub) unsupported(node, Relation::kSub);
    if (above && sup) unsupported(node, Relation::kSup);
    out.push_back(node.label);
    if (below) sub = below;
    if (above) sup = above;
  } else if (node.label == "\\sqrt") {
    if (above) unsupported(node, Relation::kAbove);
    if (below) unsupported(node, Relation::kBelow);
    out.push_back(node.label);
    emit_group(inside, out);
  } else {
    if (above) unsupported(node, Relation::kAbove);
    if (below) unsupported(node, Relation::kBelow);
    if (inside) unsupported(node, Relation::kInside);
    out.push_back(node.label);
  }
  if (sub) {
    out.emplace_back("_");
    emit_group(sub, out);
  }
  if (sup) {
    out.emplace_back("^");
    emit_group(sup, out);
  }
  if (const SrtNode* right = node.child(Relation::kRight)) emit(*right, out);
}

}  // namespace

std::string srt_to_latex(const SrtNode& root) {
  std::vector<std::string> tokens;
  emit(root, tokens);
  std::string s;
  for (const auto& t : tokens) {
    if (!s.empty()) s += ' ';
    s += t;
  }
  return s;
}

std::string normalize_latex(std::string_view latex) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < latex.size()) {
    const char c = latex[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '\\') {
      std::size_t j = i + 1;
      while (j < latex.size() && std::isalpha(static_cast<unsigned char>(latex[j]))) ++j;
      if (j == i + 1 && j < latex.size()) ++j;  // control symbol such as \{
      tokens.emplace_back(latex.substr(i, j - i));
      i = j;
    } else {
      tokens.emplace_back(1, c);
      ++i;
    }
  }
  std::string s;
  for (const auto& t : tokens) {
    if (!s.empty()) s += ' ';
    s += t;
  }
  return s;
}

}  // namespace hmer
