#include "hmer/pipeline.hpp"

#include <set>

#include "hmer/error.hpp"

namespace hmer {

BoundaryDecision ModelRelationOracle::decide(const CandidateLattice& lattice, int from, int to) const {
  const auto& segs = lattice.segments;
  if (from < 0 || to < 0 || static_cast<std::size_t>(from) >= segs.size() || static_cast<std::size_t>(to) >= segs.size()) {
    throw ContractError("relation query outside the lattice");
  }
  const PairSequence pair = synthesize_pair_sequence(ink_, segs[static_cast<std::size_t>(from)],
                                                     segs[static_cast<std::size_t>(to)], epsilon_);
  const ForwardResult fwd = forward(model_, pair.features);
  for (auto& d : classify_offstrokes(fwd.posteriors, pair.features.span_map, inventory_, top_relations_, rule_)) {
    if (d.offstroke_index == pair.connecting_offstroke) return d;
  }
  throw ContractError("pair sequence has no connecting off-stroke");
}

std::vector<RelationScore> ModelRelationOracle::score(const CandidateLattice& lattice, int from, int to) const {
  return decide(lattice, from, to).alternatives;
}

Recognizer::Recognizer(Model model, ClassInventory inventory, Grammar grammar, RecognizerConfig config)
    : model_(std::move(model)), inventory_(std::move(inventory)), grammar_(std::move(grammar)), config_(config) {
  if (inventory_.size() != model_.config.output_dim) {
    throw ConfigError("inventory size does not match the model output dimension");
  }
}

Recognition Recognizer::recognize(const Ink& ink, int topk) const {
  if (ink.strokes.empty()) throw ValidationError("ink has no strokes");
  Recognition r;
  r.normalized = normalize(ink);
  r.features = featurize(r.normalized, config_.epsilon);
  r.posteriors = forward(model_, r.features).posteriors;
  r.lattice = build_lattice(r.posteriors, r.features.span_map, inventory_, config_.top_symbols, config_.top_relations,
                            config_.boundary_rule);

  ModelRelationOracle oracle(model_, inventory_, r.normalized, config_.epsilon, config_.top_relations,
                             config_.boundary_rule);
  r.parse = cyk_parse(grammar_, r.lattice, oracle, config_.cyk);

  std::set<std::string> seen;
  for (const auto& node : r.parse.parses) {
    std::string latex;
    SrtNode tree;
    try {
      tree = parse_to_srt(*node);
      latex = srt_to_latex(tree);
    } catch (const EmissionError&) {
      continue;
    }
    if (!r.tree) {
      r.tree = tree;
      r.latex = latex;
      r.probability = node->probability;
    }
    if (seen.insert(latex).second && static_cast<int>(r.alternatives.size()) < topk) {
      r.alternatives.push_back({latex, node->probability});
    }
  }
  return r;
}

RecognizerConfig recognizer_config_from(const nlohmann::json& train) {
  RecognizerConfig c;
  try {
    c.epsilon = train.value("epsilon", c.epsilon);
    c.top_symbols = train.value("top_symbols", c.top_symbols);
    c.top_relations = train.value("top_relations", c.top_relations);
    c.cyk.beam = train.value("beam", c.cyk.beam);
    const std::string rule = train.value("boundary_rule", std::string("symbol_aware"));
    if (rule == "literal") {
      c.boundary_rule = BoundaryRule::kLiteral;
    } else if (rule == "symbol_aware") {
      c.boundary_rule = BoundaryRule::kSymbolAware;
    } else {
      throw ConfigError("boundary_rule must be 'literal' or 'symbol_aware'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid decoding settings: ") + e.what());
  }
  return c;
}

Recognizer make_recognizer(const Checkpoint& checkpoint, Grammar grammar) {
  return Recognizer(checkpoint.model, checkpoint.inventory, std::move(grammar),
                    recognizer_config_from(checkpoint.train_config));
}

}  // namespace hmer
