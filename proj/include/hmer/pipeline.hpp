#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hmer/checkpoint.hpp"
#include "hmer/decode.hpp"
#include "hmer/grammar.hpp"
#include "hmer/inventory.hpp"
#include "hmer/net.hpp"

namespace hmer {

struct RecognizerConfig {
  double epsilon = kDefaultEpsilon;
  int top_symbols = kDefaultTopSymbols;
  int top_relations = kDefaultTopRelations;
  BoundaryRule boundary_rule = BoundaryRule::kSymbolAware;
  CykOptions cyk;
};

// Reads the relation between two non-adjacent segments from a fresh forward
// pass over the synthesized pair sequence. Stateless; safe to share.
class ModelRelationOracle : public RelationOracle {
 public:
  ModelRelationOracle(const Model& model, const ClassInventory& inventory, const Ink& normalized_ink,
                      double epsilon, int top_relations, BoundaryRule rule = BoundaryRule::kSymbolAware)
      : model_(model),
        inventory_(inventory),
        ink_(normalized_ink),
        epsilon_(epsilon),
        top_relations_(top_relations),
        rule_(rule) {}

  std::vector<RelationScore> score(const CandidateLattice& lattice, int from, int to) const override;
  // All seven relation scores plus blank at the connecting off-stroke.
  BoundaryDecision decide(const CandidateLattice& lattice, int from, int to) const;

 private:
  const Model& model_;
  const ClassInventory& inventory_;
  const Ink& ink_;
  double epsilon_;
  int top_relations_;
  BoundaryRule rule_;
};

struct LatexCandidate {
  std::string latex;
  double probability = 0.0;
};

struct Recognition {
  Ink normalized;
  FeatureSequence features;
  Posteriors posteriors;
  CandidateLattice lattice;
  ParseResult parse;
  std::optional<SrtNode> tree;  // best full parse
  std::string latex;            // empty when nothing parsed
  double probability = 0.0;
  std::vector<LatexCandidate> alternatives;  // distinct LaTeX, descending
};

// Stage 1 (featurize, forward, lattice) and stage 2 (CYK, LaTeX) over an
// immutable model and grammar.
class Recognizer {
 public:
  Recognizer(Model model, ClassInventory inventory, Grammar grammar, RecognizerConfig config = {});

  Recognition recognize(const Ink& ink, int topk = 5) const;

  const Model& model() const { return model_; }
  const ClassInventory& inventory() const { return inventory_; }
  const Grammar& grammar() const { return grammar_; }
  const RecognizerConfig& config() const { return config_; }

 private:
  Model model_;
  ClassInventory inventory_;
  Grammar grammar_;
  RecognizerConfig config_;
};

// Decoding settings recorded in a checkpoint's training config; absent keys
// keep their defaults.
RecognizerConfig recognizer_config_from(const nlohmann::json& train_config);
Recognizer make_recognizer(const Checkpoint& checkpoint, Grammar grammar);

}  // namespace hmer
