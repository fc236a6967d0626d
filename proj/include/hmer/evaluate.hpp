#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hmer/dataset.hpp"
#include "hmer/pipeline.hpp"

namespace hmer {

// Rows and columns of the relation confusion matrix: the six link relations,
// NoRel, and NonSeg (an off-stroke inside a symbol, or a blank decision).
inline constexpr int kOutcomeCount = 8;
inline constexpr int kNonSeg = 7;
inline constexpr std::array<std::string_view, kOutcomeCount> kOutcomeNames = {
    "Above", "Below", "Inside", "Right", "Sub", "Sup", "NoRel", "NonSeg"};

int outcome_index(Relation r);

struct ConfusionMatrix {
  std::array<std::array<long, kOutcomeCount>, kOutcomeCount> counts{};  // [truth][prediction]

  void add(int truth, int prediction);
  long row_total(int truth) const;
  // Row percentages rounded to hundredths by largest remainder, so every
  // non-empty row sums to exactly 100.00. Empty rows are all zero.
  std::array<std::array<double, kOutcomeCount>, kOutcomeCount> percentages() const;
};

// Tab-separated table: one row per truth outcome, one column per predicted
// outcome, then the row total.
std::string format_confusion_table(const ConfusionMatrix& matrix);

struct PredictedSymbol {
  std::vector<int> strokes;  // sorted
  std::string label;
};

struct SamplePrediction {
  std::vector<PredictedSymbol> symbols;
  std::vector<std::pair<int, int>> relation_outcomes;  // (truth, prediction) outcome indices
  std::optional<SrtNode> tree;
};

struct Rate {
  long hits = 0;
  long total = 0;
  double value() const { return total > 0 ? static_cast<double>(hits) / static_cast<double>(total) : 0.0; }
};

struct EvalReport {
  long samples = 0;
  Rate seg_recall;
  Rate seg_precision;
  Rate segcls_recall;
  Rate segcls_precision;
  ConfusionMatrix confusion;
  Rate expression;
  Rate structure;
  std::map<std::size_t, Rate> expression_by_size;  // keyed by symbol count

  nlohmann::json to_json() const;
};

// Pure scoring of injected predictions against ground truth.
EvalReport score_predictions(const std::vector<Sample>& truth, const std::vector<SamplePrediction>& predictions);

struct EvalConfig {
  int relation_paths = 10;  // random paths per tree for the confusion matrix
  std::uint64_t seed = 7;
};

// Symbols come from the best tree, or from the lattice when nothing parsed.
SamplePrediction predict_sample(const Recognizer& recognizer, const Sample& sample, const EvalConfig& config,
                                std::mt19937_64& rng);
EvalReport evaluate(const Recognizer& recognizer, const std::vector<Sample>& samples, const EvalConfig& config = {});

// Behaviour of the temporal classifier on writing-order sequences.
struct BoundaryReport {
  double mean_stroke_relation_mass = 0.0;  // over all pen-down frames
  Rate offstroke_accuracy;                 // blank inside symbols, the true relation between them
  Rate relation_accuracy;                  // between-symbol off-strokes only
};

BoundaryReport boundary_report(const Model& model, const ClassInventory& inventory, const std::vector<Sample>& samples,
                               double epsilon = kDefaultEpsilon,
                               BoundaryRule rule = BoundaryRule::kSymbolAware);

}  // namespace hmer
