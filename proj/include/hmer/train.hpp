#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hmer/checkpoint.hpp"
#include "hmer/dataset.hpp"
#include "hmer/decode.hpp"
#include "hmer/loss.hpp"

namespace hmer {

struct TrainConfig {
  int layers = 3;
  int hidden = 128;
  double learning_rate = 1e-4;
  double momentum = 0.9;
  double lambda = kDefaultLambda;
  int epochs = 10;
  std::uint64_t seed = 1;
  double epsilon = kDefaultEpsilon;
  // Paths per tree and epoch: every root-to-leaf path (optional), then the
  // writing-order path(s), then freshly drawn random paths.
  bool all_paths = true;
  int writing_order_paths = 1;
  int random_paths = 2;
  int batch_size = 1;
  double clip_norm = 0.0;
  ConstraintGranularity granularity = ConstraintGranularity::kPerFrame;
  // Decoding settings stored with the checkpoint.
  int top_symbols = kDefaultTopSymbols;
  int top_relations = kDefaultTopRelations;
  int beam = 5;
  BoundaryRule boundary_rule = BoundaryRule::kSymbolAware;

  // Throws ConfigError.
  void validate() const;
  nlohmann::json to_json() const;
  // Missing keys keep their defaults; unknown keys are rejected.
  static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochLog {
  int epoch = 0;
  double mean_ctc = 0.0;
  double mean_constraint = 0.0;
  double mean_combined = 0.0;
  int steps = 0;            // sequences that contributed a gradient
  int skipped = 0;          // sequences too short for their target
  int rejected_updates = 0; // non-finite gradients
  double seconds = 0.0;
};

struct TrainHooks {
  // Called after every epoch; returning false stops training.
  std::function<bool(const EpochLog&, const Model&)> on_epoch;
  std::function<void(const std::string&)> on_warning;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochLog> history;
};

std::vector<LabeledPath> training_paths(const SrtNode& tree, const TrainConfig& config, std::mt19937_64& rng);

// Deterministic for a fixed config and dataset.
TrainResult train(const std::vector<Sample>& samples, const TrainConfig& config, const TrainHooks& hooks = {});

}  // namespace hmer
