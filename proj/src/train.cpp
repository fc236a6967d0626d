#include "hmer/train.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

#include "hmer/error.hpp"
#include "hmer/net.hpp"

namespace hmer {

using nlohmann::json;

void TrainConfig::validate() const {
  if (layers < 1 || hidden < 1) throw ConfigError("layers and hidden must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must be in [0, 1)");
  if (lambda < 0.0) throw ConfigError("lambda must be non-negative");
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be non-negative");
  if (writing_order_paths < 0 || random_paths < 0) throw ConfigError("path counts must be non-negative");
  if (!all_paths && writing_order_paths == 0 && random_paths == 0) throw ConfigError("no training paths selected");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (clip_norm < 0.0) throw ConfigError("clip_norm must be non-negative");
  if (top_symbols < 1 || top_relations < 1) throw ConfigError("top_symbols and top_relations must be positive");
  if (beam < 0) throw ConfigError("beam must be non-negative (0 = unbounded)");
}

json TrainConfig::to_json() const {
  return {{"layers", layers},
          {"hidden", hidden},
          {"learning_rate", learning_rate},
          {"momentum", momentum},
          {"lambda", lambda},
          {"epochs", epochs},
          {"seed", seed},
          {"epsilon", epsilon},
          {"all_paths", all_paths},
          {"writing_order_paths", writing_order_paths},
          {"random_paths", random_paths},
          {"batch_size", batch_size},
          {"clip_norm", clip_norm},
          {"granularity", granularity == ConstraintGranularity::kPerFrame ? "frame" : "stroke"},
          {"top_symbols", top_symbols},
          {"top_relations", top_relations},
          {"beam", beam},
          {"boundary_rule", boundary_rule == BoundaryRule::kLiteral ? "literal" : "symbol_aware"}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("training config must be a JSON object");
  TrainConfig c;
  const json defaults = c.to_json();
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) throw ConfigError("unknown training config key '" + key + "'");
  }
  try {
    c.layers = j.value("layers", c.layers);
    c.hidden = j.value("hidden", c.hidden);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.momentum = j.value("momentum", c.momentum);
    c.lambda = j.value("lambda", c.lambda);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.all_paths = j.value("all_paths", c.all_paths);
    c.writing_order_paths = j.value("writing_order_paths", c.writing_order_paths);
    c.random_paths = j.value("random_paths", c.random_paths);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    const std::string g = j.value("granularity", std::string("frame"));
    if (g == "frame") {
      c.granularity = ConstraintGranularity::kPerFrame;
    } else if (g == "stroke") {
      c.granularity = ConstraintGranularity::kPerStroke;
    } else {
      throw ConfigError("granularity must be 'frame' or 'stroke'");
    }
    c.top_symbols = j.value("top_symbols", c.top_symbols);
    c.top_relations = j.value("top_relations", c.top_relations);
    c.beam = j.value("beam", c.beam);
    const std::string rule = j.value("boundary_rule", std::string("symbol_aware"));
    if (rule == "literal") {
      c.boundary_rule = BoundaryRule::kLiteral;
    } else if (rule == "symbol_aware") {
      c.boundary_rule = BoundaryRule::kSymbolAware;
    } else {
      throw ConfigError("boundary_rule must be 'literal' or 'symbol_aware'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid training config: ") + e.what());
  }
  c.validate();
  return c;
}

std::vector<LabeledPath> training_paths(const SrtNode& tree, const TrainConfig& config, std::mt19937_64& rng) {
  std::vector<LabeledPath> paths;
  if (config.all_paths) paths = derive_paths_all(tree);
  for (int i = 0; i < config.writing_order_paths; ++i) paths.push_back(derive_path_writing_order(tree));
  for (int i = 0; i < config.random_paths; ++i) paths.push_back(extract_random_path(tree, rng));
  return paths;
}

namespace {

struct Sequence {
  FeatureSequence features;
  std::vector<int> target;
};

Sequence make_sequence(const Ink& normalized, const LabeledPath& path, const ClassInventory& inventory,
                       double epsilon) {
  return {featurize(select_strokes(normalized, path.stroke_order()), epsilon), path_targets(path, inventory).labels};
}

}  // namespace

TrainResult train(const std::vector<Sample>& samples, const TrainConfig& config, const TrainHooks& hooks) {
  config.validate();
  if (samples.empty()) throw ValidationError("training set is empty");
  for (const auto& s : samples) check_sample(s);

  TrainResult result;
  Checkpoint& ck = result.checkpoint;
  ck.inventory = ClassInventory(dataset_symbols(samples));
  ck.train_config = config.to_json();
  ModelConfig mc{config.layers, config.hidden, 4, ck.inventory.size()};
  std::mt19937_64 rng(config.seed);
  ck.model = init_model(mc, rng);
  const OutputLayout layout = OutputLayout::from(ck.inventory);

  std::vector<Ink> normalized;
  normalized.reserve(samples.size());
  for (const auto& s : samples) normalized.push_back(normalize(s.ink));

  // Deterministic paths are featurized once.
  TrainConfig fixed_only = config;
  fixed_only.random_paths = 0;
  std::vector<std::vector<Sequence>> fixed(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (const auto& p : training_paths(samples[i].tree, fixed_only, rng)) {
      fixed[i].push_back(make_sequence(normalized[i], p, ck.inventory, config.epsilon));
    }
  }

  SgdState sgd = make_sgd_state(mc);
  Parameters batch = Parameters::zeros(mc);
  int in_batch = 0;
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    EpochLog log;
    log.epoch = epoch;
    std::shuffle(order.begin(), order.end(), rng);

    auto flush = [&] {
      if (in_batch == 0) return;
      if (in_batch > 1) batch.scale(1.0 / in_batch);
      const StepResult step = sgd_step(ck.model, batch, sgd, config.learning_rate, config.momentum, config.clip_norm);
      if (!step.applied) {
        ++log.rejected_updates;
        if (hooks.on_warning) hooks.on_warning("epoch " + std::to_string(epoch) + ": update skipped, " + step.reason);
      }
      batch.set_zero();
      in_batch = 0;
    };

    auto run = [&](const Sample& sample, const Sequence& seq) {
      const ForwardResult fwd = forward(ck.model, seq.features);
      CombinedLoss loss;
      try {
        loss = combined_loss(fwd.posteriors, seq.target, seq.features.span_map, layout, config.lambda,
                             config.granularity);
      } catch (const InfeasibleTargetError& e) {
        ++log.skipped;
        if (hooks.on_warning) hooks.on_warning("sample '" + sample.name + "' skipped: " + e.what());
        return;
      }
      log.mean_ctc += loss.report.ctc;
      log.mean_constraint += loss.report.constraint;
      log.mean_combined += loss.report.combined;
      ++log.steps;
      batch.add_scaled(backward(ck.model, fwd, loss.gradient), 1.0);
      if (++in_batch == config.batch_size) flush();
    };

    for (std::size_t i : order) {
      for (const auto& seq : fixed[i]) run(samples[i], seq);
      for (int r = 0; r < config.random_paths; ++r) {
        run(samples[i], make_sequence(normalized[i], extract_random_path(samples[i].tree, rng), ck.inventory,
                                      config.epsilon));
      }
    }
    flush();

    if (log.steps > 0) {
      log.mean_ctc /= log.steps;
      log.mean_constraint /= log.steps;
      log.mean_combined /= log.steps;
    }
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.push_back(log);
    if (hooks.on_epoch && !hooks.on_epoch(log, ck.model)) break;
  }
  return result;
}

}  // namespace hmer
