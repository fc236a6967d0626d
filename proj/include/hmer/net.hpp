#pragma once

#include <array>
#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "hmer/ink.hpp"

namespace hmer {

// Rows are frames, columns are classes.
using Posteriors = Eigen::MatrixXd;

struct ModelConfig {
  int layers = 3;
  int hidden = 128;
  int input_dim = 4;
  int output_dim = 0;

  // Throws ConfigError for non-positive dimensions.
  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// One LSTM direction. Gate rows are stacked as [input; forget; output; cell].
struct LstmParams {
  Eigen::MatrixXd w_input;      // 4H x in
  Eigen::MatrixXd w_recurrent;  // 4H x H
  Eigen::VectorXd bias;         // 4H
};

// Parameter blocks of the network; also used for gradients and momentum.
struct Parameters {
  std::vector<std::array<LstmParams, 2>> layers;  // [layer][0 = forward, 1 = backward]
  Eigen::MatrixXd w_out;                          // K x 2H
  Eigen::VectorXd b_out;                          // K

  static Parameters zeros(const ModelConfig& config);

  // Visits every block in a fixed order. Names: "layer{l}.{fwd|bwd}.{W|U|b}",
  // "out.W", "out.b".
  using Block = Eigen::Map<Eigen::MatrixXd>;
  using ConstBlock = Eigen::Map<const Eigen::MatrixXd>;
  void for_each(const std::function<void(const std::string&, Block)>& f);
  void for_each(const std::function<void(const std::string&, ConstBlock)>& f) const;

  std::size_t size() const;
  bool all_finite() const;
  double squared_norm() const;
  void set_zero();
  void scale(double factor);
  // this += factor * other
  void add_scaled(const Parameters& other, double factor);
};

struct Model {
  ModelConfig config;
  Parameters params;
};

std::size_t parameter_count(const ModelConfig& config);

Model init_model(const ModelConfig& config, std::mt19937_64& rng);

struct DirectionCache {
  Eigen::MatrixXd gates;      // 4H x T, after the nonlinearities
  Eigen::MatrixXd cell;       // H x T
  Eigen::MatrixXd cell_tanh;  // H x T
  Eigen::MatrixXd hidden;     // H x T
};

struct LayerCache {
  Eigen::MatrixXd input;  // in x T
  std::array<DirectionCache, 2> directions;
};

struct ForwardResult {
  std::vector<LayerCache> layers;
  Eigen::MatrixXd top;     // 2H x T
  Eigen::MatrixXd logits;  // T x K
  Posteriors posteriors;   // T x K
};

// Input as a (4 x T) column-per-frame matrix.
Eigen::MatrixXd feature_matrix(const FeatureSequence& features);

// Throws NumericError naming the layer and frame of the first non-finite
// activation and ContractError for an empty sequence.
ForwardResult forward(const Model& model, const Eigen::MatrixXd& input);
ForwardResult forward(const Model& model, const FeatureSequence& features);

// Backpropagation through time of dLoss/dLogits (T x K).
Parameters backward(const Model& model, const ForwardResult& cache, const Eigen::MatrixXd& dlogits);

struct SgdState {
  Parameters velocity;
};

SgdState make_sgd_state(const ModelConfig& config);

struct StepResult {
  bool applied = false;
  std::string reason;
  double gradient_norm = 0.0;
};

// Classical momentum: v <- momentum * v - lr * g; theta <- theta + v. A
// positive clip_norm rescales g to at most that L2 norm first. Non-finite
// gradients leave model and state untouched and report why.
StepResult sgd_step(Model& model, const Parameters& grads, SgdState& state, double lr,
                    double momentum, double clip_norm = 0.0);

}  // namespace hmer
