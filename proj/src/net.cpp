#include "hmer/net.hpp"

#include <cmath>

#include "hmer/error.hpp"

namespace hmer {

void ModelConfig::validate() const {
  if (layers <= 0) throw ConfigError("layer count must be positive");
  if (hidden <= 0) throw ConfigError("hidden size must be positive");
  if (input_dim <= 0) throw ConfigError("input dimension must be positive");
  if (output_dim <= 0) throw ConfigError("output dimension must be positive");
}

namespace {

int layer_input_dim(const ModelConfig& config, int layer) {
  return layer == 0 ? config.input_dim : 2 * config.hidden;
}

const char* direction_name(int d) { return d == 0 ? "fwd" : "bwd"; }

}  // namespace

Parameters Parameters::zeros(const ModelConfig& config) {
  config.validate();
  const int h = config.hidden;
  Parameters p;
  for (int l = 0; l < config.layers; ++l) {
    std::array<LstmParams, 2> layer;
    for (auto& dir : layer) {
      dir.w_input = Eigen::MatrixXd::Zero(4 * h, layer_input_dim(config, l));
      dir.w_recurrent = Eigen::MatrixXd::Zero(4 * h, h);
      dir.bias = Eigen::VectorXd::Zero(4 * h);
    }
    p.layers.push_back(std::move(layer));
  }
  p.w_out = Eigen::MatrixXd::Zero(config.output_dim, 2 * h);
  p.b_out = Eigen::VectorXd::Zero(config.output_dim);
  return p;
}

void Parameters::for_each(const std::function<void(const std::string&, Block)>& f) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (int d = 0; d < 2; ++d) {
      auto& dir = layers[l][static_cast<std::size_t>(d)];
      const std::string prefix = "layer" + std::to_string(l) + "." + direction_name(d) + ".";
      f(prefix + "W", Block(dir.w_input.data(), dir.w_input.rows(), dir.w_input.cols()));
      f(prefix + "U", Block(dir.w_recurrent.data(), dir.w_recurrent.rows(), dir.w_recurrent.cols()));
      f(prefix + "b", Block(dir.bias.data(), dir.bias.size(), 1));
    }
  }
  f("out.W", Block(w_out.data(), w_out.rows(), w_out.cols()));
  f("out.b", Block(b_out.data(), b_out.size(), 1));
}

void Parameters::for_each(const std::function<void(const std::string&, ConstBlock)>& f) const {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (int d = 0; d < 2; ++d) {
      const auto& dir = layers[l][static_cast<std::size_t>(d)];
      const std::string prefix = "layer" + std::to_string(l) + "." + direction_name(d) + ".";
      f(prefix + "W", ConstBlock(dir.w_input.data(), dir.w_input.rows(), dir.w_input.cols()));
      f(prefix + "U", ConstBlock(dir.w_recurrent.data(), dir.w_recurrent.rows(), dir.w_recurrent.cols()));
      f(prefix + "b", ConstBlock(dir.bias.data(), dir.bias.size(), 1));
    }
  }
  f("out.W", ConstBlock(w_out.data(), w_out.rows(), w_out.cols()));
  f("out.b", ConstBlock(b_out.data(), b_out.size(), 1));
}

std::size_t Parameters::size() const {
  std::size_t n = 0;
  for_each([&](const std::string&, ConstBlock b) { n += static_cast<std::size_t>(b.size()); });
  return n;
}

bool Parameters::all_finite() const {
  bool ok = true;
  for_each([&](const std::string&, ConstBlock b) { ok = ok && b.allFinite(); });
  return ok;
}

double Parameters::squared_norm() const {
  double s = 0.0;
  for_each([&](const std::string&, ConstBlock b) { s += b.squaredNorm(); });
  return s;
}

void Parameters::set_zero() {
  for_each([](const std::string&, Block b) { b.setZero(); });
}

void Parameters::scale(double factor) {
  for_each([&](const std::string&, Block b) { b *= factor; });
}

void Parameters::add_scaled(const Parameters& other, double factor) {
  std::vector<ConstBlock> blocks;
  other.for_each([&](const std::string&, ConstBlock b) { blocks.push_back(b); });
  std::size_t i = 0;
  for_each([&](const std::string& name, Block b) {
    if (i >= blocks.size() || blocks[i].rows() != b.rows() || blocks[i].cols() != b.cols()) {
      throw ContractError("parameter shape mismatch at " + name);
    }
    b += factor * blocks[i++];
  });
  if (i != blocks.size()) throw ContractError("parameter block count mismatch");
}

std::size_t parameter_count(const ModelConfig& config) { return Parameters::zeros(config).size(); }

Model init_model(const ModelConfig& config, std::mt19937_64& rng) {
  Model model{config, Parameters::zeros(config)};
  const int h = config.hidden;
  auto fill = [&](Eigen::MatrixXd& m, double limit) {
    std::uniform_real_distribution<double> dist(-limit, limit);
    // Column-major fill order is part of the seed contract.
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  };
  for (int l = 0; l < config.layers; ++l) {
    const double limit = 1.0 / std::sqrt(static_cast<double>(layer_input_dim(config, l) + h));
    for (auto& dir : model.params.layers[static_cast<std::size_t>(l)]) {
      fill(dir.w_input, limit);
      fill(dir.w_recurrent, limit);
      dir.bias.setZero();
      dir.bias.segment(h, h).setOnes();
    }
  }
  fill(model.params.w_out, 1.0 / std::sqrt(2.0 * h));
  model.params.b_out.setZero();
  return model;
}

Eigen::MatrixXd feature_matrix(const FeatureSequence& features) {
  Eigen::MatrixXd x(4, features.size());
  for (int t = 0; t < features.size(); ++t) {
    const auto& f = features.frames[static_cast<std::size_t>(t)];
    x(0, t) = f.sin_dir;
    x(1, t) = f.cos_dir;
    x(2, t) = f.norm_dist;
    x(3, t) = f.pen_state;
  }
  return x;
}

namespace {

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

DirectionCache run_direction(const LstmParams& p, const Eigen::MatrixXd& input, bool reverse) {
  const Eigen::Index h = p.w_recurrent.cols();
  const Eigen::Index steps = input.cols();
  DirectionCache c;
  c.gates = p.w_input * input;
  c.gates.colwise() += p.bias;
  c.cell.resize(h, steps);
  c.cell_tanh.resize(h, steps);
  c.hidden.resize(h, steps);

  Eigen::VectorXd h_prev = Eigen::VectorXd::Zero(h);
  Eigen::VectorXd c_prev = Eigen::VectorXd::Zero(h);
  for (Eigen::Index k = 0; k < steps; ++k) {
    const Eigen::Index t = reverse ? steps - 1 - k : k;
    auto a = c.gates.col(t);
    a.noalias() += p.w_recurrent * h_prev;
    for (Eigen::Index j = 0; j < 3 * h; ++j) a(j) = sigmoid(a(j));
    for (Eigen::Index j = 3 * h; j < 4 * h; ++j) a(j) = std::tanh(a(j));
    const auto i_gate = a.segment(0, h);
    const auto f_gate = a.segment(h, h);
    const auto o_gate = a.segment(2 * h, h);
    const auto g_gate = a.segment(3 * h, h);
    c.cell.col(t) = f_gate.cwiseProduct(c_prev) + i_gate.cwiseProduct(g_gate);
    c.cell_tanh.col(t) = c.cell.col(t).array().tanh();
    c.hidden.col(t) = o_gate.cwiseProduct(c.cell_tanh.col(t));
    h_prev = c.hidden.col(t);
    c_prev = c.cell.col(t);
  }
  return c;
}

void check_finite(const Eigen::MatrixXd& m, const std::string& where) {
  if (m.allFinite()) return;
  for (Eigen::Index t = 0; t < m.cols(); ++t) {
    if (!m.col(t).allFinite()) {
      throw NumericError("non-finite activation in " + where + " at frame " + std::to_string(t));
    }
  }
}

}  // namespace

ForwardResult forward(const Model& model, const Eigen::MatrixXd& input) {
  const auto& cfg = model.config;
  if (input.cols() < 1) throw ContractError("forward needs at least one frame");
  if (input.rows() != cfg.input_dim) throw ContractError("input dimension mismatch");
  const Eigen::Index h = cfg.hidden;

  ForwardResult r;
  Eigen::MatrixXd current = input;
  for (int l = 0; l < cfg.layers; ++l) {
    LayerCache layer;
    layer.input = current;
    const auto& params = model.params.layers[static_cast<std::size_t>(l)];
    layer.directions[0] = run_direction(params[0], current, false);
    layer.directions[1] = run_direction(params[1], current, true);
    current.resize(2 * h, input.cols());
    current.topRows(h) = layer.directions[0].hidden;
    current.bottomRows(h) = layer.directions[1].hidden;
    check_finite(current, "layer " + std::to_string(l));
    r.layers.push_back(std::move(layer));
  }
  r.top = std::move(current);
  Eigen::MatrixXd logits_cols = model.params.w_out * r.top;
  logits_cols.colwise() += model.params.b_out;
  check_finite(logits_cols, "output projection");
  r.logits = logits_cols.transpose();

  r.posteriors.resize(r.logits.rows(), r.logits.cols());
  for (Eigen::Index t = 0; t < r.logits.rows(); ++t) {
    const double m = r.logits.row(t).maxCoeff();
    auto e = (r.logits.row(t).array() - m).exp();
    r.posteriors.row(t) = e / e.sum();
  }
  return r;
}

ForwardResult forward(const Model& model, const FeatureSequence& features) {
  return forward(model, feature_matrix(features));
}

namespace {

// Accumulates parameter gradients of one direction and returns dLoss/dInput.
Eigen::MatrixXd backprop_direction(const LstmParams& p, const DirectionCache& c,
                                   const Eigen::MatrixXd& input, const Eigen::MatrixXd& dhidden,
                                   bool reverse, LstmParams& grad) {
  const Eigen::Index h = p.w_recurrent.cols();
  const Eigen::Index steps = input.cols();
  Eigen::MatrixXd dpre(4 * h, steps);
  Eigen::MatrixXd h_prev_all = Eigen::MatrixXd::Zero(h, steps);

  Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(h);
  Eigen::VectorXd dc_next = Eigen::VectorXd::Zero(h);
  for (Eigen::Index k = steps - 1; k >= 0; --k) {
    const Eigen::Index t = reverse ? steps - 1 - k : k;
    const bool has_prev = k > 0;
    const Eigen::Index t_prev = reverse ? t + 1 : t - 1;

    const auto a = c.gates.col(t);
    const auto i_gate = a.segment(0, h).array();
    const auto f_gate = a.segment(h, h).array();
    const auto o_gate = a.segment(2 * h, h).array();
    const auto g_gate = a.segment(3 * h, h).array();
    const auto tanh_c = c.cell_tanh.col(t).array();

    Eigen::ArrayXd dh = dhidden.col(t).array() + dh_next.array();
    Eigen::ArrayXd dc = dh * o_gate * (1.0 - tanh_c.square()) + dc_next.array();
    Eigen::ArrayXd c_prev = Eigen::ArrayXd::Zero(h);
    if (has_prev) c_prev = c.cell.col(t_prev).array();

    auto d = dpre.col(t);
    d.segment(0, h) = (dc * g_gate * i_gate * (1.0 - i_gate)).matrix();
    d.segment(h, h) = (dc * c_prev * f_gate * (1.0 - f_gate)).matrix();
    d.segment(2 * h, h) = (dh * tanh_c * o_gate * (1.0 - o_gate)).matrix();
    d.segment(3 * h, h) = (dc * i_gate * (1.0 - g_gate.square())).matrix();

    dc_next = (dc * f_gate).matrix();
    dh_next.noalias() = p.w_recurrent.transpose() * d;
    if (has_prev) h_prev_all.col(t) = c.hidden.col(t_prev);
  }
  grad.w_input.noalias() += dpre * input.transpose();
  grad.w_recurrent.noalias() += dpre * h_prev_all.transpose();
  grad.bias += dpre.rowwise().sum();
  return p.w_input.transpose() * dpre;
}

}  // namespace

Parameters backward(const Model& model, const ForwardResult& cache, const Eigen::MatrixXd& dlogits) {
  const auto& cfg = model.config;
  if (dlogits.rows() != cache.logits.rows() || dlogits.cols() != cache.logits.cols()) {
    throw ContractError("gradient shape does not match the forward cache");
  }
  if (cache.layers.size() != static_cast<std::size_t>(cfg.layers)) {
    throw ContractError("forward cache does not match the model");
  }
  const Eigen::Index h = cfg.hidden;
  Parameters grad = Parameters::zeros(cfg);

  const Eigen::MatrixXd dlogits_cols = dlogits.transpose();  // K x T
  grad.w_out.noalias() = dlogits_cols * cache.top.transpose();
  grad.b_out = dlogits_cols.rowwise().sum();
  Eigen::MatrixXd dtop = model.params.w_out.transpose() * dlogits_cols;  // 2H x T

  for (int l = cfg.layers - 1; l >= 0; --l) {
    const auto& layer = cache.layers[static_cast<std::size_t>(l)];
    const auto& params = model.params.layers[static_cast<std::size_t>(l)];
    auto& g = grad.layers[static_cast<std::size_t>(l)];
    Eigen::MatrixXd dinput =
        backprop_direction(params[0], layer.directions[0], layer.input, dtop.topRows(h), false, g[0]);
    dinput += backprop_direction(params[1], layer.directions[1], layer.input, dtop.bottomRows(h), true, g[1]);
    dtop = std::move(dinput);
  }
  return grad;
}

SgdState make_sgd_state(const ModelConfig& config) { return SgdState{Parameters::zeros(config)}; }

StepResult sgd_step(Model& model, const Parameters& grads, SgdState& state, double lr, double momentum,
                    double clip_norm) {
  StepResult result;
  const double sq = grads.squared_norm();
  result.gradient_norm = std::sqrt(sq);
  if (!std::isfinite(sq) || !grads.all_finite()) {
    result.reason = "non-finite gradient";
    return result;
  }
  double factor = 1.0;
  if (clip_norm > 0.0 && result.gradient_norm > clip_norm) factor = clip_norm / result.gradient_norm;

  state.velocity.scale(momentum);
  state.velocity.add_scaled(grads, -lr * factor);
  model.params.add_scaled(state.velocity, 1.0);
  result.applied = true;
  return result;
}

}  // namespace hmer
