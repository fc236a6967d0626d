#include "hmer/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hmer/error.hpp"
#include "hmer/inventory.hpp"

namespace hmer {

namespace {

constexpr double kLogZero = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

}  // namespace

OutputLayout OutputLayout::from(const ClassInventory& inventory) {
  return OutputLayout{inventory.size(), ClassInventory::kBlank, inventory.relation_begin(), kRelationCount};
}

Posteriors softmax_rows(const Eigen::MatrixXd& logits) {
  Posteriors p(logits.rows(), logits.cols());
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    auto e = (logits.row(t).array() - logits.row(t).maxCoeff()).exp();
    p.row(t) = e / e.sum();
  }
  return p;
}

std::vector<int> collapse_path(std::span<const int> path, int blank) {
  std::vector<int> out;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i > 0 && path[i] == path[i - 1]) continue;
    if (path[i] != blank) out.push_back(path[i]);
  }
  return out;
}

int ctc_min_frames(std::span<const int> target) {
  int n = static_cast<int>(target.size());
  for (std::size_t i = 1; i < target.size(); ++i) {
    if (target[i] == target[i - 1]) ++n;
  }
  return n;
}

CtcCache ctc_forward(const Posteriors& posteriors, std::span<const int> target, int blank) {
  const Eigen::Index frames = posteriors.rows();
  const Eigen::Index classes = posteriors.cols();
  if (target.empty()) throw ContractError("CTC target is empty");
  for (int k : target) {
    if (k == blank) throw ContractError("CTC target contains blank");
    if (k < 0 || k >= classes) throw ContractError("CTC target class " + std::to_string(k) + " out of range");
  }
  const int needed = ctc_min_frames(target);
  if (frames < needed) {
    throw InfeasibleTargetError("target of length " + std::to_string(target.size()) + " needs " +
                                std::to_string(needed) + " frames, sequence has " + std::to_string(frames));
  }

  CtcCache c;
  c.blank = blank;
  c.posteriors = posteriors;
  c.log_probs = posteriors.array().max(kProbabilityFloor).min(1.0 - kProbabilityFloor).log().matrix();
  c.extended.reserve(2 * target.size() + 1);
  c.extended.push_back(blank);
  for (int k : target) {
    c.extended.push_back(k);
    c.extended.push_back(blank);
  }
  const Eigen::Index states = static_cast<Eigen::Index>(c.extended.size());
  const auto& ext = c.extended;
  auto can_skip = [&](Eigen::Index s) { return s >= 2 && ext[s] != blank && ext[s] != ext[s - 2]; };

  c.log_alpha = Eigen::MatrixXd::Constant(frames, states, kLogZero);
  c.log_alpha(0, 0) = c.log_probs(0, ext[0]);
  if (states > 1) c.log_alpha(0, 1) = c.log_probs(0, ext[1]);
  for (Eigen::Index t = 1; t < frames; ++t) {
    for (Eigen::Index s = 0; s < states; ++s) {
      double a = c.log_alpha(t - 1, s);
      if (s >= 1) a = log_add(a, c.log_alpha(t - 1, s - 1));
      if (can_skip(s)) a = log_add(a, c.log_alpha(t - 1, s - 2));
      if (a != kLogZero) c.log_alpha(t, s) = a + c.log_probs(t, ext[s]);
    }
  }

  c.log_beta = Eigen::MatrixXd::Constant(frames, states, kLogZero);
  c.log_beta(frames - 1, states - 1) = c.log_probs(frames - 1, ext[states - 1]);
  if (states > 1) c.log_beta(frames - 1, states - 2) = c.log_probs(frames - 1, ext[states - 2]);
  for (Eigen::Index t = frames - 2; t >= 0; --t) {
    for (Eigen::Index s = 0; s < states; ++s) {
      double b = c.log_beta(t + 1, s);
      if (s + 1 < states) b = log_add(b, c.log_beta(t + 1, s + 1));
      if (s + 2 < states && can_skip(s + 2)) b = log_add(b, c.log_beta(t + 1, s + 2));
      if (b != kLogZero) c.log_beta(t, s) = b + c.log_probs(t, ext[s]);
    }
  }

  double ll = c.log_alpha(frames - 1, states - 1);
  if (states > 1) ll = log_add(ll, c.log_alpha(frames - 1, states - 2));
  c.log_likelihood = ll;
  c.loss = -ll;
  return c;
}

Eigen::MatrixXd ctc_gradient(const CtcCache& c) {
  const Eigen::Index frames = c.posteriors.rows();
  const Eigen::Index classes = c.posteriors.cols();
  const Eigen::Index states = static_cast<Eigen::Index>(c.extended.size());
  Eigen::MatrixXd grad = c.posteriors;
  std::vector<double> occupancy(static_cast<std::size_t>(classes));
  for (Eigen::Index t = 0; t < frames; ++t) {
    std::fill(occupancy.begin(), occupancy.end(), kLogZero);
    for (Eigen::Index s = 0; s < states; ++s) {
      const double ab = c.log_alpha(t, s) + c.log_beta(t, s);
      auto& slot = occupancy[static_cast<std::size_t>(c.extended[s])];
      slot = log_add(slot, ab);
    }
    for (Eigen::Index k = 0; k < classes; ++k) {
      const double o = occupancy[static_cast<std::size_t>(k)];
      if (o == kLogZero) continue;
      // alpha and beta both include y_k^t once, hence the extra division.
      grad(t, k) -= std::exp(o - c.log_probs(t, k) - c.log_likelihood);
    }
  }
  return grad;
}

ConstraintResult constraint_loss(const Posteriors& posteriors, std::span<const FrameSpan> span_map,
                                 const OutputLayout& layout, ConstraintGranularity granularity) {
  ConstraintResult r;
  r.gradient = Eigen::MatrixXd::Zero(posteriors.rows(), posteriors.cols());
  const Eigen::Index rel0 = layout.relation_begin;
  const Eigen::Index rel_n = layout.relation_count;
  if (rel0 + rel_n > posteriors.cols()) throw ContractError("relation classes exceed posterior width");

  auto mass = [&](Eigen::Index t) { return posteriors.row(t).segment(rel0, rel_n).sum(); };
  // d(mass_t)/d(logit_k) = y_k (1[k is relation] - mass_t)
  auto add_mass_gradient = [&](Eigen::Index t, double m, double scale) {
    for (Eigen::Index k = 0; k < posteriors.cols(); ++k) {
      const double indicator = layout.is_relation(static_cast<int>(k)) ? 1.0 : 0.0;
      r.gradient(t, k) += scale * posteriors(t, k) * (indicator - m);
    }
  };
  auto clamp = [&](double m) {
    if (m > 1.0 - kProbabilityFloor) {
      ++r.clamped_terms;
      return 1.0 - kProbabilityFloor;
    }
    return m;
  };

  for (const auto& span : span_map) {
    if (span.kind != SpanKind::kStroke) continue;
    if (span.begin < 0 || span.end > posteriors.rows()) throw ContractError("span outside the posteriors");
    if (granularity == ConstraintGranularity::kPerFrame) {
      for (Eigen::Index t = span.begin; t < span.end; ++t) {
        const double m = mass(t);
        const double mc = clamp(m);
        r.loss -= std::log1p(-mc);
        add_mass_gradient(t, m, 1.0 / (1.0 - mc));
      }
    } else {
      const double n = span.length();
      double mean = 0.0;
      for (Eigen::Index t = span.begin; t < span.end; ++t) mean += mass(t) / n;
      const double mc = clamp(mean);
      r.loss -= std::log1p(-mc);
      for (Eigen::Index t = span.begin; t < span.end; ++t) add_mass_gradient(t, mass(t), 1.0 / ((1.0 - mc) * n));
    }
  }
  return r;
}

CombinedLoss combined_loss(const Posteriors& posteriors, std::span<const int> target,
                           std::span<const FrameSpan> span_map, const OutputLayout& layout, double lambda,
                           ConstraintGranularity granularity) {
  if (lambda < 0.0) throw ConfigError("lambda must be non-negative");
  CombinedLoss out;
  const CtcCache ctc = ctc_forward(posteriors, target, layout.blank);
  out.gradient = ctc_gradient(ctc);
  out.report.ctc = ctc.loss;
  out.report.lambda = lambda;
  ConstraintResult con = constraint_loss(posteriors, span_map, layout, granularity);
  out.report.constraint = con.loss;
  out.report.clamped_terms = con.clamped_terms;
  if (lambda != 0.0) out.gradient += lambda * con.gradient;
  out.report.combined = out.report.ctc + lambda * out.report.constraint;
  return out;
}

}  // namespace hmer
