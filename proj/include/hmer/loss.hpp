#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hmer/ink.hpp"
#include "hmer/net.hpp"

namespace hmer {

class ClassInventory;

// Where blank and the relation classes sit among the network outputs.
struct OutputLayout {
  int num_classes = 0;
  int blank = 0;
  int relation_begin = 0;
  int relation_count = 7;

  static OutputLayout from(const ClassInventory& inventory);
  bool is_relation(int k) const { return k >= relation_begin && k < relation_begin + relation_count; }
};

inline constexpr double kProbabilityFloor = 1e-12;

Posteriors softmax_rows(const Eigen::MatrixXd& logits);

// Merges adjacent duplicates, then drops blanks.
std::vector<int> collapse_path(std::span<const int> path, int blank = 0);

// Smallest frame count a CTC alignment of `target` needs.
int ctc_min_frames(std::span<const int> target);

struct CtcCache {
  double loss = 0.0;
  double log_likelihood = 0.0;
  std::vector<int> extended;  // blank-augmented target
  Eigen::MatrixXd log_alpha;  // T x |extended|
  Eigen::MatrixXd log_beta;   // T x |extended|
  Posteriors posteriors;      // T x K as given
  Eigen::MatrixXd log_probs;  // T x K, clamped
  int blank = 0;
};

// -log p(target | x) by the log-space forward-backward recursion. Throws
// InfeasibleTargetError when T is too short and ContractError for targets
// that are empty or contain blank.
CtcCache ctc_forward(const Posteriors& posteriors, std::span<const int> target, int blank = 0);

// dLoss/dLogits for the posteriors' pre-softmax logits.
Eigen::MatrixXd ctc_gradient(const CtcCache& cache);

enum class ConstraintGranularity { kPerFrame, kPerStroke };

struct ConstraintResult {
  double loss = 0.0;
  Eigen::MatrixXd gradient;  // dLoss/dLogits, T x K
  int clamped_terms = 0;
};

// Binary cross-entropy against relation mass at pen-down frames:
// -sum log(1 - relation mass). Off-stroke frames contribute nothing.
ConstraintResult constraint_loss(const Posteriors& posteriors, std::span<const FrameSpan> span_map,
                                 const OutputLayout& layout,
                                 ConstraintGranularity granularity = ConstraintGranularity::kPerFrame);

inline constexpr double kDefaultLambda = 0.1;

struct LossReport {
  double ctc = 0.0;
  double constraint = 0.0;
  double combined = 0.0;
  double lambda = kDefaultLambda;
  int clamped_terms = 0;
};

struct CombinedLoss {
  LossReport report;
  Eigen::MatrixXd gradient;  // dLoss/dLogits
};

CombinedLoss combined_loss(const Posteriors& posteriors, std::span<const int> target,
                           std::span<const FrameSpan> span_map, const OutputLayout& layout,
                           double lambda = kDefaultLambda,
                           ConstraintGranularity granularity = ConstraintGranularity::kPerFrame);

}  // namespace hmer
