#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "hmer/error.hpp"
#include "hmer/inventory.hpp"
#include "hmer/loss.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace hmer;

namespace {

// p(l | x) by summing over every path of length T.
double brute_force_probability(const Posteriors& y, const std::vector<int>& target) {
  const int t_len = static_cast<int>(y.rows());
  const int k = static_cast<int>(y.cols());
  std::vector<int> path(static_cast<std::size_t>(t_len), 0);
  double total = 0.0;
  while (true) {
    if (collapse_path(path) == target) {
      double p = 1.0;
      for (int t = 0; t < t_len; ++t) p *= y(t, path[static_cast<std::size_t>(t)]);
      total += p;
    }
    int pos = 0;
    while (pos < t_len && ++path[static_cast<std::size_t>(pos)] == k) path[static_cast<std::size_t>(pos++)] = 0;
    if (pos == t_len) break;
  }
  return total;
}

std::vector<FrameSpan> spans_for(const std::vector<int>& stroke_lengths) {
  std::vector<FrameSpan> spans;
  int t = 0;
  for (std::size_t i = 0; i < stroke_lengths.size(); ++i) {
    if (i > 0) spans.push_back({SpanKind::kOffStroke, static_cast<int>(i), t, t + 1}), ++t;
    spans.push_back({SpanKind::kStroke, static_cast<int>(i), t, t + stroke_lengths[i]});
    t += stroke_lengths[i];
  }
  return spans;
}

OutputLayout layout_with(int symbols) {
  std::vector<std::string> names;
  for (int i = 0; i < symbols; ++i) names.push_back(std::string(1, static_cast<char>('a' + i)));
  return OutputLayout::from(ClassInventory(names));
}

}  // namespace

TEST_CASE("collapse_path examples") {
  CHECK(collapse_path(std::vector<int>{1, 1, 0, 1}) == std::vector<int>{1, 1});
  CHECK(collapse_path(std::vector<int>{0, 0}).empty());
  CHECK(collapse_path(std::vector<int>{1, 0, 2, 2}) == std::vector<int>{1, 2});
}

TEST_CASE("ctc_min_frames counts repeated neighbours") {
  CHECK(ctc_min_frames(std::vector<int>{1}) == 1);
  CHECK(ctc_min_frames(std::vector<int>{1, 1}) == 3);
  CHECK(ctc_min_frames(std::vector<int>{1, 2, 2, 3}) == 5);
}

TEST_CASE("ctc_forward small examples") {
  Posteriors uniform(2, 2);
  uniform.setConstant(0.5);
  CHECK(ctc_forward(uniform, std::vector<int>{1}).loss == doctest::Approx(-std::log(0.75)));
  Posteriors one(1, 2);
  one << 0.1, 0.9;
  CHECK(ctc_forward(one, std::vector<int>{1}).loss == doctest::Approx(-std::log(0.9)));
  CHECK_THROWS_AS(ctc_forward(uniform, std::vector<int>{1, 1}), InfeasibleTargetError);
  CHECK_THROWS_AS(ctc_forward(uniform, std::vector<int>{}), ContractError);
  CHECK_THROWS_AS(ctc_forward(uniform, std::vector<int>{0}), ContractError);
}

TEST_CASE("ctc_forward matches enumeration on small instances") {
  std::mt19937_64 rng(21);
  int checked = 0;
  for (int k = 2; k <= 3; ++k) {
    for (int t = 1; t <= 6; ++t) {
      for (int trial = 0; trial < 5; ++trial) {
        const Posteriors y = test::softmax(test::random_logits(t, k, rng));
        std::uniform_int_distribution<int> len(1, 3), label(1, k - 1);
        std::vector<int> target(static_cast<std::size_t>(len(rng)));
        for (auto& v : target) v = label(rng);
        if (ctc_min_frames(target) > t) continue;
        const double p = brute_force_probability(y, target);
        CHECK(std::exp(-ctc_forward(y, target).loss) == doctest::Approx(p).epsilon(1e-9));
        ++checked;
      }
    }
  }
  CHECK(checked > 40);
}

TEST_CASE("ctc gradient rows sum to zero and match finite differences") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const int t = 2 + trial % 4;
    const int k = 3 + trial % 2;
    const Eigen::MatrixXd logits = test::random_logits(t, k, rng);
    const std::vector<int> target = {1 + trial % (k - 1)};
    const CtcCache cache = ctc_forward(softmax_rows(logits), target);
    const Eigen::MatrixXd g = ctc_gradient(cache);
    for (int r = 0; r < t; ++r) CHECK(std::abs(g.row(r).sum()) < 1e-9);
    const double err = test::fd_relative_error_long(logits, g, [&](const Eigen::MatrixXd& z) {
      return test::ctc_loss_reference(z, target);
    });
    CHECK(err < 1e-6);
  }
}

TEST_CASE("ctc gradient pushes a dominant path up") {
  // Frames strongly favour the path [1, 0, 2].
  Eigen::MatrixXd logits = Eigen::MatrixXd::Zero(3, 3);
  logits(0, 1) = 5;
  logits(1, 0) = 5;
  logits(2, 2) = 5;
  const Eigen::MatrixXd g = ctc_gradient(ctc_forward(softmax_rows(logits), std::vector<int>{1, 2}));
  CHECK(g(0, 1) < 0);
  CHECK(g(2, 2) < 0);
}

TEST_CASE("raising a feasible path never increases the loss") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    Posteriors y = test::softmax(test::random_logits(5, 3, rng));
    const std::vector<int> target = {1, 2};
    const std::vector<int> path = {1, 1, 0, 2, 2};
    const double before = ctc_forward(y, target).loss;
    for (int t = 0; t < 5; ++t) {
      y(t, path[static_cast<std::size_t>(t)]) *= 1.5;
      y.row(t) /= y.row(t).sum();
    }
    CHECK(ctc_forward(y, target).loss <= before + 1e-12);
  }
}

TEST_CASE("ctc stays finite on long sequences with tiny posteriors") {
  const int t = 2000;
  Posteriors y(t, 3);
  for (int r = 0; r < t; ++r) y.row(r) << 1.0 - 2e-12, 1e-12, 1e-12;
  const double loss = ctc_forward(y, std::vector<int>{1, 2, 1}).loss;
  CHECK(std::isfinite(loss));
  CHECK(loss > 0.0);
  CHECK(ctc_gradient(ctc_forward(y, std::vector<int>{1, 2, 1})).allFinite());
}

TEST_CASE("constraint_loss examples") {
  const OutputLayout layout = layout_with(2);  // blank, 2 symbols, 7 relations
  const auto spans = spans_for({1});
  Posteriors clean = Posteriors::Zero(1, layout.num_classes);
  clean(0, 1) = 1.0;
  CHECK(constraint_loss(clean, spans, layout).loss == 0.0);
  Posteriors half = Posteriors::Zero(1, layout.num_classes);
  half(0, 1) = 0.5;
  half(0, layout.relation_begin) = 0.3;
  half(0, layout.relation_begin + 4) = 0.2;
  CHECK(constraint_loss(half, spans, layout).loss == doctest::Approx(-std::log(0.5)));
}

TEST_CASE("constraint_loss ignores off-stroke frames and flags clamping") {
  const OutputLayout layout = layout_with(2);
  const auto spans = spans_for({1, 1});
  Posteriors y = Posteriors::Zero(3, layout.num_classes);
  y(0, 1) = 1.0;
  y(1, layout.relation_begin) = 1.0;
  y(2, 2) = 1.0;
  CHECK(constraint_loss(y, spans, layout).loss == 0.0);
  y(2, 2) = 0.0;
  y(2, layout.relation_begin + 1) = 1.0;
  const ConstraintResult c = constraint_loss(y, spans, layout);
  CHECK(std::isfinite(c.loss));
  CHECK(c.clamped_terms == 1);
}

TEST_CASE("constraint loss matches the reference") {
  std::mt19937_64 rng(30);
  const OutputLayout layout = layout_with(3);
  const auto spans = spans_for({2, 1, 3});
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd logits = test::random_logits(8, layout.num_classes, rng, 2.0);
    for (bool per_stroke : {false, true}) {
      const auto g = per_stroke ? ConstraintGranularity::kPerStroke : ConstraintGranularity::kPerFrame;
      const double ref = static_cast<double>(
          test::constraint_loss_reference(logits, spans, layout.relation_begin, layout.relation_count, per_stroke));
      CHECK(constraint_loss(softmax_rows(logits), spans, layout, g).loss == doctest::Approx(ref).epsilon(1e-12));
    }
  }
}

TEST_CASE("constraint gradient matches finite differences") {
  std::mt19937_64 rng(31);
  const OutputLayout layout = layout_with(3);
  for (auto granularity : {ConstraintGranularity::kPerFrame, ConstraintGranularity::kPerStroke}) {
    for (int trial = 0; trial < 20; ++trial) {
      const auto spans = spans_for({2, 1, 3});
      const Eigen::MatrixXd logits = test::random_logits(8, layout.num_classes, rng, 2.0);
      const Eigen::MatrixXd g = constraint_loss(softmax_rows(logits), spans, layout, granularity).gradient;
      const double err = test::fd_relative_error_long(logits, g, [&](const Eigen::MatrixXd& z) {
        return test::constraint_loss_reference(z, spans, layout.relation_begin, layout.relation_count,
                                               granularity == ConstraintGranularity::kPerStroke);
      });
      CHECK(err < 1e-6);
    }
  }
}

TEST_CASE("combined_loss is ctc plus lambda times constraint") {
  std::mt19937_64 rng(2);
  const OutputLayout layout = layout_with(2);
  const auto spans = spans_for({2, 2});
  const Eigen::MatrixXd logits = test::random_logits(5, layout.num_classes, rng);
  const Posteriors y = softmax_rows(logits);
  const std::vector<int> target = {1, layout.relation_begin + 4, 2};
  const CombinedLoss zero = combined_loss(y, target, spans, layout, 0.0);
  const CtcCache ctc = ctc_forward(y, target);
  CHECK(zero.report.combined == ctc.loss);
  CHECK(zero.gradient == ctc_gradient(ctc));
  const CombinedLoss def = combined_loss(y, target, spans, layout);
  CHECK(def.report.lambda == 0.1);
  CHECK(def.report.combined == def.report.ctc + 0.1 * def.report.constraint);
  const Eigen::MatrixXd expected = ctc_gradient(ctc) + 0.1 * constraint_loss(y, spans, layout).gradient;
  CHECK((def.gradient - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("combined_loss equals ctc when the constraint vanishes") {
  const OutputLayout layout = layout_with(2);
  const auto spans = spans_for({1, 1});
  Posteriors y = Posteriors::Zero(3, layout.num_classes);
  y(0, 1) = 1.0;
  y(1, layout.relation_begin + 4) = 1.0;
  y(2, 2) = 1.0;
  const CombinedLoss c = combined_loss(y, std::vector<int>{1, layout.relation_begin + 4, 2}, spans, layout);
  CHECK(c.report.constraint == 0.0);
  CHECK(c.report.combined == c.report.ctc);
}
