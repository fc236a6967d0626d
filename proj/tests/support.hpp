#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "hmer/ink.hpp"
#include "hmer/inventory.hpp"
#include "hmer/srt.hpp"

namespace hmer::test {

inline Eigen::MatrixXd random_logits(int rows, int cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = n(rng);
  return m;
}

inline Eigen::MatrixXd softmax(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (int r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    double z = 0.0;
    for (int c = 0; c < logits.cols(); ++c) z += std::exp(logits(r, c) - m);
    for (int c = 0; c < logits.cols(); ++c) out(r, c) = std::exp(logits(r, c) - m) / z;
  }
  return out;
}

inline Ink ink_of(std::vector<Stroke> strokes) { return Ink{std::move(strokes)}; }

// Distance from p to the segment ab.
inline double segment_distance(Point p, Point a, Point b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  if (len2 == 0.0) return std::hypot(p.x - a.x, p.y - a.y);
  const double t = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

inline SrtNode leaf(std::string label, std::vector<int> strokes) {
  SrtNode n;
  n.label = std::move(label);
  n.strokes = std::move(strokes);
  return n;
}

}  // namespace hmer::test
