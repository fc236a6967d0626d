// Acceptance checks, one PASS/FAIL line each. Exit status is the number of
// failures. An optional argument names a file for the overfit checkpoint.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "cyk_oracle.hpp"
#include "hmer/checkpoint.hpp"
#include "hmer/evaluate.hpp"
#include "hmer/grammar.hpp"
#include "hmer/loss.hpp"
#include "hmer/net.hpp"
#include "hmer/pipeline.hpp"
#include "hmer/synthetic.hpp"
#include "hmer/train.hpp"
#include "oracles.hpp"
#include "support.hpp"
#include "toy_eval.hpp"

using namespace hmer;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  failures += !ok;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
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

// Every label sequence of length 1..max_len over 1..k-1.
std::vector<std::vector<int>> all_targets(int k, int max_len) {
  std::vector<std::vector<int>> out;
  std::function<void(std::vector<int>&)> grow = [&](std::vector<int>& cur) {
    if (!cur.empty()) out.push_back(cur);
    if (static_cast<int>(cur.size()) == max_len) return;
    for (int l = 1; l < k; ++l) {
      cur.push_back(l);
      grow(cur);
      cur.pop_back();
    }
  };
  std::vector<int> cur;
  grow(cur);
  return out;
}

void ctc_oracle() {
  const auto start = Clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  long instances = 0;
  for (int k = 2; k <= 3; ++k) {
    for (int t = 1; t <= 6; ++t) {
      for (const auto& target : all_targets(k, 3)) {
        if (ctc_min_frames(target) > t) continue;
        for (int draw = 0; draw < 3; ++draw) {
          const Eigen::MatrixXd logits = test::random_logits(t, k, rng, 2.0);
          const long double ref = test::ctc_probability_by_enumeration(test::softmax_long(logits), target);
          const double p = std::exp(-ctc_forward(softmax_rows(logits), target).loss);
          worst = std::max(worst, static_cast<double>(std::abs(static_cast<long double>(p) - ref)));
          ++instances;
        }
      }
    }
  }
  const double secs = seconds_since(start);
  report("ctc_oracle", worst <= 1e-9 && secs < 5.0,
         fmt("%ld instances (T<=6, K<=3, |l|<=3), max |p - p_enum| = %.3g, %.2f s", instances, worst, secs));
}

void loss_gradients() {
  std::mt19937_64 rng(202);
  double ctc_worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const int k = 2 + static_cast<int>(rng() % 3);
    const int t = 1 + static_cast<int>(rng() % 5);
    std::vector<int> target;
    const int len = 1 + static_cast<int>(rng() % 3);
    for (int j = 0; j < len; ++j) target.push_back(1 + static_cast<int>(rng() % static_cast<unsigned>(k - 1)));
    if (ctc_min_frames(target) > t) {
      --i;
      continue;
    }
    const Eigen::MatrixXd logits = test::random_logits(t, k, rng, 1.5);
    const Eigen::MatrixXd g = ctc_gradient(ctc_forward(softmax_rows(logits), target));
    ctc_worst = std::max(ctc_worst, test::fd_relative_error_long(logits, g, [&](const Eigen::MatrixXd& z) {
                           return test::ctc_loss_reference(z, target);
                         }));
  }
  double constraint_worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const OutputLayout layout = OutputLayout::from(ClassInventory({"a", "b"}));
    std::vector<int> lengths;
    const int strokes = 1 + static_cast<int>(rng() % 3);
    for (int s = 0; s < strokes; ++s) lengths.push_back(1 + static_cast<int>(rng() % 3));
    const auto spans = spans_for(lengths);
    const int t = spans.back().end;
    const bool per_stroke = i % 2 == 1;
    const Eigen::MatrixXd logits = test::random_logits(t, layout.num_classes, rng, 1.5);
    const Eigen::MatrixXd g =
        constraint_loss(softmax_rows(logits), spans, layout,
                        per_stroke ? ConstraintGranularity::kPerStroke : ConstraintGranularity::kPerFrame)
            .gradient;
    constraint_worst = std::max(constraint_worst, test::fd_relative_error_long(logits, g, [&](const Eigen::MatrixXd& z) {
                                  return test::constraint_loss_reference(z, spans, layout.relation_begin,
                                                                         layout.relation_count, per_stroke);
                                }));
  }
  report("loss_gradients", ctc_worst < 1e-6 && constraint_worst < 1e-6,
         fmt("200 CTC instances max rel err %.3g; 200 constraint instances max rel err %.3g", ctc_worst,
             constraint_worst));
}

void model_gradient() {
  // K = 6: blank, two symbols, three relation classes.
  OutputLayout layout;
  layout.num_classes = 6;
  layout.blank = 0;
  layout.relation_begin = 3;
  layout.relation_count = 3;
  std::mt19937_64 rng(303);
  Model m = init_model({1, 3, 4, 6}, rng);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd x(4, 5);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
  const auto spans = spans_for({2, 2});
  const std::vector<int> target = {1, 4, 2};
  auto loss = [&](const Model& model) {
    return combined_loss(forward(model, x).posteriors, target, spans, layout, 0.1).report.combined;
  };
  const ForwardResult f = forward(m, x);
  const CombinedLoss c = combined_loss(f.posteriors, target, spans, layout, 0.1);
  const Parameters grad = backward(m, f, c.gradient);
  std::vector<double> g;
  grad.for_each([&](const std::string&, Parameters::ConstBlock b) {
    for (Eigen::Index i = 0; i < b.size(); ++i) g.push_back(b.data()[i]);
  });
  double worst = 0.0;
  std::size_t idx = 0;
  const double h = 1e-5;
  m.params.for_each([&](const std::string&, Parameters::Block block) {
    for (Eigen::Index i = 0; i < block.size(); ++i, ++idx) {
      const double keep = block.data()[i];
      block.data()[i] = keep + h;
      const double up = loss(m);
      block.data()[i] = keep - h;
      const double down = loss(m);
      block.data()[i] = keep;
      const double numeric = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(numeric - g[idx]) / std::max({1e-4, std::abs(numeric), std::abs(g[idx])}));
    }
  });
  report("model_gradient", worst < 1e-4,
         fmt("%zu parameters (1 layer, H=3, T=5, K=6, lambda=0.1), max rel err %.3g", idx, worst));
}

void cyk_oracle(const Grammar& g) {
  const std::vector<std::string> alphabet = {"1", "2", "x", "-", "+", "\\sqrt", "\\sum", "n"};
  std::mt19937_64 rng(404);
  double worst = 0.0;
  int parsed = 0;
  bool agree = true;
  long derivations = 0;
  const auto start = Clock::now();
  for (int seed = 0; seed < 100; ++seed) {
    const int n = 1 + seed % 6;
    const auto problem = test::random_parse_problem(rng, n, alphabet, 2, 3);
    const auto oracle = problem.oracle();
    const ParseResult r = cyk_parse(g, problem.lattice, oracle, {0});
    long count = 0;
    const double expected = test::DerivationEnumerator(g, problem.lattice, oracle).best(&count);
    derivations += count;
    if (expected < 0) {
      agree = agree && !r.complete();
    } else if (!r.complete()) {
      agree = false;
    } else {
      ++parsed;
      worst = std::max(worst, std::abs(r.parses[0]->probability - expected));
    }
  }
  report("cyk_oracle", agree && worst <= 1e-12,
         fmt("100 seeds (1..6 segments), %d parsed, %ld derivations enumerated, max |chart - exhaustive| = %.3g, "
             "%.2f s",
             parsed, derivations, worst, seconds_since(start)));
}

void random_paths() {
  // r has a Sup child a (with its own Right child c) and a Right child b.
  SrtNode root = test::leaf("r", {0});
  SrtNode a = test::leaf("a", {1});
  a.add_child(Relation::kRight, test::leaf("c", {2}));
  root.add_child(Relation::kSup, a);
  root.add_child(Relation::kRight, test::leaf("b", {3}));
  std::mt19937_64 rng(505);
  std::map<std::string, int> counts;
  bool contiguous = true;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const LabeledPath p = extract_random_path(root, rng);
    std::string order;
    for (std::size_t k = 0; k < p.nodes.size(); ++k) {
      const auto& l = p.nodes[k].label;
      if (l == "c") {
        contiguous = contiguous && k > 0 && p.nodes[k - 1].label == "a";
      } else {
        order += l;
      }
    }
    contiguous = contiguous && p.nodes.size() == 4;
    ++counts[order];
  }
  double worst = 0.0;
  for (const auto& [order, n] : counts) worst = std::max(worst, std::abs(n / double(draws) - 1.0 / 6.0));
  report("random_path_shuffle", counts.size() == 6 && worst <= 0.02 && contiguous,
         fmt("%zu distinct orderings in %d draws, max |freq - 1/6| = %.4f, subtrees contiguous: %s", counts.size(),
             draws, worst, contiguous ? "yes" : "no"));
}

void ramer() {
  std::mt19937_64 rng(606);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> len(1, 40);
  bool ok = true;
  double worst_excess = -1.0;
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<Point> pts;
    const int n = len(rng);
    for (int i = 0; i < n; ++i) pts.push_back({u(rng), u(rng)});
    const double eps = 0.2 * u(rng);
    const auto out = ramer_simplify(pts, eps);
    if (out.empty() || !(out.front() == pts.front()) || !(out.back() == pts.back())) {
      ok = false;
      continue;
    }
    std::vector<std::size_t> kept;
    std::size_t i = 0;
    for (const auto& q : out) {
      while (i < pts.size() && !(pts[i] == q)) ++i;
      if (i == pts.size()) break;
      kept.push_back(i++);
    }
    if (kept.size() != out.size() || kept.back() != pts.size() - 1) {
      ok = false;
      continue;
    }
    for (std::size_t k = 1; k < kept.size(); ++k) {
      for (std::size_t d = kept[k - 1] + 1; d < kept[k]; ++d) {
        worst_excess = std::max(worst_excess, test::segment_distance(pts[d], pts[kept[k - 1]], pts[kept[k]]) - eps);
      }
    }
    ok = ok && ramer_simplify(out, eps) == out;
  }
  ok = ok && worst_excess <= 1e-12;
  report("ramer", ok, fmt("500 polylines, subsequence/endpoints/fixed point %s, max (deviation - eps) = %.3g",
                          ok ? "hold" : "violated", worst_excess));
}

std::vector<Sample> overfit_corpus() {
  return generate_corpus(parse_corpus_spec(read_file(fs::path(HMER_SOURCE_DIR) / "data" / "synth_spec.json")), 1);
}

// Default optimizer settings on the small model.
TrainConfig overfit_config() {
  TrainConfig c;
  c.layers = 1;
  c.hidden = 32;
  c.epochs = 2000;
  c.seed = 1;
  return c;
}

double expression_rate(const Recognizer& rec, const std::vector<Sample>& samples) {
  int hits = 0;
  for (const auto& s : samples) {
    const Recognition r = rec.recognize(s.ink, 1);
    hits += r.tree && srt_equal(*r.tree, s.tree);
  }
  return hits / static_cast<double>(samples.size());
}

void overfit(const Grammar& g, const std::string& save_path) {
  const auto samples = overfit_corpus();
  const TrainConfig config = overfit_config();
  const ClassInventory inventory(dataset_symbols(samples));
  const auto start = Clock::now();
  double rate = 0.0;
  int epochs = 0;
  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochLog& log, const Model& model) {
    epochs = log.epoch;
    if (log.epoch % 25 != 0) return true;
    Recognizer rec(model, inventory, g, recognizer_config_from(config.to_json()));
    rate = expression_rate(rec, samples);
    return rate < 0.95;
  };
  TrainResult result = train(samples, config, hooks);
  const double secs = seconds_since(start);
  const Recognizer rec = make_recognizer(result.checkpoint, g);
  rate = expression_rate(rec, samples);
  const EvalReport eval = evaluate(rec, samples);
  report("overfit", rate >= 0.95 && secs <= 900.0,
         fmt("%zu expressions, %zu symbol classes, 1x32 BLSTM, %d epochs, training-set expression rate %.1f%% "
             "(structure %.1f%%, seg recall %.1f%%), %.0f s",
             samples.size(), inventory.symbols().size(), epochs, 100.0 * rate, 100.0 * eval.structure.value(),
             100.0 * eval.seg_recall.value(), secs));

  const BoundaryReport b = boundary_report(result.checkpoint.model, result.checkpoint.inventory, samples);
  report("constraint_effect", b.mean_stroke_relation_mass < 0.05 && b.relation_accuracy.value() >= 0.95,
         fmt("mean relation mass at stroke frames %.4f, inter-symbol boundaries decided correctly %ld/%ld (%.1f%%)",
             b.mean_stroke_relation_mass, b.relation_accuracy.hits, b.relation_accuracy.total,
             100.0 * b.relation_accuracy.value()));

  if (!save_path.empty()) save_checkpoint(result.checkpoint, save_path);
}

void metric_harness() {
  const EvalReport r = score_predictions(test::toy_truth(), test::toy_predictions());
  const int sup = outcome_index(Relation::kSup), right = outcome_index(Relation::kRight);
  const int below = outcome_index(Relation::kBelow), norel = outcome_index(Relation::kNoRel);
  const auto pct = r.confusion.percentages();
  bool ok = r.seg_recall.hits == 7 && r.seg_recall.total == 8 && r.seg_precision.hits == 7 &&
            r.seg_precision.total == 9 && r.segcls_recall.hits == 6 && r.segcls_recall.total == 8 &&
            r.segcls_precision.hits == 6 && r.segcls_precision.total == 9 && r.expression.hits == 1 &&
            r.structure.hits == 2 && r.expression.total == 3;
  ok = ok && pct[sup][sup] == 75.0 && pct[sup][right] == 25.0 && pct[kNonSeg][kNonSeg] == 33.33 &&
       pct[kNonSeg][right] == 66.67 && pct[norel][norel] == 66.67 && pct[norel][kNonSeg] == 33.33 &&
       pct[below][below] == 100.0 && pct[right][right] == 100.0;
  double worst_row = 0.0;
  for (int t = 0; t < kOutcomeCount; ++t) {
    if (r.confusion.row_total(t) == 0) continue;
    double sum = 0.0;
    for (double v : pct[t]) sum += v;
    worst_row = std::max(worst_row, std::abs(sum - 100.0));
  }
  ok = ok && worst_row <= 0.01;
  report("metric_harness", ok,
         fmt("seg R/P %ld/%ld %ld/%ld, seg+cls R/P %ld/%ld %ld/%ld, expression %ld/3, structure %ld/3, "
             "max |row sum - 100| = %.3g",
             r.seg_recall.hits, r.seg_recall.total, r.seg_precision.hits, r.seg_precision.total, r.segcls_recall.hits,
             r.segcls_recall.total, r.segcls_precision.hits, r.segcls_precision.total, r.expression.hits,
             r.structure.hits, worst_row));
}

void determinism(const Grammar& g) {
  const auto samples = overfit_corpus();
  TrainConfig config = overfit_config();
  config.epochs = 200;
  auto run = [&] {
    const TrainResult t = train(samples, config);
    const Recognizer rec = make_recognizer(t.checkpoint, g);
    return std::pair{checkpoint_to_json(t.checkpoint), evaluate(rec, samples).to_json().dump()};
  };
  const auto a = run();
  const auto b = run();
  report("determinism", a == b,
         fmt("two seeded train+evaluate runs (%d epochs): checkpoints %s, reports %s", config.epochs,
             a.first == b.first ? "identical" : "differ", a.second == b.second ? "identical" : "differ"));
}

}  // namespace

int main(int argc, char** argv) {
  const std::string save_path = argc > 1 ? argv[1] : "";
  try {
    const Grammar g = parse_grammar(read_file(fs::path(HMER_SOURCE_DIR) / "data" / "toy.grammar"));
    ctc_oracle();
    loss_gradients();
    model_gradient();
    cyk_oracle(g);
    random_paths();
    ramer();
    overfit(g, save_path);
    metric_harness();
    determinism(g);
  } catch (const std::exception& e) {
    std::printf("FAIL aborted: %s\n", e.what());
    return 1;
  }
  return failures;
}
