#include "hmer/evaluate.hpp"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "hmer/error.hpp"
#include "hmer/loss.hpp"

namespace hmer {

using nlohmann::json;

int outcome_index(Relation r) {
  switch (r) {
    case Relation::kAbove: return 0;
    case Relation::kBelow: return 1;
    case Relation::kInside: return 2;
    case Relation::kRight: return 3;
    case Relation::kSub: return 4;
    case Relation::kSup: return 5;
    case Relation::kNoRel: return 6;
  }
  throw ContractError("unknown relation");
}

void ConfusionMatrix::add(int truth, int prediction) {
  if (truth < 0 || truth >= kOutcomeCount || prediction < 0 || prediction >= kOutcomeCount) {
    throw ContractError("confusion outcome out of range");
  }
  ++counts[static_cast<std::size_t>(truth)][static_cast<std::size_t>(prediction)];
}

long ConfusionMatrix::row_total(int truth) const {
  const auto& row = counts.at(static_cast<std::size_t>(truth));
  return std::accumulate(row.begin(), row.end(), 0L);
}

std::array<std::array<double, kOutcomeCount>, kOutcomeCount> ConfusionMatrix::percentages() const {
  std::array<std::array<double, kOutcomeCount>, kOutcomeCount> out{};
  for (int r = 0; r < kOutcomeCount; ++r) {
    const long total = row_total(r);
    if (total == 0) continue;
    const auto& row = counts[static_cast<std::size_t>(r)];
    std::array<long, kOutcomeCount> hundredths{};
    std::array<long, kOutcomeCount> remainder{};
    long assigned = 0;
    for (std::size_t c = 0; c < row.size(); ++c) {
      hundredths[c] = 10000L * row[c] / total;
      remainder[c] = 10000L * row[c] % total;
      assigned += hundredths[c];
    }
    std::array<std::size_t, kOutcomeCount> idx{};
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (long k = 0; k < 10000L - assigned; ++k) ++hundredths[idx[static_cast<std::size_t>(k)]];
    for (std::size_t c = 0; c < row.size(); ++c) out[static_cast<std::size_t>(r)][c] = hundredths[c] / 100.0;
  }
  return out;
}

std::string format_confusion_table(const ConfusionMatrix& matrix) {
  const auto pct = matrix.percentages();
  std::ostringstream out;
  out << "Truth \\ Predicted";
  for (auto name : kOutcomeNames) out << '\t' << name;
  out << "\tTotal\n";
  out << std::fixed << std::setprecision(2);
  for (int r = 0; r < kOutcomeCount; ++r) {
    out << kOutcomeNames[static_cast<std::size_t>(r)];
    for (int c = 0; c < kOutcomeCount; ++c) out << '\t' << pct[r][c];
    out << '\t' << matrix.row_total(r) << '\n';
  }
  return out.str();
}

namespace {

void collect_symbols(const SrtNode& node, std::vector<PredictedSymbol>& out) {
  out.push_back({node.strokes, node.label});
  for (const auto& c : node.children) collect_symbols(c.node, out);
}

std::vector<PredictedSymbol> tree_symbols(const SrtNode& root) {
  std::vector<PredictedSymbol> out;
  collect_symbols(root, out);
  return out;
}

json rate_json(const Rate& r) { return {{"hits", r.hits}, {"total", r.total}, {"rate", r.value()}}; }

}  // namespace

json EvalReport::to_json() const {
  json confusion_json = json::object();
  const auto pct = confusion.percentages();
  for (int r = 0; r < kOutcomeCount; ++r) {
    json row = json::object();
    for (int c = 0; c < kOutcomeCount; ++c) row[std::string(kOutcomeNames[static_cast<std::size_t>(c)])] = pct[r][c];
    row["Total"] = confusion.row_total(r);
    confusion_json[std::string(kOutcomeNames[static_cast<std::size_t>(r)])] = row;
  }
  json by_size = json::object();
  for (const auto& [n, rate] : expression_by_size) by_size[std::to_string(n)] = rate_json(rate);
  return {{"samples", samples},
          {"segmentation", {{"recall", rate_json(seg_recall)}, {"precision", rate_json(seg_precision)}}},
          {"segmentation_classification",
           {{"recall", rate_json(segcls_recall)}, {"precision", rate_json(segcls_precision)}}},
          {"relations", confusion_json},
          {"expression_rate", rate_json(expression)},
          {"structure_rate", rate_json(structure)},
          {"expression_rate_by_size", by_size}};
}

EvalReport score_predictions(const std::vector<Sample>& truth, const std::vector<SamplePrediction>& predictions) {
  if (truth.size() != predictions.size()) throw ContractError("one prediction per sample is required");
  EvalReport report;
  report.samples = static_cast<long>(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto& pred = predictions[i];
    const auto reference = tree_symbols(truth[i].tree);
    for (const auto& ref : reference) {
      bool seg = false;
      bool segcls = false;
      for (const auto& p : pred.symbols) {
        if (p.strokes == ref.strokes) {
          seg = true;
          segcls = segcls || p.label == ref.label;
        }
      }
      report.seg_recall.hits += seg;
      report.segcls_recall.hits += segcls;
    }
    report.seg_recall.total += static_cast<long>(reference.size());
    report.segcls_recall.total += static_cast<long>(reference.size());
    for (const auto& p : pred.symbols) {
      bool seg = false;
      bool segcls = false;
      for (const auto& ref : reference) {
        if (p.strokes == ref.strokes) {
          seg = true;
          segcls = segcls || p.label == ref.label;
        }
      }
      report.seg_precision.hits += seg;
      report.segcls_precision.hits += segcls;
    }
    report.seg_precision.total += static_cast<long>(pred.symbols.size());
    report.segcls_precision.total += static_cast<long>(pred.symbols.size());

    for (const auto& [t, p] : pred.relation_outcomes) report.confusion.add(t, p);

    const bool exact = pred.tree && srt_equal(*pred.tree, truth[i].tree);
    const bool structure = pred.tree && srt_structure_equal(*pred.tree, truth[i].tree);
    report.expression.hits += exact;
    report.structure.hits += structure;
    ++report.expression.total;
    ++report.structure.total;
    auto& bucket = report.expression_by_size[reference.size()];
    bucket.hits += exact;
    ++bucket.total;
  }
  return report;
}

SamplePrediction predict_sample(const Recognizer& recognizer, const Sample& sample, const EvalConfig& config,
                                std::mt19937_64& rng) {
  SamplePrediction pred;
  const Recognition rec = recognizer.recognize(sample.ink, 1);
  if (rec.tree) {
    pred.tree = rec.tree;
    pred.symbols = tree_symbols(*rec.tree);
  } else {
    for (const auto& seg : rec.lattice.segments) {
      PredictedSymbol s;
      for (int k = seg.first_stroke; k <= seg.last_stroke; ++k) s.strokes.push_back(k);
      s.label = seg.candidates.empty() ? std::string() : seg.candidates.front().label;
      pred.symbols.push_back(std::move(s));
    }
  }

  const auto& inventory = recognizer.inventory();
  const double eps = recognizer.config().epsilon;
  for (int r = 0; r < config.relation_paths; ++r) {
    const LabeledPath path = extract_random_path(sample.tree, rng);
    const FeatureSequence features = featurize(select_strokes(rec.normalized, path.stroke_order()), eps);
    const Posteriors post = forward(recognizer.model(), features).posteriors;
    const auto decisions = classify_offstrokes(post, features.span_map, inventory, recognizer.config().top_relations,
                                              recognizer.config().boundary_rule);
    const auto targets = path_targets(path, inventory);
    for (std::size_t k = 0; k < decisions.size(); ++k) {
      const int label = targets.offstroke_labels.at(k);
      const int truth = label < 0 ? kNonSeg : outcome_index(inventory.relation_of(label));
      const int guess = decisions[k].decided ? outcome_index(*decisions[k].decided) : kNonSeg;
      pred.relation_outcomes.emplace_back(truth, guess);
    }
  }
  return pred;
}

EvalReport evaluate(const Recognizer& recognizer, const std::vector<Sample>& samples, const EvalConfig& config) {
  std::mt19937_64 rng(config.seed);
  std::vector<SamplePrediction> predictions;
  predictions.reserve(samples.size());
  for (const auto& s : samples) predictions.push_back(predict_sample(recognizer, s, config, rng));
  return score_predictions(samples, predictions);
}

BoundaryReport boundary_report(const Model& model, const ClassInventory& inventory, const std::vector<Sample>& samples,
                               double epsilon, BoundaryRule rule) {
  BoundaryReport report;
  const OutputLayout layout = OutputLayout::from(inventory);
  double mass = 0.0;
  long frames = 0;
  for (const auto& s : samples) {
    const LabeledPath path = derive_path_writing_order(s.tree);
    const FeatureSequence features = featurize(select_strokes(normalize(s.ink), path.stroke_order()), epsilon);
    const Posteriors post = forward(model, features).posteriors;
    for (const auto& span : features.span_map) {
      if (span.kind != SpanKind::kStroke) continue;
      for (int t = span.begin; t < span.end; ++t) {
        mass += post.row(t).segment(layout.relation_begin, layout.relation_count).sum();
        ++frames;
      }
    }
    const auto decisions = classify_offstrokes(post, features.span_map, inventory, kDefaultTopRelations, rule);
    const auto targets = path_targets(path, inventory);
    for (std::size_t k = 0; k < decisions.size(); ++k) {
      const int label = targets.offstroke_labels.at(k);
      const auto& d = decisions[k].decided;
      const bool ok = label < 0 ? !d.has_value() : (d.has_value() && inventory.relation_index(*d) == label);
      report.offstroke_accuracy.hits += ok;
      ++report.offstroke_accuracy.total;
      if (label >= 0) {
        report.relation_accuracy.hits += ok;
        ++report.relation_accuracy.total;
      }
    }
  }
  report.mean_stroke_relation_mass = frames > 0 ? mass / static_cast<double>(frames) : 0.0;
  return report;
}

}  // namespace hmer
