// Python extension: ink preprocessing, CTC loss, LaTeX emission and the
// recognizer.

#include <memory>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hmer/checkpoint.hpp"
#include "hmer/error.hpp"
#include "hmer/ink.hpp"
#include "hmer/loss.hpp"
#include "hmer/pipeline.hpp"
#include "hmer/service.hpp"
#include "hmer/srt.hpp"

namespace py = pybind11;

namespace {

using PointList = std::vector<std::pair<double, double>>;

hmer::Ink ink_from(const std::vector<PointList>& strokes) {
  hmer::Ink ink;
  for (const auto& s : strokes) {
    hmer::Stroke stroke;
    for (auto [x, y] : s) stroke.push_back({x, y});
    ink.strokes.push_back(std::move(stroke));
  }
  return ink;
}

std::vector<PointList> strokes_of(const hmer::Ink& ink) {
  std::vector<PointList> out;
  for (const auto& s : ink.strokes) {
    PointList pts;
    for (const auto& p : s) pts.emplace_back(p.x, p.y);
    out.push_back(std::move(pts));
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Online handwritten math expression recognition";

  py::register_exception<hmer::Error>(m, "HmerError", PyExc_ValueError);

  m.def(
      "parse_ink",
      [](const std::string& document, const std::string& format) {
        return strokes_of(hmer::parse_ink(document, hmer::ink_format_from_string(format)));
      },
      py::arg("document"), py::arg("format") = "native", "Strokes as lists of (x, y) pairs.");

  m.def(
      "normalize", [](const std::vector<PointList>& strokes) { return strokes_of(hmer::normalize(ink_from(strokes))); },
      py::arg("strokes"));

  m.def(
      "ramer_simplify",
      [](const PointList& points, double epsilon) {
        std::vector<hmer::Point> pts;
        for (auto [x, y] : points) pts.push_back({x, y});
        PointList out;
        for (const auto& p : hmer::ramer_simplify(pts, epsilon)) out.emplace_back(p.x, p.y);
        return out;
      },
      py::arg("points"), py::arg("epsilon") = hmer::kDefaultEpsilon);

  m.def(
      "featurize",
      [](const std::vector<PointList>& strokes, double epsilon) {
        const hmer::FeatureSequence f = hmer::featurize(ink_from(strokes), epsilon);
        Eigen::MatrixXd out(f.size(), 4);
        for (int t = 0; t < f.size(); ++t) {
          const auto& v = f.frames[static_cast<std::size_t>(t)];
          out.row(t) << v.sin_dir, v.cos_dir, v.norm_dist, v.pen_state;
        }
        return out;
      },
      py::arg("strokes"), py::arg("epsilon") = hmer::kDefaultEpsilon,
      "T x 4 frames (sin, cos, normalized distance, pen state); the ink should already be normalized.");

  m.def(
      "ctc_loss",
      [](const Eigen::MatrixXd& posteriors, const std::vector<int>& target) {
        const hmer::CtcCache c = hmer::ctc_forward(posteriors, target);
        return py::make_tuple(c.loss, hmer::ctc_gradient(c));
      },
      py::arg("posteriors"), py::arg("target"), "Negative log-likelihood and its gradient wrt the logits.");

  m.def(
      "srt_to_latex", [](const std::string& srt_json) { return hmer::srt_to_latex(hmer::parse_srt(srt_json)); },
      py::arg("srt_json"));

  py::class_<hmer::Recognizer, std::shared_ptr<hmer::Recognizer>>(m, "Recognizer")
      .def(py::init([](const std::string& checkpoint, const std::string& grammar) {
             return std::make_shared<hmer::Recognizer>(hmer::make_recognizer(
                 hmer::load_checkpoint(checkpoint), hmer::parse_grammar(hmer::read_file(grammar))));
           }),
           py::arg("checkpoint"), py::arg("grammar"))
      .def(
          "recognize_json",
          [](const hmer::Recognizer& r, const std::vector<PointList>& strokes, int topk) {
            hmer::Recognition rec;
            {
              py::gil_scoped_release release;
              rec = r.recognize(ink_from(strokes), topk);
            }
            return hmer::recognition_to_json(rec, 0.0).dump();
          },
          py::arg("strokes"), py::arg("topk") = 5);
}
