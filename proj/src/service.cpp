#include "hmer/service.hpp"

#include <chrono>
#include <cstdio>

#include <httplib.h>

#include "hmer/error.hpp"

namespace hmer {

using nlohmann::json;

namespace {

HttpResponse error_response(int status, std::string_view kind, std::string_view message, json extra = json::object()) {
  json body{{"error", {{"kind", kind}, {"message", message}}}};
  for (auto& [k, v] : extra.items()) body[k] = v;
  return {status, body.dump()};
}

const SrtNode* find_symbol(const SrtNode& node, int first, int last) {
  if (node.strokes.front() == first && node.strokes.back() == last &&
      static_cast<int>(node.strokes.size()) == last - first + 1) {
    return &node;
  }
  for (const auto& c : node.children) {
    if (const SrtNode* n = find_symbol(c.node, first, last)) return n;
  }
  return nullptr;
}

}  // namespace

json recognition_to_json(const Recognition& r, double timing_ms) {
  json alternatives = json::array();
  for (const auto& a : r.alternatives) alternatives.push_back({{"latex", a.latex}, {"probability", a.probability}});

  json segments = json::array();
  for (const auto& seg : r.lattice.segments) {
    std::string symbol;
    double probability = 0.0;
    const SrtNode* chosen = r.tree ? find_symbol(*r.tree, seg.first_stroke, seg.last_stroke) : nullptr;
    for (const auto& c : seg.candidates) {
      if (chosen ? c.label == chosen->label : symbol.empty()) {
        symbol = c.label;
        probability = c.probability;
        break;
      }
    }
    segments.push_back({{"first_stroke", seg.first_stroke},
                        {"last_stroke", seg.last_stroke},
                        {"symbol", symbol},
                        {"probability", probability}});
  }

  json relations = json::array();
  for (const auto& b : r.lattice.boundaries) {
    if (b.is_blank()) continue;
    relations.push_back({{"boundary_index", b.offstroke_index},
                         {"relation", relation_name(*b.decided)},
                         {"probability", b.score(*b.decided)}});
  }
  return {{"latex", r.latex},
          {"probability", r.probability},
          {"alternatives", std::move(alternatives)},
          {"segments", std::move(segments)},
          {"relations", std::move(relations)},
          {"timing_ms", timing_ms}};
}

RecognitionService::RecognitionService(std::shared_ptr<const Recognizer> recognizer, ServiceOptions options)
    : recognizer_(std::move(recognizer)), options_(std::move(options)) {
  if (!recognizer_) throw ConfigError("service needs a recognizer");
  if (options_.max_strokes < 1 || options_.max_points < 1) throw ConfigError("service caps must be positive");
}

HttpResponse RecognitionService::recognize(std::string_view body) const {
  const auto start = std::chrono::steady_clock::now();
  Ink ink;
  int topk = options_.default_topk;
  try {
    ink = parse_ink(body, InkFormat::kNative);
    const json doc = json::parse(body);
    if (doc.contains("topk")) {
      if (!doc["topk"].is_number_integer() || doc["topk"].get<long>() < 1 || doc["topk"].get<long>() > options_.max_topk) {
        return error_response(400, "validation_error",
                              "topk must be an integer in [1, " + std::to_string(options_.max_topk) + "]");
      }
      topk = doc["topk"].get<int>();
    }
  } catch (const Error& e) {
    return error_response(400, e.kind(), e.what());
  } catch (const json::exception& e) {
    return error_response(400, "parse_error", e.what());
  }

  const auto strokes = static_cast<long>(ink.strokes.size());
  const auto points = static_cast<long>(ink.point_count());
  if (strokes > options_.max_strokes || points > options_.max_points) {
    return error_response(413, "too_large",
                          "request has " + std::to_string(strokes) + " strokes and " + std::to_string(points) +
                              " points",
                          {{"limits", {{"max_strokes", options_.max_strokes}, {"max_points", options_.max_points}}}});
  }

  try {
    const Recognition r = recognizer_->recognize(ink, topk);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return {200, recognition_to_json(r, ms).dump()};
  } catch (const ValidationError& e) {
    return error_response(400, e.kind(), e.what());
  } catch (const Error& e) {
    return error_response(500, e.kind(), e.what());
  }
}

HttpResponse RecognitionService::health() const {
  return {200, json{{"status", "ok"}, {"model_version", options_.model_version}}.dump()};
}

void RecognitionService::mount(httplib::Server& server) const {
  constexpr const char* kJson = "application/json; charset=utf-8";
  server.Post("/v1/recognize", [this, kJson](const httplib::Request& req, httplib::Response& res) {
    const HttpResponse r = recognize(req.body);
    res.status = r.status;
    res.set_content(r.body, kJson);
  });
  server.Get("/v1/health", [this, kJson](const httplib::Request&, httplib::Response& res) {
    const HttpResponse r = health();
    res.status = r.status;
    res.set_content(r.body, kJson);
  });
}

std::string model_version_of(std::string_view document) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : document) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace hmer
