#pragma once

#include <memory>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "hmer/pipeline.hpp"

namespace httplib {
class Server;
}

namespace hmer {

struct ServiceOptions {
  int max_strokes = 256;
  int max_points = 4096;
  int default_topk = 5;
  int max_topk = 50;
  std::string model_version = "unversioned";
};

struct HttpResponse {
  int status = 200;
  std::string body;  // application/json
};

// Response body for a recognition: latex, probability, alternatives,
// segments, relations, timing_ms.
nlohmann::json recognition_to_json(const Recognition& recognition, double timing_ms);

// Request handlers over an immutable recognizer; safe to call concurrently.
class RecognitionService {
 public:
  RecognitionService(std::shared_ptr<const Recognizer> recognizer, ServiceOptions options = {});

  // POST /v1/recognize. Body: native ink plus an optional "topk".
  HttpResponse recognize(std::string_view body) const;
  // GET /v1/health.
  HttpResponse health() const;

  // Registers both routes on `server`.
  void mount(httplib::Server& server) const;

  const ServiceOptions& options() const { return options_; }

 private:
  std::shared_ptr<const Recognizer> recognizer_;
  ServiceOptions options_;
};

// FNV-1a of a checkpoint document, as 16 hex digits.
std::string model_version_of(std::string_view checkpoint_document);

}  // namespace hmer
