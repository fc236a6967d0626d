#include "hmer/dataset.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "hmer/checkpoint.hpp"
#include "hmer/error.hpp"

namespace hmer {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kInkSuffix = ".ink.json";
constexpr std::string_view kInkmlSuffix = ".inkml";
constexpr std::string_view kSrtSuffix = ".srt.json";

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void collect_labels(const SrtNode& node, std::set<std::string>& out) {
  out.insert(node.label);
  for (const auto& c : node.children) collect_labels(c.node, out);
}

}  // namespace

void check_sample(const Sample& sample) {
  validate_srt(sample.tree);
  if (srt_stroke_count(sample.tree) != sample.ink.strokes.size()) {
    throw ValidationError("sample '" + sample.name + "': tree covers " + std::to_string(srt_stroke_count(sample.tree)) +
                          " strokes but the ink has " + std::to_string(sample.ink.strokes.size()));
  }
}

std::vector<Sample> load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("io_error", "dataset directory not found: " + dir.string());
  std::map<std::string, fs::path> inks;
  std::map<std::string, fs::path> trees;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string file = entry.path().filename().string();
    if (ends_with(file, kInkSuffix)) {
      inks[file.substr(0, file.size() - kInkSuffix.size())] = entry.path();
    } else if (ends_with(file, kInkmlSuffix)) {
      inks[file.substr(0, file.size() - kInkmlSuffix.size())] = entry.path();
    } else if (ends_with(file, kSrtSuffix)) {
      trees[file.substr(0, file.size() - kSrtSuffix.size())] = entry.path();
    }
  }
  std::vector<Sample> samples;
  for (const auto& [name, ink_path] : inks) {
    auto t = trees.find(name);
    if (t == trees.end()) throw ValidationError("sample '" + name + "' has no " + std::string(kSrtSuffix));
    const bool inkml = ends_with(ink_path.filename().string(), kInkmlSuffix);
    Sample s{name, parse_ink(read_file(ink_path), inkml ? InkFormat::kInkML : InkFormat::kNative),
             parse_srt(read_file(t->second))};
    check_sample(s);
    samples.push_back(std::move(s));
  }
  if (samples.empty()) throw ValidationError("dataset directory " + dir.string() + " holds no samples");
  return samples;
}

void save_dataset(const std::vector<Sample>& samples, const fs::path& dir) {
  fs::create_directories(dir);
  for (const auto& s : samples) {
    write_file(dir / (s.name + std::string(kInkSuffix)), to_native_json(s.ink));
    write_file(dir / (s.name + std::string(kSrtSuffix)), srt_to_json(s.tree, 1));
  }
}

std::vector<std::string> dataset_symbols(const std::vector<Sample>& samples) {
  std::set<std::string> labels;
  for (const auto& s : samples) collect_labels(s.tree, labels);
  return {labels.begin(), labels.end()};
}

}  // namespace hmer
