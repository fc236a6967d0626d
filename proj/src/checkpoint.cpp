#include "hmer/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "hmer/error.hpp"

namespace hmer {

using nlohmann::json;

std::string checkpoint_to_json(const Checkpoint& c) {
  const auto& cfg = c.model.config;
  json params = json::object();
  c.model.params.for_each([&](const std::string& name, Parameters::ConstBlock block) {
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(block.size()));
    for (Eigen::Index r = 0; r < block.rows(); ++r) {
      for (Eigen::Index col = 0; col < block.cols(); ++col) flat.push_back(block(r, col));
    }
    params[name] = std::move(flat);
  });
  json doc{{"version", kCheckpointVersion},
           {"config",
            {{"model",
              {{"layers", cfg.layers}, {"hidden", cfg.hidden}, {"input_dim", cfg.input_dim}, {"output_dim", cfg.output_dim}}},
             {"train", c.train_config}}},
           {"inventory", c.inventory.symbols()},
           {"params", std::move(params)}};
  return doc.dump();
}

Checkpoint checkpoint_from_json(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what());
  }
  try {
    if (!doc.contains("version") || doc["version"] != kCheckpointVersion) {
      throw ValidationError("unsupported checkpoint version " + (doc.contains("version") ? doc["version"].dump() : "<missing>"));
    }
    Checkpoint c;
    const auto& m = doc.at("config").at("model");
    c.model.config.layers = m.at("layers").get<int>();
    c.model.config.hidden = m.at("hidden").get<int>();
    c.model.config.input_dim = m.at("input_dim").get<int>();
    c.model.config.output_dim = m.at("output_dim").get<int>();
    c.train_config = doc.at("config").value("train", json::object());
    c.inventory = ClassInventory(doc.at("inventory").get<std::vector<std::string>>());
    if (!c.inventory.symbols().empty() && c.inventory.size() != c.model.config.output_dim) {
      throw ValidationError("inventory size does not match the model output dimension");
    }
    c.model.params = Parameters::zeros(c.model.config);
    const auto& params = doc.at("params");
    c.model.params.for_each([&](const std::string& name, Parameters::Block block) {
      if (!params.contains(name)) throw ValidationError("checkpoint is missing parameter block " + name);
      const auto flat = params.at(name).get<std::vector<double>>();
      if (flat.size() != static_cast<std::size_t>(block.size())) {
        throw ValidationError("parameter block " + name + " has the wrong size");
      }
      std::size_t i = 0;
      for (Eigen::Index r = 0; r < block.rows(); ++r) {
        for (Eigen::Index col = 0; col < block.cols(); ++col) block(r, col) = flat[i++];
      }
    });
    return c;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io_error", "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io_error", "cannot write " + path.string());
  out << contents;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  write_file(path, checkpoint_to_json(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return checkpoint_from_json(read_file(path)); }

}  // namespace hmer
