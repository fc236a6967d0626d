#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "hmer/inventory.hpp"
#include "hmer/net.hpp"

namespace hmer {

inline constexpr int kCheckpointVersion = 1;

// Versioned JSON envelope:
//   {"version": 1,
//    "config": {"model": {layers, hidden, input_dim, output_dim}, "train": {...}},
//    "inventory": [symbol, ...],
//    "params": {"layer0.fwd.W": [...], ..., "out.b": [...]}}
// Every parameter block is written row-major.
struct Checkpoint {
  Model model;
  ClassInventory inventory;
  nlohmann::json train_config = nlohmann::json::object();
};

std::string checkpoint_to_json(const Checkpoint& checkpoint);
// Throws ParseError for malformed documents and ValidationError for unknown
// versions or shape mismatches.
Checkpoint checkpoint_from_json(std::string_view document);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace hmer
