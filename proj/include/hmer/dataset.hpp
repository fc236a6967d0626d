#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hmer/ink.hpp"
#include "hmer/inventory.hpp"
#include "hmer/srt.hpp"

namespace hmer {

struct Sample {
  std::string name;
  Ink ink;
  SrtNode tree;
};

// A dataset directory holds NAME.ink.json (native ink) or NAME.inkml next to
// NAME.srt.json for every sample. Samples load in name order.
std::vector<Sample> load_dataset(const std::filesystem::path& dir);
void save_dataset(const std::vector<Sample>& samples, const std::filesystem::path& dir);

// Sorted distinct symbol labels used by the dataset's trees.
std::vector<std::string> dataset_symbols(const std::vector<Sample>& samples);

// Throws ValidationError when a tree's strokes do not match its ink.
void check_sample(const Sample& sample);

}  // namespace hmer
