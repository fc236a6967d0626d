#include "hmer/inventory.hpp"

#include <algorithm>
#include <set>

#include "hmer/error.hpp"

namespace hmer {

ClassInventory::ClassInventory(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
  std::set<std::string> seen;
  for (const auto& s : symbols_) {
    if (s.empty()) throw ConfigError("empty symbol class name");
    if (!seen.insert(s).second) throw ConfigError("duplicate symbol class '" + s + "'");
  }
}

int ClassInventory::symbol_index(std::string_view label) const {
  auto it = std::find(symbols_.begin(), symbols_.end(), label);
  if (it == symbols_.end()) throw ValidationError("unknown symbol class '" + std::string(label) + "'");
  return 1 + static_cast<int>(it - symbols_.begin());
}

bool ClassInventory::has_symbol(std::string_view label) const {
  return std::find(symbols_.begin(), symbols_.end(), label) != symbols_.end();
}

const std::string& ClassInventory::symbol_label(int k) const {
  if (!is_symbol_class(k)) throw ContractError("class " + std::to_string(k) + " is not a symbol");
  return symbols_[static_cast<std::size_t>(k - 1)];
}

Relation ClassInventory::relation_of(int k) const {
  if (!is_relation_class(k)) throw ContractError("class " + std::to_string(k) + " is not a relation");
  return static_cast<Relation>(k - relation_begin());
}

std::string ClassInventory::class_name(int k) const {
  if (k == kBlank) return "<blank>";
  if (is_symbol_class(k)) return symbol_label(k);
  return std::string(relation_name(relation_of(k)));
}

}  // namespace hmer
