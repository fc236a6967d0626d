#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hmer/srt.hpp"

namespace hmer {

// Output classes of the temporal classifier: blank at index 0, then the
// symbol classes in order, then the seven relation classes in Relation order.
class ClassInventory {
 public:
  ClassInventory() = default;
  explicit ClassInventory(std::vector<std::string> symbols);

  static constexpr int kBlank = 0;

  int size() const { return static_cast<int>(symbols_.size()) + kRelationCount + 1; }
  int symbol_count() const { return static_cast<int>(symbols_.size()); }
  int symbol_begin() const { return 1; }
  int relation_begin() const { return 1 + symbol_count(); }

  // Throws ValidationError for unknown symbols.
  int symbol_index(std::string_view label) const;
  bool has_symbol(std::string_view label) const;
  int relation_index(Relation r) const { return relation_begin() + static_cast<int>(r); }

  bool is_symbol_class(int k) const { return k >= 1 && k < relation_begin(); }
  bool is_relation_class(int k) const { return k >= relation_begin() && k < size(); }
  const std::string& symbol_label(int k) const;
  Relation relation_of(int k) const;
  // Human-readable name of any class index.
  std::string class_name(int k) const;

  const std::vector<std::string>& symbols() const { return symbols_; }

  friend bool operator==(const ClassInventory&, const ClassInventory&) = default;

 private:
  std::vector<std::string> symbols_;
};

}  // namespace hmer
