#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace genex {

/// Sorted, duplicate-free set of feature indices. Used for observed sets O,
/// acquisition sets U and generator subsets V.
class FeatureSet {
 public:
  FeatureSet() = default;
  FeatureSet(std::initializer_list<int> indices);
  explicit FeatureSet(std::vector<int> indices);

  /// All indices 0..n-1.
  static FeatureSet range(int n);
  /// Members are the set bits of `mask`.
  static FeatureSet from_bits(std::uint64_t mask);

  bool contains(int index) const;
  bool empty() const { return items_.empty(); }
  int size() const { return static_cast<int>(items_.size()); }

  /// Returns true if the index was not already present.
  bool insert(int index);
  bool erase(int index);

  FeatureSet with(int index) const;
  FeatureSet union_with(const FeatureSet& other) const;
  FeatureSet minus(const FeatureSet& other) const;
  FeatureSet intersect(const FeatureSet& other) const;
  bool is_subset_of(const FeatureSet& other) const;
  bool disjoint_from(const FeatureSet& other) const;

  /// Requires every member < 64.
  std::uint64_t to_bits() const;
  /// Stable 64-bit digest of the members, for seeding.
  std::uint64_t digest() const;

  /// "{0,3,7}"
  std::string to_string() const;
  /// Space separated members; inverse of parse_list.
  std::string to_list() const;
  static FeatureSet parse_list(const std::string& text);

  const std::vector<int>& indices() const { return items_; }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

  friend bool operator==(const FeatureSet&, const FeatureSet&) = default;
  /// Lexicographic on the sorted member list.
  friend bool operator<(const FeatureSet& a, const FeatureSet& b) { return a.items_ < b.items_; }

 private:
  std::vector<int> items_;
};

}  // namespace genex
