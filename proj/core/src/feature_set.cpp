#include "genex/feature_set.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "genex/rng.hpp"

namespace genex {

FeatureSet::FeatureSet(std::initializer_list<int> indices) : FeatureSet(std::vector<int>(indices)) {}

FeatureSet::FeatureSet(std::vector<int> indices) : items_(std::move(indices)) {
  std::sort(items_.begin(), items_.end());
  items_.erase(std::unique(items_.begin(), items_.end()), items_.end());
  if (!items_.empty() && items_.front() < 0) throw std::invalid_argument("FeatureSet: negative index");
}

FeatureSet FeatureSet::range(int n) {
  FeatureSet s;
  s.items_.resize(static_cast<std::size_t>(std::max(n, 0)));
  for (int i = 0; i < n; ++i) s.items_[static_cast<std::size_t>(i)] = i;
  return s;
}

FeatureSet FeatureSet::from_bits(std::uint64_t mask) {
  FeatureSet s;
  for (int i = 0; i < 64; ++i) {
    if (mask >> i & 1u) s.items_.push_back(i);
  }
  return s;
}

bool FeatureSet::contains(int index) const {
  return std::binary_search(items_.begin(), items_.end(), index);
}

bool FeatureSet::insert(int index) {
  if (index < 0) throw std::invalid_argument("FeatureSet: negative index");
  auto it = std::lower_bound(items_.begin(), items_.end(), index);
  if (it != items_.end() && *it == index) return false;
  items_.insert(it, index);
  return true;
}

bool FeatureSet::erase(int index) {
  auto it = std::lower_bound(items_.begin(), items_.end(), index);
  if (it == items_.end() || *it != index) return false;
  items_.erase(it);
  return true;
}

FeatureSet FeatureSet::with(int index) const {
  FeatureSet out = *this;
  out.insert(index);
  return out;
}

FeatureSet FeatureSet::union_with(const FeatureSet& other) const {
  FeatureSet out;
  out.items_.reserve(items_.size() + other.items_.size());
  std::set_union(items_.begin(), items_.end(), other.items_.begin(), other.items_.end(),
                 std::back_inserter(out.items_));
  return out;
}

FeatureSet FeatureSet::minus(const FeatureSet& other) const {
  FeatureSet out;
  std::set_difference(items_.begin(), items_.end(), other.items_.begin(), other.items_.end(),
                      std::back_inserter(out.items_));
  return out;
}

FeatureSet FeatureSet::intersect(const FeatureSet& other) const {
  FeatureSet out;
  std::set_intersection(items_.begin(), items_.end(), other.items_.begin(), other.items_.end(),
                        std::back_inserter(out.items_));
  return out;
}

bool FeatureSet::is_subset_of(const FeatureSet& other) const {
  return std::includes(other.items_.begin(), other.items_.end(), items_.begin(), items_.end());
}

bool FeatureSet::disjoint_from(const FeatureSet& other) const {
  auto a = items_.begin();
  auto b = other.items_.begin();
  while (a != items_.end() && b != other.items_.end()) {
    if (*a == *b) return false;
    if (*a < *b) ++a; else ++b;
  }
  return true;
}

std::uint64_t FeatureSet::to_bits() const {
  std::uint64_t bits = 0;
  for (int i : items_) {
    if (i >= 64) throw std::out_of_range("FeatureSet::to_bits: index >= 64");
    bits |= std::uint64_t{1} << i;
  }
  return bits;
}

std::uint64_t FeatureSet::digest() const {
  std::uint64_t h = mix_seed(0x9e3779b97f4a7c15ULL, items_.size());
  for (int i : items_) h = mix_seed(h, static_cast<std::uint64_t>(i));
  return h;
}

std::string FeatureSet::to_string() const {
  std::string out = "{";
  for (std::size_t k = 0; k < items_.size(); ++k) {
    if (k) out += ',';
    out += std::to_string(items_[k]);
  }
  return out + "}";
}

std::string FeatureSet::to_list() const {
  std::string out;
  for (std::size_t k = 0; k < items_.size(); ++k) {
    if (k) out += ' ';
    out += std::to_string(items_[k]);
  }
  return out;
}

FeatureSet FeatureSet::parse_list(const std::string& text) {
  std::istringstream in(text);
  std::vector<int> v;
  int x = 0;
  while (in >> x) v.push_back(x);
  if (!in.eof()) throw std::invalid_argument("FeatureSet::parse_list: bad token in '" + text + "'");
  return FeatureSet(std::move(v));
}

}  // namespace genex
