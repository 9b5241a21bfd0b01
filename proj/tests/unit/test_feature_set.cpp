#include "doctest.h"
#include "genex/feature_set.hpp"
#include "genex/rng.hpp"

using genex::FeatureSet;

TEST_CASE("feature set keeps members sorted and unique") {
  FeatureSet s{5, 1, 3, 1};
  CHECK(s.indices() == std::vector<int>{1, 3, 5});
  CHECK(s.size() == 3);
  CHECK(s.contains(3));
  CHECK_FALSE(s.contains(2));
  CHECK(s.insert(2));
  CHECK_FALSE(s.insert(2));
  CHECK(s.erase(5));
  CHECK(s.to_string() == "{1,2,3}");
}

TEST_CASE("set algebra") {
  FeatureSet a{0, 1, 2}, b{2, 3};
  CHECK(a.union_with(b) == FeatureSet{0, 1, 2, 3});
  CHECK(a.minus(b) == FeatureSet{0, 1});
  CHECK(a.intersect(b) == FeatureSet{2});
  CHECK(FeatureSet{1}.is_subset_of(a));
  CHECK_FALSE(b.is_subset_of(a));
  CHECK(FeatureSet{0}.disjoint_from(b));
  CHECK(FeatureSet::range(3) == a);
  CHECK(a.with(7) == FeatureSet{0, 1, 2, 7});
}

TEST_CASE("bit and text encodings round trip") {
  FeatureSet s{0, 3, 9};
  CHECK(s.to_bits() == ((1ULL << 0) | (1ULL << 3) | (1ULL << 9)));
  CHECK(FeatureSet::from_bits(s.to_bits()) == s);
  CHECK(FeatureSet::parse_list(s.to_list()) == s);
  CHECK(FeatureSet::parse_list("") == FeatureSet{});
  CHECK_THROWS(FeatureSet::parse_list("1 x"));
  CHECK_THROWS(FeatureSet{-1});
  CHECK_THROWS(FeatureSet{64}.to_bits());
}

TEST_CASE("lexicographic order and digest") {
  CHECK(FeatureSet{0, 5} < FeatureSet{1});
  CHECK(FeatureSet{} < FeatureSet{0});
  CHECK(FeatureSet{0, 1}.digest() == FeatureSet{1, 0}.digest());
  CHECK(FeatureSet{0, 1}.digest() != FeatureSet{0, 2}.digest());
}

TEST_CASE("derived seeds are stable and distinct") {
  CHECK(genex::derive_seed(1, 2) == genex::derive_seed(1, 2));
  CHECK(genex::derive_seed(1, 2) != genex::derive_seed(1, 3));
  CHECK(genex::derive_seed(1, 2, 3) != genex::derive_seed(1, 3, 2));
  genex::Rng a(7), b(7);
  for (int i = 0; i < 5; ++i) CHECK(a.normal() == b.normal());
  genex::Rng r(3);
  for (int i = 0; i < 100; ++i) CHECK(r.below(5) < 5);
}
