#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "genex/dataset.hpp"

namespace genex {

/// n x M matrix of i.i.d. N(0,1) hyperplane normals, regenerable from seed.
struct HyperplaneBank {
  int n = 0;
  int M = 0;
  std::uint64_t seed = 0;
  Eigen::MatrixXd W;
};

HyperplaneBank make_bank(int n, int M, std::uint64_t seed);

/// Versioned text file: header, "n M seed", then W row-major. On load W is
/// regenerated from the seed and compared against the stored copy.
void save_bank(const HyperplaneBank& bank, const std::string& path);
HyperplaneBank load_bank(const std::string& path);

/// Sign pattern over the M hyperplanes. Canonical code: bit for hyperplane m
/// is set iff its sign is +1, with hyperplane 0 as the most significant bit.
struct BucketId {
  std::uint32_t code = 0;
  int M = 0;

  /// +1 / -1 per hyperplane.
  std::vector<int> signs() const;
  static BucketId from_signs(const std::vector<int>& signs);

  friend bool operator==(const BucketId& a, const BucketId& b) { return a.code == b.code && a.M == b.M; }
  friend bool operator<(const BucketId& a, const BucketId& b) { return a.code < b.code; }
};

int hamming_distance(const BucketId& a, const BucketId& b);

/// Bucket of x restricted to `observed`, unobserved coordinates read as zero.
/// sgn(0) is taken as +1. Throws std::out_of_range on bad indices.
BucketId hash_observed(const HyperplaneBank& bank, const Eigen::VectorXd& x, const FeatureSet& observed);

/// Bucket code -> positions (into d.instances) of its members. Empty buckets
/// are absent.
using Partitioning = std::map<std::uint32_t, std::vector<int>>;

Partitioning partition(const HyperplaneBank& bank, const Dataset& d);

/// Hash of x if that bucket was trained, otherwise the trained bucket at
/// minimum Hamming distance (ties go to the smaller code).
BucketId find_bucket(const HyperplaneBank& bank, const Eigen::VectorXd& x, const FeatureSet& observed,
                     const std::set<std::uint32_t>& trained);

/// Lloyd's algorithm on zero-padded observed vectors with k-means++ seeding.
Partitioning kmeans_partition(const Dataset& d, int B, std::uint64_t seed, int iters = 50);

/// min / max size over non-empty cells.
double bucket_skew(const Partitioning& parts);

/// Mean cosine of each vector with the mean vector; 0 if the mean is ~0.
double conicity(const std::vector<Eigen::VectorXd>& vectors);

/// Zero-padded x[O].
Eigen::VectorXd padded_observed(const Instance& inst);

}  // namespace genex
