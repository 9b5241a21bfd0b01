#pragma once

#include <cstdint>
#include <vector>

#include "genex/dataset.hpp"

namespace genex::synthetic {

struct InformativeSpec {
  int size = 3000;
  int n = 30;
  int num_classes = 4;
  int informative = 5;
  /// Plant copies x[r] = x[a] + noise of informative features a; r is drawn
  /// from the non-informative columns.
  int redundant = 0;
  double redundant_noise = 0.05;
  std::uint64_t seed = 1;
};

struct InformativeData {
  Dataset data;
  FeatureSet informative;
  /// Pairs (copy column, source column).
  std::vector<std::pair<int, int>> redundant;
};

/// x ~ N(0, I_n); y = argmax_c (A x[informative])_c for a seeded random A.
/// Observed sets are left empty.
InformativeData informative_classes(const InformativeSpec& spec);

/// Isotropic standard normal vectors with label 0, all features observed.
Dataset isotropic(int size, int n, std::uint64_t seed);

/// Blobs with centers +/- separation * e_0 and unit spread; label = blob.
Dataset two_blobs(int per_blob, int n, double separation, std::uint64_t seed);

/// Two Gaussian clusters elongated along a shared random direction (long
/// axis std `stretch`, others 1), centers +/- offset along another direction.
Dataset elongated_clusters(int size, int n, double stretch, double offset, std::uint64_t seed);

}  // namespace genex::synthetic
