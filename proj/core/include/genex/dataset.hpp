#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "genex/feature_set.hpp"

namespace genex {

/// One example: full feature vector (oracle values), class label, and the
/// indices observed before any acquisition. `id` is the source row index.
struct Instance {
  int id = 0;
  Eigen::VectorXd features;
  int label = 0;
  FeatureSet observed;
};

enum class SplitTag { full, train, validation, test };

const char* to_string(SplitTag tag);

struct Dataset {
  std::vector<Instance> instances;
  int n = 0;
  int num_classes = 0;
  SplitTag split = SplitTag::full;

  int size() const { return static_cast<int>(instances.size()); }
  bool empty() const { return instances.empty(); }
  const Instance& operator[](int i) const { return instances[static_cast<std::size_t>(i)]; }

  /// Throws std::invalid_argument if any instance breaks the shared-n or
  /// label-range invariants.
  void validate() const;

  /// Rows selected by position, keeping n / num_classes / split.
  Dataset subset(const std::vector<int>& positions) const;
};

struct LoadOptions {
  std::string features_path;
  /// Column of the features file holding labels. Ignored when labels_path is set.
  std::string label_column = "label";
  /// Optional single-column label file (header optional).
  std::string labels_path;
  /// Optional 0/1 CSV with the same shape as the feature matrix.
  std::string mask_path;
  /// 0 means infer as max label + 1.
  int num_classes = 0;
};

/// Reads the feature CSV (header f0..f{n-1}, plus the label column unless a
/// separate label file is given) and decodes observed sets from the mask.
/// Without a mask every observed set is empty.
Dataset load_dataset(const LoadOptions& options);

/// Writes `<features_path>` with columns f0..f{n-1},label and `<mask_path>`
/// with the observation mask. Values use 17 significant digits so a reload is
/// bit-identical.
void save_dataset(const Dataset& d, const std::string& features_path, const std::string& mask_path);

/// Each instance receives an independent uniformly random observed set of size
/// round(fraction * n). Deterministic under `seed`.
Dataset apply_observation_policy(const Dataset& d, double fraction, std::uint64_t seed);

struct Splits {
  Dataset train;
  Dataset validation;
  Dataset test;
};

/// Shuffled 70/10/20 split; sizes round(0.7N), round(0.1N), remainder.
Splits split_dataset(const Dataset& d, std::uint64_t seed);

/// Per-column z-scoring statistics, fit on the training split.
struct Standardization {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static Standardization fit(const Dataset& train);
  void apply(Dataset& d) const;
};

}  // namespace genex
