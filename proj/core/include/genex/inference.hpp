#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "genex/dataset.hpp"
#include "genex/models.hpp"
#include "genex/partition.hpp"

namespace genex {

/// What the engine may see of a test instance: x[O] (zeros elsewhere).
struct ObservedView {
  int id = 0;
  Eigen::VectorXd values;
  FeatureSet observed;

  static ObservedView of(const Instance& inst);
};

/// Returns x[indices] in index order for the given instance id.
using Oracle = std::function<Eigen::VectorXd(int instance_id, const FeatureSet& indices)>;

/// Oracle backed by the ground-truth rows of `d`, keyed by instance id.
/// Counts every feature it hands out in `*served` when non-null.
Oracle dataset_oracle(const Dataset& d, long long* served = nullptr);

struct BucketModel {
  ClassifierParams classifier;
  GeneratorParams generator;
  FeatureSet acquire;   // U_b*
  FeatureSet generate;  // V_b*
};

struct InferenceEngine {
  HyperplaneBank bank;
  std::map<std::uint32_t, BucketModel> buckets;
  /// Confidence threshold gating the generated features.
  double tau = 0.0;
  int generator_samples = 1;
  /// Cluster centers on zero-padded observed vectors. When non-empty,
  /// instances go to the nearest trained center instead of the hash bucket.
  std::map<std::uint32_t, Eigen::VectorXd> centroids;

  std::set<std::uint32_t> trained() const;
};

/// Bucket that serves x: hash lookup with Hamming fallback, or the nearest
/// trained centroid (ties to the smaller code) when centroids are set.
std::uint32_t route(const InferenceEngine& engine, const Eigen::VectorXd& values, const FeatureSet& observed);

struct InferenceOutcome {
  int instance_id = 0;
  std::uint32_t bucket = 0;
  int label = -1;  // ground truth if known, else -1
  int predicted = 0;
  double confidence = 0.0;
  bool used_generator = false;
  int oracle_queries = 0;
};

/// Routes to a bucket, queries x[U \ V \ O], samples x~[V \ O] conditioned on
/// x[O u U \ V], and falls back to querying V when the confidence is below tau.
InferenceOutcome infer(const InferenceEngine& engine, const ObservedView& x, const Oracle& oracle, Rng& rng);

/// Max-class confidence on the generated path (no fallback).
double generated_path_confidence(const InferenceEngine& engine, const ObservedView& x, const Oracle& oracle, Rng& rng);

/// Threshold such that round(quantile * N) validation instances clear it.
/// quantile in (0, 1]. Throws std::invalid_argument on an empty set.
double calibrate_tau(const InferenceEngine& engine, const Dataset& validation, double quantile, std::uint64_t seed);

void write_outcomes(const std::vector<InferenceOutcome>& outcomes, const std::string& path);
std::vector<InferenceOutcome> read_outcomes(const std::string& path);

/// Engine checkpoint: hyperplane bank parameters, tau, and every bucket's
/// parameters and sets in full precision.
void save_engine(const InferenceEngine& engine, const std::string& path);
InferenceEngine load_engine(const std::string& path);

}  // namespace genex
