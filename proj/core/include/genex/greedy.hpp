#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "genex/feature_set.hpp"
#include "genex/setfn.hpp"

namespace genex {

using SetFunction = std::function<double(const FeatureSet&)>;

struct GreedyResult {
  FeatureSet selected;
  /// Marginal of each accepted element at selection time, in order.
  std::vector<double> accepted_marginals;
  std::vector<int> order;
};

/// Adds argmin_e G(e | S) over pool \ S while that marginal is < 0 and
/// |S| < budget. Ties go to the smaller index.
GreedyResult greedy_minimize(const SetFunction& G, const FeatureSet& pool, int budget);

enum class SweepMode { batched, per_candidate };

/// Features not observed by every instance of the bucket.
FeatureSet candidate_pool_for_u(const Dataset& bucket);

/// GreedyForU with warm starts: candidates scored at the current parameters,
/// then ctx.commit(e*) trains on the enlarged set.
GreedyResult greedy_for_u(GFContext& ctx, int q_max, const FeatureSet& pool, SweepMode mode = SweepMode::batched);

enum class VLoop {
  /// Keep adding while the best marginal is negative.
  until_non_negative,
  /// Stop right after the first accepted element.
  single_accept,
};

/// GreedyForV over the acquired set with cap lambda.
GreedyResult greedy_for_v(const GLContext& ctx, int lambda, VLoop loop = VLoop::until_non_negative,
                          SweepMode mode = SweepMode::batched);

/// Per-bucket (U_b, V_b) plus the global budget and generator quota.
struct AcquisitionPlan {
  struct Entry {
    FeatureSet acquire;   // U_b
    FeatureSet generate;  // V_b, subset of U_b
  };
  int q_max = 0;
  int lambda = 0;
  std::map<std::uint32_t, Entry> buckets;

  /// Throws std::logic_error if any |U_b| > q_max, V_b not in U_b, or |V_b| > lambda.
  void validate() const;
};

void save_plan(const AcquisitionPlan& plan, const std::string& path);
AcquisitionPlan load_plan(const std::string& path);

}  // namespace genex
