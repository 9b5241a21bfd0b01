#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "genex/dataset.hpp"
#include "genex/greedy.hpp"
#include "genex/models.hpp"
#include "genex/setfn.hpp"
#include "genex/uncertainty.hpp"

namespace genex {

/// Caches G by subset; the callback runs at most once per distinct set.
class MemoizedSetFunction {
 public:
  explicit MemoizedSetFunction(SetFunction fn) : fn_(std::move(fn)) {}
  double operator()(const FeatureSet& S);
  SetFunction as_function();
  std::size_t evaluations() const { return cache_.size(); }

 private:
  SetFunction fn_;
  std::map<FeatureSet, double> cache_;
};

/// Ground sets up to this size are enumerated exhaustively.
inline constexpr int kExhaustiveLimit = 12;

struct MonotonicityEstimate {
  double m_min = 1.0;
  double m_max = 1.0;
  long long pairs_evaluated = 0;
  bool exhaustive = true;
};

struct SubmodularityEstimate {
  double gamma_min = 0.0;
  double gamma_max = 0.0;
  long long pairs_evaluated = 0;
  long long pairs_skipped_zero_denominator = 0;
  bool exhaustive = true;
  /// False when no pair had a usable denominator.
  bool defined = false;
};

/// min / max of G(T)/G(S) over nested S subset-of T, with G(T)/G(S) := 1 when
/// G(S) = 0. Exhaustive for n <= 12, otherwise `sample_budget` random pairs.
MonotonicityEstimate estimate_partial_monotonicity(const SetFunction& G, int n, long long sample_budget = 100000,
                                                   std::uint64_t seed = 0);

/// min / max of sum_{u in S} G(u|T) / |G(S|T)| over disjoint non-empty S and
/// T with |G(S|T)| > zero_tol.
SubmodularityEstimate estimate_weak_submodularity(const SetFunction& G, int n, long long sample_budget = 100000,
                                                  double zero_tol = 1e-9, std::uint64_t seed = 0);

struct OptResult {
  FeatureSet set;
  double value = 0.0;
  long long subsets_evaluated = 0;
};

/// Exhaustive minimum over |S| <= q_max; ties go to the lexicographically
/// smallest set. Throws std::length_error beyond 10^5 subsets.
OptResult brute_force_opt(const SetFunction& G, int n, int q_max);

struct Theorem4Verdict {
  double m_F = 0.0;
  double gamma_F = 0.0;
  double bound = 0.0;
  double slack = 0.0;
  bool pass = false;
  /// m_min <= 0, m_min > m_max or non-finite inputs.
  bool degenerate = false;
};

/// bound = m_F*OPT - (1 - gamma_F/q)^q * (m_F*OPT - G(empty)),
/// m_F = max(m_max, 2 m_max / m_min), gamma_F = max(gamma_max, -gamma_min).
Theorem4Verdict check_theorem4(double greedy_value, double opt_value, double empty_value, double m_min, double m_max,
                               double gamma_min, double gamma_max, int q_max);

/// The same bound from already-combined constants.
double theorem4_bound(double m_F, double gamma_F, double opt_value, double empty_value, int q_max);

struct Proposition1Verdict {
  double lhs = 0.0;  // sum_i min_{U_i,V_i} loss
  double rhs = 0.0;  // min_U sum_i F
  double standard_error = 0.0;
  double slack = 0.0;  // rhs + 3 se - lhs
  bool pass = false;
  FeatureSet rhs_argmin;
  long long evaluations = 0;
};

/// Brute force of both sides at fixed (theta, generator) with shared Monte
/// Carlo draws. Throws std::length_error when the enumeration exceeds `budget`.
Proposition1Verdict check_proposition1(std::shared_ptr<const Dataset> bucket, const ClassifierParams& classifier,
                                       std::shared_ptr<const FeatureSampler> generator,
                                       std::shared_ptr<const UncertaintyEstimator> est, int q_max, int K,
                                       std::uint64_t seed, long long budget = 2000000);

struct AssumptionConstants {
  double eps_delta = 0.0;
  double eps_x = 0.0;
  double delta_min = 0.0;
  double delta_max = 0.0;
  double loss_min = 0.0;
  double loss_max = 0.0;
  double lipschitz_x = 0.0;
};

AssumptionConstants measure_constants(std::shared_ptr<const Dataset> bucket, const ClassifierParams& classifier,
                                      std::shared_ptr<const FeatureSampler> generator,
                                      std::shared_ptr<const UncertaintyEstimator> est, int samples, int K,
                                      std::uint64_t seed);

struct FullRetrainOptions {
  ArchSpec arch;
  int pretrain_epochs = 100;
  int retrain_epochs = 100;
  int K = 8;
  int delta_K = 32;
  DeltaMode delta_mode = DeltaMode::monte_carlo;
  TrainOptions train;
  std::uint64_t seed = 0;
};

/// G_F at retrained parameters: every subset starts from the same seeded
/// pretraining and runs retrain_epochs of train_f before being scored.
class FullRetrainGF {
 public:
  FullRetrainGF(std::shared_ptr<const Dataset> bucket, FullRetrainOptions options);

  double operator()(const FeatureSet& U);
  SetFunction as_function();
  ModelPair trained(const FeatureSet& U) const;
  /// Evaluates every uncached subset on up to `jobs` workers. Each subset's
  /// training stream is derived from its members, so values do not depend
  /// on evaluation order.
  void prefetch(const std::vector<FeatureSet>& subsets, int jobs);
  /// Every subset of [n] with at most `max_size` members.
  static std::vector<FeatureSet> all_subsets(int n, int max_size);

  const ModelPair& pretrained() const { return pretrained_; }
  std::shared_ptr<const UncertaintyEstimator> estimator() const { return est_; }

 private:
  std::shared_ptr<const Dataset> bucket_;
  FullRetrainOptions options_;
  ModelPair pretrained_;
  std::shared_ptr<const UncertaintyEstimator> est_;
  std::unique_ptr<DeltaTable> deltas_;
  double evaluate(const FeatureSet& U) const;

  std::map<FeatureSet, double> cache_;
};

/// Everything the verification suite measures on one small instance.
struct AnalysisReport {
  int n = 0;
  int q_max = 0;
  MonotonicityEstimate monotonicity;
  SubmodularityEstimate submodularity;
  OptResult opt;
  GreedyResult greedy;
  double greedy_value = 0.0;
  double empty_value = 0.0;
  Theorem4Verdict theorem4;
  bool theorem4_checked = false;
  Proposition1Verdict proposition1;
  bool proposition1_checked = false;
  AssumptionConstants constants;
  std::vector<std::string> notes;

  void write_text(const std::string& path) const;
  /// One "section,key,value" row per number.
  void write_csv(const std::string& path) const;
};

}  // namespace genex
