#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "genex/dataset.hpp"
#include "genex/models.hpp"
#include "genex/uncertainty.hpp"

namespace genex {

struct GFOptions {
  int K = 8;
  /// Training iterations (epochs of train_f) run after each accepted element.
  int commit_epochs = 2;
  std::uint64_t seed = 0;
  TrainOptions train;
};

/// Evaluates G_F(U) = sum_i F(h_theta, p_phi; U | O_i) at the context's
/// current (warm-started) parameters. Monte Carlo draws are fixed per
/// instance for a given parameter state, so every evaluation and every
/// marginal comparison shares the same noise.
class GFContext {
 public:
  GFContext(std::shared_ptr<const Dataset> bucket, ModelPair models, std::shared_ptr<const UncertaintyEstimator> est,
            GFOptions options);

  double value(const FeatureSet& U) const;
  /// value(U u {e}) - value(U). Throws std::invalid_argument if e is in U.
  double marginal(int e, const FeatureSet& U) const;
  /// Marginals of every candidate against U from one batched pass.
  std::vector<double> sweep(const FeatureSet& U, const std::vector<int>& candidates) const;

  /// U <- U u {e}, then commit_epochs of train_f on the enlarged set.
  void commit(int e);
  /// Extra train_f epochs on the current selection.
  void finetune(int epochs);

  const FeatureSet& selected() const { return selected_; }
  const ModelPair& models() const { return models_; }
  const Dataset& bucket() const { return *bucket_; }
  const DeltaTable& deltas() const { return delta_table_; }
  const GFOptions& options() const { return options_; }

 private:
  void refresh_draws();

  std::shared_ptr<const Dataset> bucket_;
  ModelPair models_;
  GFOptions options_;
  DeltaTable delta_table_;
  FeatureSet selected_;
  std::vector<Eigen::MatrixXd> noise_;  // latent x K per instance, fixed for the context's lifetime
  std::vector<Eigen::MatrixXd> draws_;  // n x K per instance under the current generator
  int commits_ = 0;
};

/// Evaluates G_L(V) = sum_i (1 - Delta_i(V)) * mean_k CE(h(x[O u U*\V] u x~_k[V]), y)
/// with frozen parameters; x~ ~ p(. | x[O]).
class GLContext {
 public:
  GLContext(std::shared_ptr<const Dataset> bucket, ClassifierParams classifier,
            std::shared_ptr<const FeatureSampler> generator, FeatureSet acquired,
            std::shared_ptr<const UncertaintyEstimator> est, int K, std::uint64_t seed);

  /// Throws std::invalid_argument unless V is a subset of the acquired set.
  double value(const FeatureSet& V) const;
  double marginal(int e, const FeatureSet& V) const;
  std::vector<double> sweep(const FeatureSet& V, const std::vector<int>& candidates) const;

  const FeatureSet& acquired() const { return acquired_; }
  /// Per-instance Monte Carlo standard error of value(V), summed in quadrature.
  double standard_error(const FeatureSet& V) const;

 private:
  /// Per-draw losses (instances x K) for V.
  Eigen::MatrixXd draw_losses(const FeatureSet& V) const;

  std::shared_ptr<const Dataset> bucket_;
  ClassifierParams classifier_;
  FeatureSet acquired_;
  DeltaTable delta_table_;
  std::vector<Eigen::MatrixXd> draws_;
};

}  // namespace genex
