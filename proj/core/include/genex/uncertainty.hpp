#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "genex/dataset.hpp"
#include "genex/models.hpp"

namespace genex {

/// Source of generated feature values x~ ~ p(. | x[condition]).
class FeatureSampler {
 public:
  virtual ~FeatureSampler() = default;
  /// n x K full-length draws. Model-backed samplers read `x` only on
  /// `condition`; test doubles may read the truth.
  virtual Eigen::MatrixXd draw(const Eigen::VectorXd& x, const FeatureSet& condition, int K, Rng& rng) const = 0;
};

class VaeSampler final : public FeatureSampler {
 public:
  explicit VaeSampler(GeneratorParams phi, bool zero_variance = false)
      : phi_(std::move(phi)), zero_variance_(zero_variance) {}
  Eigen::MatrixXd draw(const Eigen::VectorXd& x, const FeatureSet& condition, int K, Rng& rng) const override;
  const GeneratorParams& params() const { return phi_; }

 private:
  GeneratorParams phi_;
  bool zero_variance_;
};

/// Returns the oracle value plus N(0, noise_std[j]^2) per feature; noise 0
/// gives a perfect-copy generator.
class CopySampler final : public FeatureSampler {
 public:
  explicit CopySampler(Eigen::VectorXd noise_std) : noise_std_(std::move(noise_std)) {}
  static std::shared_ptr<CopySampler> perfect(int n) {
    return std::make_shared<CopySampler>(Eigen::VectorXd::Zero(n));
  }
  Eigen::MatrixXd draw(const Eigen::VectorXd& x, const FeatureSet& condition, int K, Rng& rng) const override;

 private:
  Eigen::VectorXd noise_std_;
};

enum class DeltaMode { monte_carlo, constant };

/// Frozen pretrained pair (h_0, p_0) used to score how uncertain the
/// classifier is when a feature set is filled in by the generator.
struct UncertaintyEstimator {
  ClassifierParams classifier;
  std::shared_ptr<const FeatureSampler> generator;
  int K = 32;
  int num_classes = 0;
  DeltaMode mode = DeltaMode::monte_carlo;
  double constant_value = 0.8;

  static UncertaintyEstimator from_pretrained(const ModelPair& pretrained, int K, DeltaMode mode);
};

/// Monte Carlo estimate of E[1 - max_y h_0(x[O] u x~[S])[y]] / (1 - 1/|C|),
/// clipped to [0,1]; x~ ~ p_0(. | x[O]). Indices of S already observed are
/// dropped. Throws std::invalid_argument when |C| = 1.
double delta(const UncertaintyEstimator& est, const Instance& instance, const FeatureSet& S, Rng& rng);

/// Draws from p_0 cached per instance with the stream derive_seed(seed, id),
/// so table lookups agree with delta() called on that stream.
class DeltaTable {
 public:
  DeltaTable(std::shared_ptr<const UncertaintyEstimator> est, std::shared_ptr<const Dataset> bucket,
             std::uint64_t seed);

  double at(int position, const FeatureSet& S) const;
  /// One value per bucket instance.
  Eigen::VectorXd all(const FeatureSet& S) const;
  /// (candidates x instances): Delta_i(S u {e}) for each candidate e.
  Eigen::MatrixXd sweep(const FeatureSet& S, const std::vector<int>& candidates) const;

  const UncertaintyEstimator& estimator() const { return *est_; }

 private:
  std::shared_ptr<const UncertaintyEstimator> est_;
  std::shared_ptr<const Dataset> bucket_;
  std::vector<Eigen::MatrixXd> draws_;  // n x K per instance
};

}  // namespace genex
