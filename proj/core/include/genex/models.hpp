#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "genex/dataset.hpp"
#include "genex/feature_set.hpp"
#include "genex/rng.hpp"

namespace genex {

using TensorViews = std::vector<Eigen::Map<Eigen::VectorXd>>;
using ConstTensorViews = std::vector<Eigen::Map<const Eigen::VectorXd>>;

/// x[S] as a network input: values with zeros off S, plus the 0/1 mask.
struct MaskedInput {
  Eigen::VectorXd values;
  Eigen::VectorXd mask;

  static MaskedInput from(const Eigen::VectorXd& x, const FeatureSet& support);
  /// Oracle values on `oracle`, `generated` values on generated \ oracle.
  static MaskedInput combine(const Eigen::VectorXd& x, const FeatureSet& oracle, const Eigen::VectorXd& generated,
                             const FeatureSet& generated_set);
  FeatureSet support() const;
  /// [values; mask], length 2n.
  Eigen::VectorXd encoded() const;
};

/// Writes the 2n encoding of (x on `oracle`, g on `generated \ oracle`) into `col`.
void encode_into(Eigen::Ref<Eigen::VectorXd> col, const Eigen::VectorXd& x, const FeatureSet& oracle,
                 const Eigen::VectorXd* g = nullptr, const FeatureSet* generated = nullptr);

/// Linear -> ReLU -> linear -> softmax over 2n masked inputs.
struct ClassifierParams {
  int n = 0;
  int hidden = 0;
  int num_classes = 0;
  Eigen::MatrixXd W1;  // hidden x 2n
  Eigen::VectorXd b1;
  Eigen::MatrixXd W2;  // classes x hidden
  Eigen::VectorXd b2;

  static ClassifierParams zeros(int n, int hidden, int num_classes);
  /// Uniform in +/- 1/sqrt(fan_in) per layer.
  static ClassifierParams init(int n, int hidden, int num_classes, Rng& rng);

  TensorViews tensors();
  ConstTensorViews tensors() const;
  int parameter_count() const;
};

/// Small beta-VAE. Encoder: 2n -> hidden -> (mu, logvar) in R^latent.
/// Decoder: latent -> hidden -> n Gaussian means with unit variance.
struct GeneratorParams {
  int n = 0;
  int hidden = 0;
  int latent = 0;
  double beta = 0.0;
  Eigen::MatrixXd E1;  // hidden x 2n
  Eigen::VectorXd e1;
  Eigen::MatrixXd E2;  // 2*latent x hidden; rows [0,latent) mean, [latent,2*latent) log-variance
  Eigen::VectorXd e2;
  Eigen::MatrixXd D1;  // hidden x latent
  Eigen::VectorXd d1;
  Eigen::MatrixXd D2;  // n x hidden
  Eigen::VectorXd d2;

  /// sqrt(2)/100 * n
  static double default_beta(int n);
  static GeneratorParams zeros(int n, int hidden, int latent, double beta);
  static GeneratorParams init(int n, int hidden, int latent, double beta, Rng& rng);

  TensorViews tensors();
  ConstTensorViews tensors() const;
  int parameter_count() const;
};

// --- classifier -----------------------------------------------------------

/// Class distribution h_theta(x[S]). Throws std::invalid_argument on
/// dimension mismatch.
Eigen::VectorXd predict(const ClassifierParams& theta, const MaskedInput& input);

/// Batched logits for encoded inputs (2n x B).
Eigen::MatrixXd logits(const ClassifierParams& theta, const Eigen::MatrixXd& inputs);
Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits);

/// -log softmax(z)[y], computed stably.
double cross_entropy_from_logits(const Eigen::Ref<const Eigen::VectorXd>& z, int label);

/// Sum_j weights[j] * CE(column j). Accumulates parameter gradients into
/// `grad` (if non-null, must be shaped like theta) and writes input
/// gradients (2n x B) into `input_grad` (if non-null).
double classifier_loss(const ClassifierParams& theta, const Eigen::MatrixXd& inputs, const std::vector<int>& labels,
                       const Eigen::VectorXd& weights, ClassifierParams* grad = nullptr,
                       Eigen::MatrixXd* input_grad = nullptr);

// --- generator ------------------------------------------------------------

struct Encoding {
  Eigen::MatrixXd mean;     // latent x B
  Eigen::MatrixXd log_var;  // latent x B (clamped to [-8, 8])
};

Encoding encode(const GeneratorParams& phi, const Eigen::MatrixXd& inputs);
Eigen::MatrixXd decode(const GeneratorParams& phi, const Eigen::MatrixXd& latents);

/// Negative regularized ELBO with frozen noise `eps` (latent x B):
/// sum_j [ 0.5 * sum_{t : target_mask} (x - Dec(z))^2 + beta * KL(q || N(0,I)) ],
/// z = mean + exp(log_var / 2) * eps. Accumulates gradients into `grad`.
double elbo_loss(const GeneratorParams& phi, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                 const Eigen::MatrixXd& target_mask, const Eigen::MatrixXd& eps, GeneratorParams* grad = nullptr);

/// K reparameterized draws of x[target] given the condition; returns
/// |target| x K. With `zero_variance` the latent noise is dropped.
/// Throws std::invalid_argument if target overlaps the condition support.
Eigen::MatrixXd sample_features(const GeneratorParams& phi, const MaskedInput& condition, const FeatureSet& target,
                                int K, Rng& rng, bool zero_variance = false);

/// K full-length draws (n x K) of Dec(mean + sigma * eps) for the condition.
Eigen::MatrixXd sample_full(const GeneratorParams& phi, const MaskedInput& condition, int K, Rng& rng,
                            bool zero_variance = false);

// --- training ------------------------------------------------------------

struct ArchSpec {
  int hidden = 32;
  int latent = 16;
  /// Non-positive means sqrt(2)/100 * n.
  double beta = -1.0;
};

struct TrainOptions {
  double learning_rate = 1e-2;
  /// 0 means full batch.
  int batch_size = 32;
  /// During generator pretraining each unobserved feature is also revealed to
  /// the encoder with this probability.
  double reveal_probability = 0.25;
};

struct ModelPair {
  ClassifierParams classifier;
  GeneratorParams generator;
};

ModelPair init_models(const ArchSpec& arch, int n, int num_classes, std::uint64_t seed);

/// Cross-entropy on observed features for the classifier; beta-VAE ELBO for
/// the generator with the full training vector as reconstruction target.
/// epochs = 0 returns the initialization.
ModelPair pretrain(const ArchSpec& arch, const Dataset& bucket, int epochs, std::uint64_t seed,
                   const TrainOptions& options = {});

/// Minibatch SGD on sum_i F(theta, phi; U | O_i), where
///   F = delta_i * CE(h(x[O u U]), y) + (1 - delta_i) * mean_k CE(h(x[O] u xg_k[U]), y),
/// xg_k ~ p_phi(. | x[O]) reparameterized; both networks updated jointly.
/// Indices of U already in O_i count as observed. `epochs` full passes.
ModelPair train_f(const ModelPair& models, const Dataset& bucket, const FeatureSet& U, const Eigen::VectorXd& deltas,
                  int epochs, int K, std::uint64_t seed, const TrainOptions& options = {});

/// Sum_i F over the batch for fixed latent noise `eps` (latent x |batch|*K,
/// column i*K + k). Gradients accumulate into `grad` when non-null.
double f_objective(const ModelPair& models, const Dataset& bucket, const std::vector<int>& batch,
                   const FeatureSet& U, const Eigen::VectorXd& deltas, int K, const Eigen::MatrixXd& eps,
                   ModelPair* grad = nullptr);

/// Plain cross-entropy epochs on x[O u U] (generator untouched).
ClassifierParams train_classifier(const ClassifierParams& theta, const Dataset& bucket, const FeatureSet& extra,
                                  int epochs, std::uint64_t seed, const TrainOptions& options = {});

void sgd_step(TensorViews params, const ConstTensorViews& grads, double learning_rate);

// --- checkpoints ----------------------------------------------------------

void write_classifier(std::ostream& out, const ClassifierParams& theta);
ClassifierParams read_classifier(std::istream& in);
void write_generator(std::ostream& out, const GeneratorParams& phi);
GeneratorParams read_generator(std::istream& in);

}  // namespace genex
