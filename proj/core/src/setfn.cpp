#include "genex/setfn.hpp"

#include <stdexcept>

namespace genex {
namespace {

constexpr std::uint64_t kNoiseSalt = 0x6e6f697365ULL;
constexpr std::uint64_t kDeltaSalt = 0x64656c7461ULL;
constexpr std::uint64_t kCommitSalt = 0x636f6d6d6974ULL;
constexpr std::uint64_t kGlSalt = 0x676cULL;

/// Sum_j w_j * CE over hidden pre-activations (hidden x B).
Eigen::VectorXd losses_from_pre(const ClassifierParams& theta, const Eigen::MatrixXd& pre, int label) {
  Eigen::MatrixXd z = (theta.W2 * pre.cwiseMax(0.0)).colwise() + theta.b2;
  Eigen::VectorXd out(z.cols());
  for (Eigen::Index c = 0; c < z.cols(); ++c) out[c] = cross_entropy_from_logits(z.col(c), label);
  return out;
}

}  // namespace

GFContext::GFContext(std::shared_ptr<const Dataset> bucket, ModelPair models,
                     std::shared_ptr<const UncertaintyEstimator> est, GFOptions options)
    : bucket_(std::move(bucket)),
      models_(std::move(models)),
      options_(options),
      delta_table_(std::move(est), bucket_, derive_seed(options.seed, kDeltaSalt)) {
  if (bucket_->empty()) throw std::invalid_argument("GFContext: empty bucket");
  const int latent = models_.generator.latent;
  noise_.reserve(static_cast<std::size_t>(bucket_->size()));
  for (const auto& inst : bucket_->instances) {
    Rng rng(derive_seed(options_.seed, kNoiseSalt, static_cast<std::uint64_t>(inst.id)));
    Eigen::MatrixXd eps(latent, options_.K);
    for (int k = 0; k < options_.K; ++k)
      for (int l = 0; l < latent; ++l) eps(l, k) = rng.normal();
    noise_.push_back(std::move(eps));
  }
  refresh_draws();
}

void GFContext::refresh_draws() {
  const GeneratorParams& phi = models_.generator;
  draws_.clear();
  draws_.reserve(noise_.size());
  for (int i = 0; i < bucket_->size(); ++i) {
    const Instance& inst = (*bucket_)[i];
    Encoding e = encode(phi, MaskedInput::from(inst.features, inst.observed).encoded());
    const Eigen::MatrixXd& eps = noise_[static_cast<std::size_t>(i)];
    Eigen::MatrixXd z(phi.latent, eps.cols());
    Eigen::VectorXd sigma = (0.5 * e.log_var.col(0).array()).exp().matrix();
    for (Eigen::Index k = 0; k < eps.cols(); ++k) z.col(k) = e.mean.col(0) + sigma.cwiseProduct(eps.col(k));
    draws_.push_back(eps.cols() > 0 ? decode(phi, z) : Eigen::MatrixXd(phi.n, 0));
  }
}

double GFContext::value(const FeatureSet& U) const {
  const ClassifierParams& theta = models_.classifier;
  const int K = options_.K;
  double total = 0.0;
  Eigen::VectorXd col(2 * theta.n);
  for (int i = 0; i < bucket_->size(); ++i) {
    const Instance& inst = (*bucket_)[i];
    const double d = delta_table_.at(i, U);
    const FeatureSet gen = U.minus(inst.observed);
    Eigen::MatrixXd inputs(2 * theta.n, 1 + K);
    encode_into(inputs.col(0), inst.features, inst.observed.union_with(U));
    const Eigen::MatrixXd& draws = draws_[static_cast<std::size_t>(i)];
    for (int k = 0; k < K; ++k) {
      Eigen::VectorXd g = draws.col(k);
      encode_into(inputs.col(1 + k), inst.features, inst.observed, &g, &gen);
    }
    Eigen::MatrixXd pre = (theta.W1 * inputs).colwise() + theta.b1;
    Eigen::VectorXd l = losses_from_pre(theta, pre, inst.label);
    double gen_mean = K > 0 ? l.tail(K).mean() : 0.0;
    total += d * l[0] + (1.0 - d) * gen_mean;
  }
  return total;
}

double GFContext::marginal(int e, const FeatureSet& U) const {
  if (U.contains(e)) throw std::invalid_argument("gf_marginal: element already in U");
  return value(U.with(e)) - value(U);
}

std::vector<double> GFContext::sweep(const FeatureSet& U, const std::vector<int>& candidates) const {
  for (int e : candidates)
    if (U.contains(e)) throw std::invalid_argument("gf sweep: candidate already in U");
  const ClassifierParams& theta = models_.classifier;
  const int n = theta.n;
  const int K = options_.K;
  const auto C = static_cast<Eigen::Index>(candidates.size());
  Eigen::MatrixXd deltas_with = delta_table_.sweep(U, candidates);
  std::vector<double> out(candidates.size(), 0.0);

  for (int i = 0; i < bucket_->size(); ++i) {
    const Instance& inst = (*bucket_)[i];
    const double d0 = delta_table_.at(i, U);
    const FeatureSet gen = U.minus(inst.observed);
    Eigen::MatrixXd inputs(2 * n, 1 + K);
    encode_into(inputs.col(0), inst.features, inst.observed.union_with(U));
    const Eigen::MatrixXd& draws = draws_[static_cast<std::size_t>(i)];
    for (int k = 0; k < K; ++k) {
      Eigen::VectorXd g = draws.col(k);
      encode_into(inputs.col(1 + k), inst.features, inst.observed, &g, &gen);
    }
    const Eigen::MatrixXd base = (theta.W1 * inputs).colwise() + theta.b1;
    const Eigen::VectorXd l0 = losses_from_pre(theta, base, inst.label);
    const double f0 = d0 * l0[0] + (1.0 - d0) * (K > 0 ? l0.tail(K).mean() : 0.0);

    for (Eigen::Index c = 0; c < C; ++c) {
      const int e = candidates[static_cast<std::size_t>(c)];
      if (inst.observed.contains(e)) continue;  // already observed: F_i unchanged
      Eigen::MatrixXd pre = base;
      pre.col(0) += theta.W1.col(e) * inst.features[e] + theta.W1.col(n + e);
      for (int k = 0; k < K; ++k) pre.col(1 + k) += theta.W1.col(e) * draws(e, k) + theta.W1.col(n + e);
      const Eigen::VectorXd l = losses_from_pre(theta, pre, inst.label);
      const double d = deltas_with(c, i);
      const double f = d * l[0] + (1.0 - d) * (K > 0 ? l.tail(K).mean() : 0.0);
      out[static_cast<std::size_t>(c)] += f - f0;
    }
  }
  return out;
}

void GFContext::commit(int e) {
  if (!selected_.insert(e)) throw std::invalid_argument("gf_commit: element already selected");
  ++commits_;
  if (options_.commit_epochs > 0) {
    Eigen::VectorXd d = delta_table_.all(selected_);
    models_ = train_f(models_, *bucket_, selected_, d, options_.commit_epochs, options_.K,
                      derive_seed(options_.seed, kCommitSalt, static_cast<std::uint64_t>(commits_)), options_.train);
    refresh_draws();
  }
}

void GFContext::finetune(int epochs) {
  if (epochs <= 0) return;
  Eigen::VectorXd d = delta_table_.all(selected_);
  models_ = train_f(models_, *bucket_, selected_, d, epochs, options_.K,
                    derive_seed(options_.seed, kCommitSalt, 0xf17eULL), options_.train);
  refresh_draws();
}

// --- G_L ------------------------------------------------------------------

GLContext::GLContext(std::shared_ptr<const Dataset> bucket, ClassifierParams classifier,
                     std::shared_ptr<const FeatureSampler> generator, FeatureSet acquired,
                     std::shared_ptr<const UncertaintyEstimator> est, int K, std::uint64_t seed)
    : bucket_(std::move(bucket)),
      classifier_(std::move(classifier)),
      acquired_(std::move(acquired)),
      delta_table_(std::move(est), bucket_, derive_seed(seed, kDeltaSalt)) {
  draws_.reserve(static_cast<std::size_t>(bucket_->size()));
  for (const auto& inst : bucket_->instances) {
    Rng rng(derive_seed(seed, kGlSalt, static_cast<std::uint64_t>(inst.id)));
    draws_.push_back(generator->draw(inst.features, inst.observed, K, rng));
  }
}

Eigen::MatrixXd GLContext::draw_losses(const FeatureSet& V) const {
  if (!V.is_subset_of(acquired_)) throw std::invalid_argument("gl_value: V must be a subset of U*");
  const int K = draws_.empty() ? 0 : static_cast<int>(draws_.front().cols());
  Eigen::MatrixXd out(bucket_->size(), K);
  const FeatureSet oracle_part = acquired_.minus(V);
  for (int i = 0; i < bucket_->size(); ++i) {
    const Instance& inst = (*bucket_)[i];
    const FeatureSet oracle = inst.observed.union_with(oracle_part);
    const FeatureSet gen = V.minus(inst.observed);
    Eigen::MatrixXd inputs(2 * classifier_.n, K);
    const Eigen::MatrixXd& draws = draws_[static_cast<std::size_t>(i)];
    for (int k = 0; k < K; ++k) {
      Eigen::VectorXd g = draws.col(k);
      encode_into(inputs.col(k), inst.features, oracle, &g, &gen);
    }
    Eigen::MatrixXd pre = (classifier_.W1 * inputs).colwise() + classifier_.b1;
    out.row(i) = losses_from_pre(classifier_, pre, inst.label).transpose();
  }
  return out;
}

double GLContext::value(const FeatureSet& V) const {
  Eigen::MatrixXd losses = draw_losses(V);
  double total = 0.0;
  for (int i = 0; i < bucket_->size(); ++i) {
    const double mean = losses.cols() > 0 ? losses.row(i).mean() : 0.0;
    total += (1.0 - delta_table_.at(i, V)) * mean;
  }
  return total;
}

double GLContext::standard_error(const FeatureSet& V) const {
  Eigen::MatrixXd losses = draw_losses(V);
  const auto K = losses.cols();
  if (K < 2) return 0.0;
  double var = 0.0;
  for (int i = 0; i < bucket_->size(); ++i) {
    const double w = 1.0 - delta_table_.at(i, V);
    const double mean = losses.row(i).mean();
    const double s2 = (losses.row(i).array() - mean).square().sum() / static_cast<double>(K - 1);
    var += w * w * s2 / static_cast<double>(K);
  }
  return std::sqrt(var);
}

double GLContext::marginal(int e, const FeatureSet& V) const {
  if (V.contains(e)) throw std::invalid_argument("gl_marginal: element already in V");
  return value(V.with(e)) - value(V);
}

std::vector<double> GLContext::sweep(const FeatureSet& V, const std::vector<int>& candidates) const {
  for (int e : candidates) {
    if (V.contains(e) || !acquired_.contains(e)) throw std::invalid_argument("gl sweep: bad candidate");
  }
  if (!V.is_subset_of(acquired_)) throw std::invalid_argument("gl sweep: V must be a subset of U*");
  const int K = draws_.empty() ? 0 : static_cast<int>(draws_.front().cols());
  const auto C = static_cast<Eigen::Index>(candidates.size());
  Eigen::MatrixXd deltas_with = delta_table_.sweep(V, candidates);
  std::vector<double> out(candidates.size(), 0.0);
  const FeatureSet oracle_part = acquired_.minus(V);
  for (int i = 0; i < bucket_->size(); ++i) {
    const Instance& inst = (*bucket_)[i];
    const FeatureSet oracle = inst.observed.union_with(oracle_part);
    const FeatureSet gen = V.minus(inst.observed);
    const Eigen::MatrixXd& draws = draws_[static_cast<std::size_t>(i)];
    Eigen::MatrixXd inputs(2 * classifier_.n, K);
    for (int k = 0; k < K; ++k) {
      Eigen::VectorXd g = draws.col(k);
      encode_into(inputs.col(k), inst.features, oracle, &g, &gen);
    }
    const Eigen::MatrixXd base = (classifier_.W1 * inputs).colwise() + classifier_.b1;
    const double l0 = K > 0 ? losses_from_pre(classifier_, base, inst.label).mean() : 0.0;
    const double g0 = (1.0 - delta_table_.at(i, V)) * l0;
    for (Eigen::Index c = 0; c < C; ++c) {
      const int e = candidates[static_cast<std::size_t>(c)];
      double l = l0;
      if (!inst.observed.contains(e) && K > 0) {
        Eigen::MatrixXd pre = base;
        for (int k = 0; k < K; ++k) pre.col(k) += classifier_.W1.col(e) * (draws(e, k) - inst.features[e]);
        l = losses_from_pre(classifier_, pre, inst.label).mean();
      }
      out[static_cast<std::size_t>(c)] += (1.0 - deltas_with(c, i)) * l - g0;
    }
  }
  return out;
}

}  // namespace genex
