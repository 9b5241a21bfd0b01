#include "genex/uncertainty.hpp"

#include <algorithm>
#include <stdexcept>

namespace genex {
namespace {

double rescale(double raw, int num_classes) {
  if (num_classes < 2) throw std::invalid_argument("delta: need at least two classes");
  return std::clamp(raw / (1.0 - 1.0 / num_classes), 0.0, 1.0);
}

/// Pre-activations of h_0's hidden layer for x[O] u draws[S \ O], one column per draw.
Eigen::MatrixXd hidden_pre(const ClassifierParams& h0, const Instance& inst, const FeatureSet& S,
                           const Eigen::MatrixXd& draws) {
  const FeatureSet gen = S.minus(inst.observed);
  Eigen::MatrixXd inputs(2 * h0.n, draws.cols());
  for (Eigen::Index k = 0; k < draws.cols(); ++k) {
    Eigen::VectorXd g = draws.col(k);
    encode_into(inputs.col(k), inst.features, inst.observed, &g, &gen);
  }
  return (h0.W1 * inputs).colwise() + h0.b1;
}

double mean_shortfall(const ClassifierParams& h0, const Eigen::MatrixXd& pre) {
  Eigen::MatrixXd z = (h0.W2 * pre.cwiseMax(0.0)).colwise() + h0.b2;
  Eigen::MatrixXd p = softmax_columns(z);
  double total = 0.0;
  for (Eigen::Index k = 0; k < p.cols(); ++k) total += 1.0 - p.col(k).maxCoeff();
  return total / static_cast<double>(p.cols());
}

}  // namespace

Eigen::MatrixXd VaeSampler::draw(const Eigen::VectorXd& x, const FeatureSet& condition, int K, Rng& rng) const {
  return sample_full(phi_, MaskedInput::from(x, condition), K, rng, zero_variance_);
}

Eigen::MatrixXd CopySampler::draw(const Eigen::VectorXd& x, const FeatureSet&, int K, Rng& rng) const {
  Eigen::MatrixXd out(x.size(), K);
  for (int k = 0; k < K; ++k)
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      const double noise = noise_std_[j] > 0.0 ? noise_std_[j] * rng.normal() : 0.0;
      out(j, k) = x[j] + noise;
    }
  return out;
}

UncertaintyEstimator UncertaintyEstimator::from_pretrained(const ModelPair& pretrained, int K, DeltaMode mode) {
  UncertaintyEstimator est;
  est.classifier = pretrained.classifier;
  est.generator = std::make_shared<VaeSampler>(pretrained.generator);
  est.K = K;
  est.num_classes = pretrained.classifier.num_classes;
  est.mode = mode;
  return est;
}

double delta(const UncertaintyEstimator& est, const Instance& instance, const FeatureSet& S, Rng& rng) {
  if (est.num_classes < 2) throw std::invalid_argument("delta: need at least two classes");
  if (est.mode == DeltaMode::constant) return est.constant_value;
  Eigen::MatrixXd draws = est.generator->draw(instance.features, instance.observed, est.K, rng);
  return rescale(mean_shortfall(est.classifier, hidden_pre(est.classifier, instance, S, draws)), est.num_classes);
}

DeltaTable::DeltaTable(std::shared_ptr<const UncertaintyEstimator> est, std::shared_ptr<const Dataset> bucket,
                       std::uint64_t seed)
    : est_(std::move(est)), bucket_(std::move(bucket)) {
  if (est_->num_classes < 2) throw std::invalid_argument("delta: need at least two classes");
  if (est_->mode == DeltaMode::constant) return;
  draws_.reserve(static_cast<std::size_t>(bucket_->size()));
  for (const auto& inst : bucket_->instances) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(inst.id)));
    draws_.push_back(est_->generator->draw(inst.features, inst.observed, est_->K, rng));
  }
}

double DeltaTable::at(int position, const FeatureSet& S) const {
  if (est_->mode == DeltaMode::constant) return est_->constant_value;
  const Instance& inst = (*bucket_)[position];
  const auto& h0 = est_->classifier;
  return rescale(mean_shortfall(h0, hidden_pre(h0, inst, S, draws_[static_cast<std::size_t>(position)])),
                 est_->num_classes);
}

Eigen::VectorXd DeltaTable::all(const FeatureSet& S) const {
  Eigen::VectorXd out(bucket_->size());
  for (int i = 0; i < bucket_->size(); ++i) out[i] = at(i, S);
  return out;
}

Eigen::MatrixXd DeltaTable::sweep(const FeatureSet& S, const std::vector<int>& candidates) const {
  const auto C = static_cast<Eigen::Index>(candidates.size());
  Eigen::MatrixXd out(C, bucket_->size());
  if (est_->mode == DeltaMode::constant) {
    out.setConstant(est_->constant_value);
    return out;
  }
  const auto& h0 = est_->classifier;
  const int n = h0.n;
  for (int i = 0; i < bucket_->size(); ++i) {
    const Instance& inst = (*bucket_)[i];
    const Eigen::MatrixXd& draws = draws_[static_cast<std::size_t>(i)];
    Eigen::MatrixXd base = hidden_pre(h0, inst, S, draws);
    const double base_value = rescale(mean_shortfall(h0, base), est_->num_classes);
    for (Eigen::Index c = 0; c < C; ++c) {
      const int e = candidates[static_cast<std::size_t>(c)];
      if (inst.observed.contains(e) || S.contains(e)) {
        out(c, i) = base_value;
        continue;
      }
      Eigen::MatrixXd pre = base;
      for (Eigen::Index k = 0; k < pre.cols(); ++k) pre.col(k) += h0.W1.col(e) * draws(e, k) + h0.W1.col(n + e);
      out(c, i) = rescale(mean_shortfall(h0, pre), est_->num_classes);
    }
  }
  return out;
}

}  // namespace genex
