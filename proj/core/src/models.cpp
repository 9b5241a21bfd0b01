#include "genex/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace genex {
namespace {

constexpr double kLogVarBound = 8.0;

Eigen::Map<Eigen::VectorXd> view(Eigen::MatrixXd& m) { return {m.data(), m.size()}; }
Eigen::Map<Eigen::VectorXd> view(Eigen::VectorXd& v) { return {v.data(), v.size()}; }
Eigen::Map<const Eigen::VectorXd> view(const Eigen::MatrixXd& m) { return {m.data(), m.size()}; }
Eigen::Map<const Eigen::VectorXd> view(const Eigen::VectorXd& v) { return {v.data(), v.size()}; }

void fill_uniform(Eigen::MatrixXd& m, double bound, Rng& rng) {
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = rng.uniform(-bound, bound);
}
void fill_uniform(Eigen::VectorXd& v, double bound, Rng& rng) {
  for (Eigen::Index r = 0; r < v.size(); ++r) v[r] = rng.uniform(-bound, bound);
}

Eigen::MatrixXd relu(const Eigen::MatrixXd& x) { return x.cwiseMax(0.0); }
Eigen::MatrixXd relu_mask(const Eigen::MatrixXd& x) { return (x.array() > 0.0).cast<double>().matrix(); }

struct EncoderCache {
  Eigen::MatrixXd pre;     // hidden x B
  Eigen::MatrixXd act;     // hidden x B
  Eigen::MatrixXd mean;    // latent x B
  Eigen::MatrixXd log_var; // latent x B, clamped
  Eigen::MatrixXd lv_live; // 1 where log_var was not clamped
};

EncoderCache encoder_forward(const GeneratorParams& phi, const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != 2 * phi.n) throw std::invalid_argument("generator: input dimension mismatch");
  EncoderCache c;
  c.pre = (phi.E1 * inputs).colwise() + phi.e1;
  c.act = relu(c.pre);
  Eigen::MatrixXd out = (phi.E2 * c.act).colwise() + phi.e2;
  c.mean = out.topRows(phi.latent);
  Eigen::MatrixXd raw = out.bottomRows(phi.latent);
  c.log_var = raw.cwiseMax(-kLogVarBound).cwiseMin(kLogVarBound);
  c.lv_live = ((raw.array() > -kLogVarBound) && (raw.array() < kLogVarBound)).cast<double>().matrix();
  return c;
}

void encoder_backward(const GeneratorParams& phi, const Eigen::MatrixXd& inputs, const EncoderCache& c,
                      const Eigen::MatrixXd& d_mean, const Eigen::MatrixXd& d_log_var, GeneratorParams& grad) {
  Eigen::MatrixXd d_out(2 * phi.latent, inputs.cols());
  d_out.topRows(phi.latent) = d_mean;
  d_out.bottomRows(phi.latent) = d_log_var.cwiseProduct(c.lv_live);
  grad.E2.noalias() += d_out * c.act.transpose();
  grad.e2 += d_out.rowwise().sum();
  Eigen::MatrixXd d_pre = (phi.E2.transpose() * d_out).cwiseProduct(relu_mask(c.pre));
  grad.E1.noalias() += d_pre * inputs.transpose();
  grad.e1 += d_pre.rowwise().sum();
}

struct DecoderCache {
  Eigen::MatrixXd pre;  // hidden x B
  Eigen::MatrixXd act;
  Eigen::MatrixXd out;  // n x B
};

DecoderCache decoder_forward(const GeneratorParams& phi, const Eigen::MatrixXd& z) {
  DecoderCache c;
  c.pre = (phi.D1 * z).colwise() + phi.d1;
  c.act = relu(c.pre);
  c.out = (phi.D2 * c.act).colwise() + phi.d2;
  return c;
}

/// Returns dL/dz.
Eigen::MatrixXd decoder_backward(const GeneratorParams& phi, const Eigen::MatrixXd& z, const DecoderCache& c,
                                 const Eigen::MatrixXd& d_out, GeneratorParams& grad) {
  grad.D2.noalias() += d_out * c.act.transpose();
  grad.d2 += d_out.rowwise().sum();
  Eigen::MatrixXd d_pre = (phi.D2.transpose() * d_out).cwiseProduct(relu_mask(c.pre));
  grad.D1.noalias() += d_pre * z.transpose();
  grad.d1 += d_pre.rowwise().sum();
  return phi.D1.transpose() * d_pre;
}

void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  out << m.rows() << ' ' << m.cols() << '\n';
  char buf[40];
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", m(r, c));
      out << buf << (c + 1 < m.cols() ? ' ' : '\n');
    }
  }
  if (m.cols() == 0) out << '\n';
}

void read_matrix(std::istream& in, Eigen::MatrixXd& m) {
  Eigen::Index rows = 0, cols = 0;
  if (!(in >> rows >> cols) || rows != m.rows() || cols != m.cols()) {
    throw std::runtime_error("checkpoint: tensor shape mismatch");
  }
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      if (!(in >> m(r, c))) throw std::runtime_error("checkpoint: truncated tensor");
}

void write_vector(std::ostream& out, const Eigen::VectorXd& v) { write_matrix(out, Eigen::MatrixXd(v.transpose())); }

void read_vector(std::istream& in, Eigen::VectorXd& v) {
  Eigen::MatrixXd row(1, v.size());
  read_matrix(in, row);
  v = row.transpose();
}

std::vector<int> shuffled(int count, Rng& rng) {
  std::vector<int> order(static_cast<std::size_t>(count));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng.engine());
  return order;
}

template <class Fn>
void for_each_batch(const std::vector<int>& order, int batch_size, Fn&& fn) {
  const int total = static_cast<int>(order.size());
  const int step = batch_size > 0 ? batch_size : total;
  for (int start = 0; start < total; start += step) {
    const int end = std::min(total, start + step);
    fn(std::vector<int>(order.begin() + start, order.begin() + end));
  }
}

}  // namespace

// --- inputs -----------------------------------------------------------------

void encode_into(Eigen::Ref<Eigen::VectorXd> col, const Eigen::VectorXd& x, const FeatureSet& oracle,
                 const Eigen::VectorXd* g, const FeatureSet* generated) {
  const Eigen::Index n = x.size();
  col.setZero();
  if (g != nullptr && generated != nullptr) {
    for (int j : *generated) {
      col[j] = (*g)[j];
      col[n + j] = 1.0;
    }
  }
  for (int j : oracle) {
    col[j] = x[j];
    col[n + j] = 1.0;
  }
}

MaskedInput MaskedInput::from(const Eigen::VectorXd& x, const FeatureSet& support) {
  MaskedInput m{Eigen::VectorXd::Zero(x.size()), Eigen::VectorXd::Zero(x.size())};
  for (int j : support) {
    if (j >= x.size()) throw std::out_of_range("MaskedInput: index out of range");
    m.values[j] = x[j];
    m.mask[j] = 1.0;
  }
  return m;
}

MaskedInput MaskedInput::combine(const Eigen::VectorXd& x, const FeatureSet& oracle, const Eigen::VectorXd& generated,
                                 const FeatureSet& generated_set) {
  Eigen::VectorXd col(2 * x.size());
  encode_into(col, x, oracle, &generated, &generated_set);
  return MaskedInput{col.head(x.size()), col.tail(x.size())};
}

FeatureSet MaskedInput::support() const {
  std::vector<int> s;
  for (Eigen::Index j = 0; j < mask.size(); ++j)
    if (mask[j] != 0.0) s.push_back(static_cast<int>(j));
  return FeatureSet(std::move(s));
}

Eigen::VectorXd MaskedInput::encoded() const {
  Eigen::VectorXd out(values.size() + mask.size());
  out << values, mask;
  return out;
}

// --- parameters -------------------------------------------------------------

ClassifierParams ClassifierParams::zeros(int n, int hidden, int num_classes) {
  ClassifierParams p;
  p.n = n;
  p.hidden = hidden;
  p.num_classes = num_classes;
  p.W1 = Eigen::MatrixXd::Zero(hidden, 2 * n);
  p.b1 = Eigen::VectorXd::Zero(hidden);
  p.W2 = Eigen::MatrixXd::Zero(num_classes, hidden);
  p.b2 = Eigen::VectorXd::Zero(num_classes);
  return p;
}

ClassifierParams ClassifierParams::init(int n, int hidden, int num_classes, Rng& rng) {
  ClassifierParams p = zeros(n, hidden, num_classes);
  const double a1 = 1.0 / std::sqrt(2.0 * n), a2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  fill_uniform(p.W1, a1, rng);
  fill_uniform(p.b1, a1, rng);
  fill_uniform(p.W2, a2, rng);
  fill_uniform(p.b2, a2, rng);
  return p;
}

TensorViews ClassifierParams::tensors() { return {view(W1), view(b1), view(W2), view(b2)}; }
ConstTensorViews ClassifierParams::tensors() const { return {view(W1), view(b1), view(W2), view(b2)}; }
int ClassifierParams::parameter_count() const {
  return static_cast<int>(W1.size() + b1.size() + W2.size() + b2.size());
}

double GeneratorParams::default_beta(int n) { return std::sqrt(2.0) / 100.0 * n; }

GeneratorParams GeneratorParams::zeros(int n, int hidden, int latent, double beta) {
  GeneratorParams p;
  p.n = n;
  p.hidden = hidden;
  p.latent = latent;
  p.beta = beta;
  p.E1 = Eigen::MatrixXd::Zero(hidden, 2 * n);
  p.e1 = Eigen::VectorXd::Zero(hidden);
  p.E2 = Eigen::MatrixXd::Zero(2 * latent, hidden);
  p.e2 = Eigen::VectorXd::Zero(2 * latent);
  p.D1 = Eigen::MatrixXd::Zero(hidden, latent);
  p.d1 = Eigen::VectorXd::Zero(hidden);
  p.D2 = Eigen::MatrixXd::Zero(n, hidden);
  p.d2 = Eigen::VectorXd::Zero(n);
  return p;
}

GeneratorParams GeneratorParams::init(int n, int hidden, int latent, double beta, Rng& rng) {
  GeneratorParams p = zeros(n, hidden, latent, beta);
  const double a_in = 1.0 / std::sqrt(2.0 * n), a_h = 1.0 / std::sqrt(static_cast<double>(hidden)),
               a_z = 1.0 / std::sqrt(static_cast<double>(latent));
  fill_uniform(p.E1, a_in, rng);
  fill_uniform(p.e1, a_in, rng);
  fill_uniform(p.E2, a_h, rng);
  fill_uniform(p.e2, a_h, rng);
  fill_uniform(p.D1, a_z, rng);
  fill_uniform(p.d1, a_z, rng);
  fill_uniform(p.D2, a_h, rng);
  fill_uniform(p.d2, a_h, rng);
  return p;
}

TensorViews GeneratorParams::tensors() {
  return {view(E1), view(e1), view(E2), view(e2), view(D1), view(d1), view(D2), view(d2)};
}
ConstTensorViews GeneratorParams::tensors() const {
  return {view(E1), view(e1), view(E2), view(e2), view(D1), view(d1), view(D2), view(d2)};
}
int GeneratorParams::parameter_count() const {
  int total = 0;
  for (const auto& t : tensors()) total += static_cast<int>(t.size());
  return total;
}

// --- classifier -------------------------------------------------------------

Eigen::MatrixXd logits(const ClassifierParams& theta, const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != 2 * theta.n) throw std::invalid_argument("classifier: input dimension mismatch");
  Eigen::MatrixXd hidden = ((theta.W1 * inputs).colwise() + theta.b1).cwiseMax(0.0);
  return (theta.W2 * hidden).colwise() + theta.b2;
}

Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& z) {
  Eigen::MatrixXd p(z.rows(), z.cols());
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    Eigen::VectorXd e = (z.col(c).array() - z.col(c).maxCoeff()).exp();
    p.col(c) = e / e.sum();
  }
  return p;
}

Eigen::VectorXd predict(const ClassifierParams& theta, const MaskedInput& input) {
  if (input.values.size() != theta.n || input.mask.size() != theta.n) {
    throw std::invalid_argument("predict: dimension mismatch");
  }
  return softmax_columns(logits(theta, input.encoded())).col(0);
}

double cross_entropy_from_logits(const Eigen::Ref<const Eigen::VectorXd>& z, int label) {
  const double m = z.maxCoeff();
  return m + std::log((z.array() - m).exp().sum()) - z[label];
}

double classifier_loss(const ClassifierParams& theta, const Eigen::MatrixXd& inputs, const std::vector<int>& labels,
                       const Eigen::VectorXd& weights, ClassifierParams* grad, Eigen::MatrixXd* input_grad) {
  if (inputs.rows() != 2 * theta.n) throw std::invalid_argument("classifier: input dimension mismatch");
  const Eigen::Index B = inputs.cols();
  Eigen::MatrixXd pre = (theta.W1 * inputs).colwise() + theta.b1;
  Eigen::MatrixXd act = pre.cwiseMax(0.0);
  Eigen::MatrixXd z = (theta.W2 * act).colwise() + theta.b2;
  Eigen::MatrixXd probs = softmax_columns(z);
  double total = 0.0;
  for (Eigen::Index c = 0; c < B; ++c) {
    total += weights[c] * cross_entropy_from_logits(z.col(c), labels[static_cast<std::size_t>(c)]);
  }
  if (grad == nullptr && input_grad == nullptr) return total;

  Eigen::MatrixXd dz = probs;
  for (Eigen::Index c = 0; c < B; ++c) {
    dz(labels[static_cast<std::size_t>(c)], c) -= 1.0;
    dz.col(c) *= weights[c];
  }
  Eigen::MatrixXd d_pre = (theta.W2.transpose() * dz).cwiseProduct(relu_mask(pre));
  if (grad != nullptr) {
    grad->W2.noalias() += dz * act.transpose();
    grad->b2 += dz.rowwise().sum();
    grad->W1.noalias() += d_pre * inputs.transpose();
    grad->b1 += d_pre.rowwise().sum();
  }
  if (input_grad != nullptr) *input_grad = theta.W1.transpose() * d_pre;
  return total;
}

// --- generator --------------------------------------------------------------

Encoding encode(const GeneratorParams& phi, const Eigen::MatrixXd& inputs) {
  EncoderCache c = encoder_forward(phi, inputs);
  return Encoding{std::move(c.mean), std::move(c.log_var)};
}

Eigen::MatrixXd decode(const GeneratorParams& phi, const Eigen::MatrixXd& latents) {
  if (latents.rows() != phi.latent) throw std::invalid_argument("decode: latent dimension mismatch");
  return decoder_forward(phi, latents).out;
}

double elbo_loss(const GeneratorParams& phi, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                 const Eigen::MatrixXd& target_mask, const Eigen::MatrixXd& eps, GeneratorParams* grad) {
  EncoderCache enc = encoder_forward(phi, inputs);
  Eigen::MatrixXd sigma = (0.5 * enc.log_var.array()).exp().matrix();
  Eigen::MatrixXd z = enc.mean + sigma.cwiseProduct(eps);
  DecoderCache dec = decoder_forward(phi, z);
  Eigen::MatrixXd diff = (dec.out - targets).cwiseProduct(target_mask);
  const double recon = 0.5 * diff.squaredNorm();
  const double kl =
      0.5 * (enc.mean.array().square() + enc.log_var.array().exp() - 1.0 - enc.log_var.array()).sum();
  if (grad != nullptr) {
    Eigen::MatrixXd dz = decoder_backward(phi, z, dec, diff, *grad);
    Eigen::MatrixXd d_mean = dz + phi.beta * enc.mean;
    Eigen::MatrixXd d_lv = (dz.cwiseProduct(eps).cwiseProduct(sigma) * 0.5).array() +
                           phi.beta * 0.5 * (enc.log_var.array().exp() - 1.0);
    encoder_backward(phi, inputs, enc, d_mean, d_lv, *grad);
  }
  return recon + phi.beta * kl;
}

Eigen::MatrixXd sample_full(const GeneratorParams& phi, const MaskedInput& condition, int K, Rng& rng,
                            bool zero_variance) {
  if (condition.values.size() != phi.n) throw std::invalid_argument("sample: dimension mismatch");
  Encoding e = encode(phi, condition.encoded());
  Eigen::MatrixXd z(phi.latent, K);
  for (int k = 0; k < K; ++k) {
    for (int l = 0; l < phi.latent; ++l) {
      const double eps = rng.normal();
      z(l, k) = e.mean(l, 0) + (zero_variance ? 0.0 : std::exp(0.5 * e.log_var(l, 0)) * eps);
    }
  }
  return decode(phi, z);
}

Eigen::MatrixXd sample_features(const GeneratorParams& phi, const MaskedInput& condition, const FeatureSet& target,
                                int K, Rng& rng, bool zero_variance) {
  for (int j : target) {
    if (j >= phi.n) throw std::out_of_range("sample_features: target index out of range");
    if (condition.mask[j] != 0.0) throw std::invalid_argument("sample_features: target overlaps condition");
  }
  if (target.empty() || K <= 0) return Eigen::MatrixXd(target.size(), std::max(K, 0));
  Eigen::MatrixXd full = sample_full(phi, condition, K, rng, zero_variance);
  Eigen::MatrixXd out(target.size(), K);
  int r = 0;
  for (int j : target) out.row(r++) = full.row(j);
  return out;
}

// --- training ---------------------------------------------------------------

void sgd_step(TensorViews params, const ConstTensorViews& grads, double learning_rate) {
  for (std::size_t k = 0; k < params.size(); ++k) params[k] -= learning_rate * grads[k];
}

ModelPair init_models(const ArchSpec& arch, int n, int num_classes, std::uint64_t seed) {
  Rng rng(seed);
  const double beta = arch.beta > 0.0 ? arch.beta : GeneratorParams::default_beta(n);
  ModelPair m;
  m.classifier = ClassifierParams::init(n, arch.hidden, num_classes, rng);
  m.generator = GeneratorParams::init(n, arch.hidden, arch.latent, beta, rng);
  return m;
}

ClassifierParams train_classifier(const ClassifierParams& theta, const Dataset& bucket, const FeatureSet& extra,
                                  int epochs, std::uint64_t seed, const TrainOptions& options) {
  ClassifierParams out = theta;
  if (epochs <= 0) return out;
  if (bucket.empty()) throw std::invalid_argument("train_classifier: empty bucket");
  Rng rng(seed);
  ClassifierParams grad = ClassifierParams::zeros(theta.n, theta.hidden, theta.num_classes);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    for_each_batch(shuffled(bucket.size(), rng), options.batch_size, [&](const std::vector<int>& batch) {
      const auto B = static_cast<Eigen::Index>(batch.size());
      Eigen::MatrixXd inputs(2 * theta.n, B);
      std::vector<int> labels(batch.size());
      for (Eigen::Index c = 0; c < B; ++c) {
        const Instance& inst = bucket[batch[static_cast<std::size_t>(c)]];
        encode_into(inputs.col(c), inst.features, inst.observed.union_with(extra));
        labels[static_cast<std::size_t>(c)] = inst.label;
      }
      for (auto t : grad.tensors()) t.setZero();
      classifier_loss(out, inputs, labels, Eigen::VectorXd::Constant(B, 1.0 / B), &grad);
      sgd_step(out.tensors(), std::as_const(grad).tensors(), options.learning_rate);
    });
  }
  return out;
}

ModelPair pretrain(const ArchSpec& arch, const Dataset& bucket, int epochs, std::uint64_t seed,
                   const TrainOptions& options) {
  if (bucket.empty()) throw std::invalid_argument("pretrain: empty bucket");
  ModelPair m = init_models(arch, bucket.n, bucket.num_classes, derive_seed(seed, 1));
  if (epochs <= 0) return m;
  m.classifier = train_classifier(m.classifier, bucket, FeatureSet{}, epochs, derive_seed(seed, 2), options);

  GeneratorParams& phi = m.generator;
  GeneratorParams grad = GeneratorParams::zeros(phi.n, phi.hidden, phi.latent, phi.beta);
  Rng rng(derive_seed(seed, 3));
  const int n = bucket.n;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    for_each_batch(shuffled(bucket.size(), rng), options.batch_size, [&](const std::vector<int>& batch) {
      const auto B = static_cast<Eigen::Index>(batch.size());
      Eigen::MatrixXd inputs(2 * n, B), targets(n, B), eps(phi.latent, B);
      for (Eigen::Index c = 0; c < B; ++c) {
        const Instance& inst = bucket[batch[static_cast<std::size_t>(c)]];
        FeatureSet cond = inst.observed;
        for (int j = 0; j < n; ++j) {
          if (!inst.observed.contains(j) && rng.uniform() < options.reveal_probability) cond.insert(j);
        }
        encode_into(inputs.col(c), inst.features, cond);
        targets.col(c) = inst.features;
      }
      for (Eigen::Index c = 0; c < B; ++c)
        for (int l = 0; l < phi.latent; ++l) eps(l, c) = rng.normal();
      for (auto t : grad.tensors()) t.setZero();
      elbo_loss(phi, inputs, targets, Eigen::MatrixXd::Ones(n, B), eps, &grad);
      for (auto t : grad.tensors()) t /= static_cast<double>(B);
      sgd_step(phi.tensors(), std::as_const(grad).tensors(), options.learning_rate);
    });
  }
  return m;
}

double f_objective(const ModelPair& models, const Dataset& bucket, const std::vector<int>& batch, const FeatureSet& U,
                   const Eigen::VectorXd& deltas, int K, const Eigen::MatrixXd& eps, ModelPair* grad) {
  const ClassifierParams& theta = models.classifier;
  const GeneratorParams& phi = models.generator;
  const int n = bucket.n;
  const auto B = static_cast<Eigen::Index>(batch.size());
  if (K > 0 && (eps.rows() != phi.latent || eps.cols() != B * K)) {
    throw std::invalid_argument("f_objective: noise shape mismatch");
  }

  Eigen::MatrixXd cond(2 * n, B);
  for (Eigen::Index b = 0; b < B; ++b) {
    const Instance& inst = bucket[batch[static_cast<std::size_t>(b)]];
    encode_into(cond.col(b), inst.features, inst.observed);
  }

  Eigen::MatrixXd inputs(2 * n, B * (1 + K));
  std::vector<int> labels(static_cast<std::size_t>(B * (1 + K)));
  Eigen::VectorXd weights(B * (1 + K));
  std::vector<FeatureSet> gen_sets(static_cast<std::size_t>(B));
  for (Eigen::Index b = 0; b < B; ++b) {
    const Instance& inst = bucket[batch[static_cast<std::size_t>(b)]];
    const double delta = deltas[batch[static_cast<std::size_t>(b)]];
    encode_into(inputs.col(b), inst.features, inst.observed.union_with(U));
    labels[static_cast<std::size_t>(b)] = inst.label;
    weights[b] = delta;
    gen_sets[static_cast<std::size_t>(b)] = U.minus(inst.observed);
  }

  EncoderCache enc;
  Eigen::MatrixXd sigma, z;
  DecoderCache dec;
  if (K > 0) {
    enc = encoder_forward(phi, cond);
    sigma = (0.5 * enc.log_var.array()).exp().matrix();
    z.resize(phi.latent, B * K);
    for (Eigen::Index b = 0; b < B; ++b)
      for (int k = 0; k < K; ++k) {
        const Eigen::Index c = b * K + k;
        z.col(c) = enc.mean.col(b) + sigma.col(b).cwiseProduct(eps.col(c));
      }
    dec = decoder_forward(phi, z);
    for (Eigen::Index b = 0; b < B; ++b) {
      const Instance& inst = bucket[batch[static_cast<std::size_t>(b)]];
      const double delta = deltas[batch[static_cast<std::size_t>(b)]];
      for (int k = 0; k < K; ++k) {
        const Eigen::Index c = B + b * K + k;
        Eigen::VectorXd g = dec.out.col(b * K + k);
        encode_into(inputs.col(c), inst.features, inst.observed, &g, &gen_sets[static_cast<std::size_t>(b)]);
        labels[static_cast<std::size_t>(c)] = inst.label;
        weights[c] = (1.0 - delta) / K;
      }
    }
  }
  if (K <= 0) {
    inputs.conservativeResize(Eigen::NoChange, B);
    labels.resize(static_cast<std::size_t>(B));
    weights.conservativeResize(B);
  }

  if (grad == nullptr) return classifier_loss(theta, inputs, labels, weights);

  Eigen::MatrixXd input_grad;
  const double total = classifier_loss(theta, inputs, labels, weights, &grad->classifier, &input_grad);
  if (K > 0) {
    Eigen::MatrixXd d_out = Eigen::MatrixXd::Zero(n, B * K);
    for (Eigen::Index b = 0; b < B; ++b)
      for (int j : gen_sets[static_cast<std::size_t>(b)])
        for (int k = 0; k < K; ++k) d_out(j, b * K + k) = input_grad(j, B + b * K + k);
    Eigen::MatrixXd dz = decoder_backward(phi, z, dec, d_out, grad->generator);
    Eigen::MatrixXd d_mean = Eigen::MatrixXd::Zero(phi.latent, B), d_lv = Eigen::MatrixXd::Zero(phi.latent, B);
    for (Eigen::Index b = 0; b < B; ++b)
      for (int k = 0; k < K; ++k) {
        const Eigen::Index c = b * K + k;
        d_mean.col(b) += dz.col(c);
        d_lv.col(b) += 0.5 * dz.col(c).cwiseProduct(eps.col(c)).cwiseProduct(sigma.col(b));
      }
    encoder_backward(phi, cond, enc, d_mean, d_lv, grad->generator);
  }
  return total;
}

ModelPair train_f(const ModelPair& models, const Dataset& bucket, const FeatureSet& U, const Eigen::VectorXd& deltas,
                  int epochs, int K, std::uint64_t seed, const TrainOptions& options) {
  ModelPair out = models;
  if (epochs <= 0) return out;
  if (bucket.empty()) throw std::invalid_argument("train_f: empty bucket");
  if (deltas.size() != bucket.size()) throw std::invalid_argument("train_f: one delta per instance required");
  Rng rng(seed);
  const auto& th = models.classifier;
  const auto& ph = models.generator;
  ModelPair grad{ClassifierParams::zeros(th.n, th.hidden, th.num_classes),
                 GeneratorParams::zeros(ph.n, ph.hidden, ph.latent, ph.beta)};
  for (int epoch = 0; epoch < epochs; ++epoch) {
    for_each_batch(shuffled(bucket.size(), rng), options.batch_size, [&](const std::vector<int>& batch) {
      const auto B = static_cast<Eigen::Index>(batch.size());
      Eigen::MatrixXd eps(ph.latent, B * std::max(K, 0));
      for (Eigen::Index c = 0; c < eps.cols(); ++c)
        for (int l = 0; l < ph.latent; ++l) eps(l, c) = rng.normal();
      for (auto t : grad.classifier.tensors()) t.setZero();
      for (auto t : grad.generator.tensors()) t.setZero();
      f_objective(out, bucket, batch, U, deltas, K, eps, &grad);
      const double scale = options.learning_rate / static_cast<double>(B);
      sgd_step(out.classifier.tensors(), std::as_const(grad.classifier).tensors(), scale);
      sgd_step(out.generator.tensors(), std::as_const(grad.generator).tensors(), scale);
    });
  }
  return out;
}

// --- checkpoints ------------------------------------------------------------

void write_classifier(std::ostream& out, const ClassifierParams& theta) {
  out << "classifier " << theta.n << ' ' << theta.hidden << ' ' << theta.num_classes << '\n';
  write_matrix(out, theta.W1);
  write_vector(out, theta.b1);
  write_matrix(out, theta.W2);
  write_vector(out, theta.b2);
}

ClassifierParams read_classifier(std::istream& in) {
  std::string tag;
  int n = 0, hidden = 0, classes = 0;
  if (!(in >> tag >> n >> hidden >> classes) || tag != "classifier") {
    throw std::runtime_error("checkpoint: expected classifier block");
  }
  ClassifierParams p = ClassifierParams::zeros(n, hidden, classes);
  read_matrix(in, p.W1);
  read_vector(in, p.b1);
  read_matrix(in, p.W2);
  read_vector(in, p.b2);
  return p;
}

void write_generator(std::ostream& out, const GeneratorParams& phi) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", phi.beta);
  out << "generator " << phi.n << ' ' << phi.hidden << ' ' << phi.latent << ' ' << buf << '\n';
  write_matrix(out, phi.E1);
  write_vector(out, phi.e1);
  write_matrix(out, phi.E2);
  write_vector(out, phi.e2);
  write_matrix(out, phi.D1);
  write_vector(out, phi.d1);
  write_matrix(out, phi.D2);
  write_vector(out, phi.d2);
}

GeneratorParams read_generator(std::istream& in) {
  std::string tag;
  int n = 0, hidden = 0, latent = 0;
  double beta = 0;
  if (!(in >> tag >> n >> hidden >> latent >> beta) || tag != "generator") {
    throw std::runtime_error("checkpoint: expected generator block");
  }
  GeneratorParams p = GeneratorParams::zeros(n, hidden, latent, beta);
  read_matrix(in, p.E1);
  read_vector(in, p.e1);
  read_matrix(in, p.E2);
  read_vector(in, p.e2);
  read_matrix(in, p.D1);
  read_vector(in, p.d1);
  read_matrix(in, p.D2);
  read_vector(in, p.d2);
  return p;
}

}  // namespace genex
