#include <cmath>
#include <functional>
#include <sstream>

#include "doctest.h"
#include "genex/models.hpp"
#include "genex/synthetic.hpp"
#include "helpers.hpp"

using namespace genex;

namespace {

Eigen::MatrixXd random_inputs(int n, int B, Rng& rng) {
  Eigen::MatrixXd in(2 * n, B);
  for (int c = 0; c < B; ++c)
    for (int j = 0; j < n; ++j) {
      const bool seen = rng.uniform() < 0.6;
      in(n + j, c) = seen ? 1.0 : 0.0;
      in(j, c) = seen ? rng.normal() : 0.0;
    }
  return in;
}

/// Worst relative error between analytic and central-difference gradients.
template <typename Params>
double worst_gradient_error(Params& p, const Params& analytic, const std::function<double()>& loss) {
  const double h = 1e-5;
  double worst = 0.0;
  auto params = p.tensors();
  auto grads = analytic.tensors();
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (Eigen::Index k = 0; k < params[t].size(); ++k) {
      const double keep = params[t][k];
      params[t][k] = keep + h;
      const double up = loss();
      params[t][k] = keep - h;
      const double down = loss();
      params[t][k] = keep;
      const double numeric = (up - down) / (2 * h);
      const double a = grads[t][k];
      const double scale = std::max(std::abs(a), std::abs(numeric));
      if (scale > 1e-7) worst = std::max(worst, std::abs(a - numeric) / scale);
    }
  }
  return worst;
}

double accuracy(const ClassifierParams& theta, const Dataset& d, const FeatureSet& extra = {}) {
  int ok = 0;
  for (const auto& inst : d.instances) {
    Eigen::VectorXd p = predict(theta, MaskedInput::from(inst.features, inst.observed.union_with(extra)));
    Eigen::Index best = 0;
    p.maxCoeff(&best);
    ok += best == inst.label ? 1 : 0;
  }
  return static_cast<double>(ok) / d.size();
}

}  // namespace

TEST_CASE("predict") {
  ClassifierParams zero = ClassifierParams::zeros(3, 4, 4);
  Eigen::VectorXd p = predict(zero, MaskedInput::from(Eigen::Vector3d(1, 2, 3), FeatureSet{0, 2}));
  for (int c = 0; c < 4; ++c) CHECK(p[c] == doctest::Approx(0.25));
  CHECK(cross_entropy_from_logits(Eigen::VectorXd::Zero(4), 2) == doctest::Approx(1.3863).epsilon(1e-4));

  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    ClassifierParams theta = ClassifierParams::init(5, 8, 3, rng);
    Eigen::VectorXd x(5);
    for (int j = 0; j < 5; ++j) x[j] = 3 * rng.normal();
    Eigen::VectorXd q = predict(theta, MaskedInput::from(x, FeatureSet{1, 4}));
    CHECK(q.sum() == doctest::Approx(1.0));
    CHECK(q.minCoeff() > 0.0);
    CHECK(q.maxCoeff() < 1.0);
  }
  CHECK_THROWS(predict(zero, MaskedInput::from(Eigen::Vector2d(1, 2), FeatureSet{0})));
}

TEST_CASE("masked input zeroes unobserved values") {
  MaskedInput m = MaskedInput::from(Eigen::Vector3d(4, 5, 6), FeatureSet{1});
  CHECK(m.values == Eigen::Vector3d(0, 5, 0));
  CHECK(m.mask == Eigen::Vector3d(0, 1, 0));
  CHECK(m.support() == FeatureSet{1});
  MaskedInput c = MaskedInput::combine(Eigen::Vector3d(4, 5, 6), FeatureSet{1}, Eigen::Vector3d(7, 8, 9), FeatureSet{1, 2});
  CHECK(c.values == Eigen::Vector3d(0, 5, 9));
  CHECK(c.support() == FeatureSet{1, 2});
}

TEST_CASE("classifier cross-entropy gradient matches finite differences") {
  Rng rng(17);
  for (int config = 0; config < 10; ++config) {
    const int n = 2 + config % 5, C = 2 + config % 3, B = 4;
    ClassifierParams theta = ClassifierParams::init(n, 8, C, rng);
    Eigen::MatrixXd inputs = random_inputs(n, B, rng);
    std::vector<int> labels;
    Eigen::VectorXd w(B);
    for (int b = 0; b < B; ++b) {
      labels.push_back(static_cast<int>(rng.below(C)));
      w[b] = 0.5 + rng.uniform();
    }
    ClassifierParams grad = ClassifierParams::zeros(n, 8, C);
    Eigen::MatrixXd input_grad;
    classifier_loss(theta, inputs, labels, w, &grad, &input_grad);
    CHECK(worst_gradient_error(theta, grad, [&] { return classifier_loss(theta, inputs, labels, w); }) < 1e-4);

    // input gradient
    const double h = 1e-5;
    for (int r = 0; r < 2 * n; ++r) {
      Eigen::MatrixXd up = inputs, down = inputs;
      up(r, 0) += h;
      down(r, 0) -= h;
      const double numeric = (classifier_loss(theta, up, labels, w) - classifier_loss(theta, down, labels, w)) / (2 * h);
      CHECK(input_grad(r, 0) == doctest::Approx(numeric).epsilon(1e-4));
    }
  }
}

TEST_CASE("ELBO gradient with frozen noise matches finite differences") {
  Rng rng(23);
  for (int config = 0; config < 10; ++config) {
    const int n = 2 + config % 5, B = 3, L = 3;
    GeneratorParams phi = GeneratorParams::init(n, 8, L, GeneratorParams::default_beta(n), rng);
    Eigen::MatrixXd inputs = random_inputs(n, B, rng);
    Eigen::MatrixXd targets(n, B), mask(n, B), eps(L, B);
    for (int b = 0; b < B; ++b) {
      for (int j = 0; j < n; ++j) {
        targets(j, b) = rng.normal();
        mask(j, b) = rng.uniform() < 0.7 ? 1.0 : 0.0;
      }
      for (int l = 0; l < L; ++l) eps(l, b) = rng.normal();
    }
    GeneratorParams grad = GeneratorParams::zeros(n, 8, L, phi.beta);
    elbo_loss(phi, inputs, targets, mask, eps, &grad);
    CHECK(worst_gradient_error(phi, grad, [&] { return elbo_loss(phi, inputs, targets, mask, eps); }) < 1e-4);
  }
}

TEST_CASE("surrogate objective gradient covers both networks") {
  Rng rng(31);
  Dataset d = testutil::sign_dataset(5, 4, 2, FeatureSet{0}, 8);
  ModelPair m{ClassifierParams::init(4, 8, 2, rng), GeneratorParams::init(4, 8, 3, 0.05, rng)};
  const std::vector<int> batch{0, 1, 2, 3, 4};
  const FeatureSet U{1, 2};
  Eigen::VectorXd deltas(5);
  deltas << 0.2, 0.5, 0.9, 0.0, 1.0;
  const int K = 3;
  Eigen::MatrixXd eps(3, 5 * K);
  for (Eigen::Index k = 0; k < eps.size(); ++k) eps.data()[k] = rng.normal();
  ModelPair grad{ClassifierParams::zeros(4, 8, 2), GeneratorParams::zeros(4, 8, 3, 0.05)};
  f_objective(m, d, batch, U, deltas, K, eps, &grad);
  auto loss = [&] { return f_objective(m, d, batch, U, deltas, K, eps); };
  CHECK(worst_gradient_error(m.classifier, grad.classifier, loss) < 1e-4);
  CHECK(worst_gradient_error(m.generator, grad.generator, loss) < 1e-4);
}

TEST_CASE("surrogate objective limits") {
  Rng rng(5);
  Dataset d = testutil::sign_dataset(6, 4, 1, FeatureSet{0}, 2);
  ModelPair m{ClassifierParams::init(4, 8, 2, rng), GeneratorParams::init(4, 8, 3, 0.05, rng)};
  const std::vector<int> batch{0, 1, 2, 3, 4, 5};
  const FeatureSet U{1, 3};
  const int K = 4;
  Eigen::MatrixXd eps(3, 6 * K);
  for (Eigen::Index k = 0; k < eps.size(); ++k) eps.data()[k] = rng.normal();

  double oracle = 0.0;
  for (const auto& inst : d.instances) {
    Eigen::VectorXd p = predict(m.classifier, MaskedInput::from(inst.features, inst.observed.union_with(U)));
    oracle -= std::log(p[inst.label]);
  }
  CHECK(f_objective(m, d, batch, U, Eigen::VectorXd::Ones(6), K, eps) == doctest::Approx(oracle));

  double generated = 0.0;
  for (int i = 0; i < 6; ++i) {
    const Instance& inst = d[i];
    Encoding e = encode(m.generator, MaskedInput::from(inst.features, inst.observed).encoded());
    double mean = 0.0;
    for (int k = 0; k < K; ++k) {
      Eigen::VectorXd z = e.mean.col(0) + (0.5 * e.log_var.col(0).array()).exp().matrix().cwiseProduct(eps.col(i * K + k));
      Eigen::VectorXd g = decode(m.generator, z);
      Eigen::VectorXd p = predict(m.classifier, MaskedInput::combine(inst.features, inst.observed, g, U));
      mean -= std::log(p[inst.label]) / K;
    }
    generated += mean;
  }
  CHECK(f_objective(m, d, batch, U, Eigen::VectorXd::Zero(6), K, eps) == doctest::Approx(generated));
}

TEST_CASE("Monte Carlo variance of the surrogate falls as 1/K") {
  Rng rng(44);
  Dataset d = testutil::sign_dataset(1, 4, 1, FeatureSet{0}, 3);
  ModelPair m{ClassifierParams::init(4, 8, 2, rng), GeneratorParams::init(4, 8, 3, 0.05, rng)};
  for (auto t : m.classifier.tensors()) t *= 4.0;
  std::vector<double> logk, logv;
  for (int K : {1, 4, 16, 64}) {
    const int trials = 2000;
    double sum = 0.0, sq = 0.0;
    for (int t = 0; t < trials; ++t) {
      Eigen::MatrixXd eps(3, K);
      for (Eigen::Index k = 0; k < eps.size(); ++k) eps.data()[k] = rng.normal();
      const double f = f_objective(m, d, {0}, FeatureSet{1, 2, 3}, Eigen::VectorXd::Zero(1), K, eps);
      sum += f;
      sq += f * f;
    }
    const double mean = sum / trials;
    logk.push_back(std::log(K));
    logv.push_back(std::log(sq / trials - mean * mean));
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < logk.size(); ++i) {
    mx += logk[i] / 4;
    my += logv[i] / 4;
  }
  double num = 0, den = 0;
  for (std::size_t i = 0; i < logk.size(); ++i) {
    num += (logk[i] - mx) * (logv[i] - my);
    den += (logk[i] - mx) * (logk[i] - mx);
  }
  const double slope = num / den;
  CHECK(slope > -1.2);
  CHECK(slope < -0.8);
}

TEST_CASE("sampling") {
  Rng init(2);
  GeneratorParams phi = GeneratorParams::init(4, 8, 3, 0.05, init);
  MaskedInput cond = MaskedInput::from(Eigen::Vector4d(0.5, -1, 2, 0), FeatureSet{0, 2});
  SUBCASE("zero variance gives the decoder mean") {
    Rng rng(1);
    Eigen::MatrixXd s = sample_features(phi, cond, FeatureSet{1, 3}, 1, rng, true);
    Eigen::VectorXd mean = decode(phi, encode(phi, cond.encoded()).mean).col(0);
    CHECK(s(0, 0) == doctest::Approx(mean[1]));
    CHECK(s(1, 0) == doctest::Approx(mean[3]));
  }
  SUBCASE("same seed same draws") {
    Rng a(9), b(9);
    CHECK(sample_features(phi, cond, FeatureSet{1, 3}, 5, a) == sample_features(phi, cond, FeatureSet{1, 3}, 5, b));
  }
  SUBCASE("empty target") {
    Rng rng(1);
    CHECK(sample_features(phi, cond, FeatureSet{}, 5, rng).rows() == 0);
  }
  SUBCASE("overlap rejected") {
    Rng rng(1);
    CHECK_THROWS_AS(sample_features(phi, cond, FeatureSet{0, 1}, 2, rng), std::invalid_argument);
  }
}

TEST_CASE("pretraining") {
  SUBCASE("zero epochs returns the initialization") {
    Dataset d = testutil::sign_dataset(20, 3, 0, FeatureSet{0}, 1);
    ModelPair a = pretrain({8, 3, -1}, d, 0, 5);
    ModelPair b = init_models({8, 3, -1}, 3, 2, derive_seed(5, 1));
    CHECK(a.classifier.W1 == b.classifier.W1);
    CHECK(a.generator.D2 == b.generator.D2);
    CHECK(a.generator.beta == doctest::Approx(std::sqrt(2.0) / 100 * 3));
  }
  SUBCASE("separable classes are learned") {
    Dataset d = synthetic::two_blobs(100, 2, 3.0, 7);
    // independent check: plain logistic regression separates the same data
    Eigen::Vector2d w = Eigen::Vector2d::Zero();
    double b = 0.0;
    for (int it = 0; it < 500; ++it) {
      Eigen::Vector2d gw = Eigen::Vector2d::Zero();
      double gb = 0.0;
      for (const auto& inst : d.instances) {
        const double p = 1.0 / (1.0 + std::exp(-(w.dot(inst.features) + b)));
        gw += (p - inst.label) * inst.features;
        gb += p - inst.label;
      }
      w -= 0.01 * gw;
      b -= 0.01 * gb;
    }
    int lr_ok = 0;
    for (const auto& inst : d.instances) lr_ok += ((w.dot(inst.features) + b > 0) == (inst.label == 1)) ? 1 : 0;
    REQUIRE(lr_ok >= 190);

    ModelPair m = pretrain({}, d, 200, 3);
    CHECK(accuracy(m.classifier, d) >= 0.95);
  }
  SUBCASE("generator recovers a copied feature") {
    auto make = [](int N, std::uint64_t seed) {
      Dataset d;
      d.n = 3;
      d.num_classes = 2;
      Rng rng(seed);
      for (int i = 0; i < N; ++i) {
        Instance inst;
        inst.id = i;
        const double a = rng.normal();
        inst.features = Eigen::Vector3d(a, a, rng.normal());
        inst.label = a > 0;
        inst.observed = i % 2 == 0 ? FeatureSet{0} : FeatureSet{0, 2};
        d.instances.push_back(inst);
      }
      return d;
    };
    Dataset train = make(400, 1), held = make(100, 2);
    ModelPair m = pretrain({32, 4, -1}, train, 300, 4);
    Rng rng(6);
    double err = 0.0;
    int count = 0;
    for (const auto& inst : held.instances) {
      Eigen::MatrixXd s = sample_features(m.generator, MaskedInput::from(inst.features, FeatureSet{0}), FeatureSet{1}, 8, rng);
      for (int k = 0; k < 8; ++k, ++count) err += std::abs(s(0, k) - inst.features[0]);
    }
    CHECK(err / count < 0.2);
  }
  CHECK_THROWS(pretrain({}, Dataset{}, 1, 1));
}

TEST_CASE("train_f") {
  Dataset d = testutil::sign_dataset(30, 4, 1, FeatureSet{0}, 3);
  ModelPair m = pretrain({8, 3, -1}, d, 5, 2);
  SUBCASE("zero epochs leaves parameters unchanged") {
    ModelPair t = train_f(m, d, FeatureSet{1}, Eigen::VectorXd::Constant(30, 0.5), 0, 4, 1);
    CHECK(t.classifier.W1 == m.classifier.W1);
    CHECK(t.generator.E1 == m.generator.E1);
  }
  SUBCASE("training lowers the objective") {
    Eigen::VectorXd deltas = Eigen::VectorXd::Constant(30, 0.8);
    std::vector<int> all(30);
    for (int i = 0; i < 30; ++i) all[static_cast<std::size_t>(i)] = i;
    Rng rng(3);
    Eigen::MatrixXd eps(3, 30 * 4);
    for (Eigen::Index k = 0; k < eps.size(); ++k) eps.data()[k] = rng.normal();
    const double before = f_objective(m, d, all, FeatureSet{1}, deltas, 4, eps);
    ModelPair t = train_f(m, d, FeatureSet{1}, deltas, 40, 4, 1);
    CHECK(f_objective(t, d, all, FeatureSet{1}, deltas, 4, eps) < before);
  }
  CHECK_THROWS(train_f(m, Dataset{}, FeatureSet{1}, Eigen::VectorXd(), 1, 4, 1));
}

TEST_CASE("checkpoints are bit exact") {
  Rng rng(8);
  ClassifierParams theta = ClassifierParams::init(3, 5, 4, rng);
  GeneratorParams phi = GeneratorParams::init(3, 5, 2, 0.0424, rng);
  std::stringstream buf;
  write_classifier(buf, theta);
  write_generator(buf, phi);
  ClassifierParams t2 = read_classifier(buf);
  GeneratorParams p2 = read_generator(buf);
  CHECK(t2.W1 == theta.W1);
  CHECK(t2.b2 == theta.b2);
  CHECK(p2.E2 == phi.E2);
  CHECK(p2.d2 == phi.d2);
  CHECK(p2.beta == phi.beta);
  CHECK(p2.latent == 2);
}
