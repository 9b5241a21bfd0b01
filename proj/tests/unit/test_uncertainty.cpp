#include "doctest.h"
#include "genex/uncertainty.hpp"
#include "helpers.hpp"

using namespace genex;

namespace {

UncertaintyEstimator estimator(ClassifierParams h0, std::shared_ptr<const FeatureSampler> gen, int K) {
  UncertaintyEstimator est;
  est.num_classes = h0.num_classes;
  est.classifier = std::move(h0);
  est.generator = std::move(gen);
  est.K = K;
  return est;
}

}  // namespace

TEST_CASE("delta extremes") {
  Dataset d = testutil::sign_dataset(3, 4, 0, FeatureSet{0}, 2);
  Rng rng(1);
  SUBCASE("confident classifier gives zero") {
    ClassifierParams h0 = ClassifierParams::zeros(4, 3, 3);
    h0.b2 << 1000.0, 0.0, 0.0;
    auto est = estimator(h0, CopySampler::perfect(4), 8);
    CHECK(delta(est, d[0], FeatureSet{1, 2}, rng) == doctest::Approx(0.0));
  }
  SUBCASE("uniform classifier gives one") {
    auto est = estimator(ClassifierParams::zeros(4, 3, 4), CopySampler::perfect(4), 8);
    CHECK(delta(est, d[0], FeatureSet{1, 2}, rng) == doctest::Approx(1.0));
    CHECK(delta(est, d[1], FeatureSet{}, rng) == doctest::Approx(1.0));
  }
  SUBCASE("single class is rejected") {
    auto est = estimator(ClassifierParams::zeros(4, 3, 1), CopySampler::perfect(4), 8);
    CHECK_THROWS_AS(delta(est, d[0], FeatureSet{1}, rng), std::invalid_argument);
  }
  SUBCASE("constant mode") {
    auto est = estimator(ClassifierParams::zeros(4, 3, 2), CopySampler::perfect(4), 8);
    est.mode = DeltaMode::constant;
    CHECK(delta(est, d[0], FeatureSet{1}, rng) == 0.8);
  }
}

TEST_CASE("deterministic generator makes K irrelevant") {
  Rng init(4);
  Dataset d = testutil::sign_dataset(4, 5, 1, FeatureSet{0, 3}, 7);
  ClassifierParams h0 = ClassifierParams::init(5, 8, 3, init);
  GeneratorParams g0 = GeneratorParams::init(5, 8, 3, 0.07, init);
  auto sampler = std::make_shared<VaeSampler>(g0, true);
  Rng r1(1), r2(2);
  const double one = delta(estimator(h0, sampler, 1), d[2], FeatureSet{1, 2}, r1);
  const double many = delta(estimator(h0, sampler, 37), d[2], FeatureSet{1, 2}, r2);
  CHECK(one == doctest::Approx(many).epsilon(1e-12));
}

TEST_CASE("delta stays in the unit interval and is reproducible") {
  Rng init(9);
  Dataset d = testutil::sign_dataset(10, 5, 1, FeatureSet{0}, 3);
  for (int t = 0; t < 5; ++t) {
    ClassifierParams h0 = ClassifierParams::init(5, 8, 3, init);
    for (auto m : h0.tensors()) m *= 5.0;
    auto est = estimator(h0, std::make_shared<VaeSampler>(GeneratorParams::init(5, 8, 3, 0.07, init)), 16);
    for (const auto& inst : d.instances) {
      Rng a(derive_seed(5, inst.id)), b(derive_seed(5, inst.id));
      const double v = delta(est, inst, FeatureSet{1, 2, 4}, a);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      CHECK(v == delta(est, inst, FeatureSet{1, 2, 4}, b));
    }
  }
}

TEST_CASE("delta table matches direct estimates") {
  Rng init(12);
  auto d = testutil::share(testutil::sign_dataset(6, 5, 1, FeatureSet{0}, 3));
  auto est = std::make_shared<UncertaintyEstimator>(estimator(
      ClassifierParams::init(5, 8, 3, init), std::make_shared<VaeSampler>(GeneratorParams::init(5, 8, 3, 0.07, init)), 16));
  DeltaTable table(est, d, 77);
  const FeatureSet S{2, 3};
  for (int i = 0; i < d->size(); ++i) {
    Rng rng(derive_seed(77, (*d)[i].id));
    CHECK(table.at(i, S) == doctest::Approx(delta(*est, (*d)[i], S, rng)).epsilon(1e-12));
  }
  // observed members are stripped
  CHECK(table.at(0, FeatureSet{0, 2}) == doctest::Approx(table.at(0, FeatureSet{2})).epsilon(1e-12));
  const std::vector<int> cands{1, 4, 0};
  Eigen::MatrixXd sw = table.sweep(S, cands);
  for (int i = 0; i < d->size(); ++i)
    for (std::size_t c = 0; c < cands.size(); ++c)
      CHECK(sw(static_cast<Eigen::Index>(c), i) == doctest::Approx(table.at(i, S.with(cands[c]))).epsilon(1e-12));
}
