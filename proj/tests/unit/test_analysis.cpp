#include <cmath>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "genex/analysis.hpp"
#include "helpers.hpp"

using namespace genex;

namespace {

double size_of(const FeatureSet& S) { return static_cast<double>(S.size()); }

}  // namespace

TEST_CASE("partial monotonicity") {
  SUBCASE("constant") {
    MonotonicityEstimate m = estimate_partial_monotonicity([](const FeatureSet&) { return 3.5; }, 4);
    CHECK(m.m_min == 1.0);
    CHECK(m.m_max == 1.0);
    CHECK(m.exhaustive);
  }
  SUBCASE("ten minus size on three features") {
    MonotonicityEstimate m = estimate_partial_monotonicity([](const FeatureSet& S) { return 10.0 - size_of(S); }, 3);
    CHECK(m.m_min == doctest::Approx(0.7));
    CHECK(m.m_max == 1.0);
    CHECK(m.pairs_evaluated == 27);
  }
  SUBCASE("zero function") {
    MonotonicityEstimate m = estimate_partial_monotonicity([](const FeatureSet&) { return 0.0; }, 3);
    CHECK(m.m_min == 1.0);
    CHECK(m.m_max == 1.0);
  }
  SUBCASE("sampled above the exhaustive limit") {
    long long calls = 0;
    auto G = [&](const FeatureSet& S) {
      ++calls;
      return 20.0 - size_of(S);
    };
    MonotonicityEstimate m = estimate_partial_monotonicity(G, 14, 2000, 3);
    CHECK_FALSE(m.exhaustive);
    CHECK(m.m_min >= 6.0 / 20.0);
    CHECK(m.m_max <= 1.0);
    CHECK(m.pairs_evaluated > 0);
    CHECK(calls < (1 << 14));
  }
}

TEST_CASE("weak submodularity") {
  SUBCASE("modular function has unit magnitude ratio") {
    const std::vector<double> w{-1.0, -2.0, -0.5, -3.0};
    auto G = [&](const FeatureSet& S) {
      double v = 10.0;
      for (int e : S) v += w[static_cast<std::size_t>(e)];
      return v;
    };
    SubmodularityEstimate s = estimate_weak_submodularity(G, 4);
    CHECK(s.defined);
    // sum of singles / |joint| with both negative
    CHECK(s.gamma_min == doctest::Approx(-1.0));
    CHECK(s.gamma_max == doctest::Approx(-1.0));
  }
  SUBCASE("flat function is undefined") {
    SubmodularityEstimate s = estimate_weak_submodularity([](const FeatureSet&) { return 2.0; }, 4);
    CHECK_FALSE(s.defined);
    CHECK(s.pairs_evaluated == 0);
    CHECK(s.pairs_skipped_zero_denominator == 65);
  }
  SUBCASE("negated coverage matches direct enumeration") {
    // G = -coverage, coverage is monotone submodular.
    const std::vector<std::uint64_t> covers{0b0011, 0b0110, 0b1100, 0b1001};
    const std::vector<double> weight{1.0, 2.5, 0.7, 1.9};
    auto G = [&](const FeatureSet& S) {
      std::uint64_t c = 0;
      for (int e : S) c |= covers[static_cast<std::size_t>(e)];
      double v = 0.0;
      for (int b = 0; b < 4; ++b)
        if (c >> b & 1U) v -= weight[static_cast<std::size_t>(b)];
      return v;
    };
    double lo = 1e300, hi = -1e300;
    long long used = 0;
    for (std::uint64_t T = 0; T < 16; ++T)
      for (std::uint64_t S = 1; S < 16; ++S) {
        if (S & T) continue;
        const FeatureSet Ts = FeatureSet::from_bits(T);
        const double gT = G(Ts);
        double singles = 0.0;
        for (int u = 0; u < 4; ++u)
          if (S >> u & 1U) singles += G(Ts.with(u)) - gT;
        const double joint = G(Ts.union_with(FeatureSet::from_bits(S))) - gT;
        if (std::abs(joint) <= 1e-9) continue;
        ++used;
        lo = std::min(lo, singles / std::abs(joint));
        hi = std::max(hi, singles / std::abs(joint));
      }
    SubmodularityEstimate s = estimate_weak_submodularity(G, 4);
    CHECK(s.pairs_evaluated == used);
    CHECK(s.gamma_min == doctest::Approx(lo));
    CHECK(s.gamma_max == doctest::Approx(hi));
    CHECK(std::max(s.gamma_max, -s.gamma_min) >= 1.0);
  }
}

TEST_CASE("brute force minimum") {
  auto neg = [](const FeatureSet& S) { return -size_of(S); };
  OptResult zero = brute_force_opt(neg, 5, 0);
  CHECK(zero.set.empty());
  CHECK(zero.value == 0.0);
  OptResult two = brute_force_opt(neg, 5, 2);
  CHECK(two.set == FeatureSet{0, 1});
  CHECK(two.value == -2.0);
  CHECK(two.subsets_evaluated == 16);
  CHECK_THROWS_AS(brute_force_opt(neg, 40, 5), std::length_error);
  auto bowl = [](const FeatureSet& S) { return S == FeatureSet{1, 3} ? -5.0 : 0.0; };
  CHECK(brute_force_opt(bowl, 4, 3).set == FeatureSet{1, 3});
}

TEST_CASE("greedy bound check") {
  SUBCASE("gamma equal to q collapses the bound") {
    Theorem4Verdict v = check_theorem4(3.0, 2.0, 9.0, 1.0, 1.0, 0.0, 2.0, 2);
    CHECK(v.m_F == 2.0);
    CHECK(v.gamma_F == 2.0);
    CHECK(v.bound == doctest::Approx(4.0));
    CHECK(v.pass);
    CHECK_FALSE(check_theorem4(4.5, 2.0, 9.0, 1.0, 1.0, 0.0, 2.0, 2).pass);
  }
  SUBCASE("general form") {
    const double bound = theorem4_bound(2.0, 1.0, -4.0, 1.0, 2);
    CHECK(bound == doctest::Approx(-8.0 - 0.25 * (-8.0 - 1.0)));
    Theorem4Verdict v = check_theorem4(-5.0, -4.0, 1.0, 0.8, 1.0, -1.0, 0.5, 2);
    CHECK(v.m_F == doctest::Approx(2.5));
    CHECK(v.gamma_F == 1.0);
    CHECK(v.slack == doctest::Approx(v.bound + 5.0));
  }
  SUBCASE("degenerate inputs") {
    CHECK(check_theorem4(-1.0, -1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 2).degenerate);
    CHECK(check_theorem4(-1.0, -1.0, 0.0, 1.2, 1.0, 0.0, 1.0, 2).degenerate);
    CHECK(check_theorem4(-1.0, -1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 2).degenerate);
    CHECK_THROWS_AS(check_theorem4(-1.0, -1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0), std::invalid_argument);
  }
}

TEST_CASE("bucket loss comparison") {
  Dataset d = testutil::sign_dataset(8, 5, 2, FeatureSet{}, 17);
  for (auto& inst : d.instances) inst.observed = FeatureSet{inst.id % 5};
  auto bucket = testutil::share(d);
  Rng init(3);
  ClassifierParams theta = ClassifierParams::init(5, 8, 2, init);
  GeneratorParams phi = GeneratorParams::init(5, 8, 2, 0.07, init);
  auto sampler = std::make_shared<VaeSampler>(phi);
  auto est = std::make_shared<UncertaintyEstimator>();
  est->classifier = theta;
  est->generator = sampler;
  est->K = 16;
  est->num_classes = 2;

  SUBCASE("zero budget gives equal sides") {
    Proposition1Verdict v = check_proposition1(bucket, theta, sampler, est, 0, 32, 5);
    // LHS may still generate features, so it can only be lower
    CHECK(v.lhs <= v.rhs + 1e-12);
    CHECK(v.rhs_argmin.empty());
    CHECK(v.pass);
  }
  SUBCASE("delta one") {
    auto one = std::make_shared<UncertaintyEstimator>(*est);
    one->mode = DeltaMode::constant;
    one->constant_value = 1.0;
    Proposition1Verdict v = check_proposition1(bucket, theta, sampler, one, 2, 32, 5);
    CHECK(v.standard_error == 0.0);
    CHECK(v.pass);
  }
  SUBCASE("random models") {
    Proposition1Verdict v = check_proposition1(bucket, theta, sampler, est, 2, 64, 5);
    CHECK(v.pass);
    CHECK(v.evaluations > 0);
    CHECK_THROWS_AS(check_proposition1(bucket, theta, sampler, est, 2, 64, 5, 100), std::length_error);
  }
}

TEST_CASE("zero budget without generation gives exactly equal sides") {
  Dataset d = testutil::sign_dataset(6, 3, 1, FeatureSet{0, 1, 2}, 4);
  auto bucket = testutil::share(d);
  Rng init(8);
  ClassifierParams theta = ClassifierParams::init(3, 4, 2, init);
  auto est = std::make_shared<UncertaintyEstimator>();
  est->classifier = theta;
  est->generator = CopySampler::perfect(3);
  est->num_classes = 2;
  Proposition1Verdict v = check_proposition1(bucket, theta, CopySampler::perfect(3), est, 0, 8, 1);
  CHECK(v.lhs == doctest::Approx(v.rhs));
  CHECK(v.slack == doctest::Approx(0.0));
  CHECK(v.pass);
}

TEST_CASE("assumption constants") {
  Dataset d = testutil::sign_dataset(12, 5, 2, FeatureSet{0}, 4);
  auto bucket = testutil::share(d);
  Rng init(5);
  ClassifierParams theta = ClassifierParams::init(5, 8, 2, init);
  auto est = std::make_shared<UncertaintyEstimator>();
  est->classifier = theta;
  est->generator = std::make_shared<VaeSampler>(GeneratorParams::init(5, 8, 2, 0.07, init));
  est->K = 8;
  est->num_classes = 2;
  AssumptionConstants a = measure_constants(bucket, theta, CopySampler::perfect(5), est, 50, 4, 9);
  CHECK(a.eps_x == 0.0);
  CHECK(a.delta_min >= 0.0);
  CHECK(a.delta_max <= 1.0);
  CHECK(a.loss_min <= a.loss_max);
  CHECK(a.lipschitz_x > 0.0);
  AssumptionConstants b = measure_constants(bucket, theta, CopySampler::perfect(5), est, 50, 4, 9);
  CHECK(a.eps_delta == b.eps_delta);
  CHECK(a.lipschitz_x == b.lipschitz_x);
  est->mode = DeltaMode::constant;
  CHECK(measure_constants(bucket, theta, CopySampler::perfect(5), est, 50, 4, 9).eps_delta == 0.0);
}

TEST_CASE("full-retrain G_F is order independent") {
  Dataset d = testutil::sign_dataset(16, 4, 1, FeatureSet{}, 3);
  for (auto& inst : d.instances) inst.observed = FeatureSet{inst.id % 4};
  auto bucket = testutil::share(d);
  FullRetrainOptions opts;
  opts.arch = {8, 2, -1};
  opts.pretrain_epochs = 5;
  opts.retrain_epochs = 5;
  opts.K = 4;
  opts.delta_K = 8;
  opts.train.batch_size = 0;
  opts.seed = 11;
  CHECK(FullRetrainGF::all_subsets(4, 2).size() == 11);
  FullRetrainGF a(bucket, opts), b(bucket, opts);
  const double a12 = a(FeatureSet{1, 2});
  const double a0 = a(FeatureSet{0});
  b.prefetch(FullRetrainGF::all_subsets(4, 4), 3);
  CHECK(b(FeatureSet{0}) == a0);
  CHECK(b(FeatureSet{1, 2}) == a12);
  CHECK(a0 >= 0.0);
}

TEST_CASE("memoized set function") {
  int calls = 0;
  MemoizedSetFunction memo([&](const FeatureSet& S) {
    ++calls;
    return size_of(S);
  });
  memo(FeatureSet{1});
  memo(FeatureSet{1});
  memo(FeatureSet{});
  CHECK(calls == 2);
  CHECK(memo.evaluations() == 2);
}

TEST_CASE("report files") {
  AnalysisReport r;
  r.n = 3;
  r.q_max = 1;
  r.opt.set = FeatureSet{2};
  r.opt.value = 0.1;
  r.notes.push_back("hello");
  const std::string txt = testutil::temp_path("analysis.txt");
  const std::string csv = testutil::temp_path("analysis.csv");
  r.write_text(txt);
  r.write_csv(csv);
  std::ifstream in(txt);
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str().find("hello") != std::string::npos);
  std::ifstream c(csv);
  std::string header;
  std::getline(c, header);
  CHECK(header == "section,key,value");
}
