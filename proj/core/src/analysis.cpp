#include "genex/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "genex/parallel.hpp"

namespace genex {
namespace {

constexpr std::uint64_t kRetrainSalt = 0x7265747261696eULL;
constexpr std::uint64_t kPretrainSalt = 0x707265ULL;
constexpr std::uint64_t kPropSalt = 0x70726f70ULL;
constexpr std::uint64_t kConstSalt = 0x636f6e7374ULL;

/// G over every subset of [n] indexed by bit mask.
std::vector<double> tabulate(const SetFunction& G, int n) {
  const std::uint64_t count = std::uint64_t{1} << n;
  std::vector<double> v(count);
  for (std::uint64_t mask = 0; mask < count; ++mask) v[mask] = G(FeatureSet::from_bits(mask));
  return v;
}

FeatureSet random_subset(const FeatureSet& ground, Rng& rng) {
  FeatureSet out;
  for (int e : ground)
    if (rng.uniform() < 0.5) out.insert(e);
  return out;
}

double ratio(double top, double bottom) { return bottom == 0.0 ? 1.0 : top / bottom; }

struct Extremes {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double x) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
};

Eigen::VectorXd ce_columns(const ClassifierParams& theta, const Eigen::MatrixXd& inputs, int label) {
  Eigen::MatrixXd z = logits(theta, inputs);
  Eigen::VectorXd out(z.cols());
  for (Eigen::Index c = 0; c < z.cols(); ++c) out[c] = cross_entropy_from_logits(z.col(c), label);
  return out;
}

long long binomial(int n, int k) {
  long long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

double MemoizedSetFunction::operator()(const FeatureSet& S) {
  auto it = cache_.find(S);
  if (it != cache_.end()) return it->second;
  const double v = fn_(S);
  cache_.emplace(S, v);
  return v;
}

SetFunction MemoizedSetFunction::as_function() {
  return [this](const FeatureSet& S) { return (*this)(S); };
}

MonotonicityEstimate estimate_partial_monotonicity(const SetFunction& G, int n, long long sample_budget,
                                                   std::uint64_t seed) {
  if (n < 0) throw std::invalid_argument("estimate_partial_monotonicity: negative n");
  MonotonicityEstimate out;
  Extremes ext;
  if (n <= kExhaustiveLimit) {
    const std::vector<double> v = tabulate(G, n);
    const std::uint64_t full = (std::uint64_t{1} << n) - 1;
    for (std::uint64_t T = 0; T <= full; ++T) {
      for (std::uint64_t S = T;; S = (S - 1) & T) {
        ext.add(ratio(v[T], v[S]));
        ++out.pairs_evaluated;
        if (S == 0) break;
      }
    }
  } else {
    out.exhaustive = false;
    MemoizedSetFunction memo(G);
    Rng rng(seed);
    const FeatureSet ground = FeatureSet::range(n);
    for (long long p = 0; p < sample_budget; ++p) {
      FeatureSet T = random_subset(ground, rng);
      FeatureSet S = random_subset(T, rng);
      ext.add(ratio(memo(T), memo(S)));
      ++out.pairs_evaluated;
    }
  }
  if (out.pairs_evaluated > 0) {
    out.m_min = ext.lo;
    out.m_max = ext.hi;
  }
  return out;
}

SubmodularityEstimate estimate_weak_submodularity(const SetFunction& G, int n, long long sample_budget,
                                                  double zero_tol, std::uint64_t seed) {
  if (n < 0) throw std::invalid_argument("estimate_weak_submodularity: negative n");
  SubmodularityEstimate out;
  Extremes ext;
  auto consider = [&](double singles, double joint) {
    if (std::abs(joint) <= zero_tol) {
      ++out.pairs_skipped_zero_denominator;
      return;
    }
    ext.add(singles / std::abs(joint));
    ++out.pairs_evaluated;
  };
  if (n <= kExhaustiveLimit) {
    const std::vector<double> v = tabulate(G, n);
    const std::uint64_t full = (std::uint64_t{1} << n) - 1;
    for (std::uint64_t T = 0; T <= full; ++T) {
      const std::uint64_t rest = full & ~T;
      for (std::uint64_t S = rest; S != 0; S = (S - 1) & rest) {
        double singles = 0.0;
        for (int u = 0; u < n; ++u)
          if (S >> u & 1U) singles += v[T | (std::uint64_t{1} << u)] - v[T];
        consider(singles, v[S | T] - v[T]);
      }
    }
  } else {
    out.exhaustive = false;
    MemoizedSetFunction memo(G);
    Rng rng(seed);
    const FeatureSet ground = FeatureSet::range(n);
    for (long long p = 0; p < sample_budget; ++p) {
      FeatureSet T = random_subset(ground, rng);
      FeatureSet S = random_subset(ground.minus(T), rng);
      if (S.empty()) continue;
      const double gT = memo(T);
      double singles = 0.0;
      for (int u : S) singles += memo(T.with(u)) - gT;
      consider(singles, memo(S.union_with(T)) - gT);
    }
  }
  out.defined = out.pairs_evaluated > 0;
  if (out.defined) {
    out.gamma_min = ext.lo;
    out.gamma_max = ext.hi;
  }
  return out;
}

OptResult brute_force_opt(const SetFunction& G, int n, int q_max) {
  if (n < 0 || q_max < 0) throw std::invalid_argument("brute_force_opt: negative size");
  const int top = std::min(q_max, n);
  long long total = 0;
  for (int k = 0; k <= top; ++k) total += binomial(n, k);
  if (total > 100000)
    throw std::length_error("brute_force_opt: " + std::to_string(total) + " subsets exceed the limit of 100000");

  OptResult best;
  bool have = false;
  std::vector<int> idx;
  for (int k = 0; k <= top; ++k) {
    idx.resize(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) idx[static_cast<std::size_t>(j)] = j;
    while (true) {
      FeatureSet S(idx);
      const double v = G(S);
      ++best.subsets_evaluated;
      if (!have || v < best.value || (v == best.value && S < best.set)) {
        best.set = S;
        best.value = v;
        have = true;
      }
      int j = k - 1;
      while (j >= 0 && idx[static_cast<std::size_t>(j)] == n - k + j) --j;
      if (j < 0) break;
      ++idx[static_cast<std::size_t>(j)];
      for (int t = j + 1; t < k; ++t) idx[static_cast<std::size_t>(t)] = idx[static_cast<std::size_t>(t - 1)] + 1;
    }
  }
  return best;
}

double theorem4_bound(double m_F, double gamma_F, double opt_value, double empty_value, int q_max) {
  if (q_max <= 0) throw std::invalid_argument("theorem4_bound: q_max must be positive");
  const double decay = std::pow(1.0 - gamma_F / q_max, q_max);
  return m_F * opt_value - decay * (m_F * opt_value - empty_value);
}

Theorem4Verdict check_theorem4(double greedy_value, double opt_value, double empty_value, double m_min, double m_max,
                               double gamma_min, double gamma_max, int q_max) {
  if (q_max <= 0) throw std::invalid_argument("check_theorem4: q_max must be positive");
  Theorem4Verdict v;
  v.m_F = m_min > 0.0 ? std::max(m_max, 2.0 * m_max / m_min) : std::numeric_limits<double>::infinity();
  v.gamma_F = std::max(gamma_max, -gamma_min);
  const bool finite_inputs = std::isfinite(greedy_value) && std::isfinite(opt_value) && std::isfinite(empty_value) &&
                             std::isfinite(m_min) && std::isfinite(m_max) && std::isfinite(gamma_min) &&
                             std::isfinite(gamma_max);
  v.degenerate = !finite_inputs || m_min <= 0.0 || m_min > m_max || v.gamma_F == 0.0;
  v.bound = theorem4_bound(v.m_F, v.gamma_F, opt_value, empty_value, q_max);
  v.slack = v.bound - greedy_value;
  v.pass = std::isfinite(v.slack) && v.slack >= 0.0;
  return v;
}

// --- split-query check -------------------------------------------------------

Proposition1Verdict check_proposition1(std::shared_ptr<const Dataset> bucket, const ClassifierParams& classifier,
                                       std::shared_ptr<const FeatureSampler> generator,
                                       std::shared_ptr<const UncertaintyEstimator> est, int q_max, int K,
                                       std::uint64_t seed, long long budget) {
  if (!bucket || bucket->empty()) throw std::invalid_argument("check_proposition1: empty bucket");
  if (q_max < 0 || K < 1) throw std::invalid_argument("check_proposition1: bad q_max or K");
  const int n = bucket->n;
  if (n > 20) throw std::length_error("check_proposition1: n = " + std::to_string(n) + " exceeds 20");

  long long planned = 0;
  for (const auto& inst : bucket->instances) {
    const int free = n - inst.observed.size();
    planned += static_cast<long long>(std::pow(3.0, free));
  }
  long long rhs_sets = 0;
  for (int k = 0; k <= std::min(q_max, n); ++k) rhs_sets += binomial(n, k);
  planned += rhs_sets * bucket->size();
  if (planned > budget)
    throw std::length_error("check_proposition1: " + std::to_string(planned) + " evaluations exceed the budget of " +
                            std::to_string(budget));

  Proposition1Verdict out;
  DeltaTable deltas(est, bucket, derive_seed(seed, kPropSalt, 1));
  std::vector<Eigen::MatrixXd> draws;
  draws.reserve(static_cast<std::size_t>(bucket->size()));
  for (const auto& inst : bucket->instances) {
    Rng rng(derive_seed(seed, kPropSalt, static_cast<std::uint64_t>(inst.id)));
    draws.push_back(generator->draw(inst.features, inst.observed, K, rng));
  }

  // Left side: each instance picks its own (U_i, V_i). Members of O_i change
  // nothing, so only the unobserved features are assigned: 0 = skip,
  // 1 = query (U \ V), 2 = generate (V).
  for (int i = 0; i < bucket->size(); ++i) {
    const Instance& inst = (*bucket)[i];
    const std::vector<int> free = FeatureSet::range(n).minus(inst.observed).indices();
    const int f = static_cast<int>(free.size());
    std::vector<int> digit(static_cast<std::size_t>(f), 0);
    double best = std::numeric_limits<double>::infinity();
    const Eigen::MatrixXd& d = draws[static_cast<std::size_t>(i)];
    while (true) {
      FeatureSet queried = inst.observed;
      FeatureSet generated;
      int n_queried = 0;
      for (int j = 0; j < f; ++j) {
        if (digit[static_cast<std::size_t>(j)] == 1) {
          queried.insert(free[static_cast<std::size_t>(j)]);
          ++n_queried;
        } else if (digit[static_cast<std::size_t>(j)] == 2) {
          generated.insert(free[static_cast<std::size_t>(j)]);
        }
      }
      if (n_queried <= q_max) {
        const int cols = generated.empty() ? 1 : K;
        Eigen::MatrixXd inputs(2 * n, cols);
        for (int k = 0; k < cols; ++k) {
          Eigen::VectorXd g = d.col(k);
          encode_into(inputs.col(k), inst.features, queried, &g, &generated);
        }
        best = std::min(best, ce_columns(classifier, inputs, inst.label).mean());
        ++out.evaluations;
      }
      int j = 0;
      while (j < f && digit[static_cast<std::size_t>(j)] == 2) digit[static_cast<std::size_t>(j++)] = 0;
      if (j == f) break;
      ++digit[static_cast<std::size_t>(j)];
    }
    out.lhs += best;
  }

  // Right side: one shared U for the whole bucket.
  std::vector<FeatureSet> candidates;
  for (int k = 0; k <= std::min(q_max, n); ++k) {
    std::vector<int> idx(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) idx[static_cast<std::size_t>(j)] = j;
    while (true) {
      candidates.emplace_back(idx);
      int j = k - 1;
      while (j >= 0 && idx[static_cast<std::size_t>(j)] == n - k + j) --j;
      if (j < 0) break;
      ++idx[static_cast<std::size_t>(j)];
      for (int t = j + 1; t < k; ++t) idx[static_cast<std::size_t>(t)] = idx[static_cast<std::size_t>(t - 1)] + 1;
    }
  }
  out.rhs = std::numeric_limits<double>::infinity();
  for (const FeatureSet& U : candidates) {
    double total = 0.0;
    double var = 0.0;
    for (int i = 0; i < bucket->size(); ++i) {
      const Instance& inst = (*bucket)[i];
      const double delta_i = deltas.at(i, U);
      Eigen::MatrixXd inputs(2 * n, 1 + K);
      encode_into(inputs.col(0), inst.features, inst.observed.union_with(U));
      const FeatureSet gen = U.minus(inst.observed);
      const Eigen::MatrixXd& d = draws[static_cast<std::size_t>(i)];
      for (int k = 0; k < K; ++k) {
        Eigen::VectorXd g = d.col(k);
        encode_into(inputs.col(1 + k), inst.features, inst.observed, &g, &gen);
      }
      const Eigen::VectorXd l = ce_columns(classifier, inputs, inst.label);
      const Eigen::VectorXd lg = l.tail(K);
      const double mean = lg.mean();
      total += delta_i * l[0] + (1.0 - delta_i) * mean;
      if (K > 1) {
        const double s2 = (lg.array() - mean).square().sum() / (K - 1);
        var += (1.0 - delta_i) * (1.0 - delta_i) * s2 / K;
      }
      ++out.evaluations;
    }
    if (total < out.rhs) {
      out.rhs = total;
      out.rhs_argmin = U;
      out.standard_error = std::sqrt(var);
    }
  }
  out.slack = out.rhs + 3.0 * out.standard_error - out.lhs;
  out.pass = out.slack >= 0.0;
  return out;
}

// --- assumption constants --------------------------------------------------

AssumptionConstants measure_constants(std::shared_ptr<const Dataset> bucket, const ClassifierParams& classifier,
                                      std::shared_ptr<const FeatureSampler> generator,
                                      std::shared_ptr<const UncertaintyEstimator> est, int samples, int K,
                                      std::uint64_t seed) {
  if (!bucket || bucket->empty()) throw std::invalid_argument("measure_constants: empty bucket");
  const int n = bucket->n;
  DeltaTable deltas(est, bucket, derive_seed(seed, kConstSalt, 1));
  Extremes delta_range, loss_range;
  AssumptionConstants c;
  for (int s = 0; s < samples; ++s) {
    const int i = s % bucket->size();
    const Instance& inst = (*bucket)[i];
    Rng rng(derive_seed(seed, kConstSalt, static_cast<std::uint64_t>(s) + 2));
    const FeatureSet free = FeatureSet::range(n).minus(inst.observed);
    const FeatureSet S = random_subset(free, rng);
    const FeatureSet T = random_subset(free, rng);

    const double dS = deltas.at(i, S);
    const double dT = deltas.at(i, T);
    c.eps_delta = std::max(c.eps_delta, std::abs(dS - dT));
    delta_range.add(dS);
    delta_range.add(dT);

    const Eigen::MatrixXd x_gen = generator->draw(inst.features, inst.observed, K, rng);
    double gap = 0.0;
    for (int k = 0; k < K; ++k) {
      double sq = 0.0;
      for (int e : S) sq += (inst.features[e] - x_gen(e, k)) * (inst.features[e] - x_gen(e, k));
      gap += std::sqrt(sq);
    }
    if (K > 0) c.eps_x = std::max(c.eps_x, gap / K);

    // Oracle points x[O u S], x[O u T] and generated points x[O] u x~_k[S].
    Eigen::MatrixXd inputs(2 * n, 2 + K);
    encode_into(inputs.col(0), inst.features, inst.observed.union_with(S));
    encode_into(inputs.col(1), inst.features, inst.observed.union_with(T));
    for (int k = 0; k < K; ++k) {
      Eigen::VectorXd g = x_gen.col(k);
      encode_into(inputs.col(2 + k), inst.features, inst.observed, &g, &S);
    }
    std::vector<int> labels(static_cast<std::size_t>(inputs.cols()), inst.label);
    Eigen::MatrixXd input_grad;
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(inputs.cols());
    classifier_loss(classifier, inputs, labels, ones, nullptr, &input_grad);
    const Eigen::VectorXd l = ce_columns(classifier, inputs.leftCols(2), inst.label);
    loss_range.add(l[0]);
    loss_range.add(l[1]);
    for (Eigen::Index col = 0; col < inputs.cols(); ++col)
      c.lipschitz_x = std::max(c.lipschitz_x, input_grad.col(col).head(n).norm());
  }
  if (samples > 0) {
    c.delta_min = delta_range.lo;
    c.delta_max = delta_range.hi;
    c.loss_min = loss_range.lo;
    c.loss_max = loss_range.hi;
  }
  return c;
}

// --- full-retrain G_F ------------------------------------------------------------

FullRetrainGF::FullRetrainGF(std::shared_ptr<const Dataset> bucket, FullRetrainOptions options)
    : bucket_(std::move(bucket)), options_(options) {
  if (!bucket_ || bucket_->empty()) throw std::invalid_argument("FullRetrainGF: empty bucket");
  pretrained_ = pretrain(options_.arch, *bucket_, options_.pretrain_epochs, derive_seed(options_.seed, kPretrainSalt),
                         options_.train);
  est_ = std::make_shared<UncertaintyEstimator>(
      UncertaintyEstimator::from_pretrained(pretrained_, options_.delta_K, options_.delta_mode));
  deltas_ = std::make_unique<DeltaTable>(est_, bucket_, derive_seed(options_.seed, kRetrainSalt, 1));
}

ModelPair FullRetrainGF::trained(const FeatureSet& U) const {
  const Eigen::VectorXd d = deltas_->all(U);
  return train_f(pretrained_, *bucket_, U, d, options_.retrain_epochs, options_.K,
                 derive_seed(options_.seed, kRetrainSalt, U.digest()), options_.train);
}

double FullRetrainGF::evaluate(const FeatureSet& U) const {
  GFOptions gf;
  gf.K = options_.K;
  gf.commit_epochs = 0;
  gf.seed = derive_seed(options_.seed, kRetrainSalt, 2);
  gf.train = options_.train;
  GFContext ctx(bucket_, trained(U), est_, gf);
  return ctx.value(U);
}

double FullRetrainGF::operator()(const FeatureSet& U) {
  auto it = cache_.find(U);
  if (it != cache_.end()) return it->second;
  const double v = evaluate(U);
  cache_.emplace(U, v);
  return v;
}

SetFunction FullRetrainGF::as_function() {
  return [this](const FeatureSet& U) { return (*this)(U); };
}

void FullRetrainGF::prefetch(const std::vector<FeatureSet>& subsets, int jobs) {
  std::vector<FeatureSet> todo;
  for (const auto& U : subsets)
    if (!cache_.count(U)) todo.push_back(U);
  std::sort(todo.begin(), todo.end());
  todo.erase(std::unique(todo.begin(), todo.end()), todo.end());
  std::vector<double> values(todo.size());
  parallel_for(static_cast<int>(todo.size()), jobs,
               [&](int j) { values[static_cast<std::size_t>(j)] = evaluate(todo[static_cast<std::size_t>(j)]); });
  for (std::size_t j = 0; j < todo.size(); ++j) cache_.emplace(todo[j], values[j]);
}

std::vector<FeatureSet> FullRetrainGF::all_subsets(int n, int max_size) {
  if (n > 20) throw std::length_error("all_subsets: n too large");
  std::vector<FeatureSet> out;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    FeatureSet S = FeatureSet::from_bits(mask);
    if (S.size() <= max_size) out.push_back(std::move(S));
  }
  return out;
}

// --- report -------------------------------------------------------------------

namespace {

struct Row {
  std::string section, key;
  double value;
};

std::vector<Row> report_rows(const AnalysisReport& r) {
  std::vector<Row> rows = {
      {"instance", "n", static_cast<double>(r.n)},
      {"instance", "q_max", static_cast<double>(r.q_max)},
      {"monotonicity", "m_min", r.monotonicity.m_min},
      {"monotonicity", "m_max", r.monotonicity.m_max},
      {"monotonicity", "pairs_evaluated", static_cast<double>(r.monotonicity.pairs_evaluated)},
      {"monotonicity", "exhaustive", r.monotonicity.exhaustive ? 1.0 : 0.0},
      {"submodularity", "gamma_min", r.submodularity.gamma_min},
      {"submodularity", "gamma_max", r.submodularity.gamma_max},
      {"submodularity", "pairs_evaluated", static_cast<double>(r.submodularity.pairs_evaluated)},
      {"submodularity", "pairs_skipped_zero_denominator",
       static_cast<double>(r.submodularity.pairs_skipped_zero_denominator)},
      {"submodularity", "defined", r.submodularity.defined ? 1.0 : 0.0},
      {"submodularity", "exhaustive", r.submodularity.exhaustive ? 1.0 : 0.0},
      {"opt", "value", r.opt.value},
      {"opt", "size", static_cast<double>(r.opt.set.size())},
      {"greedy", "value", r.greedy_value},
      {"greedy", "size", static_cast<double>(r.greedy.selected.size())},
      {"greedy", "empty_value", r.empty_value},
      {"constants", "eps_delta", r.constants.eps_delta},
      {"constants", "eps_x", r.constants.eps_x},
      {"constants", "delta_min", r.constants.delta_min},
      {"constants", "delta_max", r.constants.delta_max},
      {"constants", "loss_min", r.constants.loss_min},
      {"constants", "loss_max", r.constants.loss_max},
      {"constants", "lipschitz_x", r.constants.lipschitz_x},
  };
  if (r.theorem4_checked) {
    rows.push_back({"theorem4", "m_F", r.theorem4.m_F});
    rows.push_back({"theorem4", "gamma_F", r.theorem4.gamma_F});
    rows.push_back({"theorem4", "bound", r.theorem4.bound});
    rows.push_back({"theorem4", "slack", r.theorem4.slack});
    rows.push_back({"theorem4", "pass", r.theorem4.pass ? 1.0 : 0.0});
    rows.push_back({"theorem4", "degenerate", r.theorem4.degenerate ? 1.0 : 0.0});
  }
  if (r.proposition1_checked) {
    rows.push_back({"proposition1", "lhs", r.proposition1.lhs});
    rows.push_back({"proposition1", "rhs", r.proposition1.rhs});
    rows.push_back({"proposition1", "standard_error", r.proposition1.standard_error});
    rows.push_back({"proposition1", "slack", r.proposition1.slack});
    rows.push_back({"proposition1", "pass", r.proposition1.pass ? 1.0 : 0.0});
  }
  return rows;
}

}  // namespace

void AnalysisReport::write_text(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  char buf[64];
  std::string section;
  for (const Row& row : report_rows(*this)) {
    if (row.section != section) {
      section = row.section;
      out << "[" << section << "]\n";
    }
    std::snprintf(buf, sizeof buf, "%.10g", row.value);
    out << "  " << row.key << " = " << buf << "\n";
  }
  out << "[sets]\n";
  out << "  opt = " << opt.set.to_string() << "\n";
  out << "  greedy = " << greedy.selected.to_string() << "\n";
  if (proposition1_checked) out << "  proposition1_argmin = " << proposition1.rhs_argmin.to_string() << "\n";
  if (!notes.empty()) {
    out << "[notes]\n";
    for (const auto& note : notes) out << "  " << note << "\n";
  }
}

void AnalysisReport::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "section,key,value\n";
  char buf[64];
  for (const Row& row : report_rows(*this)) {
    std::snprintf(buf, sizeof buf, "%.17g", row.value);
    out << row.section << "," << row.key << "," << buf << "\n";
  }
}

}  // namespace genex
