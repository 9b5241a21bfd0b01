#include "genex/greedy.hpp"

#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace genex {
namespace {

struct Pick {
  int element = -1;
  double marginal = std::numeric_limits<double>::infinity();
};

Pick argmin(const std::vector<int>& candidates, const std::vector<double>& marginals) {
  Pick best;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    if (marginals[c] < best.marginal) {
      best.marginal = marginals[c];
      best.element = candidates[c];
    }
  }
  return best;
}

}  // namespace

GreedyResult greedy_minimize(const SetFunction& G, const FeatureSet& pool, int budget) {
  GreedyResult r;
  double current = G(r.selected);
  for (int step = 0; step < budget; ++step) {
    std::vector<int> candidates = pool.minus(r.selected).indices();
    if (candidates.empty()) break;
    std::vector<double> values(candidates.size());
    std::vector<double> marginals(candidates.size());
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      values[c] = G(r.selected.with(candidates[c]));
      marginals[c] = values[c] - current;
    }
    Pick best = argmin(candidates, marginals);
    if (!(best.marginal < 0.0)) break;
    r.selected.insert(best.element);
    r.accepted_marginals.push_back(best.marginal);
    r.order.push_back(best.element);
    current = G(r.selected);
  }
  return r;
}

FeatureSet candidate_pool_for_u(const Dataset& bucket) {
  FeatureSet always = bucket.empty() ? FeatureSet{} : bucket[0].observed;
  for (const auto& inst : bucket.instances) always = always.intersect(inst.observed);
  return FeatureSet::range(bucket.n).minus(always);
}

GreedyResult greedy_for_u(GFContext& ctx, int q_max, const FeatureSet& pool, SweepMode mode) {
  if (q_max < 0) throw std::invalid_argument("greedy_for_u: q_max must be >= 0");
  GreedyResult r;
  for (int step = 0; step < q_max; ++step) {
    const FeatureSet& U = ctx.selected();
    std::vector<int> candidates = pool.minus(U).indices();
    if (candidates.empty()) break;
    std::vector<double> marginals;
    if (mode == SweepMode::batched) {
      marginals = ctx.sweep(U, candidates);
    } else {
      marginals.reserve(candidates.size());
      for (int e : candidates) marginals.push_back(ctx.marginal(e, U));
    }
    Pick best = argmin(candidates, marginals);
    if (!(best.marginal < 0.0)) break;
    r.accepted_marginals.push_back(best.marginal);
    r.order.push_back(best.element);
    ctx.commit(best.element);
  }
  r.selected = ctx.selected();
  return r;
}

GreedyResult greedy_for_v(const GLContext& ctx, int lambda, VLoop loop, SweepMode mode) {
  if (lambda < 0) throw std::invalid_argument("greedy_for_v: lambda must be >= 0");
  GreedyResult r;
  for (int step = 0; step < lambda; ++step) {
    std::vector<int> candidates = ctx.acquired().minus(r.selected).indices();
    if (candidates.empty()) break;
    std::vector<double> marginals;
    if (mode == SweepMode::batched) {
      marginals = ctx.sweep(r.selected, candidates);
    } else {
      for (int e : candidates) marginals.push_back(ctx.marginal(e, r.selected));
    }
    Pick best = argmin(candidates, marginals);
    if (!(best.marginal < 0.0)) break;
    r.selected.insert(best.element);
    r.accepted_marginals.push_back(best.marginal);
    r.order.push_back(best.element);
    if (loop == VLoop::single_accept) break;
  }
  return r;
}

void AcquisitionPlan::validate() const {
  for (const auto& [code, e] : buckets) {
    if (e.acquire.size() > q_max) throw std::logic_error("plan: |U_b| exceeds q_max in bucket " + std::to_string(code));
    if (!e.generate.is_subset_of(e.acquire)) throw std::logic_error("plan: V_b not within U_b");
    if (e.generate.size() > lambda) throw std::logic_error("plan: |V_b| exceeds lambda");
  }
}

void save_plan(const AcquisitionPlan& plan, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "genex-plan 1\n";
  out << "q_max " << plan.q_max << "\nlambda " << plan.lambda << '\n';
  for (const auto& [code, e] : plan.buckets) {
    out << "bucket " << code << " U: " << e.acquire.to_list() << " V: " << e.generate.to_list() << '\n';
  }
}

AcquisitionPlan load_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != "genex-plan 1") throw std::runtime_error(path + ": not a plan file");
  AcquisitionPlan plan;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string key;
    row >> key;
    if (key == "q_max") {
      row >> plan.q_max;
    } else if (key == "lambda") {
      row >> plan.lambda;
    } else if (key == "bucket") {
      std::uint32_t code = 0;
      row >> code;
      const auto u = line.find(" U:");
      const auto v = line.find(" V:");
      if (u == std::string::npos || v == std::string::npos || v < u) throw std::runtime_error(path + ": bad bucket row");
      AcquisitionPlan::Entry e;
      e.acquire = FeatureSet::parse_list(line.substr(u + 3, v - u - 3));
      e.generate = FeatureSet::parse_list(line.substr(v + 3));
      plan.buckets[code] = e;
    } else {
      throw std::runtime_error(path + ": unknown key '" + key + "'");
    }
  }
  plan.validate();
  return plan;
}

}  // namespace genex
