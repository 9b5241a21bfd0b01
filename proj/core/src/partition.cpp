#include "genex/partition.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "genex/rng.hpp"

namespace genex {

HyperplaneBank make_bank(int n, int M, std::uint64_t seed) {
  if (n < 1 || M < 1) throw std::invalid_argument("make_bank: n and M must be >= 1");
  HyperplaneBank bank{n, M, seed, Eigen::MatrixXd(n, M)};
  Rng rng(seed);
  for (int m = 0; m < M; ++m)
    for (int j = 0; j < n; ++j) bank.W(j, m) = rng.normal();
  return bank;
}

void save_bank(const HyperplaneBank& bank, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "genex-hyperplanes 1\n" << bank.n << ' ' << bank.M << ' ' << bank.seed << '\n';
  char buf[40];
  for (int j = 0; j < bank.n; ++j) {
    for (int m = 0; m < bank.M; ++m) {
      std::snprintf(buf, sizeof buf, "%.17g", bank.W(j, m));
      out << buf << (m + 1 < bank.M ? ' ' : '\n');
    }
  }
}

HyperplaneBank load_bank(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "genex-hyperplanes" || version != 1) throw std::runtime_error(path + ": not a hyperplane file");
  int n = 0, M = 0;
  std::uint64_t seed = 0;
  in >> n >> M >> seed;
  if (!in) throw std::runtime_error(path + ": truncated header");
  HyperplaneBank bank = make_bank(n, M, seed);
  for (int j = 0; j < n; ++j) {
    for (int m = 0; m < M; ++m) {
      double v = 0;
      if (!(in >> v)) throw std::runtime_error(path + ": truncated matrix");
      if (v != bank.W(j, m)) throw std::runtime_error(path + ": stored matrix does not match seed");
    }
  }
  return bank;
}

std::vector<int> BucketId::signs() const {
  std::vector<int> s(static_cast<std::size_t>(M));
  for (int m = 0; m < M; ++m) s[static_cast<std::size_t>(m)] = (code >> (M - 1 - m) & 1u) ? 1 : -1;
  return s;
}

BucketId BucketId::from_signs(const std::vector<int>& signs) {
  if (signs.size() > 31) throw std::invalid_argument("BucketId: at most 31 hyperplanes");
  BucketId b{0, static_cast<int>(signs.size())};
  for (int s : signs) b.code = (b.code << 1) | (s > 0 ? 1u : 0u);
  return b;
}

int hamming_distance(const BucketId& a, const BucketId& b) {
  return __builtin_popcount(a.code ^ b.code);
}

BucketId hash_observed(const HyperplaneBank& bank, const Eigen::VectorXd& x, const FeatureSet& observed) {
  if (bank.M > 31) throw std::invalid_argument("hash_observed: at most 31 hyperplanes");
  BucketId b{0, bank.M};
  for (int m = 0; m < bank.M; ++m) {
    double dot = 0.0;
    for (int j : observed) {
      if (j >= bank.n || j >= x.size()) throw std::out_of_range("hash_observed: feature index out of range");
      dot += bank.W(j, m) * x[j];
    }
    b.code = (b.code << 1) | (dot >= 0.0 ? 1u : 0u);
  }
  return b;
}

Partitioning partition(const HyperplaneBank& bank, const Dataset& d) {
  if (d.n != bank.n) throw std::invalid_argument("partition: dataset n does not match bank");
  Partitioning parts;
  for (int i = 0; i < d.size(); ++i) {
    parts[hash_observed(bank, d[i].features, d[i].observed).code].push_back(i);
  }
  return parts;
}

BucketId find_bucket(const HyperplaneBank& bank, const Eigen::VectorXd& x, const FeatureSet& observed,
                     const std::set<std::uint32_t>& trained) {
  if (trained.empty()) throw std::invalid_argument("find_bucket: no trained buckets");
  BucketId hit = hash_observed(bank, x, observed);
  if (trained.count(hit.code)) return hit;
  BucketId best{*trained.begin(), bank.M};
  int best_dist = std::numeric_limits<int>::max();
  for (auto code : trained) {
    BucketId cand{code, bank.M};
    int dist = hamming_distance(hit, cand);
    if (dist < best_dist) {
      best_dist = dist;
      best = cand;
    }
  }
  return best;
}

Eigen::VectorXd padded_observed(const Instance& inst) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(inst.features.size());
  for (int j : inst.observed) v[j] = inst.features[j];
  return v;
}

Partitioning kmeans_partition(const Dataset& d, int B, std::uint64_t seed, int iters) {
  const int N = d.size();
  if (B < 1 || B > N) throw std::invalid_argument("kmeans_partition: need 1 <= B <= |d|");
  Eigen::MatrixXd X(d.n, N);
  for (int i = 0; i < N; ++i) X.col(i) = padded_observed(d[i]);

  Rng rng(seed);
  Eigen::MatrixXd C(d.n, B);
  std::vector<char> chosen(static_cast<std::size_t>(N), 0);
  int first = static_cast<int>(rng.below(static_cast<std::uint64_t>(N)));
  C.col(0) = X.col(first);
  chosen[static_cast<std::size_t>(first)] = 1;
  Eigen::VectorXd d2 = (X.colwise() - C.col(0)).colwise().squaredNorm().transpose();
  for (int c = 1; c < B; ++c) {
    double total = 0.0;
    for (int i = 0; i < N; ++i) total += chosen[static_cast<std::size_t>(i)] ? 0.0 : d2[i];
    int pick = -1;
    if (total > 0.0) {
      double r = rng.uniform() * total;
      for (int i = 0; i < N; ++i) {
        if (chosen[static_cast<std::size_t>(i)]) continue;
        r -= d2[i];
        pick = i;
        if (r < 0.0) break;
      }
    }
    if (pick < 0 || chosen[static_cast<std::size_t>(pick)]) {
      // duplicates only: fall back to the first unchosen point
      for (int i = 0; i < N && (pick < 0 || chosen[static_cast<std::size_t>(pick)]); ++i) pick = i;
    }
    chosen[static_cast<std::size_t>(pick)] = 1;
    C.col(c) = X.col(pick);
    d2 = d2.cwiseMin((X.colwise() - C.col(c)).colwise().squaredNorm().transpose());
  }

  std::vector<int> assign(static_cast<std::size_t>(N), -1);
  auto assign_all = [&] {
    bool changed = false;
    for (int i = 0; i < N; ++i) {
      Eigen::Index best = 0;
      (C.colwise() - X.col(i)).colwise().squaredNorm().minCoeff(&best);
      if (assign[static_cast<std::size_t>(i)] != static_cast<int>(best)) {
        assign[static_cast<std::size_t>(i)] = static_cast<int>(best);
        changed = true;
      }
    }
    return changed;
  };
  assign_all();
  for (int it = 0; it < iters; ++it) {
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(d.n, B);
    std::vector<int> counts(static_cast<std::size_t>(B), 0);
    for (int i = 0; i < N; ++i) {
      sums.col(assign[static_cast<std::size_t>(i)]) += X.col(i);
      ++counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < B; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) C.col(c) = sums.col(c) / counts[static_cast<std::size_t>(c)];
    }
    if (!assign_all()) break;
  }

  Partitioning parts;
  for (int i = 0; i < N; ++i) parts[static_cast<std::uint32_t>(assign[static_cast<std::size_t>(i)])].push_back(i);
  return parts;
}

double bucket_skew(const Partitioning& parts) {
  std::size_t lo = std::numeric_limits<std::size_t>::max(), hi = 0;
  for (const auto& [code, members] : parts) {
    if (members.empty()) continue;
    lo = std::min(lo, members.size());
    hi = std::max(hi, members.size());
  }
  if (hi == 0) throw std::invalid_argument("bucket_skew: no non-empty bucket");
  return static_cast<double>(lo) / static_cast<double>(hi);
}

double conicity(const std::vector<Eigen::VectorXd>& vectors) {
  if (vectors.empty()) throw std::invalid_argument("conicity: no vectors");
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(vectors.front().size());
  for (const auto& v : vectors) mean += v;
  mean /= static_cast<double>(vectors.size());
  const double mean_norm = mean.norm();
  if (mean_norm < 1e-12) return 0.0;
  double total = 0.0;
  for (const auto& v : vectors) {
    const double norm = v.norm();
    if (norm < 1e-12) continue;
    total += v.dot(mean) / (norm * mean_norm);
  }
  return total / static_cast<double>(vectors.size());
}

}  // namespace genex
