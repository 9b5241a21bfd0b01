#include "genex/synthetic.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "genex/rng.hpp"

namespace genex::synthetic {

InformativeData informative_classes(const InformativeSpec& spec) {
  if (spec.informative < 1 || spec.informative + spec.redundant > spec.n) {
    throw std::invalid_argument("informative_classes: too many planted features for n");
  }
  Rng rng(spec.seed);
  std::vector<int> cols(static_cast<std::size_t>(spec.n));
  std::iota(cols.begin(), cols.end(), 0);
  std::shuffle(cols.begin(), cols.end(), rng.engine());

  InformativeData out;
  std::vector<int> inf(cols.begin(), cols.begin() + spec.informative);
  out.informative = FeatureSet(inf);
  for (int r = 0; r < spec.redundant; ++r) {
    int copy = cols[static_cast<std::size_t>(spec.informative + r)];
    int source = inf[static_cast<std::size_t>(r % spec.informative)];
    out.redundant.emplace_back(copy, source);
  }

  Eigen::MatrixXd A(spec.num_classes, spec.informative);
  for (int c = 0; c < spec.num_classes; ++c)
    for (int k = 0; k < spec.informative; ++k) A(c, k) = rng.normal();

  Dataset& d = out.data;
  d.n = spec.n;
  d.num_classes = spec.num_classes;
  d.instances.resize(static_cast<std::size_t>(spec.size));
  Eigen::VectorXd z(spec.informative);
  for (int i = 0; i < spec.size; ++i) {
    Instance& inst = d.instances[static_cast<std::size_t>(i)];
    inst.id = i;
    inst.features.resize(spec.n);
    for (int j = 0; j < spec.n; ++j) inst.features[j] = rng.normal();
    for (auto [copy, source] : out.redundant) {
      inst.features[copy] = inst.features[source] + spec.redundant_noise * rng.normal();
    }
    for (int k = 0; k < spec.informative; ++k) z[k] = inst.features[inf[static_cast<std::size_t>(k)]];
    Eigen::VectorXd scores = A * z;
    Eigen::Index best = 0;
    scores.maxCoeff(&best);
    inst.label = static_cast<int>(best);
  }
  return out;
}

Dataset isotropic(int size, int n, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  d.n = n;
  d.num_classes = 1;
  FeatureSet all = FeatureSet::range(n);
  for (int i = 0; i < size; ++i) {
    Instance inst;
    inst.id = i;
    inst.features.resize(n);
    for (int j = 0; j < n; ++j) inst.features[j] = rng.normal();
    inst.observed = all;
    d.instances.push_back(std::move(inst));
  }
  return d;
}

Dataset two_blobs(int per_blob, int n, double separation, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  d.n = n;
  d.num_classes = 2;
  FeatureSet all = FeatureSet::range(n);
  for (int i = 0; i < 2 * per_blob; ++i) {
    Instance inst;
    inst.id = i;
    inst.label = i < per_blob ? 0 : 1;
    inst.features.resize(n);
    for (int j = 0; j < n; ++j) inst.features[j] = rng.normal();
    inst.features[0] += inst.label == 0 ? -separation : separation;
    inst.observed = all;
    d.instances.push_back(std::move(inst));
  }
  return d;
}

Dataset elongated_clusters(int size, int n, double stretch, double offset, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("elongated_clusters: n must be >= 2");
  Rng rng(seed);
  Eigen::VectorXd axis(n), shift(n);
  for (int j = 0; j < n; ++j) axis[j] = rng.normal();
  axis.normalize();
  for (int j = 0; j < n; ++j) shift[j] = rng.normal();
  shift -= shift.dot(axis) * axis;
  shift.normalize();

  Dataset d;
  d.n = n;
  d.num_classes = 2;
  FeatureSet all = FeatureSet::range(n);
  for (int i = 0; i < size; ++i) {
    Instance inst;
    inst.id = i;
    inst.label = i % 2;
    Eigen::VectorXd x(n);
    for (int j = 0; j < n; ++j) x[j] = rng.normal();
    x += (stretch - 1.0) * x.dot(axis) * axis;
    x += (inst.label == 0 ? -offset : offset) * shift;
    inst.features = x;
    inst.observed = all;
    d.instances.push_back(std::move(inst));
  }
  return d;
}

}  // namespace genex::synthetic
