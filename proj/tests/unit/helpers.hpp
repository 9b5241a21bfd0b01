#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <string>

#include "genex/dataset.hpp"
#include "genex/models.hpp"
#include "genex/rng.hpp"

namespace testutil {

inline std::string temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "genex_unit";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream(path) << text;
}

/// N instances, n features ~ N(0,1), label = (x[label_feature] > 0), each
/// instance observing `observed`.
inline genex::Dataset sign_dataset(int N, int n, int label_feature, const genex::FeatureSet& observed,
                                   std::uint64_t seed) {
  genex::Dataset d;
  d.n = n;
  d.num_classes = 2;
  genex::Rng rng(seed);
  for (int i = 0; i < N; ++i) {
    genex::Instance inst;
    inst.id = i;
    inst.features = Eigen::VectorXd(n);
    for (int j = 0; j < n; ++j) inst.features[j] = rng.normal();
    inst.label = inst.features[label_feature] > 0 ? 1 : 0;
    inst.observed = observed;
    d.instances.push_back(inst);
  }
  return d;
}

inline std::shared_ptr<const genex::Dataset> share(genex::Dataset d) {
  return std::make_shared<const genex::Dataset>(std::move(d));
}

}  // namespace testutil
