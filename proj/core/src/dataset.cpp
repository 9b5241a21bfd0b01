#include "genex/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "genex/rng.hpp"

namespace genex {
namespace {

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

Table read_csv(const std::string& path, bool header_optional) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  Table t;
  std::string line;
  bool first = true;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto cells = split_row(line);
    if (first) {
      first = false;
      bool numeric = true;
      double v = 0;
      for (const auto& c : cells) numeric = numeric && parse_double(c, v);
      if (!numeric || !header_optional) {
        t.header = std::move(cells);
        continue;
      }
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

double cell_value(const std::string& cell, const std::string& path, std::size_t row, std::size_t col) {
  double v = 0;
  if (!parse_double(cell, v)) {
    throw std::runtime_error(path + ": non-numeric cell '" + cell + "' at row " + std::to_string(row + 1) +
                             ", column " + std::to_string(col + 1));
  }
  return v;
}

int round_half_away(double x) { return static_cast<int>(std::lround(x)); }

}  // namespace

const char* to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::full: return "full";
    case SplitTag::train: return "train";
    case SplitTag::validation: return "validation";
    case SplitTag::test: return "test";
  }
  return "?";
}

void Dataset::validate() const {
  if (n < 1) throw std::invalid_argument("dataset: n must be >= 1");
  if (num_classes < 1) throw std::invalid_argument("dataset: num_classes must be >= 1");
  for (const auto& inst : instances) {
    if (inst.features.size() != n) throw std::invalid_argument("dataset: instance with wrong feature count");
    if (inst.label < 0 || inst.label >= num_classes) {
      throw std::invalid_argument("dataset: label " + std::to_string(inst.label) + " outside [0," +
                                  std::to_string(num_classes) + ")");
    }
    if (!inst.observed.empty() && (inst.observed.indices().back() >= n)) {
      throw std::invalid_argument("dataset: observed index out of range");
    }
  }
}

Dataset Dataset::subset(const std::vector<int>& positions) const {
  Dataset out;
  out.n = n;
  out.num_classes = num_classes;
  out.split = split;
  out.instances.reserve(positions.size());
  for (int p : positions) out.instances.push_back(instances.at(static_cast<std::size_t>(p)));
  return out;
}

Dataset load_dataset(const LoadOptions& options) {
  Table features = read_csv(options.features_path, false);
  if (features.header.empty()) throw std::runtime_error(options.features_path + ": missing header row");

  int label_col = -1;
  if (options.labels_path.empty()) {
    for (std::size_t c = 0; c < features.header.size(); ++c) {
      if (features.header[c] == options.label_column) label_col = static_cast<int>(c);
    }
    if (label_col < 0) {
      throw std::runtime_error(options.features_path + ": no label column '" + options.label_column + "'");
    }
  }
  std::vector<int> feature_cols;
  for (int c = 0; c < static_cast<int>(features.header.size()); ++c) {
    if (c != label_col) feature_cols.push_back(c);
  }

  Dataset d;
  d.n = static_cast<int>(feature_cols.size());
  if (d.n < 1) throw std::runtime_error(options.features_path + ": no feature columns");

  std::vector<int> labels;
  if (!options.labels_path.empty()) {
    Table lt = read_csv(options.labels_path, true);
    for (std::size_t r = 0; r < lt.rows.size(); ++r) {
      if (lt.rows[r].size() != 1) throw std::runtime_error(options.labels_path + ": expected one column");
      labels.push_back(static_cast<int>(cell_value(lt.rows[r][0], options.labels_path, r, 0)));
    }
    if (labels.size() != features.rows.size()) {
      throw std::runtime_error("label count " + std::to_string(labels.size()) + " != row count " +
                               std::to_string(features.rows.size()));
    }
  }

  for (std::size_t r = 0; r < features.rows.size(); ++r) {
    const auto& row = features.rows[r];
    if (row.size() != features.header.size()) {
      throw std::runtime_error(options.features_path + ": row " + std::to_string(r + 1) + " has " +
                               std::to_string(row.size()) + " cells, header has " +
                               std::to_string(features.header.size()));
    }
    Instance inst;
    inst.id = static_cast<int>(r);
    inst.features.resize(d.n);
    for (int j = 0; j < d.n; ++j) {
      auto c = static_cast<std::size_t>(feature_cols[static_cast<std::size_t>(j)]);
      inst.features[j] = cell_value(row[c], options.features_path, r, c);
    }
    if (label_col >= 0) {
      double v = cell_value(row[static_cast<std::size_t>(label_col)], options.features_path, r,
                            static_cast<std::size_t>(label_col));
      if (v != std::floor(v) || v < 0) throw std::runtime_error(options.features_path + ": bad label value");
      inst.label = static_cast<int>(v);
    } else {
      inst.label = labels[r];
    }
    d.instances.push_back(std::move(inst));
  }

  if (!options.mask_path.empty()) {
    Table mask = read_csv(options.mask_path, true);
    if (mask.rows.size() != d.instances.size()) {
      throw std::runtime_error("mask shape mismatch: " + std::to_string(mask.rows.size()) + " rows vs " +
                               std::to_string(d.instances.size()));
    }
    for (std::size_t r = 0; r < mask.rows.size(); ++r) {
      if (static_cast<int>(mask.rows[r].size()) != d.n) {
        throw std::runtime_error("mask shape mismatch at row " + std::to_string(r + 1) + ": " +
                                 std::to_string(mask.rows[r].size()) + " columns vs n=" + std::to_string(d.n));
      }
      std::vector<int> obs;
      for (int j = 0; j < d.n; ++j) {
        double v = cell_value(mask.rows[r][static_cast<std::size_t>(j)], options.mask_path, r,
                              static_cast<std::size_t>(j));
        if (v != 0.0 && v != 1.0) throw std::runtime_error(options.mask_path + ": mask cells must be 0 or 1");
        if (v == 1.0) obs.push_back(j);
      }
      d.instances[r].observed = FeatureSet(std::move(obs));
    }
  }

  int max_label = -1;
  for (const auto& inst : d.instances) max_label = std::max(max_label, inst.label);
  if (options.num_classes > 0) {
    if (max_label >= options.num_classes) {
      throw std::runtime_error("label " + std::to_string(max_label) + " >= declared num_classes " +
                               std::to_string(options.num_classes));
    }
    d.num_classes = options.num_classes;
  } else {
    d.num_classes = std::max(max_label + 1, 1);
  }
  d.validate();
  return d;
}

void save_dataset(const Dataset& d, const std::string& features_path, const std::string& mask_path) {
  std::ofstream f(features_path);
  std::ofstream m(mask_path);
  if (!f || !m) throw std::runtime_error("cannot write dataset files");
  for (int j = 0; j < d.n; ++j) {
    f << 'f' << j << ',';
    m << 'f' << j << (j + 1 < d.n ? "," : "\n");
  }
  f << "label\n";
  char buf[40];
  for (const auto& inst : d.instances) {
    for (int j = 0; j < d.n; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", inst.features[j]);
      f << buf << ',';
      m << (inst.observed.contains(j) ? '1' : '0') << (j + 1 < d.n ? "," : "\n");
    }
    f << inst.label << '\n';
  }
}

Dataset apply_observation_policy(const Dataset& d, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("observation fraction must lie in (0,1]");
  }
  const int k = round_half_away(fraction * d.n);
  if (k < 1) throw std::invalid_argument("observation fraction * n must be >= 1");
  Dataset out = d;
  std::vector<int> order(static_cast<std::size_t>(d.n));
  for (auto& inst : out.instances) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(inst.id)));
    std::iota(order.begin(), order.end(), 0);
    // partial Fisher-Yates
    for (int j = 0; j < k; ++j) {
      auto pick = j + static_cast<int>(rng.below(static_cast<std::uint64_t>(d.n - j)));
      std::swap(order[static_cast<std::size_t>(j)], order[static_cast<std::size_t>(pick)]);
    }
    inst.observed = FeatureSet(std::vector<int>(order.begin(), order.begin() + k));
  }
  return out;
}

Splits split_dataset(const Dataset& d, std::uint64_t seed) {
  const int total = d.size();
  if (total < 10) throw std::invalid_argument("split_dataset: need at least 10 instances");
  const int n_train = round_half_away(0.7 * total);
  const int n_val = round_half_away(0.1 * total);
  const int n_test = total - n_train - n_val;
  if (n_train < 1 || n_val < 1 || n_test < 1) throw std::invalid_argument("split_dataset: dataset too small");

  std::vector<int> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (int i = total - 1; i > 0; --i) {
    auto j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i + 1)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  auto take = [&](int from, int count, SplitTag tag) {
    std::vector<int> pos(order.begin() + from, order.begin() + from + count);
    std::sort(pos.begin(), pos.end());
    Dataset part = d.subset(pos);
    part.split = tag;
    return part;
  };
  return Splits{take(0, n_train, SplitTag::train), take(n_train, n_val, SplitTag::validation),
                take(n_train + n_val, n_test, SplitTag::test)};
}

Standardization Standardization::fit(const Dataset& train) {
  if (train.empty()) throw std::invalid_argument("Standardization::fit: empty dataset");
  Standardization s;
  s.mean = Eigen::VectorXd::Zero(train.n);
  s.scale = Eigen::VectorXd::Ones(train.n);
  for (const auto& inst : train.instances) s.mean += inst.features;
  s.mean /= train.size();
  Eigen::VectorXd var = Eigen::VectorXd::Zero(train.n);
  for (const auto& inst : train.instances) var += (inst.features - s.mean).cwiseAbs2();
  var /= train.size();
  for (int j = 0; j < train.n; ++j) s.scale[j] = var[j] > 1e-24 ? std::sqrt(var[j]) : 1.0;
  return s;
}

void Standardization::apply(Dataset& d) const {
  for (auto& inst : d.instances) inst.features = (inst.features - mean).cwiseQuotient(scale);
}

}  // namespace genex
