#include "genex/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace genex {
namespace {

struct Prediction {
  int label = 0;
  double confidence = 0.0;
};

Prediction classify(const ClassifierParams& theta, const Eigen::MatrixXd& inputs) {
  Eigen::VectorXd p = softmax_columns(logits(theta, inputs)).rowwise().mean();
  Eigen::Index best = 0;
  const double conf = p.maxCoeff(&best);
  return {static_cast<int>(best), conf};
}

Eigen::VectorXd query(const Oracle& oracle, int id, const FeatureSet& indices) {
  if (indices.empty()) return {};
  Eigen::VectorXd v;
  try {
    v = oracle(id, indices);
  } catch (const std::exception& e) {
    throw std::runtime_error("oracle failed for instance " + std::to_string(id) + ": " + e.what());
  }
  if (v.size() != indices.size()) {
    throw std::runtime_error("oracle returned wrong value count for instance " + std::to_string(id));
  }
  return v;
}

void scatter(Eigen::VectorXd& x, const FeatureSet& indices, const Eigen::VectorXd& values) {
  int k = 0;
  for (int j : indices) x[j] = values[k++];
}

struct GeneratedPath {
  const BucketModel* model = nullptr;
  std::uint32_t bucket = 0;
  Eigen::VectorXd x;         // observed + queried values
  FeatureSet known;          // O u (U \ V)
  FeatureSet generated;      // V \ O
  Prediction prediction;
  int queries = 0;
};

GeneratedPath run_generated_path(const InferenceEngine& engine, const ObservedView& view, const Oracle& oracle,
                                 Rng& rng) {
  GeneratedPath g;
  g.bucket = route(engine, view.values, view.observed);
  g.model = &engine.buckets.at(g.bucket);
  const BucketModel& m = *g.model;

  g.x = view.values;
  const FeatureSet to_query = m.acquire.minus(m.generate).minus(view.observed);
  scatter(g.x, to_query, query(oracle, view.id, to_query));
  g.queries = to_query.size();
  g.known = view.observed.union_with(m.acquire.minus(m.generate));
  g.generated = m.generate.minus(view.observed);

  const int samples = std::max(engine.generator_samples, 1);
  Eigen::MatrixXd inputs(2 * m.classifier.n, g.generated.empty() ? 1 : samples);
  if (g.generated.empty()) {
    encode_into(inputs.col(0), g.x, g.known);
  } else {
    Eigen::MatrixXd draws = sample_full(m.generator, MaskedInput::from(g.x, g.known), samples, rng);
    for (int k = 0; k < samples; ++k) {
      Eigen::VectorXd d = draws.col(k);
      encode_into(inputs.col(k), g.x, g.known, &d, &g.generated);
    }
  }
  g.prediction = classify(m.classifier, inputs);
  return g;
}

}  // namespace

ObservedView ObservedView::of(const Instance& inst) {
  ObservedView v{inst.id, Eigen::VectorXd::Zero(inst.features.size()), inst.observed};
  for (int j : inst.observed) v.values[j] = inst.features[j];
  return v;
}

Oracle dataset_oracle(const Dataset& d, long long* served) {
  std::map<int, const Instance*> by_id;
  for (const auto& inst : d.instances) by_id[inst.id] = &inst;
  return [by_id = std::move(by_id), served](int id, const FeatureSet& indices) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw std::out_of_range("unknown instance id " + std::to_string(id));
    Eigen::VectorXd out(indices.size());
    int k = 0;
    for (int j : indices) out[k++] = it->second->features[j];
    if (served != nullptr) *served += indices.size();
    return out;
  };
}

std::set<std::uint32_t> InferenceEngine::trained() const {
  std::set<std::uint32_t> out;
  for (const auto& [code, m] : buckets) out.insert(code);
  return out;
}

std::uint32_t route(const InferenceEngine& engine, const Eigen::VectorXd& values, const FeatureSet& observed) {
  if (engine.centroids.empty()) return find_bucket(engine.bank, values, observed, engine.trained()).code;
  Eigen::VectorXd padded = Eigen::VectorXd::Zero(values.size());
  for (int j : observed) padded[j] = values[j];
  std::uint32_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& [code, c] : engine.centroids) {
    if (!engine.buckets.count(code)) continue;
    const double d = (padded - c).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = code;
    }
  }
  if (!std::isfinite(best_d)) throw std::invalid_argument("route: no trained centroid");
  return best;
}

double generated_path_confidence(const InferenceEngine& engine, const ObservedView& x, const Oracle& oracle,
                                 Rng& rng) {
  return run_generated_path(engine, x, oracle, rng).prediction.confidence;
}

InferenceOutcome infer(const InferenceEngine& engine, const ObservedView& view, const Oracle& oracle, Rng& rng) {
  if (engine.buckets.empty()) throw std::invalid_argument("infer: engine has no trained buckets");
  GeneratedPath g = run_generated_path(engine, view, oracle, rng);
  InferenceOutcome out;
  out.instance_id = view.id;
  out.bucket = g.bucket;
  out.oracle_queries = g.queries;
  if (g.generated.empty()) {
    out.predicted = g.prediction.label;
    out.confidence = g.prediction.confidence;
    return out;
  }
  if (g.prediction.confidence >= engine.tau) {
    out.predicted = g.prediction.label;
    out.confidence = g.prediction.confidence;
    out.used_generator = true;
    return out;
  }
  // fallback: x_all = x[O u U], generated values discarded
  scatter(g.x, g.generated, query(oracle, view.id, g.generated));
  out.oracle_queries += g.generated.size();
  Eigen::MatrixXd input(2 * g.model->classifier.n, 1);
  encode_into(input.col(0), g.x, g.known.union_with(g.generated));
  Prediction p = classify(g.model->classifier, input);
  out.predicted = p.label;
  out.confidence = p.confidence;
  return out;
}

double calibrate_tau(const InferenceEngine& engine, const Dataset& validation, double quantile, std::uint64_t seed) {
  if (validation.empty()) throw std::invalid_argument("calibrate_tau: empty validation set");
  if (!(quantile > 0.0 && quantile <= 1.0)) throw std::invalid_argument("calibrate_tau: quantile must be in (0,1]");
  Oracle oracle = dataset_oracle(validation);
  std::vector<double> conf;
  conf.reserve(static_cast<std::size_t>(validation.size()));
  for (const auto& inst : validation.instances) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(inst.id)));
    conf.push_back(generated_path_confidence(engine, ObservedView::of(inst), oracle, rng));
  }
  std::sort(conf.begin(), conf.end(), std::greater<>());
  const auto k = static_cast<std::size_t>(std::lround(quantile * static_cast<double>(conf.size())));
  if (k == 0) return conf.front() + 1e-9;
  return conf[std::min(k, conf.size()) - 1];
}

void write_outcomes(const std::vector<InferenceOutcome>& outcomes, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "instance_id,bucket,y,y_hat,confidence,used_generator,oracle_queries_made\n";
  char buf[40];
  for (const auto& o : outcomes) {
    std::snprintf(buf, sizeof buf, "%.17g", o.confidence);
    out << o.instance_id << ',' << o.bucket << ',' << o.label << ',' << o.predicted << ',' << buf << ','
        << (o.used_generator ? 1 : 0) << ',' << o.oracle_queries << '\n';
  }
}

std::vector<InferenceOutcome> read_outcomes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string line;
  std::getline(in, line);
  if (line.rfind("instance_id,", 0) != 0) throw std::runtime_error(path + ": not an outcome log");
  std::vector<InferenceOutcome> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    for (char& c : line)
      if (c == ',') c = ' ';
    std::istringstream row(line);
    InferenceOutcome o;
    int used = 0;
    if (!(row >> o.instance_id >> o.bucket >> o.label >> o.predicted >> o.confidence >> used >> o.oracle_queries)) {
      throw std::runtime_error(path + ": malformed row");
    }
    o.used_generator = used != 0;
    out.push_back(o);
  }
  return out;
}

void save_engine(const InferenceEngine& engine, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", engine.tau);
  out << "genex-engine 1\n";
  out << "bank " << engine.bank.n << ' ' << engine.bank.M << ' ' << engine.bank.seed << '\n';
  out << "tau " << buf << "\nsamples " << engine.generator_samples << "\nbuckets " << engine.buckets.size() << '\n';
  out << "centroids " << engine.centroids.size() << '\n';
  for (const auto& [code, c] : engine.centroids) {
    out << code;
    for (Eigen::Index j = 0; j < c.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", c[j]);
      out << ' ' << buf;
    }
    out << '\n';
  }
  for (const auto& [code, m] : engine.buckets) {
    out << "bucket " << code << "\nU: " << m.acquire.to_list() << "\nV: " << m.generate.to_list() << '\n';
    write_classifier(out, m.classifier);
    write_generator(out, m.generator);
  }
}

InferenceEngine load_engine(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string line, tag;
  std::getline(in, line);
  if (line != "genex-engine 1") throw std::runtime_error(path + ": not an engine checkpoint");
  InferenceEngine e;
  int n = 0, M = 0;
  std::uint64_t seed = 0;
  std::size_t count = 0;
  in >> tag >> n >> M >> seed;
  e.bank = make_bank(n, M, seed);
  in >> tag >> e.tau >> tag >> e.generator_samples >> tag >> count;
  std::size_t centroid_count = 0;
  in >> tag >> centroid_count;
  if (!in || tag != "centroids") throw std::runtime_error(path + ": malformed header");
  for (std::size_t c = 0; c < centroid_count; ++c) {
    std::uint32_t code = 0;
    in >> code;
    Eigen::VectorXd v(n);
    for (int j = 0; j < n; ++j) in >> v[j];
    if (!in) throw std::runtime_error(path + ": malformed centroid");
    e.centroids[code] = std::move(v);
  }
  for (std::size_t b = 0; b < count; ++b) {
    std::uint32_t code = 0;
    in >> tag >> code;
    std::getline(in, line);
    BucketModel m;
    std::getline(in, line);
    if (line.rfind("U:", 0) != 0) throw std::runtime_error(path + ": expected U row");
    m.acquire = FeatureSet::parse_list(line.substr(2));
    std::getline(in, line);
    if (line.rfind("V:", 0) != 0) throw std::runtime_error(path + ": expected V row");
    m.generate = FeatureSet::parse_list(line.substr(2));
    m.classifier = read_classifier(in);
    m.generator = read_generator(in);
    e.buckets[code] = std::move(m);
  }
  return e;
}

}  // namespace genex
