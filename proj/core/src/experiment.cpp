#include "genex/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "genex/parallel.hpp"
#include "genex/partition.hpp"
#include "genex/synthetic.hpp"

namespace genex {
namespace {

constexpr std::uint64_t kPolicySalt = 11;
constexpr std::uint64_t kSplitSalt = 12;
constexpr std::uint64_t kBankSalt = 13;
constexpr std::uint64_t kPretrainSalt = 14;
constexpr std::uint64_t kSelectSalt = 15;
constexpr std::uint64_t kRandomSalt = 16;
constexpr std::uint64_t kGeneratorSalt = 17;
constexpr std::uint64_t kTauSalt = 18;
constexpr std::uint64_t kInferSalt = 19;
constexpr std::uint64_t kRepeatSalt = 20;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

int to_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  int out = 0;
  try {
    out = std::stoi(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw std::invalid_argument("config: " + key + " expects an integer, got '" + v + "'");
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  std::uint64_t out = 0;
  try {
    out = std::stoull(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty() || v[0] == '-')
    throw std::invalid_argument("config: " + key + " expects a non-negative integer, got '" + v + "'");
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw std::invalid_argument("config: " + key + " expects a number, got '" + v + "'");
  return out;
}

template <typename E>
E to_enum(const std::string& key, const std::string& v, std::initializer_list<std::pair<const char*, E>> names) {
  for (const auto& [name, value] : names)
    if (v == name) return value;
  throw std::invalid_argument("config: bad value '" + v + "' for " + key);
}

}  // namespace

const char* to_string(Ablation a) {
  switch (a) {
    case Ablation::full: return "full";
    case Ablation::v_empty: return "v-empty";
    case Ablation::v_equals_u: return "v-equals-u";
  }
  return "?";
}

const char* to_string(Clustering c) { return c == Clustering::rh ? "rh" : "kmeans"; }
const char* to_string(Acquisition a) { return a == Acquisition::greedy ? "greedy" : "random"; }
const char* to_string(DeltaMode m) { return m == DeltaMode::monte_carlo ? "mc" : "constant"; }

// --- config ------------------------------------------------------------------

void ExperimentConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("config: ") + what);
  };
  require(synth_size >= 10, "synth_size must be >= 10");
  require(synth_n >= 1 && synth_n <= 64, "synth_n must be in [1, 64]");
  require(synth_classes >= 2, "synth_classes must be >= 2");
  require(synth_informative >= 1 && synth_informative <= synth_n, "synth_informative must be in [1, synth_n]");
  require(synth_redundant >= 0 && synth_redundant <= synth_n - synth_informative,
          "synth_redundant must be in [0, synth_n - synth_informative]");
  require(synth_redundant_noise >= 0.0, "synth_redundant_noise must be >= 0");
  require(buckets_log2 >= 0 && buckets_log2 <= 16, "buckets_log2 must be in [0, 16]");
  require(q_max >= 0, "q_max must be >= 0");
  require(lambda >= -1, "lambda must be >= -1 (auto)");
  require(tau_quantile > 0.0 && tau_quantile <= 1.0, "tau_quantile must be in (0, 1]");
  require(obs_fraction > 0.0 && obs_fraction <= 1.0, "obs_fraction must be in (0, 1]");
  require(delta_constant >= 0.0 && delta_constant <= 1.0, "delta_constant must be in [0, 1]");
  require(K >= 1, "K must be >= 1");
  require(delta_K >= 1, "delta_K must be >= 1");
  require(pretrain_epochs >= 0 && commit_epochs >= 0 && finetune_epochs >= 0, "epochs must be >= 0");
  require(hidden >= 1 && latent >= 1, "hidden and latent must be >= 1");
  require(learning_rate > 0.0, "learning_rate must be > 0");
  require(batch_size >= 0, "batch_size must be >= 0");
  require(generator_samples >= 1, "generator_samples must be >= 1");
  require(repeats >= 1, "repeats must be >= 1");
  require(jobs >= 0, "jobs must be >= 0");
}

std::string ExperimentConfig::serialize() const {
  std::ostringstream o;
  o << "dataset = " << dataset << "\n"
    << "mask = " << mask << "\n"
    << "labels = " << labels << "\n"
    << "label_column = " << label_column << "\n"
    << "synth_size = " << synth_size << "\n"
    << "synth_n = " << synth_n << "\n"
    << "synth_classes = " << synth_classes << "\n"
    << "synth_informative = " << synth_informative << "\n"
    << "synth_redundant = " << synth_redundant << "\n"
    << "synth_redundant_noise = " << fmt(synth_redundant_noise) << "\n"
    << "synth_seed = " << synth_seed << "\n"
    << "seed = " << seed << "\n"
    << "buckets_log2 = " << buckets_log2 << "\n"
    << "q_max = " << q_max << "\n"
    << "lambda = " << lambda << "\n"
    << "tau_quantile = " << fmt(tau_quantile) << "\n"
    << "obs_fraction = " << fmt(obs_fraction) << "\n"
    << "delta_mode = " << to_string(delta_mode) << "\n"
    << "delta_constant = " << fmt(delta_constant) << "\n"
    << "K = " << K << "\n"
    << "delta_K = " << delta_K << "\n"
    << "pretrain_epochs = " << pretrain_epochs << "\n"
    << "commit_epochs = " << commit_epochs << "\n"
    << "finetune_epochs = " << finetune_epochs << "\n"
    << "hidden = " << hidden << "\n"
    << "latent = " << latent << "\n"
    << "learning_rate = " << fmt(learning_rate) << "\n"
    << "batch_size = " << batch_size << "\n"
    << "generator_samples = " << generator_samples << "\n"
    << "ablation = " << to_string(ablation) << "\n"
    << "clustering = " << to_string(clustering) << "\n"
    << "acquisition = " << to_string(acquisition) << "\n"
    << "repeats = " << repeats << "\n"
    << "jobs = " << jobs << "\n";
  return o.str();
}

void ExperimentConfig::set(const std::string& key, const std::string& v) {
  if (key == "dataset") dataset = v;
  else if (key == "mask") mask = v;
  else if (key == "labels") labels = v;
  else if (key == "label_column") label_column = v;
  else if (key == "synth_size") synth_size = to_int(key, v);
  else if (key == "synth_n") synth_n = to_int(key, v);
  else if (key == "synth_classes") synth_classes = to_int(key, v);
  else if (key == "synth_informative") synth_informative = to_int(key, v);
  else if (key == "synth_redundant") synth_redundant = to_int(key, v);
  else if (key == "synth_redundant_noise") synth_redundant_noise = to_double(key, v);
  else if (key == "synth_seed") synth_seed = to_u64(key, v);
  else if (key == "seed") seed = to_u64(key, v);
  else if (key == "buckets_log2") buckets_log2 = to_int(key, v);
  else if (key == "q_max") q_max = to_int(key, v);
  else if (key == "lambda") lambda = to_int(key, v);
  else if (key == "tau_quantile") tau_quantile = to_double(key, v);
  else if (key == "obs_fraction") obs_fraction = to_double(key, v);
  else if (key == "delta_mode")
    delta_mode = to_enum<DeltaMode>(key, v, {{"mc", DeltaMode::monte_carlo}, {"constant", DeltaMode::constant}});
  else if (key == "delta_constant") delta_constant = to_double(key, v);
  else if (key == "K") K = to_int(key, v);
  else if (key == "delta_K") delta_K = to_int(key, v);
  else if (key == "pretrain_epochs") pretrain_epochs = to_int(key, v);
  else if (key == "commit_epochs") commit_epochs = to_int(key, v);
  else if (key == "finetune_epochs") finetune_epochs = to_int(key, v);
  else if (key == "hidden") hidden = to_int(key, v);
  else if (key == "latent") latent = to_int(key, v);
  else if (key == "learning_rate") learning_rate = to_double(key, v);
  else if (key == "batch_size") batch_size = to_int(key, v);
  else if (key == "generator_samples") generator_samples = to_int(key, v);
  else if (key == "ablation")
    ablation = to_enum<Ablation>(
        key, v, {{"full", Ablation::full}, {"v-empty", Ablation::v_empty}, {"v-equals-u", Ablation::v_equals_u}});
  else if (key == "clustering")
    clustering = to_enum<Clustering>(key, v, {{"rh", Clustering::rh}, {"kmeans", Clustering::kmeans}});
  else if (key == "acquisition")
    acquisition = to_enum<Acquisition>(key, v, {{"greedy", Acquisition::greedy}, {"random", Acquisition::random}});
  else if (key == "repeats") repeats = to_int(key, v);
  else if (key == "jobs") jobs = to_int(key, v);
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

void ExperimentConfig::apply(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  ExperimentConfig cfg;
  cfg.apply(text);
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void ExperimentConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << serialize();
}

Dataset load_source(const ExperimentConfig& cfg) {
  if (cfg.dataset.empty()) {
    synthetic::InformativeSpec spec;
    spec.size = cfg.synth_size;
    spec.n = cfg.synth_n;
    spec.num_classes = cfg.synth_classes;
    spec.informative = cfg.synth_informative;
    spec.redundant = cfg.synth_redundant;
    spec.redundant_noise = cfg.synth_redundant_noise;
    spec.seed = cfg.synth_seed;
    return synthetic::informative_classes(spec).data;
  }
  LoadOptions opts;
  opts.features_path = cfg.dataset;
  opts.mask_path = cfg.mask;
  opts.labels_path = cfg.labels;
  opts.label_column = cfg.label_column;
  return load_dataset(opts);
}

// --- pipeline -------------------------------------------------------------------

RunMetrics metrics_from_log(const std::vector<InferenceOutcome>& outcomes, const AcquisitionPlan& plan) {
  RunMetrics m;
  if (outcomes.empty()) return m;
  double correct = 0.0, queries = 0.0, saved = 0.0;
  for (const auto& o : outcomes) {
    if (o.predicted == o.label) correct += 1.0;
    queries += o.oracle_queries;
    if (o.used_generator) {
      const auto it = plan.buckets.find(o.bucket);
      if (it == plan.buckets.end())
        throw std::invalid_argument("metrics_from_log: bucket " + std::to_string(o.bucket) + " missing from plan");
      const int u = it->second.acquire.size();
      if (u > 0) saved += static_cast<double>(it->second.generate.size()) / u;
    }
  }
  const auto N = static_cast<double>(outcomes.size());
  m.accuracy = correct / N;
  m.mean_queries = queries / N;
  m.saved_fraction = saved / N;
  return m;
}

namespace {

FeatureSet random_pick(const FeatureSet& pool, int k, Rng& rng) {
  std::vector<int> items = pool.indices();
  const int take = std::min<int>(k, static_cast<int>(items.size()));
  for (int i = 0; i < take; ++i) {
    const auto j = i + static_cast<int>(rng.below(items.size() - static_cast<std::size_t>(i)));
    std::swap(items[static_cast<std::size_t>(i)], items[static_cast<std::size_t>(j)]);
  }
  items.resize(static_cast<std::size_t>(take));
  return FeatureSet(items);
}

BucketModel train_bucket(const ExperimentConfig& cfg, const std::shared_ptr<const Dataset>& bucket,
                         std::uint64_t seed, std::uint32_t code) {
  ArchSpec arch;
  arch.hidden = cfg.hidden;
  arch.latent = cfg.latent;
  TrainOptions train;
  train.learning_rate = cfg.learning_rate;
  train.batch_size = cfg.batch_size;

  const ModelPair pre = pretrain(arch, *bucket, cfg.pretrain_epochs, derive_seed(seed, kPretrainSalt, code), train);
  auto est = std::make_shared<UncertaintyEstimator>(UncertaintyEstimator::from_pretrained(pre, cfg.delta_K, cfg.delta_mode));
  est->constant_value = cfg.delta_constant;

  GFOptions gf;
  gf.K = cfg.K;
  gf.commit_epochs = cfg.commit_epochs;
  gf.seed = derive_seed(seed, kSelectSalt, code);
  gf.train = train;
  const FeatureSet pool = candidate_pool_for_u(*bucket);

  BucketModel out;
  ModelPair models;
  if (cfg.acquisition == Acquisition::greedy) {
    GFContext ctx(bucket, pre, est, gf);
    out.acquire = greedy_for_u(ctx, cfg.q_max, pool).selected;
    ctx.finetune(cfg.finetune_epochs);
    models = ctx.models();
  } else {
    Rng rng(derive_seed(seed, kRandomSalt, code));
    out.acquire = random_pick(pool, cfg.q_max, rng);
    // Same training as the greedy path: commit epochs per element, then finetuning.
    GFContext ctx(bucket, pre, est, gf);
    for (int e : out.acquire) ctx.commit(e);
    ctx.finetune(cfg.finetune_epochs);
    models = ctx.models();
  }

  switch (cfg.ablation) {
    case Ablation::v_empty: break;
    case Ablation::v_equals_u: out.generate = out.acquire; break;
    case Ablation::full:
      if (cfg.effective_lambda() > 0 && !out.acquire.empty()) {
        GLContext gl(bucket, models.classifier, std::make_shared<VaeSampler>(models.generator), out.acquire, est,
                     cfg.K, derive_seed(seed, kGeneratorSalt, code));
        out.generate = greedy_for_v(gl, cfg.effective_lambda()).selected;
      }
      break;
  }
  out.classifier = std::move(models.classifier);
  out.generator = std::move(models.generator);
  return out;
}

double conicity_of(const Dataset& d) {
  std::vector<Eigen::VectorXd> vs;
  vs.reserve(static_cast<std::size_t>(d.size()));
  for (const auto& inst : d.instances) vs.push_back(padded_observed(inst));
  return conicity(vs);
}

}  // namespace

PipelineRun run_single(const ExperimentConfig& cfg, const Dataset& source, std::uint64_t seed) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  PipelineRun run;
  run.seed = seed;

  const bool has_mask = std::any_of(source.instances.begin(), source.instances.end(),
                                    [](const Instance& i) { return !i.observed.empty(); });
  const Dataset observed =
      has_mask ? source : apply_observation_policy(source, cfg.obs_fraction, derive_seed(seed, kPolicySalt));
  Splits splits = split_dataset(observed, derive_seed(seed, kSplitSalt));
  const Standardization stdz = Standardization::fit(splits.train);
  stdz.apply(splits.train);
  stdz.apply(splits.validation);
  stdz.apply(splits.test);

  InferenceEngine engine;
  engine.bank = make_bank(observed.n, cfg.buckets_log2, derive_seed(seed, kBankSalt));
  engine.generator_samples = cfg.generator_samples;
  Partitioning parts;
  if (cfg.clustering == Clustering::rh) {
    parts = partition(engine.bank, splits.train);
  } else {
    const int B = std::min(1 << cfg.buckets_log2, splits.train.size());
    parts = kmeans_partition(splits.train, B, derive_seed(seed, kBankSalt));
    for (const auto& [code, members] : parts) {
      Eigen::VectorXd c = Eigen::VectorXd::Zero(observed.n);
      for (int p : members) c += padded_observed(splits.train[p]);
      engine.centroids[code] = c / static_cast<double>(members.size());
    }
  }

  std::vector<std::pair<std::uint32_t, std::vector<int>>> cells(parts.begin(), parts.end());
  std::vector<BucketModel> models(cells.size());
  parallel_for(static_cast<int>(cells.size()), cfg.jobs, [&](int b) {
    const auto& [code, members] = cells[static_cast<std::size_t>(b)];
    auto bucket = std::make_shared<const Dataset>(splits.train.subset(members));
    models[static_cast<std::size_t>(b)] = train_bucket(cfg, bucket, seed, code);
  });
  run.plan.q_max = cfg.q_max;
  run.plan.lambda = cfg.ablation == Ablation::v_equals_u ? cfg.q_max : cfg.effective_lambda();
  for (std::size_t b = 0; b < cells.size(); ++b) {
    run.plan.buckets[cells[b].first] = {models[b].acquire, models[b].generate};
    engine.buckets[cells[b].first] = std::move(models[b]);
  }
  run.plan.validate();

  engine.tau = calibrate_tau(engine, splits.validation, cfg.tau_quantile, derive_seed(seed, kTauSalt));

  Oracle oracle = dataset_oracle(splits.test);
  run.outcomes.resize(static_cast<std::size_t>(splits.test.size()));
  parallel_for(splits.test.size(), cfg.jobs, [&](int t) {
    const Instance& inst = splits.test[t];
    Rng rng(derive_seed(seed, kInferSalt, static_cast<std::uint64_t>(inst.id)));
    InferenceOutcome o = infer(engine, ObservedView::of(inst), oracle, rng);
    o.label = inst.label;
    run.outcomes[static_cast<std::size_t>(t)] = o;
  });

  run.metrics = metrics_from_log(run.outcomes, run.plan);
  run.metrics.bucket_skew = bucket_skew(parts);
  run.metrics.conicity = conicity_of(splits.train);
  run.engine = std::move(engine);
  run.test = std::move(splits.test);
  run.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return run;
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  const auto N = static_cast<double>(values.size());
  s.mean = sum / N;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.se = std::sqrt(ss / (N - 1.0) / N);
  }
  return s;
}

PipelineResult run_pipeline(const ExperimentConfig& cfg, const Dataset& source) {
  cfg.validate();
  PipelineResult result;
  std::vector<double> acc, queries, saved, skew, con;
  for (int r = 0; r < cfg.repeats; ++r) {
    const std::uint64_t seed = cfg.repeats == 1 ? cfg.seed : derive_seed(cfg.seed, kRepeatSalt, r);
    PipelineRun run = run_single(cfg, source, seed);
    acc.push_back(run.metrics.accuracy);
    queries.push_back(run.metrics.mean_queries);
    saved.push_back(run.metrics.saved_fraction);
    skew.push_back(run.metrics.bucket_skew);
    con.push_back(run.metrics.conicity);
    result.runs.push_back(std::move(run));
  }
  result.row.q_max = cfg.q_max;
  result.row.lambda = cfg.effective_lambda();
  result.row.repeats = cfg.repeats;
  result.row.accuracy = summarize(acc);
  result.row.mean_queries = summarize(queries);
  result.row.saved_fraction = summarize(saved);
  result.row.bucket_skew = summarize(skew);
  result.row.conicity = summarize(con);
  return result;
}

PipelineResult run_pipeline(const ExperimentConfig& cfg) { return run_pipeline(cfg, load_source(cfg)); }

std::vector<PipelineResult> sweep_budgets(const ExperimentConfig& cfg, const Dataset& source,
                                          const std::vector<int>& budgets) {
  if (budgets.empty()) throw std::invalid_argument("sweep_budgets: no budgets");
  for (std::size_t i = 1; i < budgets.size(); ++i)
    if (budgets[i] <= budgets[i - 1]) throw std::invalid_argument("sweep_budgets: budgets must be ascending");
  std::vector<PipelineResult> out;
  for (int q : budgets) {
    ExperimentConfig c = cfg;
    c.q_max = q;
    out.push_back(run_pipeline(c, source));
  }
  return out;
}

std::vector<int> default_budgets(int n) {
  std::vector<int> out;
  for (int pct : {10, 20, 30, 40, 50}) {
    const int q = std::max(1, static_cast<int>(std::lround(n * pct / 100.0)));
    if (out.empty() || q > out.back()) out.push_back(q);
  }
  return out;
}

// --- reports ----------------------------------------------------------------------

namespace {

constexpr const char* kReportHeader =
    "q_max,lambda,repeats,accuracy,accuracy_se,mean_queries,mean_queries_se,saved_fraction,saved_fraction_se,"
    "bucket_skew,bucket_skew_se,conicity,conicity_se";

}  // namespace

void RunReport::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << kReportHeader << "\n";
  for (const auto& r : rows) {
    out << r.q_max << ',' << r.lambda << ',' << r.repeats;
    for (const Summary* s : {&r.accuracy, &r.mean_queries, &r.saved_fraction, &r.bucket_skew, &r.conicity})
      out << ',' << fmt(s->mean) << ',' << fmt(s->se);
    out << '\n';
  }
}

RunReport RunReport::read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string line;
  std::getline(in, line);
  if (trim(line) != kReportHeader) throw std::runtime_error(path + ": unexpected run report header");
  RunReport report;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::stringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) cells.push_back(trim(cell));
    if (cells.size() != 13) throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 13 columns");
    RunRow r;
    r.q_max = to_int("q_max", cells[0]);
    r.lambda = to_int("lambda", cells[1]);
    r.repeats = to_int("repeats", cells[2]);
    Summary* targets[] = {&r.accuracy, &r.mean_queries, &r.saved_fraction, &r.bucket_skew, &r.conicity};
    for (int k = 0; k < 5; ++k) {
      targets[k]->mean = to_double("value", cells[static_cast<std::size_t>(3 + 2 * k)]);
      targets[k]->se = to_double("value", cells[static_cast<std::size_t>(4 + 2 * k)]);
    }
    report.rows.push_back(r);
  }
  return report;
}

void RunReport::write_series(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "x_mean_queries,x_se,y_accuracy,y_se\n";
  for (const auto& r : rows)
    out << fmt(r.mean_queries.mean) << ',' << fmt(r.mean_queries.se) << ',' << fmt(r.accuracy.mean) << ','
        << fmt(r.accuracy.se) << '\n';
}

std::string run_directory(const std::string& out_dir, int q_max, int repeat) {
  return (std::filesystem::path(out_dir) / "runs" / ("q" + std::to_string(q_max) + "_r" + std::to_string(repeat)))
      .string();
}

void write_results(const std::vector<PipelineResult>& results, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  RunReport report;
  std::ofstream timing(fs::path(out_dir) / "timing.csv");
  timing << "q_max,repeat,seed,wall_seconds\n";
  for (const auto& res : results) {
    report.rows.push_back(res.row);
    for (std::size_t r = 0; r < res.runs.size(); ++r) {
      const PipelineRun& run = res.runs[r];
      const std::string dir = run_directory(out_dir, res.row.q_max, static_cast<int>(r));
      fs::create_directories(dir);
      write_outcomes(run.outcomes, (fs::path(dir) / "outcomes.csv").string());
      save_plan(run.plan, (fs::path(dir) / "plan.txt").string());
      timing << res.row.q_max << ',' << r << ',' << run.seed << ',' << fmt(run.wall_seconds) << '\n';
    }
  }
  report.write_csv((fs::path(out_dir) / "runreport.csv").string());
  report.write_series((fs::path(out_dir) / "series.csv").string());
  if (!results.empty() && !results.front().runs.empty()) {
    const PipelineRun& first = results.front().runs.front();
    write_outcomes(first.outcomes, (fs::path(out_dir) / "outcomes.csv").string());
    save_plan(first.plan, (fs::path(out_dir) / "plan.txt").string());
  }
}

// --- analysis -------------------------------------------------------------------

AnalysisReport run_analysis(const AnalysisSpec& spec) {
  if (spec.n < 1 || spec.n > kExhaustiveLimit)
    throw std::length_error("run_analysis: n = " + std::to_string(spec.n) + " exceeds the exhaustive limit of " +
                            std::to_string(kExhaustiveLimit));
  if (spec.q_max < 0) throw std::invalid_argument("run_analysis: q_max must be >= 0");
  if (spec.learning_rate <= 0.0) throw std::invalid_argument("run_analysis: learning_rate must be > 0");

  synthetic::InformativeSpec data_spec;
  data_spec.size = spec.size;
  data_spec.n = spec.n;
  data_spec.num_classes = spec.num_classes;
  data_spec.informative = spec.informative;
  data_spec.seed = spec.seed;
  Dataset d = synthetic::informative_classes(data_spec).data;
  d = apply_observation_policy(d, spec.obs_fraction, derive_seed(spec.seed, kPolicySalt));
  auto bucket = std::make_shared<const Dataset>(std::move(d));

  FullRetrainOptions opts;
  opts.arch.hidden = spec.hidden;
  opts.arch.latent = spec.latent;
  opts.pretrain_epochs = spec.pretrain_epochs;
  opts.retrain_epochs = spec.retrain_epochs;
  opts.K = spec.K;
  opts.delta_K = spec.delta_K;
  opts.delta_mode = spec.delta_mode;
  opts.train.batch_size = 0;
  opts.train.learning_rate = spec.learning_rate;
  opts.seed = spec.seed;
  FullRetrainGF G(bucket, opts);
  G.prefetch(FullRetrainGF::all_subsets(spec.n, spec.n), spec.jobs);
  const SetFunction g = G.as_function();

  AnalysisReport report;
  report.n = spec.n;
  report.q_max = spec.q_max;
  report.monotonicity = estimate_partial_monotonicity(g, spec.n);
  report.submodularity = estimate_weak_submodularity(g, spec.n);
  report.opt = brute_force_opt(g, spec.n, spec.q_max);
  report.greedy = greedy_minimize(g, FeatureSet::range(spec.n), spec.q_max);
  report.greedy_value = g(report.greedy.selected);
  report.empty_value = g(FeatureSet{});
  if (!report.submodularity.defined) report.notes.push_back("weak submodularity undefined: no usable pairs");

  if (spec.q_max > 0) {
    report.theorem4 = check_theorem4(report.greedy_value, report.opt.value, report.empty_value,
                                     report.monotonicity.m_min, report.monotonicity.m_max,
                                     report.submodularity.gamma_min, report.submodularity.gamma_max, spec.q_max);
    report.theorem4_checked = true;
    if (report.theorem4.degenerate) report.notes.push_back("theorem4: degenerate inputs");
  } else {
    report.notes.push_back("theorem4: degenerate, q_max = 0");
  }

  const ModelPair trained = G.trained(report.greedy.selected);
  auto sampler = std::make_shared<VaeSampler>(trained.generator);
  if (spec.n <= 6 && spec.q_max <= 2) {
    report.proposition1 = check_proposition1(bucket, trained.classifier, sampler, G.estimator(), spec.q_max,
                                             spec.proposition_K, derive_seed(spec.seed, 31));
    report.proposition1_checked = true;
  } else {
    report.notes.push_back("proposition1: skipped outside n <= 6, q_max <= 2");
  }
  report.constants = measure_constants(bucket, trained.classifier, sampler, G.estimator(), spec.constant_samples,
                                       spec.K, derive_seed(spec.seed, 32));
  return report;
}

}  // namespace genex
