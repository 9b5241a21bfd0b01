// genex: train and evaluate per-bucket feature acquisition models.
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "genex/experiment.hpp"
#include "genex/partition.hpp"
#include "genex/synthetic.hpp"

namespace fs = std::filesystem;
using namespace genex;

namespace {

/// Flags shared by every pipeline subcommand. Values stay as strings so that
/// only flags actually given are applied.
struct CommonFlags {
  std::string config_path;
  std::string out_dir = "genex-out";
  std::vector<std::pair<std::string, CLI::Option*>> options;
  std::vector<std::pair<std::string, std::string>> values;
  std::vector<std::string> extra;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "Key = value config file (overrides flags)");
    app->add_option("--out-dir", out_dir, "Output directory");
    const std::pair<const char*, const char*> keys[] = {
        {"--seed", "seed"},
        {"--dataset", "dataset"},
        {"--mask", "mask"},
        {"--labels", "labels"},
        {"--buckets-log2", "buckets_log2"},
        {"--qmax", "q_max"},
        {"--lambda", "lambda"},
        {"--tau-quantile", "tau_quantile"},
        {"--obs-fraction", "obs_fraction"},
        {"--delta-mode", "delta_mode"},
        {"--ablation", "ablation"},
        {"--clustering", "clustering"},
        {"--acquisition", "acquisition"},
        {"--repeats", "repeats"},
        {"--jobs", "jobs"},
    };
    values.resize(std::size(keys));
    for (std::size_t i = 0; i < std::size(keys); ++i) {
      values[i].first = keys[i].second;
      options.emplace_back(keys[i].second, app->add_option(keys[i].first, values[i].second));
    }
    app->add_option("--set", extra, "Extra config entries as key=value");
  }

  ExperimentConfig resolve() const {
    ExperimentConfig cfg;
    for (std::size_t i = 0; i < values.size(); ++i)
      if (options[i].second->count() > 0) cfg.set(values[i].first, values[i].second);
    for (const auto& kv : extra) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw std::runtime_error("cannot open config '" + config_path + "'");
      std::stringstream buf;
      buf << in.rdbuf();
      cfg.apply(buf.str());
    }
    cfg.validate();
    return cfg;
  }
};

void print_row(const RunRow& r) {
  std::printf("q_max=%d lambda=%d repeats=%d accuracy=%.4f+-%.4f E|U\\V|=%.3f E|V|/|U|=%.3f skew=%.3f conicity=%.3f\n",
              r.q_max, r.lambda, r.repeats, r.accuracy.mean, r.accuracy.se, r.mean_queries.mean,
              r.saved_fraction.mean, r.bucket_skew.mean, r.conicity.mean);
}

std::vector<int> parse_budgets(const std::string& text) {
  std::vector<int> out;
  std::stringstream in(text);
  std::string cell;
  while (std::getline(in, cell, ',')) out.push_back(std::stoi(cell));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Batch feature acquisition with per-bucket generators"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic informative-feature dataset");
  synthetic::InformativeSpec sspec;
  double synth_obs = 0.0;
  std::string synth_out = "genex-data";
  synth->add_option("--size", sspec.size);
  synth->add_option("--n", sspec.n);
  synth->add_option("--classes", sspec.num_classes);
  synth->add_option("--informative", sspec.informative);
  synth->add_option("--redundant", sspec.redundant);
  synth->add_option("--seed", sspec.seed);
  synth->add_option("--obs-fraction", synth_obs, "Write a random observation mask with this fraction");
  synth->add_option("--out-dir", synth_out);

  CommonFlags partition_flags, train_flags, sweep_flags;
  auto* part = app.add_subcommand("partition", "Hash the training split and report bucket sizes");
  partition_flags.attach(part);
  auto* train = app.add_subcommand("train", "Run one pipeline and save the engine, plan and test split");
  train_flags.attach(train);
  auto* sweep = app.add_subcommand("sweep", "Run the pipeline over a grid of budgets");
  sweep_flags.attach(sweep);
  std::string budgets_text;
  sweep->add_option("--budgets", budgets_text, "Comma separated q_max values (default 10..50% of n)");

  auto* infer_cmd = app.add_subcommand("infer", "Apply a saved engine to a dataset");
  std::string engine_path, infer_features, infer_mask, infer_out = "genex-out";
  std::uint64_t infer_seed = 1;
  infer_cmd->add_option("--engine", engine_path)->required();
  infer_cmd->add_option("--dataset", infer_features)->required();
  infer_cmd->add_option("--mask", infer_mask)->required();
  infer_cmd->add_option("--seed", infer_seed);
  infer_cmd->add_option("--out-dir", infer_out);

  auto* analyze = app.add_subcommand("analyze", "Verification suite on a small synthetic bucket");
  AnalysisSpec aspec;
  std::string delta_mode = "mc", analyze_out = "genex-out";
  analyze->add_option("--n", aspec.n);
  analyze->add_option("--size", aspec.size);
  analyze->add_option("--qmax", aspec.q_max);
  analyze->add_option("--seed", aspec.seed);
  analyze->add_option("--delta-mode", delta_mode)->check(CLI::IsMember({"mc", "constant"}));
  analyze->add_option("--pretrain-epochs", aspec.pretrain_epochs);
  analyze->add_option("--retrain-epochs", aspec.retrain_epochs);
  analyze->add_option("--learning-rate", aspec.learning_rate);
  analyze->add_option("--jobs", aspec.jobs);
  analyze->add_option("--out-dir", analyze_out);

  auto* report = app.add_subcommand("report", "Print a run report and write its plot series");
  std::string report_in, report_out;
  report->add_option("--in", report_in)->required();
  report->add_option("--out-dir", report_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      fs::create_directories(synth_out);
      auto data = synthetic::informative_classes(sspec);
      Dataset d = synth_obs > 0.0 ? apply_observation_policy(data.data, synth_obs, sspec.seed) : data.data;
      save_dataset(d, (fs::path(synth_out) / "features.csv").string(), (fs::path(synth_out) / "mask.csv").string());
      std::printf("informative: %s\n", data.informative.to_string().c_str());
      for (const auto& [copy, src] : data.redundant) std::printf("redundant: %d copies %d\n", copy, src);
    } else if (*part) {
      ExperimentConfig cfg = partition_flags.resolve();
      Dataset src = load_source(cfg);
      const bool has_mask = std::any_of(src.instances.begin(), src.instances.end(),
                                        [](const Instance& i) { return !i.observed.empty(); });
      if (!has_mask) src = apply_observation_policy(src, cfg.obs_fraction, derive_seed(cfg.seed, 11));
      Splits s = split_dataset(src, derive_seed(cfg.seed, 12));
      Standardization::fit(s.train).apply(s.train);
      Partitioning parts;
      fs::create_directories(partition_flags.out_dir);
      if (cfg.clustering == Clustering::rh) {
        HyperplaneBank bank = make_bank(src.n, cfg.buckets_log2, derive_seed(cfg.seed, 13));
        save_bank(bank, (fs::path(partition_flags.out_dir) / "bank.txt").string());
        parts = partition(bank, s.train);
      } else {
        parts = kmeans_partition(s.train, 1 << cfg.buckets_log2, derive_seed(cfg.seed, 13));
      }
      std::ofstream out(fs::path(partition_flags.out_dir) / "partition.csv");
      out << "bucket,size\n";
      for (const auto& [code, members] : parts) out << code << ',' << members.size() << '\n';
      std::vector<Eigen::VectorXd> vs;
      for (const auto& inst : s.train.instances) vs.push_back(padded_observed(inst));
      std::printf("buckets=%zu skew=%.4f conicity=%.4f\n", parts.size(), bucket_skew(parts), conicity(vs));
    } else if (*train) {
      ExperimentConfig cfg = train_flags.resolve();
      PipelineResult res = run_pipeline(cfg);
      write_results({res}, train_flags.out_dir);
      const PipelineRun& run = res.runs.front();
      save_engine(run.engine, (fs::path(train_flags.out_dir) / "engine.txt").string());
      save_dataset(run.test, (fs::path(train_flags.out_dir) / "test_features.csv").string(),
                   (fs::path(train_flags.out_dir) / "test_mask.csv").string());
      cfg.save((fs::path(train_flags.out_dir) / "config.txt").string());
      print_row(res.row);
    } else if (*sweep) {
      ExperimentConfig cfg = sweep_flags.resolve();
      Dataset src = load_source(cfg);
      std::vector<int> budgets = budgets_text.empty() ? default_budgets(src.n) : parse_budgets(budgets_text);
      auto results = sweep_budgets(cfg, src, budgets);
      write_results(results, sweep_flags.out_dir);
      cfg.save((fs::path(sweep_flags.out_dir) / "config.txt").string());
      for (const auto& r : results) print_row(r.row);
    } else if (*infer_cmd) {
      InferenceEngine engine = load_engine(engine_path);
      LoadOptions opts;
      opts.features_path = infer_features;
      opts.mask_path = infer_mask;
      Dataset d = load_dataset(opts);
      Oracle oracle = dataset_oracle(d);
      std::vector<InferenceOutcome> outcomes;
      int correct = 0;
      for (const auto& inst : d.instances) {
        Rng rng(derive_seed(infer_seed, static_cast<std::uint64_t>(inst.id)));
        InferenceOutcome o = infer(engine, ObservedView::of(inst), oracle, rng);
        o.label = inst.label;
        correct += o.predicted == o.label ? 1 : 0;
        outcomes.push_back(o);
      }
      fs::create_directories(infer_out);
      write_outcomes(outcomes, (fs::path(infer_out) / "outcomes.csv").string());
      std::printf("instances=%zu accuracy=%.4f\n", outcomes.size(),
                  outcomes.empty() ? 0.0 : static_cast<double>(correct) / outcomes.size());
    } else if (*analyze) {
      aspec.delta_mode = delta_mode == "mc" ? DeltaMode::monte_carlo : DeltaMode::constant;
      AnalysisReport r = run_analysis(aspec);
      fs::create_directories(analyze_out);
      r.write_text((fs::path(analyze_out) / "analysis.txt").string());
      r.write_csv((fs::path(analyze_out) / "analysis.csv").string());
      std::printf("m=[%.4f, %.4f] gamma=[%.4f, %.4f] opt=%.4f greedy=%.4f\n", r.monotonicity.m_min,
                  r.monotonicity.m_max, r.submodularity.gamma_min, r.submodularity.gamma_max, r.opt.value,
                  r.greedy_value);
      if (r.theorem4_checked)
        std::printf("theorem4: %s slack=%.4g\n", r.theorem4.pass ? "pass" : "fail", r.theorem4.slack);
      if (r.proposition1_checked)
        std::printf("proposition1: %s slack=%.4g\n", r.proposition1.pass ? "pass" : "fail", r.proposition1.slack);
    } else if (*report) {
      RunReport r = RunReport::read_csv(report_in);
      for (const auto& row : r.rows) print_row(row);
      if (!report_out.empty()) {
        fs::create_directories(report_out);
        r.write_series((fs::path(report_out) / "series.csv").string());
      }
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "genex: %s\n", e.what());
    return 1;
  }
  return 0;
}
