#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "genex/analysis.hpp"
#include "genex/dataset.hpp"
#include "genex/greedy.hpp"
#include "genex/inference.hpp"
#include "genex/uncertainty.hpp"

namespace genex {

enum class Ablation { full, v_empty, v_equals_u };
enum class Clustering { rh, kmeans };
/// How U_b is chosen. `random` draws q_max pool features uniformly and then
/// trains exactly like the greedy path.
enum class Acquisition { greedy, random };

const char* to_string(Ablation a);
const char* to_string(Clustering c);
const char* to_string(Acquisition a);
const char* to_string(DeltaMode m);

struct ExperimentConfig {
  /// Feature CSV; empty selects the built-in synthetic source below.
  std::string dataset;
  std::string mask;
  std::string labels;
  std::string label_column = "label";

  int synth_size = 3000;
  int synth_n = 30;
  int synth_classes = 4;
  int synth_informative = 5;
  int synth_redundant = 0;
  double synth_redundant_noise = 0.05;
  std::uint64_t synth_seed = 1;

  std::uint64_t seed = 1;
  int buckets_log2 = 3;  // M; B = 2^M
  int q_max = 5;
  /// Negative means ceil(q_max / 2).
  int lambda = -1;
  double tau_quantile = 0.10;
  /// Used when no mask file is given.
  double obs_fraction = 0.10;
  DeltaMode delta_mode = DeltaMode::monte_carlo;
  double delta_constant = 0.8;
  int K = 8;
  int delta_K = 32;
  int pretrain_epochs = 30;
  int commit_epochs = 2;
  int finetune_epochs = 20;
  int hidden = 32;
  int latent = 16;
  double learning_rate = 1e-2;
  int batch_size = 32;
  int generator_samples = 1;
  Ablation ablation = Ablation::full;
  Clustering clustering = Clustering::rh;
  Acquisition acquisition = Acquisition::greedy;
  int repeats = 1;
  /// Worker threads; 0 means one per hardware thread. Results do not depend on it.
  int jobs = 1;

  int effective_lambda() const { return lambda < 0 ? (q_max + 1) / 2 : lambda; }

  /// Throws std::invalid_argument naming the first out-of-range field.
  void validate() const;
  /// "key = value" lines; doubles in 17 significant digits.
  std::string serialize() const;
  /// Applies "key = value" lines on top of *this. Unknown keys throw.
  void apply(const std::string& text);
  /// Applies one key; throws std::invalid_argument on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);

  static ExperimentConfig parse(const std::string& text);
  static ExperimentConfig load(const std::string& path);
  void save(const std::string& path) const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Loads the configured CSV, or builds the synthetic source.
Dataset load_source(const ExperimentConfig& cfg);

struct RunMetrics {
  double accuracy = 0.0;
  /// E[|U \ V|]: mean oracle queries per test instance.
  double mean_queries = 0.0;
  /// E[|V|/|U|]: mean of |V_b|/|U_b| over instances whose generated path was used.
  double saved_fraction = 0.0;
  double bucket_skew = 0.0;
  double conicity = 0.0;
};

/// Accuracy, E[|U\V|] and E[|V|/|U|] from an outcome log and its plan.
/// run_single reports exactly these numbers.
RunMetrics metrics_from_log(const std::vector<InferenceOutcome>& outcomes, const AcquisitionPlan& plan);

struct PipelineRun {
  std::uint64_t seed = 0;
  AcquisitionPlan plan;
  InferenceEngine engine;
  std::vector<InferenceOutcome> outcomes;
  RunMetrics metrics;
  double wall_seconds = 0.0;
  /// Standardized test split, as seen by the engine.
  Dataset test;
};

/// Observation policy, split, standardization, partition, per-bucket
/// pretraining and set selection, tau calibration, test inference.
PipelineRun run_single(const ExperimentConfig& cfg, const Dataset& source, std::uint64_t seed);

struct Summary {
  double mean = 0.0;
  double se = 0.0;
  friend bool operator==(const Summary&, const Summary&) = default;
};

Summary summarize(const std::vector<double>& values);

struct RunRow {
  int q_max = 0;
  int lambda = 0;
  int repeats = 0;
  Summary accuracy;
  Summary mean_queries;
  Summary saved_fraction;
  Summary bucket_skew;
  Summary conicity;
  friend bool operator==(const RunRow&, const RunRow&) = default;
};

struct RunReport {
  std::vector<RunRow> rows;

  void write_csv(const std::string& path) const;
  static RunReport read_csv(const std::string& path);
  /// Plot series: x = E[|U\V|], y = accuracy, with standard errors.
  void write_series(const std::string& path) const;
};

struct PipelineResult {
  RunRow row;
  std::vector<PipelineRun> runs;
};

/// `repeats` runs with seeds derive_seed(cfg.seed, r), aggregated into one row.
PipelineResult run_pipeline(const ExperimentConfig& cfg, const Dataset& source);
PipelineResult run_pipeline(const ExperimentConfig& cfg);

/// One pipeline per budget. Throws std::invalid_argument unless budgets are
/// non-empty and strictly ascending.
std::vector<PipelineResult> sweep_budgets(const ExperimentConfig& cfg, const Dataset& source,
                                          const std::vector<int>& budgets);

/// Default grid: 10, 20, 30, 40, 50 percent of n (at least 1, deduplicated).
std::vector<int> default_budgets(int n);

/// runreport.csv, timing.csv, and for each (budget, repeat) runs/q<q>_r<r>/
/// with outcomes.csv and plan.txt. The first run is also copied to the top
/// level as outcomes.csv and plan.txt.
void write_results(const std::vector<PipelineResult>& results, const std::string& out_dir);

/// Path of the per-run directory used by write_results.
std::string run_directory(const std::string& out_dir, int q_max, int repeat);

struct AnalysisSpec {
  int n = 6;
  int size = 200;
  int num_classes = 2;
  int informative = 2;
  int q_max = 2;
  double obs_fraction = 0.2;
  DeltaMode delta_mode = DeltaMode::monte_carlo;
  // long full-batch fits so each G_F value sits close to the inner optimum
  int pretrain_epochs = 200;
  int retrain_epochs = 200;
  double learning_rate = 0.05;
  int K = 8;
  int delta_K = 32;
  int hidden = 16;
  int latent = 4;
  int proposition_K = 256;
  int constant_samples = 200;
  std::uint64_t seed = 1;
  int jobs = 1;
};

/// Full-retrain G_F on one small synthetic bucket: property estimates, OPT,
/// greedy, approximation-bound and split-query verdicts, assumption constants.
/// q_max = 0 skips the bound check and records a note.
AnalysisReport run_analysis(const AnalysisSpec& spec);

}  // namespace genex
