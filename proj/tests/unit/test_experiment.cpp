#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "genex/experiment.hpp"
#include "helpers.hpp"

using namespace genex;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.synth_size = 240;
  cfg.synth_n = 8;
  cfg.synth_classes = 2;
  cfg.synth_informative = 2;
  cfg.buckets_log2 = 1;
  cfg.q_max = 2;
  cfg.obs_fraction = 0.25;
  cfg.K = 2;
  cfg.delta_K = 4;
  cfg.pretrain_epochs = 3;
  cfg.commit_epochs = 1;
  cfg.finetune_epochs = 2;
  cfg.hidden = 8;
  cfg.latent = 2;
  return cfg;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config text round trip") {
  ExperimentConfig cfg = small_config();
  cfg.learning_rate = 0.1 / 3.0;
  cfg.ablation = Ablation::v_equals_u;
  cfg.clustering = Clustering::kmeans;
  cfg.acquisition = Acquisition::random;
  cfg.delta_mode = DeltaMode::constant;
  cfg.dataset = "data/x.csv";
  CHECK(ExperimentConfig::parse(cfg.serialize()) == cfg);
  const std::string path = testutil::temp_path("cfg.txt");
  cfg.save(path);
  CHECK(ExperimentConfig::load(path) == cfg);

  ExperimentConfig edited;
  edited.apply("# comment\nq_max = 7\n\nlambda=2\n");
  CHECK(edited.q_max == 7);
  CHECK(edited.effective_lambda() == 2);
  CHECK_THROWS_AS(edited.set("no_such_key", "1"), std::invalid_argument);
  CHECK_THROWS_AS(edited.set("q_max", "seven"), std::invalid_argument);
  CHECK_THROWS_AS(edited.set("ablation", "sideways"), std::invalid_argument);
}

TEST_CASE("config validation and defaults") {
  ExperimentConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.effective_lambda() == 3);
  cfg.q_max = 4;
  CHECK(cfg.effective_lambda() == 2);
  ExperimentConfig bad;
  bad.tau_quantile = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ExperimentConfig{};
  bad.q_max = -1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ExperimentConfig{};
  bad.synth_redundant = 26;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("summaries") {
  Summary s = summarize({1.0, 2.0, 3.0});
  CHECK(s.mean == 2.0);
  CHECK(s.se == doctest::Approx(1.0 / std::sqrt(3.0)));
  CHECK(summarize({4.0}).se == 0.0);
}

TEST_CASE("metrics follow the outcome log") {
  AcquisitionPlan plan;
  plan.q_max = 3;
  plan.lambda = 2;
  plan.buckets[0] = {FeatureSet{1, 2, 3}, FeatureSet{2}};
  plan.buckets[1] = {FeatureSet{4, 5}, FeatureSet{}};
  std::vector<InferenceOutcome> log{
      {0, 0, 1, 1, 0.9, true, 2}, {1, 0, 0, 1, 0.4, false, 3}, {2, 1, 1, 1, 0.8, false, 2}, {3, 0, 0, 0, 0.7, true, 2}};
  RunMetrics m = metrics_from_log(log, plan);
  CHECK(m.accuracy == 0.75);
  CHECK(m.mean_queries == 9.0 / 4.0);
  CHECK(m.saved_fraction == doctest::Approx((1.0 / 3.0 + 1.0 / 3.0) / 4.0));
}

TEST_CASE("budget grid and sweep arguments") {
  CHECK(default_budgets(30) == std::vector<int>{3, 6, 9, 12, 15});
  CHECK(default_budgets(4) == std::vector<int>{1, 2});
  ExperimentConfig cfg = small_config();
  Dataset src = load_source(cfg);
  CHECK_THROWS_AS(sweep_budgets(cfg, src, {}), std::invalid_argument);
  CHECK_THROWS_AS(sweep_budgets(cfg, src, {2, 1}), std::invalid_argument);
  CHECK_THROWS_AS(sweep_budgets(cfg, src, {1, 1}), std::invalid_argument);
}

TEST_CASE("pipeline ablations") {
  ExperimentConfig cfg = small_config();
  Dataset src = load_source(cfg);
  SUBCASE("zero budget acquires nothing") {
    cfg.q_max = 0;
    PipelineRun run = run_single(cfg, src, 3);
    for (const auto& [code, e] : run.plan.buckets) CHECK(e.acquire.empty());
    CHECK(run.metrics.mean_queries == 0.0);
    CHECK(run.metrics.saved_fraction == 0.0);
  }
  SUBCASE("v-empty never generates") {
    cfg.ablation = Ablation::v_empty;
    PipelineRun run = run_single(cfg, src, 3);
    for (const auto& [code, e] : run.plan.buckets) CHECK(e.generate.empty());
    for (const auto& o : run.outcomes) CHECK_FALSE(o.used_generator);
  }
  SUBCASE("v-equals-u generates the whole acquisition") {
    cfg.ablation = Ablation::v_equals_u;
    PipelineRun run = run_single(cfg, src, 3);
    for (const auto& [code, e] : run.plan.buckets) CHECK(e.generate == e.acquire);
  }
  SUBCASE("random acquisition fills the budget") {
    cfg.acquisition = Acquisition::random;
    PipelineRun run = run_single(cfg, src, 3);
    for (const auto& [code, e] : run.plan.buckets) CHECK(e.acquire.size() == cfg.q_max);
  }
  SUBCASE("k-means routing") {
    cfg.clustering = Clustering::kmeans;
    PipelineRun run = run_single(cfg, src, 3);
    CHECK_FALSE(run.engine.centroids.empty());
    CHECK(run.outcomes.size() == run.test.instances.size());
  }
}

TEST_CASE("results do not depend on the worker count") {
  ExperimentConfig cfg = small_config();
  cfg.repeats = 2;
  Dataset src = load_source(cfg);
  const auto dir = std::filesystem::path(testutil::temp_path("det"));
  std::filesystem::remove_all(dir);
  cfg.jobs = 1;
  write_results(sweep_budgets(cfg, src, {1, 2}), (dir / "a").string());
  cfg.jobs = 3;
  write_results(sweep_budgets(cfg, src, {1, 2}), (dir / "b").string());
  const std::string a = slurp((dir / "a" / "runreport.csv").string());
  CHECK_FALSE(a.empty());
  CHECK(a == slurp((dir / "b" / "runreport.csv").string()));
  CHECK(slurp(run_directory((dir / "a").string(), 2, 1) + "/outcomes.csv") ==
        slurp(run_directory((dir / "b").string(), 2, 1) + "/outcomes.csv"));
}

TEST_CASE("report round trip and accounting") {
  ExperimentConfig cfg = small_config();
  cfg.repeats = 2;
  Dataset src = load_source(cfg);
  const std::string dir = testutil::temp_path("acct");
  std::filesystem::remove_all(dir);
  auto results = sweep_budgets(cfg, src, {1, 2});
  write_results(results, dir);
  RunReport report = RunReport::read_csv(dir + "/runreport.csv");
  REQUIRE(report.rows.size() == 2);
  CHECK(report.rows[0] == results[0].row);
  CHECK(report.rows[1] == results[1].row);
  for (const auto& res : results)
    for (int r = 0; r < cfg.repeats; ++r) {
      const std::string run_dir = run_directory(dir, res.row.q_max, r);
      RunMetrics m = metrics_from_log(read_outcomes(run_dir + "/outcomes.csv"), load_plan(run_dir + "/plan.txt"));
      CHECK(m.mean_queries == res.runs[static_cast<std::size_t>(r)].metrics.mean_queries);
      CHECK(m.saved_fraction == res.runs[static_cast<std::size_t>(r)].metrics.saved_fraction);
      CHECK(m.accuracy == res.runs[static_cast<std::size_t>(r)].metrics.accuracy);
    }
  CHECK(std::filesystem::exists(dir + "/series.csv"));
  CHECK(std::filesystem::exists(dir + "/timing.csv"));
}

TEST_CASE("small analysis run") {
  AnalysisSpec spec;
  spec.n = 4;
  spec.size = 12;
  spec.q_max = 1;
  spec.pretrain_epochs = 3;
  spec.retrain_epochs = 3;
  spec.proposition_K = 8;
  spec.constant_samples = 20;
  SUBCASE("zero budget flags the bound check") {
    spec.q_max = 0;
    AnalysisReport r = run_analysis(spec);
    CHECK_FALSE(r.theorem4_checked);
    REQUIRE_FALSE(r.notes.empty());
    CHECK(r.notes.front().find("degenerate") != std::string::npos);
  }
  SUBCASE("constant delta has no delta spread") {
    spec.delta_mode = DeltaMode::constant;
    AnalysisReport r = run_analysis(spec);
    CHECK(r.constants.eps_delta == 0.0);
    CHECK(r.theorem4_checked);
    CHECK(r.opt.value <= r.greedy_value);
  }
}
