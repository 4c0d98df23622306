#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <string>
#include <vector>

#include "hybridloss/experiments.hpp"

using namespace hybrid;

namespace {

std::string temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "hybridloss_exp_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace

TEST_CASE("the test gate refuses early access") {
  TestGate<std::vector<int>> gate(std::vector<int>{1, 2, 3});
  CHECK_THROWS_AS(gate.get(), std::logic_error);
  gate.unlock();
  CHECK(gate.get().size() == 3);
}

TEST_CASE("nondominant sweep: log and hybrid track the top label") {
  NondominantSweepConfig config;
  config.k_min = 3;
  config.k_max = 4;
  config.sample_count = 2000;
  config.seed = 123;
  const std::vector<NondominantRow> rows = run_nondominant_sweep(config);
  REQUIRE(rows.size() == 6);
  for (const NondominantRow& row : rows) {
    if (row.loss == LossKind::kLog || row.loss == LossKind::kHybrid)
      CHECK(row.train_error == Catch::Approx(0.54).margin(0.04));
  }
}

TEST_CASE("nondominant sweep writes its pinned CSV header") {
  NondominantSweepConfig config;
  config.k_min = 3;
  config.k_max = 3;
  config.sample_count = 500;
  config.seed = 5;
  config.losses = {LossKind::kLog};
  config.output_dir = temp_dir("sweep");
  run_nondominant_sweep(config);
  const std::string content = read_file(config.output_dir + "/nondominant.csv");
  CHECK(content.rfind("k,loss,alpha,train_error,seed\n", 0) == 0);
}

TEST_CASE("mixed grid on a tiny configuration is deterministic") {
  MixedGridConfig config;
  config.rho_grid = {0.5, 1.0};
  config.m_grid = {30, 60};
  config.lambda_grid = {1e-2, 1e-1};
  config.alpha_grid = {0.3, 0.7};
  config.base.feature_dim = 10;
  config.base.eval_size = 80;
  config.training.max_iterations = 80;
  config.training.gradient_tolerance = 1e-5;
  config.seed = 77;
  config.threads = 2;
  const std::string dir_a = temp_dir("mixed_a");
  const std::string dir_b = temp_dir("mixed_b");
  config.output_dir = dir_a;
  const MixedGridResult a = run_mixed_grid(config);
  config.output_dir = dir_b;
  config.threads = 1;  // thread count must not change results
  const MixedGridResult b = run_mixed_grid(config);

  REQUIRE(a.cells.size() == b.cells.size());
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    CHECK(a.cells[i].test_accuracy == b.cells[i].test_accuracy);
    CHECK(a.cells[i].lambda == b.cells[i].lambda);
    CHECK(a.cells[i].alpha == b.cells[i].alpha);
  }
  // byte-identical CSVs across the two runs
  CHECK(read_file(dir_a + "/mixed_cells.csv") == read_file(dir_b + "/mixed_cells.csv"));
  CHECK(read_file(dir_a + "/mixed_summary.csv") == read_file(dir_b + "/mixed_summary.csv"));
}

TEST_CASE("mixed grid summary counts wins and losses without ties") {
  MixedGridConfig config;
  config.rho_grid = {1.0};
  config.m_grid = {40};
  config.lambda_grid = {1e-2};
  config.alpha_grid = {0.5};
  config.base.feature_dim = 6;
  config.base.eval_size = 50;
  config.training.max_iterations = 60;
  config.seed = 3;
  const MixedGridResult result = run_mixed_grid(config);
  REQUIRE(result.summary.size() == 3);
  CHECK(result.summary[0].pair == "hybrid_vs_hinge");
  CHECK(result.summary[1].pair == "hybrid_vs_log");
  CHECK(result.summary[2].pair == "hinge_vs_log");
  for (const PairSummary& pair : result.summary)
    CHECK(pair.wins + pair.losses <= result.cells.size() / 3);
}

TEST_CASE("chunking pipeline produces rows, profiles and files") {
  ChunkingConfig config;
  config.corpus.sentence_count = 120;
  config.corpus.ambiguity_rate = 0.4;
  config.corpus.min_length = 4;
  config.corpus.max_length = 8;
  config.lambda_grid = {1e-2};
  config.alpha_grid = {0.5};
  config.training.max_iterations = 120;
  config.training.gradient_tolerance = 1e-4;
  config.seed = 9;
  config.output_dir = temp_dir("chunk");
  const ChunkingResult result = run_chunking(config);
  REQUIRE(result.rows.size() == config.portions.size() * config.losses.size());
  for (const ChunkingRow& row : result.rows) {
    CHECK(row.eval.f1 >= 0.0);
    CHECK(row.eval.f1 <= 1.0);
  }
  CHECK(result.true_model_profile.points.size() == 48);  // 40% of 120
  const std::string metrics = read_file(config.output_dir + "/metrics_seed9.csv");
  CHECK(metrics.rfind("portion,loss,accuracy,precision,recall,f1\n", 0) == 0);
  const std::string dominance =
      read_file(config.output_dir + "/dominance_true_seed9.csv");
  CHECK(dominance.rfind("index,gold_prob,viterbi_prob\n", 0) == 0);

  // dominance columns are independently ascending
  std::istringstream lines(dominance);
  std::string line;
  std::getline(lines, line);  // header
  double last_gold = -1.0, last_viterbi = -1.0;
  while (std::getline(lines, line)) {
    const auto first_comma = line.find(',');
    const auto second_comma = line.find(',', first_comma + 1);
    const double gold = std::stod(line.substr(first_comma + 1, second_comma - first_comma));
    const double viterbi_p = std::stod(line.substr(second_comma + 1));
    CHECK(gold >= last_gold);
    CHECK(viterbi_p >= last_viterbi);
    last_gold = gold;
    last_viterbi = viterbi_p;
  }
}

TEST_CASE("chunking is deterministic given config and seed") {
  ChunkingConfig config;
  config.corpus.sentence_count = 60;
  config.corpus.min_length = 4;
  config.corpus.max_length = 7;
  config.corpus.ambiguity_rate = 0.3;
  config.lambda_grid = {1e-2};
  config.alpha_grid = {0.4};
  config.losses = {LossKind::kLog, LossKind::kHybrid};
  config.training.max_iterations = 60;
  config.training.gradient_tolerance = 1e-4;
  config.seed = 21;
  const ChunkingResult a = run_chunking(config);
  const ChunkingResult b = run_chunking(config);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].eval.f1 == b.rows[i].eval.f1);
    CHECK(a.rows[i].lambda == b.rows[i].lambda);
  }
}

TEST_CASE("consistency check aligns everything above the threshold") {
  ConsistencyCheckConfig config;
  config.k_values = {3};
  config.sufficiency_draws = 8;
  config.hinge_draws = 8;
  config.resolution = 60;
  config.seed = 31;
  config.output_dir = temp_dir("consistency");
  const ConsistencyCheckResult result = run_consistency_check(config);
  CHECK(result.sufficiency_aligned == result.sufficiency_total);
  CHECK(result.hinge_misaligned == result.hinge_total);
  const std::string csv = read_file(config.output_dir + "/sufficiency.csv");
  CHECK(csv.rfind("draw,k,alpha,threshold,aligned\n", 0) == 0);
}
