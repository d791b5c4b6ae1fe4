#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "shillab/attack.hpp"
#include "shillab/rating_graph.hpp"

namespace shillab {

// Synthetic review-style dataset: a long-tail item popularity profile, a
// low-rank taste structure behind the scores, and short user histories.
struct SyntheticSpec {
  std::size_t users = 2928;
  std::size_t items = 1835;
  double mean_degree = 7.0;       // average ratings per user
  double popularity_skew = 0.8;   // Zipf exponent over items
  double rating_mean = 3.5;       // center of the score distribution
  double taste_bias = 0.0;        // selection bias: users favor items they like
  std::size_t latent_rank = 4;
  double noise = 0.6;             // rating noise std before rounding
};

struct DatasetConfig {
  std::string kind = "synthetic";  // "synthetic" or "file"
  std::string path;                // for kind "file"
  SyntheticSpec synthetic;
  double r_max = 5.0;
  std::uint64_t seed = 1;
};

struct ItemCfConfig {
  bool enabled = true;
  std::size_t n_sim = 20;
};

struct WmfConfig {
  bool enabled = true;
  std::size_t rank = 32;
  double alpha_conf = 40.0;
  double lambda = 0.1;
  std::size_t sweeps = 15;
};

struct VictimsConfig {
  ItemCfConfig itemcf;
  WmfConfig wmf;
};

struct EvalConfig {
  std::size_t k = 50;
  std::vector<std::size_t> targets;  // explicit target items
  std::size_t random_targets = 0;    // drawn from the dataset seed when set
  std::vector<std::uint64_t> seeds{1};
  double detect_quantile = 0.95;
  std::size_t detect_components = 3;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  AttackConfig attack;  // method/target/budget_users/seed are filled per cell
  std::vector<AttackMethod> methods{AttackMethod::kNodegen,
                                    AttackMethod::kRandom,
                                    AttackMethod::kBandwagon,
                                    AttackMethod::kSegment};
  std::vector<std::size_t> budgets_users{1};
  VictimsConfig victims;
  EvalConfig eval;
};

// Strict parse: unknown keys anywhere in the document are rejected.
ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);
// Canonical serialization (sorted keys); hashing and reports go through it.
std::string experiment_config_json(const ExperimentConfig& cfg);
std::uint64_t experiment_config_hash(const ExperimentConfig& cfg);

RatingGraph make_synthetic_dataset(const SyntheticSpec& spec, double r_max,
                                   std::uint64_t seed);
RatingGraph load_dataset(const DatasetConfig& cfg);

// One (target, victim, method, budget, seed) evaluation. A failed stage
// leaves `error` nonempty and the numeric fields at zero.
struct CellResult {
  std::size_t target = 0;
  std::string victim;
  std::string method;
  std::size_t budget_users = 1;
  std::uint64_t seed = 0;
  double hr_before = 0.0;
  double hr_after = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::string error;
};

struct ExperimentReport {
  std::uint64_t config_hash = 0;
  std::vector<std::size_t> targets;
  std::vector<std::uint64_t> seeds;
  std::vector<std::size_t> budgets_users;
  std::vector<std::string> victims;
  std::vector<std::string> methods;
  std::vector<CellResult> cells;
  double wall_clock_seconds = 0.0;  // reported separately, never in the body

  bool any_error() const;
  std::size_t error_count() const;
  // Mean over successful cells of that slice; empty slice yields nullopt.
  std::optional<double> mean_hr_after(const std::string& victim,
                                      const std::string& method,
                                      std::size_t budget_users) const;
  std::optional<double> mean_hr_before(const std::string& victim) const;
};

// Four summary ratios per victim, all built from mean HR@k values:
//   1. attack single-profile over the best baseline's multi-profile
//   2. attack single-profile over the best baseline's single-profile
//   3. attack single-profile over attack multi-profile
//   4. attack multi-profile over the best baseline's multi-profile
// "single" is budget 1, "multi" the largest configured budget above 1;
// a ratio is nullopt when either side is unavailable.
struct RatioSummary {
  std::optional<double> ratio1, ratio2, ratio3, ratio4;
};
RatioSummary victim_ratios(const ExperimentReport& rep,
                           const std::string& victim);

ExperimentReport run_experiment(const ExperimentConfig& cfg);

// Writes cells.csv, summary.json and table.txt (byte-determined by
// config+seeds) plus timing.txt with the wall clock.
void write_report(const ExperimentReport& rep, const ExperimentConfig& cfg,
                  const std::string& out_dir);

// Post-injection factor dump for external visualization: one row per user
// with id, fake flag and the surrogate user factors.
void write_embeddings_csv(const std::string& path, const RatingGraph& graph,
                          std::size_t n_real, std::size_t rank, double lambda,
                          std::size_t epochs, std::uint64_t seed);

}  // namespace shillab
