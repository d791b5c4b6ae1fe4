#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "shillab/attack.hpp"
#include "shillab/errors.hpp"
#include "shillab/experiment.hpp"
#include "shillab/features.hpp"
#include "shillab/metrics.hpp"
#include "shillab/rng.hpp"

namespace {

using namespace shillab;
using nlohmann::json;

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string target_spec;
  std::optional<std::size_t> budget_users;
  std::optional<std::size_t> budget_items;
  std::string out_dir = "out";
  std::string method = "nodegen";
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_target) {
  cmd->add_option("--config", f.config_path, "JSON config file");
  cmd->add_option("--seed", f.seed, "override the evaluation seed list");
  if (with_target)
    cmd->add_option("--target", f.target_spec,
                    "target item: an id or random:N");
  cmd->add_option("--budget-users", f.budget_users,
                  "number of injected profiles");
  cmd->add_option("--budget-items", f.budget_items, "profile size cap");
  cmd->add_option("--out", f.out_dir, "output directory");
}

ExperimentConfig resolve_config(const CommonFlags& f) {
  ExperimentConfig cfg;
  if (!f.config_path.empty()) cfg = load_experiment_config(f.config_path);
  if (f.seed) cfg.eval.seeds = {*f.seed};
  if (f.budget_users) cfg.budgets_users = {*f.budget_users};
  if (f.budget_items) cfg.attack.budget_items = *f.budget_items;
  if (!f.target_spec.empty()) {
    if (f.target_spec.rfind("random:", 0) == 0) {
      cfg.eval.targets.clear();
      cfg.eval.random_targets =
          static_cast<std::size_t>(std::stoull(f.target_spec.substr(7)));
    } else {
      cfg.eval.targets = {
          static_cast<std::size_t>(std::stoull(f.target_spec))};
      cfg.eval.random_targets = 0;
    }
  }
  return cfg;
}

std::vector<std::size_t> resolve_targets(const ExperimentConfig& cfg,
                                         const RatingGraph& g) {
  std::vector<std::size_t> targets = cfg.eval.targets;
  for (std::size_t t : targets)
    if (t >= g.num_items()) throw LookupError("target out of range");
  if (targets.empty() && cfg.eval.random_targets > 0) {
    Rng tr(derive_seed(cfg.dataset.seed, "targets"));
    targets =
        tr.sample_without_replacement(g.num_items(), cfg.eval.random_targets);
  }
  if (targets.empty()) throw ContractError("no target configured");
  return targets;
}

std::filesystem::path ensure_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) throw ParseError("cannot create output directory " + dir);
  return p;
}

int cmd_ingest(const CommonFlags& f) {
  ExperimentConfig cfg = resolve_config(f);
  RatingGraph g = load_dataset(cfg.dataset);
  std::cout << g.stats().table();
  return 0;
}

int cmd_features(const CommonFlags& f) {
  ExperimentConfig cfg = resolve_config(f);
  RatingGraph g = load_dataset(cfg.dataset);
  const std::uint64_t fseed = derive_seed(cfg.dataset.seed, "detect-features");
  auto dir = ensure_dir(f.out_dir);
  num::Tensor users = user_feature_matrix(g, fseed);
  num::Tensor items = item_feature_matrix(g, fseed);
  write_features_csv((dir / "user_features.csv").string(), users);
  write_features_csv((dir / "item_features.csv").string(), items);
  write_features_csv((dir / "user_features_norm.csv").string(),
                     normalize_features(users).first);
  std::cout << "wrote feature tables to " << dir.string() << "\n";
  return 0;
}

int cmd_attack(const CommonFlags& f) {
  ExperimentConfig cfg = resolve_config(f);
  RatingGraph g = load_dataset(cfg.dataset);
  auto targets = resolve_targets(cfg, g);
  auto dir = ensure_dir(f.out_dir);
  const std::uint64_t seed = cfg.eval.seeds.front();
  for (std::size_t t : targets) {
    AttackConfig ac = cfg.attack;
    ac.method = attack_method_from_name(f.method);
    ac.target = t;
    ac.budget_users = cfg.budgets_users.front();
    ac.seed = derive_seed(seed, "cli-attack", t);
    auto profiles = generate_profiles(g, ac);
    auto path = dir / ("profiles_t" + std::to_string(t) + ".txt");
    write_profiles(path.string(), profiles, ac);
    std::cout << "target " << t << ": " << profiles.size()
              << " profile(s) -> " << path.string() << "\n";
  }
  return 0;
}

int cmd_evaluate(const CommonFlags& f) {
  ExperimentConfig cfg = resolve_config(f);
  ExperimentReport rep = run_experiment(cfg);
  write_report(rep, cfg, f.out_dir);
  std::ifstream table(std::filesystem::path(f.out_dir) / "table.txt");
  std::cout << table.rdbuf();
  if (rep.any_error()) {
    std::cerr << rep.error_count() << " cell(s) failed; see cells.csv\n";
    return 1;
  }
  return 0;
}

int cmd_detect(const CommonFlags& f) {
  ExperimentConfig cfg = resolve_config(f);
  RatingGraph g = load_dataset(cfg.dataset);
  auto targets = resolve_targets(cfg, g);
  auto dir = ensure_dir(f.out_dir);
  const std::size_t n_real = g.num_users();
  const std::uint64_t seed = cfg.eval.seeds.front();
  const std::uint64_t fseed = derive_seed(cfg.dataset.seed, "detect-features");
  NormParams nparams =
      normalize_features(user_feature_matrix(g, fseed)).second;

  json out = json::array();
  for (std::size_t t : targets) {
    AttackConfig ac = cfg.attack;
    ac.method = attack_method_from_name(f.method);
    ac.target = t;
    ac.budget_users = cfg.budgets_users.front();
    ac.seed = derive_seed(seed, "cli-attack", t);
    auto profiles = generate_profiles(g, ac);
    RatingGraph g2 = g;
    for (const FakeProfile& p : profiles) g2 = g2.inject_profile(p);

    num::Tensor post =
        normalize_features_with(user_feature_matrix(g2, fseed), nparams);
    auto flagged = detect_outliers(post, cfg.eval.detect_quantile,
                                   cfg.eval.detect_components);
    std::vector<std::size_t> fakes;
    for (std::size_t p = 0; p < profiles.size(); ++p)
      fakes.push_back(n_real + p);
    DetectionMetrics det = detection_metrics(flagged, fakes);

    json row;
    row["target"] = t;
    row["method"] = f.method;
    row["budget_users"] = profiles.size();
    row["flagged"] = flagged;
    row["precision"] = det.precision;
    row["recall"] = det.recall;
    out.push_back(row);

    write_embeddings_csv(
        (dir / ("embeddings_t" + std::to_string(t) + ".csv")).string(), g2,
        n_real, cfg.attack.surrogate_rank, cfg.attack.surrogate_lambda,
        cfg.attack.surrogate_epochs, derive_seed(seed, "cli-embed", t));
  }
  std::ofstream js(dir / "detection.json");
  js << out.dump(2) << "\n";
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_ablate(const CommonFlags& f) {
  ExperimentConfig base = resolve_config(f);
  base.methods = {AttackMethod::kNodegen};
  struct Variant {
    const char* name;
    AblationFlags flags;
  };
  const Variant variants[] = {
      {"full", {}},
      {"random_features", {true, false, false}},
      {"random_edges", {false, true, false}},
      {"no_influence", {false, false, true}},
  };
  auto dir = ensure_dir(f.out_dir);
  json summary;
  int rc = 0;
  for (const Variant& v : variants) {
    ExperimentConfig cfg = base;
    cfg.attack.ablation = v.flags;
    ExperimentReport rep = run_experiment(cfg);
    write_report(rep, cfg, (dir / v.name).string());
    json per;
    for (const std::string& vic : rep.victims) {
      for (std::size_t b : rep.budgets_users) {
        auto hr = rep.mean_hr_after(vic, "nodegen", b);
        per[vic]["b" + std::to_string(b)] = hr ? json(*hr) : json(nullptr);
      }
    }
    summary[v.name] = per;
    if (rep.any_error()) rc = 1;
  }
  std::ofstream js(dir / "ablate.json");
  js << summary.dump(2) << "\n";
  std::cout << summary.dump(2) << "\n";
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adversarial robustness lab for recommender systems"};
  app.require_subcommand(1);

  CommonFlags fi, ff, fa, fe, fd, fb;
  CLI::App* ingest = app.add_subcommand("ingest", "dataset stats");
  add_common(ingest, fi, false);
  CLI::App* features = app.add_subcommand("features", "dump feature tables");
  add_common(features, ff, false);
  CLI::App* attack = app.add_subcommand("attack", "emit fake profiles");
  add_common(attack, fa, true);
  attack->add_option("--method", fa.method,
                     "nodegen, random, bandwagon or segment");
  CLI::App* evaluate = app.add_subcommand("evaluate", "full experiment grid");
  add_common(evaluate, fe, true);
  CLI::App* detect = app.add_subcommand("detect", "detection study");
  add_common(detect, fd, true);
  detect->add_option("--method", fd.method,
                     "nodegen, random, bandwagon or segment");
  CLI::App* ablate = app.add_subcommand("ablate", "attack variant comparison");
  add_common(ablate, fb, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (ingest->parsed()) return cmd_ingest(fi);
    if (features->parsed()) return cmd_features(ff);
    if (attack->parsed()) return cmd_attack(fa);
    if (evaluate->parsed()) return cmd_evaluate(fe);
    if (detect->parsed()) return cmd_detect(fd);
    if (ablate->parsed()) return cmd_ablate(fb);
  } catch (const shillab::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
