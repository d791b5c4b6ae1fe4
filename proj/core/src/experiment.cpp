#include "shillab/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "shillab/errors.hpp"
#include "shillab/features.hpp"
#include "shillab/metrics.hpp"
#include "shillab/rng.hpp"
#include "shillab/surrogate.hpp"
#include "shillab/victims.hpp"

namespace shillab {

using nlohmann::json;

namespace {

constexpr const char* kItemCfName = "itemcf";
constexpr const char* kWmfName = "wmf";

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object())
    throw ParseError("config: section '" + where + "' must be an object");
  for (const auto& kv : obj.items()) {
    bool known = false;
    for (const char* a : allowed)
      if (kv.key() == a) known = true;
    if (!known)
      throw ParseError("config: unknown key '" + kv.key() + "' in " + where);
  }
}

template <typename T>
void read_into(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

void parse_dataset(const json& j, DatasetConfig& d) {
  check_keys(j, "dataset",
             {"kind", "path", "users", "items", "mean_degree",
              "popularity_skew", "rating_mean", "taste_bias", "latent_rank",
              "noise", "r_max", "seed"});
  read_into(j, "kind", d.kind);
  read_into(j, "path", d.path);
  read_into(j, "users", d.synthetic.users);
  read_into(j, "items", d.synthetic.items);
  read_into(j, "mean_degree", d.synthetic.mean_degree);
  read_into(j, "popularity_skew", d.synthetic.popularity_skew);
  read_into(j, "rating_mean", d.synthetic.rating_mean);
  read_into(j, "taste_bias", d.synthetic.taste_bias);
  read_into(j, "latent_rank", d.synthetic.latent_rank);
  read_into(j, "noise", d.synthetic.noise);
  read_into(j, "r_max", d.r_max);
  read_into(j, "seed", d.seed);
  if (d.kind != "synthetic" && d.kind != "file")
    throw ParseError("config: dataset.kind must be 'synthetic' or 'file'");
  if (d.kind == "file" && d.path.empty())
    throw ParseError("config: dataset.kind 'file' needs dataset.path");
}

void parse_attack(const json& j, ExperimentConfig& cfg) {
  check_keys(j, "attack",
             {"methods", "budgets_users", "budget_items", "epochs", "batch",
              "lr", "max_grad_norm", "mask_fraction", "dropout", "slope",
              "encoder_hidden", "edge_embed", "tau", "alpha", "edge_threshold",
              "candidate_sample_fraction", "candidate_popular_fraction",
              "surrogate_rank", "surrogate_lambda", "surrogate_epochs",
              "ip_hidden", "ip_epochs", "ip_lr", "ablation"});
  if (j.contains("methods")) {
    cfg.methods.clear();
    for (const auto& m : j.at("methods"))
      cfg.methods.push_back(attack_method_from_name(m.get<std::string>()));
  }
  read_into(j, "budgets_users", cfg.budgets_users);
  AttackConfig& a = cfg.attack;
  read_into(j, "budget_items", a.budget_items);
  read_into(j, "epochs", a.epochs);
  read_into(j, "batch", a.batch);
  read_into(j, "lr", a.lr);
  read_into(j, "max_grad_norm", a.max_grad_norm);
  read_into(j, "mask_fraction", a.mask_fraction);
  read_into(j, "dropout", a.dropout);
  read_into(j, "slope", a.slope);
  read_into(j, "encoder_hidden", a.encoder_hidden);
  read_into(j, "edge_embed", a.edge_embed);
  read_into(j, "tau", a.tau);
  read_into(j, "alpha", a.alpha);
  read_into(j, "edge_threshold", a.edge_threshold);
  read_into(j, "candidate_sample_fraction", a.candidate_sample_fraction);
  read_into(j, "candidate_popular_fraction", a.candidate_popular_fraction);
  read_into(j, "surrogate_rank", a.surrogate_rank);
  read_into(j, "surrogate_lambda", a.surrogate_lambda);
  read_into(j, "surrogate_epochs", a.surrogate_epochs);
  read_into(j, "ip_hidden", a.ip_hidden);
  read_into(j, "ip_epochs", a.ip_epochs);
  read_into(j, "ip_lr", a.ip_lr);
  if (j.contains("ablation")) {
    const json& ab = j.at("ablation");
    check_keys(ab, "attack.ablation",
               {"random_features", "random_edges", "no_influence"});
    read_into(ab, "random_features", a.ablation.random_features);
    read_into(ab, "random_edges", a.ablation.random_edges);
    read_into(ab, "no_influence", a.ablation.no_influence);
  }
}

void parse_victims(const json& j, VictimsConfig& v) {
  check_keys(j, "victims", {kItemCfName, kWmfName});
  if (j.contains(kItemCfName)) {
    const json& c = j.at(kItemCfName);
    check_keys(c, "victims.itemcf", {"enabled", "n_sim"});
    read_into(c, "enabled", v.itemcf.enabled);
    read_into(c, "n_sim", v.itemcf.n_sim);
  }
  if (j.contains(kWmfName)) {
    const json& w = j.at(kWmfName);
    check_keys(w, "victims.wmf",
               {"enabled", "rank", "alpha_conf", "lambda", "sweeps"});
    read_into(w, "enabled", v.wmf.enabled);
    read_into(w, "rank", v.wmf.rank);
    read_into(w, "alpha_conf", v.wmf.alpha_conf);
    read_into(w, "lambda", v.wmf.lambda);
    read_into(w, "sweeps", v.wmf.sweeps);
  }
}

void parse_eval(const json& j, EvalConfig& e) {
  check_keys(j, "eval",
             {"k", "targets", "random_targets", "seeds", "detect_quantile",
              "detect_components"});
  read_into(j, "k", e.k);
  read_into(j, "targets", e.targets);
  read_into(j, "random_targets", e.random_targets);
  read_into(j, "seeds", e.seeds);
  read_into(j, "detect_quantile", e.detect_quantile);
  read_into(j, "detect_components", e.detect_components);
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.methods.empty())
    throw ParseError("config: attack.methods must not be empty");
  if (cfg.budgets_users.empty())
    throw ParseError("config: attack.budgets_users must not be empty");
  for (std::size_t b : cfg.budgets_users)
    if (b == 0) throw ParseError("config: budgets_users entries must be >= 1");
  if (cfg.eval.seeds.empty())
    throw ParseError("config: eval.seeds must not be empty");
  if (cfg.eval.k == 0) throw ParseError("config: eval.k must be >= 1");
  if (!(cfg.eval.detect_quantile > 0.0) || !(cfg.eval.detect_quantile < 1.0))
    throw ParseError("config: eval.detect_quantile must be in (0, 1)");
  if (!cfg.victims.itemcf.enabled && !cfg.victims.wmf.enabled)
    throw ParseError("config: at least one victim must be enabled");
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt3(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    out += c;
  }
  out += "\"";
  return out;
}

std::string hex16(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw ParseError("cannot open " + p.string() + " for writing");
  return out;
}

std::optional<double> ratio_of(const std::optional<double>& num,
                               const std::optional<double>& den) {
  if (!num || !den) return std::nullopt;
  if (*den == 0.0) {
    if (*num == 0.0) return std::nullopt;  // 0/0 carries no signal
    return std::numeric_limits<double>::infinity();
  }
  return *num / *den;
}

json ratio_json(const std::optional<double>& r) {
  if (!r) return nullptr;
  if (std::isinf(*r)) return "inf";
  return *r;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: invalid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  try {
    check_keys(doc, "top level", {"dataset", "attack", "victims", "eval"});
    if (doc.contains("dataset")) parse_dataset(doc.at("dataset"), cfg.dataset);
    if (doc.contains("attack")) parse_attack(doc.at("attack"), cfg);
    if (doc.contains("victims")) parse_victims(doc.at("victims"), cfg.victims);
    if (doc.contains("eval")) parse_eval(doc.at("eval"), cfg.eval);
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: bad value type: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_experiment_config(buf.str());
}

std::string experiment_config_json(const ExperimentConfig& cfg) {
  json j;
  j["dataset"] = {{"kind", cfg.dataset.kind},
                  {"path", cfg.dataset.path},
                  {"users", cfg.dataset.synthetic.users},
                  {"items", cfg.dataset.synthetic.items},
                  {"mean_degree", cfg.dataset.synthetic.mean_degree},
                  {"popularity_skew", cfg.dataset.synthetic.popularity_skew},
                  {"rating_mean", cfg.dataset.synthetic.rating_mean},
                  {"taste_bias", cfg.dataset.synthetic.taste_bias},
                  {"latent_rank", cfg.dataset.synthetic.latent_rank},
                  {"noise", cfg.dataset.synthetic.noise},
                  {"r_max", cfg.dataset.r_max},
                  {"seed", cfg.dataset.seed}};
  std::vector<std::string> methods;
  for (AttackMethod m : cfg.methods) methods.push_back(attack_method_name(m));
  const AttackConfig& a = cfg.attack;
  j["attack"] = {
      {"methods", methods},
      {"budgets_users", cfg.budgets_users},
      {"budget_items", a.budget_items},
      {"epochs", a.epochs},
      {"batch", a.batch},
      {"lr", a.lr},
      {"max_grad_norm", a.max_grad_norm},
      {"mask_fraction", a.mask_fraction},
      {"dropout", a.dropout},
      {"slope", a.slope},
      {"encoder_hidden", a.encoder_hidden},
      {"edge_embed", a.edge_embed},
      {"tau", a.tau},
      {"alpha", a.alpha},
      {"edge_threshold", a.edge_threshold},
      {"candidate_sample_fraction", a.candidate_sample_fraction},
      {"candidate_popular_fraction", a.candidate_popular_fraction},
      {"surrogate_rank", a.surrogate_rank},
      {"surrogate_lambda", a.surrogate_lambda},
      {"surrogate_epochs", a.surrogate_epochs},
      {"ip_hidden", a.ip_hidden},
      {"ip_epochs", a.ip_epochs},
      {"ip_lr", a.ip_lr},
      {"ablation",
       {{"random_features", a.ablation.random_features},
        {"random_edges", a.ablation.random_edges},
        {"no_influence", a.ablation.no_influence}}}};
  j["victims"] = {{kItemCfName,
                   {{"enabled", cfg.victims.itemcf.enabled},
                    {"n_sim", cfg.victims.itemcf.n_sim}}},
                  {kWmfName,
                   {{"enabled", cfg.victims.wmf.enabled},
                    {"rank", cfg.victims.wmf.rank},
                    {"alpha_conf", cfg.victims.wmf.alpha_conf},
                    {"lambda", cfg.victims.wmf.lambda},
                    {"sweeps", cfg.victims.wmf.sweeps}}}};
  j["eval"] = {{"k", cfg.eval.k},
               {"targets", cfg.eval.targets},
               {"random_targets", cfg.eval.random_targets},
               {"seeds", cfg.eval.seeds},
               {"detect_quantile", cfg.eval.detect_quantile},
               {"detect_components", cfg.eval.detect_components}};
  return j.dump(2);
}

std::uint64_t experiment_config_hash(const ExperimentConfig& cfg) {
  return fnv1a(experiment_config_json(cfg));
}

RatingGraph make_synthetic_dataset(const SyntheticSpec& spec, double r_max,
                                   std::uint64_t seed) {
  if (spec.users == 0 || spec.items == 0)
    throw ContractError("make_synthetic_dataset: empty shape");
  if (spec.latent_rank == 0)
    throw ContractError("make_synthetic_dataset: latent_rank must be >= 1");
  if (spec.mean_degree < 2.0)
    throw ContractError("make_synthetic_dataset: mean_degree must be >= 2");
  if (r_max < 1.0)
    throw ContractError("make_synthetic_dataset: r_max must be >= 1");

  Rng rng(derive_seed(seed, "synthetic"));
  const std::size_t nu = spec.users, ni = spec.items, r = spec.latent_rank;

  // Low-rank taste structure behind the scores.
  const double f = 1.0 / std::sqrt(static_cast<double>(r));
  std::vector<double> tu(nu * r), ti(ni * r);
  for (double& v : tu) v = rng.normal(0.0, f);
  for (double& v : ti) v = rng.normal(0.0, f);

  // Long-tail popularity: Zipf weights over a shuffled item order, so the
  // head of the catalog is not the low item ids.
  std::vector<std::size_t> order(ni);
  for (std::size_t i = 0; i < ni; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<double> cum(ni);
  double total = 0.0;
  for (std::size_t j = 0; j < ni; ++j) {
    total += std::pow(static_cast<double>(j + 1), -spec.popularity_skew);
    cum[j] = total;
  }

  auto draw_item = [&]() {
    const double x = rng.uniform() * total;
    const auto it = std::lower_bound(cum.begin(), cum.end(), x);
    std::size_t j = static_cast<std::size_t>(it - cum.begin());
    if (j >= ni) j = ni - 1;
    return order[j];
  };
  auto taste = [&](std::size_t u, std::size_t i) {
    double dot = 0.0;
    for (std::size_t c = 0; c < r; ++c) dot += tu[u * r + c] * ti[i * r + c];
    return dot;
  };
  auto score = [&](std::size_t u, std::size_t i) {
    const double raw = spec.rating_mean + taste(u, i) + rng.normal(0.0, spec.noise);
    return std::clamp(std::floor(raw + 0.5), 1.0, r_max);
  };
  // Selection bias: users are more likely to rate items they expect to
  // like, which is what couples the binary rating pattern to taste.
  auto keeps = [&](std::size_t u, std::size_t i) {
    if (spec.taste_bias <= 0.0) return true;
    const double p = 1.0 / (1.0 + std::exp(-spec.taste_bias * taste(u, i)));
    return rng.uniform() < p;
  };

  std::vector<Rating> ratings;
  std::vector<std::vector<char>> seen(nu);
  for (auto& s : seen) s.assign(ni, 0);
  for (std::size_t u = 0; u < nu; ++u) {
    // Exponential tail around the mean keeps most histories short.
    const double stretch = -(spec.mean_degree - 2.0) *
                           std::log(1.0 - rng.uniform());
    std::size_t deg = 2 + static_cast<std::size_t>(std::floor(stretch));
    if (deg > ni) deg = ni;
    std::size_t placed = 0, attempts = 0;
    while (placed < deg && attempts < 200 * deg) {
      ++attempts;
      const std::size_t i = draw_item();
      if (seen[u][i]) continue;
      if (!keeps(u, i)) continue;
      seen[u][i] = 1;
      ratings.push_back({u, i, score(u, i)});
      ++placed;
    }
  }

  // Every item gets at least one rating so catalog-wide statistics exist.
  std::vector<char> rated(ni, 0);
  for (const Rating& rt : ratings) rated[rt.item] = 1;
  for (std::size_t i = 0; i < ni; ++i) {
    if (rated[i]) continue;
    const std::size_t u = rng.uniform_int(nu);
    if (seen[u][i]) continue;
    seen[u][i] = 1;
    ratings.push_back({u, i, score(u, i)});
  }

  return RatingGraph::from_ratings(nu, ni, std::move(ratings), r_max);
}

RatingGraph load_dataset(const DatasetConfig& cfg) {
  if (cfg.kind == "file") {
    RatingScale scale;
    scale.r_max = cfg.r_max;
    return load_ratings(cfg.path, scale);
  }
  return make_synthetic_dataset(cfg.synthetic, cfg.r_max, cfg.seed);
}

bool ExperimentReport::any_error() const { return error_count() > 0; }

std::size_t ExperimentReport::error_count() const {
  std::size_t n = 0;
  for (const CellResult& c : cells)
    if (!c.error.empty()) ++n;
  return n;
}

std::optional<double> ExperimentReport::mean_hr_after(
    const std::string& victim, const std::string& method,
    std::size_t budget_users) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const CellResult& c : cells) {
    if (c.victim != victim || c.method != method ||
        c.budget_users != budget_users || !c.error.empty())
      continue;
    sum += c.hr_after;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

std::optional<double> ExperimentReport::mean_hr_before(
    const std::string& victim) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const CellResult& c : cells) {
    if (c.victim != victim) continue;
    sum += c.hr_before;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

RatioSummary victim_ratios(const ExperimentReport& rep,
                           const std::string& victim) {
  const std::string attack_name = attack_method_name(AttackMethod::kNodegen);
  std::size_t multi = 0;
  for (std::size_t b : rep.budgets_users)
    if (b > 1 && b > multi) multi = b;
  const bool has_single =
      std::find(rep.budgets_users.begin(), rep.budgets_users.end(),
                std::size_t{1}) != rep.budgets_users.end();

  auto best_baseline = [&](std::size_t budget) -> std::optional<double> {
    std::optional<double> best;
    for (const std::string& m : rep.methods) {
      if (m == attack_name) continue;
      auto v = rep.mean_hr_after(victim, m, budget);
      if (v && (!best || *v > *best)) best = v;
    }
    return best;
  };

  RatioSummary out;
  std::optional<double> s, mu, bs, bm;
  if (has_single) {
    s = rep.mean_hr_after(victim, attack_name, 1);
    bs = best_baseline(1);
  }
  if (multi > 0) {
    mu = rep.mean_hr_after(victim, attack_name, multi);
    bm = best_baseline(multi);
  }
  out.ratio1 = ratio_of(s, bm);
  out.ratio2 = ratio_of(s, bs);
  out.ratio3 = ratio_of(s, mu);
  out.ratio4 = ratio_of(mu, bm);
  return out;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  validate(cfg);
  RatingGraph g = load_dataset(cfg.dataset);
  const std::size_t n_real = g.num_users();

  std::vector<std::size_t> targets = cfg.eval.targets;
  for (std::size_t t : targets)
    if (t >= g.num_items())
      throw LookupError("run_experiment: target out of range");
  if (targets.empty() && cfg.eval.random_targets > 0) {
    Rng tr(derive_seed(cfg.dataset.seed, "targets"));
    targets = tr.sample_without_replacement(g.num_items(),
                                            cfg.eval.random_targets);
  }
  if (targets.empty())
    throw ContractError("run_experiment: no targets configured");

  ExperimentReport rep;
  rep.config_hash = experiment_config_hash(cfg);
  rep.targets = targets;
  rep.seeds = cfg.eval.seeds;
  rep.budgets_users = cfg.budgets_users;
  for (AttackMethod m : cfg.methods)
    rep.methods.push_back(attack_method_name(m));
  if (cfg.victims.itemcf.enabled) rep.victims.push_back(kItemCfName);
  if (cfg.victims.wmf.enabled) rep.victims.push_back(kWmfName);

  // Clean baselines: one trained victim and one HR@k per (victim, target).
  const std::uint64_t wmf_seed = derive_seed(cfg.dataset.seed, "victim-wmf");
  std::vector<std::vector<double>> hr_before(rep.victims.size());
  for (std::size_t vi = 0; vi < rep.victims.size(); ++vi) {
    std::vector<std::vector<std::size_t>> recs(n_real);
    if (rep.victims[vi] == kItemCfName) {
      ItemCFModel m = train_itemcf(g, cfg.victims.itemcf.n_sim);
      for (std::size_t u = 0; u < n_real; ++u)
        recs[u] = recommend_topk(m, g, u, cfg.eval.k);
    } else {
      WMFModel m = train_wmf(g, cfg.victims.wmf.rank,
                             cfg.victims.wmf.alpha_conf, cfg.victims.wmf.lambda,
                             cfg.victims.wmf.sweeps, wmf_seed);
      for (std::size_t u = 0; u < n_real; ++u)
        recs[u] = recommend_topk(m, g, u, cfg.eval.k);
    }
    for (std::size_t t : targets)
      hr_before[vi].push_back(hit_ratio(recs, t, cfg.eval.k));
  }

  // Detector normalization comes from the clean population only.
  const std::uint64_t fseed = derive_seed(cfg.dataset.seed, "detect-features");
  NormParams nparams = normalize_features(user_feature_matrix(g, fseed)).second;

  for (std::size_t ti = 0; ti < targets.size(); ++ti) {
    for (AttackMethod method : cfg.methods) {
      const std::string mname = attack_method_name(method);
      for (std::size_t budget : cfg.budgets_users) {
        for (std::uint64_t seed : cfg.eval.seeds) {
          CellResult base;
          base.target = targets[ti];
          base.method = mname;
          base.budget_users = budget;
          base.seed = seed;

          // Profile generation and detection are victim independent; one
          // failure here marks every victim's cell.
          std::vector<FakeProfile> profiles;
          RatingGraph g2 = g;
          double precision = 0.0, recall = 0.0;
          std::string gen_error;
          try {
            AttackConfig ac = cfg.attack;
            ac.method = method;
            ac.target = targets[ti];
            ac.budget_users = budget;
            std::ostringstream tag;
            tag << "cell-t" << targets[ti] << "-" << mname << "-b" << budget;
            ac.seed = derive_seed(seed, tag.str());
            profiles = generate_profiles(g, ac);
            for (const FakeProfile& p : profiles)
              g2 = g2.inject_profile(p);

            num::Tensor post = normalize_features_with(
                user_feature_matrix(g2, fseed), nparams);
            auto flagged = detect_outliers(post, cfg.eval.detect_quantile,
                                           cfg.eval.detect_components);
            std::vector<std::size_t> fakes;
            for (std::size_t p = 0; p < profiles.size(); ++p)
              fakes.push_back(n_real + p);
            DetectionMetrics det = detection_metrics(flagged, fakes);
            precision = det.precision;
            recall = det.recall;
          } catch (const Error& e) {
            gen_error = e.what();
          }

          for (std::size_t vi = 0; vi < rep.victims.size(); ++vi) {
            CellResult cell = base;
            cell.victim = rep.victims[vi];
            cell.hr_before = hr_before[vi][ti];
            if (!gen_error.empty()) {
              cell.error = gen_error;
              rep.cells.push_back(cell);
              continue;
            }
            try {
              std::vector<std::vector<std::size_t>> recs(n_real);
              if (rep.victims[vi] == kItemCfName) {
                ItemCFModel m = train_itemcf(g2, cfg.victims.itemcf.n_sim);
                for (std::size_t u = 0; u < n_real; ++u)
                  recs[u] = recommend_topk(m, g2, u, cfg.eval.k);
              } else {
                WMFModel m =
                    train_wmf(g2, cfg.victims.wmf.rank,
                              cfg.victims.wmf.alpha_conf,
                              cfg.victims.wmf.lambda, cfg.victims.wmf.sweeps,
                              wmf_seed);
                for (std::size_t u = 0; u < n_real; ++u)
                  recs[u] = recommend_topk(m, g2, u, cfg.eval.k);
              }
              cell.hr_after = hit_ratio(recs, targets[ti], cfg.eval.k);
              cell.precision = precision;
              cell.recall = recall;
            } catch (const Error& e) {
              cell.error = e.what();
            }
            rep.cells.push_back(cell);
          }
        }
      }
    }
  }

  rep.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return rep;
}

void write_report(const ExperimentReport& rep, const ExperimentConfig& cfg,
                  const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::path dir(out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ParseError("cannot create report directory " + out_dir);

  {
    auto out = open_out(dir / "cells.csv");
    out << "target,victim,method,budget_users,seed,hr_before,hr_after,"
           "precision,recall,error\n";
    for (const CellResult& c : rep.cells) {
      out << c.target << ',' << c.victim << ',' << c.method << ','
          << c.budget_users << ',' << c.seed << ',' << fmt_double(c.hr_before)
          << ',' << fmt_double(c.hr_after) << ',' << fmt_double(c.precision)
          << ',' << fmt_double(c.recall) << ',' << csv_quote(c.error) << '\n';
    }
  }

  {
    json j;
    j["config_hash"] = hex16(rep.config_hash);
    j["targets"] = rep.targets;
    j["seeds"] = rep.seeds;
    j["budgets_users"] = rep.budgets_users;
    j["victims"] = rep.victims;
    j["methods"] = rep.methods;
    j["cells"] = rep.cells.size();
    j["errors"] = rep.error_count();
    json slices = json::array();
    for (const std::string& v : rep.victims) {
      for (const std::string& m : rep.methods) {
        for (std::size_t b : rep.budgets_users) {
          json s;
          s["victim"] = v;
          s["method"] = m;
          s["budget_users"] = b;
          auto hr = rep.mean_hr_after(v, m, b);
          s["mean_hr_after"] = hr ? json(*hr) : json(nullptr);
          double psum = 0.0, rsum = 0.0;
          std::size_t n = 0;
          for (const CellResult& c : rep.cells) {
            if (c.victim != v || c.method != m || c.budget_users != b ||
                !c.error.empty())
              continue;
            psum += c.precision;
            rsum += c.recall;
            ++n;
          }
          s["mean_precision"] = n ? json(psum / n) : json(nullptr);
          s["mean_recall"] = n ? json(rsum / n) : json(nullptr);
          slices.push_back(s);
        }
      }
    }
    j["slices"] = slices;
    json before;
    for (const std::string& v : rep.victims) {
      auto hb = rep.mean_hr_before(v);
      before[v] = hb ? json(*hb) : json(nullptr);
    }
    j["hr_before"] = before;
    json ratios;
    for (const std::string& v : rep.victims) {
      RatioSummary r = victim_ratios(rep, v);
      ratios[v] = {{"ratio1", ratio_json(r.ratio1)},
                   {"ratio2", ratio_json(r.ratio2)},
                   {"ratio3", ratio_json(r.ratio3)},
                   {"ratio4", ratio_json(r.ratio4)}};
    }
    j["ratios"] = ratios;
    auto out = open_out(dir / "summary.json");
    out << j.dump(2) << '\n';
  }

  {
    auto out = open_out(dir / "table.txt");
    out << "# hit ratio @" << cfg.eval.k
        << ", mean over targets x seeds; cells joined by / across user "
           "budgets ";
    for (std::size_t i = 0; i < rep.budgets_users.size(); ++i)
      out << (i ? "/" : "") << rep.budgets_users[i];
    out << "\n";
    auto fmt_cell = [&](const std::string& v, const std::string& m) {
      std::string s;
      for (std::size_t i = 0; i < rep.budgets_users.size(); ++i) {
        auto hr = rep.mean_hr_after(v, m, rep.budgets_users[i]);
        if (i) s += "/";
        s += hr ? fmt3(*hr) : "n/a";
      }
      return s;
    };
    for (const std::string& v : rep.victims) {
      auto hb = rep.mean_hr_before(v);
      out << "\nvictim " << v << " (clean hr "
          << (hb ? fmt3(*hb) : std::string("n/a")) << ")\n";
      for (const std::string& m : rep.methods) {
        out << "  " << m << std::string(m.size() < 12 ? 12 - m.size() : 1, ' ')
            << fmt_cell(v, m) << "\n";
      }
      RatioSummary r = victim_ratios(rep, v);
      auto fr = [&](const std::optional<double>& x) {
        return x ? fmt3(*x) : std::string("n/a");
      };
      out << "  ratios      1: " << fr(r.ratio1) << "  2: " << fr(r.ratio2)
          << "  3: " << fr(r.ratio3) << "  4: " << fr(r.ratio4) << "\n";
    }
  }

  {
    auto out = open_out(dir / "timing.txt");
    char buf[64];
    std::snprintf(buf, sizeof(buf), "wall_clock_seconds %.3f\n",
                  rep.wall_clock_seconds);
    out << buf;
  }
}

void write_embeddings_csv(const std::string& path, const RatingGraph& graph,
                          std::size_t n_real, std::size_t rank, double lambda,
                          std::size_t epochs, std::uint64_t seed) {
  if (n_real > graph.num_users())
    throw ContractError("write_embeddings_csv: n_real exceeds user count");
  Rng rng(derive_seed(seed, "embeddings"));
  SurrogateMF m = train_surrogate(graph, rank, lambda, epochs, rng);
  auto out = open_out(path);
  out << "user,fake";
  for (std::size_t c = 0; c < rank; ++c) out << ",f" << c;
  out << "\n";
  for (std::size_t u = 0; u < graph.num_users(); ++u) {
    out << u << ',' << (u >= n_real ? 1 : 0);
    for (std::size_t c = 0; c < rank; ++c)
      out << ',' << fmt_double(m.user_factors(u, c));
    out << "\n";
  }
}

}  // namespace shillab
