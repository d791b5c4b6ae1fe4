#include "shillab/attack.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "shillab/edgegen.hpp"
#include "shillab/errors.hpp"
#include "shillab/features.hpp"
#include "shillab/influence.hpp"
#include "shillab/optim.hpp"

namespace shillab {

using num::Tape;
using num::Tensor;
using num::Var;

namespace {

Tensor identity_scaled(std::size_t k, double s) {
  Tensor t(k, k);
  for (std::size_t i = 0; i < k; ++i) t(i, i) = s;
  return t;
}

Tensor pick_rows(const Tensor& x, const std::vector<std::size_t>& rows) {
  Tensor out(rows.size(), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = x(rows[r], c);
  }
  return out;
}

double rating_stddev(const RatingGraph& g) {
  const double mean = g.global_mean();
  double acc = 0.0;
  for (const Rating& r : g.ratings()) {
    acc += (r.value - mean) * (r.value - mean);
  }
  const std::size_t n = g.num_ratings();
  return n == 0 ? 0.0 : std::sqrt(acc / static_cast<double>(n));
}

double round_into_scale(double v, double r_max) {
  return std::clamp(std::floor(v + 0.5), 1.0, r_max);
}

// budget fillers drawn without replacement from pool, appended to p.
void add_fillers(FakeProfile& p, const std::vector<std::size_t>& pool,
                 std::size_t count, double rating, Rng& rng) {
  for (std::size_t d : rng.sample_without_replacement(pool.size(), count)) {
    p.items.push_back(pool[d]);
    p.ratings.push_back(rating);
  }
}

void check_budget(const RatingGraph& g, std::size_t target,
                  std::size_t budget_items) {
  if (target >= g.num_items()) throw LookupError("target item out of range");
  if (budget_items == 0) throw ContractError("item budget must be positive");
  if (budget_items > g.num_items()) {
    throw ContractError("item budget exceeds catalog size");
  }
}

}  // namespace

const char* attack_method_name(AttackMethod m) {
  switch (m) {
    case AttackMethod::kNodegen: return "nodegen";
    case AttackMethod::kRandom: return "random";
    case AttackMethod::kBandwagon: return "bandwagon";
    case AttackMethod::kSegment: return "segment";
  }
  throw ContractError("unknown attack method");
}

AttackMethod attack_method_from_name(const std::string& name) {
  if (name == "nodegen") return AttackMethod::kNodegen;
  if (name == "random") return AttackMethod::kRandom;
  if (name == "bandwagon") return AttackMethod::kBandwagon;
  if (name == "segment") return AttackMethod::kSegment;
  throw ParseError("unknown attack method: " + name);
}

std::uint64_t attack_config_hash(const AttackConfig& c) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << attack_method_name(c.method) << '|' << c.target << '|'
     << c.budget_users << '|' << c.budget_items << '|' << c.seed << '|'
     << c.epochs << '|' << c.batch << '|' << c.lr << '|' << c.max_grad_norm
     << '|' << c.mask_fraction << '|' << c.dropout << '|' << c.slope << '|'
     << c.encoder_hidden << '|' << c.edge_embed << '|' << c.tau << '|'
     << c.alpha << '|' << c.edge_threshold << '|'
     << c.candidate_sample_fraction << '|' << c.candidate_popular_fraction
     << '|' << c.surrogate_rank << '|' << c.surrogate_lambda << '|'
     << c.surrogate_epochs << '|' << c.ip_hidden << '|' << c.ip_epochs << '|'
     << c.ip_lr << '|' << int(c.ablation.random_features)
     << int(c.ablation.random_edges) << int(c.ablation.no_influence);
  return fnv1a(os.str());
}

AdvContext make_adv_context(const SurrogateMF& m, const RatingGraph& g,
                            const std::vector<std::size_t>& candidates,
                            std::size_t target) {
  if (candidates.empty()) throw ContractError("candidate set is empty");
  if (m.user_factors.rows() != g.num_users() ||
      m.item_factors.rows() != g.num_items()) {
    throw ShapeError("surrogate factors do not match the graph");
  }
  const std::size_t k = m.rank;
  const std::size_t nc = candidates.size();

  AdvContext ctx;
  ctx.candidates = candidates;
  ctx.lambda = m.lambda;
  ctx.r_max = g.r_max();
  std::vector<char> in_c(g.num_items(), 0);
  bool seen_target = false;
  for (std::size_t p = 0; p < nc; ++p) {
    const std::size_t i = candidates[p];
    if (i >= g.num_items()) throw LookupError("candidate item out of range");
    if (in_c[i]) throw ContractError("duplicate candidate item");
    in_c[i] = 1;
    if (i == target) {
      ctx.target_pos = p;
      seen_target = true;
    }
  }
  if (!seen_target) throw ContractError("target must be a candidate");

  ctx.vs = Tensor(nc, k);
  ctx.r_s = Tensor(nc, 1);
  ctx.base_b = Tensor(nc, k);
  ctx.base_a.reserve(nc);
  for (std::size_t p = 0; p < nc; ++p) {
    const std::size_t i = candidates[p];
    for (std::size_t c = 0; c < k; ++c) ctx.vs(p, c) = m.item_factors(i, c);
    ctx.r_s(p, 0) = i == target ? g.r_max() : g.item_mean(i);
    Tensor a = identity_scaled(k, m.lambda);
    for (const auto& [u, r] : g.item_raters(i)) {
      for (std::size_t x = 0; x < k; ++x) {
        const double ux = m.user_factors(u, x);
        ctx.base_b(p, x) += r * ux;
        for (std::size_t y = 0; y < k; ++y) {
          a(x, y) += ux * m.user_factors(u, y);
        }
      }
    }
    ctx.base_a.push_back(std::move(a));
  }

  ctx.u_real = m.user_factors;
  ctx.c_u = Tensor(g.num_users(), 1);
  for (std::size_t u = 0; u < g.num_users(); ++u) {
    double mass = 0.0;
    for (std::size_t j = 0; j < g.num_items(); ++j) {
      if (in_c[j]) continue;
      double s = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        s += m.user_factors(u, c) * m.item_factors(j, c);
      }
      mass += std::exp(s);
    }
    ctx.c_u(u, 0) = mass;
  }
  return ctx;
}

Var adv_loss(Tape& tape, const AdvContext& ctx, Var soft_edges) {
  const std::size_t nc = ctx.candidates.size();
  const std::size_t k = ctx.vs.cols();
  if (soft_edges.value().rows() != 1 || soft_edges.value().cols() != nc) {
    throw ShapeError("soft edge row does not match the candidate count");
  }

  Var g_col = transpose(soft_edges);        // nc x 1
  Var vs_c = tape.constant(ctx.vs);
  Var weighted = scale_rows(vs_c, g_col);   // rows G_i * v_i
  Var a_sys = add(matmul(transpose(vs_c), weighted),
                  tape.constant(identity_scaled(k, ctx.lambda)));
  Var rhs = matmul(transpose(weighted), tape.constant(ctx.r_s));
  Var u_z{};
  try {
    u_z = linsolve_spd(a_sys, rhs);
  } catch (const NumericError&) {
    // Singular fold-in: bump the ridge once and retry; a second failure
    // propagates to the caller.
    Var bumped = add(a_sys, tape.constant(identity_scaled(k, 9.0 * ctx.lambda)));
    u_z = linsolve_spd(bumped, rhs);
  }
  Var outer = matmul(u_z, transpose(u_z));

  // One weighted refresh sweep of every candidate's factors.
  Var vp{};
  for (std::size_t p = 0; p < nc; ++p) {
    Var g_p = gather_rows(g_col, {p});  // 1 x 1
    Var a_p = add(tape.constant(ctx.base_a[p]), mul_scalar(outer, g_p));
    Tensor bb(k, 1);
    for (std::size_t c = 0; c < k; ++c) bb(c, 0) = ctx.base_b(p, c);
    Var b_p = add(tape.constant(bb),
                  mul_scalar(scale(u_z, ctx.r_s(p, 0)), g_p));
    Var v_p = transpose(linsolve_spd(a_p, b_p));  // 1 x k
    vp = p == 0 ? v_p : concat_rows(vp, v_p);
  }

  Var users = tape.constant(ctx.u_real);
  Var scores = matmul(users, transpose(vp));  // |U| x nc
  Var mass = add(row_sums(elem_exp(scores)), tape.constant(ctx.c_u));
  Var log_norm = sum_all(elem_log(mass));
  Var target_score =
      sum_all(matmul(users, transpose(gather_rows(vp, {ctx.target_pos}))));
  return sub(log_norm, target_score);
}

Var total_loss(Tape& tape, Var adv, Var recon, Var ip_reward) {
  (void)tape;
  return sub(add(adv, recon), ip_reward);
}

double total_loss_value(double adv, double recon, double ip_reward) {
  return adv + recon - ip_reward;
}

std::vector<double> assign_ratings(const RatingGraph& g,
                                   const std::vector<std::size_t>& items,
                                   std::size_t target) {
  std::vector<double> out;
  out.reserve(items.size());
  for (std::size_t i : items) {
    if (i >= g.num_items()) throw LookupError("item out of range");
    out.push_back(i == target ? g.r_max()
                              : round_into_scale(g.item_mean(i), g.r_max()));
  }
  return out;
}

FakeProfile random_profile(const RatingGraph& g, std::size_t target,
                           std::size_t budget_items, Rng& rng) {
  check_budget(g, target, budget_items);
  const double mean = g.global_mean();
  const double sd = rating_stddev(g);
  FakeProfile p;
  p.items.push_back(target);
  p.ratings.push_back(g.r_max());
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < g.num_items(); ++i) {
    if (i != target) pool.push_back(i);
  }
  for (std::size_t d :
       rng.sample_without_replacement(pool.size(), budget_items - 1)) {
    p.items.push_back(pool[d]);
    p.ratings.push_back(round_into_scale(rng.normal(mean, sd), g.r_max()));
  }
  return p;
}

FakeProfile bandwagon_profile(const RatingGraph& g, std::size_t target,
                              std::size_t budget_items, Rng& rng) {
  check_budget(g, target, budget_items);
  std::vector<char> used(g.num_items(), 0);
  used[target] = 1;
  FakeProfile p;
  p.items.push_back(target);
  p.ratings.push_back(g.r_max());

  std::vector<std::size_t> pop;
  for (std::size_t i : g.popular_items(0.10)) {
    if (!used[i]) pop.push_back(i);
  }
  const std::size_t n_pop = std::min(budget_items - 1, pop.size());
  add_fillers(p, pop, n_pop, g.r_max(), rng);
  for (std::size_t j = 1; j < p.items.size(); ++j) used[p.items[j]] = 1;

  // Leftover budget falls back to random fillers with sampled ratings.
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < g.num_items(); ++i) {
    if (!used[i]) rest.push_back(i);
  }
  const double mean = g.global_mean();
  const double sd = rating_stddev(g);
  for (std::size_t d : rng.sample_without_replacement(
           rest.size(), budget_items - 1 - n_pop)) {
    p.items.push_back(rest[d]);
    p.ratings.push_back(round_into_scale(rng.normal(mean, sd), g.r_max()));
  }
  return p;
}

FakeProfile segment_profile(const RatingGraph& g, std::size_t target,
                            std::size_t budget_items, Rng& rng) {
  check_budget(g, target, budget_items);
  std::vector<char> used(g.num_items(), 0);
  used[target] = 1;
  FakeProfile p;
  p.items.push_back(target);
  p.ratings.push_back(g.r_max());

  std::vector<std::size_t> seg;
  for (std::size_t i : g.two_hop_items(target)) {
    if (!used[i]) seg.push_back(i);
  }
  const std::size_t n_seg = std::min(budget_items - 1, seg.size());
  add_fillers(p, seg, n_seg, g.r_max(), rng);
  for (std::size_t j = 1; j < p.items.size(); ++j) used[p.items[j]] = 1;

  // Remaining slots are filled with out-of-segment items at the bottom of the
  // scale so the segment stands out.
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < g.num_items(); ++i) {
    if (!used[i]) rest.push_back(i);
  }
  add_fillers(p, rest, budget_items - 1 - n_seg, 1.0, rng);
  return p;
}

AttackResult run_attack(const RatingGraph& g, const AttackConfig& cfg) {
  if (cfg.method != AttackMethod::kNodegen) {
    throw ContractError("run_attack drives the learned method only");
  }
  check_budget(g, cfg.target, cfg.budget_items);
  if (cfg.budget_users == 0) throw ContractError("need at least one profile");
  if (cfg.epochs == 0 || cfg.batch == 0) {
    throw ContractError("training needs positive epochs and batch");
  }
  if (cfg.ablation.random_features && cfg.ablation.random_edges) {
    throw ContractError("ablations cannot randomize features and edges both");
  }

  Tensor raw_u = user_feature_matrix(g, derive_seed(cfg.seed, "features-user"));
  Tensor raw_i = item_feature_matrix(g, derive_seed(cfg.seed, "features-item"));
  Tensor x_users = normalize_features(raw_u).first;
  Tensor x_items = normalize_features(raw_i).first;

  Rng srng(derive_seed(cfg.seed, "surrogate"));
  SurrogateMF m = train_surrogate(g, cfg.surrogate_rank, cfg.surrogate_lambda,
                                  cfg.surrogate_epochs, srng);

  const bool learn_feats = !cfg.ablation.random_features;
  const bool use_ip = learn_feats && !cfg.ablation.no_influence;
  InfluencePredictor ip;
  if (use_ip) {
    // Residual negative curvature from an imperfect ALS fixed point is
    // absorbed by escalating the damping instead of failing the run.
    std::vector<double> raw_scores;
    double damping = kInfluenceDamping;
    for (int tries = 0;; ++tries) {
      try {
        raw_scores = InfluenceScorer(m, g, cfg.target, damping).score_all();
        break;
      } catch (const NumericError&) {
        if (tries == 2) throw;
        damping *= 10.0;
      }
    }
    Rng iprng(derive_seed(cfg.seed, "ip"));
    ip = train_ip(x_users, raw_scores, cfg.ip_epochs, iprng, cfg.ip_hidden,
                  cfg.ip_lr)
             .predictor;
  }

  Rng crng(derive_seed(cfg.seed, "candidates"));
  auto cands = build_candidates(g, cfg.target, crng,
                                cfg.candidate_sample_fraction,
                                cfg.candidate_popular_fraction);
  if (cands.size() < cfg.budget_items) {
    throw ContractError("candidate pool smaller than the item budget");
  }
  const Tensor cand_feats = pick_rows(x_items, cands);
  const std::size_t target_pos =
      static_cast<std::size_t>(std::find(cands.begin(), cands.end(),
                                         cfg.target) -
                               cands.begin());
  AdvContext ctx = make_adv_context(m, g, cands, cfg.target);

  Rng prng(derive_seed(cfg.seed, "params"));
  EncoderState state = EncoderState::init(cfg.encoder_hidden, cfg.slope, prng);
  Tensor w_edge(kFeatureDim, cfg.edge_embed);
  const double w_std = std::sqrt(2.0 / static_cast<double>(kFeatureDim));
  for (std::size_t r = 0; r < w_edge.rows(); ++r) {
    for (std::size_t c = 0; c < w_edge.cols(); ++c) {
      w_edge(r, c) = prng.normal(0.0, w_std);
    }
  }
  Tensor rand_feat(1, kFeatureDim);
  {
    Rng fr(derive_seed(cfg.seed, "random-features"));
    for (std::size_t c = 0; c < kFeatureDim; ++c) rand_feat(0, c) = fr.uniform();
  }

  GraphAdjacency adj(g);
  std::vector<Tensor*> params;
  if (learn_feats) params = state.param_list();
  params.push_back(&w_edge);
  num::ParamGroup group;
  for (Tensor* p : params) group.attach(*p);
  num::AdamConfig adam;
  adam.lr = cfg.lr;

  const std::size_t total_nodes = g.num_users() + g.num_items();
  const auto masked_per_epoch = static_cast<std::size_t>(
      std::llround(cfg.mask_fraction * static_cast<double>(total_nodes)));
  const std::size_t batches_per_epoch =
      learn_feats ? (masked_per_epoch + cfg.batch - 1) / cfg.batch : 1;
  const std::size_t total_steps = cfg.epochs * batches_per_epoch;

  AttackResult res;
  res.candidates = cands;
  std::size_t step = 0;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    Rng er(derive_seed(cfg.seed, "attack-epoch", e));
    MaskPlan plan;
    std::vector<char> uflags(g.num_users(), 0), iflags(g.num_items(), 0);
    std::vector<std::pair<NodeSide, std::size_t>> order;
    if (learn_feats) {
      plan = make_mask(g, cfg.mask_fraction, er);
      for (std::size_t u : plan.users) uflags[u] = 1;
      for (std::size_t i : plan.items) iflags[i] = 1;
      order.reserve(plan.users.size() + plan.items.size());
      for (std::size_t u : plan.users) order.push_back({NodeSide::kUser, u});
      for (std::size_t i : plan.items) order.push_back({NodeSide::kItem, i});
      er.shuffle(order);
    }

    double loss_sum = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t b = 0; b < batches_per_epoch; ++b) {
      const std::size_t start = b * cfg.batch;
      std::vector<std::size_t> busers, bitems;
      if (learn_feats) {
        const std::size_t stop = std::min(order.size(), start + cfg.batch);
        for (std::size_t x = start; x < stop; ++x) {
          (order[x].first == NodeSide::kUser ? busers : bitems)
              .push_back(order[x].second);
        }
      }

      Tape tape;
      Var w_e = tape.input(w_edge);
      Var recon{};
      Var xhat{};
      EncoderVars ev{};
      if (learn_feats) {
        ev = bind_encoder(tape, state, true);
        ForwardOptions opt;
        opt.masked_users = &uflags;
        opt.masked_items = &iflags;
        opt.dropout = cfg.dropout;
        opt.dropout_rng = &er;
        if (!busers.empty()) {
          Var xb = reconstruct_nodes(tape, ev, adj, x_users, x_items, busers,
                                     NodeSide::kUser, cfg.slope, opt);
          recon = mean_sq_row_dist(tape, xb, pick_rows(x_users, busers));
        }
        if (!bitems.empty()) {
          Var xb = reconstruct_nodes(tape, ev, adj, x_users, x_items, bitems,
                                     NodeSide::kItem, cfg.slope, opt);
          Var li = mean_sq_row_dist(tape, xb, pick_rows(x_items, bitems));
          recon = recon.valid() ? num::add(recon, li) : li;
        }
        xhat = reconstruct_fake_user(tape, ev, adj, x_items, cfg.target,
                                     cfg.slope);
      } else {
        xhat = tape.constant(rand_feat);
      }

      Var o = score_candidates(tape, xhat, w_e, cand_feats);
      TopkResult tk =
          gumbel_topk(tape, o, cfg.budget_items, cfg.tau, cfg.alpha, &er);
      Var loss = adv_loss(tape, ctx, tk.soft);
      if (recon.valid()) loss = num::add(loss, recon);
      if (use_ip) loss = num::sub(loss, ip.forward(tape, xhat));
      tape.backward(loss);
      if (!std::isfinite(loss.value().item())) {
        std::ostringstream os;
        os << "joint loss became non-finite at epoch " << e << " step " << b;
        throw NumericError(os.str());
      }

      std::vector<Tensor> grads;
      grads.reserve(params.size());
      std::vector<Var> vars;
      if (learn_feats) {
        vars = {ev.w1, ev.w2, ev.wr_user, ev.wr_item, ev.wg, ev.w1rec,
                ev.w2rec};
      }
      vars.push_back(w_e);
      for (std::size_t i = 0; i < params.size(); ++i) {
        grads.push_back(tape.has_grad(vars[i])
                            ? tape.grad(vars[i])
                            : Tensor(params[i]->rows(), params[i]->cols()));
      }
      std::vector<Tensor*> gptrs;
      for (Tensor& gt : grads) gptrs.push_back(&gt);
      num::clip_global_norm(gptrs, cfg.max_grad_norm);
      const double pos = total_steps <= 1 ? 0.0
                                          : static_cast<double>(step) /
                                                static_cast<double>(total_steps);
      group.step(gptrs, adam, num::cosine_lr(cfg.lr, pos));
      ++step;
      loss_sum += loss.value().item();
      ++n_batches;
    }
    res.loss_trace.push_back(loss_sum / static_cast<double>(n_batches));
  }

  const Tensor xhat_emit =
      learn_feats ? fake_user_features(state, adj, x_items, cfg.target)
                  : rand_feat;
  for (std::size_t p = 0; p < cfg.budget_users; ++p) {
    const std::uint64_t ps = derive_seed(cfg.seed, "emit", p);
    FakeProfile fp;
    fp.seed = ps;
    fp.features.assign(xhat_emit.cols(), 0.0);
    for (std::size_t c = 0; c < xhat_emit.cols(); ++c) {
      fp.features[c] = xhat_emit(0, c);
    }

    std::vector<std::size_t> sel;
    std::vector<double> wts;
    if (cfg.ablation.random_edges) {
      // Edges drawn uniformly from the candidate pool, target kept.
      Rng r(ps);
      for (std::size_t d :
           r.sample_without_replacement(cands.size() - 1,
                                        cfg.budget_items - 1)) {
        sel.push_back(d < target_pos ? d : d + 1);
      }
      sel.push_back(target_pos);
      std::sort(sel.begin(), sel.end());
      wts.assign(sel.size(), 1.0);
    } else {
      Tape tape;
      Var o = score_candidates(tape, tape.constant(xhat_emit),
                               tape.constant(w_edge), cand_feats);
      TopkResult tk;
      if (cfg.budget_users == 1) {
        tk = gumbel_topk(tape, o, cfg.budget_items, cfg.tau, 0.0, nullptr);
      } else {
        Rng r(ps);
        tk = gumbel_topk(tape, o, cfg.budget_items, cfg.tau, cfg.alpha, &r);
      }
      const Tensor soft = tk.soft.value();
      sel = select_edges(soft, cfg.edge_threshold, cfg.budget_items);
      if (std::find(sel.begin(), sel.end(), target_pos) == sel.end()) {
        if (sel.size() >= cfg.budget_items) {
          auto weakest = std::min_element(
              sel.begin(), sel.end(), [&](std::size_t a, std::size_t b) {
                return soft(0, a) < soft(0, b);
              });
          sel.erase(weakest);
        }
        sel.push_back(target_pos);
        std::sort(sel.begin(), sel.end());
      }
      for (std::size_t s : sel) wts.push_back(soft(0, s));
    }

    for (std::size_t s : sel) fp.items.push_back(cands[s]);
    fp.edge_weights = wts;
    fp.ratings = assign_ratings(g, fp.items, cfg.target);
    res.profiles.push_back(std::move(fp));
  }
  res.encoder = std::move(state);
  res.w_edge = std::move(w_edge);
  return res;
}

std::vector<FakeProfile> generate_profiles(const RatingGraph& g,
                                           const AttackConfig& cfg) {
  if (cfg.method == AttackMethod::kNodegen) {
    return run_attack(g, cfg).profiles;
  }
  check_budget(g, cfg.target, cfg.budget_items);
  if (cfg.budget_users == 0) throw ContractError("need at least one profile");
  std::vector<FakeProfile> out;
  out.reserve(cfg.budget_users);
  for (std::size_t p = 0; p < cfg.budget_users; ++p) {
    const std::uint64_t ps = derive_seed(cfg.seed, "profile", p);
    Rng rng(ps);
    FakeProfile fp;
    switch (cfg.method) {
      case AttackMethod::kRandom:
        fp = random_profile(g, cfg.target, cfg.budget_items, rng);
        break;
      case AttackMethod::kBandwagon:
        fp = bandwagon_profile(g, cfg.target, cfg.budget_items, rng);
        break;
      case AttackMethod::kSegment:
        fp = segment_profile(g, cfg.target, cfg.budget_items, rng);
        break;
      default:
        throw ContractError("unknown attack method");
    }
    fp.seed = ps;
    out.push_back(std::move(fp));
  }
  return out;
}

void write_profiles(const std::string& path,
                    const std::vector<FakeProfile>& profiles,
                    const AttackConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open profile file for writing: " + path);
  out << "# config " << std::hex << std::setw(16) << std::setfill('0')
      << attack_config_hash(cfg) << std::dec << std::setfill(' ') << " seed "
      << cfg.seed << "\n";
  for (const FakeProfile& p : profiles) {
    if (p.items.size() != p.ratings.size()) {
      throw ShapeError("profile items and ratings misaligned");
    }
    for (std::size_t i = 0; i < p.items.size(); ++i) {
      if (i > 0) out << ' ';
      out << p.items[i] << ':' << p.ratings[i];
    }
    out << "\n";
  }
  if (!out) throw ParseError("profile write failed: " + path);
}

std::vector<FakeProfile> read_profiles(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open profile file: " + path);
  std::vector<FakeProfile> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    FakeProfile p;
    std::istringstream ls(line);
    std::string tok;
    while (ls >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos || colon == 0 ||
          colon + 1 == tok.size()) {
        throw ParseError("malformed profile entry: " + tok);
      }
      try {
        p.items.push_back(std::stoull(tok.substr(0, colon)));
        p.ratings.push_back(std::stod(tok.substr(colon + 1)));
      } catch (const std::exception&) {
        throw ParseError("malformed profile entry: " + tok);
      }
    }
    if (p.items.empty()) throw ParseError("empty profile line");
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace shillab
