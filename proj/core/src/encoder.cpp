#include "shillab/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>

#include "shillab/errors.hpp"
#include "shillab/features.hpp"
#include "shillab/optim.hpp"

namespace shillab {

using num::Tensor;
using num::Var;

namespace {

Tensor scaled_normal(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t(rows, cols);
  const double std = std::sqrt(2.0 / static_cast<double>(rows));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = std * rng.normal();
  return t;
}

Tensor gather_tensor_rows(const Tensor& src, const std::vector<std::size_t>& rows) {
  Tensor out(rows.size(), src.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= src.rows()) throw LookupError("gather row out of range");
    for (std::size_t c = 0; c < src.cols(); ++c) out(r, c) = src(rows[r], c);
  }
  return out;
}

}  // namespace

EncoderState EncoderState::init(std::size_t hidden, double slope, Rng& rng) {
  if (hidden == 0) throw ContractError("encoder hidden width must be positive");
  EncoderState s;
  s.slope = slope;
  s.w1 = scaled_normal(kFeatureDim, hidden, rng);
  s.w2 = scaled_normal(hidden, hidden, rng);
  s.wr_user = scaled_normal(hidden, hidden, rng);
  s.wr_item = scaled_normal(hidden, hidden, rng);
  s.wg = scaled_normal(hidden, hidden, rng);
  s.w1rec = scaled_normal(hidden, hidden, rng);
  s.w2rec = scaled_normal(hidden, kFeatureDim, rng);
  return s;
}

std::vector<Tensor*> EncoderState::param_list() {
  return {&w1, &w2, &wr_user, &wr_item, &wg, &w1rec, &w2rec};
}

std::vector<const Tensor*> EncoderState::param_list() const {
  return {&w1, &w2, &wr_user, &wr_item, &wg, &w1rec, &w2rec};
}

std::vector<std::string> EncoderState::param_names() {
  return {"w1", "w2", "wr_user", "wr_item", "wg", "w1rec", "w2rec"};
}

GraphAdjacency::GraphAdjacency(const RatingGraph& g)
    : n_users(g.num_users()), n_items(g.num_items()) {
  user_items.resize(n_users);
  item_users.resize(n_items);
  user_deg.resize(n_users);
  item_deg.resize(n_items);
  for (std::size_t u = 0; u < n_users; ++u) {
    const auto& prof = g.user_profile(u);
    user_items[u].reserve(prof.size());
    for (const auto& [item, r] : prof) {
      (void)r;
      user_items[u].push_back(item);
    }
    user_deg[u] = prof.size();
  }
  for (std::size_t i = 0; i < n_items; ++i) {
    const auto& raters = g.item_raters(i);
    item_users[i].reserve(raters.size());
    for (const auto& [user, r] : raters) {
      (void)r;
      item_users[i].push_back(user);
    }
    item_deg[i] = raters.size();
  }
}

MaskPlan make_mask(const RatingGraph& g, double fraction, Rng& rng) {
  const std::size_t total = g.num_users() + g.num_items();
  const auto count = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(total)));
  if (count < 1) {
    throw ContractError("mask fraction selects no nodes");
  }
  if (count > total) {
    throw ContractError("mask fraction selects more nodes than exist");
  }
  auto picks = rng.sample_without_replacement(total, count);
  MaskPlan plan;
  for (std::size_t p : picks) {
    if (p < g.num_users()) {
      plan.users.push_back(p);
    } else {
      plan.items.push_back(p - g.num_users());
    }
  }
  std::sort(plan.users.begin(), plan.users.end());
  std::sort(plan.items.begin(), plan.items.end());
  return plan;
}

EncoderVars bind_encoder(num::Tape& tape, const EncoderState& s, bool trainable) {
  auto bind = [&](const Tensor& t) {
    return trainable ? tape.input(t) : tape.constant(t);
  };
  return EncoderVars{bind(s.w1),  bind(s.w2),    bind(s.wr_user), bind(s.wr_item),
                     bind(s.wg),  bind(s.w1rec), bind(s.w2rec)};
}

namespace {

// Shared tail: q rows -> mixing layer -> decoder.
Var decode_from_q(num::Tape& tape, const EncoderVars& ev, Var q, double slope) {
  (void)tape;
  Var h = num::leaky_relu(num::matmul(num::leaky_relu(q, slope), ev.wg), slope);
  return num::matmul(num::leaky_relu(num::matmul(h, ev.w1rec), slope), ev.w2rec);
}

}  // namespace

Var reconstruct_nodes(num::Tape& tape, const EncoderVars& ev,
                      const GraphAdjacency& adj, const Tensor& x_users,
                      const Tensor& x_items,
                      const std::vector<std::size_t>& nodes, NodeSide side,
                      double slope, const ForwardOptions& opt) {
  if (nodes.empty()) throw ContractError("reconstruct_nodes needs nodes");
  if (x_users.rows() != adj.n_users || x_items.rows() != adj.n_items) {
    throw ShapeError("feature matrices do not match graph size");
  }
  const bool user_side = side == NodeSide::kUser;
  const auto& nbrs = user_side ? adj.user_items : adj.item_users;
  const auto& own_deg = user_side ? adj.user_deg : adj.item_deg;
  const auto& nbr_deg = user_side ? adj.item_deg : adj.user_deg;
  const Tensor& x_nbr = user_side ? x_items : x_users;
  const std::vector<char>* nbr_mask =
      user_side ? opt.masked_items : opt.masked_users;
  const std::size_t n_own = user_side ? adj.n_users : adj.n_items;

  // Union of counterpart rows this batch touches, in ascending id order.
  std::vector<char> seen(x_nbr.rows(), 0);
  for (std::size_t n : nodes) {
    if (n >= n_own) throw LookupError("reconstruct_nodes: node out of range");
    for (std::size_t v : nbrs[n]) seen[v] = 1;
  }
  std::vector<std::size_t> needed;
  std::vector<std::size_t> compact(x_nbr.rows(), 0);
  for (std::size_t v = 0; v < seen.size(); ++v) {
    if (seen[v]) {
      compact[v] = needed.size();
      needed.push_back(v);
    }
  }

  Tensor x_src(std::max<std::size_t>(needed.size(), 1), x_nbr.cols());
  for (std::size_t r = 0; r < needed.size(); ++r) {
    const std::size_t v = needed[r];
    const bool zeroed = nbr_mask != nullptr && (*nbr_mask)[v] != 0;
    for (std::size_t c = 0; c < x_nbr.cols(); ++c) {
      x_src(r, c) = zeroed ? 0.0 : x_nbr(v, c);
    }
  }

  // Symmetric-degree normalized aggregation matrix, batch rows x needed cols.
  std::vector<std::tuple<std::size_t, std::size_t, double>> trips;
  for (std::size_t b = 0; b < nodes.size(); ++b) {
    const std::size_t n = nodes[b];
    const double dn = static_cast<double>(own_deg[n]);
    for (std::size_t v : nbrs[n]) {
      const double dv = static_cast<double>(nbr_deg[v]);
      trips.emplace_back(b, compact[v], 1.0 / std::sqrt(dn * dv));
    }
  }
  const num::SparseMatrix& s = tape.own(num::SparseMatrix::from_triplets(
      nodes.size(), std::max<std::size_t>(needed.size(), 1), trips));

  Var x = tape.constant(std::move(x_src));
  Var z = num::leaky_relu(num::matmul(x, ev.w1), slope);
  Var p = num::matmul(z, ev.w2);
  if (opt.dropout > 0.0) {
    if (opt.dropout >= 1.0) throw ContractError("dropout rate must be < 1");
    if (opt.dropout_rng == nullptr) {
      throw ContractError("dropout requires an rng");
    }
    const double keep = 1.0 - opt.dropout;
    Tensor mask(p.value().rows(), p.value().cols());
    for (std::size_t i = 0; i < mask.size(); ++i) {
      mask[i] = (opt.dropout_rng->uniform() < keep) ? 1.0 / keep : 0.0;
    }
    p = num::mul(p, tape.constant(std::move(mask)));
  }
  Var q = num::matmul(num::spmm(s, p), user_side ? ev.wr_user : ev.wr_item);
  return decode_from_q(tape, ev, q, slope);
}

Var reconstruct_fake_user(num::Tape& tape, const EncoderVars& ev,
                          const GraphAdjacency& adj, const Tensor& x_items,
                          std::size_t target, double slope) {
  if (target >= adj.n_items) {
    throw LookupError("fake-user target item out of range");
  }
  if (x_items.rows() != adj.n_items) {
    throw ShapeError("item feature matrix does not match graph size");
  }
  Tensor xt(1, x_items.cols());
  for (std::size_t c = 0; c < x_items.cols(); ++c) xt(0, c) = x_items(target, c);
  Var x = tape.constant(std::move(xt));
  Var p = num::matmul(num::leaky_relu(num::matmul(x, ev.w1), slope), ev.w2);
  const double dt =
      static_cast<double>(std::max<std::size_t>(adj.item_deg[target], 1));
  Var q = num::matmul(num::scale(p, 1.0 / std::sqrt(dt)), ev.wr_user);
  return decode_from_q(tape, ev, q, slope);
}

Tensor fake_user_features(const EncoderState& s, const GraphAdjacency& adj,
                          const Tensor& x_items, std::size_t target) {
  num::Tape tape;
  EncoderVars ev = bind_encoder(tape, s, false);
  Var out = reconstruct_fake_user(tape, ev, adj, x_items, target, s.slope);
  return out.value();
}

Var mean_sq_row_dist(num::Tape& tape, Var xhat, const Tensor& x_rows) {
  if (xhat.value().rows() != x_rows.rows() ||
      xhat.value().cols() != x_rows.cols()) {
    throw ShapeError("reconstruction/target shape mismatch");
  }
  Var target = tape.constant(x_rows);
  Var diff = num::square(num::sub(xhat, target));
  return num::mean_all(num::row_sums(diff));
}

double recon_loss(const EncoderState& s, const GraphAdjacency& adj,
                  const Tensor& x_users, const Tensor& x_items,
                  const MaskPlan& plan) {
  if (plan.users.empty() && plan.items.empty()) {
    throw ContractError("mask plan selects no nodes");
  }
  std::vector<char> uflags(adj.n_users, 0), iflags(adj.n_items, 0);
  for (std::size_t u : plan.users) uflags.at(u) = 1;
  for (std::size_t i : plan.items) iflags.at(i) = 1;
  ForwardOptions opt;
  opt.masked_users = &uflags;
  opt.masked_items = &iflags;

  num::Tape tape;
  EncoderVars ev = bind_encoder(tape, s, false);
  double total = 0.0;
  if (!plan.users.empty()) {
    Var xhat = reconstruct_nodes(tape, ev, adj, x_users, x_items, plan.users,
                                 NodeSide::kUser, s.slope, opt);
    total += mean_sq_row_dist(tape, xhat, gather_tensor_rows(x_users, plan.users))
                 .value()
                 .item();
  }
  if (!plan.items.empty()) {
    Var xhat = reconstruct_nodes(tape, ev, adj, x_users, x_items, plan.items,
                                 NodeSide::kItem, s.slope, opt);
    total += mean_sq_row_dist(tape, xhat, gather_tensor_rows(x_items, plan.items))
                 .value()
                 .item();
  }
  return total;
}

EncoderTrainStats train_encoder(EncoderState& state, const RatingGraph& g,
                                const Tensor& x_users, const Tensor& x_items,
                                const EncoderConfig& cfg, std::uint64_t seed) {
  if (x_users.rows() != g.num_users() || x_items.rows() != g.num_items()) {
    throw ShapeError("feature matrices do not match graph size");
  }
  if (cfg.batch == 0 || cfg.epochs == 0) {
    throw ContractError("encoder training needs positive epochs and batch");
  }
  GraphAdjacency adj(g);
  auto params = state.param_list();
  num::ParamGroup group;
  for (Tensor* p : params) group.attach(*p);
  num::AdamConfig adam;
  adam.lr = cfg.lr;

  const std::size_t total_nodes = g.num_users() + g.num_items();
  const auto masked_per_epoch = static_cast<std::size_t>(
      std::llround(cfg.mask_fraction * static_cast<double>(total_nodes)));
  const std::size_t batches_per_epoch =
      (masked_per_epoch + cfg.batch - 1) / cfg.batch;
  const std::size_t total_steps = cfg.epochs * batches_per_epoch;

  EncoderTrainStats stats;
  std::size_t step = 0;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    Rng er(derive_seed(seed, "encoder-epoch", e));
    MaskPlan plan = make_mask(g, cfg.mask_fraction, er);
    std::vector<char> uflags(g.num_users(), 0), iflags(g.num_items(), 0);
    for (std::size_t u : plan.users) uflags[u] = 1;
    for (std::size_t i : plan.items) iflags[i] = 1;

    std::vector<std::pair<NodeSide, std::size_t>> order;
    order.reserve(plan.users.size() + plan.items.size());
    for (std::size_t u : plan.users) order.push_back({NodeSide::kUser, u});
    for (std::size_t i : plan.items) order.push_back({NodeSide::kItem, i});
    er.shuffle(order);

    double loss_sum = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch);
      std::vector<std::size_t> busers, bitems;
      for (std::size_t k = start; k < stop; ++k) {
        (order[k].first == NodeSide::kUser ? busers : bitems)
            .push_back(order[k].second);
      }

      num::Tape tape;
      EncoderVars ev = bind_encoder(tape, state, true);
      ForwardOptions opt;
      opt.masked_users = &uflags;
      opt.masked_items = &iflags;
      opt.dropout = cfg.dropout;
      opt.dropout_rng = &er;

      Var loss{};
      if (!busers.empty()) {
        Var xhat = reconstruct_nodes(tape, ev, adj, x_users, x_items, busers,
                                     NodeSide::kUser, cfg.slope, opt);
        loss = mean_sq_row_dist(tape, xhat, gather_tensor_rows(x_users, busers));
      }
      if (!bitems.empty()) {
        Var xhat = reconstruct_nodes(tape, ev, adj, x_users, x_items, bitems,
                                     NodeSide::kItem, cfg.slope, opt);
        Var li = mean_sq_row_dist(tape, xhat, gather_tensor_rows(x_items, bitems));
        loss = loss.valid() ? num::add(loss, li) : li;
      }
      tape.backward(loss);
      if (!std::isfinite(loss.value().item())) {
        throw NumericError("encoder loss became non-finite");
      }

      std::vector<Tensor> grads;
      grads.reserve(params.size());
      const Var vars[] = {ev.w1, ev.w2, ev.wr_user, ev.wr_item,
                          ev.wg, ev.w1rec, ev.w2rec};
      for (std::size_t i = 0; i < params.size(); ++i) {
        grads.push_back(tape.has_grad(vars[i])
                            ? tape.grad(vars[i])
                            : Tensor(params[i]->rows(), params[i]->cols()));
      }
      std::vector<Tensor*> gptrs;
      for (Tensor& gt : grads) gptrs.push_back(&gt);
      num::clip_global_norm(gptrs, cfg.max_grad_norm);
      const double pos = total_steps <= 1
                             ? 0.0
                             : static_cast<double>(step) /
                                   static_cast<double>(total_steps);
      group.step(gptrs, adam, num::cosine_lr(cfg.lr, pos));
      ++step;
      loss_sum += loss.value().item();
      ++n_batches;
    }
    stats.epoch_loss.push_back(loss_sum / static_cast<double>(n_batches));
  }
  return stats;
}

}  // namespace shillab
