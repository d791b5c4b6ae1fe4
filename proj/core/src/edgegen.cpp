#include "shillab/edgegen.hpp"

#include <algorithm>
#include <cmath>

#include "shillab/errors.hpp"

namespace shillab {

using num::Tensor;
using num::Var;

std::vector<std::size_t> build_candidates(const RatingGraph& g,
                                          std::size_t target, Rng& rng,
                                          double sample_fraction,
                                          double popular_fraction) {
  if (target >= g.num_items()) {
    throw LookupError("candidate target item out of range");
  }
  if (sample_fraction <= 0.0 || sample_fraction > 1.0) {
    throw ContractError("sample fraction must lie in (0, 1]");
  }
  std::vector<std::size_t> cands = g.two_hop_items(target);
  std::vector<char> taken(g.num_items(), 0);
  for (std::size_t i : cands) taken[i] = 1;
  taken[target] = 1;

  const auto want = static_cast<std::size_t>(
      std::ceil(sample_fraction * static_cast<double>(g.num_items())));
  std::vector<std::size_t> pool = g.popular_items(popular_fraction);
  const std::size_t draws = std::min(want, pool.size());
  for (std::size_t i : rng.sample_without_replacement(pool.size(), draws)) {
    const std::size_t item = pool[i];
    if (!taken[item]) {
      taken[item] = 1;
      cands.push_back(item);
    }
  }
  cands.push_back(target);
  return cands;
}

Var score_candidates(num::Tape& tape, Var xhat, Var w_edge,
                     const Tensor& cand_features) {
  if (xhat.value().rows() != 1 ||
      xhat.value().cols() != cand_features.cols()) {
    throw ShapeError("edge scorer expects one feature row matching candidates");
  }
  if (cand_features.rows() == 0) {
    throw ContractError("edge scorer needs at least one candidate");
  }
  Var xc = tape.constant(cand_features);
  Var ez = num::matmul(xhat, w_edge);
  Var ec = num::matmul(xc, w_edge);
  // pair every candidate row with the (replicated) fake-profile embedding
  Var ez_rep = num::gather_rows(
      ez, std::vector<std::size_t>(cand_features.rows(), 0));
  Var cos = num::cosine_rows(ec, ez_rep);  // |C| x 1
  return num::transpose(num::clamp_min(num::affine(cos, 0.5, 0.5), 1e-8));
}

namespace {

void check_propensities(const Tensor& o) {
  if (o.rows() != 1 || o.cols() == 0) {
    throw ShapeError("propensities must be a non-empty row");
  }
  for (std::size_t i = 0; i < o.size(); ++i) {
    if (!(o[i] > 0.0)) {
      throw ContractError("propensities must be strictly positive");
    }
  }
}

Var relaxed_round(num::Tape& tape, Var o, double tau, double alpha, Rng* rng,
                  const std::vector<double>* block) {
  const std::size_t n = o.value().cols();
  Tensor extra(1, n);
  if (alpha > 0.0) {
    for (std::size_t i = 0; i < n; ++i) extra(0, i) = alpha * rng->gumbel();
  }
  if (block != nullptr) {
    for (std::size_t i = 0; i < n; ++i) extra(0, i) += (*block)[i];
  }
  Var logits = num::scale(
      num::add(num::elem_log(o), tape.constant(std::move(extra))), 1.0 / tau);
  return num::softmax_rows(logits);
}

}  // namespace

Var gumbel_softmax(num::Tape& tape, Var o, double tau, double alpha, Rng* rng) {
  check_propensities(o.value());
  if (tau <= 0.0) throw ContractError("temperature must be positive");
  if (alpha < 0.0) throw ContractError("noise weight must be non-negative");
  if (alpha > 0.0 && rng == nullptr) {
    throw ContractError("noisy relaxation requires an rng");
  }
  return relaxed_round(tape, o, tau, alpha, rng, nullptr);
}

TopkResult gumbel_topk(num::Tape& tape, Var o, std::size_t k, double tau,
                       double alpha, Rng* rng) {
  check_propensities(o.value());
  if (tau <= 0.0) throw ContractError("temperature must be positive");
  if (alpha < 0.0) throw ContractError("noise weight must be non-negative");
  if (alpha > 0.0 && rng == nullptr) {
    throw ContractError("noisy relaxation requires an rng");
  }
  const std::size_t n = o.value().cols();
  if (k < 1 || k > n) {
    throw ContractError("edge count must lie in [1, candidate count]");
  }
  std::vector<double> block(n, 0.0);
  TopkResult out;
  for (std::size_t round = 0; round < k; ++round) {
    Var y = relaxed_round(tape, o, tau, alpha, rng, &block);
    const Tensor& yv = y.value();
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (yv(0, i) > yv(0, best)) best = i;
    }
    out.selected.push_back(best);
    block[best] = -1e9;
    out.soft = out.soft.valid() ? num::add(out.soft, y) : y;
  }
  return out;
}

std::vector<std::size_t> select_edges(const Tensor& soft, double threshold,
                                      std::size_t cap) {
  if (soft.rows() != 1 || soft.cols() == 0) {
    throw ShapeError("edge selection expects a non-empty row");
  }
  if (threshold <= 0.0) throw ContractError("threshold must be positive");
  if (cap == 0) throw ContractError("selection cap must be positive");
  std::vector<std::size_t> picked;
  for (std::size_t i = 0; i < soft.cols(); ++i) {
    if (soft(0, i) >= threshold) picked.push_back(i);
  }
  if (picked.empty()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < soft.cols(); ++i) {
      if (soft(0, i) > soft(0, best)) best = i;
    }
    picked.push_back(best);
  }
  if (picked.size() > cap) {
    std::stable_sort(picked.begin(), picked.end(),
                     [&](std::size_t a, std::size_t b) {
                       return soft(0, a) > soft(0, b);
                     });
    picked.resize(cap);
    std::sort(picked.begin(), picked.end());
  }
  return picked;
}

}  // namespace shillab
