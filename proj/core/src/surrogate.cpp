#include "shillab/surrogate.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "shillab/errors.hpp"

namespace shillab {

double SurrogateMF::predict(std::size_t user, std::size_t item) const {
  double s = 0.0;
  for (std::size_t k = 0; k < rank; ++k)
    s += user_factors(user, k) * item_factors(item, k);
  return s;
}

double SurrogateMF::loss(const RatingGraph& g) const {
  double l = 0.0;
  for (const Rating& r : g.ratings()) {
    double e = r.value - predict(r.user, r.item);
    l += e * e;
  }
  double reg = 0.0;
  for (std::size_t k = 0; k < user_factors.size(); ++k)
    reg += user_factors[k] * user_factors[k];
  for (std::size_t k = 0; k < item_factors.size(); ++k)
    reg += item_factors[k] * item_factors[k];
  return l + lambda * reg;
}

double SurrogateMF::rmse(const RatingGraph& g) const {
  if (g.num_ratings() == 0) return 0.0;
  double l = 0.0;
  for (const Rating& r : g.ratings()) {
    double e = r.value - predict(r.user, r.item);
    l += e * e;
  }
  return std::sqrt(l / static_cast<double>(g.num_ratings()));
}

namespace {

// One half-sweep: re-solve every row of `solve_side` against the fixed
// counterpart factors.
void half_sweep(
    num::Tensor& side, const num::Tensor& fixed, double lambda,
    std::size_t rank,
    const std::vector<std::vector<std::pair<std::size_t, double>>>& profiles) {
  Eigen::MatrixXd a(rank, rank);
  Eigen::VectorXd b(rank);
  for (std::size_t n = 0; n < side.rows(); ++n) {
    a.setZero();
    b.setZero();
    for (const auto& [c, r] : profiles[n]) {
      Eigen::Map<const Eigen::VectorXd> v(fixed.data() + c * rank, rank);
      a.noalias() += v * v.transpose();
      b.noalias() += r * v;
    }
    for (std::size_t k = 0; k < rank; ++k) a(k, k) += lambda;
    Eigen::VectorXd x = a.llt().solve(b);
    for (std::size_t k = 0; k < rank; ++k) side(n, k) = x[k];
  }
}

SurrogateMF als_train(num::Tensor u0, num::Tensor v0, const RatingGraph& g,
                      std::size_t rank, double lambda, std::size_t epochs) {
  SurrogateMF m;
  m.user_factors = std::move(u0);
  m.item_factors = std::move(v0);
  m.rank = rank;
  m.lambda = lambda;

  std::vector<std::vector<std::pair<std::size_t, double>>> by_user(
      g.num_users());
  std::vector<std::vector<std::pair<std::size_t, double>>> by_item(
      g.num_items());
  for (const Rating& r : g.ratings()) {
    by_user[r.user].emplace_back(r.item, r.value);
    by_item[r.item].emplace_back(r.user, r.value);
  }

  double prev = m.loss(g);
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    half_sweep(m.user_factors, m.item_factors, lambda, rank, by_user);
    half_sweep(m.item_factors, m.user_factors, lambda, rank, by_item);
    double cur = m.loss(g);
    m.loss_trace.push_back(cur);
    if (std::fabs(prev - cur) <= 1e-10 * std::max(1.0, std::fabs(prev))) break;
    prev = cur;
  }
  m.final_rmse = m.rmse(g);
  return m;
}

}  // namespace

SurrogateMF train_surrogate(const RatingGraph& g, std::size_t rank,
                            double lambda, std::size_t epochs, Rng& rng) {
  if (rank < 1) throw ContractError("train_surrogate: rank must be >= 1");
  if (rank > std::min(g.num_users(), g.num_items()))
    throw ContractError("train_surrogate: rank exceeds min(users, items)");
  if (lambda <= 0.0)
    throw ContractError("train_surrogate: lambda must be positive");
  num::Tensor u0(g.num_users(), rank);
  num::Tensor v0(g.num_items(), rank);
  for (std::size_t k = 0; k < u0.size(); ++k) u0[k] = 0.1 * rng.normal();
  for (std::size_t k = 0; k < v0.size(); ++k) v0[k] = 0.1 * rng.normal();
  return als_train(std::move(u0), std::move(v0), g, rank, lambda, epochs);
}

SurrogateMF refit_surrogate(const SurrogateMF& init, const RatingGraph& g,
                            std::size_t epochs) {
  if (init.user_factors.rows() != g.num_users() ||
      init.item_factors.rows() != g.num_items())
    throw ContractError("refit_surrogate: node counts changed");
  return als_train(init.user_factors, init.item_factors, g, init.rank,
                   init.lambda, epochs);
}

}  // namespace shillab
