#include "shillab/victims.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "shillab/checkpoint.hpp"
#include "shillab/errors.hpp"
#include "shillab/rng.hpp"

namespace shillab {

using num::Tensor;

namespace {

// Top-n_sim nonzero-similarity neighbors per item, most similar first, ties
// by ascending id. Zero similarities never contribute to a vote, so they are
// dropped here instead of padding the lists.
std::vector<std::vector<std::size_t>> build_neighbors(const Tensor& sim,
                                                      std::size_t n_sim) {
  const std::size_t ni = sim.rows();
  std::vector<std::vector<std::size_t>> out(ni);
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < ni; ++i) {
    order.clear();
    for (std::size_t j = 0; j < ni; ++j) {
      if (j != i && sim(i, j) != 0.0) order.push_back(j);
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (sim(i, a) != sim(i, b)) return sim(i, a) > sim(i, b);
      return a < b;
    });
    if (order.size() > n_sim) order.resize(n_sim);
    out[i] = order;
  }
  return out;
}

// Shared top-k walk over unrated items; scorer maps item id to a score.
template <typename Scorer>
std::vector<std::size_t> topk_unrated(const RatingGraph& g, std::size_t user,
                                      std::size_t k, Scorer&& scorer) {
  if (user >= g.num_users()) throw LookupError("user out of range");
  if (k == 0) throw ContractError("k must be positive");
  std::vector<char> rated(g.num_items(), 0);
  for (const auto& [i, r] : g.user_profile(user)) rated[i] = 1;
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(g.num_items());
  for (std::size_t i = 0; i < g.num_items(); ++i) {
    if (!rated[i]) scored.push_back({scorer(i), i});
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  if (scored.size() > k) scored.resize(k);
  std::vector<std::size_t> out;
  out.reserve(scored.size());
  for (const auto& [s, i] : scored) out.push_back(i);
  return out;
}

Tensor meta_row(std::initializer_list<double> vals) {
  Tensor t(1, vals.size());
  std::size_t c = 0;
  for (double v : vals) t(0, c++) = v;
  return t;
}

}  // namespace

double ItemCFModel::score(const RatingGraph& g, std::size_t user,
                          std::size_t item) const {
  if (item >= neighbors.size()) throw LookupError("item out of range");
  double num = 0.0, den = 0.0;
  for (std::size_t j : neighbors[item]) {
    if (auto r = g.rating(user, j)) {
      num += sim(item, j) * *r;
      den += std::fabs(sim(item, j));
    }
  }
  return den == 0.0 ? 0.0 : num / den;
}

ItemCFModel train_itemcf(const RatingGraph& g, std::size_t n_sim) {
  if (g.num_ratings() == 0) throw ContractError("graph has no ratings");
  if (n_sim == 0) throw ContractError("neighborhood size must be positive");
  const std::size_t ni = g.num_items();

  // Centered co-rating products accumulate user by user; the full vectors
  // live over the user axis with zeros outside each item's rater set.
  Tensor dot(ni, ni);
  std::vector<double> norm2(ni, 0.0);
  std::vector<double> centered;
  for (std::size_t u = 0; u < g.num_users(); ++u) {
    const auto& prof = g.user_profile(u);
    centered.clear();
    for (const auto& [i, r] : prof) {
      const double c = r - g.item_mean(i);
      centered.push_back(c);
      norm2[i] += c * c;
    }
    for (std::size_t a = 0; a < prof.size(); ++a) {
      for (std::size_t b = a + 1; b < prof.size(); ++b) {
        const std::size_t ia = prof[a].first, ib = prof[b].first;
        dot(ia, ib) += centered[a] * centered[b];
        dot(ib, ia) = dot(ia, ib);
      }
    }
  }

  ItemCFModel m;
  m.n_sim = n_sim;
  m.sim = Tensor(ni, ni);
  for (std::size_t i = 0; i < ni; ++i) {
    m.sim(i, i) = 1.0;
    for (std::size_t j = i + 1; j < ni; ++j) {
      double s = 0.0;
      if (norm2[i] > 0.0 && norm2[j] > 0.0) {
        s = dot(i, j) / std::sqrt(norm2[i] * norm2[j]);
        s = std::clamp(s, -1.0, 1.0);
      }
      m.sim(i, j) = s;
      m.sim(j, i) = s;
    }
  }
  m.neighbors = build_neighbors(m.sim, n_sim);
  return m;
}

double WMFModel::score(std::size_t user, std::size_t item) const {
  double s = 0.0;
  for (std::size_t c = 0; c < rank; ++c) {
    s += user_factors(user, c) * item_factors(item, c);
  }
  return s;
}

namespace {

// One confidence-weighted ridge half-sweep: re-solve every row of `rows`
// against fixed `other`, where `profiles(r)` yields the rated counterparts.
template <typename Profiles>
void wmf_half_sweep(Tensor& rows, const Tensor& other, Profiles&& profiles,
                    double alpha, double lambda) {
  const std::size_t k = rows.cols();
  const Eigen::MatrixXd oth = other.map();
  const Eigen::MatrixXd gram = oth.transpose() * oth;
  Eigen::MatrixXd a(k, k);
  Eigen::VectorXd b(k);
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    a = gram;
    a.diagonal().array() += lambda;
    b.setZero();
    for (const auto& [j, val] : profiles(r)) {
      const double conf = 1.0 + alpha * val;
      const auto y = oth.row(static_cast<Eigen::Index>(j)).transpose();
      a += (conf - 1.0) * y * y.transpose();
      b += conf * y;
    }
    const Eigen::VectorXd x = a.llt().solve(b);
    for (std::size_t c = 0; c < k; ++c) rows(r, c) = x(static_cast<Eigen::Index>(c));
  }
}

// Full weighted objective: unrated pairs carry confidence 1 and preference 0,
// so their mass is the all-pairs score energy computed through the Gram trick.
double wmf_objective(const RatingGraph& g, const WMFModel& m) {
  const Eigen::MatrixXd x = m.user_factors.map();
  const Eigen::MatrixXd y = m.item_factors.map();
  const Eigen::MatrixXd gram = y.transpose() * y;
  double total = (x * gram).cwiseProduct(x).sum();  // sum over all pairs s^2
  for (const Rating& r : g.ratings()) {
    const double s = m.score(r.user, r.item);
    const double conf = 1.0 + m.alpha_conf * r.value;
    total += conf * (1.0 - s) * (1.0 - s) - s * s;
  }
  total += m.lambda * (x.squaredNorm() + y.squaredNorm());
  return total;
}

}  // namespace

WMFModel train_wmf(const RatingGraph& g, std::size_t rank, double alpha_conf,
                   double lambda, std::size_t sweeps, std::uint64_t seed) {
  if (g.num_ratings() == 0) throw ContractError("graph has no ratings");
  if (rank == 0 || rank > std::min(g.num_users(), g.num_items())) {
    throw ContractError("rank must be in [1, min(|U|, |I|)]");
  }
  if (alpha_conf < 0.0) throw ContractError("confidence weight must be >= 0");
  if (lambda <= 0.0) throw ContractError("ridge must be positive");
  if (sweeps == 0) throw ContractError("need at least one sweep");

  WMFModel m;
  m.rank = rank;
  m.alpha_conf = alpha_conf;
  m.lambda = lambda;
  m.user_factors = Tensor(g.num_users(), rank);
  m.item_factors = Tensor(g.num_items(), rank);
  Rng rng(derive_seed(seed, "wmf-init"));
  const double std0 = 0.1 / std::sqrt(static_cast<double>(rank));
  for (std::size_t i = 0; i < m.user_factors.size(); ++i) {
    m.user_factors[i] = rng.normal(0.0, std0);
  }
  for (std::size_t i = 0; i < m.item_factors.size(); ++i) {
    m.item_factors[i] = rng.normal(0.0, std0);
  }

  for (std::size_t s = 0; s < sweeps; ++s) {
    wmf_half_sweep(m.user_factors, m.item_factors,
                   [&](std::size_t u) -> const auto& {
                     return g.user_profile(u);
                   },
                   alpha_conf, lambda);
    wmf_half_sweep(m.item_factors, m.user_factors,
                   [&](std::size_t i) -> const auto& {
                     return g.item_raters(i);
                   },
                   alpha_conf, lambda);
    m.loss_trace.push_back(wmf_objective(g, m));
  }
  return m;
}

std::vector<std::size_t> recommend_topk(const ItemCFModel& m,
                                        const RatingGraph& g,
                                        std::size_t user, std::size_t k) {
  if (m.neighbors.size() != g.num_items()) {
    throw ShapeError("model does not match the graph");
  }
  return topk_unrated(g, user, k,
                      [&](std::size_t i) { return m.score(g, user, i); });
}

std::vector<std::size_t> recommend_topk(const WMFModel& m,
                                        const RatingGraph& g,
                                        std::size_t user, std::size_t k) {
  if (m.user_factors.rows() != g.num_users() ||
      m.item_factors.rows() != g.num_items()) {
    throw ShapeError("model does not match the graph");
  }
  return topk_unrated(g, user, k,
                      [&](std::size_t i) { return m.score(user, i); });
}

void save_itemcf(const std::string& path, const ItemCFModel& m) {
  const Tensor meta = meta_row({static_cast<double>(m.n_sim)});
  save_checkpoint(path, {{"sim", &m.sim}, {"meta", &meta}});
}

ItemCFModel load_itemcf(const std::string& path) {
  auto entries = load_checkpoint(path);
  ItemCFModel m;
  m.sim = checkpoint_get(entries, "sim");
  const Tensor& meta = checkpoint_get(entries, "meta");
  if (meta.size() != 1) throw ParseError("bad itemcf metadata");
  m.n_sim = static_cast<std::size_t>(meta[0]);
  if (m.sim.rows() != m.sim.cols()) throw ParseError("similarity not square");
  m.neighbors = build_neighbors(m.sim, m.n_sim);
  return m;
}

void save_wmf(const std::string& path, const WMFModel& m) {
  const Tensor meta =
      meta_row({static_cast<double>(m.rank), m.alpha_conf, m.lambda});
  save_checkpoint(path, {{"user_factors", &m.user_factors},
                         {"item_factors", &m.item_factors},
                         {"meta", &meta}});
}

WMFModel load_wmf(const std::string& path) {
  auto entries = load_checkpoint(path);
  WMFModel m;
  m.user_factors = checkpoint_get(entries, "user_factors");
  m.item_factors = checkpoint_get(entries, "item_factors");
  const Tensor& meta = checkpoint_get(entries, "meta");
  if (meta.size() != 3) throw ParseError("bad wmf metadata");
  m.rank = static_cast<std::size_t>(meta[0]);
  m.alpha_conf = meta[1];
  m.lambda = meta[2];
  if (m.user_factors.cols() != m.rank || m.item_factors.cols() != m.rank) {
    throw ParseError("factor width does not match the stored rank");
  }
  return m;
}

}  // namespace shillab
