#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <vector>

#include "shillab/errors.hpp"
#include "shillab/rng.hpp"
#include "shillab/victims.hpp"

using namespace shillab;
using num::Tensor;

namespace {

RatingGraph make_g0() {
  return RatingGraph::from_ratings(3, 3,
                                   {{0, 0, 5},
                                    {0, 1, 3},
                                    {1, 0, 4},
                                    {1, 2, 2},
                                    {2, 0, 3},
                                    {2, 1, 3},
                                    {2, 2, 2}},
                                   5.0);
}

RatingGraph fixed_graph(std::size_t nu, std::size_t ni, Rng& rng) {
  std::vector<Rating> ratings;
  std::vector<char> hit(ni, 0);
  for (std::size_t u = 0; u < nu; ++u) {
    const std::size_t deg = std::min(ni, 3 + rng.uniform_int(4));
    for (std::size_t i : rng.sample_without_replacement(ni, deg)) {
      ratings.push_back({u, i, 1.0 + static_cast<double>(rng.uniform_int(5))});
      hit[i] = 1;
    }
  }
  for (std::size_t i = 0; i < ni; ++i) {
    if (!hit[i]) {
      const std::size_t u = rng.uniform_int(nu);
      bool dup = false;
      for (const auto& r : ratings)
        if (r.user == u && r.item == i) dup = true;
      if (!dup)
        ratings.push_back({u, i, 1.0 + static_cast<double>(rng.uniform_int(5))});
    }
  }
  return RatingGraph::from_ratings(nu, ni, ratings, 5.0);
}

// Independent similarity oracle over dense centered vectors.
struct CfOracle {
  std::vector<std::vector<double>> vec;  // item -> user-axis centered vector
  std::vector<double> norm;
  std::vector<std::vector<std::size_t>> nbrs;
  const RatingGraph* g = nullptr;

  CfOracle(const RatingGraph& graph, std::size_t n_sim) : g(&graph) {
    const std::size_t ni = graph.num_items(), nu = graph.num_users();
    vec.assign(ni, std::vector<double>(nu, 0.0));
    norm.assign(ni, 0.0);
    for (const Rating& r : graph.ratings()) {
      vec[r.item][r.user] = r.value - graph.item_mean(r.item);
    }
    for (std::size_t i = 0; i < ni; ++i) {
      for (double v : vec[i]) norm[i] += v * v;
      norm[i] = std::sqrt(norm[i]);
    }
    nbrs.assign(ni, {});
    for (std::size_t i = 0; i < ni; ++i) {
      std::vector<std::size_t> order;
      for (std::size_t j = 0; j < ni; ++j) {
        if (j != i && sim(i, j) != 0.0) order.push_back(j);
      }
      std::sort(order.begin(), order.end(),
                [&](std::size_t a, std::size_t b) {
                  if (sim(i, a) != sim(i, b)) return sim(i, a) > sim(i, b);
                  return a < b;
                });
      if (order.size() > n_sim) order.resize(n_sim);
      nbrs[i] = order;
    }
  }

  double sim(std::size_t i, std::size_t j) const {
    if (i == j) return 1.0;
    if (norm[i] == 0.0 || norm[j] == 0.0) return 0.0;
    double d = 0.0;
    for (std::size_t u = 0; u < vec[i].size(); ++u) d += vec[i][u] * vec[j][u];
    return d / (norm[i] * norm[j]);
  }

  double score(std::size_t user, std::size_t item) const {
    double num = 0.0, den = 0.0;
    for (std::size_t j : nbrs[item]) {
      if (auto r = g->rating(user, j)) {
        num += sim(item, j) * *r;
        den += std::fabs(sim(item, j));
      }
    }
    return den == 0.0 ? 0.0 : num / den;
  }
};

}  // namespace

TEST_CASE("cosine identities on hand-built vectors") {
  // x and y share centered direction, z opposes it, w half-overlaps x.
  RatingGraph g = RatingGraph::from_ratings(3, 4,
                                            {{0, 0, 5},
                                             {1, 0, 1},
                                             {0, 1, 4},
                                             {1, 1, 2},
                                             {0, 2, 1},
                                             {1, 2, 5},
                                             {0, 3, 5},
                                             {2, 3, 1}},
                                            5.0);
  ItemCFModel m = train_itemcf(g, 20);
  CHECK(m.sim(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.sim(0, 2) == doctest::Approx(-1.0).epsilon(1e-12));
  // x centered (2,-2,0), w centered (2,0,-2): dot 4, norms sqrt(8) each.
  CHECK(m.sim(0, 3) == doctest::Approx(0.5).epsilon(1e-12));
  for (std::size_t i = 0; i < 4; ++i) CHECK(m.sim(i, i) == 1.0);
}

TEST_CASE("identical raters give unit similarity, disjoint give zero") {
  RatingGraph g = RatingGraph::from_ratings(
      4, 4,
      {{0, 0, 5}, {1, 0, 3}, {2, 0, 1},
       {0, 1, 5}, {1, 1, 3}, {2, 1, 1},
       {3, 2, 4}, {3, 3, 2}, {2, 3, 5}},
      5.0);
  ItemCFModel m = train_itemcf(g, 20);
  CHECK(m.sim(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
  // Item 2 is rated only by user 3, items 0 and 1 never by user 3.
  CHECK(m.sim(0, 2) == 0.0);
  CHECK(m.sim(1, 2) == 0.0);
}

TEST_CASE("worked fixture similarities vanish under centering") {
  // Both i2 and i3 have constant rating vectors, so their centered vectors
  // are zero and every similarity involving them falls to the zero rule.
  RatingGraph g0 = make_g0();
  ItemCFModel m = train_itemcf(g0, 20);
  CHECK(m.sim(1, 2) == 0.0);
  CHECK(m.sim(0, 1) == 0.0);
  CHECK(m.sim(0, 2) == 0.0);
  for (std::size_t i = 0; i < 3; ++i) CHECK(m.sim(i, i) == 1.0);
  CHECK(m.neighbors[0].empty());
}

TEST_CASE("similarity matrix matches the dense oracle") {
  Rng rng(71);
  RatingGraph g = fixed_graph(18, 14, rng);
  ItemCFModel m = train_itemcf(g, 5);
  CfOracle oracle(g, 5);

  for (std::size_t i = 0; i < g.num_items(); ++i) {
    for (std::size_t j = 0; j < g.num_items(); ++j) {
      CHECK(m.sim(i, j) ==
            doctest::Approx(oracle.sim(i, j)).epsilon(1e-12));
      CHECK(m.sim(i, j) == doctest::Approx(m.sim(j, i)).epsilon(1e-12));
      CHECK(m.sim(i, j) <= 1.0);
      CHECK(m.sim(i, j) >= -1.0);
    }
    CHECK(m.neighbors[i] == oracle.nbrs[i]);
  }
  for (std::size_t u = 0; u < g.num_users(); ++u) {
    for (std::size_t i = 0; i < g.num_items(); ++i) {
      CHECK(m.score(g, u, i) ==
            doctest::Approx(oracle.score(u, i)).epsilon(1e-12));
    }
  }
}

TEST_CASE("itemcf contracts") {
  RatingGraph empty = RatingGraph::from_ratings(2, 2, {}, 5.0);
  CHECK_THROWS_AS(train_itemcf(empty, 20), ContractError);
  RatingGraph g0 = make_g0();
  CHECK_THROWS_AS(train_itemcf(g0, 0), ContractError);
}

TEST_CASE("wmf objective matches the brute-force oracle") {
  Rng rng(73);
  RatingGraph g = fixed_graph(12, 9, rng);
  WMFModel m = train_wmf(g, 3, 40.0, 0.1, 6, 5);
  REQUIRE(m.loss_trace.size() == 6);

  double brute = 0.0;
  for (std::size_t u = 0; u < g.num_users(); ++u) {
    for (std::size_t i = 0; i < g.num_items(); ++i) {
      const double s = m.score(u, i);
      const auto r = g.rating(u, i);
      const double pref = r ? 1.0 : 0.0;
      const double conf = r ? 1.0 + m.alpha_conf * *r : 1.0;
      brute += conf * (pref - s) * (pref - s);
    }
  }
  for (std::size_t i = 0; i < m.user_factors.size(); ++i) {
    brute += m.lambda * m.user_factors[i] * m.user_factors[i];
  }
  for (std::size_t i = 0; i < m.item_factors.size(); ++i) {
    brute += m.lambda * m.item_factors[i] * m.item_factors[i];
  }
  CHECK(m.loss_trace.back() == doctest::Approx(brute).epsilon(1e-9));
}

TEST_CASE("wmf objective is nonincreasing across sweeps") {
  Rng rng(79);
  RatingGraph g = fixed_graph(20, 15, rng);
  WMFModel m = train_wmf(g, 4, 40.0, 0.1, 10, 3);
  for (std::size_t s = 1; s < m.loss_trace.size(); ++s) {
    CHECK(m.loss_trace[s] <= m.loss_trace[s - 1] * (1.0 + 1e-9));
  }
  for (double v : m.loss_trace) CHECK(std::isfinite(v));
}

TEST_CASE("zero confidence weight still trains") {
  Rng rng(83);
  RatingGraph g = fixed_graph(10, 8, rng);
  WMFModel m = train_wmf(g, 2, 0.0, 0.1, 5, 1);
  // With alpha_conf = 0 every pair carries confidence 1; the objective is the
  // plain squared preference error plus ridge.
  double brute = 0.0;
  for (std::size_t u = 0; u < g.num_users(); ++u) {
    for (std::size_t i = 0; i < g.num_items(); ++i) {
      const double s = m.score(u, i);
      const double pref = g.rating(u, i) ? 1.0 : 0.0;
      brute += (pref - s) * (pref - s);
    }
  }
  for (std::size_t i = 0; i < m.user_factors.size(); ++i) {
    brute += m.lambda * m.user_factors[i] * m.user_factors[i];
  }
  for (std::size_t i = 0; i < m.item_factors.size(); ++i) {
    brute += m.lambda * m.item_factors[i] * m.item_factors[i];
  }
  CHECK(m.loss_trace.back() == doctest::Approx(brute).epsilon(1e-9));
}

TEST_CASE("rank-1 factorization of a uniform grid is user-symmetric") {
  std::vector<Rating> rs;
  for (std::size_t u = 0; u < 4; ++u) {
    for (std::size_t i = 0; i < 4; ++i) rs.push_back({u, i, 1.0});
  }
  RatingGraph g = RatingGraph::from_ratings(4, 4, rs, 5.0);
  WMFModel m = train_wmf(g, 1, 40.0, 0.1, 5, 9);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t u = 1; u < 4; ++u) {
      CHECK(m.score(u, i) == doctest::Approx(m.score(0, i)).epsilon(1e-9));
    }
  }
}

TEST_CASE("wmf contracts") {
  Rng rng(89);
  RatingGraph g = fixed_graph(6, 5, rng);
  CHECK_THROWS_AS(train_wmf(g, 0, 40.0, 0.1, 5, 0), ContractError);
  CHECK_THROWS_AS(train_wmf(g, 6, 40.0, 0.1, 5, 0), ContractError);
  CHECK_THROWS_AS(train_wmf(g, 2, -1.0, 0.1, 5, 0), ContractError);
  CHECK_THROWS_AS(train_wmf(g, 2, 40.0, 0.0, 5, 0), ContractError);
  CHECK_THROWS_AS(train_wmf(g, 2, 40.0, 0.1, 0, 0), ContractError);
  RatingGraph empty = RatingGraph::from_ratings(2, 2, {}, 5.0);
  CHECK_THROWS_AS(train_wmf(empty, 1, 40.0, 0.1, 5, 0), ContractError);
}

TEST_CASE("top-k excludes rated items and breaks ties by id") {
  RatingGraph g0 = make_g0();
  ItemCFModel m = train_itemcf(g0, 20);
  // User 0 rated items 0 and 1; every candidate scores zero here, so the
  // order is purely the ascending-id tie rule.
  auto rec = recommend_topk(m, g0, 0, 5);
  REQUIRE(rec.size() == 1);
  CHECK(rec[0] == 2);

  Rng rng(97);
  RatingGraph g = fixed_graph(15, 12, rng);
  ItemCFModel mc = train_itemcf(g, 6);
  for (std::size_t u = 0; u < g.num_users(); ++u) {
    auto top = recommend_topk(mc, g, u, 4);
    std::set<std::size_t> rated;
    for (const auto& [i, r] : g.user_profile(u)) rated.insert(i);
    CHECK(top.size() == std::min<std::size_t>(4, g.num_items() - rated.size()));
    std::set<std::size_t> seen;
    for (std::size_t i : top) {
      CHECK(rated.count(i) == 0);
      CHECK(seen.insert(i).second);
    }
    // Scores along the list never increase, and id ascends inside a tie.
    for (std::size_t p = 1; p < top.size(); ++p) {
      const double a = mc.score(g, u, top[p - 1]);
      const double b = mc.score(g, u, top[p]);
      CHECK(a >= b);
      if (a == b) CHECK(top[p - 1] < top[p]);
    }
  }

  CHECK_THROWS_AS(recommend_topk(mc, g, 0, 0), ContractError);
  CHECK_THROWS_AS(recommend_topk(mc, g, 99, 3), LookupError);
  WMFModel wm = train_wmf(g, 3, 40.0, 0.1, 4, 1);
  CHECK_THROWS_AS(recommend_topk(wm, g, 0, 0), ContractError);
  auto wrec = recommend_topk(wm, g, 2, 1000);
  std::set<std::size_t> rated2;
  for (const auto& [i, r] : g.user_profile(2)) rated2.insert(i);
  CHECK(wrec.size() == g.num_items() - rated2.size());

  RatingGraph other = fixed_graph(9, 7, rng);
  CHECK_THROWS_AS(recommend_topk(mc, other, 0, 3), ShapeError);
  CHECK_THROWS_AS(recommend_topk(wm, other, 0, 3), ShapeError);
}

TEST_CASE("retraining with one seed reproduces recommendations") {
  Rng rng(101);
  RatingGraph g = fixed_graph(18, 12, rng);
  WMFModel a = train_wmf(g, 4, 40.0, 0.1, 8, 42);
  WMFModel b = train_wmf(g, 4, 40.0, 0.1, 8, 42);
  CHECK(a.loss_trace == b.loss_trace);
  for (std::size_t u = 0; u < g.num_users(); ++u) {
    CHECK(recommend_topk(a, g, u, 5) == recommend_topk(b, g, u, 5));
  }
  WMFModel c = train_wmf(g, 4, 40.0, 0.1, 8, 43);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.user_factors.size(); ++i) {
    if (a.user_factors[i] != c.user_factors[i]) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("mass injection raises the target score for co-raters") {
  // Target 0 starts with a single rater, so every pre-attack similarity to it
  // is zero and co-rater scores start at exactly zero.
  std::vector<Rating> rs = {{0, 0, 4.0}};
  Rng rng(103);
  for (std::size_t u = 1; u < 20; ++u) {
    const std::size_t deg = 4 + rng.uniform_int(3);
    for (std::size_t i : rng.sample_without_replacement(19, deg)) {
      rs.push_back({u, i + 1, 1.0 + double(rng.uniform_int(5))});
    }
  }
  RatingGraph before = RatingGraph::from_ratings(20, 20, rs, 5.0);
  ItemCFModel mb = train_itemcf(before, 20);

  RatingGraph after = before;
  for (std::size_t f = 0; f < 50; ++f) {
    FakeProfile fp;
    fp.items = {0, 1, 2, 3};
    fp.ratings = {5.0, 5.0, 5.0, 5.0};
    after = after.inject_profile(fp);
  }
  REQUIRE(after.num_users() == 70);
  ItemCFModel ma = train_itemcf(after, 20);

  std::size_t co_raters = 0;
  for (std::size_t u = 1; u < 20; ++u) {
    bool co = before.rating(u, 1) || before.rating(u, 2) || before.rating(u, 3);
    if (!co) continue;
    ++co_raters;
    CHECK(mb.score(before, u, 0) == 0.0);
    CHECK(ma.score(after, u, 0) > mb.score(before, u, 0));
  }
  CHECK(co_raters >= 5);
}

TEST_CASE("victim checkpoints round-trip") {
  Rng rng(107);
  RatingGraph g = fixed_graph(14, 10, rng);
  auto dir = std::filesystem::temp_directory_path();

  ItemCFModel m = train_itemcf(g, 7);
  const std::string cf_path = (dir / "victim_cf.ckpt").string();
  save_itemcf(cf_path, m);
  ItemCFModel m2 = load_itemcf(cf_path);
  CHECK(m2.n_sim == m.n_sim);
  REQUIRE(m2.sim.rows() == m.sim.rows());
  for (std::size_t i = 0; i < m.sim.size(); ++i) CHECK(m2.sim[i] == m.sim[i]);
  for (std::size_t u = 0; u < g.num_users(); ++u) {
    CHECK(recommend_topk(m2, g, u, 4) == recommend_topk(m, g, u, 4));
  }

  WMFModel w = train_wmf(g, 3, 40.0, 0.1, 5, 11);
  const std::string wmf_path = (dir / "victim_wmf.ckpt").string();
  save_wmf(wmf_path, w);
  WMFModel w2 = load_wmf(wmf_path);
  CHECK(w2.rank == w.rank);
  CHECK(w2.alpha_conf == w.alpha_conf);
  CHECK(w2.lambda == w.lambda);
  for (std::size_t i = 0; i < w.user_factors.size(); ++i) {
    CHECK(w2.user_factors[i] == w.user_factors[i]);
  }
  for (std::size_t u = 0; u < g.num_users(); ++u) {
    CHECK(recommend_topk(w2, g, u, 4) == recommend_topk(w, g, u, 4));
  }

  CHECK_THROWS_AS(load_itemcf("/nonexistent/victim.ckpt"), ParseError);
}
