#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "fdcheck.hpp"
#include "shillab/attack.hpp"
#include "shillab/errors.hpp"
#include "shillab/influence.hpp"
#include "shillab/rng.hpp"
#include "shillab/surrogate.hpp"

using namespace shillab;
using num::Tape;
using num::Tensor;
using num::Var;

namespace {

// 3 users over 3 items; the worked fixture with item means 4, 3, 2.
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
    const std::size_t deg = std::min(ni, 3 + rng.uniform_int(3));
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

std::set<std::size_t> item_set(const FakeProfile& p) {
  return {p.items.begin(), p.items.end()};
}

AttackConfig small_nodegen(std::size_t target, std::uint64_t seed) {
  AttackConfig cfg;
  cfg.method = AttackMethod::kNodegen;
  cfg.target = target;
  cfg.seed = seed;
  cfg.budget_users = 1;
  cfg.budget_items = 5;
  cfg.epochs = 3;
  cfg.batch = 8;
  cfg.lr = 1e-3;
  cfg.encoder_hidden = 12;
  cfg.edge_embed = 8;
  cfg.surrogate_rank = 4;
  cfg.surrogate_lambda = 0.3;
  cfg.surrogate_epochs = 400;
  cfg.ip_hidden = 16;
  cfg.ip_epochs = 30;
  return cfg;
}

}  // namespace

TEST_CASE("promotion loss gradient matches finite differences") {
  Rng rng(41);
  RatingGraph g = fixed_graph(5, 5, rng);
  SurrogateMF m = train_surrogate(g, 3, 0.3, 80, rng);
  std::vector<std::size_t> cands = {0, 1, 2, 3, 4};
  AdvContext ctx = make_adv_context(m, g, cands, 2);

  Tensor soft(1, 5);
  const double vals[] = {0.9, 0.4, 0.8, 0.1, 0.6};
  for (std::size_t c = 0; c < 5; ++c) soft(0, c) = vals[c];

  auto rep = testsupport::fd_check(
      {soft},
      [&](Tape& tape, std::vector<Var>& vs) {
        return adv_loss(tape, ctx, vs[0]);
      });
  CHECK(rep.checked == 5);
  CHECK(rep.max_rel <= 1e-3);
}

TEST_CASE("zeroed soft edges recover the clean promotion loss") {
  Rng rng(52);
  RatingGraph g = fixed_graph(6, 6, rng);
  // Long ALS run so the factors sit at their fixed point; the refresh sweep
  // then reproduces them exactly.
  SurrogateMF m = train_surrogate(g, 3, 0.5, 400, rng);
  std::vector<std::size_t> cands = {1, 3, 4, 5};
  AdvContext ctx = make_adv_context(m, g, cands, 4);

  Tape tape;
  Var soft = tape.input(Tensor(1, 4));
  Var loss = adv_loss(tape, ctx, soft);
  const double clean = surrogate_promotion_loss(m, 4);
  CHECK(loss.value().item() ==
        doctest::Approx(clean).epsilon(1e-8));
}

TEST_CASE("full candidate cover leaves no outside mass") {
  Rng rng(9);
  RatingGraph g = fixed_graph(5, 4, rng);
  SurrogateMF m = train_surrogate(g, 2, 0.3, 60, rng);
  AdvContext ctx = make_adv_context(m, g, {0, 1, 2, 3}, 1);
  for (std::size_t u = 0; u < g.num_users(); ++u) {
    CHECK(ctx.c_u(u, 0) == 0.0);
  }
  CHECK(ctx.target_pos == 1);
  CHECK(ctx.r_s(1, 0) == g.r_max());
  CHECK(ctx.r_s(0, 0) == doctest::Approx(g.item_mean(0)));
  for (const Tensor& a : ctx.base_a) {
    REQUIRE(a.rows() == 2);
    CHECK(a(0, 1) == doctest::Approx(a(1, 0)));
    CHECK(a(0, 0) >= m.lambda);
  }
}

TEST_CASE("context construction contracts") {
  Rng rng(11);
  RatingGraph g = fixed_graph(5, 5, rng);
  SurrogateMF m = train_surrogate(g, 2, 0.3, 40, rng);
  CHECK_THROWS_AS(make_adv_context(m, g, {}, 0), ContractError);
  CHECK_THROWS_AS(make_adv_context(m, g, {0, 1, 1}, 1), ContractError);
  CHECK_THROWS_AS(make_adv_context(m, g, {0, 1, 2}, 4), ContractError);
  CHECK_THROWS_AS(make_adv_context(m, g, {0, 9}, 0), LookupError);
  RatingGraph other = fixed_graph(7, 5, rng);
  CHECK_THROWS_AS(make_adv_context(m, other, {0, 1}, 0), ShapeError);

  AdvContext ctx = make_adv_context(m, g, {0, 1, 2}, 1);
  Tape tape;
  Var wrong = tape.input(Tensor(1, 4));
  CHECK_THROWS_AS(adv_loss(tape, ctx, wrong), ShapeError);
}

TEST_CASE("non-finite context values surface in the loss") {
  Rng rng(13);
  RatingGraph g = fixed_graph(5, 5, rng);
  SurrogateMF m = train_surrogate(g, 2, 0.3, 40, rng);
  AdvContext ctx = make_adv_context(m, g, {0, 1, 2}, 1);
  ctx.c_u(0, 0) = std::numeric_limits<double>::infinity();
  Tape tape;
  Var soft = tape.input(Tensor(1, 3));
  Var loss = adv_loss(tape, ctx, soft);
  CHECK_FALSE(std::isfinite(loss.value().item()));
}

TEST_CASE("ridge-free fold-in fails even after the retry") {
  Rng rng(17);
  RatingGraph g = fixed_graph(4, 4, rng);
  SurrogateMF m = train_surrogate(g, 2, 0.3, 40, rng);
  AdvContext ctx = make_adv_context(m, g, {0, 1, 2}, 1);
  ctx.lambda = 0.0;  // both the first solve and the bumped retry are singular
  Tape tape;
  Var soft = tape.input(Tensor(1, 3));
  CHECK_THROWS_AS(adv_loss(tape, ctx, soft), NumericError);
}

TEST_CASE("joint objective combines with unit weights") {
  CHECK(total_loss_value(1.0, 0.5, 0.2) == doctest::Approx(1.3));
  Tape tape;
  auto scalar = [&](double v) {
    Tensor t(1, 1);
    t(0, 0) = v;
    return tape.input(t);
  };
  Var t = total_loss(tape, scalar(1.0), scalar(0.5), scalar(0.2));
  CHECK(t.value().item() == doctest::Approx(1.3));
  // A larger influence reward lowers the objective.
  Var t2 = total_loss(tape, scalar(1.0), scalar(0.5), scalar(0.4));
  CHECK(t2.value().item() < t.value().item());
}

TEST_CASE("rating assignment rounds item means half-up") {
  RatingGraph g0 = make_g0();
  auto r = assign_ratings(g0, {0, 1, 2}, 1);
  REQUIRE(r.size() == 3);
  CHECK(r[0] == doctest::Approx(4.0));  // mean 4.0
  CHECK(r[1] == doctest::Approx(5.0));  // target takes r_max
  CHECK(r[2] == doctest::Approx(2.0));  // mean 2.0

  // Half-up at .5 and clamping at both ends of the scale.
  RatingGraph g = RatingGraph::from_ratings(
      2, 3, {{0, 0, 3}, {1, 0, 4}, {0, 1, 5}, {1, 1, 5}, {0, 2, 1}}, 5.0);
  auto rr = assign_ratings(g, {0, 1, 2}, 1);
  CHECK(rr[0] == doctest::Approx(4.0));  // mean 3.5 rounds up
  CHECK(rr[2] == doctest::Approx(1.0));  // mean 1.0 stays on the floor
  CHECK_THROWS_AS(assign_ratings(g, {7}, 0), LookupError);
}

TEST_CASE("random baseline profiles match the rating distribution") {
  Rng rng(23);
  RatingGraph g = fixed_graph(40, 30, rng);
  const std::size_t target = 3;

  double filler_sum = 0.0;
  std::size_t filler_count = 0;
  for (std::size_t p = 0; p < 1000; ++p) {
    Rng prng(derive_seed(900, "profile", p));
    FakeProfile fp = random_profile(g, target, 12, prng);
    REQUIRE(fp.items.size() == 12);
    REQUIRE(fp.ratings.size() == 12);
    CHECK(fp.items[0] == target);
    CHECK(fp.ratings[0] == g.r_max());
    CHECK(item_set(fp).size() == 12);
    for (std::size_t i = 1; i < fp.items.size(); ++i) {
      CHECK(fp.ratings[i] >= 1.0);
      CHECK(fp.ratings[i] <= g.r_max());
      CHECK(fp.ratings[i] == std::floor(fp.ratings[i]));
      filler_sum += fp.ratings[i];
      ++filler_count;
    }
  }
  const double filler_mean = filler_sum / static_cast<double>(filler_count);
  // Draws come from a normal at the graph's mean, so the empirical mean
  // stays near it despite rounding and clamping.
  CHECK(std::fabs(filler_mean - g.global_mean()) <= 0.2);
}

TEST_CASE("bandwagon fillers come from the popular pool") {
  Rng rng(29);
  RatingGraph g = fixed_graph(40, 30, rng);
  const std::size_t target = 5;
  auto pop = g.popular_items(0.10);
  std::set<std::size_t> pop_set(pop.begin(), pop.end());

  Rng prng(77);
  FakeProfile fp = bandwagon_profile(g, target, 3, prng);
  REQUIRE(fp.items.size() == 3);
  CHECK(fp.items[0] == target);
  CHECK(fp.ratings[0] == g.r_max());
  for (std::size_t i = 1; i < fp.items.size(); ++i) {
    CHECK(pop_set.count(fp.items[i]) == 1);
    CHECK(fp.ratings[i] == g.r_max());
  }

  // A budget beyond the pool falls back to random fillers.
  FakeProfile big = bandwagon_profile(g, target, 20, prng);
  REQUIRE(big.items.size() == 20);
  CHECK(item_set(big).size() == 20);
  std::size_t in_pool = 0;
  for (std::size_t i = 1; i < big.items.size(); ++i) {
    if (pop_set.count(big.items[i])) {
      ++in_pool;
      CHECK(big.ratings[i] == g.r_max());
    } else {
      CHECK(big.ratings[i] >= 1.0);
      CHECK(big.ratings[i] <= g.r_max());
    }
  }
  CHECK(in_pool == pop_set.size() - pop_set.count(target));
}

TEST_CASE("segment fillers sit in the target neighborhood") {
  Rng rng(31);
  RatingGraph g = fixed_graph(25, 40, rng);
  const std::size_t target = 2;
  auto seg = g.two_hop_items(target);
  std::set<std::size_t> seg_set(seg.begin(), seg.end());
  seg_set.erase(target);

  Rng prng(78);
  FakeProfile fp = segment_profile(g, target, 30, prng);
  REQUIRE(fp.items.size() == 30);
  CHECK(item_set(fp).size() == 30);
  CHECK(fp.items[0] == target);
  CHECK(fp.ratings[0] == g.r_max());
  for (std::size_t i = 1; i < fp.items.size(); ++i) {
    if (seg_set.count(fp.items[i])) {
      CHECK(fp.ratings[i] == g.r_max());
    } else {
      CHECK(fp.ratings[i] == 1.0);
    }
  }
}

TEST_CASE("baseline contracts") {
  Rng rng(37);
  RatingGraph g = fixed_graph(10, 8, rng);
  Rng prng(1);
  CHECK_THROWS_AS(random_profile(g, 20, 3, prng), LookupError);
  CHECK_THROWS_AS(random_profile(g, 0, 0, prng), ContractError);
  CHECK_THROWS_AS(random_profile(g, 0, 9, prng), ContractError);
  CHECK_THROWS_AS(bandwagon_profile(g, 0, 0, prng), ContractError);
  CHECK_THROWS_AS(segment_profile(g, 0, 9, prng), ContractError);
}

TEST_CASE("heuristic dispatch is deterministic per seed") {
  Rng rng(43);
  RatingGraph g = fixed_graph(30, 25, rng);
  AttackConfig cfg;
  cfg.method = AttackMethod::kBandwagon;
  cfg.target = 4;
  cfg.budget_users = 3;
  cfg.budget_items = 10;
  cfg.seed = 99;

  auto a = generate_profiles(g, cfg);
  auto b = generate_profiles(g, cfg);
  REQUIRE(a.size() == 3);
  REQUIRE(b.size() == 3);
  for (std::size_t p = 0; p < 3; ++p) {
    CHECK(a[p].items == b[p].items);
    CHECK(a[p].ratings == b[p].ratings);
    CHECK(a[p].seed == b[p].seed);
  }

  cfg.seed = 100;
  auto c = generate_profiles(g, cfg);
  bool same = true;
  for (std::size_t p = 0; p < 3; ++p) {
    if (a[p].items != c[p].items) same = false;
  }
  CHECK_FALSE(same);

  // Distinct profiles within one batch: fillers are redrawn per profile.
  bool all_equal = a[0].items == a[1].items && a[1].items == a[2].items;
  CHECK_FALSE(all_equal);
}

TEST_CASE("config hash separates configs") {
  AttackConfig a;
  AttackConfig b = a;
  CHECK(attack_config_hash(a) == attack_config_hash(b));
  b.seed = 1;
  CHECK(attack_config_hash(a) != attack_config_hash(b));
  b = a;
  b.target = 3;
  CHECK(attack_config_hash(a) != attack_config_hash(b));
  b = a;
  b.tau = 0.2;
  CHECK(attack_config_hash(a) != attack_config_hash(b));
  b = a;
  b.ablation.no_influence = true;
  CHECK(attack_config_hash(a) != attack_config_hash(b));
  b = a;
  b.method = AttackMethod::kSegment;
  CHECK(attack_config_hash(a) != attack_config_hash(b));
}

TEST_CASE("method names round-trip") {
  for (AttackMethod m : {AttackMethod::kNodegen, AttackMethod::kRandom,
                         AttackMethod::kBandwagon, AttackMethod::kSegment}) {
    CHECK(attack_method_from_name(attack_method_name(m)) == m);
  }
  CHECK_THROWS_AS(attack_method_from_name("popular"), ParseError);
}

TEST_CASE("learned attack emits a valid deterministic profile") {
  Rng rng(47);
  RatingGraph g = fixed_graph(30, 20, rng);
  AttackConfig cfg = small_nodegen(6, 7);

  AttackResult res = run_attack(g, cfg);
  REQUIRE(res.profiles.size() == 1);
  const FakeProfile& fp = res.profiles[0];
  REQUIRE(!fp.items.empty());
  CHECK(fp.items.size() <= cfg.budget_items);
  CHECK(item_set(fp).size() == fp.items.size());
  std::set<std::size_t> cand_set(res.candidates.begin(), res.candidates.end());
  bool target_at_max = false;
  for (std::size_t i = 0; i < fp.items.size(); ++i) {
    CHECK(cand_set.count(fp.items[i]) == 1);
    if (fp.items[i] == cfg.target) {
      target_at_max = fp.ratings[i] == g.r_max();
    }
  }
  CHECK(target_at_max);
  REQUIRE(fp.features.size() == 10);
  REQUIRE(fp.edge_weights.size() == fp.items.size());
  REQUIRE(res.loss_trace.size() == cfg.epochs);
  for (double l : res.loss_trace) CHECK(std::isfinite(l));

  AttackResult again = run_attack(g, cfg);
  CHECK(again.profiles[0].items == fp.items);
  CHECK(again.profiles[0].ratings == fp.ratings);
  CHECK(again.profiles[0].features == fp.features);
  CHECK(again.loss_trace == res.loss_trace);
}

TEST_CASE("multi-user emission redraws noise per profile") {
  Rng rng(53);
  RatingGraph g = fixed_graph(30, 20, rng);
  AttackConfig cfg = small_nodegen(3, 11);
  cfg.budget_users = 6;
  cfg.budget_items = 4;

  AttackResult res = run_attack(g, cfg);
  REQUIRE(res.profiles.size() == 6);
  std::set<std::set<std::size_t>> distinct;
  for (const FakeProfile& fp : res.profiles) {
    CHECK(item_set(fp).count(cfg.target) == 1);
    CHECK(fp.items.size() <= cfg.budget_items);
    distinct.insert(item_set(fp));
  }
  CHECK(distinct.size() >= 5);
  // Seeds differ per profile, so the noise streams do too.
  CHECK(res.profiles[0].seed != res.profiles[1].seed);
}

TEST_CASE("ablations keep the emission contract") {
  Rng rng(59);
  RatingGraph g = fixed_graph(30, 20, rng);

  AttackConfig cfg = small_nodegen(2, 13);
  cfg.budget_users = 2;
  cfg.budget_items = 4;
  cfg.ablation.random_edges = true;
  AttackResult re = run_attack(g, cfg);
  REQUIRE(re.profiles.size() == 2);
  std::set<std::size_t> cand_set(re.candidates.begin(), re.candidates.end());
  for (const FakeProfile& fp : re.profiles) {
    REQUIRE(fp.items.size() == cfg.budget_items);
    CHECK(item_set(fp).size() == cfg.budget_items);
    CHECK(item_set(fp).count(cfg.target) == 1);
    for (std::size_t s : fp.items) CHECK(cand_set.count(s) == 1);
    for (double w : fp.edge_weights) CHECK(w == 1.0);
  }
  CHECK(item_set(re.profiles[0]) != item_set(re.profiles[1]));

  AttackConfig cf = small_nodegen(2, 13);
  cf.ablation.random_features = true;
  AttackResult rf = run_attack(g, cf);
  REQUIRE(rf.profiles.size() == 1);
  for (double v : rf.profiles[0].features) {
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
  }
  CHECK(item_set(rf.profiles[0]).count(cf.target) == 1);

  AttackConfig cn = small_nodegen(2, 13);
  cn.ablation.no_influence = true;
  AttackResult rn = run_attack(g, cn);
  REQUIRE(rn.profiles.size() == 1);
  for (double l : rn.loss_trace) CHECK(std::isfinite(l));

  AttackConfig bad = small_nodegen(2, 13);
  bad.ablation.random_features = true;
  bad.ablation.random_edges = true;
  CHECK_THROWS_AS(run_attack(g, bad), ContractError);
}

TEST_CASE("learned attack contracts") {
  Rng rng(61);
  RatingGraph g = fixed_graph(10, 8, rng);
  AttackConfig cfg = small_nodegen(0, 1);
  cfg.method = AttackMethod::kRandom;
  CHECK_THROWS_AS(run_attack(g, cfg), ContractError);
  cfg = small_nodegen(0, 1);
  cfg.budget_users = 0;
  CHECK_THROWS_AS(run_attack(g, cfg), ContractError);
  cfg = small_nodegen(0, 1);
  cfg.epochs = 0;
  CHECK_THROWS_AS(run_attack(g, cfg), ContractError);
  cfg = small_nodegen(40, 1);
  CHECK_THROWS_AS(run_attack(g, cfg), LookupError);
}

TEST_CASE("sparse neighborhoods cannot cover the item budget") {
  // User 0 rates the target and one other item; everyone else lives in a
  // far corner of the catalog, so the candidate pool stays tiny.
  std::vector<Rating> rs = {{0, 0, 5}, {0, 1, 4}};
  for (std::size_t u = 1; u < 12; ++u) {
    for (std::size_t i = 0; i < 4; ++i) {
      rs.push_back({u, 20 + ((u + i) % 20), 1.0 + double((u + i) % 5)});
    }
  }
  RatingGraph g = RatingGraph::from_ratings(12, 40, rs, 5.0);
  AttackConfig cfg = small_nodegen(0, 3);
  cfg.budget_items = 10;
  CHECK_THROWS_AS(run_attack(g, cfg), ContractError);
}

TEST_CASE("profile export round-trips") {
  Rng rng(67);
  RatingGraph g = fixed_graph(20, 15, rng);
  AttackConfig cfg;
  cfg.method = AttackMethod::kRandom;
  cfg.target = 2;
  cfg.budget_users = 4;
  cfg.budget_items = 6;
  cfg.seed = 5;
  auto profiles = generate_profiles(g, cfg);

  auto path = (std::filesystem::temp_directory_path() / "profiles.txt").string();
  write_profiles(path, profiles, cfg);

  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header.rfind("# config ", 0) == 0);
  CHECK(header.find("seed 5") != std::string::npos);
  in.close();

  auto back = read_profiles(path);
  REQUIRE(back.size() == profiles.size());
  for (std::size_t p = 0; p < back.size(); ++p) {
    CHECK(back[p].items == profiles[p].items);
    CHECK(back[p].ratings == profiles[p].ratings);
  }

  auto bad = (std::filesystem::temp_directory_path() / "bad_profiles.txt").string();
  {
    std::ofstream out(bad);
    out << "# header\n3:4 junk\n";
  }
  CHECK_THROWS_AS(read_profiles(bad), ParseError);
  CHECK_THROWS_AS(read_profiles("/nonexistent/profiles.txt"), ParseError);
}
