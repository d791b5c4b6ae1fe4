#pragma once

// Deliberately naive re-derivation of the ten graph features straight from the
// flat rating list. Shares nothing with the library implementation except the
// seeded sampling stream, which both sides must consume identically.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "shillab/rating_graph.hpp"
#include "shillab/rng.hpp"

namespace testsupport::oracle {

using shillab::Rating;

struct Flat {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  double r_max = 5.0;
  std::vector<Rating> ratings;
};

inline Flat flatten(const shillab::RatingGraph& g) {
  return {g.num_users(), g.num_items(), g.r_max(), g.ratings()};
}

inline std::vector<std::pair<std::size_t, double>> profile_of_user(
    const Flat& g, std::size_t u) {
  std::vector<std::pair<std::size_t, double>> p;
  for (const Rating& r : g.ratings)
    if (r.user == u) p.emplace_back(r.item, r.value);
  std::sort(p.begin(), p.end());
  return p;
}

inline std::vector<std::pair<std::size_t, double>> profile_of_item(
    const Flat& g, std::size_t i) {
  std::vector<std::pair<std::size_t, double>> p;
  for (const Rating& r : g.ratings)
    if (r.item == i) p.emplace_back(r.user, r.value);
  std::sort(p.begin(), p.end());
  return p;
}

inline double mean_rating_of_item(const Flat& g, std::size_t i) {
  double s = 0.0;
  std::size_t c = 0;
  for (const Rating& r : g.ratings)
    if (r.item == i) {
      s += r.value;
      ++c;
    }
  return c == 0 ? 0.0 : s / static_cast<double>(c);
}

inline double mean_rating_of_user(const Flat& g, std::size_t u) {
  double s = 0.0;
  std::size_t c = 0;
  for (const Rating& r : g.ratings)
    if (r.user == u) {
      s += r.value;
      ++c;
    }
  return c == 0 ? 0.0 : s / static_cast<double>(c);
}

inline std::size_t degree_of_item(const Flat& g, std::size_t i) {
  std::size_t c = 0;
  for (const Rating& r : g.ratings)
    if (r.item == i) ++c;
  return c;
}

inline std::size_t degree_of_user(const Flat& g, std::size_t u) {
  std::size_t c = 0;
  for (const Rating& r : g.ratings)
    if (r.user == u) ++c;
  return c;
}

inline double global_mean(const Flat& g) {
  double s = 0.0;
  for (const Rating& r : g.ratings) s += r.value;
  return g.ratings.empty() ? 0.0
                           : s / static_cast<double>(g.ratings.size());
}

// Top ceil(5% of n) node ids by degree, ties to the lower id.
inline std::vector<std::size_t> popular_nodes(
    const std::vector<std::size_t>& degrees) {
  std::size_t n = degrees.size();
  std::size_t k = static_cast<std::size_t>(
      std::ceil(0.05 * static_cast<double>(n)));
  if (k > n) k = n;
  std::vector<std::size_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = i;
  std::stable_sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) {
    if (degrees[a] != degrees[b]) return degrees[a] > degrees[b];
    return a < b;
  });
  ids.resize(k);
  return ids;
}

// Generic over the role swap: `profile` maps a node to (counterpart, rating)
// pairs; counterpart stats follow the opposite side.
struct Role {
  std::vector<std::vector<std::pair<std::size_t, double>>> profiles;
  std::vector<double> counterpart_mean;
  std::vector<std::size_t> counterpart_degree;
  std::size_t counterpart_count = 0;
  std::vector<std::size_t> popular_counterparts;
  double r_max = 5.0;
  double r_avg = 0.0;
};

inline Role user_role(const Flat& g) {
  Role r;
  r.profiles.resize(g.num_users);
  for (std::size_t u = 0; u < g.num_users; ++u)
    r.profiles[u] = profile_of_user(g, u);
  r.counterpart_mean.resize(g.num_items);
  r.counterpart_degree.resize(g.num_items);
  for (std::size_t i = 0; i < g.num_items; ++i) {
    r.counterpart_mean[i] = mean_rating_of_item(g, i);
    r.counterpart_degree[i] = degree_of_item(g, i);
  }
  r.counterpart_count = g.num_items;
  r.popular_counterparts = popular_nodes(r.counterpart_degree);
  r.r_max = g.r_max;
  r.r_avg = global_mean(g);
  return r;
}

inline Role item_role(const Flat& g) {
  Role r;
  r.profiles.resize(g.num_items);
  for (std::size_t i = 0; i < g.num_items; ++i)
    r.profiles[i] = profile_of_item(g, i);
  r.counterpart_mean.resize(g.num_users);
  r.counterpart_degree.resize(g.num_users);
  for (std::size_t u = 0; u < g.num_users; ++u) {
    r.counterpart_mean[u] = mean_rating_of_user(g, u);
    r.counterpart_degree[u] = degree_of_user(g, u);
  }
  r.counterpart_count = g.num_users;
  r.popular_counterparts = popular_nodes(r.counterpart_degree);
  r.r_max = g.r_max;
  r.r_avg = global_mean(g);
  return r;
}

// Ten features of one node, formula by formula. The filler partition uses the
// same seeded draw the library makes.
inline std::array<double, 10> features(const Role& role, std::size_t node,
                                       std::uint64_t master_seed,
                                       const char* tag) {
  const auto& prof = role.profiles[node];
  double n = static_cast<double>(prof.size());

  double rdma = 0.0;
  for (const auto& [c, r] : prof)
    rdma += std::fabs(r - role.counterpart_mean[c]) /
            static_cast<double>(role.counterpart_degree[c]);
  rdma /= n;

  double mean_deg = 0.0;
  for (const auto& p : role.profiles)
    mean_deg += static_cast<double>(p.size());
  mean_deg /= static_cast<double>(role.profiles.size());
  double lv_den = 0.0;
  for (const auto& p : role.profiles) {
    double d = static_cast<double>(p.size()) - n;
    lv_den += d * d;
  }
  double length_var = lv_den == 0.0 ? 0.0 : (n - mean_deg) / lv_den;

  std::vector<std::pair<std::size_t, double>> filler;
  if (prof.size() <= 50) {
    filler = prof;
  } else {
    shillab::Rng rng(shillab::derive_seed(master_seed, tag, node));
    for (std::size_t k : rng.sample_without_replacement(prof.size(), 50))
      filler.push_back(prof[k]);
  }
  double fmv = 0.0, fac_num = 0.0, fac_den = 0.0;
  for (const auto& [c, r] : filler) {
    double d = r - role.counterpart_mean[c];
    fmv += d * d;
    fac_num += d;
    fac_den += d * d;
  }
  fmv /= static_cast<double>(filler.size());
  double fac = fac_den == 0.0 ? 0.0 : fac_num / std::sqrt(fac_den);

  double own_mean = 0.0;
  for (const auto& [c, r] : prof) own_mean += r;
  own_mean /= n;

  std::vector<double> not_max;
  std::size_t max_count = 0;
  for (const auto& [c, r] : prof) {
    if (r == role.r_max)
      ++max_count;
    else
      not_max.push_back(r);
  }
  double mean_var = 0.0;
  if (!not_max.empty()) {
    for (double r : not_max) mean_var += (r - own_mean) * (r - own_mean);
    mean_var /= static_cast<double>(not_max.size());
  }
  double fmtd = 0.0;
  if (max_count > 0 && !not_max.empty()) {
    double s = 0.0;
    for (double r : not_max) s += r;
    fmtd = std::fabs(role.r_max - s / static_cast<double>(not_max.size()));
  }

  double fsti = n / static_cast<double>(role.counterpart_count);

  double fspii = 0.0;
  for (std::size_t p : role.popular_counterparts)
    for (const auto& [c, r] : prof)
      if (c == p) fspii += 1.0;
  fspii /= n;

  double fsmaxri = static_cast<double>(max_count) / n;

  double fsari = 0.0;
  for (const auto& [c, r] : prof)
    if (r == std::floor(role.r_avg) || r == std::ceil(role.r_avg))
      fsari += 1.0;
  fsari /= n;

  return {rdma, length_var, fmv,   fac,     mean_var,
          fmtd, fsti,       fspii, fsmaxri, fsari};
}

}  // namespace testsupport::oracle
