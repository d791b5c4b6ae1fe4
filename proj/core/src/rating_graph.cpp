#include "shillab/rating_graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "shillab/errors.hpp"

namespace shillab {

std::string DatasetStats::table() const {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof(line), "%-12s %-12s %-14s %-10s\n", "users",
                "items", "interactions", "sparsity");
  os << line;
  std::snprintf(line, sizeof(line), "%-12zu %-12zu %-14zu %.4f%%\n", users,
                items, interactions, sparsity * 100.0);
  os << line;
  return os.str();
}

RatingGraph RatingGraph::from_ratings(std::size_t n_users, std::size_t n_items,
                                      std::vector<Rating> ratings,
                                      double r_max) {
  if (r_max <= 1.0)
    throw ContractError("RatingGraph: r_max must exceed 1");
  RatingGraph g;
  g.n_users_ = n_users;
  g.n_items_ = n_items;
  g.r_max_ = r_max;
  g.ratings_ = std::move(ratings);
  g.user_profiles_.assign(n_users, {});
  g.item_raters_.assign(n_items, {});

  double total = 0.0;
  for (const Rating& r : g.ratings_) {
    if (r.user >= n_users || r.item >= n_items)
      throw ContractError("RatingGraph: rating references unknown node");
    if (r.value < 1.0 || r.value > r_max)
      throw ContractError("RatingGraph: rating " + std::to_string(r.value) +
                          " outside [1, " + std::to_string(r_max) + "]");
    g.user_profiles_[r.user].emplace_back(r.item, r.value);
    g.item_raters_[r.item].emplace_back(r.user, r.value);
    total += r.value;
  }
  for (auto& p : g.user_profiles_) {
    std::sort(p.begin(), p.end());
    for (std::size_t k = 1; k < p.size(); ++k)
      if (p[k].first == p[k - 1].first)
        throw ContractError("RatingGraph: duplicate (user,item) pair");
  }
  for (auto& p : g.item_raters_) std::sort(p.begin(), p.end());

  g.global_mean_ =
      g.ratings_.empty() ? 0.0 : total / static_cast<double>(g.ratings_.size());
  g.user_means_.assign(n_users, 0.0);
  g.item_means_.assign(n_items, 0.0);
  for (std::size_t u = 0; u < n_users; ++u) {
    const auto& p = g.user_profiles_[u];
    if (p.empty()) continue;
    double s = 0.0;
    for (const auto& [i, v] : p) s += v;
    g.user_means_[u] = s / static_cast<double>(p.size());
  }
  for (std::size_t i = 0; i < n_items; ++i) {
    const auto& p = g.item_raters_[i];
    if (p.empty()) continue;
    double s = 0.0;
    for (const auto& [u, v] : p) s += v;
    g.item_means_[i] = s / static_cast<double>(p.size());
  }
  return g;
}

const std::vector<std::pair<std::size_t, double>>& RatingGraph::user_profile(
    std::size_t u) const {
  if (u >= n_users_)
    throw LookupError("user_profile: unknown user " + std::to_string(u));
  return user_profiles_[u];
}

const std::vector<std::pair<std::size_t, double>>& RatingGraph::item_raters(
    std::size_t i) const {
  if (i >= n_items_)
    throw LookupError("item_raters: unknown item " + std::to_string(i));
  return item_raters_[i];
}

std::size_t RatingGraph::user_degree(std::size_t u) const {
  return user_profile(u).size();
}

std::size_t RatingGraph::item_degree(std::size_t i) const {
  return item_raters(i).size();
}

double RatingGraph::user_mean(std::size_t u) const {
  if (u >= n_users_)
    throw LookupError("user_mean: unknown user " + std::to_string(u));
  return user_means_[u];
}

double RatingGraph::item_mean(std::size_t i) const {
  if (i >= n_items_)
    throw LookupError("item_mean: unknown item " + std::to_string(i));
  return item_means_[i];
}

std::optional<double> RatingGraph::rating(std::size_t u, std::size_t i) const {
  const auto& p = user_profile(u);
  auto it = std::lower_bound(
      p.begin(), p.end(), i,
      [](const std::pair<std::size_t, double>& e, std::size_t key) {
        return e.first < key;
      });
  if (it != p.end() && it->first == i) return it->second;
  return std::nullopt;
}

DatasetStats RatingGraph::stats() const {
  DatasetStats s;
  s.users = n_users_;
  s.items = n_items_;
  s.interactions = ratings_.size();
  double cells = static_cast<double>(n_users_) * static_cast<double>(n_items_);
  s.sparsity = cells == 0.0 ? 0.0 : 1.0 - s.interactions / cells;
  return s;
}

namespace {

std::vector<std::size_t> top_by_degree(const std::vector<std::size_t>& degrees,
                                       double fraction) {
  if (fraction <= 0.0 || fraction > 1.0)
    throw ContractError("popular set: fraction must lie in (0, 1]");
  std::size_t n = degrees.size();
  std::size_t k = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(n)));
  k = std::min(k, n);
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  std::sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) {
    if (degrees[a] != degrees[b]) return degrees[a] > degrees[b];
    return a < b;
  });
  ids.resize(k);
  return ids;
}

}  // namespace

std::vector<std::size_t> RatingGraph::popular_items(double fraction) const {
  std::vector<std::size_t> deg(n_items_);
  for (std::size_t i = 0; i < n_items_; ++i) deg[i] = item_raters_[i].size();
  return top_by_degree(deg, fraction);
}

std::vector<std::size_t> RatingGraph::popular_users(double fraction) const {
  std::vector<std::size_t> deg(n_users_);
  for (std::size_t u = 0; u < n_users_; ++u) deg[u] = user_profiles_[u].size();
  return top_by_degree(deg, fraction);
}

std::vector<std::size_t> RatingGraph::two_hop_items(std::size_t target) const {
  if (target >= n_items_)
    throw LookupError("two_hop_items: unknown item " + std::to_string(target));
  std::vector<char> seen(n_items_, 0);
  for (const auto& [u, v] : item_raters_[target]) {
    (void)v;
    for (const auto& [j, w] : user_profiles_[u]) {
      (void)w;
      seen[j] = 1;
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < n_items_; ++j)
    if (seen[j] && j != target) out.push_back(j);
  return out;
}

RatingGraph RatingGraph::inject_profile(const FakeProfile& profile) const {
  if (profile.items.empty())
    throw ContractError("inject_profile: empty profile");
  if (profile.items.size() != profile.ratings.size())
    throw ContractError("inject_profile: item/rating count mismatch");
  std::vector<Rating> all = ratings_;
  std::size_t z = n_users_;
  for (std::size_t k = 0; k < profile.items.size(); ++k) {
    if (profile.items[k] >= n_items_)
      throw ContractError("inject_profile: unknown item " +
                          std::to_string(profile.items[k]));
    all.push_back({z, profile.items[k], profile.ratings[k]});
  }
  return from_ratings(n_users_ + 1, n_items_, std::move(all), r_max_);
}

std::vector<double> quantile_bin(const std::vector<double>& values,
                                 std::size_t buckets) {
  if (buckets < 2) throw ContractError("quantile_bin: need at least 2 buckets");
  if (values.empty()) return {};
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  std::size_t n = sorted.size();
  // equal-mass thresholds; bucket b covers values up to the b-th n/buckets
  // quantile
  std::vector<double> thresh(buckets);
  for (std::size_t b = 1; b <= buckets; ++b) {
    double q = static_cast<double>(n) * static_cast<double>(b) /
               static_cast<double>(buckets);
    std::size_t idx = static_cast<std::size_t>(std::ceil(q)) - 1;
    thresh[b - 1] = sorted[std::min(idx, n - 1)];
  }
  std::vector<double> out(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) {
    std::size_t b = 0;
    while (b + 1 < buckets && values[k] > thresh[b]) ++b;
    out[k] = static_cast<double>(b + 1);
  }
  return out;
}

RatingGraph load_ratings(const std::string& path, const RatingScale& scale) {
  std::ifstream in(path);
  if (!in) throw ParseError("load_ratings: cannot open " + path);

  std::unordered_map<std::string, std::size_t> user_ids, item_ids;
  // last occurrence of a (user,item) pair wins
  std::unordered_map<std::uint64_t, std::size_t> pair_slot;
  std::vector<Rating> ratings;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    for (char& c : line)
      if (c == ',' || c == '\t') c = ' ';
    std::istringstream ls(line);
    std::string ut, it, vt;
    if (!(ls >> ut)) continue;  // blank line
    if (!(ls >> it >> vt))
      throw ParseError("load_ratings: line " + std::to_string(lineno) +
                       ": expected 'user item value'");
    double value;
    try {
      std::size_t used = 0;
      value = std::stod(vt, &used);
      if (used != vt.size()) throw std::invalid_argument(vt);
    } catch (const std::exception&) {
      throw ParseError("load_ratings: line " + std::to_string(lineno) +
                       ": bad value '" + vt + "'");
    }
    std::string extra;
    if (ls >> extra)
      throw ParseError("load_ratings: line " + std::to_string(lineno) +
                       ": trailing token '" + extra + "'");

    std::size_t u = user_ids.emplace(ut, user_ids.size()).first->second;
    std::size_t i = item_ids.emplace(it, item_ids.size()).first->second;
    std::uint64_t key = (static_cast<std::uint64_t>(u) << 32) |
                        static_cast<std::uint64_t>(i);
    auto [slot, fresh] = pair_slot.emplace(key, ratings.size());
    if (fresh)
      ratings.push_back({u, i, value});
    else
      ratings[slot->second].value = value;
  }
  if (ratings.empty()) throw ParseError("load_ratings: empty file " + path);

  if (scale.kind == RatingKind::kImplicitCounts) {
    std::vector<double> raw(ratings.size());
    for (std::size_t k = 0; k < ratings.size(); ++k) raw[k] = ratings[k].value;
    std::vector<double> binned =
        quantile_bin(raw, static_cast<std::size_t>(scale.r_max));
    for (std::size_t k = 0; k < ratings.size(); ++k)
      ratings[k].value = binned[k];
  }

  return RatingGraph::from_ratings(user_ids.size(), item_ids.size(),
                                   std::move(ratings), scale.r_max);
}

}  // namespace shillab
