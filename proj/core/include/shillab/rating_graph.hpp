#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace shillab {

struct Rating {
  std::size_t user = 0;
  std::size_t item = 0;
  double value = 0.0;
};

// One generated fake user, ready for injection.
struct FakeProfile {
  std::vector<std::size_t> items;
  std::vector<double> ratings;        // aligned with items
  std::vector<double> edge_weights;   // relaxed selection weights, optional
  std::vector<double> features;       // generated feature vector, optional
  std::uint64_t seed = 0;             // per-profile emission seed
};

struct DatasetStats {
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t interactions = 0;
  double sparsity = 0.0;  // 1 - interactions/(users*items)

  std::string table() const;
};

enum class RatingKind { kExplicit, kImplicitCounts };

struct RatingScale {
  double r_max = 5.0;
  RatingKind kind = RatingKind::kExplicit;
};

// Immutable user-item bipartite rating graph with the caches the rest of the
// pipeline reads. Mutations copy.
class RatingGraph {
 public:
  static RatingGraph from_ratings(std::size_t n_users, std::size_t n_items,
                                  std::vector<Rating> ratings, double r_max);

  std::size_t num_users() const { return n_users_; }
  std::size_t num_items() const { return n_items_; }
  std::size_t num_ratings() const { return ratings_.size(); }
  double r_max() const { return r_max_; }
  double global_mean() const { return global_mean_; }

  const std::vector<Rating>& ratings() const { return ratings_; }

  // Profiles are sorted by counterpart ID.
  const std::vector<std::pair<std::size_t, double>>& user_profile(
      std::size_t u) const;
  const std::vector<std::pair<std::size_t, double>>& item_raters(
      std::size_t i) const;

  std::size_t user_degree(std::size_t u) const;
  std::size_t item_degree(std::size_t i) const;
  double user_mean(std::size_t u) const;  // 0 for empty profile
  double item_mean(std::size_t i) const;

  std::optional<double> rating(std::size_t u, std::size_t i) const;

  DatasetStats stats() const;

  // Items with most ratings; ties broken by ascending ID.
  std::vector<std::size_t> popular_items(double fraction) const;
  // Users with largest profiles; same tie rule.
  std::vector<std::size_t> popular_users(double fraction) const;

  // Items co-rated with the target by at least one user, target excluded,
  // ascending.
  std::vector<std::size_t> two_hop_items(std::size_t target) const;

  // New graph with one extra user holding the profile.
  RatingGraph inject_profile(const FakeProfile& profile) const;

 private:
  std::size_t n_users_ = 0;
  std::size_t n_items_ = 0;
  double r_max_ = 5.0;
  double global_mean_ = 0.0;
  std::vector<Rating> ratings_;
  std::vector<std::vector<std::pair<std::size_t, double>>> user_profiles_;
  std::vector<std::vector<std::pair<std::size_t, double>>> item_raters_;
  std::vector<double> user_means_;
  std::vector<double> item_means_;
};

// Parses "user item value" lines (whitespace or comma separated), remaps
// tokens to dense 0-based IDs in first-appearance order, keeps the last
// occurrence of duplicate pairs. Implicit-count values are quantile-binned
// into 1..r_max equal-mass buckets.
RatingGraph load_ratings(const std::string& path, const RatingScale& scale);

// Equal-mass binning of raw counts into 1..buckets; monotone nondecreasing.
std::vector<double> quantile_bin(const std::vector<double>& values,
                                 std::size_t buckets);

}  // namespace shillab
