#include "shillab/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "shillab/errors.hpp"

namespace shillab {

namespace {

constexpr std::size_t kFillerSampleCap = 50;

// One side of the bipartite graph seen as "profiles over counterparts".
struct SideContext {
  std::vector<std::size_t> own_degrees;
  double mean_degree = 0.0;
  std::vector<double> counterpart_means;
  std::vector<std::size_t> counterpart_degrees;
  std::size_t counterpart_total = 0;
  std::vector<char> popular_counterpart;
  double r_max = 5.0;
  double r_avg = 0.0;
};

SideContext user_side(const RatingGraph& g) {
  SideContext s;
  s.own_degrees.resize(g.num_users());
  for (std::size_t u = 0; u < g.num_users(); ++u)
    s.own_degrees[u] = g.user_degree(u);
  s.counterpart_means.resize(g.num_items());
  s.counterpart_degrees.resize(g.num_items());
  for (std::size_t i = 0; i < g.num_items(); ++i) {
    s.counterpart_means[i] = g.item_mean(i);
    s.counterpart_degrees[i] = g.item_degree(i);
  }
  s.counterpart_total = g.num_items();
  s.popular_counterpart.assign(g.num_items(), 0);
  for (std::size_t i : g.popular_items(kPopularFraction))
    s.popular_counterpart[i] = 1;
  s.r_max = g.r_max();
  s.r_avg = g.global_mean();
  double sum = 0.0;
  for (std::size_t d : s.own_degrees) sum += static_cast<double>(d);
  s.mean_degree = s.own_degrees.empty()
                      ? 0.0
                      : sum / static_cast<double>(s.own_degrees.size());
  return s;
}

SideContext item_side(const RatingGraph& g) {
  SideContext s;
  s.own_degrees.resize(g.num_items());
  for (std::size_t i = 0; i < g.num_items(); ++i)
    s.own_degrees[i] = g.item_degree(i);
  s.counterpart_means.resize(g.num_users());
  s.counterpart_degrees.resize(g.num_users());
  for (std::size_t u = 0; u < g.num_users(); ++u) {
    s.counterpart_means[u] = g.user_mean(u);
    s.counterpart_degrees[u] = g.user_degree(u);
  }
  s.counterpart_total = g.num_users();
  s.popular_counterpart.assign(g.num_users(), 0);
  for (std::size_t u : g.popular_users(kPopularFraction))
    s.popular_counterpart[u] = 1;
  s.r_max = g.r_max();
  s.r_avg = g.global_mean();
  double sum = 0.0;
  for (std::size_t d : s.own_degrees) sum += static_cast<double>(d);
  s.mean_degree = s.own_degrees.empty()
                      ? 0.0
                      : sum / static_cast<double>(s.own_degrees.size());
  return s;
}

FeatureVector features_from(
    const SideContext& s, std::size_t node,
    const std::vector<std::pair<std::size_t, double>>& profile, Rng& rng) {
  if (profile.empty())
    throw ContractError("features: node " + std::to_string(node) +
                        " has an empty profile");
  FeatureVector f;
  double n = static_cast<double>(profile.size());
  double own_mean = 0.0;
  for (const auto& [c, r] : profile) own_mean += r;
  own_mean /= n;

  for (const auto& [c, r] : profile)
    f.rdma += std::fabs(r - s.counterpart_means[c]) /
              static_cast<double>(s.counterpart_degrees[c]);
  f.rdma /= n;

  // denominator measures spread around this node's own degree, as defined
  double lv_den = 0.0;
  for (std::size_t d : s.own_degrees) {
    double diff = static_cast<double>(d) - n;
    lv_den += diff * diff;
  }
  f.length_var = lv_den == 0.0 ? 0.0 : (n - s.mean_degree) / lv_den;

  // hypothesized filler partition: the profile, subsampled past the cap
  std::vector<std::size_t> filler_idx;
  if (profile.size() <= kFillerSampleCap) {
    filler_idx.resize(profile.size());
    for (std::size_t k = 0; k < profile.size(); ++k) filler_idx[k] = k;
  } else {
    filler_idx =
        rng.sample_without_replacement(profile.size(), kFillerSampleCap);
  }
  double fac_num = 0.0, fac_den = 0.0;
  for (std::size_t k : filler_idx) {
    double dev = profile[k].second - s.counterpart_means[profile[k].first];
    f.fmv += dev * dev;
    fac_num += dev;
    fac_den += dev * dev;
  }
  f.fmv /= static_cast<double>(filler_idx.size());
  f.fac = fac_den == 0.0 ? 0.0 : fac_num / std::sqrt(fac_den);

  std::size_t max_count = 0, nonmax_count = 0;
  double nonmax_sum = 0.0, nonmax_var = 0.0;
  std::size_t popular_hits = 0, avg_hits = 0;
  double lo_avg = std::floor(s.r_avg), hi_avg = std::ceil(s.r_avg);
  for (const auto& [c, r] : profile) {
    if (r == s.r_max) {
      ++max_count;
    } else {
      ++nonmax_count;
      nonmax_sum += r;
      nonmax_var += (r - own_mean) * (r - own_mean);
    }
    if (s.popular_counterpart[c]) ++popular_hits;
    if (r == lo_avg || r == hi_avg) ++avg_hits;
  }
  f.mean_var = nonmax_count == 0
                   ? 0.0
                   : nonmax_var / static_cast<double>(nonmax_count);
  f.fmtd = (max_count == 0 || nonmax_count == 0)
               ? 0.0
               : std::fabs(s.r_max -
                           nonmax_sum / static_cast<double>(nonmax_count));
  f.fsti = n / static_cast<double>(s.counterpart_total);
  f.fspii = static_cast<double>(popular_hits) / n;
  f.fsmaxri = static_cast<double>(max_count) / n;
  f.fsari = static_cast<double>(avg_hits) / n;
  return f;
}

}  // namespace

FeatureVector compute_user_features(const RatingGraph& g, std::size_t user,
                                    Rng& rng) {
  return features_from(user_side(g), user, g.user_profile(user), rng);
}

FeatureVector compute_item_features(const RatingGraph& g, std::size_t item,
                                    Rng& rng) {
  return features_from(item_side(g), item, g.item_raters(item), rng);
}

namespace {

num::Tensor matrix_from_side(
    const RatingGraph& g, const SideContext& s, std::size_t count,
    const char* tag, std::uint64_t master_seed,
    const std::vector<std::pair<std::size_t, double>>& (RatingGraph::*prof)(
        std::size_t) const) {
  num::Tensor out(count, kFeatureDim);
  for (std::size_t node = 0; node < count; ++node) {
    Rng rng(derive_seed(master_seed, tag, node));
    FeatureVector f = features_from(s, node, (g.*prof)(node), rng);
    auto arr = f.to_array();
    for (std::size_t c = 0; c < kFeatureDim; ++c) out(node, c) = arr[c];
  }
  return out;
}

}  // namespace

num::Tensor user_feature_matrix(const RatingGraph& g,
                                std::uint64_t master_seed) {
  return matrix_from_side(g, user_side(g), g.num_users(), "user-features",
                          master_seed, &RatingGraph::user_profile);
}

num::Tensor item_feature_matrix(const RatingGraph& g,
                                std::uint64_t master_seed) {
  return matrix_from_side(g, item_side(g), g.num_items(), "item-features",
                          master_seed, &RatingGraph::item_raters);
}

std::pair<num::Tensor, NormParams> normalize_features(const num::Tensor& raw) {
  if (raw.empty()) throw ContractError("normalize_features: empty matrix");
  if (raw.cols() != kFeatureDim)
    throw ShapeError("normalize_features: expected " +
                     std::to_string(kFeatureDim) + " columns, got " +
                     std::to_string(raw.cols()));
  NormParams p;
  for (std::size_t c = 0; c < kFeatureDim; ++c) {
    double lo = raw(0, c), hi = raw(0, c);
    for (std::size_t r = 1; r < raw.rows(); ++r) {
      lo = std::min(lo, raw(r, c));
      hi = std::max(hi, raw(r, c));
    }
    p.min[c] = lo;
    p.max[c] = hi;
  }
  num::Tensor out(raw.rows(), raw.cols());
  for (std::size_t c = 0; c < kFeatureDim; ++c) {
    double span = p.max[c] - p.min[c];
    for (std::size_t r = 0; r < raw.rows(); ++r)
      out(r, c) = span == 0.0 ? 0.0 : (raw(r, c) - p.min[c]) / span;
  }
  return {std::move(out), p};
}

num::Tensor normalize_features_with(const num::Tensor& raw,
                                    const NormParams& params) {
  if (raw.empty()) throw ContractError("normalize_features_with: empty matrix");
  if (raw.cols() != kFeatureDim)
    throw ShapeError("normalize_features_with: expected " +
                     std::to_string(kFeatureDim) + " columns");
  num::Tensor out(raw.rows(), raw.cols());
  for (std::size_t c = 0; c < kFeatureDim; ++c) {
    double span = params.max[c] - params.min[c];
    for (std::size_t r = 0; r < raw.rows(); ++r) {
      double v = span == 0.0 ? 0.0 : (raw(r, c) - params.min[c]) / span;
      out(r, c) = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

std::array<double, kFeatureDim> normalize_row_with(
    const std::array<double, kFeatureDim>& raw, const NormParams& params) {
  std::array<double, kFeatureDim> out{};
  for (std::size_t c = 0; c < kFeatureDim; ++c) {
    double span = params.max[c] - params.min[c];
    double v = span == 0.0 ? 0.0 : (raw[c] - params.min[c]) / span;
    out[c] = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

void write_features_csv(const std::string& path, const num::Tensor& features) {
  if (features.cols() != kFeatureDim)
    throw ShapeError("write_features_csv: expected " +
                     std::to_string(kFeatureDim) + " columns");
  std::ofstream out(path);
  if (!out) throw ParseError("write_features_csv: cannot open " + path);
  for (std::size_t c = 0; c < kFeatureDim; ++c)
    out << kFeatureNames[c] << (c + 1 < kFeatureDim ? "," : "\n");
  char buf[64];
  for (std::size_t r = 0; r < features.rows(); ++r)
    for (std::size_t c = 0; c < kFeatureDim; ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", features(r, c));
      out << buf << (c + 1 < kFeatureDim ? "," : "\n");
    }
}

}  // namespace shillab
