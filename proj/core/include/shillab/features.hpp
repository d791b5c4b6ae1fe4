#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "shillab/rating_graph.hpp"
#include "shillab/rng.hpp"
#include "shillab/tensor.hpp"

namespace shillab {

inline constexpr std::size_t kFeatureDim = 10;

inline constexpr std::array<const char*, kFeatureDim> kFeatureNames = {
    "rdma",  "length_var", "fmv",     "fac",   "mean_var",
    "fmtd",  "fsti",       "fspii",   "fsmaxri", "fsari"};

struct FeatureVector {
  double rdma = 0.0;
  double length_var = 0.0;
  double fmv = 0.0;
  double fac = 0.0;
  double mean_var = 0.0;
  double fmtd = 0.0;
  double fsti = 0.0;
  double fspii = 0.0;
  double fsmaxri = 0.0;
  double fsari = 0.0;

  std::array<double, kFeatureDim> to_array() const {
    return {rdma, length_var, fmv,   fac,     mean_var,
            fmtd, fsti,       fspii, fsmaxri, fsari};
  }
};

struct NormParams {
  std::array<double, kFeatureDim> min{};
  std::array<double, kFeatureDim> max{};
};

// Fraction of the node population treated as "popular" by the two
// popularity-share features.
inline constexpr double kPopularFraction = 0.05;

// Raw feature vector of one user. rng drives the at-most-50-item subsample of
// the hypothesized filler partition; profiles of size <= 50 ignore it.
FeatureVector compute_user_features(const RatingGraph& g, std::size_t user,
                                    Rng& rng);

// Same formulas with user/item roles swapped.
FeatureVector compute_item_features(const RatingGraph& g, std::size_t item,
                                    Rng& rng);

// Raw matrices, one row per node, columns in kFeatureNames order. Per-node
// sampling streams derive from master_seed so results are reproducible.
num::Tensor user_feature_matrix(const RatingGraph& g, std::uint64_t master_seed);
num::Tensor item_feature_matrix(const RatingGraph& g, std::uint64_t master_seed);

// Min-max scaling to [0,1] per column; constant columns map to 0.
std::pair<num::Tensor, NormParams> normalize_features(const num::Tensor& raw);

// Scaling with previously fitted params, clamped into [0,1].
num::Tensor normalize_features_with(const num::Tensor& raw,
                                    const NormParams& params);

std::array<double, kFeatureDim> normalize_row_with(
    const std::array<double, kFeatureDim>& raw, const NormParams& params);

// CSV with a 10-column header in feature order, one row per node.
void write_features_csv(const std::string& path, const num::Tensor& features);

}  // namespace shillab
