#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shillab/rating_graph.hpp"
#include "shillab/tensor.hpp"

namespace shillab {

// Item-based CF over mean-centered item rating vectors. Neighborhood lists
// keep the n_sim most similar items with nonzero similarity, most similar
// first, ties by ascending id; an item never neighbors itself.
struct ItemCFModel {
  num::Tensor sim;  // n_items x n_items, symmetric, unit diagonal
  std::size_t n_sim = 20;
  std::vector<std::vector<std::size_t>> neighbors;

  // Weighted neighborhood vote sum(sim * r) / sum(|sim|); 0 when the user
  // rates none of the neighbors.
  double score(const RatingGraph& g, std::size_t user, std::size_t item) const;
};

ItemCFModel train_itemcf(const RatingGraph& g, std::size_t n_sim = 20);

// Implicit-feedback weighted MF: preference 1 iff rated, confidence
// 1 + alpha_conf * r, alternating ridge solves over the full pair grid.
struct WMFModel {
  num::Tensor user_factors;  // |U| x rank
  num::Tensor item_factors;  // |I| x rank
  std::size_t rank = 32;
  double alpha_conf = 40.0;
  double lambda = 0.1;
  std::vector<double> loss_trace;  // weighted objective after each sweep

  double score(std::size_t user, std::size_t item) const;
};

WMFModel train_wmf(const RatingGraph& g, std::size_t rank = 32,
                   double alpha_conf = 40.0, double lambda = 0.1,
                   std::size_t sweeps = 15, std::uint64_t seed = 0);

// k highest-scoring items the user has not rated, ties by ascending id.
std::vector<std::size_t> recommend_topk(const ItemCFModel& m,
                                        const RatingGraph& g,
                                        std::size_t user, std::size_t k);
std::vector<std::size_t> recommend_topk(const WMFModel& m,
                                        const RatingGraph& g,
                                        std::size_t user, std::size_t k);

void save_itemcf(const std::string& path, const ItemCFModel& m);
ItemCFModel load_itemcf(const std::string& path);
void save_wmf(const std::string& path, const WMFModel& m);
WMFModel load_wmf(const std::string& path);

}  // namespace shillab
