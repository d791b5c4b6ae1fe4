#pragma once

#include <cstddef>
#include <vector>

#include "shillab/rating_graph.hpp"
#include "shillab/rng.hpp"
#include "shillab/tensor.hpp"

namespace shillab {

// Ridge-regularized explicit matrix factorization fit by alternating least
// squares. Loss: sum of squared rating errors + lambda*(|U|^2 + |V|^2).
struct SurrogateMF {
  num::Tensor user_factors;  // num_users x rank
  num::Tensor item_factors;  // num_items x rank
  std::size_t rank = 0;
  double lambda = 0.05;
  std::vector<double> loss_trace;  // training loss after each full sweep
  double final_rmse = 0.0;

  double predict(std::size_t user, std::size_t item) const;
  double loss(const RatingGraph& g) const;
  double rmse(const RatingGraph& g) const;

  std::size_t param_count() const {
    return (user_factors.rows() + item_factors.rows()) * rank;
  }
};

SurrogateMF train_surrogate(const RatingGraph& g, std::size_t rank,
                            double lambda, std::size_t epochs, Rng& rng);

// Continues ALS sweeps from an existing model on a (possibly modified) graph
// with the same node counts. Used for warm-started retraining.
SurrogateMF refit_surrogate(const SurrogateMF& init, const RatingGraph& g,
                            std::size_t epochs);

}  // namespace shillab
