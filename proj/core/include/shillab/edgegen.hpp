#pragma once

#include <cstddef>
#include <vector>

#include "shillab/autodiff.hpp"
#include "shillab/rating_graph.hpp"
#include "shillab/rng.hpp"
#include "shillab/tensor.hpp"

namespace shillab {

// Candidate items a fake profile may connect to: the target's two-hop item
// neighborhood (ascending), then a sample of ceil(sample_fraction*|I|) drawn
// from the top popular_fraction items by rating count (draw order, duplicates
// and the target skipped), with the target itself appended last.
std::vector<std::size_t> build_candidates(const RatingGraph& g,
                                          std::size_t target, Rng& rng,
                                          double sample_fraction = 0.05,
                                          double popular_fraction = 0.10);

// Edge propensities o_j = (cos(xhat*W, x_j*W) + 1)/2, floored at 1e-8 so the
// log-space relaxation stays defined. xhat is 1 x 10, w_edge 10 x width,
// cand_features |C| x 10. Result is 1 x |C|.
num::Var score_candidates(num::Tape& tape, num::Var xhat, num::Var w_edge,
                          const num::Tensor& cand_features);

// Tempered softmax over log-propensities with optional Gumbel noise:
// softmax((log o + alpha*g)/tau). o is 1 x n with positive entries; noise is
// a non-differentiable constant drawn from rng (required when alpha > 0).
num::Var gumbel_softmax(num::Tape& tape, num::Var o, double tau, double alpha,
                        Rng* rng);

struct TopkResult {
  num::Var soft;                      // sum of the k relaxed rounds, 1 x n
  std::vector<std::size_t> selected;  // argmax per round, in draw order
};

// k sequential relaxed draws; after each round the winning position's logit
// is pushed to -1e9 so no index repeats.
TopkResult gumbel_topk(num::Tape& tape, num::Var o, std::size_t k, double tau,
                       double alpha, Rng* rng);

// Hard selection: indices whose soft weight reaches the threshold, truncated
// to the `cap` largest weights, returned ascending. When nothing qualifies,
// the single largest entry is returned instead.
std::vector<std::size_t> select_edges(const num::Tensor& soft,
                                      double threshold, std::size_t cap);

}  // namespace shillab
