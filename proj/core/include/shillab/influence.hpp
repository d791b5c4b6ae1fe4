#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "shillab/autodiff.hpp"
#include "shillab/features.hpp"
#include "shillab/rating_graph.hpp"
#include "shillab/rng.hpp"
#include "shillab/surrogate.hpp"

namespace shillab {

// Parameter vectors over a SurrogateMF are flat: user factor rows first, then
// item factor rows, row-major.

// Hessian-vector product of the surrogate training loss at the current
// factors, computed analytically.
std::vector<double> surrogate_hvp(const SurrogateMF& m, const RatingGraph& g,
                                  const std::vector<double>& w);

struct CgSolve {
  std::vector<double> x;
  double residual_norm = 0.0;
  std::size_t iterations = 0;
};

// Conjugate-gradient solve of (H + damping*I) x = v. Stops at residual
// <= 1e-6*|v| or 100 iterations.
CgSolve hvp_solve(const SurrogateMF& m, const RatingGraph& g,
                  const std::vector<double>& v, double damping);

// Promotion objective of the attack evaluated on the surrogate: for every
// user, the negative log-probability that the target tops the softmax over
// all item scores.
double surrogate_promotion_loss(const SurrogateMF& m, std::size_t target);

// Gradient of the promotion objective in flat parameter layout.
std::vector<double> surrogate_promotion_grad(const SurrogateMF& m,
                                             std::size_t target);

// Gradient of one user's squared-error training terms (no ridge part).
std::vector<double> surrogate_user_grad(const SurrogateMF& m,
                                        const RatingGraph& g,
                                        std::size_t user);

inline constexpr double kInfluenceDamping = 0.01;

// Scores every real user: larger means upweighting that user helps the
// promotion objective more. One Hessian-inverse solve per target.
class InfluenceScorer {
 public:
  InfluenceScorer(const SurrogateMF& m, const RatingGraph& g,
                  std::size_t target, double damping = kInfluenceDamping);

  double score(std::size_t user) const;
  std::vector<double> score_all() const;
  const CgSolve& solve_info() const { return solve_; }

 private:
  const SurrogateMF& model_;
  const RatingGraph& graph_;
  CgSolve solve_;
};

struct Standardized {
  std::vector<double> values;
  double mean = 0.0;
  double stddev = 0.0;  // 0 marks a degenerate population mapped to zeros
};

Standardized standardize(const std::vector<double>& xs);

// Three-layer regression head 10 -> hidden -> hidden -> 1, LeakyReLU between
// layers, linear output, trained on standardized influence targets.
struct InfluencePredictor {
  num::Tensor w1, b1, w2, b2, w3, b3;
  double slope = 0.1;

  static InfluencePredictor init(std::size_t hidden, Rng& rng);

  double predict(const std::array<double, kFeatureDim>& x) const;

  // Differentiable forward with frozen weights; x is a 1 x 10 row var.
  num::Var forward(num::Tape& tape, num::Var x) const;

  // Shared forward over explicit weight vars (used by training).
  static num::Var forward_with(num::Tape& tape, num::Var x, num::Var w1,
                               num::Var b1, num::Var w2, num::Var b2,
                               num::Var w3, num::Var b3, double slope);
};

struct IpTrainResult {
  InfluencePredictor predictor;
  std::vector<double> mse_trace;
  double final_mse = 0.0;
  double target_mean = 0.0;    // standardization applied to raw scores
  double target_stddev = 0.0;
};

// Standardizes raw scores internally, then fits by full-batch Adam.
IpTrainResult train_ip(const num::Tensor& features,
                       const std::vector<double>& raw_scores,
                       std::size_t epochs, Rng& rng,
                       std::size_t hidden = 64, double lr = 1e-3);

// Cache of per-user scores: "user,raw,standardized" CSV with header.
void write_influence_csv(const std::string& path,
                         const std::vector<double>& raw,
                         const std::vector<double>& standardized);
struct InfluenceCache {
  std::vector<double> raw;
  std::vector<double> standardized;
};
InfluenceCache read_influence_csv(const std::string& path);

}  // namespace shillab
