#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shillab/autodiff.hpp"
#include "shillab/encoder.hpp"
#include "shillab/rating_graph.hpp"
#include "shillab/rng.hpp"
#include "shillab/surrogate.hpp"
#include "shillab/tensor.hpp"

namespace shillab {

enum class AttackMethod { kNodegen, kRandom, kBandwagon, kSegment };

const char* attack_method_name(AttackMethod m);
AttackMethod attack_method_from_name(const std::string& name);

// Ablation switches for the learned attack. Heuristic baselines ignore them.
struct AblationFlags {
  bool random_features = false;  // fake features drawn at random, edges learned
  bool random_edges = false;     // features learned, edges drawn from candidates
  bool no_influence = false;     // drop the influence-predictor reward term
};

struct AttackConfig {
  AttackMethod method = AttackMethod::kNodegen;
  std::size_t target = 0;
  std::size_t budget_users = 1;   // fake profiles to emit
  std::size_t budget_items = 50;  // max items per profile, target included
  std::uint64_t seed = 0;

  // Joint training loop.
  std::size_t epochs = 64;
  std::size_t batch = 32;
  double lr = 5e-4;
  double max_grad_norm = 1.0;
  double mask_fraction = 0.10;
  double dropout = 0.5;
  double slope = 0.1;
  std::size_t encoder_hidden = 250;
  std::size_t edge_embed = 64;  // projection width used by edge scoring

  // Edge relaxation.
  double tau = 0.1;
  double alpha = 1.0;           // Gumbel scale during training
  double edge_threshold = 0.85;

  // Candidate pool.
  double candidate_sample_fraction = 0.05;
  double candidate_popular_fraction = 0.10;

  // Ranking surrogate behind the promotion objective. The long ALS run keeps
  // the surrogate near its fixed point; half-converged factors sit at saddle
  // regions whose curvature breaks the influence solves.
  std::size_t surrogate_rank = 16;
  double surrogate_lambda = 0.1;
  std::size_t surrogate_epochs = 400;

  // Influence predictor pretraining.
  std::size_t ip_hidden = 64;
  std::size_t ip_epochs = 300;
  double ip_lr = 1e-3;

  AblationFlags ablation;
};

// Stable 64-bit hash over every config field; identical configs hash equal.
std::uint64_t attack_config_hash(const AttackConfig& cfg);

// Frozen quantities behind the differentiable promotion loss: clean candidate
// factors, soft target ratings, per-candidate normal equations from the real
// raters, and each real user's exp-score mass over non-candidate items.
struct AdvContext {
  std::vector<std::size_t> candidates;  // item ids, target last
  std::size_t target_pos = 0;           // position of the target in candidates
  num::Tensor vs;       // |C| x k clean item factors, candidate order
  num::Tensor r_s;      // |C| x 1 soft ratings: r_max at target, item mean else
  num::Tensor u_real;   // |U| x k clean user factors
  std::vector<num::Tensor> base_a;  // per candidate: sum_u u u^T + lambda I
  num::Tensor base_b;   // |C| x k, row i = sum over raters of r_ui * u
  num::Tensor c_u;      // |U| x 1, sum_{j not in C} exp(u . v_j)
  double lambda = 0.05;
  double r_max = 5.0;
};

AdvContext make_adv_context(const SurrogateMF& m, const RatingGraph& g,
                            const std::vector<std::size_t>& candidates,
                            std::size_t target);

// Differentiable promotion loss of the soft fake profile. soft_edges is the
// 1 x |C| relaxed selection; the fake user is folded in ridge-style, item
// factors touched by the profile get one weighted refresh sweep, and the loss
// is the negative log-softmax of the target over every real user. A singular
// fold-in system is retried once with 10x regularization before erroring.
num::Var adv_loss(num::Tape& tape, const AdvContext& ctx, num::Var soft_edges);

// adv + recon - ip_reward, the joint objective.
num::Var total_loss(num::Tape& tape, num::Var adv, num::Var recon,
                    num::Var ip_reward);
double total_loss_value(double adv, double recon, double ip_reward);

// Target gets r_max; any other item gets its mean rating rounded half-up and
// clamped into [1, r_max].
std::vector<double> assign_ratings(const RatingGraph& g,
                                   const std::vector<std::size_t>& items,
                                   std::size_t target);

// Heuristic profiles. Each has exactly budget_items distinct items including
// the target at r_max.
FakeProfile random_profile(const RatingGraph& g, std::size_t target,
                           std::size_t budget_items, Rng& rng);
FakeProfile bandwagon_profile(const RatingGraph& g, std::size_t target,
                              std::size_t budget_items, Rng& rng);
FakeProfile segment_profile(const RatingGraph& g, std::size_t target,
                            std::size_t budget_items, Rng& rng);

struct AttackResult {
  std::vector<FakeProfile> profiles;
  std::vector<double> loss_trace;       // per-epoch mean of the joint loss
  std::vector<std::size_t> candidates;  // item pool the edges chose from
  EncoderState encoder;
  num::Tensor w_edge;
};

// Trains the feature and edge generators jointly against the frozen surrogate
// and influence predictor, then emits budget_users profiles. Multi-user
// emission redraws Gumbel noise per profile; a single profile is emitted
// noise-free.
AttackResult run_attack(const RatingGraph& g, const AttackConfig& cfg);

// Method dispatch: heuristics emit directly, the learned attack trains first.
std::vector<FakeProfile> generate_profiles(const RatingGraph& g,
                                           const AttackConfig& cfg);

// One line per profile of "item:rating" pairs after a header comment with the
// config hash and seed.
void write_profiles(const std::string& path,
                    const std::vector<FakeProfile>& profiles,
                    const AttackConfig& cfg);
std::vector<FakeProfile> read_profiles(const std::string& path);

}  // namespace shillab
