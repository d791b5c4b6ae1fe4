#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "shillab/autodiff.hpp"
#include "shillab/rating_graph.hpp"
#include "shillab/rng.hpp"
#include "shillab/tensor.hpp"

namespace shillab {

struct EncoderConfig {
  std::size_t hidden = 250;
  double slope = 0.1;
  double dropout = 0.5;
  double mask_fraction = 0.10;
  std::size_t epochs = 64;
  std::size_t batch = 32;
  double lr = 5e-4;
  double max_grad_norm = 1.0;
};

// Trainable weights of the masked graph autoencoder. All layers are bias-free.
// Layout convention: activations are row vectors, weights multiply from the
// right, so w1 maps feature rows (dim 10) into the hidden width.
struct EncoderState {
  num::Tensor w1;       // 10 x hidden, pre-conv projection layer 1
  num::Tensor w2;       // hidden x hidden, pre-conv projection layer 2
  num::Tensor wr_user;  // hidden x hidden, relation weight for user rows
  num::Tensor wr_item;  // hidden x hidden, relation weight for item rows
  num::Tensor wg;       // hidden x hidden, post-conv mixing layer
  num::Tensor w1rec;    // hidden x hidden, decoder layer 1
  num::Tensor w2rec;    // hidden x 10, decoder layer 2
  double slope = 0.1;

  static EncoderState init(std::size_t hidden, double slope, Rng& rng);

  std::vector<num::Tensor*> param_list();
  std::vector<const num::Tensor*> param_list() const;
  static std::vector<std::string> param_names();
};

// Neighbor lists plus degrees, precomputed once per graph.
struct GraphAdjacency {
  explicit GraphAdjacency(const RatingGraph& g);
  std::vector<std::vector<std::size_t>> user_items;
  std::vector<std::vector<std::size_t>> item_users;
  std::vector<std::size_t> user_deg;
  std::vector<std::size_t> item_deg;
  std::size_t n_users = 0;
  std::size_t n_items = 0;
};

// Nodes whose input features are zeroed for one reconstruction pass.
struct MaskPlan {
  std::vector<std::size_t> users;
  std::vector<std::size_t> items;
};

// Draws round(fraction * (|U|+|I|)) distinct nodes over the combined index
// space. Throws ContractError when that count is below one.
MaskPlan make_mask(const RatingGraph& g, double fraction, Rng& rng);

enum class NodeSide { kUser, kItem };

// Encoder parameters bound onto a tape. trainable=false binds constants.
struct EncoderVars {
  num::Var w1, w2, wr_user, wr_item, wg, w1rec, w2rec;
};
EncoderVars bind_encoder(num::Tape& tape, const EncoderState& s, bool trainable);

struct ForwardOptions {
  const std::vector<char>* masked_users = nullptr;  // flags, size |U|
  const std::vector<char>* masked_items = nullptr;  // flags, size |I|
  double dropout = 0.0;  // inverted dropout on neighbor embeddings
  Rng* dropout_rng = nullptr;
};

// Differentiable reconstruction for `nodes` (all from one side). Only the
// counterpart rows those nodes touch are pushed through the projection
// layers, which keeps a batch step far cheaper than a full-graph pass.
// Returns |nodes| x 10.
num::Var reconstruct_nodes(num::Tape& tape, const EncoderVars& ev,
                           const GraphAdjacency& adj,
                           const num::Tensor& x_users,
                           const num::Tensor& x_items,
                           const std::vector<std::size_t>& nodes,
                           NodeSide side, double slope,
                           const ForwardOptions& opt);

// Reconstruction path for a synthetic user carrying zero input features and a
// single provisional edge to `target`. The edge is normalized with the
// target's real degree; the new node contributes nothing back to the graph.
// Returns 1 x 10.
num::Var reconstruct_fake_user(num::Tape& tape, const EncoderVars& ev,
                               const GraphAdjacency& adj,
                               const num::Tensor& x_items,
                               std::size_t target, double slope);

// Convenience wrapper: runs the fake-user path without gradients.
num::Tensor fake_user_features(const EncoderState& s, const GraphAdjacency& adj,
                               const num::Tensor& x_items, std::size_t target);

// Mean over rows of ||x_row - xhat_row||^2, as a scalar Var. x_rows supplies
// the clean targets for the same node order as xhat.
num::Var mean_sq_row_dist(num::Tape& tape, num::Var xhat,
                          const num::Tensor& x_rows);

// Masked reconstruction objective: mean squared row distance over masked
// users plus the same over masked items. A side with no masked nodes drops
// its term; both sides empty is a contract violation.
double recon_loss(const EncoderState& s, const GraphAdjacency& adj,
                  const num::Tensor& x_users, const num::Tensor& x_items,
                  const MaskPlan& plan);

struct EncoderTrainStats {
  std::vector<double> epoch_loss;  // mean of per-batch losses, one per epoch
};

// Trains the autoencoder alone: fresh mask per epoch, shuffled mixed-side
// batches, Adam with cosine-decayed lr and a global gradient-norm clip.
EncoderTrainStats train_encoder(EncoderState& state, const RatingGraph& g,
                                const num::Tensor& x_users,
                                const num::Tensor& x_items,
                                const EncoderConfig& cfg, std::uint64_t seed);

}  // namespace shillab
