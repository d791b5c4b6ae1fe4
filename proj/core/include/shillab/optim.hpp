#pragma once

#include <cstddef>
#include <vector>

#include "shillab/tensor.hpp"

namespace shillab::num {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Tensor m;
  Tensor v;
  std::size_t t = 0;
};

// Half-cosine decay from base_lr at pos=0 to 0 at pos=1; pos clamps to [0,1].
double cosine_lr(double base_lr, double pos);

// Scales every gradient by max_norm/norm when the joint L2 norm exceeds
// max_norm. Returns the pre-clip norm.
double clip_global_norm(const std::vector<Tensor*>& grads, double max_norm);

void adam_step(Tensor& param, const Tensor& grad, AdamState& state,
               const AdamConfig& cfg, double lr);

// A named parameter bundle so training loops can iterate uniformly.
struct ParamGroup {
  std::vector<Tensor*> params;
  std::vector<AdamState> states;

  void attach(Tensor& p) {
    params.push_back(&p);
    states.emplace_back();
  }
  void step(const std::vector<Tensor*>& grads, const AdamConfig& cfg,
            double lr);
};

}  // namespace shillab::num
