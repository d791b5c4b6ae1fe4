#include "shillab/optim.hpp"

#include <algorithm>
#include <cmath>

#include "shillab/errors.hpp"

namespace shillab::num {

double cosine_lr(double base_lr, double pos) {
  double p = std::clamp(pos, 0.0, 1.0);
  return base_lr * 0.5 * (1.0 + std::cos(M_PI * p));
}

double clip_global_norm(const std::vector<Tensor*>& grads, double max_norm) {
  if (max_norm <= 0.0)
    throw ContractError("clip_global_norm: max_norm must be positive");
  double sq = 0.0;
  for (const Tensor* g : grads)
    for (std::size_t k = 0; k < g->size(); ++k) {
      double v = (*g)[k];
      if (!std::isfinite(v))
        throw NumericError("clip_global_norm: non-finite gradient entry");
      sq += v * v;
    }
  double norm = std::sqrt(sq);
  if (norm > max_norm) {
    double s = max_norm / norm;
    for (Tensor* g : grads) g->map() *= s;
  }
  return norm;
}

void adam_step(Tensor& param, const Tensor& grad, AdamState& state,
               const AdamConfig& cfg, double lr) {
  if (!param.same_shape(grad))
    throw ShapeError("adam_step: param " + param.shape_str() + " vs grad " +
                     grad.shape_str());
  if (state.m.empty()) {
    state.m = Tensor(param.rows(), param.cols());
    state.v = Tensor(param.rows(), param.cols());
  }
  if (!state.m.same_shape(param))
    throw ContractError("adam_step: state shape drifted");
  ++state.t;
  double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < param.size(); ++k) {
    double g = grad[k];
    if (!std::isfinite(g))
      throw NumericError("adam_step: non-finite gradient entry");
    state.m[k] = cfg.beta1 * state.m[k] + (1.0 - cfg.beta1) * g;
    state.v[k] = cfg.beta2 * state.v[k] + (1.0 - cfg.beta2) * g * g;
    double mhat = state.m[k] / bc1;
    double vhat = state.v[k] / bc2;
    param[k] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

void ParamGroup::step(const std::vector<Tensor*>& grads, const AdamConfig& cfg,
                      double lr) {
  if (grads.size() != params.size())
    throw ContractError("ParamGroup::step: gradient count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i)
    adam_step(*params[i], *grads[i], states[i], cfg, lr);
}

}  // namespace shillab::num
