#pragma once

#include "pshape/params.hpp"

namespace pshape {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam. Moment tensors are keyed by parameter name and created
// on first use, shaped like their parameters.
class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  // In-place update; errors on a NaN gradient, naming the parameter.
  void step(ParameterSet& params, const ParameterSet& grads);

  int64_t step_count() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  int64_t t_ = 0;
  ParameterSet m_;
  ParameterSet v_;
};

double global_grad_norm(const ParameterSet& grads);

// Scales all gradients so the global L2 norm is at most max_norm.
void clip_grad_norm(ParameterSet& grads, double max_norm);

}  // namespace pshape
