#include "pshape/adam.hpp"

#include <cmath>

namespace pshape {

void Adam::step(ParameterSet& params, const ParameterSet& grads) {
  ++t_;
  double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (auto& [name, p] : params.items()) {
    const Tensor& g = grads.at(name);
    check(g.same_shape(p), "gradient shape ", shape_str(g.shape), " does not match parameter \"",
          name, "\" ", shape_str(p.shape));
    if (!m_.has(name)) {
      m_.add(name, Tensor::zeros(p.shape));
      v_.add(name, Tensor::zeros(p.shape));
    }
    Tensor& m = m_.at(name);
    Tensor& v = v_.at(name);
    for (int64_t i = 0; i < p.size(); ++i) {
      size_t s = static_cast<size_t>(i);
      double gi = g.data[s];
      check(!std::isnan(gi), "NaN gradient for parameter \"", name, "\" at index ", i);
      m.data[s] = cfg_.beta1 * m.data[s] + (1.0 - cfg_.beta1) * gi;
      v.data[s] = cfg_.beta2 * v.data[s] + (1.0 - cfg_.beta2) * gi * gi;
      double mhat = m.data[s] / bc1;
      double vhat = v.data[s] / bc2;
      p.data[s] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

double global_grad_norm(const ParameterSet& grads) {
  double sq = 0.0;
  for (const auto& [name, g] : grads.items())
    for (double v : g.data) sq += v * v;
  return std::sqrt(sq);
}

void clip_grad_norm(ParameterSet& grads, double max_norm) {
  double norm = global_grad_norm(grads);
  if (norm <= max_norm || norm == 0.0) return;
  double s = max_norm / norm;
  for (auto& [name, g] : grads.items())
    for (double& v : g.data) v *= s;
}

}  // namespace pshape
