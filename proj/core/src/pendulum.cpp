#include "pshape/pendulum.hpp"

#include <cmath>
#include <numbers>

#include "pshape/textures.hpp"

namespace pshape {

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a + std::numbers::pi, two_pi);
  if (a <= 0.0) a += two_pi;
  return a - std::numbers::pi;
}

PendulumEnv::PendulumEnv(int horizon) : horizon_(horizon) {
  check(horizon_ > 0, "pendulum horizon must be positive");
}

ActionSpec PendulumEnv::action_spec() const {
  ActionSpec s;
  s.kind = ActionSpec::Kind::Continuous;
  s.dim = 1;
  s.low = -kMaxTorque;
  s.high = kMaxTorque;
  return s;
}

Tensor PendulumEnv::reset(Rng& rng) {
  state_.theta = wrap_angle(rng.uniform(-std::numbers::pi, std::numbers::pi));
  state_.omega = rng.uniform(-1.0, 1.0);
  steps_ = 0;
  hold_ = 0;
  done_ = false;
  return observation();
}

void PendulumEnv::set_state(const PendulumState& s) {
  state_.theta = wrap_angle(s.theta);
  state_.omega = std::clamp(s.omega, -kMaxSpeed, kMaxSpeed);
  steps_ = 0;
  hold_ = 0;
  done_ = false;
}

StepResult PendulumEnv::step(const Action& a) {
  check(!done_, "step() called on a finished episode");
  check(a.continuous.size() == 1, "pendulum expects a 1-d torque action, got ",
        a.continuous.size(), " values");
  double u = std::clamp(a.continuous[0], -kMaxTorque, kMaxTorque);

  // g = 10, m = 1, l = 1
  state_.omega += kDt * (15.0 * std::sin(state_.theta) + 3.0 * u);
  state_.omega = std::clamp(state_.omega, -kMaxSpeed, kMaxSpeed);
  state_.theta = wrap_angle(state_.theta + kDt * state_.omega);
  ++steps_;

  hold_ = std::abs(state_.theta) <= kGoalAngle ? hold_ + 1 : 0;

  StepResult r;
  r.reached_goal = hold_ >= kGoalHold;
  r.reward = r.reached_goal ? 1.0 : 0.0;
  r.done = r.reached_goal || steps_ >= horizon_;
  done_ = r.done;
  r.obs = observation();
  return r;
}

Tensor PendulumEnv::observation() const {
  return Tensor::vector({std::cos(state_.theta), std::sin(state_.theta), state_.omega});
}

Tensor PendulumEnv::goal_observation() const { return Tensor::vector({1.0, 0.0, 0.0}); }

Tensor PendulumEnv::render(const TextureSpec& texture) const {
  return render_pendulum_image(state_.theta, texture);
}

Tensor PendulumEnv::render_goal(const TextureSpec& texture) const {
  return render_pendulum_image(0.0, texture);
}

}  // namespace pshape
