#pragma once

#include "pshape/env.hpp"

namespace pshape {

struct PendulumState {
  double theta = 0.0;  // radians, 0 = upright, wrapped to (-pi, pi]
  double omega = 0.0;  // rad/s, clamped to [-8, 8]
};

double wrap_angle(double a);

// Swing-up task. Observation (cos theta, sin theta, omega); torque action
// clamped to [-2, 2]. Semi-implicit Euler with dt = 0.05:
//   omega' = omega + dt * (15 sin(theta) + 3 u)
//   theta' = theta + dt * omega'
// The goal condition (|theta| <= 0.1) must hold for 5 consecutive steps;
// the reward of +1 arrives on the 5th step and ends the episode.
class PendulumEnv : public Env {
 public:
  explicit PendulumEnv(int horizon = 200);

  std::string name() const override { return "pendulum"; }
  std::vector<int64_t> observation_shape() const override { return {3}; }
  ActionSpec action_spec() const override;
  int horizon() const override { return horizon_; }

  Tensor reset(Rng& rng) override;
  StepResult step(const Action& a) override;
  Tensor observation() const override;
  Tensor goal_observation() const override;
  Tensor render(const TextureSpec& texture) const override;
  Tensor render_goal(const TextureSpec& texture) const override;
  bool episode_over() const override { return done_; }

  const PendulumState& state() const { return state_; }
  void set_state(const PendulumState& s);

  static constexpr double kDt = 0.05;
  static constexpr double kMaxTorque = 2.0;
  static constexpr double kMaxSpeed = 8.0;
  static constexpr double kGoalAngle = 0.1;
  static constexpr int kGoalHold = 5;

 private:
  int horizon_;
  PendulumState state_;
  int steps_ = 0;
  int hold_ = 0;  // consecutive in-range steps
  bool done_ = true;
};

}  // namespace pshape
