#pragma once

#include <array>

#include "pshape/env.hpp"

namespace pshape {

struct ReacherState {
  double theta1 = 0.0;
  double theta2 = 0.0;
  std::array<double, 2> goal = {0.0, 0.0};
};

// Kinematic two-link arm on the plane, link lengths 0.1 each. Actions are
// joint velocities clamped to [-1, 1], integrated with dt = 0.1. Sparse
// reward +1 (and episode end) when the fingertip is within 0.02 of the goal.
// Observation: (cos t1, sin t1, cos t2, sin t2, tip_x, tip_y, dx, dy) where
// (dx, dy) points from the fingertip to the goal.
class ReacherEnv : public Env {
 public:
  explicit ReacherEnv(int horizon = 50);

  std::string name() const override { return "reacher"; }
  std::vector<int64_t> observation_shape() const override { return {8}; }
  ActionSpec action_spec() const override;
  int horizon() const override { return horizon_; }

  Tensor reset(Rng& rng) override;
  StepResult step(const Action& a) override;
  Tensor observation() const override;
  Tensor goal_observation() const override;
  bool episode_over() const override { return done_; }

  const ReacherState& state() const { return state_; }
  std::array<double, 2> fingertip() const;

  static std::array<double, 2> forward_kinematics(double theta1, double theta2);

  static constexpr double kLink = 0.1;
  static constexpr double kDt = 0.1;
  static constexpr double kGoalRadius = 0.02;
  static constexpr double kMaxVel = 1.0;

 private:
  int horizon_;
  ReacherState state_;
  int steps_ = 0;
  bool done_ = true;
};

}  // namespace pshape
