#include "pshape/reacher.hpp"

#include <cmath>
#include <numbers>

#include "pshape/pendulum.hpp"  // wrap_angle

namespace pshape {

ReacherEnv::ReacherEnv(int horizon) : horizon_(horizon) {
  check(horizon_ > 0, "reacher horizon must be positive");
}

ActionSpec ReacherEnv::action_spec() const {
  ActionSpec s;
  s.kind = ActionSpec::Kind::Continuous;
  s.dim = 2;
  s.low = -kMaxVel;
  s.high = kMaxVel;
  return s;
}

std::array<double, 2> ReacherEnv::forward_kinematics(double theta1, double theta2) {
  double x = kLink * std::cos(theta1) + kLink * std::cos(theta1 + theta2);
  double y = kLink * std::sin(theta1) + kLink * std::sin(theta1 + theta2);
  return {x, y};
}

std::array<double, 2> ReacherEnv::fingertip() const {
  return forward_kinematics(state_.theta1, state_.theta2);
}

Tensor ReacherEnv::reset(Rng& rng) {
  state_.theta1 = wrap_angle(rng.uniform(-std::numbers::pi, std::numbers::pi));
  state_.theta2 = wrap_angle(rng.uniform(-std::numbers::pi, std::numbers::pi));
  // goal uniform in the reachable disk of radius 2 * kLink
  double radius = 2.0 * kLink * std::sqrt(rng.uniform());
  double phi = rng.uniform(-std::numbers::pi, std::numbers::pi);
  state_.goal = {radius * std::cos(phi), radius * std::sin(phi)};
  steps_ = 0;
  done_ = false;
  return observation();
}

StepResult ReacherEnv::step(const Action& a) {
  check(!done_, "step() called on a finished episode");
  check(a.continuous.size() == 2, "reacher expects a 2-d joint-velocity action, got ",
        a.continuous.size(), " values");
  double v1 = std::clamp(a.continuous[0], -kMaxVel, kMaxVel);
  double v2 = std::clamp(a.continuous[1], -kMaxVel, kMaxVel);
  state_.theta1 = wrap_angle(state_.theta1 + kDt * v1);
  state_.theta2 = wrap_angle(state_.theta2 + kDt * v2);
  ++steps_;

  auto tip = fingertip();
  double dist = std::hypot(tip[0] - state_.goal[0], tip[1] - state_.goal[1]);

  StepResult r;
  r.reached_goal = dist < kGoalRadius;
  r.reward = r.reached_goal ? 1.0 : 0.0;
  r.done = r.reached_goal || steps_ >= horizon_;
  done_ = r.done;
  r.obs = observation();
  return r;
}

Tensor ReacherEnv::observation() const {
  auto tip = fingertip();
  return Tensor::vector({std::cos(state_.theta1), std::sin(state_.theta1),
                         std::cos(state_.theta2), std::sin(state_.theta2), tip[0], tip[1],
                         state_.goal[0] - tip[0], state_.goal[1] - tip[1]});
}

Tensor ReacherEnv::goal_observation() const {
  // elbow-down IK solution for the episode goal
  double gx = state_.goal[0], gy = state_.goal[1];
  double r2 = gx * gx + gy * gy;
  double c2 = std::clamp((r2 - 2.0 * kLink * kLink) / (2.0 * kLink * kLink), -1.0, 1.0);
  double t2 = std::acos(c2);
  double t1 = std::atan2(gy, gx) - std::atan2(kLink * std::sin(t2), kLink * (1.0 + c2));
  auto tip = forward_kinematics(t1, t2);
  return Tensor::vector({std::cos(t1), std::sin(t1), std::cos(t2), std::sin(t2), tip[0], tip[1],
                         gx - tip[0], gy - tip[1]});
}

}  // namespace pshape
