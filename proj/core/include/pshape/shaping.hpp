#pragma once

#include <memory>
#include <optional>

#include "pshape/clustering.hpp"
#include "pshape/cpc.hpp"
#include "pshape/env.hpp"

namespace pshape {

enum class SchemeVariant { Sparse, HandShaped, RawDistance, EmbeddingDistance, ClusterBonus };

std::string scheme_name(SchemeVariant v);
SchemeVariant scheme_from_name(const std::string& name);

struct SchemeConfig {
  SchemeVariant variant = SchemeVariant::Sparse;
  double beta = 0.0;                 // distance scale; 0 = auto-calibrate
  double target_mean_penalty = 0.1;  // calibration target for the mean per-step penalty
  double bonus = 0.5;                // cluster bonus, paid once per episode
  bool two_policy = false;           // cluster bonus: train the two-step policy pair

  Json to_json() const;
  static SchemeConfig from_json(const Json& j);
};

// Per-step reward shaping around an unchanged environment. A shaper instance
// carries per-episode state (cached goal embedding, bonus phase) and is owned
// by exactly one episode runner.
class RewardShaper {
 public:
  virtual ~RewardShaper() = default;

  virtual void episode_start(const Env& env) {}
  // obs_before/action are the time-t state and action; env_reward, obs_after
  // and done come from the step.
  virtual double shape(const Tensor& obs_before, const Action& action, double env_reward,
                       const Tensor& obs_after, bool done) = 0;

  virtual SchemeVariant variant() const = 0;
  virtual int phase() const { return 0; }          // ClusterBonus: 1 or 2
  virtual bool degenerate() const { return false; }  // flagged when embeddings collapsed
  virtual double beta() const { return 0.0; }
};

// Hand-shaped formulas (state at time t, action at time t).
double shape_hand_pendulum(double theta, double omega, const Action& action);
double shape_hand_reacher(const Tensor& observation, const Action& action);

double shape_sparse(double env_reward);
double shape_raw_distance(const Tensor& observation, const Tensor& goal_observation, double beta);
double shape_embedding_distance(const EncoderModel& encoder, const Tensor& observation,
                                const Tensor& goal_observation, double beta);

// Builds a shaper for the given env. `calibration` provides the stored
// random-trajectory states used to scale beta so the mean per-step penalty
// is about target_mean_penalty; required for the distance variants when
// beta = 0. encoder/clusters are required by the variants that use them.
std::unique_ptr<RewardShaper> make_shaper(const SchemeConfig& cfg, const EnvConfig& env_cfg,
                                          const EncoderModel* encoder,
                                          const ClusterModel* clusters,
                                          const TrajectorySet* calibration);

}  // namespace pshape
