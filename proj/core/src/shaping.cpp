#include "pshape/shaping.hpp"

#include <cmath>
#include <iostream>

namespace pshape {

std::string scheme_name(SchemeVariant v) {
  switch (v) {
    case SchemeVariant::Sparse: return "sparse";
    case SchemeVariant::HandShaped: return "hand_shaped";
    case SchemeVariant::RawDistance: return "raw_distance";
    case SchemeVariant::EmbeddingDistance: return "embedding_distance";
    case SchemeVariant::ClusterBonus: return "cluster_bonus";
  }
  fail("bad scheme variant");
}

SchemeVariant scheme_from_name(const std::string& name) {
  for (SchemeVariant v : {SchemeVariant::Sparse, SchemeVariant::HandShaped,
                          SchemeVariant::RawDistance, SchemeVariant::EmbeddingDistance,
                          SchemeVariant::ClusterBonus})
    if (scheme_name(v) == name) return v;
  fail("unknown scheme \"", name,
       "\" (expected sparse, hand_shaped, raw_distance, embedding_distance or cluster_bonus)");
}

Json SchemeConfig::to_json() const {
  Json j;
  j["variant"] = scheme_name(variant);
  if (beta != 0.0) j["beta"] = beta;
  j["target_mean_penalty"] = target_mean_penalty;
  if (variant == SchemeVariant::ClusterBonus) {
    j["bonus"] = bonus;
    j["two_policy"] = two_policy;
  }
  return j;
}

SchemeConfig SchemeConfig::from_json(const Json& j) {
  reject_unknown_keys(j, {"variant", "beta", "target_mean_penalty", "bonus", "two_policy"},
                      "scheme");
  SchemeConfig c;
  c.variant = scheme_from_name(require_field(j, "variant", "scheme").get<std::string>());
  c.beta = field_or<double>(j, "beta", 0.0);
  c.target_mean_penalty = field_or<double>(j, "target_mean_penalty", 0.1);
  c.bonus = field_or<double>(j, "bonus", 0.5);
  c.two_policy = field_or<bool>(j, "two_policy", false);
  return c;
}

double shape_sparse(double env_reward) { return env_reward; }

double shape_hand_pendulum(double theta, double omega, const Action& action) {
  double a2 = 0.0;
  for (double v : action.continuous) a2 += v * v;
  return -(theta * theta + 0.1 * std::abs(omega) + 0.001 * std::sqrt(a2));
}

double shape_hand_reacher(const Tensor& observation, const Action& action) {
  check(observation.size() == 8, "shape_hand_reacher: expected an 8-d reacher observation");
  // observation tail is the tip-to-goal offset
  double dx = observation.data[6], dy = observation.data[7];
  double a2 = 0.0;
  for (double v : action.continuous) a2 += v * v;
  return -(std::hypot(dx, dy) + 0.01 * std::sqrt(a2));
}

double shape_raw_distance(const Tensor& observation, const Tensor& goal_observation,
                          double beta) {
  check(observation.same_shape(goal_observation), "shape_raw_distance: observation ",
        shape_str(observation.shape), " vs goal ", shape_str(goal_observation.shape));
  double d2 = 0.0;
  for (int64_t i = 0; i < observation.size(); ++i) {
    double d = observation.data[static_cast<size_t>(i)] -
               goal_observation.data[static_cast<size_t>(i)];
    d2 += d * d;
  }
  return -beta * d2;
}

double shape_embedding_distance(const EncoderModel& encoder, const Tensor& observation,
                                const Tensor& goal_observation, double beta) {
  Tensor z = encoder.encode(observation);
  Tensor zg = encoder.encode(goal_observation);
  return shape_raw_distance(z, zg, beta);
}

namespace {

class SparseShaper final : public RewardShaper {
 public:
  double shape(const Tensor&, const Action&, double env_reward, const Tensor&, bool) override {
    return shape_sparse(env_reward);
  }
  SchemeVariant variant() const override { return SchemeVariant::Sparse; }
};

class HandShaper final : public RewardShaper {
 public:
  explicit HandShaper(std::string env_id) : env_id_(std::move(env_id)) {
    check(env_id_ == "pendulum" || env_id_ == "reacher",
          "hand_shaped scheme is defined for pendulum and reacher only, not ", env_id_);
  }
  double shape(const Tensor& obs_before, const Action& a, double, const Tensor&,
               bool) override {
    if (env_id_ == "pendulum") {
      double theta = std::atan2(obs_before.data[1], obs_before.data[0]);
      double omega = obs_before.data[2];
      return shape_hand_pendulum(theta, omega, a);
    }
    return shape_hand_reacher(obs_before, a);
  }
  SchemeVariant variant() const override { return SchemeVariant::HandShaped; }

 private:
  std::string env_id_;
};

class RawDistanceShaper final : public RewardShaper {
 public:
  RawDistanceShaper(double beta) : beta_(beta) {}
  void episode_start(const Env& env) override { goal_ = env.goal_observation().flattened(); }
  double shape(const Tensor&, const Action&, double env_reward, const Tensor& obs_after,
               bool) override {
    return env_reward + shape_raw_distance(obs_after.flattened(), goal_, beta_);
  }
  SchemeVariant variant() const override { return SchemeVariant::RawDistance; }
  double beta() const override { return beta_; }

 private:
  double beta_;
  Tensor goal_;
};

class EmbeddingDistanceShaper final : public RewardShaper {
 public:
  EmbeddingDistanceShaper(const EncoderModel& encoder, double beta, bool degenerate)
      : encoder_(encoder), beta_(beta), degenerate_(degenerate) {}
  void episode_start(const Env& env) override {
    // goal embedding cached once per episode
    zg_ = encoder_.encode(env.goal_observation());
  }
  double shape(const Tensor&, const Action&, double env_reward, const Tensor& obs_after,
               bool) override {
    check(zg_.size() > 0, "embedding shaper used before episode_start");
    Tensor z = encoder_.encode(obs_after);
    return env_reward + shape_raw_distance(z, zg_, beta_);
  }
  SchemeVariant variant() const override { return SchemeVariant::EmbeddingDistance; }
  bool degenerate() const override { return degenerate_; }
  double beta() const override { return beta_; }

 private:
  const EncoderModel& encoder_;
  double beta_;
  bool degenerate_;
  Tensor zg_;
};

class ClusterBonusShaper final : public RewardShaper {
 public:
  ClusterBonusShaper(const EncoderModel& encoder, const ClusterModel& clusters, double bonus)
      : encoder_(encoder), clusters_(clusters), bonus_(bonus) {
    check(clusters_.goal_cluster >= 0, "cluster_bonus scheme requires an identified goal cluster");
  }
  void episode_start(const Env& env) override {
    // spawning inside the goal cluster skips straight to phase 2, no bonus
    bool inside = assign_cluster(clusters_, encoder_.encode(env.observation())) ==
                  clusters_.goal_cluster;
    phase_ = inside ? 2 : 1;
  }
  double shape(const Tensor&, const Action&, double env_reward, const Tensor& obs_after,
               bool) override {
    check(phase_ != 0, "cluster bonus shaper used before episode_start");
    if (phase_ == 2) return env_reward;
    bool entered = assign_cluster(clusters_, encoder_.encode(obs_after)) ==
                   clusters_.goal_cluster;
    if (entered) {
      phase_ = 2;
      return env_reward + bonus_;
    }
    return env_reward;
  }
  SchemeVariant variant() const override { return SchemeVariant::ClusterBonus; }
  int phase() const override { return phase_; }

 private:
  const EncoderModel& encoder_;
  const ClusterModel& clusters_;
  double bonus_;
  int phase_ = 0;
};

// Mean squared distance to the per-reset goal over sampled stored states;
// goals are drawn from a fixed-seed env so calibration is reproducible.
double mean_sq_distance(const EnvConfig& env_cfg, const std::vector<Tensor>& states,
                        const EncoderModel* encoder) {
  std::unique_ptr<Env> env = make_env(env_cfg);
  Rng goal_rng(0x5ca1ab1e);
  double total = 0.0;
  for (const Tensor& s : states) {
    env->reset(goal_rng);
    Tensor goal = env->goal_observation();
    if (encoder) {
      Tensor z = encoder->encode(s);
      Tensor zg = encoder->encode(goal);
      total += -shape_raw_distance(z, zg, 1.0);
    } else {
      total += -shape_raw_distance(s.flattened(), goal.flattened(), 1.0);
    }
  }
  return total / static_cast<double>(states.size());
}

bool embeddings_degenerate(const EncoderModel& encoder, const std::vector<Tensor>& states) {
  if (states.empty()) return true;
  int64_t dim = encoder.cfg.embed_dim;
  std::vector<double> mean(static_cast<size_t>(dim), 0.0);
  std::vector<Tensor> zs;
  zs.reserve(states.size());
  for (const Tensor& s : states) {
    zs.push_back(encoder.encode(s));
    for (int64_t i = 0; i < dim; ++i) mean[static_cast<size_t>(i)] += zs.back().data[static_cast<size_t>(i)];
  }
  for (double& m : mean) m /= static_cast<double>(zs.size());
  double var = 0.0;
  for (const Tensor& z : zs)
    for (int64_t i = 0; i < dim; ++i) {
      double d = z.data[static_cast<size_t>(i)] - mean[static_cast<size_t>(i)];
      var += d * d;
    }
  var /= static_cast<double>(zs.size());
  return var < 1e-6;
}

constexpr int64_t kCalibrationStates = 512;

}  // namespace

std::unique_ptr<RewardShaper> make_shaper(const SchemeConfig& cfg, const EnvConfig& env_cfg,
                                          const EncoderModel* encoder,
                                          const ClusterModel* clusters,
                                          const TrajectorySet* calibration) {
  switch (cfg.variant) {
    case SchemeVariant::Sparse:
      return std::make_unique<SparseShaper>();
    case SchemeVariant::HandShaped:
      return std::make_unique<HandShaper>(env_cfg.id);
    case SchemeVariant::RawDistance: {
      double beta = cfg.beta;
      if (beta == 0.0) {
        check(calibration != nullptr, "raw_distance scheme needs trajectories to calibrate beta");
        Rng rng(0xca11b7a7e);
        std::vector<Tensor> states = sample_states(*calibration, kCalibrationStates, rng);
        double msd = mean_sq_distance(env_cfg, states, nullptr);
        beta = msd > 1e-12 ? cfg.target_mean_penalty / msd : 0.0;
      }
      return std::make_unique<RawDistanceShaper>(beta);
    }
    case SchemeVariant::EmbeddingDistance: {
      check(encoder != nullptr, "embedding_distance scheme requires a trained encoder");
      double beta = cfg.beta;
      bool degenerate = false;
      if (beta == 0.0) {
        check(calibration != nullptr,
              "embedding_distance scheme needs trajectories to calibrate beta");
        Rng rng(0xca11b7a7e);
        std::vector<Tensor> states = sample_states(*calibration, kCalibrationStates, rng);
        degenerate = embeddings_degenerate(*encoder, states);
        if (degenerate)
          std::cerr << "warning: embedding variance < 1e-6, distance shaping is degenerate\n";
        double msd = mean_sq_distance(env_cfg, states, encoder);
        beta = msd > 1e-12 ? cfg.target_mean_penalty / msd : 0.0;
      }
      return std::make_unique<EmbeddingDistanceShaper>(*encoder, beta, degenerate);
    }
    case SchemeVariant::ClusterBonus:
      check(encoder != nullptr && clusters != nullptr,
            "cluster_bonus scheme requires an encoder and a cluster model");
      return std::make_unique<ClusterBonusShaper>(*encoder, *clusters, cfg.bonus);
  }
  fail("bad scheme variant");
}

}  // namespace pshape
