#pragma once

#include <filesystem>
#include <functional>
#include <span>

#include "pshape/adam.hpp"
#include "pshape/shaping.hpp"

namespace pshape {

struct PpoConfig {
  double gamma = 0.99;
  double entropy_coef = 0.01;
  double lr = 2.5e-4;
  double clip = 0.2;
  double max_grad_norm = 0.5;
  int64_t minibatch = 128;
  double gae_lambda = 0.95;
  int64_t rollout = 2048;
  int64_t epochs = 4;           // passes over each rollout
  int64_t total_steps = 100000;
  std::string features = "raw";  // raw | embedding
  int64_t eval_episodes = 20;

  void validate() const;
  Json to_json() const;
  static PpoConfig from_json(const Json& j);
};

// Separate actor and critic stacks, each two tanh layers of width 64 with a
// linear head. Continuous actions use a Gaussian with a state-independent
// learned log-std (clamped to [-5, 2] at use).
struct PolicyModel {
  ActionSpec aspec;
  int64_t input_dim = 0;
  std::string features = "raw";
  ParameterSet params;

  static PolicyModel create(const ActionSpec& aspec, int64_t input_dim,
                            const std::string& features, Rng& rng);

  Tensor actor_out(const Tensor& feats) const;  // logits or Gaussian mean; [A] or [N,A]
  Tensor log_std() const;                       // clamped copy, [dim]
  double value(const Tensor& feats) const;
  Tensor value_batch(const Tensor& feats) const;  // [N,1]

  void save(const std::filesystem::path& path) const;
  static PolicyModel load(const std::filesystem::path& path);
};

struct PolicyStep {
  Action action;
  double log_prob = 0.0;
  double value = 0.0;
};

PolicyStep policy_step(const PolicyModel& model, const Tensor& feats, Rng& rng,
                       bool deterministic = false);

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// delta_t = r_t + gamma * V(s_{t+1}) * (1 - done_t) - V(s_t)
// A_t = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}
GaeResult compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                      const std::vector<uint8_t>& dones, double bootstrap_value, double gamma,
                      double lambda);

struct RolloutBuffer {
  Tensor feats;  // [T, D]
  std::vector<Action> actions;
  std::vector<double> log_probs;
  std::vector<double> values;
  std::vector<double> shaped_rewards;
  std::vector<double> env_rewards;
  std::vector<uint8_t> dones;
  std::vector<double> advantages;
  std::vector<double> returns;

  int64_t size() const { return static_cast<int64_t>(actions.size()); }
};

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double mean_ratio = 0.0;
};

// In place: mean 0, std 1 (plus 1e-8 guard).
void normalize_advantages(std::span<double> advantages);

// One gathered minibatch, ready for the loss graph.
struct PpoMinibatch {
  Tensor feats;      // [m, D]
  Tensor actions;    // [m, A] (continuous)
  std::vector<int> actions_d;  // discrete
  Tensor logp_old;   // [m, 1]
  Tensor advantages; // [m, 1], already normalized
  Tensor returns;    // [m, 1]
};

struct PpoLossGraph {
  Tape::Var loss;
  Tape::Var policy_loss;
  Tape::Var value_loss;
  Tape::Var entropy;
  Tape::Var ratio;  // [m, 1]
};

// Clipped-surrogate loss: -min(ratio * A, clip(ratio) * A) + 0.5 * value MSE
// - entropy_coef * entropy.
PpoLossGraph ppo_loss_graph(Tape& tape, const Tape::NamedVars& vars, const PolicyModel& model,
                            const PpoMinibatch& mb, const PpoConfig& cfg);

// Shuffled minibatches, advantages normalized per minibatch, clipped
// surrogate + 0.5 * value MSE - entropy_coef * entropy, global gradient-norm
// clipping, Adam.
UpdateStats ppo_update(PolicyModel& model, const RolloutBuffer& buffer, const PpoConfig& cfg,
                       Adam& adam, Rng& rng);

struct CurvePoint {
  int64_t env_steps = 0;
  double mean_env_return = 0.0;  // shaping excluded
  double success_rate = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
};

struct LearningCurve {
  std::vector<CurvePoint> points;
  void to_csv(const std::filesystem::path& path) const;
};

struct TrainPolicyResult {
  PolicyModel policy;
  LearningCurve curve;
};

using EnvFactory = std::function<std::unique_ptr<Env>()>;

// Alternates fixed-horizon rollout collection and PPO updates. The learning
// curve logs raw environment return (never the shaped reward) and the success
// rate of eval_episodes deterministic episodes per iteration.
TrainPolicyResult train_policy(const EnvFactory& factory, RewardShaper& shaper,
                               const PpoConfig& cfg, uint64_t seed,
                               const EncoderModel* feature_encoder, bool verbose = false);
TrainPolicyResult train_policy(const EnvConfig& env_cfg, RewardShaper& shaper,
                               const PpoConfig& cfg, uint64_t seed,
                               const EncoderModel* feature_encoder, bool verbose = false);

// Two-step mode: one policy is rewarded for entering the goal cluster, a
// second is trained on environment reward from spawns inside the cluster.
// Evaluation runs the first until cluster entry, then hands over.
struct TwoStepPolicy {
  PolicyModel to_cluster;
  PolicyModel to_goal;
  LearningCurve curve;
};

TwoStepPolicy train_two_step_cluster_policy(const EnvConfig& env_cfg, const SchemeConfig& scheme,
                                            const EncoderModel& encoder,
                                            const ClusterModel& clusters, const PpoConfig& cfg,
                                            uint64_t seed, bool verbose = false);

double two_step_success_rate(const TwoStepPolicy& pair, const EnvConfig& env_cfg,
                             const EncoderModel& encoder, const ClusterModel& clusters,
                             int64_t episodes, Rng& rng);

// Features fed to the policy: flattened raw observation, or the CPC embedding.
Tensor policy_features(const Tensor& obs, const EncoderModel* encoder);

}  // namespace pshape
