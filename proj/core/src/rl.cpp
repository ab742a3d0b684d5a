#include "pshape/rl.hpp"

#include <cmath>
#include <iostream>
#include <numbers>

#include "pshape/csv.hpp"
#include "pshape/gridworld.hpp"
#include "pshape/linalg.hpp"

namespace pshape {

void PpoConfig::validate() const {
  check(gamma >= 0.0 && gamma <= 1.0, "ppo: gamma must be in [0, 1]");
  check(clip > 0.0, "ppo: clip range must be positive");
  check(minibatch >= 2 && rollout >= minibatch, "ppo: need rollout >= minibatch >= 2");
  check(epochs >= 1 && total_steps >= rollout, "ppo: need epochs >= 1 and total_steps >= rollout");
  check(gae_lambda >= 0.0 && gae_lambda <= 1.0, "ppo: gae_lambda must be in [0, 1]");
  check(features == "raw" || features == "embedding", "ppo: features must be raw or embedding");
  check(eval_episodes >= 1, "ppo: eval_episodes must be >= 1");
}

Json PpoConfig::to_json() const {
  return Json{{"gamma", gamma},
              {"entropy_coef", entropy_coef},
              {"lr", lr},
              {"clip", clip},
              {"max_grad_norm", max_grad_norm},
              {"minibatch", minibatch},
              {"gae_lambda", gae_lambda},
              {"rollout", rollout},
              {"epochs", epochs},
              {"total_steps", total_steps},
              {"features", features},
              {"eval_episodes", eval_episodes}};
}

PpoConfig PpoConfig::from_json(const Json& j) {
  reject_unknown_keys(j,
                      {"gamma", "entropy_coef", "lr", "clip", "max_grad_norm", "minibatch",
                       "gae_lambda", "rollout", "epochs", "total_steps", "features",
                       "eval_episodes"},
                      "ppo");
  PpoConfig c;
  c.gamma = field_or<double>(j, "gamma", c.gamma);
  c.entropy_coef = field_or<double>(j, "entropy_coef", c.entropy_coef);
  c.lr = field_or<double>(j, "lr", c.lr);
  c.clip = field_or<double>(j, "clip", c.clip);
  c.max_grad_norm = field_or<double>(j, "max_grad_norm", c.max_grad_norm);
  c.minibatch = field_or<int64_t>(j, "minibatch", c.minibatch);
  c.gae_lambda = field_or<double>(j, "gae_lambda", c.gae_lambda);
  c.rollout = field_or<int64_t>(j, "rollout", c.rollout);
  c.epochs = field_or<int64_t>(j, "epochs", c.epochs);
  c.total_steps = field_or<int64_t>(j, "total_steps", c.total_steps);
  c.features = field_or<std::string>(j, "features", c.features);
  c.eval_episodes = field_or<int64_t>(j, "eval_episodes", c.eval_episodes);
  c.validate();
  return c;
}

namespace {

constexpr double kLogStdLo = -5.0, kLogStdHi = 2.0;
constexpr double kLog2Pi = 1.8378770664093454836;

int64_t action_dim(const ActionSpec& a) {
  return a.kind == ActionSpec::Kind::Discrete ? a.count : a.dim;
}

// trunk: two tanh layers of width 64
Tensor trunk_forward(const ParameterSet& ps, const std::string& p, const Tensor& x) {
  const Tensor& w1 = ps.at(p + ".fc1.w");
  const Tensor& b1 = ps.at(p + ".fc1.b");
  const Tensor& w2 = ps.at(p + ".fc2.w");
  const Tensor& b2 = ps.at(p + ".fc2.b");
  Tensor h1 = Tensor::zeros({x.rows(), w1.cols()});
  mat(h1).noalias() = mat(x) * mat(w1);
  mat(h1).rowwise() += vec(b1).transpose();
  for (double& v : h1.data) v = std::tanh(v);
  Tensor h2 = Tensor::zeros({x.rows(), w2.cols()});
  mat(h2).noalias() = mat(h1) * mat(w2);
  mat(h2).rowwise() += vec(b2).transpose();
  for (double& v : h2.data) v = std::tanh(v);
  return h2;
}

Tensor head_forward(const ParameterSet& ps, const std::string& p, const Tensor& h) {
  const Tensor& w = ps.at(p + ".head.w");
  const Tensor& b = ps.at(p + ".head.b");
  Tensor y = Tensor::zeros({h.rows(), w.cols()});
  mat(y).noalias() = mat(h) * mat(w);
  mat(y).rowwise() += vec(b).transpose();
  return y;
}

Tensor as_row(const Tensor& feats, int64_t dim) {
  check(feats.size() == dim, "policy features size ", feats.size(), ", expected ", dim);
  return feats.reshaped({1, dim});
}

Tape::Var trunk_forward(Tape& t, const Tape::NamedVars& vars, const std::string& p,
                        Tape::Var x) {
  Tape::Var h1 = t.tanh_(t.add_rowvec(t.matmul(x, vars.at(p + ".fc1.w")), vars.at(p + ".fc1.b")));
  return t.tanh_(t.add_rowvec(t.matmul(h1, vars.at(p + ".fc2.w")), vars.at(p + ".fc2.b")));
}

Tape::Var head_forward(Tape& t, const Tape::NamedVars& vars, const std::string& p, Tape::Var h) {
  return t.add_rowvec(t.matmul(h, vars.at(p + ".head.w")), vars.at(p + ".head.b"));
}

double row_lse(const double* l, int64_t n) {
  double mx = l[0];
  for (int64_t i = 1; i < n; ++i) mx = std::max(mx, l[i]);
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += std::exp(l[i] - mx);
  return mx + std::log(s);
}

}  // namespace

PolicyModel PolicyModel::create(const ActionSpec& aspec, int64_t input_dim,
                                const std::string& features, Rng& rng) {
  PolicyModel m;
  m.aspec = aspec;
  m.input_dim = input_dim;
  m.features = features;
  const int64_t width = 64;
  int64_t out = action_dim(aspec);
  for (const char* p : {"pi", "v"}) {
    std::string s(p);
    m.params.add(s + ".fc1.w", glorot_uniform({input_dim, width}, input_dim, width, rng));
    m.params.add(s + ".fc1.b", Tensor::zeros({width}));
    m.params.add(s + ".fc2.w", glorot_uniform({width, width}, width, width, rng));
    m.params.add(s + ".fc2.b", Tensor::zeros({width}));
  }
  // small policy head keeps the initial policy near uniform
  Tensor pw = glorot_uniform({width, out}, width, out, rng);
  for (double& v : pw.data) v *= 0.01;
  m.params.add("pi.head.w", std::move(pw));
  m.params.add("pi.head.b", Tensor::zeros({out}));
  if (aspec.kind == ActionSpec::Kind::Continuous)
    m.params.add("pi.logstd", Tensor::zeros({aspec.dim}));
  m.params.add("v.head.w", glorot_uniform({width, 1}, width, 1, rng));
  m.params.add("v.head.b", Tensor::zeros({1}));

  m.params.layout = Json{{"action", aspec.to_json()},
                         {"input_dim", input_dim},
                         {"features", features},
                         {"width", width}};
  return m;
}

Tensor PolicyModel::actor_out(const Tensor& feats) const {
  Tensor x = feats.rank() == 1 ? as_row(feats, input_dim) : feats;
  Tensor out = head_forward(params, "pi", trunk_forward(params, "pi", x));
  if (feats.rank() == 1) return out.reshaped({out.cols()});
  return out;
}

Tensor PolicyModel::log_std() const {
  Tensor s = params.at("pi.logstd");
  for (double& v : s.data) v = std::clamp(v, kLogStdLo, kLogStdHi);
  return s;
}

double PolicyModel::value(const Tensor& feats) const {
  Tensor out = head_forward(params, "v", trunk_forward(params, "v", as_row(feats, input_dim)));
  return out.data[0];
}

Tensor PolicyModel::value_batch(const Tensor& feats) const {
  return head_forward(params, "v", trunk_forward(params, "v", feats));
}

void PolicyModel::save(const std::filesystem::path& path) const {
  save_parameters(path, params, "policy");
}

PolicyModel PolicyModel::load(const std::filesystem::path& path) {
  LoadedParameters lp = load_parameters(path, "policy");
  PolicyModel m;
  m.params = std::move(lp.params);
  m.aspec = ActionSpec::from_json(m.params.layout.at("action"));
  m.input_dim = m.params.layout.at("input_dim").get<int64_t>();
  m.features = m.params.layout.at("features").get<std::string>();
  return m;
}

PolicyStep policy_step(const PolicyModel& model, const Tensor& feats, Rng& rng,
                       bool deterministic) {
  PolicyStep out;
  out.value = model.value(feats);
  Tensor head = model.actor_out(feats);
  check(head.all_finite(), "policy network produced a non-finite output");

  if (model.aspec.kind == ActionSpec::Kind::Discrete) {
    int64_t n = head.size();
    double lse = row_lse(head.data.data(), n);
    int a = 0;
    if (deterministic) {
      for (int64_t i = 1; i < n; ++i)
        if (head.data[static_cast<size_t>(i)] > head.data[static_cast<size_t>(a)])
          a = static_cast<int>(i);
    } else {
      double u = rng.uniform();
      double acc = 0.0;
      a = static_cast<int>(n) - 1;
      for (int64_t i = 0; i < n; ++i) {
        acc += std::exp(head.data[static_cast<size_t>(i)] - lse);
        if (u < acc) {
          a = static_cast<int>(i);
          break;
        }
      }
    }
    out.action = Action::make_discrete(a);
    out.log_prob = head.data[static_cast<size_t>(a)] - lse;
    return out;
  }

  Tensor logstd = model.log_std();
  std::vector<double> act(static_cast<size_t>(model.aspec.dim));
  out.log_prob = 0.0;
  for (int64_t j = 0; j < model.aspec.dim; ++j) {
    double mu = head.data[static_cast<size_t>(j)];
    double s = logstd.data[static_cast<size_t>(j)];
    double sigma = std::exp(s);
    double a = deterministic ? mu : mu + sigma * rng.normal();
    act[static_cast<size_t>(j)] = a;
    double z = (a - mu) / sigma;
    out.log_prob += -0.5 * z * z - s - 0.5 * kLog2Pi;
  }
  out.action = Action::make_continuous(std::move(act));
  return out;
}

GaeResult compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                      const std::vector<uint8_t>& dones, double bootstrap_value, double gamma,
                      double lambda) {
  size_t T = rewards.size();
  check(values.size() == T && dones.size() == T, "compute_gae: array lengths differ");
  GaeResult out;
  out.advantages.assign(T, 0.0);
  out.returns.assign(T, 0.0);
  double next_adv = 0.0;
  for (size_t i = T; i-- > 0;) {
    double not_done = dones[i] ? 0.0 : 1.0;
    double next_value = (i + 1 < T) ? values[i + 1] : bootstrap_value;
    double delta = rewards[i] + gamma * next_value * not_done - values[i];
    next_adv = delta + gamma * lambda * not_done * next_adv;
    out.advantages[i] = next_adv;
    out.returns[i] = out.advantages[i] + values[i];
  }
  return out;
}

void normalize_advantages(std::span<double> advantages) {
  size_t n = advantages.size();
  if (n == 0) return;
  double mean = 0.0;
  for (double v : advantages) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : advantages) var += (v - mean) * (v - mean);
  double sd = std::sqrt(var / static_cast<double>(n));
  for (double& v : advantages) v = (v - mean) / (sd + 1e-8);
}

PpoLossGraph ppo_loss_graph(Tape& tape, const Tape::NamedVars& vars, const PolicyModel& model,
                            const PpoMinibatch& mb, const PpoConfig& cfg) {
  bool discrete = model.aspec.kind == ActionSpec::Kind::Discrete;
  int64_t A = action_dim(model.aspec);

  Tape::Var x = tape.input(mb.feats);
  Tape::Var trunk = trunk_forward(tape, vars, "pi", x);
  Tape::Var head = head_forward(tape, vars, "pi", trunk);

  PpoLossGraph g;
  Tape::Var logp_new;
  if (discrete) {
    logp_new = tape.categorical_logprob(head, mb.actions_d);
    g.entropy = tape.mean_all(tape.categorical_entropy(head));
  } else {
    Tape::Var logstd = tape.clamp_(vars.at("pi.logstd"), kLogStdLo, kLogStdHi);
    Tape::Var logstd_row = tape.reshape(logstd, {1, A});
    logp_new = tape.gaussian_logprob(head, logstd_row, mb.actions);
    g.entropy = tape.gaussian_entropy(logstd_row);
  }

  g.ratio = tape.exp_(tape.sub(logp_new, tape.input(mb.logp_old)));
  Tape::Var adv_in = tape.input(mb.advantages);
  Tape::Var surr1 = tape.mul(g.ratio, adv_in);
  Tape::Var surr2 = tape.mul(tape.clamp_(g.ratio, 1.0 - cfg.clip, 1.0 + cfg.clip), adv_in);
  g.policy_loss = tape.scale(tape.mean_all(tape.minimum(surr1, surr2)), -1.0);

  Tape::Var vpred = head_forward(tape, vars, "v", trunk_forward(tape, vars, "v", x));
  g.value_loss = tape.mean_all(tape.square(tape.sub(vpred, tape.input(mb.returns))));

  g.loss = tape.add(tape.add(g.policy_loss, tape.scale(g.value_loss, 0.5)),
                    tape.scale(g.entropy, -cfg.entropy_coef));
  return g;
}

UpdateStats ppo_update(PolicyModel& model, const RolloutBuffer& buffer, const PpoConfig& cfg,
                       Adam& adam, Rng& rng) {
  int64_t T = buffer.size();
  check(T >= 2, "ppo_update: empty buffer");
  check(static_cast<int64_t>(buffer.advantages.size()) == T,
        "ppo_update: advantages not computed");
  int64_t D = model.input_dim;
  bool discrete = model.aspec.kind == ActionSpec::Kind::Discrete;
  int64_t A = action_dim(model.aspec);

  UpdateStats stats;
  int64_t nbatches = 0;
  std::vector<int64_t> order(static_cast<size_t>(T));
  for (int64_t i = 0; i < T; ++i) order[static_cast<size_t>(i)] = i;

  for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates with the job rng
    for (int64_t i = T - 1; i > 0; --i) {
      int64_t j = rng.uniform_index(i + 1);
      std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
    }
    for (int64_t start = 0; start + 1 < T; start += cfg.minibatch) {
      int64_t m = std::min(cfg.minibatch, T - start);
      if (m < 2) break;

      PpoMinibatch mb;
      mb.feats = Tensor::zeros({m, D});
      mb.actions = Tensor::zeros({m, A});
      mb.actions_d.resize(static_cast<size_t>(m));
      mb.logp_old = Tensor::zeros({m, 1});
      mb.advantages = Tensor::zeros({m, 1});
      mb.returns = Tensor::zeros({m, 1});
      for (int64_t i = 0; i < m; ++i) {
        int64_t src = order[static_cast<size_t>(start + i)];
        std::copy_n(buffer.feats.data.begin() + src * D, D, mb.feats.data.begin() + i * D);
        if (discrete)
          mb.actions_d[static_cast<size_t>(i)] = buffer.actions[static_cast<size_t>(src)].discrete;
        else
          for (int64_t j = 0; j < A; ++j)
            mb.actions.at(i, j) = buffer.actions[static_cast<size_t>(src)].continuous[static_cast<size_t>(j)];
        mb.logp_old.data[static_cast<size_t>(i)] = buffer.log_probs[static_cast<size_t>(src)];
        mb.advantages.data[static_cast<size_t>(i)] = buffer.advantages[static_cast<size_t>(src)];
        mb.returns.data[static_cast<size_t>(i)] = buffer.returns[static_cast<size_t>(src)];
      }
      normalize_advantages(mb.advantages.data);

      Tape tape;
      Tape::NamedVars vars = tape.params(model.params);
      PpoLossGraph g = ppo_loss_graph(tape, vars, model, mb, cfg);
      tape.backward(g.loss);
      ParameterSet grads = tape.gradients(vars);
      clip_grad_norm(grads, cfg.max_grad_norm);
      adam.step(model.params, grads);

      const Tensor& rv = tape.value(g.ratio);
      double rsum = 0.0, clipped = 0.0;
      for (double v : rv.data) {
        rsum += v;
        if (std::abs(v - 1.0) > cfg.clip) clipped += 1.0;
      }
      stats.mean_ratio += rsum / static_cast<double>(m);
      stats.clip_fraction += clipped / static_cast<double>(m);
      stats.policy_loss += tape.value(g.policy_loss).scalar_value();
      stats.value_loss += tape.value(g.value_loss).scalar_value();
      stats.entropy += tape.value(g.entropy).scalar_value();
      ++nbatches;
    }
  }
  check(nbatches > 0, "ppo_update: no minibatches processed");
  double inv = 1.0 / static_cast<double>(nbatches);
  stats.policy_loss *= inv;
  stats.value_loss *= inv;
  stats.entropy *= inv;
  stats.clip_fraction *= inv;
  stats.mean_ratio *= inv;
  return stats;
}

void LearningCurve::to_csv(const std::filesystem::path& path) const {
  CsvWriter csv(path, {"env_steps", "mean_env_return", "success_rate", "policy_loss",
                       "value_loss", "entropy", "clip_fraction"});
  for (const CurvePoint& p : points) {
    double row[] = {static_cast<double>(p.env_steps), p.mean_env_return, p.success_rate,
                    p.policy_loss,                    p.value_loss,      p.entropy,
                    p.clip_fraction};
    csv.row(row);
  }
  csv.close();
}

Tensor policy_features(const Tensor& obs, const EncoderModel* encoder) {
  if (encoder) return encoder->encode(obs);
  return obs.flattened();
}

namespace {

double evaluate_success(const PolicyModel& model, Env& env, int64_t episodes, Rng& rng,
                        const EncoderModel* encoder) {
  int64_t wins = 0;
  for (int64_t e = 0; e < episodes; ++e) {
    Tensor obs = env.reset(rng);
    bool success = false;
    while (true) {
      PolicyStep s = policy_step(model, policy_features(obs, encoder), rng, true);
      StepResult r = env.step(s.action);
      success = success || r.reached_goal;
      obs = std::move(r.obs);
      if (r.done) break;
    }
    if (success) ++wins;
  }
  return static_cast<double>(wins) / static_cast<double>(episodes);
}

using EvalHook = std::function<double(const PolicyModel&, uint64_t)>;

TrainPolicyResult train_policy_impl(const EnvFactory& factory, RewardShaper& shaper,
                                    const PpoConfig& cfg, uint64_t seed,
                                    const EncoderModel* feature_encoder, bool verbose,
                                    const EvalHook& eval_hook) {
  cfg.validate();
  if (cfg.features == "embedding")
    check(feature_encoder != nullptr, "feature mode \"embedding\" requires an encoder");
  const EncoderModel* enc = cfg.features == "embedding" ? feature_encoder : nullptr;

  std::unique_ptr<Env> env = factory();
  std::unique_ptr<Env> eval_env = factory();

  Rng root(seed);
  Rng env_rng = root.split(1);
  Rng act_rng = root.split(2);
  Rng shuffle_rng = root.split(3);
  uint64_t eval_seed_base = root.next_u64();

  int64_t feat_dim = enc ? enc->cfg.embed_dim : shape_size(env->observation_shape());
  Rng init_rng = root.split(4);
  TrainPolicyResult result;
  result.policy = PolicyModel::create(env->action_spec(), feat_dim, cfg.features, init_rng);
  Adam adam({.lr = cfg.lr});

  Tensor obs = env->reset(env_rng);
  shaper.episode_start(*env);
  double episode_env_return = 0.0;
  double last_mean_return = 0.0;

  int64_t iterations = cfg.total_steps / cfg.rollout;
  for (int64_t iter = 0; iter < iterations; ++iter) {
    RolloutBuffer buf;
    buf.feats = Tensor::zeros({cfg.rollout, feat_dim});
    buf.actions.reserve(static_cast<size_t>(cfg.rollout));
    std::vector<double> completed_returns;

    for (int64_t t = 0; t < cfg.rollout; ++t) {
      Tensor feats = policy_features(obs, enc);
      PolicyStep ps = policy_step(result.policy, feats, act_rng, false);
      StepResult sr = env->step(ps.action);
      double shaped = shaper.shape(obs, ps.action, sr.reward, sr.obs, sr.done);

      std::copy(feats.data.begin(), feats.data.end(), buf.feats.data.begin() + t * feat_dim);
      buf.actions.push_back(ps.action);
      buf.log_probs.push_back(ps.log_prob);
      buf.values.push_back(ps.value);
      buf.shaped_rewards.push_back(shaped);
      buf.env_rewards.push_back(sr.reward);
      buf.dones.push_back(sr.done ? 1 : 0);

      episode_env_return += sr.reward;
      obs = std::move(sr.obs);
      if (sr.done) {
        completed_returns.push_back(episode_env_return);
        episode_env_return = 0.0;
        obs = env->reset(env_rng);
        shaper.episode_start(*env);
      }
    }

    double bootstrap = result.policy.value(policy_features(obs, enc));
    GaeResult gae = compute_gae(buf.shaped_rewards, buf.values, buf.dones, bootstrap, cfg.gamma,
                                cfg.gae_lambda);
    buf.advantages = std::move(gae.advantages);
    buf.returns = std::move(gae.returns);

    UpdateStats stats = ppo_update(result.policy, buf, cfg, adam, shuffle_rng);

    if (!completed_returns.empty()) {
      double s = 0.0;
      for (double r : completed_returns) s += r;
      last_mean_return = s / static_cast<double>(completed_returns.size());
    }
    uint64_t eval_seed = mix64(eval_seed_base + static_cast<uint64_t>(iter));
    double success;
    if (eval_hook) {
      success = eval_hook(result.policy, eval_seed);
    } else {
      Rng eval_rng(eval_seed);
      success = evaluate_success(result.policy, *eval_env, cfg.eval_episodes, eval_rng, enc);
    }

    CurvePoint p;
    p.env_steps = (iter + 1) * cfg.rollout;
    p.mean_env_return = last_mean_return;
    p.success_rate = success;
    p.policy_loss = stats.policy_loss;
    p.value_loss = stats.value_loss;
    p.entropy = stats.entropy;
    p.clip_fraction = stats.clip_fraction;
    result.curve.points.push_back(p);

    if (verbose)
      std::cerr << "iter " << iter + 1 << "/" << iterations << " steps " << p.env_steps
                << " return " << p.mean_env_return << " success " << p.success_rate
                << " entropy " << p.entropy << "\n";
  }
  return result;
}

}  // namespace

TrainPolicyResult train_policy(const EnvFactory& factory, RewardShaper& shaper,
                               const PpoConfig& cfg, uint64_t seed,
                               const EncoderModel* feature_encoder, bool verbose) {
  return train_policy_impl(factory, shaper, cfg, seed, feature_encoder, verbose, nullptr);
}

TrainPolicyResult train_policy(const EnvConfig& env_cfg, RewardShaper& shaper,
                               const PpoConfig& cfg, uint64_t seed,
                               const EncoderModel* feature_encoder, bool verbose) {
  return train_policy([&] { return make_env(env_cfg); }, shaper, cfg, seed, feature_encoder,
                      verbose);
}

namespace {

bool in_goal_cluster(const EncoderModel& encoder, const ClusterModel& clusters,
                     const Tensor& obs) {
  return assign_cluster(clusters, encoder.encode(obs)) == clusters.goal_cluster;
}

// Task wrapper: reach the goal cluster. +1 and done on entry; spawns inside
// the cluster are rerolled.
class ClusterEntryEnv final : public Env {
 public:
  ClusterEntryEnv(std::unique_ptr<Env> inner, const EncoderModel& encoder,
                  const ClusterModel& clusters)
      : inner_(std::move(inner)), encoder_(encoder), clusters_(clusters) {}

  std::string name() const override { return inner_->name() + "/to-cluster"; }
  std::vector<int64_t> observation_shape() const override { return inner_->observation_shape(); }
  ActionSpec action_spec() const override { return inner_->action_spec(); }
  int horizon() const override { return inner_->horizon(); }
  Tensor observation() const override { return inner_->observation(); }
  Tensor goal_observation() const override { return inner_->goal_observation(); }
  bool episode_over() const override { return done_; }

  Tensor reset(Rng& rng) override {
    for (int tries = 0; tries < 10000; ++tries) {
      Tensor obs = inner_->reset(rng);
      if (!in_goal_cluster(encoder_, clusters_, obs)) {
        done_ = false;
        return obs;
      }
    }
    fail("could not spawn outside the goal cluster after 10000 resets");
  }

  StepResult step(const Action& a) override {
    StepResult r = inner_->step(a);
    bool entered = in_goal_cluster(encoder_, clusters_, r.obs);
    r.reached_goal = entered;
    r.reward = entered ? 1.0 : 0.0;
    r.done = entered || r.done;
    done_ = r.done;
    return r;
  }

 private:
  std::unique_ptr<Env> inner_;
  const EncoderModel& encoder_;
  const ClusterModel& clusters_;
  bool done_ = true;
};

// Spawns only inside the goal cluster; environment reward otherwise.
class InClusterSpawnEnv final : public Env {
 public:
  InClusterSpawnEnv(std::unique_ptr<Env> inner, const EncoderModel& encoder,
                    const ClusterModel& clusters)
      : inner_(std::move(inner)), encoder_(encoder), clusters_(clusters) {}

  std::string name() const override { return inner_->name() + "/to-goal"; }
  std::vector<int64_t> observation_shape() const override { return inner_->observation_shape(); }
  ActionSpec action_spec() const override { return inner_->action_spec(); }
  int horizon() const override { return inner_->horizon(); }
  Tensor observation() const override { return inner_->observation(); }
  Tensor goal_observation() const override { return inner_->goal_observation(); }
  bool episode_over() const override { return inner_->episode_over(); }

  Tensor reset(Rng& rng) override {
    for (int tries = 0; tries < 10000; ++tries) {
      Tensor obs = inner_->reset(rng);
      if (in_goal_cluster(encoder_, clusters_, obs)) return obs;
    }
    fail("could not spawn inside the goal cluster after 10000 resets");
  }

  StepResult step(const Action& a) override { return inner_->step(a); }

 private:
  std::unique_ptr<Env> inner_;
  const EncoderModel& encoder_;
  const ClusterModel& clusters_;
};

}  // namespace

TwoStepPolicy train_two_step_cluster_policy(const EnvConfig& env_cfg, const SchemeConfig& scheme,
                                            const EncoderModel& encoder,
                                            const ClusterModel& clusters, const PpoConfig& cfg,
                                            uint64_t seed, bool verbose) {
  check(scheme.variant == SchemeVariant::ClusterBonus, "two-step training is a cluster_bonus mode");
  check(clusters.goal_cluster >= 0, "two-step training requires an identified goal cluster");

  SchemeConfig sparse_cfg;  // Sparse
  std::unique_ptr<RewardShaper> sparse = make_shaper(sparse_cfg, env_cfg, nullptr, nullptr, nullptr);
  PpoConfig half = cfg;
  half.total_steps = std::max<int64_t>(cfg.rollout, cfg.total_steps / 2);

  TwoStepPolicy out;
  auto cluster_factory = [&]() -> std::unique_ptr<Env> {
    return std::make_unique<ClusterEntryEnv>(make_env(env_cfg), encoder, clusters);
  };
  TrainPolicyResult first =
      train_policy_impl(cluster_factory, *sparse, half, seed, nullptr, verbose, nullptr);
  out.to_cluster = std::move(first.policy);

  auto goal_factory = [&]() -> std::unique_ptr<Env> {
    return std::make_unique<InClusterSpawnEnv>(make_env(env_cfg), encoder, clusters);
  };
  // curve success measures the full two-step pipeline with the current goal policy
  EvalHook hook = [&](const PolicyModel& goal_policy, uint64_t eval_seed) {
    TwoStepPolicy pair;
    pair.to_cluster = out.to_cluster;
    pair.to_goal = goal_policy;
    Rng rng(eval_seed);
    return two_step_success_rate(pair, env_cfg, encoder, clusters, cfg.eval_episodes, rng);
  };
  TrainPolicyResult second =
      train_policy_impl(goal_factory, *sparse, half, seed + 1, nullptr, verbose, hook);
  out.to_goal = std::move(second.policy);

  out.curve = std::move(first.curve);
  for (CurvePoint p : second.curve.points) {
    p.env_steps += half.total_steps;
    out.curve.points.push_back(p);
  }
  return out;
}

double two_step_success_rate(const TwoStepPolicy& pair, const EnvConfig& env_cfg,
                             const EncoderModel& encoder, const ClusterModel& clusters,
                             int64_t episodes, Rng& rng) {
  std::unique_ptr<Env> env = make_env(env_cfg);
  int64_t wins = 0;
  for (int64_t e = 0; e < episodes; ++e) {
    Tensor obs = env->reset(rng);
    bool success = false;
    bool phase2 = in_goal_cluster(encoder, clusters, obs);
    while (true) {
      const PolicyModel& pi = phase2 ? pair.to_goal : pair.to_cluster;
      PolicyStep s = policy_step(pi, policy_features(obs, nullptr), rng, true);
      StepResult r = env->step(s.action);
      success = success || r.reached_goal;
      obs = std::move(r.obs);
      if (!phase2) phase2 = in_goal_cluster(encoder, clusters, obs);
      if (r.done) break;
    }
    if (success) ++wins;
  }
  return static_cast<double>(wins) / static_cast<double>(episodes);
}

}  // namespace pshape
