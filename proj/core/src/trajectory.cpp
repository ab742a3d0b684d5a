#include "pshape/trajectory.hpp"

#include "pshape/container.hpp"

namespace pshape {

int64_t TrajectorySet::total_states() const {
  int64_t n = 0;
  for (const auto& t : items) n += t.state_count();
  return n;
}

Action random_action(const ActionSpec& spec, Rng& rng) {
  if (spec.kind == ActionSpec::Kind::Discrete)
    return Action::make_discrete(rng.uniform_int(spec.count));
  std::vector<double> v(static_cast<size_t>(spec.dim));
  for (double& x : v) x = rng.uniform(spec.low, spec.high);
  return Action::make_continuous(std::move(v));
}

TrajectorySet collect_random_trajectories(Env& env, const EnvConfig& env_echo, int64_t count,
                                          int64_t max_len, Rng& rng) {
  check(count >= 1, "collect: trajectory count must be >= 1, got ", count);
  check(max_len >= 1, "collect: max_len must be >= 1, got ", max_len);

  TrajectorySet set;
  set.env = env_echo;
  set.observation_shape = env.observation_shape();
  set.action = env.action_spec();
  set.items.reserve(static_cast<size_t>(count));

  for (int64_t i = 0; i < count; ++i) {
    Trajectory traj;
    traj.observations.push_back(env.reset(rng));
    for (int64_t t = 0; t < max_len; ++t) {
      Action a = random_action(set.action, rng);
      StepResult r = env.step(a);
      traj.actions.push_back(std::move(a));
      traj.rewards.push_back(r.reward);
      traj.dones.push_back(r.done ? 1 : 0);
      traj.observations.push_back(std::move(r.obs));
      if (r.done) break;
    }
    set.items.push_back(std::move(traj));
  }
  return set;
}

void save_trajectories(const std::filesystem::path& path, const TrajectorySet& set) {
  Container c;
  c.meta["kind"] = "trajectories";
  c.meta["version"] = 1;
  c.meta["env"] = set.env.to_json();
  c.meta["observation_shape"] = set.observation_shape;
  c.meta["action"] = set.action.to_json();
  c.meta["count"] = set.items.size();
  Json lengths = Json::array();
  for (const auto& t : set.items) lengths.push_back(t.length());
  c.meta["lengths"] = std::move(lengths);

  int64_t obs_size = shape_size(set.observation_shape);
  int64_t act_dim = set.action.kind == ActionSpec::Kind::Discrete ? 1 : set.action.dim;
  for (size_t i = 0; i < set.items.size(); ++i) {
    const Trajectory& t = set.items[i];
    int64_t L = t.length(), S = t.state_count();
    check(S == L + 1, "trajectory ", i, " has ", S, " states for ", L, " transitions");
    std::string p = "t" + std::to_string(i);

    Tensor obs = Tensor::zeros({S, obs_size});
    for (int64_t s = 0; s < S; ++s) {
      check(t.observations[static_cast<size_t>(s)].size() == obs_size,
            "trajectory ", i, ": observation ", s, " has wrong size");
      std::copy(t.observations[static_cast<size_t>(s)].data.begin(),
                t.observations[static_cast<size_t>(s)].data.end(),
                obs.data.begin() + s * obs_size);
    }
    Tensor act = Tensor::zeros({L, act_dim});
    Tensor rew = Tensor::zeros({L});
    Tensor don = Tensor::zeros({L});
    for (int64_t s = 0; s < L; ++s) {
      const Action& a = t.actions[static_cast<size_t>(s)];
      if (set.action.kind == ActionSpec::Kind::Discrete) {
        act.data[static_cast<size_t>(s)] = a.discrete;
      } else {
        check(static_cast<int64_t>(a.continuous.size()) == act_dim, "trajectory ", i,
              ": action ", s, " has wrong dimension");
        for (int64_t d = 0; d < act_dim; ++d)
          act.data[static_cast<size_t>(s * act_dim + d)] = a.continuous[static_cast<size_t>(d)];
      }
      rew.data[static_cast<size_t>(s)] = t.rewards[static_cast<size_t>(s)];
      don.data[static_cast<size_t>(s)] = t.dones[static_cast<size_t>(s)] ? 1.0 : 0.0;
    }
    c.arrays.push_back({p + ".obs", std::move(obs)});
    c.arrays.push_back({p + ".act", std::move(act)});
    c.arrays.push_back({p + ".rew", std::move(rew)});
    c.arrays.push_back({p + ".done", std::move(don)});
  }
  write_container(path, c);
}

TrajectorySet load_trajectories(const std::filesystem::path& path) {
  Container c = read_container(path, "trajectories");
  TrajectorySet set;
  set.env = EnvConfig::from_json(c.meta.at("env"));
  set.observation_shape = c.meta.at("observation_shape").get<std::vector<int64_t>>();
  set.action = ActionSpec::from_json(c.meta.at("action"));
  size_t count = c.meta.at("count").get<size_t>();

  int64_t obs_size = shape_size(set.observation_shape);
  int64_t act_dim = set.action.kind == ActionSpec::Kind::Discrete ? 1 : set.action.dim;
  set.items.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    std::string p = "t" + std::to_string(i);
    const Tensor& obs = c.array(p + ".obs");
    const Tensor& act = c.array(p + ".act");
    const Tensor& rew = c.array(p + ".rew");
    const Tensor& don = c.array(p + ".done");
    int64_t S = obs.shape[0];
    int64_t L = act.shape[0];
    check(S == L + 1 && rew.size() == L && don.size() == L, path.string(), ": trajectory ", i,
          " has inconsistent array lengths");
    Trajectory t;
    for (int64_t s = 0; s < S; ++s) {
      Tensor o = Tensor::zeros(set.observation_shape);
      std::copy(obs.data.begin() + s * obs_size, obs.data.begin() + (s + 1) * obs_size,
                o.data.begin());
      t.observations.push_back(std::move(o));
    }
    for (int64_t s = 0; s < L; ++s) {
      Action a;
      if (set.action.kind == ActionSpec::Kind::Discrete) {
        a.discrete = static_cast<int>(act.data[static_cast<size_t>(s)]);
      } else {
        a.continuous.resize(static_cast<size_t>(act_dim));
        for (int64_t d = 0; d < act_dim; ++d)
          a.continuous[static_cast<size_t>(d)] = act.data[static_cast<size_t>(s * act_dim + d)];
      }
      t.actions.push_back(std::move(a));
      t.rewards.push_back(rew.data[static_cast<size_t>(s)]);
      t.dones.push_back(don.data[static_cast<size_t>(s)] != 0.0 ? 1 : 0);
    }
    set.items.push_back(std::move(t));
  }
  return set;
}

std::vector<Tensor> sample_states(const TrajectorySet& set, int64_t count, Rng& rng) {
  int64_t total = set.total_states();
  check(total > 0, "sample_states: empty trajectory set");
  std::vector<Tensor> out;
  out.reserve(static_cast<size_t>(count));
  for (int64_t i = 0; i < count; ++i) {
    int64_t flat = rng.uniform_index(total);
    for (const auto& t : set.items) {
      if (flat < t.state_count()) {
        out.push_back(t.observations[static_cast<size_t>(flat)]);
        break;
      }
      flat -= t.state_count();
    }
  }
  return out;
}

}  // namespace pshape
