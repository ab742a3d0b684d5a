#pragma once

#include <filesystem>

#include "pshape/env.hpp"

namespace pshape {

// One episode. observations has length() + 1 entries; the chaining invariant
// (observations[i+1] is the post-state of transition i) holds by construction
// and is validated on load.
struct Trajectory {
  std::vector<Tensor> observations;
  std::vector<Action> actions;
  std::vector<double> rewards;
  std::vector<uint8_t> dones;

  int64_t length() const { return static_cast<int64_t>(actions.size()); }
  int64_t state_count() const { return static_cast<int64_t>(observations.size()); }
};

struct TrajectorySet {
  EnvConfig env;
  std::vector<int64_t> observation_shape;
  ActionSpec action;
  std::vector<Trajectory> items;

  int64_t total_states() const;
};

// Uniformly random actions with manual resets: each episode ends at done or
// after max_len transitions, whichever comes first.
TrajectorySet collect_random_trajectories(Env& env, const EnvConfig& env_echo, int64_t count,
                                          int64_t max_len, Rng& rng);

void save_trajectories(const std::filesystem::path& path, const TrajectorySet& set);
TrajectorySet load_trajectories(const std::filesystem::path& path);

// Uniform over all states of all trajectories (weighted by state count).
std::vector<Tensor> sample_states(const TrajectorySet& set, int64_t count, Rng& rng);

Action random_action(const ActionSpec& spec, Rng& rng);

}  // namespace pshape
