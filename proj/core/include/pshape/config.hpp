#pragma once

#include <optional>

#include "pshape/cpc.hpp"
#include "pshape/env.hpp"
#include "pshape/rl.hpp"
#include "pshape/shaping.hpp"

namespace pshape {

struct CollectConfig {
  int64_t count = 0;
  int64_t max_len = 0;

  static CollectConfig from_json(const Json& j);
};

struct ClusterStageConfig {
  int64_t k = 4;
  int64_t samples = 5000;
  int restarts = 10;
  int max_iters = 100;

  static ClusterStageConfig from_json(const Json& j);
};

struct EvalStageConfig {
  std::string experiment;  // distance-correlation | success-rate | compare-schemes |
                           // texture-generalization | cluster-viz
  int64_t pairs = 500;
  int64_t episodes = 100;
  int64_t texture_states = 512;
  int64_t texture_k = 8;
  TextureSpec texture_train{"cloth", 0};
  TextureSpec texture_holdout{"wood", 0};
  int64_t viz_samples = 2000;

  static EvalStageConfig from_json(const Json& j);
};

// One JSON config drives every pipeline stage; stages validate that the
// blocks and upstream artifacts they need are present before doing work.
struct ExperimentConfig {
  int version = 1;
  uint64_t seed = 0;
  std::vector<uint64_t> seeds;  // multi-seed experiments
  std::string out_dir;          // resolution: CLI flag > config > PSHAPE_OUT > "out"

  std::optional<EnvConfig> env;
  std::optional<CollectConfig> collect;
  std::optional<CpcConfig> cpc;
  std::optional<ClusterStageConfig> cluster;
  std::optional<SchemeConfig> scheme;
  std::vector<SchemeConfig> schemes;
  std::optional<PpoConfig> ppo;
  std::optional<EvalStageConfig> eval;

  struct Artifacts {
    std::string trajectories;
    std::string encoder;
    std::string clusters;
    std::string policy;
  } artifacts;

  static ExperimentConfig from_json(const Json& j);
  static ExperimentConfig load(const std::filesystem::path& path);

  const EnvConfig& env_required(const std::string& stage) const;

  // Artifact paths resolve to explicit entries or defaults under out_dir.
  std::filesystem::path trajectories_path() const;
  std::filesystem::path encoder_path() const;
  std::filesystem::path clusters_path() const;
  std::filesystem::path policy_path(const std::string& scheme, uint64_t seed) const;

  std::vector<uint64_t> effective_seeds() const;
};

}  // namespace pshape
