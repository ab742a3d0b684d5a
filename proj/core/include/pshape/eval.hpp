#pragma once

#include <array>
#include <map>
#include <span>

#include "pshape/gridworld.hpp"
#include "pshape/rl.hpp"

namespace pshape {

double pearson(std::span<const double> xs, std::span<const double> ys);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};
LinearFit least_squares(std::span<const double> xs, std::span<const double> ys);

// Maze distance structure: true shortest-path distance vs embedding-space L2
// over randomly sampled free-cell pairs.
struct CorrelationReport {
  int64_t pair_count = 0;
  double r = 0.0;
  double slope = 0.0;
  double intercept = 0.0;
  std::vector<double> true_distances;
  std::vector<double> embedding_distances;

  void to_csv(const std::filesystem::path& path) const;
  Json summary() const;
};

CorrelationReport distance_correlation(const GridLayout& layout, const EncoderModel& encoder,
                                       int64_t pair_count, Rng& rng);

// Deterministic-action episodes from random spawns; fraction reaching the
// goal condition within the horizon. Rewards are the env's own (sparse).
double success_rate(const PolicyModel& policy, const EnvConfig& env_cfg, int64_t episodes,
                    Rng& rng, const EncoderModel* feature_encoder = nullptr);

// NMI with arithmetic-mean normalization: 2 I(a;b) / (H(a) + H(b)).
double normalized_mutual_information(const std::vector<int>& a, const std::vector<int>& b);

struct TextureReport {
  double agreement = 0.0;     // same k-means cluster under both textures
  double nmi_train = 0.0;     // cluster labels vs 8 angle bins, training texture
  double nmi_holdout = 0.0;
  bool degenerate = false;    // embedding variance below 1e-6
  int64_t k = 0;
  int64_t state_count = 0;

  Json summary() const;
};

// Renders the same pendulum angles under both textures, clusters the
// training-texture embeddings, and scores agreement + angle consistency.
TextureReport texture_generalization(const EncoderModel& encoder, const TextureSpec& train_tex,
                                     const TextureSpec& holdout_tex,
                                     const std::vector<double>& thetas, int64_t k, Rng& rng);

// 2-d principal-component projection (for cluster visualization exports).
std::vector<std::array<double, 2>> pca_2d(const std::vector<Tensor>& points);

void export_cluster_csv(const std::filesystem::path& path,
                        const std::vector<std::string>& coord_names,
                        const std::vector<std::vector<double>>& coords,
                        const std::vector<int>& labels,
                        const std::vector<std::array<double, 2>>& projections);

struct ExperimentContext {
  const TrajectorySet* trajectories = nullptr;
  const EncoderModel* encoder = nullptr;
  const ClusterModel* clusters = nullptr;
};

struct SchemeRun {
  std::string scheme;
  uint64_t seed = 0;
  LearningCurve curve;
  double final_success = 0.0;
};

struct CompareResult {
  std::vector<SchemeRun> runs;
  std::map<std::string, double> mean_final_success;
  // first env_steps where the seed-mean success reaches 0.5; -1 if never
  std::map<std::string, int64_t> steps_to_half_success;

  Json summary() const;
};

// Trains one policy per (scheme, seed), evaluates each with final_episodes
// sparse episodes, and aggregates across seeds. When out_dir is nonempty,
// writes <env>_<experiment>-<scheme>_<seed>.csv curves plus a summary JSON.
CompareResult compare_schemes(const EnvConfig& env_cfg, const std::vector<SchemeConfig>& schemes,
                              const std::vector<uint64_t>& seeds, const PpoConfig& ppo,
                              const ExperimentContext& ctx, int64_t final_episodes,
                              const std::filesystem::path& out_dir,
                              const std::string& experiment_name, bool verbose = false);

std::string env_tag(const EnvConfig& cfg);

}  // namespace pshape
