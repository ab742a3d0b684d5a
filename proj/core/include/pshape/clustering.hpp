#pragma once

#include <filesystem>

#include "pshape/cpc.hpp"

namespace pshape {

struct ClusterModel {
  Tensor centroids;      // [k, dim]
  int64_t k = 0;
  double inertia = 0.0;
  int goal_cluster = -1;  // -1 until identified

  int64_t dim() const { return k > 0 ? centroids.cols() : 0; }

  void save(const std::filesystem::path& path) const;
  static ClusterModel load(const std::filesystem::path& path);
};

// Lloyd's algorithm with k-means++ seeding; best of `restarts` runs by
// inertia. Deterministic given (points, k, rng state, restarts). When
// inertia_traces is given, it receives one per-iteration inertia sequence per
// restart (non-increasing within each run).
ClusterModel kmeans_fit(const std::vector<Tensor>& points, int64_t k, Rng& rng,
                        int restarts = 10, int max_iters = 100,
                        std::vector<std::vector<double>>* inertia_traces = nullptr);

// Index of the nearest centroid by L2; ties break to the lowest index.
int assign_cluster(const ClusterModel& model, const Tensor& embedding);

// Marks the cluster containing the encoded goal observation.
void identify_goal_cluster(ClusterModel& model, const EncoderModel& encoder,
                           const Tensor& goal_observation);

}  // namespace pshape
