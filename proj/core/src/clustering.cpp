#include "pshape/clustering.hpp"

#include <cmath>
#include <limits>

#include "pshape/container.hpp"

namespace pshape {

namespace {

double sq_dist(const double* a, const double* b, int64_t dim) {
  double s = 0.0;
  for (int64_t i = 0; i < dim; ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

struct LloydResult {
  Tensor centroids;
  double inertia = std::numeric_limits<double>::infinity();
};

LloydResult lloyd_once(const Tensor& pts, int64_t k, Rng& rng, int max_iters,
                       std::vector<double>* trace) {
  int64_t n = pts.rows(), dim = pts.cols();

  // k-means++ seeding
  Tensor centroids = Tensor::zeros({k, dim});
  std::vector<double> d2(static_cast<size_t>(n), std::numeric_limits<double>::infinity());
  int64_t first = rng.uniform_index(n);
  std::copy_n(&pts.data[static_cast<size_t>(first * dim)], dim, centroids.data.begin());
  for (int64_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      double d = sq_dist(&pts.data[static_cast<size_t>(i * dim)],
                         &centroids.data[static_cast<size_t>((c - 1) * dim)], dim);
      d2[static_cast<size_t>(i)] = std::min(d2[static_cast<size_t>(i)], d);
      total += d2[static_cast<size_t>(i)];
    }
    check(total > 0.0, "kmeans_fit: fewer than k distinct points");
    double r = rng.uniform() * total;
    double acc = 0.0;
    int64_t pick = n - 1;
    for (int64_t i = 0; i < n; ++i) {
      acc += d2[static_cast<size_t>(i)];
      if (acc >= r) {
        pick = i;
        break;
      }
    }
    std::copy_n(&pts.data[static_cast<size_t>(pick * dim)], dim,
                centroids.data.begin() + c * dim);
  }

  std::vector<int> assign(static_cast<size_t>(n), -1);
  std::vector<int64_t> counts(static_cast<size_t>(k), 0);
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    double iter_inertia = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      int best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (int64_t c = 0; c < k; ++c) {
        double d = sq_dist(&pts.data[static_cast<size_t>(i * dim)],
                           &centroids.data[static_cast<size_t>(c * dim)], dim);
        if (d < bd) {
          bd = d;
          best = static_cast<int>(c);
        }
      }
      iter_inertia += bd;
      if (assign[static_cast<size_t>(i)] != best) {
        assign[static_cast<size_t>(i)] = best;
        changed = true;
      }
    }
    if (trace) trace->push_back(iter_inertia);
    if (!changed && iter > 0) break;

    std::fill(centroids.data.begin(), centroids.data.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (int64_t i = 0; i < n; ++i) {
      int c = assign[static_cast<size_t>(i)];
      ++counts[static_cast<size_t>(c)];
      for (int64_t d = 0; d < dim; ++d)
        centroids.data[static_cast<size_t>(c * dim + d)] += pts.data[static_cast<size_t>(i * dim + d)];
    }
    for (int64_t c = 0; c < k; ++c) {
      if (counts[static_cast<size_t>(c)] == 0) {
        // empty cluster: seed it with the point farthest from its centroid
        double worst = -1.0;
        int64_t worst_i = 0;
        for (int64_t i = 0; i < n; ++i) {
          int a = assign[static_cast<size_t>(i)];
          double d = sq_dist(&pts.data[static_cast<size_t>(i * dim)],
                             &centroids.data[static_cast<size_t>(a * dim)], dim);
          if (d > worst) {
            worst = d;
            worst_i = i;
          }
        }
        std::copy_n(&pts.data[static_cast<size_t>(worst_i * dim)], dim,
                    centroids.data.begin() + c * dim);
      } else {
        double inv = 1.0 / static_cast<double>(counts[static_cast<size_t>(c)]);
        for (int64_t d = 0; d < dim; ++d)
          centroids.data[static_cast<size_t>(c * dim + d)] *= inv;
      }
    }
  }

  LloydResult out;
  out.centroids = std::move(centroids);
  out.inertia = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    double bd = std::numeric_limits<double>::infinity();
    for (int64_t c = 0; c < k; ++c)
      bd = std::min(bd, sq_dist(&pts.data[static_cast<size_t>(i * dim)],
                                &out.centroids.data[static_cast<size_t>(c * dim)], dim));
    out.inertia += bd;
  }
  return out;
}

}  // namespace

ClusterModel kmeans_fit(const std::vector<Tensor>& points, int64_t k, Rng& rng, int restarts,
                        int max_iters, std::vector<std::vector<double>>* inertia_traces) {
  check(k >= 1, "kmeans_fit: k must be >= 1");
  check(static_cast<int64_t>(points.size()) >= k, "kmeans_fit: ", points.size(),
        " points is fewer than k = ", k);
  check(restarts >= 1 && max_iters >= 1, "kmeans_fit: restarts and max_iters must be >= 1");

  int64_t n = static_cast<int64_t>(points.size());
  int64_t dim = points[0].size();
  Tensor pts = Tensor::zeros({n, dim});
  for (int64_t i = 0; i < n; ++i) {
    check(points[static_cast<size_t>(i)].size() == dim,
          "kmeans_fit: inconsistent point dimensions");
    std::copy(points[static_cast<size_t>(i)].data.begin(),
              points[static_cast<size_t>(i)].data.end(), pts.data.begin() + i * dim);
  }

  LloydResult best;
  if (inertia_traces) inertia_traces->clear();
  for (int r = 0; r < restarts; ++r) {
    std::vector<double> trace;
    LloydResult run = lloyd_once(pts, k, rng, max_iters, inertia_traces ? &trace : nullptr);
    if (inertia_traces) inertia_traces->push_back(std::move(trace));
    if (run.inertia < best.inertia) best = std::move(run);
  }

  ClusterModel model;
  model.centroids = std::move(best.centroids);
  model.k = k;
  model.inertia = best.inertia;
  return model;
}

int assign_cluster(const ClusterModel& model, const Tensor& embedding) {
  check(model.k >= 1, "assign_cluster: unfitted model");
  check(embedding.size() == model.dim(), "assign_cluster: embedding size ", embedding.size(),
        " does not match centroid dimension ", model.dim());
  int best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (int64_t c = 0; c < model.k; ++c) {
    double d = sq_dist(embedding.data.data(),
                       &model.centroids.data[static_cast<size_t>(c * model.dim())], model.dim());
    if (d < bd) {  // strict: ties keep the lowest index
      bd = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

void identify_goal_cluster(ClusterModel& model, const EncoderModel& encoder,
                           const Tensor& goal_observation) {
  model.goal_cluster = assign_cluster(model, encoder.encode(goal_observation));
}

void ClusterModel::save(const std::filesystem::path& path) const {
  Container c;
  c.meta["kind"] = "clusters";
  c.meta["k"] = k;
  c.meta["inertia"] = inertia;
  c.meta["goal_cluster"] = goal_cluster;
  c.arrays.push_back({"centroids", centroids});
  write_container(path, c);
}

ClusterModel ClusterModel::load(const std::filesystem::path& path) {
  Container c = read_container(path, "clusters");
  ClusterModel m;
  m.k = c.meta.at("k").get<int64_t>();
  m.inertia = c.meta.at("inertia").get<double>();
  m.goal_cluster = c.meta.at("goal_cluster").get<int>();
  m.centroids = c.array("centroids");
  return m;
}

}  // namespace pshape
