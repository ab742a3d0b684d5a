#include "doctest.h"
#include "pshape/clustering.hpp"

using namespace pshape;

namespace {

std::vector<Tensor> points2(std::initializer_list<std::pair<double, double>> pts) {
  std::vector<Tensor> out;
  for (auto [x, y] : pts) out.push_back(Tensor::vector({x, y}));
  return out;
}

}  // namespace

TEST_CASE("two well-separated pairs split exactly") {
  auto pts = points2({{0, 0}, {0, 1}, {10, 0}, {10, 1}});
  Rng rng(1);
  ClusterModel m = kmeans_fit(pts, 2, rng);
  // centroids are {(0, 0.5), (10, 0.5)} in some order
  double x0 = m.centroids.at(0, 0), x1 = m.centroids.at(1, 0);
  CHECK(std::min(x0, x1) == doctest::Approx(0.0));
  CHECK(std::max(x0, x1) == doctest::Approx(10.0));
  CHECK(m.centroids.at(0, 1) == doctest::Approx(0.5));
  CHECK(m.centroids.at(1, 1) == doctest::Approx(0.5));
  CHECK(m.inertia == doctest::Approx(1.0));  // four points at distance 0.5 each
}

TEST_CASE("k equal to distinct points gives zero inertia") {
  auto pts = points2({{1, 1}, {2, 2}, {1, 1}, {3, 0}});
  Rng rng(2);
  ClusterModel m = kmeans_fit(pts, 3, rng);
  CHECK(m.inertia == doctest::Approx(0.0));
}

TEST_CASE("k = 1 gives the coordinate-wise mean") {
  auto pts = points2({{1, 2}, {3, 6}, {5, 10}});
  Rng rng(3);
  ClusterModel m = kmeans_fit(pts, 1, rng);
  CHECK(m.centroids.at(0, 0) == doctest::Approx(3.0));
  CHECK(m.centroids.at(0, 1) == doctest::Approx(6.0));
}

TEST_CASE("errors: too few points or too few distinct points") {
  Rng rng(4);
  CHECK_THROWS_AS(kmeans_fit(points2({{1, 1}}), 2, rng), Error);
  CHECK_THROWS_AS(kmeans_fit(points2({{1, 1}, {1, 1}, {1, 1}}), 2, rng), Error);
}

TEST_CASE("assignment: exact centroid, tie-break, dimension checks") {
  ClusterModel m;
  m.k = 4;
  m.centroids = Tensor::from({4, 2}, {0, 0, -1, 0, 5, 5, 1, 0});
  CHECK(assign_cluster(m, Tensor::vector({5, 5})) == 2);
  // equidistant to centroids 1 (-1,0) and 3 (1,0): lowest index wins
  CHECK(assign_cluster(m, Tensor::vector({0, 2})) == 0);  // nearest is centroid 0
  ClusterModel m2;
  m2.k = 4;
  m2.centroids = Tensor::from({4, 2}, {9, 9, -1, 0, 9, -9, 1, 0});
  CHECK(assign_cluster(m2, Tensor::vector({0, 0})) == 1);  // ties with 3, keeps 1
  CHECK_THROWS_AS(assign_cluster(m, Tensor::vector({1, 2, 3})), Error);
}

TEST_CASE("fit is deterministic for a fixed seed") {
  Rng data_rng(5);
  std::vector<Tensor> pts;
  for (int i = 0; i < 120; ++i)
    pts.push_back(Tensor::vector({data_rng.normal(), data_rng.normal(), data_rng.normal()}));
  Rng r1(77), r2(77);
  ClusterModel a = kmeans_fit(pts, 5, r1);
  ClusterModel b = kmeans_fit(pts, 5, r2);
  CHECK(a.centroids.data == b.centroids.data);
  CHECK(a.inertia == b.inertia);
}

TEST_CASE("every point is assigned to its nearest centroid; inertia is monotone") {
  Rng data_rng(6);
  std::vector<Tensor> pts;
  for (int i = 0; i < 200; ++i) {
    double cx = (i % 3) * 4.0;
    pts.push_back(Tensor::vector({cx + 0.3 * data_rng.normal(), 0.3 * data_rng.normal()}));
  }
  Rng rng(9);
  std::vector<std::vector<double>> traces;
  ClusterModel m = kmeans_fit(pts, 3, rng, 4, 50, &traces);

  // nearest-centroid consistency: recomputed inertia matches the reported one
  double inertia = 0.0;
  for (const Tensor& p : pts) {
    int c = assign_cluster(m, p);
    double d2 = 0.0;
    for (int64_t d = 0; d < 2; ++d) {
      double diff = p.data[static_cast<size_t>(d)] - m.centroids.at(c, d);
      d2 += diff * diff;
    }
    inertia += d2;
  }
  CHECK(inertia == doctest::Approx(m.inertia).epsilon(1e-9));

  REQUIRE(traces.size() == 4);
  for (const auto& trace : traces)
    for (size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] + 1e-9);
}

TEST_CASE("goal cluster identification is stable") {
  CpcConfig cfg;
  cfg.context_len = 2;
  cfg.predict_len = 2;
  cfg.embed_dim = 4;
  cfg.context_dim = 4;
  Rng rng(11);
  EncoderModel enc = EncoderModel::create(cfg, {3}, false, rng);

  Rng data_rng(12);
  std::vector<Tensor> embeddings;
  for (int i = 0; i < 50; ++i) {
    Tensor obs = Tensor::vector({data_rng.uniform(-1, 1), data_rng.uniform(-1, 1),
                                 data_rng.uniform(-1, 1)});
    embeddings.push_back(enc.encode(obs));
  }
  ClusterModel m = kmeans_fit(embeddings, 3, rng);
  Tensor goal_obs = Tensor::vector({0.5, -0.5, 0.0});
  identify_goal_cluster(m, enc, goal_obs);
  int first = m.goal_cluster;
  CHECK(first >= 0);
  CHECK(first < 3);
  identify_goal_cluster(m, enc, goal_obs);
  CHECK(m.goal_cluster == first);
  CHECK(m.goal_cluster == assign_cluster(m, enc.encode(goal_obs)));
}

TEST_CASE("cluster model save/load") {
  ClusterModel m;
  m.k = 2;
  m.centroids = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  m.inertia = 7.5;
  m.goal_cluster = 1;
  auto dir = std::filesystem::temp_directory_path() / "pshape_test_cluster";
  std::filesystem::create_directories(dir);
  m.save(dir / "c.pshape");
  ClusterModel r = ClusterModel::load(dir / "c.pshape");
  CHECK(r.k == 2);
  CHECK(r.inertia == 7.5);
  CHECK(r.goal_cluster == 1);
  CHECK(r.centroids.data == m.centroids.data);
}
