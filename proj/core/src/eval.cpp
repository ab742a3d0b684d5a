#include "pshape/eval.hpp"

#include <cmath>
#include <iostream>
#include <numbers>

#include "pshape/csv.hpp"
#include "pshape/linalg.hpp"
#include "pshape/textures.hpp"

namespace pshape {

double pearson(std::span<const double> xs, std::span<const double> ys) {
  check(xs.size() == ys.size(), "pearson: length mismatch (", xs.size(), " vs ", ys.size(), ")");
  size_t n = xs.size();
  check(n >= 2, "pearson: need at least 2 samples");
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double dx = xs[i] - mx, dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  check(sxx > 0.0 && syy > 0.0, "pearson: zero variance input");
  return sxy / std::sqrt(sxx * syy);
}

LinearFit least_squares(std::span<const double> xs, std::span<const double> ys) {
  check(xs.size() == ys.size() && xs.size() >= 2, "least_squares: bad input lengths");
  size_t n = xs.size();
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  check(sxx > 0.0, "least_squares: zero variance in x");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  return f;
}

void CorrelationReport::to_csv(const std::filesystem::path& path) const {
  CsvWriter csv(path, {"true_distance", "embedding_distance"});
  for (size_t i = 0; i < true_distances.size(); ++i) {
    double row[] = {true_distances[i], embedding_distances[i]};
    csv.row(row);
  }
  csv.close();
}

Json CorrelationReport::summary() const {
  return Json{{"pair_count", pair_count}, {"pearson_r", r}, {"slope", slope},
              {"intercept", intercept}};
}

CorrelationReport distance_correlation(const GridLayout& layout, const EncoderModel& encoder,
                                       int64_t pair_count, Rng& rng) {
  check(pair_count >= 2, "distance_correlation: need at least 2 pairs");
  const auto& free = layout.free_cells();
  GridWorldEnv env(layout);

  // embed every free cell once
  int64_t n = static_cast<int64_t>(free.size());
  int64_t obs_size = layout.height() * layout.width() * 3;
  Tensor stacked = Tensor::zeros({n, obs_size});
  for (int64_t i = 0; i < n; ++i) {
    Tensor obs = env.observation_at(free[static_cast<size_t>(i)]);
    std::copy(obs.data.begin(), obs.data.end(), stacked.data.begin() + i * obs_size);
  }
  Tensor z = encoder.encode_batch(stacked);  // [n, embed]

  CorrelationReport rep;
  rep.pair_count = pair_count;
  rep.true_distances.reserve(static_cast<size_t>(pair_count));
  rep.embedding_distances.reserve(static_cast<size_t>(pair_count));
  int64_t dim = z.cols();
  for (int64_t p = 0; p < pair_count; ++p) {
    int64_t i = rng.uniform_index(n);
    int64_t j = rng.uniform_index(n);
    rep.true_distances.push_back(
        static_cast<double>(true_distance(layout, free[static_cast<size_t>(i)], free[static_cast<size_t>(j)])));
    double d2 = 0.0;
    for (int64_t d = 0; d < dim; ++d) {
      double diff = z.at(i, d) - z.at(j, d);
      d2 += diff * diff;
    }
    rep.embedding_distances.push_back(std::sqrt(d2));
  }
  rep.r = pearson(rep.true_distances, rep.embedding_distances);
  LinearFit fit = least_squares(rep.true_distances, rep.embedding_distances);
  rep.slope = fit.slope;
  rep.intercept = fit.intercept;
  return rep;
}

double success_rate(const PolicyModel& policy, const EnvConfig& env_cfg, int64_t episodes,
                    Rng& rng, const EncoderModel* feature_encoder) {
  check(episodes >= 1, "success_rate: episodes must be >= 1");
  const EncoderModel* enc = policy.features == "embedding" ? feature_encoder : nullptr;
  if (policy.features == "embedding")
    check(enc != nullptr, "success_rate: policy uses embedding features, encoder required");
  std::unique_ptr<Env> env = make_env(env_cfg);
  int64_t wins = 0;
  for (int64_t e = 0; e < episodes; ++e) {
    Tensor obs = env->reset(rng);
    bool success = false;
    while (true) {
      PolicyStep s = policy_step(policy, policy_features(obs, enc), rng, true);
      StepResult r = env->step(s.action);
      success = success || r.reached_goal;
      obs = std::move(r.obs);
      if (r.done) break;
    }
    if (success) ++wins;
  }
  return static_cast<double>(wins) / static_cast<double>(episodes);
}

double normalized_mutual_information(const std::vector<int>& a, const std::vector<int>& b) {
  check(a.size() == b.size() && !a.empty(), "nmi: label vectors must match and be nonempty");
  int ka = 0, kb = 0;
  for (int v : a) ka = std::max(ka, v + 1);
  for (int v : b) kb = std::max(kb, v + 1);
  std::vector<double> pa(static_cast<size_t>(ka), 0.0), pb(static_cast<size_t>(kb), 0.0);
  std::vector<double> pj(static_cast<size_t>(ka * kb), 0.0);
  double inv = 1.0 / static_cast<double>(a.size());
  for (size_t i = 0; i < a.size(); ++i) {
    pa[static_cast<size_t>(a[i])] += inv;
    pb[static_cast<size_t>(b[i])] += inv;
    pj[static_cast<size_t>(a[i] * kb + b[i])] += inv;
  }
  double ha = 0.0, hb = 0.0, mi = 0.0;
  for (double p : pa)
    if (p > 0.0) ha -= p * std::log(p);
  for (double p : pb)
    if (p > 0.0) hb -= p * std::log(p);
  for (int i = 0; i < ka; ++i)
    for (int j = 0; j < kb; ++j) {
      double p = pj[static_cast<size_t>(i * kb + j)];
      if (p > 0.0) mi += p * std::log(p / (pa[static_cast<size_t>(i)] * pb[static_cast<size_t>(j)]));
    }
  if (ha + hb <= 0.0) return 0.0;
  return 2.0 * mi / (ha + hb);
}

Json TextureReport::summary() const {
  return Json{{"agreement", agreement},
              {"nmi_train", nmi_train},
              {"nmi_holdout", nmi_holdout},
              {"degenerate", degenerate},
              {"k", k},
              {"state_count", state_count}};
}

TextureReport texture_generalization(const EncoderModel& encoder, const TextureSpec& train_tex,
                                     const TextureSpec& holdout_tex,
                                     const std::vector<double>& thetas, int64_t k, Rng& rng) {
  check(static_cast<int64_t>(thetas.size()) >= k, "texture_generalization: need at least k states");
  int64_t n = static_cast<int64_t>(thetas.size());

  std::vector<Tensor> z_train, z_holdout;
  z_train.reserve(static_cast<size_t>(n));
  z_holdout.reserve(static_cast<size_t>(n));
  for (double theta : thetas) {
    z_train.push_back(encoder.encode(render_pendulum_image(theta, train_tex)));
    z_holdout.push_back(encoder.encode(render_pendulum_image(theta, holdout_tex)));
  }

  TextureReport rep;
  rep.k = k;
  rep.state_count = n;

  // degenerate when the training embeddings have (numerically) no spread
  int64_t dim = z_train[0].size();
  std::vector<double> mean(static_cast<size_t>(dim), 0.0);
  for (const Tensor& z : z_train)
    for (int64_t d = 0; d < dim; ++d) mean[static_cast<size_t>(d)] += z.data[static_cast<size_t>(d)];
  for (double& m : mean) m /= static_cast<double>(n);
  double var = 0.0;
  for (const Tensor& z : z_train)
    for (int64_t d = 0; d < dim; ++d) {
      double diff = z.data[static_cast<size_t>(d)] - mean[static_cast<size_t>(d)];
      var += diff * diff;
    }
  rep.degenerate = var / static_cast<double>(n) < 1e-6;

  ClusterModel clusters = kmeans_fit(z_train, k, rng);
  std::vector<int> labels_train(static_cast<size_t>(n)), labels_holdout(static_cast<size_t>(n));
  std::vector<int> bins(static_cast<size_t>(n));
  int64_t same = 0;
  for (int64_t i = 0; i < n; ++i) {
    labels_train[static_cast<size_t>(i)] = assign_cluster(clusters, z_train[static_cast<size_t>(i)]);
    labels_holdout[static_cast<size_t>(i)] = assign_cluster(clusters, z_holdout[static_cast<size_t>(i)]);
    if (labels_train[static_cast<size_t>(i)] == labels_holdout[static_cast<size_t>(i)]) ++same;
    double a = wrap_angle(thetas[static_cast<size_t>(i)]) + std::numbers::pi;  // [0, 2pi)
    int bin = static_cast<int>(a / (2.0 * std::numbers::pi / 8.0));
    bins[static_cast<size_t>(i)] = std::clamp(bin, 0, 7);
  }
  rep.agreement = static_cast<double>(same) / static_cast<double>(n);
  rep.nmi_train = normalized_mutual_information(labels_train, bins);
  rep.nmi_holdout = normalized_mutual_information(labels_holdout, bins);
  return rep;
}

std::vector<std::array<double, 2>> pca_2d(const std::vector<Tensor>& points) {
  check(points.size() >= 2, "pca_2d: need at least 2 points");
  int64_t n = static_cast<int64_t>(points.size());
  int64_t dim = points[0].size();
  MatrixRM x(n, dim);
  for (int64_t i = 0; i < n; ++i) {
    check(points[static_cast<size_t>(i)].size() == dim, "pca_2d: inconsistent dimensions");
    for (int64_t d = 0; d < dim; ++d) x(i, d) = points[static_cast<size_t>(i)].data[static_cast<size_t>(d)];
  }
  Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  check(es.info() == Eigen::Success, "pca_2d: eigendecomposition failed");

  std::vector<std::array<double, 2>> out(static_cast<size_t>(n));
  for (int c = 0; c < 2; ++c) {
    int64_t col = dim - 1 - c;  // eigenvalues ascend
    if (col < 0) {
      for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)][static_cast<size_t>(c)] = 0.0;
      continue;
    }
    Eigen::VectorXd v = es.eigenvectors().col(col);
    // deterministic sign: largest-magnitude coefficient positive
    int64_t arg = 0;
    for (int64_t d = 1; d < dim; ++d)
      if (std::abs(v(d)) > std::abs(v(arg))) arg = d;
    if (v(arg) < 0) v = -v;
    Eigen::VectorXd proj = x * v;
    for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)][static_cast<size_t>(c)] = proj(i);
  }
  return out;
}

void export_cluster_csv(const std::filesystem::path& path,
                        const std::vector<std::string>& coord_names,
                        const std::vector<std::vector<double>>& coords,
                        const std::vector<int>& labels,
                        const std::vector<std::array<double, 2>>& projections) {
  check(coords.size() == labels.size() && coords.size() == projections.size(),
        "export_cluster_csv: length mismatch");
  std::vector<std::string> cols = coord_names;
  cols.insert(cols.end(), {"cluster", "pc1", "pc2"});
  CsvWriter csv(path, cols);
  std::vector<double> row;
  for (size_t i = 0; i < coords.size(); ++i) {
    row = coords[i];
    row.push_back(static_cast<double>(labels[i]));
    row.push_back(projections[i][0]);
    row.push_back(projections[i][1]);
    csv.row(row);
  }
  csv.close();
}

std::string env_tag(const EnvConfig& cfg) {
  std::string tag = cfg.id;
  if (cfg.id == "gridworld") tag += "-" + cfg.layout;
  if (cfg.observation == "image") tag += "-image";
  return tag;
}

Json CompareResult::summary() const {
  Json per_run = Json::array();
  for (const SchemeRun& r : runs) {
    Json j;
    j["scheme"] = r.scheme;
    j["seed"] = r.seed;
    j["final_success"] = r.final_success;
    if (!r.curve.points.empty()) {
      j["final_mean_env_return"] = r.curve.points.back().mean_env_return;
      j["env_steps"] = r.curve.points.back().env_steps;
    }
    per_run.push_back(std::move(j));
  }
  Json means = Json::object();
  for (const auto& [k, v] : mean_final_success) means[k] = v;
  Json half = Json::object();
  for (const auto& [k, v] : steps_to_half_success) half[k] = v;
  return Json{{"runs", std::move(per_run)},
              {"mean_final_success", std::move(means)},
              {"steps_to_half_success", std::move(half)}};
}

CompareResult compare_schemes(const EnvConfig& env_cfg, const std::vector<SchemeConfig>& schemes,
                              const std::vector<uint64_t>& seeds, const PpoConfig& ppo,
                              const ExperimentContext& ctx, int64_t final_episodes,
                              const std::filesystem::path& out_dir,
                              const std::string& experiment_name, bool verbose) {
  check(!schemes.empty() && !seeds.empty(), "compare_schemes: need schemes and seeds");
  CompareResult result;
  result.runs.reserve(schemes.size() * seeds.size());

  for (const SchemeConfig& scheme : schemes) {
    std::string sname = scheme_name(scheme.variant);
    std::vector<const LearningCurve*> curves;
    double success_sum = 0.0;
    for (uint64_t seed : seeds) {
      if (verbose)
        std::cerr << "compare_schemes: " << sname << " seed " << seed << "\n";
      SchemeRun run;
      run.scheme = sname;
      run.seed = seed;
      if (scheme.variant == SchemeVariant::ClusterBonus && scheme.two_policy) {
        check(ctx.encoder && ctx.clusters, "two-policy mode requires encoder and clusters");
        TwoStepPolicy pair = train_two_step_cluster_policy(env_cfg, scheme, *ctx.encoder,
                                                           *ctx.clusters, ppo, seed, verbose);
        Rng eval_rng(mix64(seed ^ 0xf17a1e4a1ULL));
        run.final_success = two_step_success_rate(pair, env_cfg, *ctx.encoder, *ctx.clusters,
                                                  final_episodes, eval_rng);
        run.curve = std::move(pair.curve);
      } else {
        std::unique_ptr<RewardShaper> shaper =
            make_shaper(scheme, env_cfg, ctx.encoder, ctx.clusters, ctx.trajectories);
        TrainPolicyResult tr = train_policy(env_cfg, *shaper, ppo, seed,
                                            ctx.encoder, verbose);
        Rng eval_rng(mix64(seed ^ 0xf17a1e4a1ULL));
        run.final_success =
            success_rate(tr.policy, env_cfg, final_episodes, eval_rng, ctx.encoder);
        run.curve = std::move(tr.curve);
      }
      if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        std::string fname = env_tag(env_cfg) + "_" + experiment_name + "-" + sname + "_" +
                            std::to_string(seed) + ".csv";
        run.curve.to_csv(out_dir / fname);
      }
      success_sum += run.final_success;
      result.runs.push_back(std::move(run));
      curves.push_back(&result.runs.back().curve);
    }
    result.mean_final_success[sname] = success_sum / static_cast<double>(seeds.size());

    // seed-mean curve; first step at which mean success reaches 0.5
    int64_t half = -1;
    if (!curves.empty() && !curves.front()->points.empty()) {
      size_t npts = curves.front()->points.size();
      for (size_t p = 0; p < npts && half < 0; ++p) {
        double s = 0.0;
        for (const LearningCurve* c : curves)
          s += p < c->points.size() ? c->points[p].success_rate : 0.0;
        s /= static_cast<double>(curves.size());
        if (s >= 0.5) half = curves.front()->points[p].env_steps;
      }
    }
    result.steps_to_half_success[sname] = half;
  }

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_json_file(out_dir / (env_tag(env_cfg) + "_" + experiment_name + "_summary.json"),
                    result.summary());
  }
  return result;
}

}  // namespace pshape
