// Experiment pipeline driver: collect -> train-cpc -> cluster -> train-rl -> eval.
// Every stage reads one JSON config (--config), writes its artifact under the
// output root, and is byte-for-byte reproducible for a fixed config + seed.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <iostream>

#include "CLI11.hpp"
#include "pshape/clustering.hpp"
#include "pshape/config.hpp"
#include "pshape/csv.hpp"
#include "pshape/eval.hpp"
#include "pshape/pendulum.hpp"
#include "pshape/textures.hpp"

namespace {

using namespace pshape;

struct CliOptions {
  std::string config_path;
  std::string out_override;
  std::optional<uint64_t> seed_override;
  std::vector<uint64_t> seeds;  // parallel per-seed child jobs
  std::string experiment_override;
  bool verbose = false;
};

std::string resolve_out_dir(const ExperimentConfig& cfg, const CliOptions& opts) {
  if (!opts.out_override.empty()) return opts.out_override;
  if (!cfg.out_dir.empty()) return cfg.out_dir;
  if (const char* env = std::getenv("PSHAPE_OUT"); env && *env) return env;
  return "out";
}

ExperimentConfig load_config(const CliOptions& opts) {
  ExperimentConfig cfg = ExperimentConfig::load(opts.config_path);
  cfg.out_dir = resolve_out_dir(cfg, opts);
  if (opts.seed_override) cfg.seed = *opts.seed_override;
  return cfg;
}

void require_artifact(const std::filesystem::path& path, const std::string& producer) {
  check(std::filesystem::exists(path), "missing upstream artifact ", path.string(),
        " (run the \"", producer, "\" stage first)");
}

// ---- collect ----------------------------------------------------------------

int cmd_collect(const CliOptions& opts) {
  ExperimentConfig cfg = load_config(opts);
  const EnvConfig& env_cfg = cfg.env_required("collect");
  check(cfg.collect.has_value(), "collect: config is missing the \"collect\" block");

  // exploration episodes run to max_len, regardless of the RL horizon
  EnvConfig collect_env = env_cfg;
  collect_env.horizon = static_cast<int>(cfg.collect->max_len);
  std::unique_ptr<Env> env = make_env(collect_env);

  Rng rng(cfg.seed);
  TrajectorySet set =
      collect_random_trajectories(*env, collect_env, cfg.collect->count, cfg.collect->max_len, rng);
  std::filesystem::path path = cfg.trajectories_path();
  save_trajectories(path, set);

  int64_t min_len = set.items.front().length(), max_len = 0, total = 0;
  for (const auto& t : set.items) {
    min_len = std::min(min_len, t.length());
    max_len = std::max(max_len, t.length());
    total += t.length();
  }
  std::cout << "collected " << set.items.size() << " trajectories (length min " << min_len
            << " mean " << total / static_cast<int64_t>(set.items.size()) << " max " << max_len
            << ") -> " << path.string() << "\n";
  return 0;
}

// ---- train-cpc --------------------------------------------------------------

int cmd_train_cpc(const CliOptions& opts) {
  ExperimentConfig cfg = load_config(opts);
  check(cfg.cpc.has_value(), "train-cpc: config is missing the \"cpc\" block");
  std::filesystem::path traj_path = cfg.trajectories_path();
  require_artifact(traj_path, "collect");

  TrajectorySet set = load_trajectories(traj_path);
  Rng rng(cfg.seed);
  CpcTrainResult result = train_cpc(set, *cfg.cpc, rng, opts.verbose);

  std::filesystem::path path = cfg.encoder_path();
  result.model.save(path);

  std::filesystem::path loss_path = path;
  loss_path.replace_extension(".loss.csv");
  CsvWriter csv(loss_path, {"batch", "loss"});
  for (size_t i = 0; i < result.loss_history.size(); ++i) {
    double row[] = {static_cast<double>(i), result.loss_history[i]};
    csv.row(row);
  }
  csv.close();

  double first = result.loss_history.front(), last = result.loss_history.back();
  std::cout << "trained cpc encoder: " << result.loss_history.size() << " batches, loss "
            << format_double(first) << " -> " << format_double(last) << " -> " << path.string()
            << "\n";
  if (result.skipped_short > 0)
    std::cout << "warning: skipped " << result.skipped_short
              << " trajectories shorter than context+predict\n";
  return 0;
}

// ---- cluster ----------------------------------------------------------------

int cmd_cluster(const CliOptions& opts) {
  ExperimentConfig cfg = load_config(opts);
  const EnvConfig& env_cfg = cfg.env_required("cluster");
  check(cfg.cluster.has_value(), "cluster: config is missing the \"cluster\" block");
  std::filesystem::path traj_path = cfg.trajectories_path();
  std::filesystem::path enc_path = cfg.encoder_path();
  require_artifact(traj_path, "collect");
  require_artifact(enc_path, "train-cpc");

  TrajectorySet set = load_trajectories(traj_path);
  EncoderModel encoder = EncoderModel::load(enc_path);

  Rng rng(cfg.seed);
  std::vector<Tensor> states = sample_states(set, cfg.cluster->samples, rng);
  std::vector<Tensor> embeddings;
  embeddings.reserve(states.size());
  for (const Tensor& s : states) embeddings.push_back(encoder.encode(s));

  ClusterModel model = kmeans_fit(embeddings, cfg.cluster->k, rng, cfg.cluster->restarts,
                                  cfg.cluster->max_iters);
  std::unique_ptr<Env> env = make_env(env_cfg);
  Rng goal_rng(0);
  env->reset(goal_rng);
  identify_goal_cluster(model, encoder, env->goal_observation());

  std::filesystem::path path = cfg.clusters_path();
  model.save(path);
  std::cout << "fitted k=" << model.k << " clusters (inertia " << format_double(model.inertia)
            << ", goal cluster " << model.goal_cluster << ") -> " << path.string() << "\n";
  return 0;
}

// ---- train-rl ---------------------------------------------------------------

int run_train_rl_single(const ExperimentConfig& cfg, bool verbose) {
  const EnvConfig& env_cfg = cfg.env_required("train-rl");
  check(cfg.ppo.has_value(), "train-rl: config is missing the \"ppo\" block");
  check(cfg.scheme.has_value(), "train-rl: config is missing the \"scheme\" block");
  const SchemeConfig& scheme = *cfg.scheme;

  // load only what the scheme / feature mode needs
  std::optional<TrajectorySet> trajectories;
  std::optional<EncoderModel> encoder;
  std::optional<ClusterModel> clusters;
  bool needs_encoder = cfg.ppo->features == "embedding" ||
                       scheme.variant == SchemeVariant::EmbeddingDistance ||
                       scheme.variant == SchemeVariant::ClusterBonus;
  bool needs_calibration = scheme.beta == 0.0 &&
                           (scheme.variant == SchemeVariant::RawDistance ||
                            scheme.variant == SchemeVariant::EmbeddingDistance);
  if (needs_encoder) {
    require_artifact(cfg.encoder_path(), "train-cpc");
    encoder = EncoderModel::load(cfg.encoder_path());
  }
  if (scheme.variant == SchemeVariant::ClusterBonus) {
    require_artifact(cfg.clusters_path(), "cluster");
    clusters = ClusterModel::load(cfg.clusters_path());
  }
  if (needs_calibration) {
    require_artifact(cfg.trajectories_path(), "collect");
    trajectories = load_trajectories(cfg.trajectories_path());
  }

  std::string sname = scheme_name(scheme.variant);
  if (scheme.variant == SchemeVariant::ClusterBonus && scheme.two_policy) {
    TwoStepPolicy pair = train_two_step_cluster_policy(env_cfg, scheme, *encoder, *clusters,
                                                       *cfg.ppo, cfg.seed, verbose);
    std::filesystem::path base = cfg.policy_path(sname + "-two-step", cfg.seed);
    std::filesystem::path cluster_path = base, goal_path = base, curve_path = base;
    cluster_path.replace_extension(".to-cluster.pshape");
    goal_path.replace_extension(".to-goal.pshape");
    curve_path.replace_extension(".curve.csv");
    pair.to_cluster.save(cluster_path);
    pair.to_goal.save(goal_path);
    pair.curve.to_csv(curve_path);
    Rng eval_rng(mix64(cfg.seed ^ 0xf17a1e4a1ULL));
    double success = two_step_success_rate(pair, env_cfg, *encoder, *clusters, 100, eval_rng);
    std::cout << "trained two-step cluster policy (success " << format_double(success)
              << ") -> " << cluster_path.string() << ", " << goal_path.string() << "\n";
    return 0;
  }

  std::unique_ptr<RewardShaper> shaper =
      make_shaper(scheme, env_cfg, encoder ? &*encoder : nullptr,
                  clusters ? &*clusters : nullptr, trajectories ? &*trajectories : nullptr);
  TrainPolicyResult result = train_policy(env_cfg, *shaper, *cfg.ppo, cfg.seed,
                                          encoder ? &*encoder : nullptr, verbose);

  std::filesystem::path policy_path = cfg.policy_path(sname, cfg.seed);
  result.policy.save(policy_path);
  std::filesystem::path curve_path = policy_path;
  curve_path.replace_extension(".curve.csv");
  result.curve.to_csv(curve_path);

  double final_success =
      result.curve.points.empty() ? 0.0 : result.curve.points.back().success_rate;
  std::cout << "trained policy (" << sname << ", seed " << cfg.seed << ", final success "
            << format_double(final_success) << ") -> " << policy_path.string() << "\n";
  return 0;
}

int spawn_seed_children(const CliOptions& opts, const std::string& subcommand);

int cmd_train_rl(const CliOptions& opts) {
  if (opts.seeds.size() > 1) return spawn_seed_children(opts, "train-rl");
  ExperimentConfig cfg = load_config(opts);
  if (opts.seeds.size() == 1) cfg.seed = opts.seeds[0];
  return run_train_rl_single(cfg, opts.verbose);
}

// ---- eval -------------------------------------------------------------------

int cmd_eval(const CliOptions& opts) {
  ExperimentConfig cfg = load_config(opts);
  const EnvConfig& env_cfg = cfg.env_required("eval");
  check(cfg.eval.has_value(), "eval: config is missing the \"eval\" block");
  EvalStageConfig ev = *cfg.eval;
  if (!opts.experiment_override.empty()) ev.experiment = opts.experiment_override;
  std::filesystem::path out_dir = cfg.out_dir;
  std::filesystem::create_directories(out_dir);
  std::string tag = env_tag(env_cfg);

  if (ev.experiment == "distance-correlation") {
    check(env_cfg.id == "gridworld", "distance-correlation runs on gridworld only");
    require_artifact(cfg.encoder_path(), "train-cpc");
    EncoderModel encoder = EncoderModel::load(cfg.encoder_path());
    Rng rng(cfg.seed);
    CorrelationReport rep = distance_correlation(GridLayout::builtin(env_cfg.layout), encoder,
                                                 ev.pairs, rng);
    std::string base = tag + "_distance-correlation_" + std::to_string(cfg.seed);
    rep.to_csv(out_dir / (base + ".csv"));
    write_json_file(out_dir / (base + ".json"), rep.summary());
    std::cout << "distance correlation: r = " << format_double(rep.r) << " over "
              << rep.pair_count << " pairs -> " << (out_dir / (base + ".csv")).string() << "\n";
    return 0;
  }

  if (ev.experiment == "success-rate") {
    check(cfg.scheme.has_value(), "eval success-rate: config needs a \"scheme\" block to locate the policy");
    std::string sname = scheme_name(cfg.scheme->variant);
    std::filesystem::path policy_path = cfg.policy_path(sname, cfg.seed);
    require_artifact(policy_path, "train-rl");
    PolicyModel policy = PolicyModel::load(policy_path);
    std::optional<EncoderModel> encoder;
    if (policy.features == "embedding") {
      require_artifact(cfg.encoder_path(), "train-cpc");
      encoder = EncoderModel::load(cfg.encoder_path());
    }
    Rng rng(mix64(cfg.seed ^ 0xf17a1e4a1ULL));
    double rate = success_rate(policy, env_cfg, ev.episodes, rng, encoder ? &*encoder : nullptr);
    std::string base = tag + "_success-rate-" + sname + "_" + std::to_string(cfg.seed);
    write_json_file(out_dir / (base + ".json"),
                    Json{{"scheme", sname}, {"episodes", ev.episodes}, {"success_rate", rate}});
    std::cout << "success rate (" << sname << "): " << format_double(rate) << " over "
              << ev.episodes << " episodes\n";
    return 0;
  }

  if (ev.experiment == "compare-schemes") {
    check(!cfg.schemes.empty(), "eval compare-schemes: config needs a \"schemes\" list");
    check(cfg.ppo.has_value(), "eval compare-schemes: config needs a \"ppo\" block");

    std::optional<TrajectorySet> trajectories;
    std::optional<EncoderModel> encoder;
    std::optional<ClusterModel> clusters;
    bool needs_encoder = cfg.ppo->features == "embedding";
    bool needs_clusters = false, needs_calibration = false;
    for (const SchemeConfig& s : cfg.schemes) {
      needs_encoder = needs_encoder || s.variant == SchemeVariant::EmbeddingDistance ||
                      s.variant == SchemeVariant::ClusterBonus;
      needs_clusters = needs_clusters || s.variant == SchemeVariant::ClusterBonus;
      needs_calibration = needs_calibration ||
                          (s.beta == 0.0 && (s.variant == SchemeVariant::RawDistance ||
                                             s.variant == SchemeVariant::EmbeddingDistance));
    }
    if (needs_encoder) {
      require_artifact(cfg.encoder_path(), "train-cpc");
      encoder = EncoderModel::load(cfg.encoder_path());
    }
    if (needs_clusters) {
      require_artifact(cfg.clusters_path(), "cluster");
      clusters = ClusterModel::load(cfg.clusters_path());
    }
    if (needs_calibration) {
      require_artifact(cfg.trajectories_path(), "collect");
      trajectories = load_trajectories(cfg.trajectories_path());
    }
    ExperimentContext ctx;
    ctx.trajectories = trajectories ? &*trajectories : nullptr;
    ctx.encoder = encoder ? &*encoder : nullptr;
    ctx.clusters = clusters ? &*clusters : nullptr;

    CompareResult result = compare_schemes(env_cfg, cfg.schemes, cfg.effective_seeds(), *cfg.ppo,
                                           ctx, ev.episodes, out_dir, "compare", opts.verbose);
    std::cout << "compare-schemes summary:\n";
    for (const auto& [scheme, success] : result.mean_final_success)
      std::cout << "  " << scheme << ": final success " << format_double(success)
                << " (steps to 0.5: " << result.steps_to_half_success.at(scheme) << ")\n";
    return 0;
  }

  if (ev.experiment == "texture-generalization") {
    require_artifact(cfg.encoder_path(), "train-cpc");
    EncoderModel encoder = EncoderModel::load(cfg.encoder_path());
    check(encoder.kind == EncoderKind::Conv,
          "texture-generalization requires a conv encoder trained on image observations");
    Rng rng(cfg.seed);
    std::vector<double> thetas;
    thetas.reserve(static_cast<size_t>(ev.texture_states));
    for (int64_t i = 0; i < ev.texture_states; ++i)
      thetas.push_back(rng.uniform(-std::numbers::pi, std::numbers::pi));
    TextureReport rep = texture_generalization(encoder, ev.texture_train, ev.texture_holdout,
                                               thetas, ev.texture_k, rng);
    std::string base = tag + "_texture-" + ev.texture_train.tag + "-vs-" +
                       ev.texture_holdout.tag + "_" + std::to_string(cfg.seed);
    write_json_file(out_dir / (base + ".json"), rep.summary());
    std::cout << "texture generalization: agreement " << format_double(rep.agreement)
              << ", angle NMI " << format_double(rep.nmi_train) << " (train) vs "
              << format_double(rep.nmi_holdout) << " (holdout)\n";
    return 0;
  }

  // cluster-viz
  require_artifact(cfg.trajectories_path(), "collect");
  require_artifact(cfg.encoder_path(), "train-cpc");
  require_artifact(cfg.clusters_path(), "cluster");
  TrajectorySet set = load_trajectories(cfg.trajectories_path());
  EncoderModel encoder = EncoderModel::load(cfg.encoder_path());
  ClusterModel clusters = ClusterModel::load(cfg.clusters_path());

  Rng rng(cfg.seed);
  std::vector<Tensor> states = sample_states(set, ev.viz_samples, rng);
  std::vector<Tensor> embeddings;
  std::vector<int> labels;
  std::vector<std::vector<double>> coords;
  std::vector<std::string> coord_names;
  if (env_cfg.id == "gridworld")
    coord_names = {"row", "col"};
  else if (env_cfg.id == "pendulum")
    coord_names = {"theta", "omega"};
  else
    coord_names = {"theta1", "theta2"};
  for (const Tensor& s : states) {
    embeddings.push_back(encoder.encode(s));
    labels.push_back(assign_cluster(clusters, embeddings.back()));
    if (env_cfg.id == "gridworld") {
      // agent layer is channel 2 of (H, W, 3)
      int h = static_cast<int>(s.shape[0]), w = static_cast<int>(s.shape[1]);
      double row = 0, col = 0;
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
          if (s.data[static_cast<size_t>((r * w + c) * 3 + 2)] > 0.5) {
            row = r;
            col = c;
          }
      coords.push_back({row, col});
    } else if (env_cfg.id == "pendulum") {
      coords.push_back({std::atan2(s.data[1], s.data[0]), s.data[2]});
    } else {
      coords.push_back({std::atan2(s.data[1], s.data[0]), std::atan2(s.data[3], s.data[2])});
    }
  }
  std::vector<std::array<double, 2>> proj = pca_2d(embeddings);
  std::filesystem::path path = out_dir / (tag + "_cluster-viz_" + std::to_string(cfg.seed) + ".csv");
  export_cluster_csv(path, coord_names, coords, labels, proj);
  std::cout << "cluster visualization (" << states.size() << " states) -> " << path.string()
            << "\n";
  return 0;
}

// ---- seed fan-out -----------------------------------------------------------

extern char** environ;
std::string g_self;

int spawn_seed_children(const CliOptions& opts, const std::string& subcommand) {
  std::vector<pid_t> pids;
  for (uint64_t seed : opts.seeds) {
    pid_t pid = fork();
    check(pid >= 0, "fork failed");
    if (pid == 0) {
      std::vector<std::string> args = {g_self, subcommand, "--config", opts.config_path,
                                       "--seed", std::to_string(seed)};
      if (!opts.out_override.empty()) {
        args.push_back("--out");
        args.push_back(opts.out_override);
      }
      if (opts.verbose) args.push_back("--verbose");
      std::vector<char*> argv;
      for (auto& a : args) argv.push_back(a.data());
      argv.push_back(nullptr);
      execve(g_self.c_str(), argv.data(), environ);
      std::cerr << "execve failed\n";
      _exit(127);
    }
    pids.push_back(pid);
  }
  int rc = 0;
  for (pid_t pid : pids) {
    int status = 0;
    waitpid(pid, &status, 0);
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) rc = 1;
  }
  return rc;
}

constexpr const char* kConfigKeysCollect =
    "config keys: version, seed, out_dir, env.{id,layout,horizon,observation,textures,"
    "texture_seed}, collect.{count,max_len}, artifacts.trajectories";
constexpr const char* kConfigKeysTrainCpc =
    "config keys: version, seed, out_dir, cpc.{context_len,predict_len,batch,epochs,lr,"
    "embed_dim,context_dim,negatives,encoder}, artifacts.{trajectories,encoder}";
constexpr const char* kConfigKeysCluster =
    "config keys: version, seed, out_dir, env.*, cluster.{k,samples,restarts,max_iters}, "
    "artifacts.{trajectories,encoder,clusters}";
constexpr const char* kConfigKeysTrainRl =
    "config keys: version, seed, out_dir, env.*, scheme.{variant,beta,target_mean_penalty,"
    "bonus,two_policy}, ppo.{gamma,entropy_coef,lr,clip,max_grad_norm,minibatch,gae_lambda,"
    "rollout,epochs,total_steps,features,eval_episodes}, artifacts.*";
constexpr const char* kConfigKeysEval =
    "config keys: version, seed, seeds, out_dir, env.*, eval.{experiment,pairs,episodes,"
    "texture_states,texture_k,texture_train,texture_holdout,viz_samples}, schemes, ppo.*, "
    "scheme.*, artifacts.*";

}  // namespace

int main(int argc, char** argv) {
  g_self = argv[0];
  CLI::App app{"predictive-coding reward shaping pipeline"};
  app.require_subcommand(1);

  CliOptions opts;
  std::string stage;

  auto add_common = [&](CLI::App* sub, const char* keys) {
    sub->add_option("--config", opts.config_path, "experiment config (JSON)")->required();
    sub->add_option("--out", opts.out_override, "output root (overrides config and PSHAPE_OUT)");
    sub->add_option("--seed", opts.seed_override, "seed override");
    sub->add_flag("--verbose", opts.verbose, "progress logging to stderr");
    sub->footer(keys);
  };

  add_common(app.add_subcommand("collect", "collect random-exploration trajectories"),
             kConfigKeysCollect);
  add_common(app.add_subcommand("train-cpc", "train the predictive encoder"), kConfigKeysTrainCpc);
  add_common(app.add_subcommand("cluster", "k-means over stored-state embeddings"),
             kConfigKeysCluster);
  CLI::App* train_rl = app.add_subcommand("train-rl", "PPO with a reward scheme");
  add_common(train_rl, kConfigKeysTrainRl);
  train_rl->add_option("--seeds", opts.seeds, "run these seeds as parallel child jobs");
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluation experiments");
  add_common(eval_cmd, kConfigKeysEval);
  eval_cmd->add_option("--experiment", opts.experiment_override,
                       "distance-correlation | success-rate | compare-schemes | "
                       "texture-generalization | cluster-viz");

  CLI11_PARSE(app, argc, argv);
  stage = app.get_subcommands().front()->get_name();

  try {
    if (stage == "collect") return cmd_collect(opts);
    if (stage == "train-cpc") return cmd_train_cpc(opts);
    if (stage == "cluster") return cmd_cluster(opts);
    if (stage == "train-rl") return cmd_train_rl(opts);
    if (stage == "eval") return cmd_eval(opts);
    fail("unknown subcommand ", stage);
  } catch (const std::exception& e) {
    Json err{{"error", e.what()}, {"stage", stage}};
    std::cout << err.dump() << "\n";
    return 1;
  }
}
