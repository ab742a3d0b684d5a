#include "pshape/config.hpp"

#include "pshape/eval.hpp"

namespace pshape {

CollectConfig CollectConfig::from_json(const Json& j) {
  reject_unknown_keys(j, {"count", "max_len"}, "collect");
  CollectConfig c;
  c.count = require_field(j, "count", "collect").get<int64_t>();
  c.max_len = require_field(j, "max_len", "collect").get<int64_t>();
  check(c.count >= 1, "collect: count must be >= 1");
  check(c.max_len >= 1, "collect: max_len must be >= 1");
  return c;
}

ClusterStageConfig ClusterStageConfig::from_json(const Json& j) {
  reject_unknown_keys(j, {"k", "samples", "restarts", "max_iters"}, "cluster");
  ClusterStageConfig c;
  c.k = field_or<int64_t>(j, "k", c.k);
  c.samples = field_or<int64_t>(j, "samples", c.samples);
  c.restarts = field_or<int>(j, "restarts", c.restarts);
  c.max_iters = field_or<int>(j, "max_iters", c.max_iters);
  check(c.k >= 1 && c.samples >= c.k, "cluster: need samples >= k >= 1");
  return c;
}

EvalStageConfig EvalStageConfig::from_json(const Json& j) {
  reject_unknown_keys(j,
                      {"experiment", "pairs", "episodes", "texture_states", "texture_k",
                       "texture_train", "texture_holdout", "viz_samples"},
                      "eval");
  EvalStageConfig c;
  c.experiment = require_field(j, "experiment", "eval").get<std::string>();
  const std::vector<std::string> known = {"distance-correlation", "success-rate",
                                          "compare-schemes", "texture-generalization",
                                          "cluster-viz"};
  bool ok = false;
  for (const auto& k : known) ok = ok || k == c.experiment;
  check(ok, "eval: unknown experiment \"", c.experiment, "\"");
  c.pairs = field_or<int64_t>(j, "pairs", c.pairs);
  c.episodes = field_or<int64_t>(j, "episodes", c.episodes);
  c.texture_states = field_or<int64_t>(j, "texture_states", c.texture_states);
  c.texture_k = field_or<int64_t>(j, "texture_k", c.texture_k);
  if (j.contains("texture_train")) c.texture_train = TextureSpec::from_json(j.at("texture_train"));
  if (j.contains("texture_holdout"))
    c.texture_holdout = TextureSpec::from_json(j.at("texture_holdout"));
  c.viz_samples = field_or<int64_t>(j, "viz_samples", c.viz_samples);
  return c;
}

ExperimentConfig ExperimentConfig::from_json(const Json& j) {
  reject_unknown_keys(j,
                      {"version", "seed", "seeds", "out_dir", "env", "collect", "cpc", "cluster",
                       "scheme", "schemes", "ppo", "eval", "artifacts"},
                      "config");
  ExperimentConfig c;
  c.version = require_field(j, "version", "config").get<int>();
  check(c.version == 1, "config: unsupported version ", c.version, " (expected 1)");
  c.seed = field_or<uint64_t>(j, "seed", 0);
  c.seeds = field_or<std::vector<uint64_t>>(j, "seeds", {});
  c.out_dir = field_or<std::string>(j, "out_dir", "");

  if (j.contains("env")) c.env = EnvConfig::from_json(j.at("env"));
  if (j.contains("collect")) c.collect = CollectConfig::from_json(j.at("collect"));
  if (j.contains("cpc")) c.cpc = CpcConfig::from_json(j.at("cpc"));
  if (j.contains("cluster")) c.cluster = ClusterStageConfig::from_json(j.at("cluster"));
  if (j.contains("scheme")) c.scheme = SchemeConfig::from_json(j.at("scheme"));
  if (j.contains("schemes"))
    for (const Json& s : j.at("schemes")) c.schemes.push_back(SchemeConfig::from_json(s));
  if (j.contains("ppo")) c.ppo = PpoConfig::from_json(j.at("ppo"));
  if (j.contains("eval")) c.eval = EvalStageConfig::from_json(j.at("eval"));

  if (j.contains("artifacts")) {
    const Json& a = j.at("artifacts");
    reject_unknown_keys(a, {"trajectories", "encoder", "clusters", "policy"}, "artifacts");
    c.artifacts.trajectories = field_or<std::string>(a, "trajectories", "");
    c.artifacts.encoder = field_or<std::string>(a, "encoder", "");
    c.artifacts.clusters = field_or<std::string>(a, "clusters", "");
    c.artifacts.policy = field_or<std::string>(a, "policy", "");
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  return from_json(read_json_file(path));
}

const EnvConfig& ExperimentConfig::env_required(const std::string& stage) const {
  check(env.has_value(), stage, ": config is missing the \"env\" block");
  return *env;
}

namespace {
std::filesystem::path resolve(const std::string& explicit_path, const std::string& out_dir,
                              const std::string& fallback_name) {
  if (!explicit_path.empty()) return explicit_path;
  return std::filesystem::path(out_dir.empty() ? "out" : out_dir) / fallback_name;
}
}  // namespace

std::filesystem::path ExperimentConfig::trajectories_path() const {
  std::string tag = env ? env_tag(*env) : "env";
  return resolve(artifacts.trajectories, out_dir, tag + "_trajectories.pshape");
}

std::filesystem::path ExperimentConfig::encoder_path() const {
  std::string tag = env ? env_tag(*env) : "env";
  return resolve(artifacts.encoder, out_dir, tag + "_encoder.pshape");
}

std::filesystem::path ExperimentConfig::clusters_path() const {
  std::string tag = env ? env_tag(*env) : "env";
  return resolve(artifacts.clusters, out_dir, tag + "_clusters.pshape");
}

std::filesystem::path ExperimentConfig::policy_path(const std::string& scheme,
                                                    uint64_t seed_value) const {
  std::string tag = env ? env_tag(*env) : "env";
  if (!artifacts.policy.empty()) return artifacts.policy;
  return std::filesystem::path(out_dir.empty() ? "out" : out_dir) /
         (tag + "_policy-" + scheme + "_" + std::to_string(seed_value) + ".pshape");
}

std::vector<uint64_t> ExperimentConfig::effective_seeds() const {
  if (!seeds.empty()) return seeds;
  return {seed};
}

}  // namespace pshape
