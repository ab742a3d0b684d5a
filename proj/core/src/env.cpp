#include "pshape/env.hpp"

#include "pshape/gridworld.hpp"
#include "pshape/pendulum.hpp"
#include "pshape/reacher.hpp"
#include "pshape/textures.hpp"

namespace pshape {

Tensor Env::render(const TextureSpec&) const {
  fail("environment \"", name(), "\" has no image renderer");
}

Tensor Env::render_goal(const TextureSpec&) const {
  fail("environment \"", name(), "\" has no image renderer");
}

Json ActionSpec::to_json() const {
  Json j;
  j["kind"] = kind == Kind::Discrete ? "discrete" : "continuous";
  if (kind == Kind::Discrete) {
    j["count"] = count;
  } else {
    j["dim"] = dim;
    j["low"] = low;
    j["high"] = high;
  }
  return j;
}

ActionSpec ActionSpec::from_json(const Json& j) {
  ActionSpec s;
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "discrete") {
    s.kind = Kind::Discrete;
    s.count = j.at("count").get<int>();
  } else if (kind == "continuous") {
    s.kind = Kind::Continuous;
    s.dim = j.at("dim").get<int>();
    s.low = j.at("low").get<double>();
    s.high = j.at("high").get<double>();
  } else {
    fail("unknown action kind \"", kind, "\"");
  }
  return s;
}

Json TextureSpec::to_json() const { return Json{{"tag", tag}, {"seed", seed}}; }

TextureSpec TextureSpec::from_json(const Json& j) {
  reject_unknown_keys(j, {"tag", "seed"}, "texture");
  TextureSpec t;
  t.tag = require_field(j, "tag", "texture").get<std::string>();
  t.seed = field_or<uint64_t>(j, "seed", 0);
  return t;
}

Json EnvConfig::to_json() const {
  Json j;
  j["id"] = id;
  if (id == "gridworld") j["layout"] = layout;
  if (horizon > 0) j["horizon"] = horizon;
  j["observation"] = observation;
  if (observation == "image") {
    j["textures"] = textures;
    j["texture_seed"] = texture_seed;
  }
  return j;
}

EnvConfig EnvConfig::from_json(const Json& j) {
  reject_unknown_keys(j, {"id", "layout", "horizon", "observation", "textures", "texture_seed"},
                      "env");
  EnvConfig c;
  c.id = require_field(j, "id", "env").get<std::string>();
  check(c.id == "gridworld" || c.id == "pendulum" || c.id == "reacher",
        "env: unknown id \"", c.id, "\" (expected gridworld, pendulum or reacher)");
  c.layout = field_or<std::string>(j, "layout", "umaze");
  c.horizon = field_or<int>(j, "horizon", 0);
  c.observation = field_or<std::string>(j, "observation", "compact");
  check(c.observation == "compact" || c.observation == "image",
        "env: observation must be \"compact\" or \"image\"");
  c.textures = field_or<std::vector<std::string>>(j, "textures", {});
  c.texture_seed = field_or<uint64_t>(j, "texture_seed", 0);
  if (c.observation == "image")
    check(!c.textures.empty(), "env: image observation requires a textures list");
  return c;
}

std::unique_ptr<Env> make_env(const EnvConfig& cfg) {
  std::unique_ptr<Env> env;
  if (cfg.id == "gridworld") {
    env = std::make_unique<GridWorldEnv>(GridLayout::builtin(cfg.layout),
                                         cfg.horizon > 0 ? cfg.horizon : 100);
  } else if (cfg.id == "pendulum") {
    env = std::make_unique<PendulumEnv>(cfg.horizon > 0 ? cfg.horizon : 200);
  } else if (cfg.id == "reacher") {
    env = std::make_unique<ReacherEnv>(cfg.horizon > 0 ? cfg.horizon : 50);
  } else {
    fail("unknown env id \"", cfg.id, "\"");
  }
  if (cfg.observation == "image")
    env = std::make_unique<ImageObsEnv>(std::move(env), cfg.textures, cfg.texture_seed);
  return env;
}

}  // namespace pshape
