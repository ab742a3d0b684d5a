#pragma once

#include <memory>
#include <string>
#include <vector>

#include "pshape/jsonio.hpp"
#include "pshape/rng.hpp"
#include "pshape/tensor.hpp"

namespace pshape {

struct Action {
  int discrete = 0;
  std::vector<double> continuous;

  static Action make_discrete(int a) {
    Action x;
    x.discrete = a;
    return x;
  }
  static Action make_continuous(std::vector<double> v) {
    Action x;
    x.continuous = std::move(v);
    return x;
  }
};

struct ActionSpec {
  enum class Kind { Discrete, Continuous };
  Kind kind = Kind::Discrete;
  int count = 0;      // discrete
  int dim = 0;        // continuous
  double low = 0.0;   // continuous bounds (per coordinate)
  double high = 0.0;

  Json to_json() const;
  static ActionSpec from_json(const Json& j);
};

struct StepResult {
  Tensor obs;
  double reward = 0.0;
  bool done = false;
  bool reached_goal = false;
};

struct TextureSpec {
  std::string tag;     // bricks | sand | cloth | wood
  uint64_t seed = 0;

  Json to_json() const;
  static TextureSpec from_json(const Json& j);
};

// Episodic environment. Implementations are single-owner state machines;
// run one per job.
class Env {
 public:
  virtual ~Env() = default;

  virtual std::string name() const = 0;
  virtual std::vector<int64_t> observation_shape() const = 0;
  virtual ActionSpec action_spec() const = 0;
  virtual int horizon() const = 0;

  virtual Tensor reset(Rng& rng) = 0;
  virtual StepResult step(const Action& a) = 0;

  virtual Tensor observation() const = 0;
  // Observation at a canonical goal-satisfying state.
  virtual Tensor goal_observation() const = 0;

  // 32x32x3 image of the current state over a procedural background.
  virtual Tensor render(const TextureSpec& texture) const;
  // Image of a canonical goal-satisfying state.
  virtual Tensor render_goal(const TextureSpec& texture) const;

  virtual bool episode_over() const = 0;
};

struct EnvConfig {
  std::string id;                      // gridworld | pendulum | reacher
  std::string layout = "umaze";        // gridworld layouts
  int horizon = 0;                     // 0 = environment default
  std::string observation = "compact"; // compact | image
  std::vector<std::string> textures;   // image mode: texture tags cycled per episode
  uint64_t texture_seed = 0;

  Json to_json() const;
  static EnvConfig from_json(const Json& j);
};

std::unique_ptr<Env> make_env(const EnvConfig& cfg);

}  // namespace pshape
