#pragma once

#include <memory>

#include "pshape/env.hpp"
#include "pshape/gridworld.hpp"

namespace pshape {

inline constexpr int kImageSize = 32;

// Background color at pixel (x, y) for a procedural texture. Deterministic in
// (tag, seed, x, y).
std::array<double, 3> texture_pixel(const TextureSpec& spec, int x, int y);

// 32x32x3 images in [0, 1]: textured background with the foreground drawn in
// fixed solid colors on top. The foreground mask depends only on the state,
// never on the texture.
Tensor render_pendulum_image(double theta, const TextureSpec& texture);
Tensor render_gridworld_image(const GridLayout& layout, Cell agent, const TextureSpec& texture);

// True where the arm/pin covers the pixel; mirrors render_pendulum_image.
std::vector<bool> pendulum_foreground_mask(double theta);

const std::vector<std::string>& texture_tags();

// Wraps a state-based env with image observations. Each episode cycles
// through the configured texture tags and derives a fresh texture seed, so
// that training sees many texture instances.
class ImageObsEnv : public Env {
 public:
  ImageObsEnv(std::unique_ptr<Env> inner, std::vector<std::string> texture_tags,
              uint64_t seed_base);

  std::string name() const override { return inner_->name() + "/image"; }
  std::vector<int64_t> observation_shape() const override {
    return {kImageSize, kImageSize, 3};
  }
  ActionSpec action_spec() const override { return inner_->action_spec(); }
  int horizon() const override { return inner_->horizon(); }

  Tensor reset(Rng& rng) override;
  StepResult step(const Action& a) override;
  Tensor observation() const override { return inner_->render(texture_); }
  Tensor goal_observation() const override;
  Tensor render(const TextureSpec& texture) const override { return inner_->render(texture); }
  bool episode_over() const override { return inner_->episode_over(); }

  const TextureSpec& episode_texture() const { return texture_; }
  Env& inner() { return *inner_; }

 private:
  std::unique_ptr<Env> inner_;
  std::vector<std::string> tags_;
  uint64_t seed_base_;
  int64_t episode_ = -1;
  TextureSpec texture_;
};

}  // namespace pshape
