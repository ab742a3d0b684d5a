#include "pshape/textures.hpp"

#include <cmath>
#include <numbers>

namespace pshape {

namespace {

double hash01(uint64_t seed, uint64_t a, uint64_t b) {
  uint64_t h = mix64(seed ^ (a * 0x9e3779b97f4a7c15ULL) ^ (b * 0xc2b2ae3d27d4eb4fULL));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Per-texture scalar parameter in [lo, hi], derived from the seed.
double param(const TextureSpec& s, uint64_t which, double lo, double hi) {
  return lo + (hi - lo) * hash01(s.seed, 0x5eed, which);
}

std::array<double, 3> clamp_color(double r, double g, double b) {
  return {std::clamp(r, 0.0, 1.0), std::clamp(g, 0.0, 1.0), std::clamp(b, 0.0, 1.0)};
}

constexpr std::array<double, 3> kArmColor = {0.85, 0.12, 0.12};
constexpr std::array<double, 3> kPinColor = {0.12, 0.12, 0.85};
constexpr std::array<double, 3> kWallColor = {0.10, 0.10, 0.12};
constexpr std::array<double, 3> kAgentColor = {0.85, 0.15, 0.15};
constexpr std::array<double, 3> kGoalColor = {0.15, 0.75, 0.20};

void put_pixel(Tensor& img, int x, int y, const std::array<double, 3>& c) {
  size_t base = static_cast<size_t>((y * kImageSize + x) * 3);
  img.data[base + 0] = c[0];
  img.data[base + 1] = c[1];
  img.data[base + 2] = c[2];
}

}  // namespace

const std::vector<std::string>& texture_tags() {
  static const std::vector<std::string> tags = {"bricks", "sand", "cloth", "wood"};
  return tags;
}

std::array<double, 3> texture_pixel(const TextureSpec& spec, int x, int y) {
  if (spec.tag == "bricks") {
    double base_r = 0.45 + 0.25 * param(spec, 1, 0.0, 1.0);
    double base_g = 0.20 + 0.15 * param(spec, 2, 0.0, 1.0);
    double base_b = 0.15 + 0.10 * param(spec, 3, 0.0, 1.0);
    int bh = 5 + static_cast<int>(param(spec, 4, 0.0, 2.999));  // brick height 5..7
    int bw = 8 + static_cast<int>(param(spec, 5, 0.0, 3.999));  // brick width 8..11
    int band = y / bh;
    int offset = (band % 2) * (bw / 2);
    bool mortar = (y % bh == 0) || ((x + offset) % bw == 0);
    if (mortar) return clamp_color(0.62, 0.60, 0.58);
    double shade = 0.9 + 0.1 * hash01(spec.seed, static_cast<uint64_t>(band),
                                      static_cast<uint64_t>((x + offset) / bw));
    return clamp_color(base_r * shade, base_g * shade, base_b * shade);
  }
  if (spec.tag == "sand") {
    // high-frequency value noise around a sandy base
    double n = hash01(spec.seed, static_cast<uint64_t>(x), static_cast<uint64_t>(y));
    double base_r = 0.72 + 0.08 * param(spec, 1, 0.0, 1.0);
    double base_g = 0.62 + 0.08 * param(spec, 2, 0.0, 1.0);
    double base_b = 0.40 + 0.08 * param(spec, 3, 0.0, 1.0);
    double v = 0.75 + 0.5 * (n - 0.5);
    return clamp_color(base_r * v, base_g * v, base_b * v);
  }
  if (spec.tag == "cloth") {
    // low-frequency sinusoidal weave
    double px = param(spec, 1, 6.0, 11.0);
    double py = param(spec, 2, 6.0, 11.0);
    double phx = param(spec, 3, 0.0, 2.0 * std::numbers::pi);
    double phy = param(spec, 4, 0.0, 2.0 * std::numbers::pi);
    double weave = 0.75 + 0.12 * std::sin(2.0 * std::numbers::pi * x / px + phx) +
                   0.12 * std::sin(2.0 * std::numbers::pi * y / py + phy);
    double base_r = 0.35 + 0.10 * param(spec, 5, 0.0, 1.0);
    double base_g = 0.40 + 0.10 * param(spec, 6, 0.0, 1.0);
    double base_b = 0.55 + 0.15 * param(spec, 7, 0.0, 1.0);
    return clamp_color(base_r * weave, base_g * weave, base_b * weave);
  }
  if (spec.tag == "wood") {
    // 1-d sinusoidal grain along x
    double p = param(spec, 1, 4.0, 8.0);
    double ph = param(spec, 2, 0.0, 2.0 * std::numbers::pi);
    double grain = 0.72 + 0.18 * std::sin(2.0 * std::numbers::pi * x / p + ph) +
                   0.06 * std::sin(4.0 * std::numbers::pi * x / p + 2.3 * ph);
    double base_r = 0.55 + 0.10 * param(spec, 3, 0.0, 1.0);
    double base_g = 0.38 + 0.08 * param(spec, 4, 0.0, 1.0);
    double base_b = 0.22 + 0.05 * param(spec, 5, 0.0, 1.0);
    return clamp_color(base_r * grain, base_g * grain, base_b * grain);
  }
  fail("unknown texture tag \"", spec.tag, "\"");
}

std::vector<bool> pendulum_foreground_mask(double theta) {
  constexpr double cx = 16.0, cy = 16.0;
  constexpr double arm_len = 13.0, arm_halfwidth = 1.6, pin_radius = 2.0;
  // theta = 0 points up (decreasing y)
  double dx = std::sin(theta), dy = -std::cos(theta);
  std::vector<bool> mask(static_cast<size_t>(kImageSize * kImageSize), false);
  for (int y = 0; y < kImageSize; ++y)
    for (int x = 0; x < kImageSize; ++x) {
      double px = x + 0.5 - cx, py = y + 0.5 - cy;
      double t = std::clamp(px * dx + py * dy, 0.0, arm_len);
      double ox = px - t * dx, oy = py - t * dy;
      double dist = std::hypot(ox, oy);
      bool pin = std::hypot(px, py) <= pin_radius;
      if (dist <= arm_halfwidth || pin)
        mask[static_cast<size_t>(y * kImageSize + x)] = true;
    }
  return mask;
}

Tensor render_pendulum_image(double theta, const TextureSpec& texture) {
  Tensor img = Tensor::zeros({kImageSize, kImageSize, 3});
  constexpr double cx = 16.0, cy = 16.0;
  constexpr double arm_len = 13.0, arm_halfwidth = 1.6, pin_radius = 2.0;
  double dx = std::sin(theta), dy = -std::cos(theta);
  for (int y = 0; y < kImageSize; ++y)
    for (int x = 0; x < kImageSize; ++x) {
      double px = x + 0.5 - cx, py = y + 0.5 - cy;
      double t = std::clamp(px * dx + py * dy, 0.0, arm_len);
      double dist = std::hypot(px - t * dx, py - t * dy);
      if (std::hypot(px, py) <= pin_radius)
        put_pixel(img, x, y, kPinColor);
      else if (dist <= arm_halfwidth)
        put_pixel(img, x, y, kArmColor);
      else
        put_pixel(img, x, y, texture_pixel(texture, x, y));
    }
  return img;
}

Tensor render_gridworld_image(const GridLayout& layout, Cell agent, const TextureSpec& texture) {
  Tensor img = Tensor::zeros({kImageSize, kImageSize, 3});
  Cell goal = layout.goal();
  for (int y = 0; y < kImageSize; ++y)
    for (int x = 0; x < kImageSize; ++x) {
      Cell c{y * layout.height() / kImageSize, x * layout.width() / kImageSize};
      if (c.row == agent.row && c.col == agent.col)
        put_pixel(img, x, y, kAgentColor);
      else if (c.row == goal.row && c.col == goal.col)
        put_pixel(img, x, y, kGoalColor);
      else if (layout.wall(c))
        put_pixel(img, x, y, kWallColor);
      else
        put_pixel(img, x, y, texture_pixel(texture, x, y));
    }
  return img;
}

ImageObsEnv::ImageObsEnv(std::unique_ptr<Env> inner, std::vector<std::string> texture_tags,
                         uint64_t seed_base)
    : inner_(std::move(inner)), tags_(std::move(texture_tags)), seed_base_(seed_base) {
  check(!tags_.empty(), "image observations need at least one texture tag");
  for (const auto& t : tags_) texture_pixel({t, 0}, 0, 0);  // validates tags
  texture_ = {tags_.front(), seed_base_};
}

Tensor ImageObsEnv::reset(Rng& rng) {
  ++episode_;
  texture_.tag = tags_[static_cast<size_t>(episode_ % static_cast<int64_t>(tags_.size()))];
  texture_.seed = mix64(seed_base_ ^ static_cast<uint64_t>(episode_));
  inner_->reset(rng);
  return observation();
}

StepResult ImageObsEnv::step(const Action& a) {
  StepResult r = inner_->step(a);
  r.obs = observation();
  return r;
}

Tensor ImageObsEnv::goal_observation() const {
  // goal state under the current episode texture
  return inner_->render_goal(texture_);
}

}  // namespace pshape
