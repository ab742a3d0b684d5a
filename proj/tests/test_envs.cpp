#include <numbers>
#include <queue>
#include <set>

#include "doctest.h"
#include "pshape/gridworld.hpp"
#include "pshape/pendulum.hpp"
#include "pshape/reacher.hpp"
#include "pshape/textures.hpp"
#include "pshape/trajectory.hpp"

using namespace pshape;

namespace {

// Independent BFS flood-fill oracle for shortest maze paths.
int bfs_distance(const GridLayout& g, Cell a, Cell b) {
  std::vector<int> dist(static_cast<size_t>(g.height() * g.width()), -1);
  auto key = [&](Cell c) { return c.row * g.width() + c.col; };
  std::queue<Cell> q;
  dist[static_cast<size_t>(key(a))] = 0;
  q.push(a);
  const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
  while (!q.empty()) {
    Cell c = q.front();
    q.pop();
    if (c == b) return dist[static_cast<size_t>(key(c))];
    for (int k = 0; k < 4; ++k) {
      Cell n{c.row + dr[k], c.col + dc[k]};
      if (!g.in_bounds(n) || g.wall(n) || dist[static_cast<size_t>(key(n))] >= 0) continue;
      dist[static_cast<size_t>(key(n))] = dist[static_cast<size_t>(key(c))] + 1;
      q.push(n);
    }
  }
  return -1;
}

const char* kFixtureMaze7 =
    "#######\n"
    "#.....#\n"
    "#.###.#\n"
    "#.#G#.#\n"
    "#.#.#.#\n"
    "#...#.#\n"
    "#######\n";

}  // namespace

TEST_CASE("layouts parse, validate, and expose one goal") {
  for (const std::string& tag : GridLayout::builtin_tags()) {
    const GridLayout& g = GridLayout::builtin(tag);
    CHECK(g.width() == 17);
    CHECK(g.height() == 17);
    CHECK(!g.wall(g.goal()));
    CHECK(g.free_cells().size() > 100);
  }
}

TEST_CASE("layout validation rejects broken maps") {
  CHECK_THROWS_AS(GridLayout::parse("###\n#.#\n###\n", "no-goal"), Error);
  CHECK_THROWS_AS(GridLayout::parse("###\n#G.\n###\n", "open-border"), Error);
  // unreachable free cell
  CHECK_THROWS_AS(GridLayout::parse("#####\n#G#.#\n#####\n", "split"), Error);
}

TEST_CASE("true_distance equals the BFS oracle on every 7x7 fixture pair") {
  GridLayout g = GridLayout::parse(kFixtureMaze7, "fixture7");
  const auto& free = g.free_cells();
  for (Cell a : free)
    for (Cell b : free) CHECK(true_distance(g, a, b) == bfs_distance(g, a, b));
}

TEST_CASE("true_distance basics and symmetry") {
  const GridLayout& g = GridLayout::builtin("umaze");
  Cell a{1, 1};
  CHECK(true_distance(g, a, a) == 0);
  CHECK(true_distance(g, a, {1, 2}) == 1);

  Rng rng(5);
  const auto& free = g.free_cells();
  for (int i = 0; i < 50; ++i) {
    Cell x = free[static_cast<size_t>(rng.uniform_index(static_cast<int64_t>(free.size())))];
    Cell y = free[static_cast<size_t>(rng.uniform_index(static_cast<int64_t>(free.size())))];
    Cell z = free[static_cast<size_t>(rng.uniform_index(static_cast<int64_t>(free.size())))];
    int dxy = true_distance(g, x, y);
    CHECK(dxy == true_distance(g, y, x));
    CHECK(dxy <= true_distance(g, x, z) + true_distance(g, z, y));
  }
}

TEST_CASE("umaze: cells across the barrier are euclid-close but path-far") {
  const GridLayout& g = GridLayout::builtin("umaze");
  // (8,4) is left of the pocket wall, (8,6) inside the pocket
  Cell outside{8, 4}, inside{8, 6};
  REQUIRE(!g.wall(outside));
  REQUIRE(!g.wall(inside));
  int d = true_distance(g, outside, inside);
  CHECK(d == bfs_distance(g, outside, inside));
  CHECK(d > 8);  // euclidean distance is 2
}

TEST_CASE("gridworld: walls block movement, goal pays once") {
  GridWorldEnv env(GridLayout::builtin("umaze"), 100);
  Rng rng(3);
  env.reset(rng);
  env.place_agent({1, 1});
  // up into the border wall: stay put
  StepResult r = env.step(Action::make_discrete(0));
  CHECK(env.agent() == Cell{1, 1});
  CHECK(r.reward == 0.0);
  CHECK(!r.done);
  // left into the border wall: stay put
  r = env.step(Action::make_discrete(2));
  CHECK(env.agent() == Cell{1, 1});

  CHECK_THROWS_AS(env.step(Action::make_discrete(7)), Error);
}

TEST_CASE("gridworld: reaching the goal gives +1 and done") {
  const GridLayout& g = GridLayout::builtin("umaze");
  GridWorldEnv env(g, 100);
  Rng rng(3);
  env.reset(rng);
  Cell goal = g.goal();
  env.place_agent({goal.row - 1, goal.col});
  REQUIRE(!g.wall(Cell{goal.row - 1, goal.col}));
  StepResult r = env.step(Action::make_discrete(1));  // down
  CHECK(r.reward == 1.0);
  CHECK(r.done);
  CHECK(r.reached_goal);
}

TEST_CASE("gridworld: seeded resets are deterministic and never on walls/goal") {
  GridWorldEnv env(GridLayout::builtin("four_rooms"));
  Rng rng1(42), rng2(42);
  env.reset(rng1);
  Cell a = env.agent();
  env.reset(rng2);
  CHECK(a == env.agent());
  CHECK(!env.layout().wall(a));
  CHECK(!(a == env.layout().goal()));
}

TEST_CASE("gridworld: 1000 resets cover most free cells") {
  GridWorldEnv env(GridLayout::builtin("umaze"));
  Rng rng(7);
  std::set<std::pair<int, int>> seen;
  for (int i = 0; i < 1000; ++i) {
    env.reset(rng);
    seen.insert({env.agent().row, env.agent().col});
  }
  double coverage = static_cast<double>(seen.size()) /
                    static_cast<double>(env.layout().free_cells().size() - 1);
  CHECK(coverage > 0.9);
}

TEST_CASE("gridworld observation layers") {
  GridWorldEnv env(GridLayout::builtin("umaze"));
  Rng rng(1);
  Tensor obs = env.reset(rng);
  REQUIRE(obs.shape == std::vector<int64_t>{17, 17, 3});
  double walls = 0, goals = 0, agents = 0;
  for (int64_t i = 0; i < obs.size() / 3; ++i) {
    walls += obs.data[static_cast<size_t>(3 * i)];
    goals += obs.data[static_cast<size_t>(3 * i + 1)];
    agents += obs.data[static_cast<size_t>(3 * i + 2)];
  }
  CHECK(goals == 1.0);
  CHECK(agents == 1.0);
  CHECK(walls > 17 * 4 - 4);
}

TEST_CASE("pendulum: equilibria are fixed points") {
  PendulumEnv env;
  Rng rng(3);
  env.reset(rng);

  env.set_state({std::numbers::pi, 0.0});  // hanging
  StepResult r = env.step(Action::make_continuous({0.0}));
  CHECK(env.state().theta == doctest::Approx(std::numbers::pi + 0.0).epsilon(1e-12));
  CHECK(env.state().omega == doctest::Approx(0.0));

  env.set_state({0.0, 0.0});  // balanced upright
  r = env.step(Action::make_continuous({0.0}));
  CHECK(env.state().theta == doctest::Approx(0.0));
  CHECK(env.state().omega == doctest::Approx(0.0));
  (void)r;
}

TEST_CASE("pendulum: hand-computed euler step") {
  PendulumEnv env;
  Rng rng(3);
  env.reset(rng);
  env.set_state({std::numbers::pi / 2.0, 0.0});
  env.step(Action::make_continuous({0.0}));
  CHECK(env.state().omega == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(env.state().theta == doctest::Approx(std::numbers::pi / 2.0 + 0.05 * 0.75).epsilon(1e-12));
}

TEST_CASE("pendulum: goal needs 5 consecutive in-range steps") {
  PendulumEnv env(200);
  Rng rng(3);
  env.reset(rng);
  env.set_state({0.0, 0.0});
  // zero torque at the unstable top: stays at theta = 0
  for (int i = 0; i < 4; ++i) {
    StepResult r = env.step(Action::make_continuous({0.0}));
    CHECK(r.reward == 0.0);
    CHECK(!r.done);
  }
  StepResult r5 = env.step(Action::make_continuous({0.0}));
  CHECK(r5.reward == 1.0);
  CHECK(r5.done);
  CHECK(r5.reached_goal);
}

TEST_CASE("pendulum: omega stays clamped and reset ranges hold") {
  PendulumEnv env;
  Rng rng(11);
  for (int e = 0; e < 20; ++e) {
    Tensor obs = env.reset(rng);
    CHECK(std::abs(obs.data[2]) <= 1.0);
    for (int t = 0; t < 50 && !env.episode_over(); ++t) {
      StepResult r = env.step(Action::make_continuous({rng.uniform(-2, 2)}));
      CHECK(std::abs(env.state().omega) <= 8.0);
      CHECK(std::abs(env.state().theta) <= std::numbers::pi);
      (void)r;
    }
  }
}

TEST_CASE("reacher: fingertip follows kinematics, sparse goal") {
  ReacherEnv env;
  Rng rng(5);
  env.reset(rng);
  auto tip = env.fingertip();
  auto expected = ReacherEnv::forward_kinematics(env.state().theta1, env.state().theta2);
  CHECK(tip[0] == doctest::Approx(expected[0]));
  CHECK(tip[1] == doctest::Approx(expected[1]));

  Tensor obs = env.observation();
  REQUIRE(obs.size() == 8);
  CHECK(obs.data[4] == doctest::Approx(tip[0]));
  CHECK(obs.data[6] == doctest::Approx(env.state().goal[0] - tip[0]));
}

TEST_CASE("reacher: goal observation is a valid goal state") {
  ReacherEnv env;
  Rng rng(9);
  for (int i = 0; i < 20; ++i) {
    env.reset(rng);
    Tensor g = env.goal_observation();
    // tip in the goal obs must coincide with the episode goal
    CHECK(g.data[4] == doctest::Approx(env.state().goal[0]).epsilon(1e-9));
    CHECK(g.data[5] == doctest::Approx(env.state().goal[1]).epsilon(1e-9));
    CHECK(g.data[6] == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(g.data[7] == doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("collect: trajectories chain and respect caps") {
  EnvConfig cfg;
  cfg.id = "gridworld";
  cfg.layout = "umaze";
  std::unique_ptr<Env> env = make_env(cfg);
  Rng rng(17);
  TrajectorySet set = collect_random_trajectories(*env, cfg, 5, 30, rng);
  CHECK(set.items.size() == 5);
  for (const Trajectory& t : set.items) {
    CHECK(t.length() <= 30);
    CHECK(t.state_count() == t.length() + 1);
    for (int64_t i = 0; i + 1 < t.length(); ++i) CHECK(t.dones[static_cast<size_t>(i)] == 0);
  }
}

TEST_CASE("collect: count=1, max_len=1 gives a single one-transition trajectory") {
  EnvConfig cfg;
  cfg.id = "pendulum";
  std::unique_ptr<Env> env = make_env(cfg);
  Rng rng(2);
  TrajectorySet set = collect_random_trajectories(*env, cfg, 1, 1, rng);
  REQUIRE(set.items.size() == 1);
  CHECK(set.items[0].length() == 1);
}

TEST_CASE("trajectory save/load round-trips and re-save is byte-identical") {
  EnvConfig cfg;
  cfg.id = "reacher";
  std::unique_ptr<Env> env = make_env(cfg);
  Rng rng(23);
  TrajectorySet set = collect_random_trajectories(*env, cfg, 3, 10, rng);

  auto dir = std::filesystem::temp_directory_path() / "pshape_test_traj";
  std::filesystem::create_directories(dir);
  save_trajectories(dir / "a.pshape", set);
  TrajectorySet loaded = load_trajectories(dir / "a.pshape");
  save_trajectories(dir / "b.pshape", loaded);

  std::ifstream fa(dir / "a.pshape", std::ios::binary), fb(dir / "b.pshape", std::ios::binary);
  std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  CHECK(sa == sb);
  CHECK(loaded.items.size() == set.items.size());
  CHECK(loaded.items[1].rewards == set.items[1].rewards);
  CHECK(loaded.items[2].observations[4].data == set.items[2].observations[4].data);
}

TEST_CASE("render: deterministic and texture-invariant foreground") {
  TextureSpec bricks{"bricks", 9}, wood{"wood", 9};
  Tensor a = render_pendulum_image(0.7, bricks);
  Tensor b = render_pendulum_image(0.7, bricks);
  CHECK(a.data == b.data);

  Tensor c = render_pendulum_image(0.7, wood);
  auto mask = pendulum_foreground_mask(0.7);
  int64_t fg = 0, bg_diff = 0;
  for (int y = 0; y < kImageSize; ++y)
    for (int x = 0; x < kImageSize; ++x) {
      size_t px = static_cast<size_t>((y * kImageSize + x) * 3);
      bool same = a.data[px] == c.data[px] && a.data[px + 1] == c.data[px + 1] &&
                  a.data[px + 2] == c.data[px + 2];
      if (mask[static_cast<size_t>(y * kImageSize + x)]) {
        CHECK(same);  // foreground identical across textures
        ++fg;
      } else if (!same) {
        ++bg_diff;
      }
    }
  CHECK(fg > 20);
  CHECK(bg_diff > 200);
}

TEST_CASE("render: upright arm occupies the top half-column") {
  TextureSpec sand{"sand", 4};
  Tensor img = render_pendulum_image(0.0, sand);
  auto mask = pendulum_foreground_mask(0.0);
  // pixels straight above the pivot are arm pixels
  for (int y = 4; y < 14; ++y) CHECK(mask[static_cast<size_t>(y * kImageSize + 16)]);
  // nothing below the pivot (excluding the pin disk)
  for (int y = 20; y < 30; ++y) CHECK(!mask[static_cast<size_t>(y * kImageSize + 16)]);
  CHECK(img.all_finite());
  for (double v : img.data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("render: value ranges for all texture tags") {
  for (const std::string& tag : texture_tags()) {
    TextureSpec spec{tag, 123};
    Tensor img = render_pendulum_image(1.1, spec);
    for (double v : img.data) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    // same (tag, seed) renders identical pixels; different seeds differ
    Tensor again = render_pendulum_image(1.1, spec);
    CHECK(img.data == again.data);
    TextureSpec other{tag, 124};
    CHECK(render_pendulum_image(1.1, other).data != img.data);
  }
}

TEST_CASE("image env cycles textures per episode") {
  EnvConfig cfg;
  cfg.id = "pendulum";
  cfg.observation = "image";
  cfg.textures = {"bricks", "sand", "cloth"};
  cfg.texture_seed = 5;
  std::unique_ptr<Env> env = make_env(cfg);
  Rng rng(1);
  env->reset(rng);
  auto* img_env = dynamic_cast<ImageObsEnv*>(env.get());
  REQUIRE(img_env != nullptr);
  CHECK(img_env->episode_texture().tag == "bricks");
  env->reset(rng);
  CHECK(img_env->episode_texture().tag == "sand");
  env->reset(rng);
  CHECK(img_env->episode_texture().tag == "cloth");
  CHECK(env->observation_shape() == std::vector<int64_t>{32, 32, 3});
  CHECK(env->goal_observation().size() == 32 * 32 * 3);
}
