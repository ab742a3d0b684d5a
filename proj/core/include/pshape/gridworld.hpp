#pragma once

#include <string>
#include <vector>

#include "pshape/env.hpp"

namespace pshape {

struct Cell {
  int row = 0;
  int col = 0;
  bool operator==(const Cell&) const = default;
};

// 17x17 maze parsed from an ASCII map: '#' wall, '.' free, 'G' goal (free).
// Construction validates the border, a unique goal, and that every free cell
// is reachable from every other.
class GridLayout {
 public:
  static GridLayout parse(const std::string& ascii, std::string tag);
  // umaze | four_rooms | block_maze
  static const GridLayout& builtin(const std::string& tag);
  static const std::vector<std::string>& builtin_tags();

  int height() const { return static_cast<int>(rows_.size()); }
  int width() const { return rows_.empty() ? 0 : static_cast<int>(rows_[0].size()); }
  bool wall(Cell c) const { return rows_[static_cast<size_t>(c.row)][static_cast<size_t>(c.col)] == '#'; }
  bool in_bounds(Cell c) const {
    return c.row >= 0 && c.row < height() && c.col >= 0 && c.col < width();
  }
  Cell goal() const { return goal_; }
  const std::vector<Cell>& free_cells() const { return free_; }
  const std::string& tag() const { return tag_; }
  std::string ascii() const;

 private:
  std::vector<std::string> rows_;
  std::vector<Cell> free_;
  Cell goal_;
  std::string tag_;
};

// Shortest 4-connected path length avoiding walls (A* with a Manhattan
// heuristic). Errors on wall endpoints or unreachable pairs.
int true_distance(const GridLayout& layout, Cell a, Cell b);

// Sparse-reward maze navigation. Observation is (H, W, 3): wall layer, goal
// layer, agent layer. Actions: 0 up, 1 down, 2 left, 3 right; moving into a
// wall leaves the agent in place. Reaching the goal yields +1 and ends the
// episode.
class GridWorldEnv : public Env {
 public:
  explicit GridWorldEnv(const GridLayout& layout, int horizon = 100);

  std::string name() const override { return "gridworld/" + layout_.tag(); }
  std::vector<int64_t> observation_shape() const override;
  ActionSpec action_spec() const override;
  int horizon() const override { return horizon_; }

  Tensor reset(Rng& rng) override;
  StepResult step(const Action& a) override;
  Tensor observation() const override;
  Tensor goal_observation() const override;
  Tensor render(const TextureSpec& texture) const override;
  Tensor render_goal(const TextureSpec& texture) const override;
  bool episode_over() const override { return done_; }

  const GridLayout& layout() const { return layout_; }
  Cell agent() const { return agent_; }
  void place_agent(Cell c);  // spawn-control for evaluation and two-step training

  Tensor observation_at(Cell agent_cell) const;

 private:
  GridLayout layout_;
  int horizon_;
  Cell agent_;
  int steps_ = 0;
  bool done_ = true;
};

}  // namespace pshape
