#include "pshape/gridworld.hpp"

#include <algorithm>
#include <map>
#include <queue>

#include "pshape/textures.hpp"

namespace pshape {

namespace {

// Layout geometry is fixed in code; the maps below are the authoritative
// wall placement for the three named layouts.

constexpr const char* kUMaze =
    "#################\n"
    "#...............#\n"
    "#...............#\n"
    "#...............#\n"
    "#....#.....#....#\n"
    "#....#.....#....#\n"
    "#....#.....#....#\n"
    "#....#.....#....#\n"
    "#....#.....#....#\n"
    "#....#.....#....#\n"
    "#....#.....#....#\n"
    "#....#..G..#....#\n"
    "#....#.....#....#\n"
    "#....#######....#\n"
    "#...............#\n"
    "#...............#\n"
    "#################\n";

constexpr const char* kFourRooms =
    "#################\n"
    "#.......#.......#\n"
    "#.......#.......#\n"
    "#.......#.......#\n"
    "#...............#\n"
    "#.......#.......#\n"
    "#.......#.......#\n"
    "#.......#.......#\n"
    "####.########.###\n"
    "#.......#.......#\n"
    "#.......#.......#\n"
    "#.......#.......#\n"
    "#...............#\n"
    "#.......#....G..#\n"
    "#.......#.......#\n"
    "#.......#.......#\n"
    "#################\n";

constexpr const char* kBlockMaze =
    "#################\n"
    "#...............#\n"
    "#...............#\n"
    "#..####...####..#\n"
    "#..####...####..#\n"
    "#..####...####..#\n"
    "#..####...####..#\n"
    "#...............#\n"
    "#.......G.......#\n"
    "#...............#\n"
    "#..####...####..#\n"
    "#..####...####..#\n"
    "#..####...####..#\n"
    "#..####...####..#\n"
    "#...............#\n"
    "#...............#\n"
    "#################\n";

constexpr int kDr[4] = {-1, 1, 0, 0};
constexpr int kDc[4] = {0, 0, -1, 1};

}  // namespace

GridLayout GridLayout::parse(const std::string& ascii, std::string tag) {
  GridLayout g;
  g.tag_ = std::move(tag);
  std::string line;
  for (char ch : ascii) {
    if (ch == '\n') {
      if (!line.empty()) g.rows_.push_back(line);
      line.clear();
    } else {
      line.push_back(ch);
    }
  }
  if (!line.empty()) g.rows_.push_back(line);

  check(!g.rows_.empty(), "layout \"", g.tag_, "\": empty map");
  size_t w = g.rows_[0].size();
  int goals = 0;
  for (int r = 0; r < g.height(); ++r) {
    check(g.rows_[static_cast<size_t>(r)].size() == w, "layout \"", g.tag_,
          "\": ragged row ", r);
    for (int c = 0; c < g.width(); ++c) {
      char ch = g.rows_[static_cast<size_t>(r)][static_cast<size_t>(c)];
      check(ch == '#' || ch == '.' || ch == 'G', "layout \"", g.tag_, "\": bad character '",
            std::string(1, ch), "' at (", r, ", ", c, ")");
      bool border = r == 0 || c == 0 || r == g.height() - 1 || c == g.width() - 1;
      if (border) check(ch == '#', "layout \"", g.tag_, "\": border cell (", r, ", ", c,
                        ") must be a wall");
      if (ch != '#') g.free_.push_back({r, c});
      if (ch == 'G') {
        g.goal_ = {r, c};
        ++goals;
      }
    }
  }
  check(goals == 1, "layout \"", g.tag_, "\": expected exactly one goal, found ", goals);

  // connectivity: flood fill from the goal must reach every free cell
  std::vector<std::vector<bool>> seen(static_cast<size_t>(g.height()),
                                      std::vector<bool>(static_cast<size_t>(g.width()), false));
  std::queue<Cell> q;
  q.push(g.goal_);
  seen[static_cast<size_t>(g.goal_.row)][static_cast<size_t>(g.goal_.col)] = true;
  size_t reached = 0;
  while (!q.empty()) {
    Cell c = q.front();
    q.pop();
    ++reached;
    for (int k = 0; k < 4; ++k) {
      Cell n{c.row + kDr[k], c.col + kDc[k]};
      if (!g.in_bounds(n) || g.wall(n) || seen[static_cast<size_t>(n.row)][static_cast<size_t>(n.col)])
        continue;
      seen[static_cast<size_t>(n.row)][static_cast<size_t>(n.col)] = true;
      q.push(n);
    }
  }
  check(reached == g.free_.size(), "layout \"", g.tag_, "\": ", g.free_.size() - reached,
        " free cells unreachable from the goal");
  return g;
}

const GridLayout& GridLayout::builtin(const std::string& tag) {
  static const std::map<std::string, GridLayout> layouts = [] {
    std::map<std::string, GridLayout> m;
    m.emplace("umaze", parse(kUMaze, "umaze"));
    m.emplace("four_rooms", parse(kFourRooms, "four_rooms"));
    m.emplace("block_maze", parse(kBlockMaze, "block_maze"));
    return m;
  }();
  auto it = layouts.find(tag);
  check(it != layouts.end(), "unknown layout \"", tag,
        "\" (expected umaze, four_rooms or block_maze)");
  return it->second;
}

const std::vector<std::string>& GridLayout::builtin_tags() {
  static const std::vector<std::string> tags = {"umaze", "four_rooms", "block_maze"};
  return tags;
}

std::string GridLayout::ascii() const {
  std::string out;
  for (const auto& row : rows_) {
    out += row;
    out += '\n';
  }
  return out;
}

int true_distance(const GridLayout& layout, Cell a, Cell b) {
  check(layout.in_bounds(a) && !layout.wall(a), "true_distance: start (", a.row, ", ", a.col,
        ") is not a free cell");
  check(layout.in_bounds(b) && !layout.wall(b), "true_distance: target (", b.row, ", ", b.col,
        ") is not a free cell");
  if (a == b) return 0;

  auto h = [&](Cell c) { return std::abs(c.row - b.row) + std::abs(c.col - b.col); };
  int W = layout.width();
  auto key = [&](Cell c) { return c.row * W + c.col; };

  std::vector<int> best(static_cast<size_t>(layout.height() * W), -1);
  using Entry = std::pair<int, int>;  // (f, cell key)
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  best[static_cast<size_t>(key(a))] = 0;
  open.push({h(a), key(a)});
  while (!open.empty()) {
    auto [f, ck] = open.top();
    open.pop();
    Cell c{ck / W, ck % W};
    int g = best[static_cast<size_t>(ck)];
    if (f > g + h(c)) continue;  // stale entry
    if (c == b) return g;
    for (int k = 0; k < 4; ++k) {
      Cell n{c.row + kDr[k], c.col + kDc[k]};
      if (!layout.in_bounds(n) || layout.wall(n)) continue;
      int nk = key(n);
      if (best[static_cast<size_t>(nk)] == -1 || g + 1 < best[static_cast<size_t>(nk)]) {
        best[static_cast<size_t>(nk)] = g + 1;
        open.push({g + 1 + h(n), nk});
      }
    }
  }
  fail("true_distance: no path between (", a.row, ", ", a.col, ") and (", b.row, ", ", b.col,
       ")");
}

GridWorldEnv::GridWorldEnv(const GridLayout& layout, int horizon)
    : layout_(layout), horizon_(horizon) {
  check(horizon_ > 0, "gridworld horizon must be positive");
  agent_ = layout_.free_cells().front();
}

std::vector<int64_t> GridWorldEnv::observation_shape() const {
  return {layout_.height(), layout_.width(), 3};
}

ActionSpec GridWorldEnv::action_spec() const {
  ActionSpec s;
  s.kind = ActionSpec::Kind::Discrete;
  s.count = 4;
  return s;
}

Tensor GridWorldEnv::observation_at(Cell agent_cell) const {
  int h = layout_.height(), w = layout_.width();
  Tensor obs = Tensor::zeros({h, w, 3});
  Cell goal = layout_.goal();
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      size_t base = static_cast<size_t>((r * w + c) * 3);
      if (layout_.wall({r, c})) obs.data[base + 0] = 1.0;
      if (goal.row == r && goal.col == c) obs.data[base + 1] = 1.0;
      if (agent_cell.row == r && agent_cell.col == c) obs.data[base + 2] = 1.0;
    }
  return obs;
}

Tensor GridWorldEnv::reset(Rng& rng) {
  const auto& free = layout_.free_cells();
  Cell goal = layout_.goal();
  do {
    agent_ = free[static_cast<size_t>(rng.uniform_index(static_cast<int64_t>(free.size())))];
  } while (agent_ == goal);
  steps_ = 0;
  done_ = false;
  return observation();
}

void GridWorldEnv::place_agent(Cell c) {
  check(layout_.in_bounds(c) && !layout_.wall(c), "cannot place agent on a wall");
  agent_ = c;
  steps_ = 0;
  done_ = false;
}

StepResult GridWorldEnv::step(const Action& a) {
  check(!done_, "step() called on a finished episode");
  check(a.discrete >= 0 && a.discrete < 4, "gridworld action ", a.discrete,
        " out of range [0, 4)");
  Cell next{agent_.row + kDr[a.discrete], agent_.col + kDc[a.discrete]};
  if (layout_.in_bounds(next) && !layout_.wall(next)) agent_ = next;
  ++steps_;

  StepResult r;
  r.reached_goal = agent_ == layout_.goal();
  r.reward = r.reached_goal ? 1.0 : 0.0;
  r.done = r.reached_goal || steps_ >= horizon_;
  done_ = r.done;
  r.obs = observation();
  return r;
}

Tensor GridWorldEnv::observation() const { return observation_at(agent_); }

Tensor GridWorldEnv::goal_observation() const { return observation_at(layout_.goal()); }

Tensor GridWorldEnv::render(const TextureSpec& texture) const {
  return render_gridworld_image(layout_, agent_, texture);
}

Tensor GridWorldEnv::render_goal(const TextureSpec& texture) const {
  return render_gridworld_image(layout_, layout_.goal(), texture);
}

}  // namespace pshape
