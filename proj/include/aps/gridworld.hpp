#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "aps/common.hpp"
#include "aps/rng.hpp"

namespace aps {

// Map legend: '#' wall, '.' floor, 'S' start region, 'K' key 1, 'P' key 2,
// 'D' door 1, 'E' door 2, 'G' goal. One character per cell, newline rows.

class MapError : public std::runtime_error {
 public:
  enum class Code {
    kEmpty,
    kNotRectangular,
    kUnknownSymbol,
    kBoundaryNotWall,
    kNoStart,
    kMissingGoal,
    kMultipleGoals,
    kDuplicateSymbol,
    kDoorWithoutKey,
    kKeyWithoutDoor,
    kGoalReachableWhenLocked,
  };
  MapError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

struct GridPos {
  int r = 0;
  int c = 0;
  bool operator==(const GridPos&) const = default;
};

/// Validated static map geometry. Keys and doors are paired by index:
/// pair 0 is K/D, pair 1 is P/E.
struct GridMap {
  int width = 0;
  int height = 0;
  std::string cells;  // row-major legend characters
  std::vector<GridPos> start_cells;
  std::vector<GridPos> key_pos;   // size n_keys
  std::vector<GridPos> door_pos;  // size n_keys
  GridPos goal;

  char at(int r, int c) const { return cells[static_cast<std::size_t>(r) * width + c]; }
  int n_keys() const { return static_cast<int>(key_pos.size()); }
  int n_cells() const { return width * height; }
  bool in_bounds(int r, int c) const { return r >= 0 && r < height && c >= 0 && c < width; }

  /// Index of the door at (r, c), or -1.
  int door_index(int r, int c) const {
    for (int i = 0; i < n_keys(); ++i)
      if (door_pos[i].r == r && door_pos[i].c == c) return i;
    return -1;
  }
  int key_index(int r, int c) const {
    for (int i = 0; i < n_keys(); ++i)
      if (key_pos[i].r == r && key_pos[i].c == c) return i;
    return -1;
  }
};

/// Cells reachable from `from` by 4-neighbor moves, treating walls and the
/// doors whose bit in `open_doors` is clear as blocked.
inline std::vector<bool> flood_fill(const GridMap& map, const std::vector<GridPos>& from,
                                    unsigned open_doors) {
  std::vector<bool> seen(static_cast<std::size_t>(map.n_cells()), false);
  std::deque<GridPos> queue;
  auto passable = [&](int r, int c) {
    const char ch = map.at(r, c);
    if (ch == '#') return false;
    const int d = map.door_index(r, c);
    if (d >= 0 && ((open_doors >> d) & 1u) == 0) return false;
    return true;
  };
  for (const auto& p : from) {
    if (!seen[p.r * map.width + p.c]) {
      seen[p.r * map.width + p.c] = true;
      queue.push_back(p);
    }
  }
  while (!queue.empty()) {
    const GridPos p = queue.front();
    queue.pop_front();
    constexpr int dr[4] = {-1, 1, 0, 0};
    constexpr int dc[4] = {0, 0, -1, 1};
    for (int k = 0; k < 4; ++k) {
      const int nr = p.r + dr[k], nc = p.c + dc[k];
      if (!map.in_bounds(nr, nc) || !passable(nr, nc)) continue;
      if (!seen[nr * map.width + nc]) {
        seen[nr * map.width + nc] = true;
        queue.push_back({nr, nc});
      }
    }
  }
  return seen;
}

/// Parse and validate a map from its file contents.
inline GridMap load_map(const std::string& text) {
  GridMap map;
  std::vector<std::string> rows;
  {
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      rows.push_back(line);
    }
  }
  if (rows.empty()) throw MapError(MapError::Code::kEmpty, "map file is empty");
  map.height = static_cast<int>(rows.size());
  map.width = static_cast<int>(rows[0].size());
  for (const auto& row : rows)
    if (static_cast<int>(row.size()) != map.width)
      throw MapError(MapError::Code::kNotRectangular, "map rows have differing lengths");

  map.cells.reserve(static_cast<std::size_t>(map.n_cells()));
  int n_goals = 0;
  std::array<int, 2> key_count{0, 0}, door_count{0, 0};
  for (int r = 0; r < map.height; ++r) {
    for (int c = 0; c < map.width; ++c) {
      const char ch = rows[r][static_cast<std::size_t>(c)];
      switch (ch) {
        case '#':
        case '.':
          break;
        case 'S':
          map.start_cells.push_back({r, c});
          break;
        case 'G':
          ++n_goals;
          map.goal = {r, c};
          break;
        case 'K':
        case 'P': {
          const int i = ch == 'K' ? 0 : 1;
          ++key_count[i];
          if (static_cast<int>(map.key_pos.size()) <= i) map.key_pos.resize(i + 1);
          map.key_pos[i] = {r, c};
          break;
        }
        case 'D':
        case 'E': {
          const int i = ch == 'D' ? 0 : 1;
          ++door_count[i];
          if (static_cast<int>(map.door_pos.size()) <= i) map.door_pos.resize(i + 1);
          map.door_pos[i] = {r, c};
          break;
        }
        default:
          throw MapError(MapError::Code::kUnknownSymbol,
                         std::string("unknown map symbol '") + ch + "' at row " +
                             std::to_string(r) + " col " + std::to_string(c));
      }
      map.cells.push_back(ch);
    }
  }

  for (int r = 0; r < map.height; ++r)
    for (int c = 0; c < map.width; ++c)
      if ((r == 0 || r == map.height - 1 || c == 0 || c == map.width - 1) && map.at(r, c) != '#')
        throw MapError(MapError::Code::kBoundaryNotWall, "outer boundary must be wall");

  if (map.start_cells.empty()) throw MapError(MapError::Code::kNoStart, "map has no start cells");
  if (n_goals == 0) throw MapError(MapError::Code::kMissingGoal, "map has no goal");
  if (n_goals > 1) throw MapError(MapError::Code::kMultipleGoals, "map has more than one goal");
  for (int i = 0; i < 2; ++i) {
    if (key_count[i] > 1 || door_count[i] > 1)
      throw MapError(MapError::Code::kDuplicateSymbol,
                     "key/door symbol for pair " + std::to_string(i + 1) + " appears twice");
    if (door_count[i] == 1 && key_count[i] == 0)
      throw MapError(MapError::Code::kDoorWithoutKey,
                     "door " + std::to_string(i + 1) + " has no matching key");
    if (key_count[i] == 1 && door_count[i] == 0)
      throw MapError(MapError::Code::kKeyWithoutDoor,
                     "key " + std::to_string(i + 1) + " has no matching door");
  }
  // Compact the pair lists: a map using only the second pair stores one pair.
  {
    std::vector<GridPos> keys, doors;
    for (int i = 0; i < 2; ++i)
      if (key_count[i] == 1) {
        keys.push_back(map.key_pos[i]);
        doors.push_back(map.door_pos[i]);
      }
    map.key_pos = std::move(keys);
    map.door_pos = std::move(doors);
  }

  const auto reach_locked = flood_fill(map, map.start_cells, 0u);
  if (reach_locked[map.goal.r * map.width + map.goal.c])
    throw MapError(MapError::Code::kGoalReachableWhenLocked,
                   "goal is reachable without opening any door");
  return map;
}

inline GridMap load_map_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw MapError(MapError::Code::kEmpty, "cannot open map file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return load_map(ss.str());
}

// Bundled passageway layouts. The easy level has one key/door pair between
// the start chamber and the goal chamber; the hard level chains two pairs,
// with the second passage in the upper right.
inline const char* builtin_easy_map() {
  return
      "###########\n"
      "#SS..#....#\n"
      "#SS..#....#\n"
      "#.K..#....#\n"
      "#....#....#\n"
      "#....D....#\n"
      "#....#....#\n"
      "#....#....#\n"
      "#....#...G#\n"
      "#....#....#\n"
      "###########\n";
}

inline const char* builtin_hard_map() {
  return
      "#############\n"
      "#SS.#...#...#\n"
      "#SS.#...E...#\n"
      "#...#...#...#\n"
      "#...#...#...#\n"
      "#...D...#..G#\n"
      "#...#...#...#\n"
      "#...#...#...#\n"
      "#.K.#..P#...#\n"
      "#...#...#...#\n"
      "#############\n";
}

enum GridAction : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };
constexpr int kNumActions = 4;

/// Dynamic episode state.
struct GridState {
  GridPos pos;
  std::array<bool, 2> has_key{false, false};
  std::array<bool, 2> door_open{false, false};
  std::array<bool, 2> key_reward_paid{false, false};
  int step_count = 0;
  bool done = false;
  bool reached_goal = false;
};

/// Compact observation: one-hot agent position, then key possession flags,
/// then door open flags. Stored packed; expanded on demand.
struct Observation {
  int pos_index = 0;
  int n_cells = 0;
  std::uint8_t key_flags = 0;
  std::uint8_t door_flags = 0;
  int n_keys = 0;

  int dim() const { return n_cells + 2 * n_keys; }

  void write_to(std::span<double> out) const {
    if (static_cast<int>(out.size()) != dim())
      throw ContractViolation("Observation::write_to: wrong output size");
    std::fill(out.begin(), out.end(), 0.0);
    out[pos_index] = 1.0;
    for (int i = 0; i < n_keys; ++i) {
      out[n_cells + i] = (key_flags >> i) & 1u ? 1.0 : 0.0;
      out[n_cells + n_keys + i] = (door_flags >> i) & 1u ? 1.0 : 0.0;
    }
  }

  Vec to_vec() const {
    Vec v(static_cast<std::size_t>(dim()));
    write_to(v);
    return v;
  }

  bool operator==(const Observation&) const = default;
};

struct StepResult {
  Observation obs;
  double reward = 0.0;
  bool done = false;
};

/// Deterministic passageway environment. Transitions are a pure function of
/// (state, action); the only randomness is the reset draw over start cells.
class GridEnv {
 public:
  explicit GridEnv(GridMap map, int step_cap = 200)
      : map_(std::move(map)), step_cap_(step_cap) {}

  const GridMap& map() const { return map_; }
  const GridState& state() const { return state_; }
  int obs_dim() const { return map_.n_cells() + 2 * map_.n_keys(); }
  int n_actions() const { return kNumActions; }
  int step_cap() const { return step_cap_; }

  Observation observation() const {
    Observation o;
    o.pos_index = state_.pos.r * map_.width + state_.pos.c;
    o.n_cells = map_.n_cells();
    o.n_keys = map_.n_keys();
    for (int i = 0; i < map_.n_keys(); ++i) {
      if (state_.has_key[i]) o.key_flags |= (1u << i);
      if (state_.door_open[i]) o.door_flags |= (1u << i);
    }
    return o;
  }

  /// Uniform draw over the start region; keys unheld, doors closed.
  Observation reset(Rng& rng) {
    const int i = rng.below(static_cast<int>(map_.start_cells.size()));
    return reset_at(map_.start_cells[static_cast<std::size_t>(i)]);
  }

  /// Deterministic placement (evaluation tooling and tests).
  Observation reset_at(GridPos pos) {
    state_ = GridState{};
    state_.pos = pos;
    return observation();
  }

  StepResult step(int action) {
    if (state_.done) throw ContractViolation("GridEnv::step: episode already finished");
    if (action < 0 || action >= kNumActions)
      throw ContractViolation("GridEnv::step: bad action " + std::to_string(action));

    constexpr int dr[4] = {-1, 1, 0, 0};
    constexpr int dc[4] = {0, 0, -1, 1};
    const int nr = state_.pos.r + dr[action];
    const int nc = state_.pos.c + dc[action];

    StepResult out;
    bool moved = false;
    if (map_.in_bounds(nr, nc) && map_.at(nr, nc) != '#') {
      const int door = map_.door_index(nr, nc);
      if (door >= 0 && !state_.door_open[door]) {
        if (state_.has_key[door]) {
          state_.door_open[door] = true;  // unlocking also enters the doorway
          moved = true;
        }
      } else {
        moved = true;
      }
    }
    if (moved) {
      state_.pos = {nr, nc};
      const int key = map_.key_index(nr, nc);
      if (key >= 0) {
        state_.has_key[key] = true;
        if (!state_.key_reward_paid[key]) {
          state_.key_reward_paid[key] = true;
          out.reward += 1.0;
        }
      }
      if (map_.goal == state_.pos) {
        out.reward += 10.0;
        state_.done = true;
        state_.reached_goal = true;
      }
    }
    state_.step_count += 1;
    if (state_.step_count >= step_cap_) state_.done = true;

    out.obs = observation();
    out.done = state_.done;
    return out;
  }

  bool reached_goal() const { return state_.reached_goal; }

 private:
  GridMap map_;
  GridState state_;
  int step_cap_;
};

/// Summary of one finished episode.
struct EpisodeResult {
  bool reached_goal = false;
  int steps = 0;
  double total_reward = 0.0;
};

/// True iff the goal was reached within the step cap.
inline bool success(const EpisodeResult& episode) { return episode.reached_goal; }

}  // namespace aps
