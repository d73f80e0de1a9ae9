#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "mcb/contrastive.hpp"
#include "mcb/dataset.hpp"
#include "mcb/encoder.hpp"
#include "mcb/matrix.hpp"
#include "mcb/rng.hpp"

namespace mcb {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

// Continuous grid world. Cells are unit squares indexed by (col, row) from
// the lower-left; walls are blocked edges between adjacent cells plus the
// outer boundary. A move whose segment crosses or touches a wall is
// rejected wholesale.
class MazeEnv {
 public:
  MazeEnv(std::size_t width, std::size_t height, double step_size = 0.5);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  double step_size() const { return step_size_; }

  // Wall on the edge between cell (x, y) and (x, y+1).
  void add_wall_h(std::size_t x, std::size_t y);
  // Wall on the edge between cell (x, y) and (x+1, y).
  void add_wall_v(std::size_t x, std::size_t y);
  bool has_wall_h(std::size_t x, std::size_t y) const;
  bool has_wall_v(std::size_t x, std::size_t y) const;

  bool in_bounds(Vec2 p) const;
  std::pair<std::size_t, std::size_t> cell_of(Vec2 p) const;
  bool move_blocked(Vec2 from, Vec2 to) const;

  // state + step * action, or the unchanged state when the move is
  // blocked. The action must be unit-norm.
  Vec2 step(Vec2 state, Vec2 action) const;

  // ASCII wall map, one '+---+' bordered grid row per maze row, top row
  // printed first.
  std::string to_text() const;
  static MazeEnv from_text(const std::string& text, double step_size = 0.5);

 private:
  std::size_t width_;
  std::size_t height_;
  double step_size_;
  std::vector<char> wall_h_;  // width x (height-1)
  std::vector<char> wall_v_;  // (width-1) x height
};

MazeEnv open_maze(std::size_t width, std::size_t height, double step_size = 0.5);

// 14x14 preset: horizontal walls across the left half turn every row into a
// separate alleyway that opens onto the free right half.
MazeEnv fork_maze(double step_size = 0.5);

// Eight unit vectors at 45-degree increments; index 0 points along +x,
// counter-clockwise.
const std::array<Vec2, 8>& action_set();
std::size_t action_index_left();
std::size_t action_index_right();

struct LanguageLabel {
  std::string text;
  std::vector<std::pair<std::size_t, std::size_t>> cells;  // (col, row)
};

// "the first column" ... plus row labels; every cell is covered by exactly
// one row label and one column label.
std::vector<LanguageLabel> grid_labels(const MazeEnv& env);
std::vector<LanguageLabel> column_labels(const MazeEnv& env);

bool label_contains(const LanguageLabel& label, std::size_t col, std::size_t row);

struct Trajectory {
  std::vector<Vec2> states;          // length T+1
  std::vector<std::size_t> actions;  // length T
};

// Uniform random walk from uniform starts.
std::vector<Trajectory> collect_random_walk(Rng& rng, const MazeEnv& env,
                                            std::size_t episodes,
                                            std::size_t horizon);

// Feature builders. States are scaled to [-1, 1]; actions are one-hot.
std::vector<double> state_features(const MazeEnv& env, Vec2 state);
std::vector<double> state_action_features(const MazeEnv& env, Vec2 state,
                                          std::size_t action);
std::vector<double> label_features(std::size_t label_index, std::size_t label_count);

// (s, a) -> s_f pairs with the future offset drawn Geometric(1 - gamma),
// truncated at the episode end.
PairDataset make_crl_pairs(Rng& rng, const MazeEnv& env,
                           const std::vector<Trajectory>& trajectories,
                           double gamma_future);

// s -> label pairs: a uniform free-space state, then a uniformly random
// label whose cell set contains it.
PairDataset make_lang_pairs(Rng& rng, const MazeEnv& env,
                            const std::vector<LanguageLabel>& labels,
                            std::size_t n);

struct MazeEncoders {
  EncoderNet sa;     // phi_A over (state, action)
  EncoderNet state;  // phi_B over states / future states
  EncoderNet label;  // phi_C over the label vocabulary
};

enum class PolicyTag { kDirect, kLse };
enum class ActionSelect { kArgmax, kSoftmax };

struct PolicyKind {
  PolicyTag tag = PolicyTag::kLse;
  ActionSelect select = ActionSelect::kSoftmax;
  double temperature = 0.5;
};

// Frozen evaluation context: label representations plus the LSE bank of
// state representations over uniformly sampled free-space states.
struct MazePolicyContext {
  const MazeEnv* env = nullptr;
  const MazeEncoders* encoders = nullptr;
  std::vector<LanguageLabel> labels;
  Matrix label_reps;   // n_labels x d
  Matrix bank_states;  // bank_size x state feature dim (raw features)
  Matrix bank_phi;     // bank_size x d
};

MazePolicyContext make_policy_context(Rng& rng, const MazeEnv& env,
                                      const MazeEncoders& encoders,
                                      const std::vector<LanguageLabel>& labels,
                                      std::size_t bank_size);

// Direct: phi_A(s,a) . phi_C(l).
// LSE: logsumexp_i [phi_A(s,a) . phi_B(s_i) + phi_B(s_i) . phi_C(l)] - log N.
double q_value(const MazePolicyContext& ctx, PolicyTag tag, Vec2 state,
               std::size_t action, std::size_t label_index);

std::size_t select_action(Rng& rng, const MazePolicyContext& ctx,
                          const PolicyKind& policy, Vec2 state,
                          std::size_t label_index);

struct RolloutResult {
  std::vector<char> successes;  // one flag per episode
  double success_rate = 0.0;
};

// Episodes draw (start, label) from per-episode substreams of `rng`, so two
// policies evaluated with equal-seed streams see identical tasks. Success:
// the agent's cell enters the label's cell set within max_steps.
RolloutResult rollout_eval(Rng& rng, const MazeEnv& env,
                           const MazePolicyContext& ctx, const PolicyKind& policy,
                           const std::vector<std::size_t>& task_label_ids,
                           std::size_t episodes, std::size_t max_steps);

// Per-cell mean of phi_B(s) . phi_C(label) over sampled in-cell states;
// row r of the result is maze row r.
Matrix heatmap_label(Rng& rng, const MazeEnv& env, const MazeEncoders& encoders,
                     std::size_t label_index, std::size_t label_count,
                     std::size_t samples_per_cell = 9);

// Per-cell mean of phi_A(state0, action) . phi_B(s') over in-cell states s'.
Matrix heatmap_action(Rng& rng, const MazeEnv& env, const MazeEncoders& encoders,
                      Vec2 state0, std::size_t action,
                      std::size_t samples_per_cell = 9);

void write_heatmap_csv(std::ostream& out, const Matrix& grid);

}  // namespace mcb
