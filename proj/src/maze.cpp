#include "mcb/maze.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <ostream>
#include <sstream>

#include "mcb/errors.hpp"
#include "mcb/special.hpp"

namespace mcb {

namespace {

double cross(Vec2 o, Vec2 a, Vec2 b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

bool on_box(Vec2 p, Vec2 q, Vec2 r) {
  return std::min(p.x, r.x) <= q.x && q.x <= std::max(p.x, r.x) &&
         std::min(p.y, r.y) <= q.y && q.y <= std::max(p.y, r.y);
}

// Intersection including touching endpoints; touching counts as a crossing
// so the rejection rule stays conservative.
bool segments_intersect(Vec2 p1, Vec2 p2, Vec2 p3, Vec2 p4) {
  const double d1 = cross(p3, p4, p1);
  const double d2 = cross(p3, p4, p2);
  const double d3 = cross(p1, p2, p3);
  const double d4 = cross(p1, p2, p4);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
      ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
    return true;
  if (d1 == 0 && on_box(p3, p1, p4)) return true;
  if (d2 == 0 && on_box(p3, p2, p4)) return true;
  if (d3 == 0 && on_box(p1, p3, p2)) return true;
  if (d4 == 0 && on_box(p1, p4, p2)) return true;
  return false;
}

constexpr const char* kOrdinals[] = {
    "first",       "second",     "third",      "fourth",    "fifth",
    "sixth",       "seventh",    "eighth",     "ninth",     "tenth",
    "eleventh",    "twelfth",    "thirteenth", "fourteenth", "fifteenth",
    "sixteenth",   "seventeenth", "eighteenth", "nineteenth", "twentieth"};

std::string ordinal(std::size_t i) {
  if (i < std::size(kOrdinals)) return kOrdinals[i];
  return std::to_string(i + 1) + "th";
}

}  // namespace

MazeEnv::MazeEnv(std::size_t width, std::size_t height, double step_size)
    : width_(width), height_(height), step_size_(step_size) {
  if (width < 1 || height < 1)
    throw Error("bad_argument", "maze: width and height must be >= 1");
  if (!(step_size > 0.0)) throw Error("bad_argument", "maze: step size must be > 0");
  wall_h_.assign(width_ * (height_ > 0 ? height_ - 1 : 0), 0);
  wall_v_.assign((width_ > 0 ? width_ - 1 : 0) * height_, 0);
}

void MazeEnv::add_wall_h(std::size_t x, std::size_t y) {
  if (x >= width_ || y + 1 >= height_)
    throw Error("bad_argument", "maze: horizontal wall out of range");
  wall_h_[y * width_ + x] = 1;
}

void MazeEnv::add_wall_v(std::size_t x, std::size_t y) {
  if (x + 1 >= width_ || y >= height_)
    throw Error("bad_argument", "maze: vertical wall out of range");
  wall_v_[y * (width_ - 1) + x] = 1;
}

bool MazeEnv::has_wall_h(std::size_t x, std::size_t y) const {
  if (x >= width_ || y + 1 >= height_) return false;
  return wall_h_[y * width_ + x] != 0;
}

bool MazeEnv::has_wall_v(std::size_t x, std::size_t y) const {
  if (x + 1 >= width_ || y >= height_) return false;
  return wall_v_[y * (width_ - 1) + x] != 0;
}

bool MazeEnv::in_bounds(Vec2 p) const {
  return p.x >= 0.0 && p.x <= static_cast<double>(width_) && p.y >= 0.0 &&
         p.y <= static_cast<double>(height_);
}

std::pair<std::size_t, std::size_t> MazeEnv::cell_of(Vec2 p) const {
  const auto clamp_idx = [](double v, std::size_t n) {
    const double f = std::floor(v);
    if (f < 0.0) return static_cast<std::size_t>(0);
    if (f >= static_cast<double>(n)) return n - 1;
    return static_cast<std::size_t>(f);
  };
  return {clamp_idx(p.x, width_), clamp_idx(p.y, height_)};
}

bool MazeEnv::move_blocked(Vec2 from, Vec2 to) const {
  if (!in_bounds(to)) return true;
  for (std::size_t y = 0; y + 1 < height_; ++y)
    for (std::size_t x = 0; x < width_; ++x)
      if (wall_h_[y * width_ + x]) {
        const Vec2 a{static_cast<double>(x), static_cast<double>(y + 1)};
        const Vec2 b{static_cast<double>(x + 1), static_cast<double>(y + 1)};
        if (segments_intersect(from, to, a, b)) return true;
      }
  for (std::size_t y = 0; y < height_; ++y)
    for (std::size_t x = 0; x + 1 < width_; ++x)
      if (wall_v_[y * (width_ - 1) + x]) {
        const Vec2 a{static_cast<double>(x + 1), static_cast<double>(y)};
        const Vec2 b{static_cast<double>(x + 1), static_cast<double>(y + 1)};
        if (segments_intersect(from, to, a, b)) return true;
      }
  return false;
}

Vec2 MazeEnv::step(Vec2 state, Vec2 action) const {
  const double n = std::sqrt(action.x * action.x + action.y * action.y);
  if (std::abs(n - 1.0) > 1e-9)
    throw Error("not_unit_norm", "maze step: action must be a unit vector");
  const Vec2 proposed{state.x + step_size_ * action.x,
                      state.y + step_size_ * action.y};
  if (move_blocked(state, proposed)) return state;
  return proposed;
}

std::string MazeEnv::to_text() const {
  std::ostringstream out;
  for (std::size_t row = height_; row-- > 0;) {
    // Border above this row (outer boundary for the top row).
    out << '+';
    for (std::size_t x = 0; x < width_; ++x) {
      const bool wall = (row + 1 == height_) || has_wall_h(x, row);
      out << (wall ? "---" : "   ") << '+';
    }
    out << '\n';
    out << '|';
    for (std::size_t x = 0; x < width_; ++x) {
      const bool wall = (x + 1 == width_) || has_wall_v(x, row);
      out << "   " << (wall ? '|' : ' ');
    }
    out << '\n';
  }
  out << '+';
  for (std::size_t x = 0; x < width_; ++x) out << "---+";
  out << '\n';
  return out.str();
}

MazeEnv MazeEnv::from_text(const std::string& text, double step_size) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) lines.push_back(line);
  if (lines.size() < 3 || lines.size() % 2 != 1)
    throw Error("bad_header", "maze text: expected 2*height+1 lines");
  const std::size_t height = (lines.size() - 1) / 2;
  if (lines[0].size() < 5 || (lines[0].size() - 1) % 4 != 0)
    throw Error("bad_header", "maze text: expected 4*width+1 columns");
  const std::size_t width = (lines[0].size() - 1) / 4;
  MazeEnv env(width, height, step_size);
  for (std::size_t row = 0; row < height; ++row) {
    const std::size_t border_line = 2 * (height - 1 - row);
    const std::size_t cell_line = border_line + 1;
    if (row + 1 < height) {
      for (std::size_t x = 0; x < width; ++x)
        if (lines[border_line].at(1 + 4 * x) == '-') env.add_wall_h(x, row);
    }
    for (std::size_t x = 0; x + 1 < width; ++x)
      if (lines[cell_line].at(4 * (x + 1)) == '|') env.add_wall_v(x, row);
  }
  return env;
}

MazeEnv open_maze(std::size_t width, std::size_t height, double step_size) {
  return MazeEnv(width, height, step_size);
}

MazeEnv fork_maze(double step_size) {
  MazeEnv env(14, 14, step_size);
  for (std::size_t y = 0; y + 1 < 14; ++y)
    for (std::size_t x = 0; x < 7; ++x) env.add_wall_h(x, y);
  return env;
}

const std::array<Vec2, 8>& action_set() {
  static const std::array<Vec2, 8> actions = [] {
    std::array<Vec2, 8> a;
    for (int i = 0; i < 8; ++i) {
      const double theta = i * std::numbers::pi / 4.0;
      a[static_cast<std::size_t>(i)] = {std::cos(theta), std::sin(theta)};
    }
    return a;
  }();
  return actions;
}

std::size_t action_index_left() { return 4; }
std::size_t action_index_right() { return 0; }

std::vector<LanguageLabel> column_labels(const MazeEnv& env) {
  std::vector<LanguageLabel> labels;
  for (std::size_t x = 0; x < env.width(); ++x) {
    LanguageLabel l;
    l.text = "the " + ordinal(x) + " column";
    for (std::size_t y = 0; y < env.height(); ++y) l.cells.emplace_back(x, y);
    labels.push_back(std::move(l));
  }
  return labels;
}

std::vector<LanguageLabel> grid_labels(const MazeEnv& env) {
  std::vector<LanguageLabel> labels = column_labels(env);
  for (std::size_t y = 0; y < env.height(); ++y) {
    LanguageLabel l;
    l.text = "the " + ordinal(y) + " row";
    for (std::size_t x = 0; x < env.width(); ++x) l.cells.emplace_back(x, y);
    labels.push_back(std::move(l));
  }
  return labels;
}

bool label_contains(const LanguageLabel& label, std::size_t col, std::size_t row) {
  for (const auto& [c, r] : label.cells)
    if (c == col && r == row) return true;
  return false;
}

std::vector<Trajectory> collect_random_walk(Rng& rng, const MazeEnv& env,
                                            std::size_t episodes,
                                            std::size_t horizon) {
  if (episodes < 1 || horizon < 1)
    throw Error("bad_argument", "collect: episodes and horizon must be >= 1");
  const auto& actions = action_set();
  std::vector<Trajectory> out;
  out.reserve(episodes);
  for (std::size_t e = 0; e < episodes; ++e) {
    Trajectory traj;
    Vec2 s{rng.next_double() * static_cast<double>(env.width()),
           rng.next_double() * static_cast<double>(env.height())};
    traj.states.push_back(s);
    for (std::size_t t = 0; t < horizon; ++t) {
      const std::size_t a = rng.next_below(actions.size());
      s = env.step(s, actions[a]);
      traj.actions.push_back(a);
      traj.states.push_back(s);
    }
    out.push_back(std::move(traj));
  }
  return out;
}

std::vector<double> state_features(const MazeEnv& env, Vec2 state) {
  return {2.0 * state.x / static_cast<double>(env.width()) - 1.0,
          2.0 * state.y / static_cast<double>(env.height()) - 1.0};
}

std::vector<double> state_action_features(const MazeEnv& env, Vec2 state,
                                          std::size_t action) {
  if (action >= action_set().size())
    throw Error("bad_argument", "state_action_features: action index out of range");
  std::vector<double> f = state_features(env, state);
  f.resize(2 + action_set().size(), 0.0);
  f[2 + action] = 1.0;
  return f;
}

std::vector<double> label_features(std::size_t label_index, std::size_t label_count) {
  if (label_index >= label_count)
    throw Error("bad_argument", "label_features: index out of range");
  std::vector<double> f(label_count, 0.0);
  f[label_index] = 1.0;
  return f;
}

PairDataset make_crl_pairs(Rng& rng, const MazeEnv& env,
                           const std::vector<Trajectory>& trajectories,
                           double gamma_future) {
  if (trajectories.empty())
    throw Error("bad_argument", "make_crl_pairs: no trajectories");
  if (!(gamma_future >= 0.0 && gamma_future < 1.0))
    throw Error("bad_argument", "make_crl_pairs: gamma must be in [0, 1)");
  std::size_t total = 0;
  for (const auto& t : trajectories) total += t.actions.size();
  PairDataset ds;
  ds.left = Matrix(total, 2 + action_set().size());
  ds.right = Matrix(total, 2);
  std::size_t row = 0;
  for (const auto& traj : trajectories) {
    const std::size_t t_end = traj.actions.size();
    for (std::size_t t = 0; t < t_end; ++t) {
      // Delta ~ Geometric(1 - gamma) on {1, 2, ...}, truncated at the end.
      std::size_t delta = 1;
      while (rng.next_double() < gamma_future) ++delta;
      const std::size_t f = std::min(t + delta, t_end);
      const auto sa = state_action_features(env, traj.states[t], traj.actions[t]);
      const auto sf = state_features(env, traj.states[f]);
      for (std::size_t j = 0; j < sa.size(); ++j) ds.left(row, j) = sa[j];
      for (std::size_t j = 0; j < sf.size(); ++j) ds.right(row, j) = sf[j];
      ++row;
    }
  }
  return ds;
}

PairDataset make_lang_pairs(Rng& rng, const MazeEnv& env,
                            const std::vector<LanguageLabel>& labels,
                            std::size_t n) {
  if (labels.empty()) throw Error("bad_argument", "make_lang_pairs: no labels");
  PairDataset ds;
  ds.left = Matrix(n, 2);
  ds.right = Matrix(n, labels.size());
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 s{rng.next_double() * static_cast<double>(env.width()),
                 rng.next_double() * static_cast<double>(env.height())};
    const auto [col, row] = env.cell_of(s);
    eligible.clear();
    for (std::size_t l = 0; l < labels.size(); ++l)
      if (label_contains(labels[l], col, row)) eligible.push_back(l);
    if (eligible.empty())
      throw Error("label_coverage", "make_lang_pairs: a cell has no label");
    const std::size_t l = eligible[rng.next_below(eligible.size())];
    const auto sf = state_features(env, s);
    ds.left(i, 0) = sf[0];
    ds.left(i, 1) = sf[1];
    ds.right(i, l) = 1.0;
  }
  return ds;
}

MazePolicyContext make_policy_context(Rng& rng, const MazeEnv& env,
                                      const MazeEncoders& encoders,
                                      const std::vector<LanguageLabel>& labels,
                                      std::size_t bank_size) {
  if (bank_size < 1) throw Error("bad_argument", "policy context: empty bank");
  MazePolicyContext ctx;
  ctx.env = &env;
  ctx.encoders = &encoders;
  ctx.labels = labels;

  Matrix label_inputs(labels.size(), labels.size());
  for (std::size_t l = 0; l < labels.size(); ++l) label_inputs(l, l) = 1.0;
  ctx.label_reps = forward(encoders.label, label_inputs);

  ctx.bank_states = Matrix(bank_size, 2);
  for (std::size_t i = 0; i < bank_size; ++i) {
    const Vec2 s{rng.next_double() * static_cast<double>(env.width()),
                 rng.next_double() * static_cast<double>(env.height())};
    const auto f = state_features(env, s);
    ctx.bank_states(i, 0) = f[0];
    ctx.bank_states(i, 1) = f[1];
  }
  ctx.bank_phi = forward(encoders.state, ctx.bank_states);
  return ctx;
}

double q_value(const MazePolicyContext& ctx, PolicyTag tag, Vec2 state,
               std::size_t action, std::size_t label_index) {
  const auto sa = state_action_features(*ctx.env, state, action);
  Matrix sa_in(1, sa.size());
  for (std::size_t j = 0; j < sa.size(); ++j) sa_in(0, j) = sa[j];
  const Matrix phi_a = forward(ctx.encoders->sa, sa_in);
  const auto lrep = ctx.label_reps.row(label_index);
  if (tag == PolicyTag::kDirect) return dot(phi_a.row(0), lrep);

  if (ctx.bank_phi.rows() == 0) throw Error("empty_bank", "q_value: empty bank");
  std::vector<double> terms(ctx.bank_phi.rows());
  for (std::size_t i = 0; i < ctx.bank_phi.rows(); ++i) {
    const auto b = ctx.bank_phi.row(i);
    terms[i] = dot(phi_a.row(0), b) + dot(b, lrep);
  }
  return log_sum_exp(terms) - std::log(static_cast<double>(terms.size()));
}

std::size_t select_action(Rng& rng, const MazePolicyContext& ctx,
                          const PolicyKind& policy, Vec2 state,
                          std::size_t label_index) {
  const std::size_t n_actions = action_set().size();
  std::vector<double> q(n_actions);

  // Shared work across actions: phi_A for all 8 one-hots, and the label
  // coupling term for the LSE variant.
  Matrix sa_in(n_actions, 2 + n_actions);
  for (std::size_t a = 0; a < n_actions; ++a) {
    const auto f = state_action_features(*ctx.env, state, a);
    for (std::size_t j = 0; j < f.size(); ++j) sa_in(a, j) = f[j];
  }
  const Matrix phi_a = forward(ctx.encoders->sa, sa_in);
  const auto lrep = ctx.label_reps.row(label_index);

  if (policy.tag == PolicyTag::kDirect) {
    for (std::size_t a = 0; a < n_actions; ++a) q[a] = dot(phi_a.row(a), lrep);
  } else {
    const std::size_t n = ctx.bank_phi.rows();
    std::vector<double> coupling(n);
    for (std::size_t i = 0; i < n; ++i) coupling[i] = dot(ctx.bank_phi.row(i), lrep);
    std::vector<double> terms(n);
    for (std::size_t a = 0; a < n_actions; ++a) {
      for (std::size_t i = 0; i < n; ++i)
        terms[i] = dot(phi_a.row(a), ctx.bank_phi.row(i)) + coupling[i];
      q[a] = log_sum_exp(terms) - std::log(static_cast<double>(n));
    }
  }

  if (policy.select == ActionSelect::kArgmax) {
    std::size_t best = 0;
    for (std::size_t a = 1; a < n_actions; ++a)
      if (q[a] > q[best]) best = a;
    return best;
  }
  // Softmax sampling weighted by exp(q / temperature).
  if (!(policy.temperature > 0.0))
    throw Error("bad_argument", "select_action: temperature must be > 0");
  double m = q[0];
  for (double v : q) m = std::max(m, v);
  std::vector<double> w(n_actions);
  double total = 0.0;
  for (std::size_t a = 0; a < n_actions; ++a) {
    w[a] = std::exp((q[a] - m) / policy.temperature);
    total += w[a];
  }
  double u = rng.next_double() * total;
  for (std::size_t a = 0; a < n_actions; ++a) {
    u -= w[a];
    if (u <= 0.0) return a;
  }
  return n_actions - 1;
}

RolloutResult rollout_eval(Rng& rng, const MazeEnv& env,
                           const MazePolicyContext& ctx, const PolicyKind& policy,
                           const std::vector<std::size_t>& task_label_ids,
                           std::size_t episodes, std::size_t max_steps) {
  if (task_label_ids.empty())
    throw Error("bad_argument", "rollout_eval: no task labels");
  RolloutResult result;
  result.successes.assign(episodes, 0);
  for (std::size_t e = 0; e < episodes; ++e) {
    Rng task_rng = rng.substream("task", e);
    Rng act_rng = rng.substream("actions", e);
    Vec2 s{task_rng.next_double() * static_cast<double>(env.width()),
           task_rng.next_double() * static_cast<double>(env.height())};
    const std::size_t label =
        task_label_ids[task_rng.next_below(task_label_ids.size())];
    bool success = false;
    for (std::size_t t = 0; t <= max_steps; ++t) {
      const auto [col, row] = env.cell_of(s);
      if (label_contains(ctx.labels[label], col, row)) {
        success = true;
        break;
      }
      if (t == max_steps) break;
      const std::size_t a = select_action(act_rng, ctx, policy, s, label);
      s = env.step(s, action_set()[a]);
    }
    result.successes[e] = success ? 1 : 0;
  }
  std::size_t wins = 0;
  for (char c : result.successes) wins += c;
  result.success_rate =
      episodes == 0 ? 0.0 : static_cast<double>(wins) / static_cast<double>(episodes);
  return result;
}

namespace {

Matrix cell_grid_mean(Rng& rng, const MazeEnv& env, std::size_t samples_per_cell,
                      const std::function<double(Vec2)>& value) {
  Matrix grid(env.height(), env.width());
  for (std::size_t row = 0; row < env.height(); ++row)
    for (std::size_t col = 0; col < env.width(); ++col) {
      double sum = 0.0;
      for (std::size_t s = 0; s < samples_per_cell; ++s) {
        const Vec2 p{static_cast<double>(col) + rng.next_double(),
                     static_cast<double>(row) + rng.next_double()};
        sum += value(p);
      }
      grid(row, col) = sum / static_cast<double>(samples_per_cell);
    }
  return grid;
}

}  // namespace

Matrix heatmap_label(Rng& rng, const MazeEnv& env, const MazeEncoders& encoders,
                     std::size_t label_index, std::size_t label_count,
                     std::size_t samples_per_cell) {
  Matrix label_in(1, label_count);
  label_in(0, label_index) = 1.0;
  const Matrix lrep = forward(encoders.label, label_in);
  return cell_grid_mean(rng, env, samples_per_cell, [&](Vec2 p) {
    const auto f = state_features(env, p);
    Matrix in(1, f.size());
    for (std::size_t j = 0; j < f.size(); ++j) in(0, j) = f[j];
    const Matrix rep = forward(encoders.state, in);
    return dot(rep.row(0), lrep.row(0));
  });
}

Matrix heatmap_action(Rng& rng, const MazeEnv& env, const MazeEncoders& encoders,
                      Vec2 state0, std::size_t action,
                      std::size_t samples_per_cell) {
  const auto sa = state_action_features(env, state0, action);
  Matrix sa_in(1, sa.size());
  for (std::size_t j = 0; j < sa.size(); ++j) sa_in(0, j) = sa[j];
  const Matrix phi_a = forward(encoders.sa, sa_in);
  return cell_grid_mean(rng, env, samples_per_cell, [&](Vec2 p) {
    const auto f = state_features(env, p);
    Matrix in(1, f.size());
    for (std::size_t j = 0; j < f.size(); ++j) in(0, j) = f[j];
    const Matrix rep = forward(encoders.state, in);
    return dot(phi_a.row(0), rep.row(0));
  });
}

void write_heatmap_csv(std::ostream& out, const Matrix& grid) {
  char buf[32];
  for (std::size_t r = 0; r < grid.rows(); ++r) {
    for (std::size_t c = 0; c < grid.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", grid(r, c));
      out << buf << (c + 1 < grid.cols() ? "," : "");
    }
    out << '\n';
  }
}

}  // namespace mcb
