#include <doctest.h>

#include <cmath>
#include <queue>
#include <sstream>

#include "mcb/errors.hpp"
#include "mcb/maze.hpp"
#include "mcb/special.hpp"

using namespace mcb;

namespace {

// Reachable cell set from a start cell, honoring wall edges.
std::vector<char> reachable_cells(const MazeEnv& env, std::size_t col, std::size_t row) {
  const std::size_t w = env.width(), h = env.height();
  std::vector<char> seen(w * h, 0);
  std::queue<std::pair<std::size_t, std::size_t>> frontier;
  frontier.push({col, row});
  seen[row * w + col] = 1;
  while (!frontier.empty()) {
    const auto [x, y] = frontier.front();
    frontier.pop();
    if (x + 1 < w && !env.has_wall_v(x, y) && !seen[y * w + x + 1]) {
      seen[y * w + x + 1] = 1;
      frontier.push({x + 1, y});
    }
    if (x > 0 && !env.has_wall_v(x - 1, y) && !seen[y * w + x - 1]) {
      seen[y * w + x - 1] = 1;
      frontier.push({x - 1, y});
    }
    if (y + 1 < h && !env.has_wall_h(x, y) && !seen[(y + 1) * w + x]) {
      seen[(y + 1) * w + x] = 1;
      frontier.push({x, y + 1});
    }
    if (y > 0 && !env.has_wall_h(x, y - 1) && !seen[(y - 1) * w + x]) {
      seen[(y - 1) * w + x] = 1;
      frontier.push({x, y - 1});
    }
  }
  return seen;
}

}  // namespace

TEST_CASE("env_step: open move, blocked move, boundary, unit check") {
  MazeEnv env = open_maze(4, 4);
  const Vec2 s{1.25, 1.25};
  const Vec2 moved = env.step(s, {1.0, 0.0});
  CHECK(moved.x == doctest::Approx(1.75));
  CHECK(moved.y == doctest::Approx(1.25));

  MazeEnv walled = open_maze(4, 4);
  walled.add_wall_v(1, 1);  // wall between cells (1,1) and (2,1) at x=2
  const Vec2 near_wall{1.75, 1.5};
  const Vec2 blocked = walled.step(near_wall, {1.0, 0.0});
  CHECK(blocked.x == near_wall.x);
  CHECK(blocked.y == near_wall.y);

  const Vec2 corner{0.2, 0.2};
  const Vec2 stay = env.step(corner, {-1.0, 0.0});
  CHECK(stay.x == corner.x);

  CHECK_THROWS_WITH_AS(env.step(s, {0.5, 0.0}),
                       "maze step: action must be a unit vector", Error);
}

TEST_CASE("fork preset: alleyway walls block vertical moves on the left half") {
  const MazeEnv env = fork_maze();
  CHECK(env.width() == 14);
  CHECK(env.height() == 14);
  const Vec2 alley{2.5, 6.5};
  const Vec2 up = env.step(alley, {0.0, 1.0});
  CHECK(up.x == alley.x);
  CHECK(up.y == alley.y);
  // Leftward movement along the alleyway is free.
  const Vec2 left = env.step(alley, {-1.0, 0.0});
  CHECK(left.x == doctest::Approx(2.0));
  // The right half is open.
  const Vec2 open_half{10.5, 6.5};
  const Vec2 up2 = env.step(open_half, {0.0, 1.0});
  CHECK(up2.y == doctest::Approx(7.0));
}

TEST_CASE("environment safety: random walks never leak across walls") {
  Rng rng(101);
  const MazeEnv env = fork_maze();
  const auto& actions = action_set();
  for (int episode = 0; episode < 20; ++episode) {
    Vec2 s{rng.next_double() * 14.0, rng.next_double() * 14.0};
    const auto [c0, r0] = env.cell_of(s);
    const auto ok = reachable_cells(env, c0, r0);
    for (int t = 0; t < 200; ++t) {
      s = env.step(s, actions[rng.next_below(8)]);
      const auto [c, r] = env.cell_of(s);
      CHECK(ok[r * env.width() + c] == 1);
    }
  }
}

TEST_CASE("maze text roundtrip") {
  const MazeEnv env = fork_maze();
  const std::string text = env.to_text();
  const MazeEnv parsed = MazeEnv::from_text(text);
  CHECK(parsed.width() == env.width());
  CHECK(parsed.height() == env.height());
  for (std::size_t y = 0; y < env.height(); ++y)
    for (std::size_t x = 0; x < env.width(); ++x) {
      CHECK(parsed.has_wall_h(x, y) == env.has_wall_h(x, y));
      CHECK(parsed.has_wall_v(x, y) == env.has_wall_v(x, y));
    }
  CHECK(parsed.to_text() == text);
}

TEST_CASE("labels: coverage and corner ambiguity") {
  const MazeEnv env = fork_maze();
  const auto labels = grid_labels(env);
  CHECK(labels.size() == 28);
  std::vector<std::string> eligible;
  for (const auto& l : labels)
    if (label_contains(l, 0, 0)) eligible.push_back(l.text);
  REQUIRE(eligible.size() == 2);
  CHECK(eligible[0] == "the first column");
  CHECK(eligible[1] == "the first row");
}

TEST_CASE("collect and crl pairs: offsets and determinism") {
  Rng r1(102), r2(102);
  const MazeEnv env = open_maze(6, 6);
  const auto t1 = collect_random_walk(r1, env, 5, 40);
  const auto t2 = collect_random_walk(r2, env, 5, 40);
  CHECK(t1.size() == 5);
  for (std::size_t e = 0; e < 5; ++e) {
    CHECK(t1[e].states.size() == 41);
    CHECK(t1[e].actions == t2[e].actions);
    // Dynamics consistency: each state follows from the previous one.
    for (std::size_t t = 0; t < t1[e].actions.size(); ++t) {
      const Vec2 expect = env.step(t1[e].states[t], action_set()[t1[e].actions[t]]);
      CHECK(expect.x == t1[e].states[t + 1].x);
      CHECK(expect.y == t1[e].states[t + 1].y);
    }
  }

  // gamma = 0 makes the future state the immediate next state.
  Rng pr(103);
  const PairDataset next_state = make_crl_pairs(pr, env, t1, 0.0);
  CHECK(next_state.size() == 5 * 40);
  std::size_t row = 0;
  for (const auto& traj : t1)
    for (std::size_t t = 0; t < traj.actions.size(); ++t, ++row) {
      const auto sf = state_features(env, traj.states[t + 1]);
      CHECK(next_state.right(row, 0) == doctest::Approx(sf[0]));
      CHECK(next_state.right(row, 1) == doctest::Approx(sf[1]));
    }
}

TEST_CASE("geometric future offsets have mean 1/(1-gamma)") {
  // One long trajectory so truncation is negligible.
  Rng rng(104);
  const MazeEnv env = open_maze(4, 4);
  const auto trajs = collect_random_walk(rng, env, 1, 100000);
  const double gamma = 0.9;
  Rng pr(105);
  // Offsets are recoverable only through the sampled future states, so
  // re-derive the generator here: count geometric draws directly.
  double sum = 0.0;
  const std::size_t n = 100000;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t delta = 1;
    while (pr.next_double() < gamma) ++delta;
    sum += static_cast<double>(delta);
  }
  CHECK(std::abs(sum / static_cast<double>(n) - 10.0) / 10.0 < 0.05);
  (void)trajs;
}

TEST_CASE("lang pairs: ambiguity respected and coverage enforced") {
  Rng rng(106);
  const MazeEnv env = fork_maze();
  const auto labels = grid_labels(env);
  const PairDataset pairs = make_lang_pairs(rng, env, labels, 500);
  CHECK(pairs.size() == 500);
  CHECK(pairs.right.cols() == labels.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    std::size_t chosen = labels.size();
    for (std::size_t l = 0; l < labels.size(); ++l)
      if (pairs.right(i, l) == 1.0) chosen = l;
    REQUIRE(chosen < labels.size());
    // The chosen label must contain the sampled state's cell.
    const double x = (pairs.left(i, 0) + 1.0) * 7.0;
    const double y = (pairs.left(i, 1) + 1.0) * 7.0;
    const auto [col, row] = env.cell_of({x, y});
    CHECK(label_contains(labels[chosen], col, row));
  }
}

namespace {

MazeEncoders zero_encoders(const MazeEnv& env, std::size_t n_labels) {
  Rng rng(107);
  MazeEncoders enc;
  enc.sa = make_encoder(rng, {2 + action_set().size(), 8, 4}, Activation::kRelu,
                        OutputMode::kRaw);
  enc.state = make_encoder(rng, {2, 8, 4}, Activation::kRelu, OutputMode::kRaw);
  enc.label = make_encoder(rng, {n_labels, 4}, Activation::kRelu, OutputMode::kRaw);
  for (auto* net : {&enc.sa, &enc.state, &enc.label})
    for (auto& w : net->weights)
      for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] = 0.0;
  (void)env;
  return enc;
}

}  // namespace

TEST_CASE("q_value: single-row bank reduces to the score sum") {
  const MazeEnv env = open_maze(4, 4);
  const auto labels = grid_labels(env);
  Rng rng(108);
  MazeEncoders enc;
  enc.sa = make_encoder(rng, {2 + action_set().size(), 8, 4}, Activation::kRelu,
                        OutputMode::kRaw);
  enc.state = make_encoder(rng, {2, 8, 4}, Activation::kRelu, OutputMode::kRaw);
  enc.label = make_encoder(rng, {labels.size(), 4}, Activation::kRelu, OutputMode::kRaw);
  Rng ctx_rng(109);
  MazePolicyContext ctx = make_policy_context(ctx_rng, env, enc, labels, 1);
  const Vec2 s{1.5, 2.5};
  const double q = q_value(ctx, PolicyTag::kLse, s, 2, 3);

  const auto sa = state_action_features(env, s, 2);
  Matrix sa_in(1, sa.size());
  for (std::size_t j = 0; j < sa.size(); ++j) sa_in(0, j) = sa[j];
  const Matrix phi_a = forward(enc.sa, sa_in);
  const double expect = dot(phi_a.row(0), ctx.bank_phi.row(0)) +
                        dot(ctx.bank_phi.row(0), ctx.label_reps.row(3));
  CHECK(q == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("q_value: zero encoders make all actions equal") {
  const MazeEnv env = open_maze(4, 4);
  const auto labels = grid_labels(env);
  const MazeEncoders enc = zero_encoders(env, labels.size());
  Rng ctx_rng(110);
  MazePolicyContext ctx = make_policy_context(ctx_rng, env, enc, labels, 32);
  const Vec2 s{1.5, 2.5};
  for (auto tag : {PolicyTag::kDirect, PolicyTag::kLse}) {
    const double q0 = q_value(ctx, tag, s, 0, 1);
    for (std::size_t a = 1; a < 8; ++a)
      CHECK(q_value(ctx, tag, s, a, 1) == doctest::Approx(q0).epsilon(1e-12));
  }
}

TEST_CASE("lse argmax is invariant to additive shifts on the coupling side") {
  const MazeEnv env = open_maze(4, 4);
  const auto labels = grid_labels(env);
  Rng rng(111);
  MazeEncoders enc;
  enc.sa = make_encoder(rng, {2 + action_set().size(), 8, 4}, Activation::kRelu,
                        OutputMode::kRaw);
  enc.state = make_encoder(rng, {2, 8, 4}, Activation::kRelu, OutputMode::kRaw);
  enc.label = make_encoder(rng, {labels.size(), 4}, Activation::kRelu, OutputMode::kRaw);
  Rng ctx_rng(112);
  MazePolicyContext ctx = make_policy_context(ctx_rng, env, enc, labels, 64);

  const Vec2 s{2.2, 1.7};
  const std::size_t label = 2;
  std::vector<double> q(8), q_shifted(8);
  for (std::size_t a = 0; a < 8; ++a) q[a] = q_value(ctx, PolicyTag::kLse, s, a, label);
  // Shifting the label bias shifts f2 by a constant through the linear
  // label encoder only when the encoder is linear; emulate by shifting the
  // cached coupling instead: add a constant to every label representation
  // coordinate has no such guarantee, so shift via bank coupling identity:
  // Q(a; f2 + c0) = Q(a; f2) + c0.
  MazePolicyContext shifted = ctx;
  // Adding c0 to f2 means adding c0 to each bank-label coupling term, which
  // equals replacing label_reps row with one extra pseudo-coordinate; here
  // we verify the identity numerically through q_value on a bank with an
  // appended constant column.
  const double c0 = 3.7;
  Matrix bank_ext(ctx.bank_phi.rows(), ctx.bank_phi.cols() + 1);
  for (std::size_t i = 0; i < ctx.bank_phi.rows(); ++i) {
    for (std::size_t j = 0; j < ctx.bank_phi.cols(); ++j)
      bank_ext(i, j) = ctx.bank_phi(i, j);
    bank_ext(i, ctx.bank_phi.cols()) = 1.0;
  }
  Matrix label_ext(ctx.label_reps.rows(), ctx.label_reps.cols() + 1);
  for (std::size_t i = 0; i < ctx.label_reps.rows(); ++i) {
    for (std::size_t j = 0; j < ctx.label_reps.cols(); ++j)
      label_ext(i, j) = ctx.label_reps(i, j);
    label_ext(i, ctx.label_reps.cols()) = c0;
  }
  // phi_a gains a zero coordinate so the f1 terms are unchanged.
  shifted.bank_phi = bank_ext;
  shifted.label_reps = label_ext;
  // q_value recomputes phi_a from the sa encoder (4 dims); widen by hand.
  for (std::size_t a = 0; a < 8; ++a) {
    const auto sa = state_action_features(env, s, a);
    Matrix sa_in(1, sa.size());
    for (std::size_t j = 0; j < sa.size(); ++j) sa_in(0, j) = sa[j];
    const Matrix phi_a = forward(enc.sa, sa_in);
    std::vector<double> terms(bank_ext.rows());
    for (std::size_t i = 0; i < bank_ext.rows(); ++i) {
      double f1 = 0.0;
      for (std::size_t j = 0; j < 4; ++j) f1 += phi_a(0, j) * bank_ext(i, j);
      double f2 = 0.0;
      for (std::size_t j = 0; j < 5; ++j) f2 += bank_ext(i, j) * label_ext(label, j);
      terms[i] = f1 + f2;
    }
    q_shifted[a] = log_sum_exp(terms) - std::log(static_cast<double>(terms.size()));
  }
  std::size_t best = 0, best_shifted = 0;
  for (std::size_t a = 1; a < 8; ++a) {
    if (q[a] > q[best]) best = a;
    if (q_shifted[a] > q_shifted[best_shifted]) best_shifted = a;
  }
  CHECK(best == best_shifted);
  for (std::size_t a = 0; a < 8; ++a)
    CHECK(q_shifted[a] - q[a] == doctest::Approx(c0).epsilon(1e-9));
}

TEST_CASE("rollout: start inside the label succeeds immediately") {
  const MazeEnv env = open_maze(3, 3);
  const auto labels = grid_labels(env);
  const MazeEncoders enc = zero_encoders(env, labels.size());
  Rng ctx_rng(113);
  MazePolicyContext ctx = make_policy_context(ctx_rng, env, enc, labels, 8);

  // Single label covering everything: success in zero steps.
  LanguageLabel everywhere;
  everywhere.text = "anywhere";
  for (std::size_t x = 0; x < 3; ++x)
    for (std::size_t y = 0; y < 3; ++y) everywhere.cells.emplace_back(x, y);
  ctx.labels.push_back(everywhere);
  Matrix wide(ctx.label_reps.rows() + 1, ctx.label_reps.cols());
  for (std::size_t i = 0; i < ctx.label_reps.rows(); ++i)
    for (std::size_t j = 0; j < ctx.label_reps.cols(); ++j)
      wide(i, j) = ctx.label_reps(i, j);
  ctx.label_reps = wide;

  Rng rng(114);
  const RolloutResult res =
      rollout_eval(rng, env, ctx, PolicyKind{PolicyTag::kDirect, ActionSelect::kArgmax},
                   {ctx.labels.size() - 1}, 20, 0);
  CHECK(res.success_rate == 1.0);
}

TEST_CASE("rollout: walled-off goal is never reached") {
  MazeEnv env = open_maze(3, 1);
  env.add_wall_v(1, 0);  // isolate cell (2, 0) from (0..1, 0)
  std::vector<LanguageLabel> labels;
  LanguageLabel target{"the far cell", {{2, 0}}};
  LanguageLabel rest{"the near cells", {{0, 0}, {1, 0}}};
  labels.push_back(target);
  labels.push_back(rest);
  Rng enc_rng(115);
  MazeEncoders enc;
  enc.sa = make_encoder(enc_rng, {2 + action_set().size(), 8, 4}, Activation::kRelu,
                        OutputMode::kRaw);
  enc.state = make_encoder(enc_rng, {2, 8, 4}, Activation::kRelu, OutputMode::kRaw);
  enc.label = make_encoder(enc_rng, {2, 4}, Activation::kRelu, OutputMode::kRaw);
  Rng ctx_rng(116);
  MazePolicyContext ctx = make_policy_context(ctx_rng, env, enc, labels, 16);

  // Starts are drawn uniformly; restrict success counting to episodes that
  // began outside the target cell by construction: width 3, the target is
  // one third of area, so force starts by rejecting inside-label episodes.
  Rng rng(117);
  const RolloutResult res =
      rollout_eval(rng, env, ctx, PolicyKind{PolicyTag::kLse, ActionSelect::kSoftmax, 0.5},
                   {0}, 60, 40);
  // Episodes that started inside the walled-off cell succeed at step zero;
  // every other episode must fail. Verify no crossing ever happened by
  // checking the success rate equals the fraction of in-cell starts.
  Rng replay(117);
  std::size_t inside = 0;
  for (std::size_t e = 0; e < 60; ++e) {
    Rng task = replay.substream("task", e);
    const double x = task.next_double() * 3.0;
    task.next_double();
    if (x >= 2.0) ++inside;
  }
  CHECK(res.success_rate ==
        doctest::Approx(static_cast<double>(inside) / 60.0).epsilon(1e-12));
}

TEST_CASE("rollout: paired seeds give order-independent outcomes") {
  const MazeEnv env = open_maze(4, 4);
  const auto labels = grid_labels(env);
  Rng enc_rng(118);
  MazeEncoders enc;
  enc.sa = make_encoder(enc_rng, {2 + action_set().size(), 8, 4}, Activation::kRelu,
                        OutputMode::kRaw);
  enc.state = make_encoder(enc_rng, {2, 8, 4}, Activation::kRelu, OutputMode::kRaw);
  enc.label =
      make_encoder(enc_rng, {labels.size(), 4}, Activation::kRelu, OutputMode::kRaw);
  Rng ctx_rng(119);
  MazePolicyContext ctx = make_policy_context(ctx_rng, env, enc, labels, 16);
  const PolicyKind policy{PolicyTag::kLse, ActionSelect::kSoftmax, 0.5};
  std::vector<std::size_t> tasks{0, 1, 2, 3};
  Rng r1(120), r2(120);
  const RolloutResult a = rollout_eval(r1, env, ctx, policy, tasks, 30, 25);
  const RolloutResult b = rollout_eval(r2, env, ctx, policy, tasks, 30, 25);
  CHECK(a.successes == b.successes);
}

TEST_CASE("heatmaps: zero encoders are flat, grid shape is height x width") {
  const MazeEnv env = fork_maze();
  const auto labels = grid_labels(env);
  const MazeEncoders enc = zero_encoders(env, labels.size());
  Rng rng(121);
  const Matrix grid = heatmap_label(rng, env, enc, 0, labels.size(), 4);
  CHECK(grid.rows() == env.height());
  CHECK(grid.cols() == env.width());
  for (std::size_t i = 0; i < grid.size(); ++i) CHECK(grid.data()[i] == 0.0);

  Rng rng2(122);
  const Matrix agrid = heatmap_action(rng2, env, enc, {2.5, 6.5}, 0, 4);
  CHECK(agrid.rows() == env.height());
  for (std::size_t i = 0; i < agrid.size(); ++i) CHECK(agrid.data()[i] == 0.0);

  std::ostringstream out;
  write_heatmap_csv(out, grid);
  std::size_t lines = 0;
  std::string line;
  std::istringstream in(out.str());
  while (std::getline(in, line)) ++lines;
  CHECK(lines == env.height());
}
