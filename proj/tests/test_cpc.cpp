#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "pshape/cpc.hpp"
#include "pshape/gradcheck.hpp"

using namespace pshape;

namespace {

// Tiny synthetic trajectory set: 1-d ramp observations.
TrajectorySet ramp_trajectories(int64_t count, int64_t len, int64_t obs_dim = 3) {
  TrajectorySet set;
  set.env.id = "pendulum";
  set.observation_shape = {obs_dim};
  set.action.kind = ActionSpec::Kind::Continuous;
  set.action.dim = 1;
  set.action.low = -1;
  set.action.high = 1;
  for (int64_t i = 0; i < count; ++i) {
    Trajectory t;
    for (int64_t s = 0; s <= len; ++s) {
      Tensor obs = Tensor::zeros({obs_dim});
      for (int64_t d = 0; d < obs_dim; ++d)
        obs.data[static_cast<size_t>(d)] =
            std::sin(0.37 * static_cast<double>(s + i) + static_cast<double>(d));
      t.observations.push_back(std::move(obs));
      if (s < len) {
        t.actions.push_back(Action::make_continuous({0.0}));
        t.rewards.push_back(0.0);
        t.dones.push_back(s + 1 == len ? 1 : 0);
      }
    }
    set.items.push_back(std::move(t));
  }
  return set;
}

CpcConfig small_config() {
  CpcConfig cfg;
  cfg.context_len = 3;
  cfg.predict_len = 2;
  cfg.batch = 4;
  cfg.epochs = 1;
  cfg.embed_dim = 6;
  cfg.context_dim = 8;
  return cfg;
}

}  // namespace

TEST_CASE("config validation") {
  CpcConfig cfg;
  cfg.batch = 1;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = CpcConfig{};
  cfg.negatives = "uniform";
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = CpcConfig{};
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("all-zero model: loss is exactly ln(B)") {
  CpcConfig cfg = small_config();
  cfg.batch = 8;
  Rng rng(1);
  TrajectorySet set = ramp_trajectories(4, 12);
  EncoderModel model = EncoderModel::create(cfg, set.observation_shape, false, rng);
  for (auto& [name, t] : model.params.items())
    std::fill(t.data.begin(), t.data.end(), 0.0);

  SegmentBatch batch = sample_segments(set, cfg, rng);
  double loss = infonce_loss(model, batch);
  CHECK(loss == doctest::Approx(std::log(8.0)).epsilon(1e-12));
  CHECK(std::log(8.0) == doctest::Approx(2.0794).epsilon(1e-4));
}

TEST_CASE("hand logits: cross-entropy value") {
  // candidates (1, 0, 0), positive first: loss = -ln(e / (e + 2))
  Tape tape;
  Tape::Var logits = tape.input(Tensor::from({1, 3}, {1.0, 0.0, 0.0}));
  Tape::Var lp = tape.categorical_logprob(logits, {0});
  double expected = -std::log(std::exp(1.0) / (std::exp(1.0) + 2.0));
  CHECK(-tape.value(lp).data[0] == doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(0.6265).epsilon(1e-3));

  // per-row diagonal version sees the same value when every row matches
  Tensor sq = Tensor::zeros({3, 3});
  for (int i = 0; i < 3; ++i) sq.at(i, i) = 1.0;
  Tape tape2;
  Tape::Var loss = tape2.xent_rows_diag(tape2.input(sq));
  CHECK(tape2.value(loss).scalar_value() == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("dominant positive logit drives the loss to zero") {
  Tensor sq = Tensor::zeros({4, 4});
  for (int i = 0; i < 4; ++i) sq.at(i, i) = 50.0;
  Tape tape;
  Tape::Var loss = tape.xent_rows_diag(tape.input(sq));
  CHECK(tape.value(loss).scalar_value() < 1e-12);
}

TEST_CASE("initialization: loss within ln(B) +/- 0.1 over random batches") {
  CpcConfig cfg;
  cfg.batch = 8;
  cfg.context_len = 4;
  cfg.predict_len = 3;
  Rng rng(33);
  TrajectorySet set = ramp_trajectories(6, 20);
  EncoderModel model = EncoderModel::create(cfg, set.observation_shape, false, rng);
  for (int trial = 0; trial < 5; ++trial) {
    SegmentBatch batch = sample_segments(set, cfg, rng);
    double loss = infonce_loss(model, batch);
    CHECK(std::abs(loss - std::log(8.0)) < 0.1);
  }
}

TEST_CASE("segment sampling: bounds, determinism, single-start case") {
  CpcConfig cfg = small_config();
  // exactly n + K states -> the single valid start is always selected
  TrajectorySet set = ramp_trajectories(1, cfg.context_len + cfg.predict_len - 1);
  REQUIRE(set.items[0].state_count() == cfg.context_len + cfg.predict_len);
  Rng rng(3);
  SegmentBatch b = sample_segments(set, cfg, rng);
  for (int64_t i = 0; i < cfg.batch; ++i)
    for (int64_t t = 0; t < cfg.context_len + cfg.predict_len; ++t) {
      const Tensor& expect = set.items[0].observations[static_cast<size_t>(t)];
      for (int64_t d = 0; d < 3; ++d)
        CHECK(b.states.data[static_cast<size_t>((t * cfg.batch + i) * 3 + d)] ==
              expect.data[static_cast<size_t>(d)]);
    }

  Rng r1(9), r2(9);
  SegmentBatch b1 = sample_segments(set, cfg, r1);
  SegmentBatch b2 = sample_segments(set, cfg, r2);
  CHECK(b1.states.data == b2.states.data);
}

TEST_CASE("segment sampling: short trajectories are skipped with a count") {
  CpcConfig cfg = small_config();
  TrajectorySet set = ramp_trajectories(3, 12);
  TrajectorySet shorty = ramp_trajectories(2, 2);
  for (auto& t : shorty.items) set.items.push_back(std::move(t));
  Rng rng(5);
  SegmentSampleStats stats;
  sample_segments(set, cfg, rng, &stats);
  CHECK(stats.eligible == 3);
  CHECK(stats.skipped_short == 2);

  TrajectorySet none = ramp_trajectories(2, 2);
  CHECK_THROWS_AS(sample_segments(none, cfg, rng), Error);
}

TEST_CASE("segment sampling: equal-length trajectories drawn 50/50") {
  CpcConfig cfg = small_config();
  cfg.batch = 2;
  TrajectorySet set = ramp_trajectories(2, 16);
  // tag trajectory identity in the first observation coordinate
  set.items[0].observations[0].data[0] = 100.0;
  set.items[1].observations[0].data[0] = 200.0;
  for (auto& traj : set.items)
    for (size_t s = 1; s < traj.observations.size(); ++s)
      traj.observations[s].data[0] = traj.observations[0].data[0];

  Rng rng(7);
  int64_t first = 0, total = 0;
  for (int rep = 0; rep < 5000; ++rep) {
    SegmentBatch b = sample_segments(set, cfg, rng);
    for (int64_t i = 0; i < cfg.batch; ++i) {
      double v = b.states.data[static_cast<size_t>(i * 3)];
      if (v == 100.0) ++first;
      ++total;
    }
  }
  double frac = static_cast<double>(first) / static_cast<double>(total);
  CHECK(frac > 0.48);
  CHECK(frac < 0.52);
}

TEST_CASE("infonce gradient matches finite differences on a toy batch") {
  CpcConfig cfg = small_config();  // B=4, n=3, K=2
  Rng rng(21);
  TrajectorySet set = ramp_trajectories(3, 10);
  EncoderModel model = EncoderModel::create(cfg, set.observation_shape, false, rng);
  SegmentBatch batch = sample_segments(set, cfg, rng);

  auto loss_fn = [&](Tape& t, const Tape::NamedVars& vars) {
    return infonce_loss_graph(t, vars, model, batch);
  };
  Rng check_rng(2);
  GradCheckReport rep = finite_diff_check(loss_fn, model.params, 1e-4, check_rng, 150);
  CHECK_MESSAGE(rep.passed, "worst ", rep.worst_param, "[", rep.worst_index, "] analytic ",
                rep.worst_analytic, " numeric ", rep.worst_numeric, " rel ", rep.max_rel_error);
}

TEST_CASE("loss is invariant to permuting segments within the batch") {
  CpcConfig cfg = small_config();
  Rng rng(13);
  TrajectorySet set = ramp_trajectories(4, 12);
  EncoderModel model = EncoderModel::create(cfg, set.observation_shape, false, rng);
  SegmentBatch batch = sample_segments(set, cfg, rng);

  // permute segment slots within each time block
  std::vector<int64_t> perm = {2, 0, 3, 1};
  SegmentBatch permuted = batch;
  int64_t span = cfg.context_len + cfg.predict_len;
  int64_t dim = 3;
  for (int64_t t = 0; t < span; ++t)
    for (int64_t i = 0; i < cfg.batch; ++i)
      for (int64_t d = 0; d < dim; ++d)
        permuted.states.data[static_cast<size_t>((t * cfg.batch + i) * dim + d)] =
            batch.states.data[static_cast<size_t>((t * cfg.batch + perm[static_cast<size_t>(i)]) * dim + d)];

  double a = infonce_loss(model, batch);
  double b = infonce_loss(model, permuted);
  CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("encode_state: purity, zero model, context ordering") {
  CpcConfig cfg = small_config();
  Rng rng(17);
  TrajectorySet set = ramp_trajectories(2, 12);
  EncoderModel model = EncoderModel::create(cfg, set.observation_shape, false, rng);

  Tensor obs = set.items[0].observations[3];
  Tensor z1 = model.encode(obs);
  Tensor z2 = model.encode(obs);
  CHECK(z1.data == z2.data);
  CHECK(z1.size() == cfg.embed_dim);

  EncoderModel zero = EncoderModel::create(cfg, set.observation_shape, false, rng);
  for (auto& [name, t] : zero.params.items()) std::fill(t.data.begin(), t.data.end(), 0.0);
  Tensor z0 = zero.encode(obs);
  for (double v : z0.data) CHECK(v == 0.0);
  Tensor c0 = zero.encode_context({obs, obs, obs});
  CHECK(c0.size() == cfg.context_dim);
  for (double v : c0.data) CHECK(v == 0.0);

  CHECK_THROWS_AS(model.encode_context({obs}), Error);  // wrong length
  CHECK_THROWS_AS(model.encode(Tensor::vector({1.0})), Error);
}

TEST_CASE("train_cpc: loss decreases on a learnable toy problem") {
  CpcConfig cfg;
  cfg.context_len = 4;
  cfg.predict_len = 2;
  cfg.batch = 8;
  cfg.epochs = 3;
  cfg.embed_dim = 8;
  cfg.context_dim = 12;
  Rng rng(29);
  TrajectorySet set = ramp_trajectories(10, 40);
  CpcTrainResult result = train_cpc(set, cfg, rng);

  size_t n = result.loss_history.size();
  REQUIRE(n == static_cast<size_t>(result.batches_per_epoch * cfg.epochs));
  size_t tenth = std::max<size_t>(1, n / 10);
  double head = 0.0, tail = 0.0;
  for (size_t i = 0; i < tenth; ++i) head += result.loss_history[i];
  for (size_t i = n - tenth; i < n; ++i) tail += result.loss_history[i];
  CHECK(tail / static_cast<double>(tenth) < head / static_cast<double>(tenth));
}

TEST_CASE("encoder model save/load round-trip") {
  CpcConfig cfg = small_config();
  Rng rng(37);
  TrajectorySet set = ramp_trajectories(2, 12);
  EncoderModel model = EncoderModel::create(cfg, set.observation_shape, false, rng);

  auto dir = std::filesystem::temp_directory_path() / "pshape_test_cpc";
  std::filesystem::create_directories(dir);
  model.save(dir / "enc.pshape");
  EncoderModel loaded = EncoderModel::load(dir / "enc.pshape");
  CHECK(loaded.cfg.context_len == cfg.context_len);
  CHECK(loaded.kind == EncoderKind::Mlp);

  Tensor obs = set.items[0].observations[5];
  CHECK(loaded.encode(obs).data == model.encode(obs).data);

  loaded.save(dir / "enc2.pshape");
  std::ifstream fa(dir / "enc.pshape", std::ios::binary), fb(dir / "enc2.pshape", std::ios::binary);
  std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  CHECK(sa == sb);
}

TEST_CASE("conv encoder is selected for image trajectories") {
  CpcConfig cfg = small_config();
  Rng rng(41);
  EncoderModel model = EncoderModel::create(cfg, {32, 32, 3}, true, rng);
  CHECK(model.kind == EncoderKind::Conv);
  Tensor img = Tensor::zeros({32, 32, 3});
  for (double& v : img.data) v = rng.uniform(0, 1);
  CHECK(model.encode(img).size() == cfg.embed_dim);
}
