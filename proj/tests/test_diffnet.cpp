#include <cmath>

#include "doctest.h"
#include "pshape/adam.hpp"
#include "pshape/gradcheck.hpp"
#include "pshape/nets.hpp"

using namespace pshape;

TEST_CASE("tape: quadratic gradient") {
  // loss = sum(w . w), w = (1, 2) -> grad (2, 4)
  Tape tape;
  Tape::Var w = tape.param(Tensor::vector({1.0, 2.0}));
  Tape::Var loss = tape.sum_all(tape.mul(w, w));
  CHECK(tape.value(loss).scalar_value() == doctest::Approx(5.0));
  tape.backward(loss);
  CHECK(tape.grad(w).data[0] == doctest::Approx(2.0));
  CHECK(tape.grad(w).data[1] == doctest::Approx(4.0));
}

TEST_CASE("tape: constant loss leaves zero gradients") {
  Tape tape;
  Tape::Var w = tape.param(Tensor::vector({1.0, -3.0}));
  Tape::Var loss = tape.sum_all(tape.scale(w, 0.0));
  tape.backward(loss);
  Tape::NamedVars vars;
  vars.vars.emplace_back("w", w);
  ParameterSet grads = tape.gradients(vars);
  CHECK(grads.at("w").data[0] == 0.0);
  CHECK(grads.at("w").data[1] == 0.0);
}

TEST_CASE("tape: non-scalar loss is rejected") {
  Tape tape;
  Tape::Var w = tape.param(Tensor::vector({1.0, 2.0}));
  CHECK_THROWS_AS(tape.backward(w), Error);
}

TEST_CASE("tape: unreached parameters get zero gradients") {
  Tape tape;
  ParameterSet ps;
  ps.add("used", Tensor::vector({2.0}));
  ps.add("unused", Tensor::vector({5.0}));
  Tape::NamedVars vars = tape.params(ps);
  Tape::Var loss = tape.sum_all(tape.square(vars.at("used")));
  tape.backward(loss);
  ParameterSet grads = tape.gradients(vars);
  CHECK(grads.at("used").data[0] == doctest::Approx(4.0));
  CHECK(grads.at("unused").data[0] == 0.0);
}

TEST_CASE("mlp: all-zero parameters map any input to zero") {
  MlpSpec spec{.in = 10, .hidden = 64, .out = 64};
  ParameterSet ps;
  ps.add("enc.fc1.w", Tensor::zeros({10, 64}));
  ps.add("enc.fc1.b", Tensor::zeros({64}));
  ps.add("enc.fc2.w", Tensor::zeros({64, 64}));
  ps.add("enc.fc2.b", Tensor::zeros({64}));
  Rng rng(3);
  Tensor in = Tensor::zeros({10});
  for (double& v : in.data) v = rng.uniform(-1, 1);
  Tensor out = mlp_forward(ps, "enc", spec, in);
  CHECK(out.size() == 64);
  for (double v : out.data) CHECK(v == 0.0);
}

TEST_CASE("mlp: identity blocks with linear hidden pass input through") {
  // 2 -> 2 -> 2 with identity weight matrices, zero bias, tanh disabled
  MlpSpec spec{.in = 2, .hidden = 2, .out = 2, .tanh_hidden = false};
  ParameterSet ps;
  ps.add("m.fc1.w", Tensor::from({2, 2}, {1, 0, 0, 1}));
  ps.add("m.fc1.b", Tensor::zeros({2}));
  ps.add("m.fc2.w", Tensor::from({2, 2}, {1, 0, 0, 1}));
  ps.add("m.fc2.b", Tensor::zeros({2}));
  Tensor out = mlp_forward(ps, "m", spec, Tensor::vector({0.3, -0.7}));
  CHECK(out.data[0] == doctest::Approx(0.3));
  CHECK(out.data[1] == doctest::Approx(-0.7));
}

TEST_CASE("mlp: gridworld-sized input maps to a 64-dim embedding") {
  MlpSpec spec{.in = 867, .hidden = 64, .out = 64};
  Rng rng(11);
  ParameterSet ps;
  add_mlp_params(ps, "enc", spec, rng);
  Tensor in = Tensor::zeros({867});
  in.data[433] = 1.0;
  Tensor out = mlp_forward(ps, "enc", spec, in);
  CHECK(out.size() == 64);
  CHECK(out.all_finite());
}

TEST_CASE("mlp: shape mismatch names expected and actual") {
  MlpSpec spec{.in = 4, .hidden = 8, .out = 8};
  Rng rng(1);
  ParameterSet ps;
  add_mlp_params(ps, "enc", spec, rng);
  try {
    mlp_forward(ps, "enc", spec, Tensor::vector({1, 2, 3}));
    FAIL("expected a shape error");
  } catch (const Error& e) {
    std::string msg = e.what();
    CHECK(msg.find("4") != std::string::npos);
    CHECK(msg.find("3") != std::string::npos);
  }
}

TEST_CASE("mlp: raw and tape forwards agree") {
  MlpSpec spec{.in = 7, .hidden = 64, .out = 64};
  Rng rng(5);
  ParameterSet ps;
  add_mlp_params(ps, "enc", spec, rng);
  Tensor in = Tensor::zeros({3, 7});
  for (double& v : in.data) v = rng.uniform(-1, 1);

  Tensor raw = mlp_forward(ps, "enc", spec, in);
  Tape tape;
  Tape::NamedVars vars = tape.params(ps);
  Tape::Var out = mlp_forward(tape, vars, "enc", spec, tape.input(in));
  for (int64_t i = 0; i < raw.size(); ++i)
    CHECK(raw.data[static_cast<size_t>(i)] ==
          doctest::Approx(tape.value(out).data[static_cast<size_t>(i)]).epsilon(1e-12));
}

TEST_CASE("mlp forward is deterministic") {
  MlpSpec spec{.in = 5, .hidden = 64, .out = 64};
  Rng rng(9);
  ParameterSet ps;
  add_mlp_params(ps, "enc", spec, rng);
  Tensor in = Tensor::vector({0.1, -0.2, 0.3, 0.4, -0.5});
  Tensor a = mlp_forward(ps, "enc", spec, in);
  Tensor b = mlp_forward(ps, "enc", spec, in);
  CHECK(a.data == b.data);  // bit-identical
}

TEST_CASE("conv: zero kernels give a zero embedding") {
  ConvSpec spec;
  ParameterSet ps;
  ps.add("enc.conv1.k", Tensor::zeros({3, 3, 3, 8}));
  ps.add("enc.conv1.b", Tensor::zeros({8}));
  ps.add("enc.conv2.k", Tensor::zeros({3, 3, 8, 16}));
  ps.add("enc.conv2.b", Tensor::zeros({16}));
  ps.add("enc.proj.w", Tensor::zeros({spec.flat_size(), 64}));
  ps.add("enc.proj.b", Tensor::zeros({64}));
  Rng rng(2);
  Tensor img = Tensor::zeros({32, 32, 3});
  for (double& v : img.data) v = rng.uniform(0, 1);
  Tensor out = conv_forward(ps, "enc", spec, img);
  CHECK(out.size() == 64);
  for (double v : out.data) CHECK(v == 0.0);
}

TEST_CASE("conv primitive: center-weight kernel subsamples with stride 2") {
  // single channel, single filter, kernel 1 at the center: out[y][x] = in[2y+1][2x+1]
  Tape tape;
  Tensor img = Tensor::zeros({1, 9, 9, 1});
  Rng rng(4);
  for (double& v : img.data) v = rng.uniform(-1, 1);
  Tensor kernel = Tensor::zeros({3, 3, 1, 1});
  kernel.data[4] = 1.0;  // center of the 3x3
  Tape::Var out = tape.conv2d(tape.input(img), tape.input(kernel),
                              tape.input(Tensor::zeros({1})), 2);
  const Tensor& o = tape.value(out);
  REQUIRE(o.shape == std::vector<int64_t>{1, 4, 4, 1});
  for (int64_t y = 0; y < 4; ++y)
    for (int64_t x = 0; x < 4; ++x)
      CHECK(o.data[static_cast<size_t>(y * 4 + x)] ==
            doctest::Approx(img.data[static_cast<size_t>((2 * y + 1) * 9 + (2 * x + 1))]));
}

TEST_CASE("conv: textured 32x32x3 frame maps to a 64-dim embedding") {
  ConvSpec spec;
  Rng rng(6);
  ParameterSet ps;
  add_conv_params(ps, "enc", spec, rng);
  Tensor img = Tensor::zeros({32, 32, 3});
  for (double& v : img.data) v = rng.uniform(0, 1);
  Tensor out = conv_forward(ps, "enc", spec, img);
  CHECK(out.size() == 64);
  CHECK(out.all_finite());
}

TEST_CASE("conv: image smaller than the receptive field is rejected") {
  ConvSpec spec;
  spec.height = 2;
  spec.width = 2;
  Rng rng(6);
  ParameterSet ps;
  add_conv_params(ps, "enc", spec, rng);
  CHECK_THROWS_AS(conv_forward(ps, "enc", spec, Tensor::zeros({2, 2, 3})), Error);
}

TEST_CASE("gru: zero weights give a zero hidden state") {
  GruSpec spec{.in = 4, .hidden = 6};
  ParameterSet ps;
  for (const char* g : {"z", "r"}) {
    ps.add(std::string("gru.wx") + g, Tensor::zeros({4, 6}));
    ps.add(std::string("gru.wh") + g, Tensor::zeros({6, 6}));
    ps.add(std::string("gru.b") + g, Tensor::zeros({6}));
  }
  ps.add("gru.wxn", Tensor::zeros({4, 6}));
  ps.add("gru.bxn", Tensor::zeros({6}));
  ps.add("gru.whn", Tensor::zeros({6, 6}));
  ps.add("gru.bhn", Tensor::zeros({6}));
  std::vector<Tensor> seq = {Tensor::vector({1, 2, 3, 4}), Tensor::vector({-1, 0, 1, 0})};
  Tensor h = gru_forward(ps, "gru", spec, seq);
  CHECK(h.size() == 6);
  for (double v : h.data) CHECK(v == 0.0);
}

TEST_CASE("gru: one hand-computed step") {
  // 1-d input, 1-d hidden; all weights scalar, h0 = 0:
  //   z = sigmoid(x wxz + bz), r = sigmoid(x wxr + br)
  //   n = tanh(x wxn + bxn + r * (0 * whn + bhn))
  //   h = (1 - z) n
  GruSpec spec{.in = 1, .hidden = 1};
  ParameterSet ps;
  ps.add("gru.wxz", Tensor::from({1, 1}, {0.5}));
  ps.add("gru.whz", Tensor::from({1, 1}, {0.7}));
  ps.add("gru.bz", Tensor::vector({0.1}));
  ps.add("gru.wxr", Tensor::from({1, 1}, {-0.3}));
  ps.add("gru.whr", Tensor::from({1, 1}, {0.2}));
  ps.add("gru.br", Tensor::vector({0.0}));
  ps.add("gru.wxn", Tensor::from({1, 1}, {0.9}));
  ps.add("gru.bxn", Tensor::vector({-0.2}));
  ps.add("gru.whn", Tensor::from({1, 1}, {0.4}));
  ps.add("gru.bhn", Tensor::vector({0.3}));

  double x = 0.8;
  double z = 1.0 / (1.0 + std::exp(-(x * 0.5 + 0.1)));
  double r = 1.0 / (1.0 + std::exp(-(x * -0.3)));
  double n = std::tanh(x * 0.9 - 0.2 + r * 0.3);
  double expected = (1.0 - z) * n;

  Tensor h = gru_forward(ps, "gru", spec, {Tensor::vector({x})});
  CHECK(h.data[0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("gru: 10 embeddings of size 64 summarize to a 256-dim context") {
  GruSpec spec{.in = 64, .hidden = 256};
  Rng rng(13);
  ParameterSet ps;
  add_gru_params(ps, "gru", spec, rng);
  std::vector<Tensor> seq;
  for (int t = 0; t < 10; ++t) {
    Tensor x = Tensor::zeros({64});
    for (double& v : x.data) v = rng.uniform(-1, 1);
    seq.push_back(std::move(x));
  }
  Tensor h = gru_forward(ps, "gru", spec, seq);
  CHECK(h.size() == 256);
  CHECK(h.all_finite());
}

TEST_CASE("gru: empty sequence is rejected") {
  GruSpec spec{.in = 2, .hidden = 3};
  Rng rng(1);
  ParameterSet ps;
  add_gru_params(ps, "gru", spec, rng);
  CHECK_THROWS_AS(gru_forward(ps, "gru", spec, {}), Error);
}

TEST_CASE("gru: raw and batched tape forwards agree") {
  GruSpec spec{.in = 3, .hidden = 5};
  Rng rng(8);
  ParameterSet ps;
  add_gru_params(ps, "gru", spec, rng);

  std::vector<Tensor> seq;
  for (int t = 0; t < 4; ++t) {
    Tensor x = Tensor::zeros({3});
    for (double& v : x.data) v = rng.uniform(-1, 1);
    seq.push_back(std::move(x));
  }
  Tensor raw = gru_forward(ps, "gru", spec, seq);

  Tape tape;
  Tape::NamedVars vars = tape.params(ps);
  std::vector<Tape::Var> steps;
  for (const Tensor& x : seq) steps.push_back(tape.input(x.reshaped({1, 3})));
  Tape::Var h = gru_forward(tape, vars, "gru", spec, steps);
  for (int64_t i = 0; i < 5; ++i)
    CHECK(raw.data[static_cast<size_t>(i)] ==
          doctest::Approx(tape.value(h).data[static_cast<size_t>(i)]).epsilon(1e-12));
}

TEST_CASE("adam: zero gradients leave parameters unchanged") {
  Rng rng(21);
  ParameterSet ps;
  ps.add("w", glorot_uniform({3, 3}, 3, 3, rng));
  ParameterSet before = ps;
  ParameterSet grads;
  grads.add("w", Tensor::zeros({3, 3}));
  Adam adam({.lr = 1e-2});
  adam.step(ps, grads);
  CHECK(ps.at("w").data == before.at("w").data);
}

TEST_CASE("adam: first scalar step has magnitude ~ lr") {
  // bias correction makes the first update lr * g / (|g| + eps')
  ParameterSet ps;
  ps.add("w", Tensor::scalar(1.0));
  ParameterSet grads;
  grads.add("w", Tensor::scalar(0.123));
  Adam adam({.lr = 0.05});
  adam.step(ps, grads);
  CHECK(ps.at("w").data[0] == doctest::Approx(1.0 - 0.05).epsilon(1e-4));

  ParameterSet ps2;
  ps2.add("w", Tensor::scalar(1.0));
  ParameterSet grads2;
  grads2.add("w", Tensor::scalar(-4.0));
  Adam adam2({.lr = 0.05});
  adam2.step(ps2, grads2);
  CHECK(ps2.at("w").data[0] == doctest::Approx(1.0 + 0.05).epsilon(1e-4));
}

TEST_CASE("adam: 100 steps on (w-3)^2 converge") {
  ParameterSet ps;
  ps.add("w", Tensor::scalar(0.0));
  Adam adam({.lr = 0.1});
  double first_loss = 9.0, last_loss = 9.0;
  for (int i = 0; i < 100; ++i) {
    double w = ps.at("w").data[0];
    double loss = (w - 3.0) * (w - 3.0);
    if (i == 0) first_loss = loss;
    last_loss = loss;
    ParameterSet grads;
    grads.add("w", Tensor::scalar(2.0 * (w - 3.0)));
    adam.step(ps, grads);
  }
  CHECK(std::abs(ps.at("w").data[0] - 3.0) < 0.1);
  CHECK(last_loss < first_loss);
}

TEST_CASE("adam: NaN gradient names the parameter") {
  ParameterSet ps;
  ps.add("bad_param", Tensor::scalar(1.0));
  ParameterSet grads;
  grads.add("bad_param", Tensor::scalar(std::nan("")));
  Adam adam({});
  try {
    adam.step(ps, grads);
    FAIL("expected NaN gradient error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("bad_param") != std::string::npos);
  }
}

TEST_CASE("finite_diff_check: quadratic loss below 1e-8") {
  Rng rng(31);
  ParameterSet ps;
  ps.add("w", glorot_uniform({4, 4}, 4, 4, rng));
  auto loss_fn = [](Tape& t, const Tape::NamedVars& vars) {
    return t.sum_all(t.square(vars.at("w")));
  };
  Rng check_rng(1);
  GradCheckReport rep = finite_diff_check(loss_fn, ps, 1e-8, check_rng);
  CHECK(rep.passed);
  CHECK(rep.max_rel_error < 1e-8);
}

TEST_CASE("finite_diff_check: mlp + softmax cross-entropy below 1e-4") {
  MlpSpec spec{.in = 6, .hidden = 8, .out = 5};
  Rng rng(17);
  ParameterSet ps;
  add_mlp_params(ps, "net", spec, rng);
  Tensor x = Tensor::zeros({3, 6});
  for (double& v : x.data) v = rng.uniform(-1, 1);
  std::vector<int> targets = {0, 2, 4};

  auto loss_fn = [&](Tape& t, const Tape::NamedVars& vars) {
    Tape::Var logits = mlp_forward(t, vars, "net", spec, t.input(x));
    Tape::Var logp = t.categorical_logprob(logits, targets);
    return t.scale(t.mean_all(logp), -1.0);
  };
  Rng check_rng(2);
  GradCheckReport rep = finite_diff_check(loss_fn, ps, 1e-4, check_rng);
  CHECK_MESSAGE(rep.passed, "worst ", rep.worst_param, "[", rep.worst_index, "] analytic ",
                rep.worst_analytic, " numeric ", rep.worst_numeric);
}

TEST_CASE("finite_diff_check: gru unrolled 5 steps below 1e-4") {
  GruSpec spec{.in = 3, .hidden = 4};
  Rng rng(19);
  ParameterSet ps;
  add_gru_params(ps, "gru", spec, rng);
  std::vector<Tensor> seq;
  for (int t = 0; t < 5; ++t) {
    Tensor x = Tensor::zeros({2, 3});
    for (double& v : x.data) v = rng.uniform(-1, 1);
    seq.push_back(std::move(x));
  }
  auto loss_fn = [&](Tape& t, const Tape::NamedVars& vars) {
    std::vector<Tape::Var> steps;
    for (const Tensor& x : seq) steps.push_back(t.input(x));
    Tape::Var h = gru_forward(t, vars, "gru", spec, steps);
    return t.sum_all(t.square(h));
  };
  Rng check_rng(3);
  GradCheckReport rep = finite_diff_check(loss_fn, ps, 1e-4, check_rng);
  CHECK_MESSAGE(rep.passed, "worst ", rep.worst_param, "[", rep.worst_index, "] analytic ",
                rep.worst_analytic, " numeric ", rep.worst_numeric);
}

TEST_CASE("finite_diff_check: conv stack below 1e-4") {
  ConvSpec spec;
  spec.height = 8;
  spec.width = 8;
  spec.channels = 2;
  spec.filters1 = 3;
  spec.filters2 = 4;
  spec.out = 5;
  Rng rng(23);
  ParameterSet ps;
  add_conv_params(ps, "enc", spec, rng);
  Tensor img = Tensor::zeros({2, 8, 8, 2});
  for (double& v : img.data) v = rng.uniform(-1, 1);
  auto loss_fn = [&](Tape& t, const Tape::NamedVars& vars) {
    Tape::Var out = conv_forward(t, vars, "enc", spec, t.input(img));
    return t.mean_all(t.square(out));
  };
  Rng check_rng(4);
  GradCheckReport rep = finite_diff_check(loss_fn, ps, 1e-4, check_rng);
  CHECK_MESSAGE(rep.passed, "worst ", rep.worst_param, "[", rep.worst_index, "] analytic ",
                rep.worst_analytic, " numeric ", rep.worst_numeric);
}

TEST_CASE("tape: fused op gradients match finite differences") {
  Rng rng(29);

  SUBCASE("categorical entropy") {
    ParameterSet ps;
    ps.add("logits", glorot_uniform({3, 4}, 3, 4, rng));
    auto loss_fn = [](Tape& t, const Tape::NamedVars& vars) {
      return t.mean_all(t.categorical_entropy(vars.at("logits")));
    };
    Rng check_rng(5);
    CHECK(finite_diff_check(loss_fn, ps, 1e-6, check_rng).passed);
  }

  SUBCASE("gaussian logprob") {
    ParameterSet ps;
    ps.add("mean", glorot_uniform({4, 2}, 4, 2, rng));
    ps.add("logstd", Tensor::from({1, 2}, {0.2, -0.4}));
    Tensor actions = Tensor::zeros({4, 2});
    for (double& v : actions.data) v = rng.uniform(-1, 1);
    auto loss_fn = [&](Tape& t, const Tape::NamedVars& vars) {
      Tape::Var lp = t.gaussian_logprob(vars.at("mean"), vars.at("logstd"), actions);
      return t.mean_all(lp);
    };
    Rng check_rng(6);
    CHECK(finite_diff_check(loss_fn, ps, 1e-6, check_rng).passed);
  }

  SUBCASE("min, max, clamp away from kinks") {
    ParameterSet ps;
    ps.add("a", Tensor::vector({0.3, -0.8, 1.4}));
    ps.add("b", Tensor::vector({-0.2, 0.9, 1.1}));
    auto loss_fn = [](Tape& t, const Tape::NamedVars& vars) {
      Tape::Var m = t.minimum(vars.at("a"), vars.at("b"));
      Tape::Var mx = t.maximum(vars.at("a"), vars.at("b"));
      Tape::Var c = t.clamp_(vars.at("a"), -0.5, 1.0);
      return t.sum_all(t.add(t.add(t.square(m), t.square(mx)), t.square(c)));
    };
    Rng check_rng(7);
    CHECK(finite_diff_check(loss_fn, ps, 1e-6, check_rng).passed);
  }

  SUBCASE("xent_rows_diag") {
    ParameterSet ps;
    ps.add("logits", glorot_uniform({4, 4}, 4, 4, rng));
    auto loss_fn = [](Tape& t, const Tape::NamedVars& vars) {
      return t.xent_rows_diag(vars.at("logits"));
    };
    Rng check_rng(8);
    CHECK(finite_diff_check(loss_fn, ps, 1e-6, check_rng).passed);
  }
}
