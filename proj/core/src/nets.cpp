#include "pshape/nets.hpp"

#include <cmath>

#include "pshape/linalg.hpp"

namespace pshape {

namespace {

// Accepts [d] or [N,d]; returns a [N,d] matrix copy and remembers whether the
// caller passed a bare vector.
Tensor as_batch(const Tensor& t, int64_t expect_dim, const char* what, bool& was_vector) {
  if (t.rank() == 1) {
    check(t.size() == expect_dim, what, ": expected input of size ", expect_dim, ", got ",
          shape_str(t.shape));
    was_vector = true;
    return t.reshaped({1, expect_dim});
  }
  check(t.rank() == 2 && t.cols() == expect_dim, what, ": expected shape (N, ", expect_dim,
        "), got ", shape_str(t.shape));
  was_vector = false;
  return t;
}

Tensor maybe_squeeze(Tensor t, bool was_vector) {
  if (was_vector) return t.reshaped({t.cols()});
  return t;
}

}  // namespace

Json MlpSpec::to_json() const {
  return Json{{"type", "mlp"}, {"in", in}, {"hidden", hidden}, {"out", out},
              {"tanh_hidden", tanh_hidden}};
}

MlpSpec MlpSpec::from_json(const Json& j) {
  MlpSpec s;
  s.in = j.at("in").get<int64_t>();
  s.hidden = j.at("hidden").get<int64_t>();
  s.out = j.at("out").get<int64_t>();
  s.tanh_hidden = j.value("tanh_hidden", true);
  return s;
}

void add_mlp_params(ParameterSet& ps, const std::string& prefix, const MlpSpec& spec, Rng& rng) {
  ps.add(prefix + ".fc1.w", glorot_uniform({spec.in, spec.hidden}, spec.in, spec.hidden, rng));
  ps.add(prefix + ".fc1.b", Tensor::zeros({spec.hidden}));
  ps.add(prefix + ".fc2.w", glorot_uniform({spec.hidden, spec.out}, spec.hidden, spec.out, rng));
  ps.add(prefix + ".fc2.b", Tensor::zeros({spec.out}));
}

Tensor mlp_forward(const ParameterSet& ps, const std::string& prefix, const MlpSpec& spec,
                   const Tensor& input) {
  bool was_vector = false;
  Tensor x = as_batch(input, spec.in, "mlp_forward", was_vector);
  const Tensor& w1 = ps.at(prefix + ".fc1.w");
  const Tensor& b1 = ps.at(prefix + ".fc1.b");
  const Tensor& w2 = ps.at(prefix + ".fc2.w");
  const Tensor& b2 = ps.at(prefix + ".fc2.b");

  Tensor h = Tensor::zeros({x.rows(), spec.hidden});
  mat(h).noalias() = mat(x) * mat_as(w1, spec.in, spec.hidden);
  mat(h).rowwise() += vec(b1).transpose();
  if (spec.tanh_hidden)
    for (double& v : h.data) v = std::tanh(v);

  Tensor y = Tensor::zeros({x.rows(), spec.out});
  mat(y).noalias() = mat(h) * mat_as(w2, spec.hidden, spec.out);
  mat(y).rowwise() += vec(b2).transpose();
  return maybe_squeeze(std::move(y), was_vector);
}

Tape::Var mlp_forward(Tape& tape, const Tape::NamedVars& vars, const std::string& prefix,
                      const MlpSpec& spec, Tape::Var input) {
  Tape::Var h = tape.add_rowvec(tape.matmul(input, vars.at(prefix + ".fc1.w")),
                                vars.at(prefix + ".fc1.b"));
  if (spec.tanh_hidden) h = tape.tanh_(h);
  return tape.add_rowvec(tape.matmul(h, vars.at(prefix + ".fc2.w")), vars.at(prefix + ".fc2.b"));
}

Json ConvSpec::to_json() const {
  return Json{{"type", "conv"},   {"height", height},     {"width", width},
              {"channels", channels}, {"filters1", filters1}, {"filters2", filters2},
              {"kernel", kernel}, {"stride", stride},     {"out", out}};
}

ConvSpec ConvSpec::from_json(const Json& j) {
  ConvSpec s;
  s.height = j.at("height").get<int64_t>();
  s.width = j.at("width").get<int64_t>();
  s.channels = j.at("channels").get<int64_t>();
  s.filters1 = j.at("filters1").get<int64_t>();
  s.filters2 = j.at("filters2").get<int64_t>();
  s.kernel = j.at("kernel").get<int64_t>();
  s.stride = j.at("stride").get<int>();
  s.out = j.at("out").get<int64_t>();
  return s;
}

void add_conv_params(ParameterSet& ps, const std::string& prefix, const ConvSpec& spec, Rng& rng) {
  int64_t k = spec.kernel;
  int64_t fan1_in = k * k * spec.channels, fan1_out = k * k * spec.filters1;
  int64_t fan2_in = k * k * spec.filters1, fan2_out = k * k * spec.filters2;
  ps.add(prefix + ".conv1.k",
         glorot_uniform({k, k, spec.channels, spec.filters1}, fan1_in, fan1_out, rng));
  ps.add(prefix + ".conv1.b", Tensor::zeros({spec.filters1}));
  ps.add(prefix + ".conv2.k",
         glorot_uniform({k, k, spec.filters1, spec.filters2}, fan2_in, fan2_out, rng));
  ps.add(prefix + ".conv2.b", Tensor::zeros({spec.filters2}));
  ps.add(prefix + ".proj.w",
         glorot_uniform({spec.flat_size(), spec.out}, spec.flat_size(), spec.out, rng));
  ps.add(prefix + ".proj.b", Tensor::zeros({spec.out}));
}

namespace {

// Shared conv kernel for the raw path.
Tensor conv_apply(const Tensor& in, const Tensor& kernel, const Tensor& bias, int stride) {
  int64_t N = in.shape[0], H = in.shape[1], W = in.shape[2], C = in.shape[3];
  int64_t kh = kernel.shape[0], kw = kernel.shape[1], co = kernel.shape[3];
  int64_t ho = (H - kh) / stride + 1;
  int64_t wo = (W - kw) / stride + 1;
  Tensor out = Tensor::zeros({N, ho, wo, co});
  auto iidx = [&](int64_t n, int64_t y, int64_t x, int64_t c) {
    return ((n * H + y) * W + x) * C + c;
  };
  auto kidx = [&](int64_t ky, int64_t kx, int64_t c, int64_t f) {
    return ((ky * kw + kx) * C + c) * co + f;
  };
  auto oidx = [&](int64_t n, int64_t y, int64_t x, int64_t f) {
    return ((n * ho + y) * wo + x) * co + f;
  };
  for (int64_t n = 0; n < N; ++n)
    for (int64_t oy = 0; oy < ho; ++oy)
      for (int64_t ox = 0; ox < wo; ++ox)
        for (int64_t f = 0; f < co; ++f) {
          double acc = bias.data[static_cast<size_t>(f)];
          for (int64_t ky = 0; ky < kh; ++ky)
            for (int64_t kx = 0; kx < kw; ++kx)
              for (int64_t c = 0; c < C; ++c)
                acc += in.data[static_cast<size_t>(iidx(n, oy * stride + ky, ox * stride + kx, c))] *
                       kernel.data[static_cast<size_t>(kidx(ky, kx, c, f))];
          out.data[static_cast<size_t>(oidx(n, oy, ox, f))] = acc;
        }
  return out;
}

}  // namespace

Tensor conv_forward(const ParameterSet& ps, const std::string& prefix, const ConvSpec& spec,
                    const Tensor& image) {
  bool was_vector = image.rank() == 3;
  Tensor batch;
  if (was_vector) {
    check(image.shape[0] == spec.height && image.shape[1] == spec.width &&
              image.shape[2] == spec.channels,
          "conv_forward: expected image ", spec.height, "x", spec.width, "x", spec.channels,
          ", got ", shape_str(image.shape));
    batch = image.reshaped({1, spec.height, spec.width, spec.channels});
  } else {
    check(image.rank() == 4 && image.shape[1] == spec.height && image.shape[2] == spec.width &&
              image.shape[3] == spec.channels,
          "conv_forward: expected images (N, ", spec.height, ", ", spec.width, ", ",
          spec.channels, "), got ", shape_str(image.shape));
    batch = image;
  }
  check(spec.height >= spec.kernel && spec.width >= spec.kernel,
        "conv_forward: image smaller than the receptive field");

  Tensor h1 = conv_apply(batch, ps.at(prefix + ".conv1.k"), ps.at(prefix + ".conv1.b"),
                         spec.stride);
  for (double& v : h1.data) v = std::tanh(v);
  Tensor h2 = conv_apply(h1, ps.at(prefix + ".conv2.k"), ps.at(prefix + ".conv2.b"), spec.stride);
  for (double& v : h2.data) v = std::tanh(v);

  int64_t n = batch.shape[0];
  Tensor flat = h2.reshaped({n, spec.flat_size()});
  Tensor y = Tensor::zeros({n, spec.out});
  mat(y).noalias() = mat(flat) * mat_as(ps.at(prefix + ".proj.w"), spec.flat_size(), spec.out);
  mat(y).rowwise() += vec(ps.at(prefix + ".proj.b")).transpose();
  if (was_vector) return y.reshaped({spec.out});
  return y;
}

Tape::Var conv_forward(Tape& tape, const Tape::NamedVars& vars, const std::string& prefix,
                       const ConvSpec& spec, Tape::Var images) {
  Tape::Var h1 = tape.tanh_(tape.conv2d(images, vars.at(prefix + ".conv1.k"),
                                        vars.at(prefix + ".conv1.b"), spec.stride));
  Tape::Var h2 = tape.tanh_(tape.conv2d(h1, vars.at(prefix + ".conv2.k"),
                                        vars.at(prefix + ".conv2.b"), spec.stride));
  int64_t n = tape.value(h2).shape[0];
  Tape::Var flat = tape.reshape(h2, {n, spec.flat_size()});
  return tape.add_rowvec(tape.matmul(flat, vars.at(prefix + ".proj.w")),
                         vars.at(prefix + ".proj.b"));
}

Json GruSpec::to_json() const { return Json{{"type", "gru"}, {"in", in}, {"hidden", hidden}}; }

GruSpec GruSpec::from_json(const Json& j) {
  GruSpec s;
  s.in = j.at("in").get<int64_t>();
  s.hidden = j.at("hidden").get<int64_t>();
  return s;
}

void add_gru_params(ParameterSet& ps, const std::string& prefix, const GruSpec& spec, Rng& rng) {
  int64_t in = spec.in, h = spec.hidden;
  for (const char* gate : {"z", "r"}) {
    ps.add(prefix + ".wx" + gate, glorot_uniform({in, h}, in, h, rng));
    ps.add(prefix + ".wh" + gate, glorot_uniform({h, h}, h, h, rng));
    ps.add(prefix + ".b" + gate, Tensor::zeros({h}));
  }
  ps.add(prefix + ".wxn", glorot_uniform({in, h}, in, h, rng));
  ps.add(prefix + ".bxn", Tensor::zeros({h}));
  ps.add(prefix + ".whn", glorot_uniform({h, h}, h, h, rng));
  ps.add(prefix + ".bhn", Tensor::zeros({h}));
}

Tensor gru_forward(const ParameterSet& ps, const std::string& prefix, const GruSpec& spec,
                   const std::vector<Tensor>& inputs) {
  check(!inputs.empty(), "gru_forward: empty input sequence");
  int64_t in = spec.in, hs = spec.hidden;
  auto W = [&](const std::string& n) { return mat_as(ps.at(prefix + "." + n), in, hs); };
  auto U = [&](const std::string& n) { return mat_as(ps.at(prefix + "." + n), hs, hs); };
  auto b = [&](const std::string& n) { return vec(ps.at(prefix + "." + n)); };

  Eigen::VectorXd h = Eigen::VectorXd::Zero(hs);
  Eigen::VectorXd z(hs), r(hs), n(hs), hn(hs);
  for (const Tensor& xt : inputs) {
    check(xt.size() == in, "gru_forward: expected input of size ", in, ", got ",
          shape_str(xt.shape));
    auto x = vec(xt);
    z = (W("wxz").transpose() * x + U("whz").transpose() * h + b("bz")).unaryExpr(
        [](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    r = (W("wxr").transpose() * x + U("whr").transpose() * h + b("br")).unaryExpr(
        [](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    hn = U("whn").transpose() * h + b("bhn");
    n = (W("wxn").transpose() * x + b("bxn") + r.cwiseProduct(hn)).array().tanh();
    h = (1.0 - z.array()) * n.array() + z.array() * h.array();
  }
  Tensor out = Tensor::zeros({hs});
  vec(out) = h;
  return out;
}

Tape::Var gru_forward(Tape& tape, const Tape::NamedVars& vars, const std::string& prefix,
                      const GruSpec& spec, const std::vector<Tape::Var>& step_inputs) {
  check(!step_inputs.empty(), "gru_forward: empty input sequence");
  int64_t batch = tape.value(step_inputs.front()).rows();
  Tape::Var h = tape.input(Tensor::zeros({batch, spec.hidden}));
  auto P = [&](const std::string& n) { return vars.at(prefix + "." + n); };
  for (Tape::Var x : step_inputs) {
    Tape::Var z = tape.sigmoid_(tape.add_rowvec(
        tape.add(tape.matmul(x, P("wxz")), tape.matmul(h, P("whz"))), P("bz")));
    Tape::Var r = tape.sigmoid_(tape.add_rowvec(
        tape.add(tape.matmul(x, P("wxr")), tape.matmul(h, P("whr"))), P("br")));
    Tape::Var hn = tape.add_rowvec(tape.matmul(h, P("whn")), P("bhn"));
    Tape::Var n = tape.tanh_(
        tape.add(tape.add_rowvec(tape.matmul(x, P("wxn")), P("bxn")), tape.mul(r, hn)));
    Tape::Var one_minus_z = tape.add_const(tape.scale(z, -1.0), 1.0);
    h = tape.add(tape.mul(one_minus_z, n), tape.mul(z, h));
  }
  return h;
}

}  // namespace pshape
