#include "pshape/tape.hpp"

#include <cmath>
#include <numbers>

#include "pshape/linalg.hpp"

namespace pshape {

namespace {

// logsumexp of one matrix row, max-shifted.
double row_lse(const Tensor& m, int64_t i) {
  int64_t n = m.cols();
  double mx = m.at(i, 0);
  for (int64_t j = 1; j < n; ++j) mx = std::max(mx, m.at(i, j));
  double s = 0.0;
  for (int64_t j = 0; j < n; ++j) s += std::exp(m.at(i, j) - mx);
  return mx + std::log(s);
}

int64_t idx4(int64_t a, int64_t b, int64_t c, int64_t d, int64_t B, int64_t C, int64_t D) {
  return ((a * B + b) * C + c) * D + d;
}

}  // namespace

Tape::Var Tape::push(Tensor value, bool requires_grad, std::function<void(Tape&)> backward) {
  check(value.all_finite(), "non-finite value produced at tape node ", nodes_.size());
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Tensor& Tape::grad_ref(int id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (n.grad.data.empty()) n.grad = Tensor::zeros(n.value.shape);
  return n.grad;
}

const Tensor& Tape::value(Var v) const {
  check(v.valid() && v.id < static_cast<int>(nodes_.size()), "invalid tape var");
  return nodes_[static_cast<size_t>(v.id)].value;
}

const Tensor& Tape::grad(Var v) const {
  const Node& n = nodes_[static_cast<size_t>(v.id)];
  check(!n.grad.data.empty(), "gradient not computed for tape var ", v.id);
  return n.grad;
}

bool Tape::has_grad(Var v) const {
  return v.valid() && !nodes_[static_cast<size_t>(v.id)].grad.data.empty();
}

Tape::Var Tape::input(Tensor value) { return push(std::move(value), false, nullptr); }

Tape::Var Tape::param(const Tensor& value) { return push(value, true, nullptr); }

Tape::Var Tape::matmul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  check(A.cols() == B.rows(), "matmul shape mismatch: ", shape_str(A.shape), " x ",
        shape_str(B.shape));
  Tensor out = Tensor::zeros({A.rows(), B.cols()});
  mat(out).noalias() = mat(A) * mat(B);
  bool rg = needs_grad(a.id) || needs_grad(b.id);
  int ia = a.id, ib = b.id, io = static_cast<int>(nodes_.size());
  return push(std::move(out), rg, [=](Tape& t) {
    const Tensor& G = t.nodes_[io].grad;
    if (t.needs_grad(ia))
      mat(t.grad_ref(ia)).noalias() += mat(G) * mat(t.nodes_[ib].value).transpose();
    if (t.needs_grad(ib))
      mat(t.grad_ref(ib)).noalias() += mat(t.nodes_[ia].value).transpose() * mat(G);
  });
}

Tape::Var Tape::matmul_nt(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  check(A.cols() == B.cols(), "matmul_nt shape mismatch: ", shape_str(A.shape), " x ",
        shape_str(B.shape), "^T");
  Tensor out = Tensor::zeros({A.rows(), B.rows()});
  mat(out).noalias() = mat(A) * mat(B).transpose();
  bool rg = needs_grad(a.id) || needs_grad(b.id);
  int ia = a.id, ib = b.id, io = static_cast<int>(nodes_.size());
  return push(std::move(out), rg, [=](Tape& t) {
    const Tensor& G = t.nodes_[io].grad;
    if (t.needs_grad(ia)) mat(t.grad_ref(ia)).noalias() += mat(G) * mat(t.nodes_[ib].value);
    if (t.needs_grad(ib))
      mat(t.grad_ref(ib)).noalias() += mat(G).transpose() * mat(t.nodes_[ia].value);
  });
}

Tape::Var Tape::add(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  check(A.same_shape(B), "add shape mismatch: ", shape_str(A.shape), " vs ", shape_str(B.shape));
  Tensor out = A;
  for (int64_t i = 0; i < out.size(); ++i) out.data[static_cast<size_t>(i)] += B.data[static_cast<size_t>(i)];
  bool rg = needs_grad(a.id) || needs_grad(b.id);
  int ia = a.id, ib = b.id, io = static_cast<int>(nodes_.size());
  return push(std::move(out), rg, [=](Tape& t) {
    const Tensor& G = t.nodes_[io].grad;
    if (t.needs_grad(ia)) vec(t.grad_ref(ia)) += vec(G);
    if (t.needs_grad(ib)) vec(t.grad_ref(ib)) += vec(G);
  });
}

Tape::Var Tape::sub(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  check(A.same_shape(B), "sub shape mismatch: ", shape_str(A.shape), " vs ", shape_str(B.shape));
  Tensor out = A;
  for (int64_t i = 0; i < out.size(); ++i) out.data[static_cast<size_t>(i)] -= B.data[static_cast<size_t>(i)];
  bool rg = needs_grad(a.id) || needs_grad(b.id);
  int ia = a.id, ib = b.id, io = static_cast<int>(nodes_.size());
  return push(std::move(out), rg, [=](Tape& t) {
    const Tensor& G = t.nodes_[io].grad;
    if (t.needs_grad(ia)) vec(t.grad_ref(ia)) += vec(G);
    if (t.needs_grad(ib)) vec(t.grad_ref(ib)) -= vec(G);
  });
}

Tape::Var Tape::mul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  check(A.same_shape(B), "mul shape mismatch: ", shape_str(A.shape), " vs ", shape_str(B.shape));
  Tensor out = A;
  for (int64_t i = 0; i < out.size(); ++i) out.data[static_cast<size_t>(i)] *= B.data[static_cast<size_t>(i)];
  bool rg = needs_grad(a.id) || needs_grad(b.id);
  int ia = a.id, ib = b.id, io = static_cast<int>(nodes_.size());
  return push(std::move(out), rg, [=](Tape& t) {
    const Tensor& G = t.nodes_[io].grad;
    if (t.needs_grad(ia))
      vec(t.grad_ref(ia)).array() += vec(G).array() * vec(t.nodes_[ib].value).array();
    if (t.needs_grad(ib))
      vec(t.grad_ref(ib)).array() += vec(G).array() * vec(t.nodes_[ia].value).array();
  });
}

Tape::Var Tape::add_rowvec(Var m, Var v) {
  const Tensor& M = value(m);
  const Tensor& V = value(v);
  check(V.size() == M.cols(), "bias length ", V.size(), " does not match columns of ",
        shape_str(M.shape));
  Tensor out = M;
  for (int64_t r = 0; r < M.rows(); ++r)
    for (int64_t c = 0; c < M.cols(); ++c) out.at(r, c) += V.data[static_cast<size_t>(c)];
  bool rg = needs_grad(m.id) || needs_grad(v.id);
  int im = m.id, iv = v.id, io = static_cast<int>(nodes_.size());
  return push(std::move(out), rg, [=](Tape& t) {
    const Tensor& G = t.nodes_[io].grad;
    if (t.needs_grad(im)) vec(t.grad_ref(im)) += vec(G);
    if (t.needs_grad(iv)) {
      Tensor& gv = t.grad_ref(iv);
      for (int64_t r = 0; r < G.rows(); ++r)
        for (int64_t c = 0; c < G.cols(); ++c) gv.data[static_cast<size_t>(c)] += G.at(r, c);
    }
  });
}

Tape::Var Tape::scale(Var a, double c) {
  Tensor out = value(a);
  for (double& x : out.data) x *= c;
  bool rg = needs_grad(a.id);
  int ia = a.id, io = static_cast<int>(nodes_.size());
  return push(std::move(out), rg, [=](Tape& t) {
    if (t.needs_grad(ia)) vec(t.grad_ref(ia)) += c * vec(t.nodes_[io].grad);
  });
}

Tape::Var Tape::add_const(Var a, double c) {
  Tensor out = value(a);
  for (double& x : out.data) x += c;
  bool rg = needs_grad(a.id);
  int ia = a.id, io = static_cast<int>(nodes_.size());
  return push(std::move(out), rg, [=](Tape& t) {
    if (t.needs_grad(ia)) vec(t.grad_ref(ia)) += vec(t.nodes_[io].grad);
  });
}

Tape::Var Tape::tanh_(Var a) {
  Tensor out = value(a);
  for (double& x : out.data) x = std::tanh(x);
  bool rg = needs_grad(a.id);
  int ia = a.id, io = static_cast<int>(nodes_.size());
  return push(std::move(out), rg, [=](Tape& t) {
    if (!t.needs_grad(ia)) return;
    const Tensor& Y = t.nodes_[io].value;
    const Tensor& G = t.nodes_[io].grad;
    Tensor& gi = t.grad_ref(ia);
    for (int64_t i = 0; i < Y.size(); ++i) {
      double y = Y.data[static_cast<size_t>(i)];
      gi.data[static_cast<size_t>(i)] += G.data[static_cast<size_t>(i)] * (1.0 - y * y);
    }
  });
}

Tape::Var Tape::sigmoid_(Var a) {
  Tensor out = value(a);
  for (double& x : out.data) x = 1.0 / (1.0 + std::exp(-x));
  bool rg = needs_grad(a.id);
  int ia = a.id, io = static_cast<int>(nodes_.size());
  return push(std::move(out), rg, [=](Tape& t) {
    if (!t.needs_grad(ia)) return;
    const Tensor& Y = t.nodes_[io].value;
    const Tensor& G = t.nodes_[io].grad;
    Tensor& gi = t.grad_ref(ia);
    for (int64_t i = 0; i < Y.size(); ++i) {
      double y = Y.data[static_cast<size_t>(i)];
      gi.data[static_cast<size_t>(i)] += G.data[static_cast<size_t>(i)] * y * (1.0 - y);
    }
  });
}

Tape::Var Tape::exp_(Var a) {
  Tensor out = value(a);
  for (double& x : out.data) x = std::exp(x);
  bool rg = needs_grad(a.id);
  int ia = a.id, io = static_cast<int>(nodes_.size());
  return push(std::move(out), rg, [=](Tape& t) {
    if (!t.needs_grad(ia)) return;
    vec(t.grad_ref(ia)).array() +=
        vec(t.nodes_[io].grad).array() * vec(t.nodes_[io].value).array();
  });
}

Tape::Var Tape::square(Var a) {
  Tensor out = value(a);
  for (double& x : out.data) x = x * x;
  bool rg = needs_grad(a.id);
  int ia = a.id, io = static_cast<int>(nodes_.size());
  return push(std::move(out), rg, [=](Tape& t) {
    if (!t.needs_grad(ia)) return;
    vec(t.grad_ref(ia)).array() +=
        2.0 * vec(t.nodes_[io].grad).array() * vec(t.nodes_[ia].value).array();
  });
}

Tape::Var Tape::minimum(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  check(A.same_shape(B), "minimum shape mismatch");
  Tensor out = A;
  for (int64_t i = 0; i < out.size(); ++i)
    out.data[static_cast<size_t>(i)] = std::min(A.data[static_cast<size_t>(i)], B.data[static_cast<size_t>(i)]);
  bool rg = needs_grad(a.id) || needs_grad(b.id);
  int ia = a.id, ib = b.id, io = static_cast<int>(nodes_.size());
  return push(std::move(out), rg, [=](Tape& t) {
    const Tensor& G = t.nodes_[io].grad;
    const Tensor& A2 = t.nodes_[ia].value;
    const Tensor& B2 = t.nodes_[ib].value;
    for (int64_t i = 0; i < G.size(); ++i) {
      size_t s = static_cast<size_t>(i);
      bool take_a = A2.data[s] <= B2.data[s];
      int target = take_a ? ia : ib;
      if (t.needs_grad(target)) t.grad_ref(target).data[s] += G.data[s];
    }
  });
}

Tape::Var Tape::maximum(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  check(A.same_shape(B), "maximum shape mismatch");
  Tensor out = A;
  for (int64_t i = 0; i < out.size(); ++i)
    out.data[static_cast<size_t>(i)] = std::max(A.data[static_cast<size_t>(i)], B.data[static_cast<size_t>(i)]);
  bool rg = needs_grad(a.id) || needs_grad(b.id);
  int ia = a.id, ib = b.id, io = static_cast<int>(nodes_.size());
  return push(std::move(out), rg, [=](Tape& t) {
    const Tensor& G = t.nodes_[io].grad;
    const Tensor& A2 = t.nodes_[ia].value;
    const Tensor& B2 = t.nodes_[ib].value;
    for (int64_t i = 0; i < G.size(); ++i) {
      size_t s = static_cast<size_t>(i);
      bool take_a = A2.data[s] >= B2.data[s];
      int target = take_a ? ia : ib;
      if (t.needs_grad(target)) t.grad_ref(target).data[s] += G.data[s];
    }
  });
}

Tape::Var Tape::clamp_(Var a, double lo, double hi) {
  const Tensor& A = value(a);
  Tensor out = A;
  for (double& x : out.data) x = std::clamp(x, lo, hi);
  bool rg = needs_grad(a.id);
  int ia = a.id, io = static_cast<int>(nodes_.size());
  return push(std::move(out), rg, [=](Tape& t) {
    if (!t.needs_grad(ia)) return;
    const Tensor& G = t.nodes_[io].grad;
    const Tensor& A2 = t.nodes_[ia].value;
    Tensor& gi = t.grad_ref(ia);
    for (int64_t i = 0; i < G.size(); ++i) {
      size_t s = static_cast<size_t>(i);
      if (A2.data[s] > lo && A2.data[s] < hi) gi.data[s] += G.data[s];
    }
  });
}

Tape::Var Tape::sum_all(Var a) {
  const Tensor& A = value(a);
  double s = 0.0;
  for (double x : A.data) s += x;
  bool rg = needs_grad(a.id);
  int ia = a.id, io = static_cast<int>(nodes_.size());
  return push(Tensor::scalar(s), rg, [=](Tape& t) {
    if (!t.needs_grad(ia)) return;
    double g = t.nodes_[io].grad.data[0];
    for (double& x : t.grad_ref(ia).data) x += g;
  });
}

Tape::Var Tape::mean_all(Var a) {
  const Tensor& A = value(a);
  double inv = 1.0 / static_cast<double>(A.size());
  double s = 0.0;
  for (double x : A.data) s += x;
  bool rg = needs_grad(a.id);
  int ia = a.id, io = static_cast<int>(nodes_.size());
  return push(Tensor::scalar(s * inv), rg, [=](Tape& t) {
    if (!t.needs_grad(ia)) return;
    double g = t.nodes_[io].grad.data[0] * inv;
    for (double& x : t.grad_ref(ia).data) x += g;
  });
}

Tape::Var Tape::slice_rows(Var m, int64_t row0, int64_t nrows) {
  const Tensor& M = value(m);
  check(row0 >= 0 && nrows > 0 && row0 + nrows <= M.rows(), "slice_rows [", row0, ", ",
        row0 + nrows, ") out of range for ", shape_str(M.shape));
  int64_t c = M.cols();
  Tensor out = Tensor::zeros({nrows, c});
  std::copy(M.data.begin() + row0 * c, M.data.begin() + (row0 + nrows) * c, out.data.begin());
  bool rg = needs_grad(m.id);
  int im = m.id, io = static_cast<int>(nodes_.size());
  return push(std::move(out), rg, [=](Tape& t) {
    if (!t.needs_grad(im)) return;
    const Tensor& G = t.nodes_[io].grad;
    Tensor& gm = t.grad_ref(im);
    for (int64_t i = 0; i < nrows * c; ++i)
      gm.data[static_cast<size_t>(row0 * c + i)] += G.data[static_cast<size_t>(i)];
  });
}

Tape::Var Tape::reshape(Var a, std::vector<int64_t> new_shape) {
  Tensor out = value(a).reshaped(std::move(new_shape));
  bool rg = needs_grad(a.id);
  int ia = a.id, io = static_cast<int>(nodes_.size());
  return push(std::move(out), rg, [=](Tape& t) {
    if (t.needs_grad(ia)) vec(t.grad_ref(ia)) += vec(t.nodes_[io].grad);
  });
}

Tape::Var Tape::conv2d(Var images, Var kernel, Var bias, int stride) {
  const Tensor& I = value(images);
  const Tensor& K = value(kernel);
  const Tensor& B = value(bias);
  check(I.rank() == 4, "conv2d expects [N,H,W,C] images, got ", shape_str(I.shape));
  check(K.rank() == 4, "conv2d expects [kh,kw,Cin,Cout] kernel, got ", shape_str(K.shape));
  int64_t N = I.shape[0], H = I.shape[1], W = I.shape[2], C = I.shape[3];
  int64_t kh = K.shape[0], kw = K.shape[1], ci = K.shape[2], co = K.shape[3];
  check(ci == C, "conv2d kernel expects ", ci, " input channels, image has ", C);
  check(B.size() == co, "conv2d bias size mismatch");
  check(H >= kh && W >= kw, "image ", shape_str(I.shape), " smaller than kernel receptive field ",
        shape_str(K.shape));
  int64_t ho = (H - kh) / stride + 1;
  int64_t wo = (W - kw) / stride + 1;

  Tensor out = Tensor::zeros({N, ho, wo, co});
  for (int64_t n = 0; n < N; ++n)
    for (int64_t oy = 0; oy < ho; ++oy)
      for (int64_t ox = 0; ox < wo; ++ox)
        for (int64_t f = 0; f < co; ++f) {
          double acc = B.data[static_cast<size_t>(f)];
          for (int64_t ky = 0; ky < kh; ++ky)
            for (int64_t kx = 0; kx < kw; ++kx)
              for (int64_t c = 0; c < C; ++c)
                acc += I.data[static_cast<size_t>(idx4(n, oy * stride + ky, ox * stride + kx, c, H, W, C))] *
                       K.data[static_cast<size_t>(idx4(ky, kx, c, f, kw, ci, co))];
          out.data[static_cast<size_t>(idx4(n, oy, ox, f, ho, wo, co))] = acc;
        }

  bool rg = needs_grad(images.id) || needs_grad(kernel.id) || needs_grad(bias.id);
  int ii = images.id, ik = kernel.id, ib = bias.id, io = static_cast<int>(nodes_.size());
  return push(std::move(out), rg, [=](Tape& t) {
    const Tensor& G = t.nodes_[io].grad;
    const Tensor& I2 = t.nodes_[ii].value;
    const Tensor& K2 = t.nodes_[ik].value;
    bool gi = t.needs_grad(ii), gk = t.needs_grad(ik), gb = t.needs_grad(ib);
    Tensor* gin = gi ? &t.grad_ref(ii) : nullptr;
    Tensor* gker = gk ? &t.grad_ref(ik) : nullptr;
    Tensor* gbias = gb ? &t.grad_ref(ib) : nullptr;
    for (int64_t n = 0; n < N; ++n)
      for (int64_t oy = 0; oy < ho; ++oy)
        for (int64_t ox = 0; ox < wo; ++ox)
          for (int64_t f = 0; f < co; ++f) {
            double g = G.data[static_cast<size_t>(idx4(n, oy, ox, f, ho, wo, co))];
            if (g == 0.0) continue;
            if (gb) gbias->data[static_cast<size_t>(f)] += g;
            for (int64_t ky = 0; ky < kh; ++ky)
              for (int64_t kx = 0; kx < kw; ++kx)
                for (int64_t c = 0; c < C; ++c) {
                  size_t iidx = static_cast<size_t>(
                      idx4(n, oy * stride + ky, ox * stride + kx, c, H, W, C));
                  size_t kidx = static_cast<size_t>(idx4(ky, kx, c, f, kw, ci, co));
                  if (gk) gker->data[kidx] += g * I2.data[iidx];
                  if (gi) gin->data[iidx] += g * K2.data[kidx];
                }
          }
  });
}

Tape::Var Tape::xent_rows_diag(Var logits) {
  const Tensor& L = value(logits);
  check(L.rank() == 2 && L.rows() == L.cols(),
        "xent_rows_diag expects square logits, got ", shape_str(L.shape));
  int64_t B = L.rows();
  check(B >= 2, "contrastive batch needs at least 2 candidates, got ", B);
  double loss = 0.0;
  Tensor P = Tensor::zeros({B, B});
  for (int64_t i = 0; i < B; ++i) {
    double lse = row_lse(L, i);
    loss += lse - L.at(i, i);
    for (int64_t j = 0; j < B; ++j) P.at(i, j) = std::exp(L.at(i, j) - lse);
  }
  loss /= static_cast<double>(B);
  bool rg = needs_grad(logits.id);
  int il = logits.id, io = static_cast<int>(nodes_.size());
  return push(Tensor::scalar(loss), rg, [=, P = std::move(P)](Tape& t) {
    if (!t.needs_grad(il)) return;
    double g = t.nodes_[io].grad.data[0] / static_cast<double>(B);
    Tensor& gl = t.grad_ref(il);
    for (int64_t i = 0; i < B; ++i)
      for (int64_t j = 0; j < B; ++j)
        gl.at(i, j) += g * (P.at(i, j) - (i == j ? 1.0 : 0.0));
  });
}

Tape::Var Tape::categorical_logprob(Var logits, std::vector<int> actions) {
  const Tensor& L = value(logits);
  int64_t B = L.rows(), A = L.cols();
  check(static_cast<int64_t>(actions.size()) == B, "actions length ", actions.size(),
        " does not match batch ", B);
  Tensor out = Tensor::zeros({B, 1});
  Tensor P = Tensor::zeros({B, A});
  for (int64_t i = 0; i < B; ++i) {
    int a = actions[static_cast<size_t>(i)];
    check(a >= 0 && a < A, "action ", a, " out of range [0, ", A, ")");
    double lse = row_lse(L, i);
    out.data[static_cast<size_t>(i)] = L.at(i, a) - lse;
    for (int64_t j = 0; j < A; ++j) P.at(i, j) = std::exp(L.at(i, j) - lse);
  }
  bool rg = needs_grad(logits.id);
  int il = logits.id, io = static_cast<int>(nodes_.size());
  return push(std::move(out), rg,
              [=, P = std::move(P), actions = std::move(actions)](Tape& t) {
                if (!t.needs_grad(il)) return;
                const Tensor& G = t.nodes_[io].grad;
                Tensor& gl = t.grad_ref(il);
                for (int64_t i = 0; i < B; ++i) {
                  double g = G.data[static_cast<size_t>(i)];
                  int a = actions[static_cast<size_t>(i)];
                  for (int64_t j = 0; j < A; ++j)
                    gl.at(i, j) += g * ((j == a ? 1.0 : 0.0) - P.at(i, j));
                }
              });
}

Tape::Var Tape::categorical_entropy(Var logits) {
  const Tensor& L = value(logits);
  int64_t B = L.rows(), A = L.cols();
  Tensor out = Tensor::zeros({B, 1});
  Tensor P = Tensor::zeros({B, A});
  for (int64_t i = 0; i < B; ++i) {
    double lse = row_lse(L, i);
    double h = 0.0;
    for (int64_t j = 0; j < A; ++j) {
      double p = std::exp(L.at(i, j) - lse);
      P.at(i, j) = p;
      if (p > 0.0) h -= p * (L.at(i, j) - lse);
    }
    out.data[static_cast<size_t>(i)] = h;
  }
  bool rg = needs_grad(logits.id);
  int il = logits.id, io = static_cast<int>(nodes_.size());
  // dH/dl_j = -p_j (l_j - sum_k p_k l_k)
  return push(std::move(out), rg, [=, P = std::move(P)](Tape& t) {
    if (!t.needs_grad(il)) return;
    const Tensor& G = t.nodes_[io].grad;
    const Tensor& L2 = t.nodes_[il].value;
    Tensor& gl = t.grad_ref(il);
    for (int64_t i = 0; i < B; ++i) {
      double m = 0.0;
      for (int64_t j = 0; j < A; ++j) m += P.at(i, j) * L2.at(i, j);
      double g = G.data[static_cast<size_t>(i)];
      for (int64_t j = 0; j < A; ++j) gl.at(i, j) += -g * P.at(i, j) * (L2.at(i, j) - m);
    }
  });
}

Tape::Var Tape::gaussian_logprob(Var mean, Var log_std, Tensor actions) {
  const Tensor& M = value(mean);
  const Tensor& S = value(log_std);
  int64_t B = M.rows(), A = M.cols();
  check(S.size() == A, "log_std size ", S.size(), " does not match action dim ", A);
  check(actions.same_shape(M), "actions shape ", shape_str(actions.shape),
        " does not match mean ", shape_str(M.shape));
  constexpr double kLog2Pi = 1.8378770664093454836;
  Tensor out = Tensor::zeros({B, 1});
  for (int64_t i = 0; i < B; ++i) {
    double lp = 0.0;
    for (int64_t j = 0; j < A; ++j) {
      double s = S.data[static_cast<size_t>(j)];
      double z = (actions.at(i, j) - M.at(i, j)) * std::exp(-s);
      lp += -0.5 * z * z - s - 0.5 * kLog2Pi;
    }
    out.data[static_cast<size_t>(i)] = lp;
  }
  bool rg = needs_grad(mean.id) || needs_grad(log_std.id);
  int im = mean.id, is = log_std.id, io = static_cast<int>(nodes_.size());
  return push(std::move(out), rg, [=, actions = std::move(actions)](Tape& t) {
    const Tensor& G = t.nodes_[io].grad;
    const Tensor& M2 = t.nodes_[im].value;
    const Tensor& S2 = t.nodes_[is].value;
    bool gm = t.needs_grad(im), gs = t.needs_grad(is);
    Tensor* gmean = gm ? &t.grad_ref(im) : nullptr;
    Tensor* gstd = gs ? &t.grad_ref(is) : nullptr;
    for (int64_t i = 0; i < B; ++i) {
      double g = G.data[static_cast<size_t>(i)];
      for (int64_t j = 0; j < A; ++j) {
        double s = S2.data[static_cast<size_t>(j)];
        double inv_var = std::exp(-2.0 * s);
        double d = actions.at(i, j) - M2.at(i, j);
        if (gm) gmean->at(i, j) += g * d * inv_var;
        if (gs) gstd->data[static_cast<size_t>(j)] += g * (d * d * inv_var - 1.0);
      }
    }
  });
}

Tape::Var Tape::gaussian_entropy(Var log_std) {
  const Tensor& S = value(log_std);
  constexpr double kHalfLog2PiE = 1.4189385332046727418;
  double h = 0.0;
  for (double s : S.data) h += s + kHalfLog2PiE;
  bool rg = needs_grad(log_std.id);
  int is = log_std.id, io = static_cast<int>(nodes_.size());
  return push(Tensor::scalar(h), rg, [=](Tape& t) {
    if (!t.needs_grad(is)) return;
    double g = t.nodes_[io].grad.data[0];
    for (double& x : t.grad_ref(is).data) x += g;
  });
}

Tape::NamedVars Tape::params(const ParameterSet& ps) {
  NamedVars out;
  out.vars.reserve(ps.count());
  for (const auto& [name, t] : ps.items()) out.vars.emplace_back(name, param(t));
  return out;
}

Tape::Var Tape::NamedVars::at(const std::string& name) const {
  for (const auto& [n, v] : vars)
    if (n == name) return v;
  fail("no tape parameter named \"", name, "\"");
}

ParameterSet Tape::gradients(const NamedVars& vars) const {
  ParameterSet grads;
  for (const auto& [name, v] : vars.vars) {
    const Node& n = nodes_[static_cast<size_t>(v.id)];
    if (n.grad.data.empty())
      grads.add(name, Tensor::zeros(n.value.shape));
    else
      grads.add(name, n.grad);
  }
  return grads;
}

void Tape::backward(Var loss) {
  check(loss.valid() && loss.id < static_cast<int>(nodes_.size()), "invalid loss var");
  Node& ln = nodes_[static_cast<size_t>(loss.id)];
  check(ln.value.size() == 1, "backward requires a scalar loss, got ",
        shape_str(ln.value.shape));
  check(std::isfinite(ln.value.data[0]), "loss is not finite");
  grad_ref(loss.id).data[0] = 1.0;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.data.empty() || !n.backward) continue;
    n.backward(*this);
  }
}

}  // namespace pshape
