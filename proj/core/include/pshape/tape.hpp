#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "pshape/params.hpp"
#include "pshape/tensor.hpp"

namespace pshape {

// Reverse-mode tape. Operations append nodes holding their forward value and
// a backward closure; backward() replays the list in reverse, which is a
// valid topological order because nodes only ever reference earlier nodes.
//
// The op set is deliberately small: exactly what the fixed architectures
// (MLP, strided conv, GRU, bilinear scores, PPO losses) need.
class Tape {
 public:
  struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
  };

  // Leaves.
  Var input(Tensor value);             // constant, no gradient
  Var param(const Tensor& value);      // differentiable leaf (copies)

  // Linear algebra on matrices.
  Var matmul(Var a, Var b);            // [m,k] x [k,n]
  Var matmul_nt(Var a, Var b);         // a * b^T : [m,k] x [n,k] -> [m,n]
  Var add(Var a, Var b);               // same shape
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);               // elementwise
  Var add_rowvec(Var m, Var v);        // broadcast [1,n] or [n] over rows of [m,n]
  Var scale(Var a, double c);
  Var add_const(Var a, double c);

  // Elementwise nonlinearities.
  Var tanh_(Var a);
  Var sigmoid_(Var a);
  Var exp_(Var a);
  Var square(Var a);
  Var minimum(Var a, Var b);           // ties route the gradient to a
  Var maximum(Var a, Var b);
  Var clamp_(Var a, double lo, double hi);

  // Reductions / structure.
  Var sum_all(Var a);                  // -> [1]
  Var mean_all(Var a);                 // -> [1]
  Var slice_rows(Var m, int64_t row0, int64_t nrows);
  Var reshape(Var a, std::vector<int64_t> new_shape);

  // Two 3x3-style convolutions live behind this one fused node.
  // images [N,H,W,C], kernel [kh,kw,Cin,Cout], bias [Cout] -> [N,Ho,Wo,Cout]
  Var conv2d(Var images, Var kernel, Var bias, int stride);

  // Fused losses / heads.
  // logits [B,B], target of row i is column i; returns mean cross-entropy.
  Var xent_rows_diag(Var logits);
  // logits [B,A]; returns [B,1] log pi(a_i | row i).
  Var categorical_logprob(Var logits, std::vector<int> actions);
  // logits [B,A]; returns [B,1] entropy per row.
  Var categorical_entropy(Var logits);
  // mean [B,A], log_std [1,A], actions [B,A]; returns [B,1] log density.
  Var gaussian_logprob(Var mean, Var log_std, Tensor actions);
  // log_std [1,A]; returns [1] differential entropy (state-independent).
  Var gaussian_entropy(Var log_std);

  // Parameter bookkeeping.
  struct NamedVars {
    std::vector<std::pair<std::string, Var>> vars;
    Var at(const std::string& name) const;
  };
  NamedVars params(const ParameterSet& ps);
  // Gradient for every registered parameter; zeros where the loss never
  // touched the parameter.
  ParameterSet gradients(const NamedVars& vars) const;

  void backward(Var loss);

  const Tensor& value(Var v) const;
  const Tensor& grad(Var v) const;
  bool has_grad(Var v) const;
  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;                        // empty until first contribution
    bool requires_grad = false;
    std::function<void(Tape&)> backward;
  };

  Var push(Tensor value, bool requires_grad, std::function<void(Tape&)> backward);
  Tensor& grad_ref(int id);             // allocates zeros on first touch
  void accumulate_available(int id);    // marks grad allocated
  bool needs_grad(int id) const { return nodes_[static_cast<size_t>(id)].requires_grad; }

  std::vector<Node> nodes_;
};

}  // namespace pshape
