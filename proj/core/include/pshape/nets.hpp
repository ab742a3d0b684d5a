#pragma once

#include <string>
#include <vector>

#include "pshape/params.hpp"
#include "pshape/rng.hpp"
#include "pshape/tape.hpp"

namespace pshape {

// Fixed architectures. Every net exists in two forms that share parameters:
// a raw forward (plain tensors, used for inference/rollouts) and a tape
// forward (used inside training loops, so gradients flow).

struct MlpSpec {
  int64_t in = 0;
  int64_t hidden = 64;
  int64_t out = 64;
  bool tanh_hidden = true;   // tests may disable to get a pure linear stack

  Json to_json() const;
  static MlpSpec from_json(const Json& j);
};

void add_mlp_params(ParameterSet& ps, const std::string& prefix, const MlpSpec& spec, Rng& rng);

// input: [in] or [N,in]; output matches ([out] or [N,out]).
Tensor mlp_forward(const ParameterSet& ps, const std::string& prefix, const MlpSpec& spec,
                   const Tensor& input);
Tape::Var mlp_forward(Tape& tape, const Tape::NamedVars& vars, const std::string& prefix,
                      const MlpSpec& spec, Tape::Var input);

// Two stride-2 convolutions with tanh, flattened, then a linear projection.
struct ConvSpec {
  int64_t height = 32;
  int64_t width = 32;
  int64_t channels = 3;
  int64_t filters1 = 8;
  int64_t filters2 = 16;
  int64_t kernel = 3;
  int stride = 2;
  int64_t out = 64;

  int64_t out1_h() const { return (height - kernel) / stride + 1; }
  int64_t out1_w() const { return (width - kernel) / stride + 1; }
  int64_t out2_h() const { return (out1_h() - kernel) / stride + 1; }
  int64_t out2_w() const { return (out1_w() - kernel) / stride + 1; }
  int64_t flat_size() const { return out2_h() * out2_w() * filters2; }

  Json to_json() const;
  static ConvSpec from_json(const Json& j);
};

void add_conv_params(ParameterSet& ps, const std::string& prefix, const ConvSpec& spec, Rng& rng);

// image: [H,W,C] or [N,H,W,C]; output [out] or [N,out].
Tensor conv_forward(const ParameterSet& ps, const std::string& prefix, const ConvSpec& spec,
                    const Tensor& image);
Tape::Var conv_forward(Tape& tape, const Tape::NamedVars& vars, const std::string& prefix,
                       const ConvSpec& spec, Tape::Var images);

// Standard GRU cell (update gate z, reset gate r, candidate n):
//   z = sigmoid(x Wxz + h Whz + bz)
//   r = sigmoid(x Wxr + h Whr + br)
//   n = tanh(x Wxn + bxn + r . (h Whn + bhn))
//   h' = (1 - z) . n + z . h
struct GruSpec {
  int64_t in = 0;
  int64_t hidden = 256;

  Json to_json() const;
  static GruSpec from_json(const Json& j);
};

void add_gru_params(ParameterSet& ps, const std::string& prefix, const GruSpec& spec, Rng& rng);

// Runs the cell over a sequence from a zero hidden state; returns the final
// hidden state. Errors on an empty sequence.
Tensor gru_forward(const ParameterSet& ps, const std::string& prefix, const GruSpec& spec,
                   const std::vector<Tensor>& inputs);

// Batched tape version: step_inputs[t] is [B,in]; returns [B,hidden].
Tape::Var gru_forward(Tape& tape, const Tape::NamedVars& vars, const std::string& prefix,
                      const GruSpec& spec, const std::vector<Tape::Var>& step_inputs);

}  // namespace pshape
