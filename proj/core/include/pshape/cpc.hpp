#pragma once

#include <filesystem>
#include <optional>

#include "pshape/nets.hpp"
#include "pshape/trajectory.hpp"

namespace pshape {

struct CpcConfig {
  int64_t context_len = 10;   // states summarized by the GRU
  int64_t predict_len = 10;   // offsets scored ahead of the context
  int64_t batch = 32;         // segments per batch; candidates per softmax
  int64_t epochs = 2;
  double lr = 1e-3;
  int64_t embed_dim = 64;
  int64_t context_dim = 256;
  std::string negatives = "in-batch";
  std::string encoder = "auto";  // auto | mlp | conv

  void validate() const;
  Json to_json() const;
  static CpcConfig from_json(const Json& j);
};

enum class EncoderKind { Mlp, Conv };

// Encoder + context GRU + per-offset bilinear score matrices W_1..W_K.
// The score of candidate z against context c at offset k is z W_k c.
struct EncoderModel {
  CpcConfig cfg;
  EncoderKind kind = EncoderKind::Mlp;
  std::vector<int64_t> input_shape;
  MlpSpec mlp;    // kind == Mlp
  ConvSpec conv;  // kind == Conv
  GruSpec gru;
  ParameterSet params;  // enc.*, gru.*, score.w1..wK

  static EncoderModel create(const CpcConfig& cfg, const std::vector<int64_t>& input_shape,
                             bool image_input, Rng& rng);

  // Deterministic embedding of one observation -> [embed_dim].
  Tensor encode(const Tensor& observation) const;
  // Batch of observations stacked along dim 0 -> [N, embed_dim].
  Tensor encode_batch(const Tensor& stacked) const;
  // GRU summary of exactly cfg.context_len observations -> [context_dim].
  Tensor encode_context(const std::vector<Tensor>& observations) const;

  const Tensor& score_w(int64_t k) const;  // k in [1, predict_len]

  void save(const std::filesystem::path& path) const;
  static EncoderModel load(const std::filesystem::path& path);
};

// B segments of n + K consecutive states, stacked time-major: row t*B + i is
// time t of segment i. Times 0..n-1 feed the GRU; time n+k-1 holds the
// offset-k targets.
struct SegmentBatch {
  Tensor states;  // [B*(n+K), obs...] flattened rows for mlp, [B*(n+K),H,W,C] for conv
  int64_t batch = 0;
  int64_t context_len = 0;
  int64_t predict_len = 0;
};

struct SegmentSampleStats {
  int64_t eligible = 0;
  int64_t skipped_short = 0;  // trajectories with fewer than n + K states
};

SegmentBatch sample_segments(const TrajectorySet& set, const CpcConfig& cfg, Rng& rng,
                             SegmentSampleStats* stats = nullptr);

// Mean softmax cross-entropy over (segment, offset) pairs with in-batch
// negatives; the negative of the predictive-information bound up to log B.
double infonce_loss(const EncoderModel& model, const SegmentBatch& batch);
Tape::Var infonce_loss_graph(Tape& tape, const Tape::NamedVars& vars, const EncoderModel& model,
                             const SegmentBatch& batch);

struct CpcTrainResult {
  EncoderModel model;
  std::vector<double> loss_history;  // one entry per batch
  int64_t batches_per_epoch = 0;
  int64_t skipped_short = 0;
};

CpcTrainResult train_cpc(const TrajectorySet& set, const CpcConfig& cfg, Rng& rng,
                         bool verbose = false);

}  // namespace pshape
