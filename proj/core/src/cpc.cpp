#include "pshape/cpc.hpp"

#include <cmath>
#include <iostream>

#include "pshape/adam.hpp"

namespace pshape {

void CpcConfig::validate() const {
  check(context_len >= 1, "cpc: context_len must be >= 1");
  check(predict_len >= 1, "cpc: predict_len must be >= 1");
  check(batch >= 2, "cpc: batch must be >= 2 (each positive needs a negative)");
  check(epochs >= 1, "cpc: epochs must be >= 1");
  check(lr > 0.0, "cpc: lr must be positive");
  check(embed_dim >= 1 && context_dim >= 1, "cpc: embed/context dims must be positive");
  check(negatives == "in-batch", "cpc: unsupported negative-sampling mode \"", negatives, "\"");
  check(encoder == "auto" || encoder == "mlp" || encoder == "conv",
        "cpc: encoder must be auto, mlp or conv");
}

Json CpcConfig::to_json() const {
  return Json{{"context_len", context_len},
              {"predict_len", predict_len},
              {"batch", batch},
              {"epochs", epochs},
              {"lr", lr},
              {"embed_dim", embed_dim},
              {"context_dim", context_dim},
              {"negatives", negatives},
              {"encoder", encoder}};
}

CpcConfig CpcConfig::from_json(const Json& j) {
  reject_unknown_keys(j,
                      {"context_len", "predict_len", "batch", "epochs", "lr", "embed_dim",
                       "context_dim", "negatives", "encoder"},
                      "cpc");
  CpcConfig c;
  c.context_len = field_or<int64_t>(j, "context_len", c.context_len);
  c.predict_len = field_or<int64_t>(j, "predict_len", c.predict_len);
  c.batch = field_or<int64_t>(j, "batch", c.batch);
  c.epochs = field_or<int64_t>(j, "epochs", c.epochs);
  c.lr = field_or<double>(j, "lr", c.lr);
  c.embed_dim = field_or<int64_t>(j, "embed_dim", c.embed_dim);
  c.context_dim = field_or<int64_t>(j, "context_dim", c.context_dim);
  c.negatives = field_or<std::string>(j, "negatives", c.negatives);
  c.encoder = field_or<std::string>(j, "encoder", c.encoder);
  c.validate();
  return c;
}

EncoderModel EncoderModel::create(const CpcConfig& cfg, const std::vector<int64_t>& input_shape,
                                  bool image_input, Rng& rng) {
  cfg.validate();
  EncoderModel m;
  m.cfg = cfg;
  m.input_shape = input_shape;

  bool use_conv = cfg.encoder == "conv" || (cfg.encoder == "auto" && image_input);
  if (use_conv) {
    check(input_shape.size() == 3, "conv encoder needs (H, W, C) observations, got ",
          shape_str(input_shape));
    m.kind = EncoderKind::Conv;
    m.conv.height = input_shape[0];
    m.conv.width = input_shape[1];
    m.conv.channels = input_shape[2];
    m.conv.out = cfg.embed_dim;
    add_conv_params(m.params, "enc", m.conv, rng);
  } else {
    m.kind = EncoderKind::Mlp;
    m.mlp.in = shape_size(input_shape);
    m.mlp.hidden = 64;
    m.mlp.out = cfg.embed_dim;
    add_mlp_params(m.params, "enc", m.mlp, rng);
  }
  m.gru.in = cfg.embed_dim;
  m.gru.hidden = cfg.context_dim;
  add_gru_params(m.params, "gru", m.gru, rng);
  for (int64_t k = 1; k <= cfg.predict_len; ++k)
    m.params.add("score.w" + std::to_string(k),
                 glorot_uniform({cfg.embed_dim, cfg.context_dim}, cfg.embed_dim,
                                cfg.context_dim, rng));

  m.params.layout = Json{{"cpc", cfg.to_json()},
                         {"encoder_kind", use_conv ? "conv" : "mlp"},
                         {"input_shape", input_shape},
                         {"encoder", use_conv ? m.conv.to_json() : m.mlp.to_json()},
                         {"gru", m.gru.to_json()}};
  return m;
}

const Tensor& EncoderModel::score_w(int64_t k) const {
  check(k >= 1 && k <= cfg.predict_len, "score offset ", k, " out of range [1, ",
        cfg.predict_len, "]");
  return params.at("score.w" + std::to_string(k));
}

Tensor EncoderModel::encode(const Tensor& observation) const {
  if (kind == EncoderKind::Mlp) {
    check(observation.size() == mlp.in, "encode: expected observation of size ", mlp.in,
          ", got ", shape_str(observation.shape));
    return mlp_forward(params, "enc", mlp, observation.flattened());
  }
  return conv_forward(params, "enc", conv, observation);
}

Tensor EncoderModel::encode_batch(const Tensor& stacked) const {
  if (kind == EncoderKind::Mlp) return mlp_forward(params, "enc", mlp, stacked);
  return conv_forward(params, "enc", conv, stacked);
}

Tensor EncoderModel::encode_context(const std::vector<Tensor>& observations) const {
  check(static_cast<int64_t>(observations.size()) == cfg.context_len,
        "encode_context: expected ", cfg.context_len, " observations, got ",
        observations.size());
  std::vector<Tensor> embeddings;
  embeddings.reserve(observations.size());
  for (const Tensor& o : observations) embeddings.push_back(encode(o));
  return gru_forward(params, "gru", gru, embeddings);
}

void EncoderModel::save(const std::filesystem::path& path) const {
  save_parameters(path, params, "cpc-encoder");
}

EncoderModel EncoderModel::load(const std::filesystem::path& path) {
  LoadedParameters lp = load_parameters(path, "cpc-encoder");
  EncoderModel m;
  m.params = std::move(lp.params);
  const Json& layout = m.params.layout;
  m.cfg = CpcConfig::from_json(layout.at("cpc"));
  m.input_shape = layout.at("input_shape").get<std::vector<int64_t>>();
  std::string ek = layout.at("encoder_kind").get<std::string>();
  if (ek == "conv") {
    m.kind = EncoderKind::Conv;
    m.conv = ConvSpec::from_json(layout.at("encoder"));
  } else {
    m.kind = EncoderKind::Mlp;
    m.mlp = MlpSpec::from_json(layout.at("encoder"));
  }
  m.gru = GruSpec::from_json(layout.at("gru"));
  return m;
}

SegmentBatch sample_segments(const TrajectorySet& set, const CpcConfig& cfg, Rng& rng,
                             SegmentSampleStats* stats) {
  cfg.validate();
  int64_t span = cfg.context_len + cfg.predict_len;
  std::vector<size_t> eligible;
  for (size_t i = 0; i < set.items.size(); ++i)
    if (set.items[i].state_count() >= span) eligible.push_back(i);
  if (stats) {
    stats->eligible = static_cast<int64_t>(eligible.size());
    stats->skipped_short = static_cast<int64_t>(set.items.size() - eligible.size());
  }
  check(!eligible.empty(), "sample_segments: no trajectory has at least ", span, " states");

  int64_t obs_size = shape_size(set.observation_shape);
  bool image = set.observation_shape.size() == 3;
  SegmentBatch batch;
  batch.batch = cfg.batch;
  batch.context_len = cfg.context_len;
  batch.predict_len = cfg.predict_len;
  if (image)
    batch.states = Tensor::zeros({cfg.batch * span, set.observation_shape[0],
                                  set.observation_shape[1], set.observation_shape[2]});
  else
    batch.states = Tensor::zeros({cfg.batch * span, obs_size});

  for (int64_t i = 0; i < cfg.batch; ++i) {
    const Trajectory& traj =
        set.items[eligible[static_cast<size_t>(rng.uniform_index(static_cast<int64_t>(eligible.size())))]];
    int64_t max_start = traj.state_count() - span;
    int64_t start = max_start == 0 ? 0 : rng.uniform_index(max_start + 1);
    for (int64_t t = 0; t < span; ++t) {
      const Tensor& obs = traj.observations[static_cast<size_t>(start + t)];
      std::copy(obs.data.begin(), obs.data.end(),
                batch.states.data.begin() + (t * cfg.batch + i) * obs_size);
    }
  }
  return batch;
}

Tape::Var infonce_loss_graph(Tape& tape, const Tape::NamedVars& vars, const EncoderModel& model,
                             const SegmentBatch& batch) {
  int64_t B = batch.batch, n = batch.context_len, K = batch.predict_len;
  check(B >= 2, "infonce: batch must be >= 2");
  check(batch.states.shape[0] == B * (n + K), "infonce: segment batch shape mismatch");

  Tape::Var states = tape.input(batch.states);
  Tape::Var z_all;  // [B*(n+K), embed]
  if (model.kind == EncoderKind::Mlp) {
    Tape::Var flat = tape.reshape(states, {B * (n + K), model.mlp.in});
    z_all = mlp_forward(tape, vars, "enc", model.mlp, flat);
  } else {
    z_all = conv_forward(tape, vars, "enc", model.conv, states);
  }

  std::vector<Tape::Var> context_steps;
  context_steps.reserve(static_cast<size_t>(n));
  for (int64_t t = 0; t < n; ++t) context_steps.push_back(tape.slice_rows(z_all, t * B, B));
  Tape::Var c = gru_forward(tape, vars, "gru", model.gru, context_steps);  // [B, context]

  Tape::Var total;
  for (int64_t k = 1; k <= K; ++k) {
    Tape::Var zk = tape.slice_rows(z_all, (n + k - 1) * B, B);        // [B, embed]
    Tape::Var a = tape.matmul(zk, vars.at("score.w" + std::to_string(k)));  // [B, context]
    Tape::Var logits = tape.matmul_nt(c, a);  // [B, B]; row i scores candidates for context i
    Tape::Var lk = tape.xent_rows_diag(logits);
    total = total.valid() ? tape.add(total, lk) : lk;
  }
  return tape.scale(total, 1.0 / static_cast<double>(K));
}

double infonce_loss(const EncoderModel& model, const SegmentBatch& batch) {
  Tape tape;
  Tape::NamedVars vars = tape.params(model.params);
  Tape::Var loss = infonce_loss_graph(tape, vars, model, batch);
  return tape.value(loss).scalar_value();
}

CpcTrainResult train_cpc(const TrajectorySet& set, const CpcConfig& cfg, Rng& rng,
                         bool verbose) {
  cfg.validate();
  check(!set.items.empty(), "train_cpc: empty trajectory set");

  int64_t span = cfg.context_len + cfg.predict_len;
  int64_t total_segments = 0;
  int64_t skipped = 0;
  for (const auto& t : set.items) {
    if (t.state_count() >= span)
      total_segments += t.state_count() - span + 1;
    else
      ++skipped;
  }
  check(total_segments > 0, "train_cpc: no trajectory has at least ", span, " states");
  int64_t batches_per_epoch = std::max<int64_t>(1, total_segments / cfg.batch);

  CpcTrainResult result;
  result.model = EncoderModel::create(cfg, set.observation_shape,
                                      set.env.observation == "image", rng);
  result.batches_per_epoch = batches_per_epoch;
  result.skipped_short = skipped;
  if (verbose && skipped > 0)
    std::cerr << "train_cpc: skipped " << skipped << " trajectories shorter than " << span
              << " states\n";

  Adam adam({.lr = cfg.lr});
  int64_t total_batches = cfg.epochs * batches_per_epoch;
  result.loss_history.reserve(static_cast<size_t>(total_batches));
  for (int64_t b = 0; b < total_batches; ++b) {
    SegmentBatch batch = sample_segments(set, cfg, rng);
    Tape tape;
    Tape::NamedVars vars = tape.params(result.model.params);
    Tape::Var loss = infonce_loss_graph(tape, vars, result.model, batch);
    double loss_value = tape.value(loss).scalar_value();
    check(std::isfinite(loss_value), "train_cpc: loss diverged (batch ", b, ", loss ",
          loss_value, ")");
    tape.backward(loss);
    ParameterSet grads = tape.gradients(vars);
    adam.step(result.model.params, grads);
    result.loss_history.push_back(loss_value);
    if (verbose && (b % 200 == 0 || b + 1 == total_batches))
      std::cerr << "train_cpc: batch " << b + 1 << "/" << total_batches << " loss "
                << loss_value << "\n";
  }
  return result;
}

}  // namespace pshape
