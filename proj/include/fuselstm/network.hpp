#pragma once

// Model composition: uni-/bi-directional sequence encoders built from one
// cell kind, inverted dropout on the encoder outputs, a scalar-score
// attention layer (or mean pooling when disabled) and a softmax head.
// Score-level fusion instantiates two single-stream pipelines and averages
// their probability vectors; every other strategy uses one pipeline.

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fuselstm/activations.hpp"
#include "fuselstm/cells.hpp"
#include "fuselstm/data.hpp"
#include "fuselstm/matrix.hpp"
#include "fuselstm/rng.hpp"

namespace fuselstm {

struct ModelConfig {
  CellKind cell = CellKind::glf;
  FusionStrategy fusion = FusionStrategy::joint;
  int input_dim = 8;   // task stream dim d
  int hidden_dim = 32;
  int steps = 15;      // task sequence length n
  bool bidirectional = true;
  bool attention = true;
  double dropout = 0.1;
  int num_classes = 4;

  // feat1 feeds [H_i ; V_i] to a single-stream cell.
  int cell_input_dim() const { return fusion == FusionStrategy::feat1 ? 2 * input_dim : input_dim; }
  // feat2 runs H_1..H_n V_1..V_n through one chain.
  int encoder_len() const { return fusion == FusionStrategy::feat2 ? 2 * steps : steps; }
  int encoder_output_dim() const { return bidirectional ? 2 * hidden_dim : hidden_dim; }
  int pipeline_count() const { return fusion == FusionStrategy::score ? 2 : 1; }
};

inline void validate_config(const ModelConfig& c) {
  if (c.input_dim < 1 || c.hidden_dim < 1 || c.steps < 1)
    throw std::invalid_argument("model config: dims and steps must be >= 1");
  if (c.num_classes < 2) throw std::invalid_argument("model config: num_classes must be >= 2");
  if (c.dropout < 0.0 || c.dropout >= 1.0)
    throw std::invalid_argument("model config: dropout must be in [0, 1)");
  const bool joint = c.fusion == FusionStrategy::joint;
  const bool joint_cell = c.cell != CellKind::conventional;
  if (joint != joint_cell)
    throw std::invalid_argument(std::string("model config: fusion '") + to_string(c.fusion) +
                                "' requires " + (joint ? "a glf or slf cell" : "the conv cell") +
                                ", got '" + to_string(c.cell) + "'");
}

struct EncoderParams {
  CellParams forward_cell;
  std::optional<CellParams> backward_cell;  // present iff bidirectional
};

struct AttentionParams {
  Matrix wh;  // 1 x encoder-output dim: one scalar score per step
  Vector bh;  // length 1
};

struct HeadParams {
  Matrix wc;  // num_classes x encoder-output dim
  Vector bc;  // num_classes
};

struct Pipeline {
  EncoderParams encoder;
  std::optional<AttentionParams> attention;
  HeadParams head;
};

struct Model {
  ModelConfig config;
  std::vector<Pipeline> pipelines;
};

// Draw order per pipeline: forward cell, backward cell (if bidirectional),
// head weights. Attention weights start at zero (consuming no draws): the
// layer then begins as exact mean pooling with uniform weights and learns to
// deviate from there, and a model with attention disabled starts from
// identical parameters.
inline Model init_model(const ModelConfig& config, RngStream& stream) {
  validate_config(config);
  Model m;
  m.config = config;
  const int enc_out = config.encoder_output_dim();
  for (int p = 0; p < config.pipeline_count(); ++p) {
    Pipeline pipe;
    pipe.encoder.forward_cell =
        init_cell_params(config.cell, config.cell_input_dim(), config.hidden_dim, stream);
    if (config.bidirectional)
      pipe.encoder.backward_cell =
          init_cell_params(config.cell, config.cell_input_dim(), config.hidden_dim, stream);
    if (config.attention) {
      AttentionParams att;
      att.wh = Matrix(1, enc_out);
      att.bh.assign(1, 0.0);
      pipe.attention = std::move(att);
    }
    HeadParams head;
    head.wc = glorot_uniform(stream, config.num_classes, enc_out);
    head.bc.assign(static_cast<std::size_t>(config.num_classes), 0.0);
    pipe.head = std::move(head);
    m.pipelines.push_back(std::move(pipe));
  }
  return m;
}

// ---- parameter traversal ------------------------------------------------

namespace detail {

template <class CellT, class Fn>  // CellT = CellParams or const CellParams
void visit_cell(CellT& cell, const std::string& prefix, Fn&& fn) {
  const bool dual = cell.kind != CellKind::conventional;
  for (std::size_t b = 0; b < cell.blocks.size(); ++b) {
    std::string name = prefix;
    if (dual) name += b < 4 ? ".h" : ".v";
    name += ".";
    name += to_string(static_cast<Gate>(b % 4));
    fn(name + ".wx", cell.blocks[b].wx);
    fn(name + ".wh", cell.blocks[b].wh);
    fn(name + ".peep", cell.blocks[b].peep);
    fn(name + ".bias", cell.blocks[b].bias);
  }
}

}  // namespace detail

// Visits every trainable array in a fixed order; fn(name, Matrix&) and
// fn(name, Vector&) must both be callable. This order defines the
// checkpoint layout and the optimizer state layout.
template <class ModelT, class Fn>
void visit_params(ModelT& model, Fn&& fn) {
  for (std::size_t p = 0; p < model.pipelines.size(); ++p) {
    auto& pipe = model.pipelines[p];
    const std::string prefix = "p" + std::to_string(p);
    detail::visit_cell(pipe.encoder.forward_cell, prefix + ".enc.fw", fn);
    if (pipe.encoder.backward_cell)
      detail::visit_cell(*pipe.encoder.backward_cell, prefix + ".enc.bw", fn);
    if (pipe.attention) {
      fn(prefix + ".att.wh", pipe.attention->wh);
      fn(prefix + ".att.bh", pipe.attention->bh);
    }
    fn(prefix + ".head.wc", pipe.head.wc);
    fn(prefix + ".head.bc", pipe.head.bc);
  }
}

// Same traversal, flattened to raw double storage.
template <class ModelT, class Fn>
void visit_param_data(ModelT& model, Fn&& fn) {
  visit_params(model, [&](const std::string& name, auto& p) {
    using P = std::decay_t<decltype(p)>;
    if constexpr (std::is_same_v<P, Matrix>) {
      fn(name, p.data);
    } else {
      fn(name, p);
    }
  });
}

inline Model zeroed_like(const Model& m) {
  Model z = m;
  visit_param_data(z, [](const std::string&, std::vector<double>& data) {
    data.assign(data.size(), 0.0);
  });
  return z;
}

inline std::size_t param_count(const Model& m) {
  std::size_t n = 0;
  visit_param_data(m, [&](const std::string&, const std::vector<double>& d) { n += d.size(); });
  return n;
}

// ---- sequence encoding ---------------------------------------------------

struct SequenceRun {
  std::vector<int> order;             // order[k] = input position consumed at processing step k
  std::vector<StepCache> caches;      // processing order
  std::vector<Vector> outputs;        // indexed by input position
};

// Iterates the cell from a zero state over ascending positions, or
// descending when reversed; outputs stay aligned to input positions.
inline SequenceRun run_sequence(const CellParams& cell, const EncoderInput& input, bool reversed) {
  const std::size_t n = input.hx.size();
  if (n == 0) throw std::invalid_argument("run_sequence: empty input sequence");
  if (cell.dual_stream()) {
    if (input.vx.size() != n)
      throw std::invalid_argument("run_sequence: " + std::string(to_string(cell.kind)) +
                                  " cell needs two streams of equal length, got " +
                                  std::to_string(n) + " and " + std::to_string(input.vx.size()));
  } else if (!input.vx.empty()) {
    throw std::invalid_argument("run_sequence: conv cell takes a single stream, got two");
  }

  SequenceRun run;
  run.order.resize(n);
  for (std::size_t k = 0; k < n; ++k)
    run.order[k] = reversed ? static_cast<int>(n - 1 - k) : static_cast<int>(k);
  run.caches.reserve(n);
  run.outputs.resize(n);

  CellState state = zero_state(cell.hidden_dim);
  for (std::size_t k = 0; k < n; ++k) {
    const int pos = run.order[k];
    std::pair<CellState, StepCache> step;
    switch (cell.kind) {
      case CellKind::conventional: step = conv_lstm_step(cell, input.hx[pos], state); break;
      case CellKind::glf: step = glf_lstm_step(cell, input.hx[pos], input.vx[pos], state); break;
      case CellKind::slf: step = slf_lstm_step(cell, input.hx[pos], input.vx[pos], state); break;
    }
    state = std::move(step.first);
    run.caches.push_back(std::move(step.second));
    run.outputs[pos] = state.h;
  }
  return run;
}

struct EncoderInputGrads {
  std::vector<Vector> hx;
  std::vector<Vector> vx;  // empty for single-stream cells
};

// BPTT over one direction; d_outputs is indexed by input position.
// Parameter gradients accumulate into grad_cell; input gradients accumulate
// into d_input (which must be pre-sized with zeros).
inline void sequence_backward(const CellParams& cell, const SequenceRun& run,
                              const std::vector<Vector>& d_outputs, CellParams& grad_cell,
                              EncoderInputGrads& d_input) {
  const std::size_t n = run.caches.size();
  CellState carry = zero_state(cell.hidden_dim);
  for (std::size_t k = n; k-- > 0;) {
    const int pos = run.order[k];
    Vector grad_h = d_outputs[pos];
    add_acc(grad_h, carry.h);
    StepInputGrads g = cell_step_backward(cell, run.caches[k], grad_h, carry.c, grad_cell);
    add_acc(d_input.hx[pos], g.d_hx);
    if (cell.dual_stream()) add_acc(d_input.vx[pos], g.d_vx);
    carry = std::move(g.d_prev);
  }
}

struct EncodeCache {
  SequenceRun fw;
  std::optional<SequenceRun> bw;
  std::vector<Vector> outputs;  // per position; [fw ; bw] when bidirectional
};

inline EncodeCache encode(const EncoderParams& enc, const EncoderInput& input) {
  EncodeCache cache;
  cache.fw = run_sequence(enc.forward_cell, input, false);
  if (enc.backward_cell) {
    cache.bw = run_sequence(*enc.backward_cell, input, true);
    cache.outputs.resize(input.hx.size());
    for (std::size_t i = 0; i < input.hx.size(); ++i)
      cache.outputs[i] = concat(cache.fw.outputs[i], cache.bw->outputs[i]);
  } else {
    cache.outputs = cache.fw.outputs;
  }
  return cache;
}

inline EncoderInputGrads encode_backward(const EncoderParams& enc, const EncodeCache& cache,
                                         const std::vector<Vector>& d_outputs,
                                         EncoderParams& grad) {
  const std::size_t n = cache.outputs.size();
  const std::size_t hidden = static_cast<std::size_t>(enc.forward_cell.hidden_dim);
  EncoderInputGrads d_input;
  d_input.hx.assign(n, Vector(cache.fw.caches[0].hx.size(), 0.0));
  if (enc.forward_cell.dual_stream())
    d_input.vx.assign(n, Vector(cache.fw.caches[0].vx.size(), 0.0));

  if (cache.bw) {
    std::vector<Vector> d_fw(n), d_bw(n);
    for (std::size_t i = 0; i < n; ++i) {
      d_fw[i].assign(d_outputs[i].begin(), d_outputs[i].begin() + hidden);
      d_bw[i].assign(d_outputs[i].begin() + hidden, d_outputs[i].end());
    }
    sequence_backward(enc.forward_cell, cache.fw, d_fw, grad.forward_cell, d_input);
    sequence_backward(*enc.backward_cell, *cache.bw, d_bw, *grad.backward_cell, d_input);
  } else {
    sequence_backward(enc.forward_cell, cache.fw, d_outputs, grad.forward_cell, d_input);
  }
  return d_input;
}

// ---- dropout ---------------------------------------------------------

struct DropoutResult {
  std::vector<Vector> outputs;
  std::vector<Vector> masks;  // multiplicative, 0 or 1/(1-rate); empty when identity
};

// Inverted dropout: survivors are scaled by 1/(1-rate) at training time so
// inference is the identity. rate 0 or inference mode consume no randomness.
inline DropoutResult apply_dropout(const std::vector<Vector>& seq, double rate, RngStream& stream,
                                   bool training) {
  DropoutResult r;
  if (!training || rate == 0.0) {
    r.outputs = seq;
    return r;
  }
  const double scale = 1.0 / (1.0 - rate);
  r.outputs.resize(seq.size());
  r.masks.resize(seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    r.outputs[i].resize(seq[i].size());
    r.masks[i].resize(seq[i].size());
    for (std::size_t j = 0; j < seq[i].size(); ++j) {
      const double m = stream.next_unit() < rate ? 0.0 : scale;
      r.masks[i][j] = m;
      r.outputs[i][j] = m * seq[i][j];
    }
  }
  return r;
}

// ---- attention and head ------------------------------------------------

struct AttentionCache {
  Vector scores;   // u_i = tanh(wh h_i + bh), one scalar per step
  Vector weights;  // softmax over the scores, sums to 1
  Vector emb;      // sum_i weights[i] * h_i
};

inline AttentionCache attention_forward(const AttentionParams& att, const std::vector<Vector>& seq) {
  if (seq.empty()) throw std::invalid_argument("attention_forward: empty sequence");
  AttentionCache cache;
  cache.scores.resize(seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (static_cast<int>(seq[i].size()) != att.wh.cols)
      dim_error("attention_forward", "wh is " + shape_str(att.wh) + ", h has length " +
                                         std::to_string(seq[i].size()));
    double s = att.bh[0];
    const double* row = att.wh.row(0);
    for (std::size_t j = 0; j < seq[i].size(); ++j) s += row[j] * seq[i][j];
    cache.scores[i] = std::tanh(s);
  }
  cache.weights = softmax(cache.scores);
  cache.emb.assign(seq[0].size(), 0.0);
  for (std::size_t i = 0; i < seq.size(); ++i) axpy(cache.emb, cache.weights[i], seq[i]);
  return cache;
}

inline void attention_backward(const AttentionParams& att, const AttentionCache& cache,
                               const std::vector<Vector>& seq, const Vector& d_emb,
                               AttentionParams& grad, std::vector<Vector>& d_seq) {
  const std::size_t n = seq.size();
  Vector d_weights(n);
  for (std::size_t i = 0; i < n; ++i) {
    d_weights[i] = dot(d_emb, seq[i]);
    axpy(d_seq[i], cache.weights[i], d_emb);
  }
  const Vector d_scores = softmax_backward(cache.weights, d_weights);
  for (std::size_t i = 0; i < n; ++i) {
    const double d_pre = d_scores[i] * (1.0 - cache.scores[i] * cache.scores[i]);
    double* wrow = grad.wh.row(0);
    const double* row = att.wh.row(0);
    for (std::size_t j = 0; j < seq[i].size(); ++j) {
      wrow[j] += d_pre * seq[i][j];
      d_seq[i][j] += d_pre * row[j];
    }
    grad.bh[0] += d_pre;
  }
}

inline Vector classify(const HeadParams& head, const Vector& emb) {
  return softmax(affine(head.wc, emb, head.bc));
}

// ---- whole-model forward / backward --------------------------------------

struct PipelineCache {
  EncoderInput input;  // after dropout; the encoder consumed exactly this
  std::vector<Vector> mask_h, mask_v;  // dropout masks, empty when identity
  EncodeCache enc;
  std::optional<AttentionCache> att;  // absent => mean pooling
  Vector emb;
  Vector probs;
};

struct ModelCache {
  bool training = false;
  std::vector<PipelineCache> pipelines;
  Vector probs;
};

inline void validate_sample(const ModelConfig& c, const SamplePair& sample) {
  if (static_cast<int>(sample.h_seq.size()) != c.steps ||
      static_cast<int>(sample.v_seq.size()) != c.steps)
    throw std::invalid_argument("sample has " + std::to_string(sample.h_seq.size()) + "/" +
                                std::to_string(sample.v_seq.size()) + " steps, model expects " +
                                std::to_string(c.steps));
  for (int i = 0; i < c.steps; ++i)
    if (static_cast<int>(sample.h_seq[i].size()) != c.input_dim ||
        static_cast<int>(sample.v_seq[i].size()) != c.input_dim)
      throw std::invalid_argument("sample step " + std::to_string(i) + " has wrong dim, model expects " +
                                  std::to_string(c.input_dim));
}

// Dropout regularizes the recurrent learning: it is applied to the encoder
// input streams (per pipeline: the primary stream first, then the second one
// when present), never to the encoder outputs the attention scores read.
inline ModelCache model_forward(const Model& model, const SamplePair& sample, bool training,
                                RngStream& dropout_stream) {
  validate_sample(model.config, sample);
  std::vector<EncoderInput> inputs = assemble_fusion_input(sample, model.config.fusion);
  if (inputs.size() != model.pipelines.size())
    throw std::invalid_argument("model/fusion mismatch: " + std::to_string(inputs.size()) +
                                " inputs for " + std::to_string(model.pipelines.size()) + " pipelines");
  ModelCache cache;
  cache.training = training;
  cache.probs.assign(static_cast<std::size_t>(model.config.num_classes), 0.0);
  for (std::size_t p = 0; p < model.pipelines.size(); ++p) {
    const Pipeline& pipe = model.pipelines[p];
    PipelineCache pc;
    DropoutResult dh = apply_dropout(inputs[p].hx, model.config.dropout, dropout_stream, training);
    pc.input.hx = std::move(dh.outputs);
    pc.mask_h = std::move(dh.masks);
    if (!inputs[p].vx.empty()) {
      DropoutResult dv = apply_dropout(inputs[p].vx, model.config.dropout, dropout_stream, training);
      pc.input.vx = std::move(dv.outputs);
      pc.mask_v = std::move(dv.masks);
    }
    pc.enc = encode(pipe.encoder, pc.input);
    if (pipe.attention) {
      pc.att = attention_forward(*pipe.attention, pc.enc.outputs);
      pc.emb = pc.att->emb;
    } else {
      pc.emb.assign(pc.enc.outputs[0].size(), 0.0);
      for (const auto& h : pc.enc.outputs) add_acc(pc.emb, h);
      for (auto& v : pc.emb) v /= static_cast<double>(pc.enc.outputs.size());
    }
    pc.probs = classify(pipe.head, pc.emb);
    add_acc(cache.probs, pc.probs);
    cache.pipelines.push_back(std::move(pc));
  }
  for (auto& v : cache.probs) v /= static_cast<double>(model.pipelines.size());
  return cache;
}

inline Vector predict(const Model& model, const SamplePair& sample) {
  RngStream unused(0);
  return model_forward(model, sample, false, unused).probs;
}

constexpr double kProbFloor = 1e-12;

// Exact gradients of the cross-entropy loss -ln(max(probs[label], 1e-12))
// w.r.t. every trainable parameter; accumulates into `grads` (a
// zeroed_like() of the model). Dropout masks are replayed from the cache.
inline void model_backward(const Model& model, const ModelCache& cache, int label, Model& grads) {
  if (!cache.training)
    throw std::invalid_argument("model_backward: cache was produced by an inference forward");
  if (cache.pipelines.size() != model.pipelines.size())
    throw std::invalid_argument("model_backward: cache does not match this model");
  const int num_classes = model.config.num_classes;
  if (label < 0 || label >= num_classes)
    throw std::invalid_argument("model_backward: label " + std::to_string(label) + " out of range");

  // d loss / d averaged-probs; zero when the floor is active.
  Vector d_probs(static_cast<std::size_t>(num_classes), 0.0);
  if (cache.probs[label] > kProbFloor) d_probs[label] = -1.0 / cache.probs[label];
  const double pipeline_scale = 1.0 / static_cast<double>(model.pipelines.size());

  for (std::size_t p = 0; p < model.pipelines.size(); ++p) {
    const Pipeline& pipe = model.pipelines[p];
    const PipelineCache& pc = cache.pipelines[p];
    Pipeline& gpipe = grads.pipelines[p];

    const Vector d_pipe_probs = scaled(d_probs, pipeline_scale);
    const Vector d_logits = softmax_backward(pc.probs, d_pipe_probs);
    outer_acc(gpipe.head.wc, d_logits, pc.emb);
    add_acc(gpipe.head.bc, d_logits);
    Vector d_emb(pc.emb.size(), 0.0);
    matvec_transpose_acc(pipe.head.wc, d_logits, d_emb);

    std::vector<Vector> d_enc_out(pc.enc.outputs.size(), Vector(pc.enc.outputs[0].size(), 0.0));
    if (pc.att) {
      attention_backward(*pipe.attention, *pc.att, pc.enc.outputs, d_emb, *gpipe.attention,
                         d_enc_out);
    } else {
      const double inv_n = 1.0 / static_cast<double>(d_enc_out.size());
      for (auto& d : d_enc_out) axpy(d, inv_n, d_emb);
    }

    // The encoder consumed the dropout-masked inputs cached in pc.input; the
    // chain ends at the data, so the input gradients are discarded here.
    encode_backward(pipe.encoder, pc.enc, d_enc_out, gpipe.encoder);
  }
}

}  // namespace fuselstm
