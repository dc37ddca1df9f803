#pragma once

// The three LSTM cell architectures: conventional peephole, gate-level
// fusion (GLF) and state-level fusion (SLF). Every gate reads
//   wx * x + wh * h_prev + peep .* c_prev + bias
// with diagonal peephole weights. Cell-specific conventions:
//   - the candidate keeps its peephole term;
//   - the output gate peeks at the previous cell state, not the updated one;
//   - fused GLF gates are plain sums of the per-stream gates, range (0, 2);
//   - SLF runs two full per-stream updates off the shared previous state and
//     sums the resulting cell and hidden states.

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "fuselstm/activations.hpp"
#include "fuselstm/matrix.hpp"
#include "fuselstm/rng.hpp"

namespace fuselstm {

enum class CellKind { conventional, glf, slf };

inline const char* to_string(CellKind k) {
  switch (k) {
    case CellKind::conventional: return "conv";
    case CellKind::glf: return "glf";
    case CellKind::slf: return "slf";
  }
  throw std::logic_error("bad CellKind");
}

inline CellKind cell_kind_from_string(const std::string& s) {
  if (s == "conv") return CellKind::conventional;
  if (s == "glf") return CellKind::glf;
  if (s == "slf") return CellKind::slf;
  throw std::invalid_argument("unknown cell kind '" + s + "' (expected conv, glf or slf)");
}

enum class Gate { input = 0, candidate = 1, forget = 2, output = 3 };

constexpr std::array<Gate, 4> kGateOrder = {Gate::input, Gate::candidate, Gate::forget, Gate::output};

inline const char* to_string(Gate g) {
  switch (g) {
    case Gate::input: return "input";
    case Gate::candidate: return "candidate";
    case Gate::forget: return "forget";
    case Gate::output: return "output";
  }
  throw std::logic_error("bad Gate");
}

struct GateBlock {
  Matrix wx;    // hidden x input
  Matrix wh;    // hidden x hidden
  Vector peep;  // hidden, diagonal peephole weights
  Vector bias;  // hidden
};

struct CellState {
  Vector h;
  Vector c;
};

inline CellState zero_state(int hidden_dim) {
  return CellState{Vector(static_cast<std::size_t>(hidden_dim), 0.0),
                   Vector(static_cast<std::size_t>(hidden_dim), 0.0)};
}

// Block layout: conventional holds 4 blocks in gate order; glf/slf hold 8,
// all horizontal blocks first, then all vertical ones.
struct CellParams {
  CellKind kind = CellKind::conventional;
  int input_dim = 0;
  int hidden_dim = 0;
  std::vector<GateBlock> blocks;

  bool dual_stream() const { return kind != CellKind::conventional; }

  GateBlock& block(Gate g) { return blocks[static_cast<std::size_t>(g)]; }
  const GateBlock& block(Gate g) const { return blocks[static_cast<std::size_t>(g)]; }
  GateBlock& block(int stream, Gate g) { return blocks[static_cast<std::size_t>(stream) * 4 + static_cast<std::size_t>(g)]; }
  const GateBlock& block(int stream, Gate g) const {
    return blocks[static_cast<std::size_t>(stream) * 4 + static_cast<std::size_t>(g)];
  }
};

// Wx and Wh Glorot-uniform, peepholes zero, biases zero except the forget
// bias. A conventional forget gate starts at 1.0 (F ~ 0.73). Fused forget
// gates are sums of two sigmoids, so bias 1.0 would start them at ~1.46 and
// the cell state would grow exponentially along the chain; -1.0 starts the
// fused gate at ~0.54, a decay regime comparable to the conventional cell.
// Blocks are drawn in storage order, Wx before Wh.
inline CellParams init_cell_params(CellKind kind, int input_dim, int hidden_dim, RngStream& stream) {
  if (input_dim < 1 || hidden_dim < 1) throw std::invalid_argument("init_cell_params: dims must be >= 1");
  CellParams p;
  p.kind = kind;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  const int nblocks = kind == CellKind::conventional ? 4 : 8;
  const double forget_bias = kind == CellKind::conventional ? 1.0 : -1.0;
  p.blocks.resize(nblocks);
  for (int b = 0; b < nblocks; ++b) {
    GateBlock& g = p.blocks[b];
    g.wx = glorot_uniform(stream, hidden_dim, input_dim);
    g.wh = glorot_uniform(stream, hidden_dim, hidden_dim);
    g.peep.assign(static_cast<std::size_t>(hidden_dim), 0.0);
    g.bias.assign(static_cast<std::size_t>(hidden_dim), 0.0);
    if (static_cast<Gate>(b % 4) == Gate::forget)
      g.bias.assign(static_cast<std::size_t>(hidden_dim), forget_bias);
  }
  return p;
}

inline CellParams zeroed_like(const CellParams& p) {
  CellParams z = p;
  for (auto& b : z.blocks) {
    b.wx.data.assign(b.wx.data.size(), 0.0);
    b.wh.data.assign(b.wh.data.size(), 0.0);
    b.peep.assign(b.peep.size(), 0.0);
    b.bias.assign(b.bias.size(), 0.0);
  }
  return z;
}

// wx x + wh h_prev + peep .* c_prev + bias
inline Vector gate_preactivation(const GateBlock& g, const Vector& x, const CellState& prev) {
  Vector pre = affine(g.wx, x, g.bias);
  check_same_len("gate_preactivation", pre, prev.h);
  const Vector rec = matvec(g.wh, prev.h);
  for (std::size_t i = 0; i < pre.size(); ++i) pre[i] += rec[i] + g.peep[i] * prev.c[i];
  return pre;
}

struct StepCache {
  CellKind kind = CellKind::conventional;
  Vector hx, vx;  // step inputs; vx stays empty for the conventional cell
  CellState prev;
  // Slot 0 = horizontal (the only slot the conventional cell uses), slot 1 = vertical.
  std::array<Vector, 2> gate_i, gate_f, gate_o, cand;
  Vector fused_i, fused_f, fused_o, fused_cand;  // glf
  std::array<Vector, 2> c_dir, h_dir;            // slf per-stream states
  CellState out;
};

inline std::pair<CellState, StepCache> conv_lstm_step(const CellParams& params, const Vector& x,
                                                      const CellState& prev) {
  if (params.kind != CellKind::conventional)
    throw std::invalid_argument("conv_lstm_step: params are not a conventional cell");
  StepCache cache;
  cache.kind = params.kind;
  cache.hx = x;
  cache.prev = prev;
  cache.gate_i[0] = sigmoid(gate_preactivation(params.block(Gate::input), x, prev));
  cache.cand[0] = tanh_act(gate_preactivation(params.block(Gate::candidate), x, prev));
  cache.gate_f[0] = sigmoid(gate_preactivation(params.block(Gate::forget), x, prev));
  cache.gate_o[0] = sigmoid(gate_preactivation(params.block(Gate::output), x, prev));

  const std::size_t n = prev.h.size();
  CellState next = zero_state(static_cast<int>(n));
  for (std::size_t i = 0; i < n; ++i) {
    next.c[i] = cache.gate_f[0][i] * prev.c[i] + cache.gate_i[0][i] * cache.cand[0][i];
    next.h[i] = cache.gate_o[0][i] * std::tanh(next.c[i]);
  }
  cache.out = next;
  return {next, cache};
}

inline std::pair<CellState, StepCache> glf_lstm_step(const CellParams& params, const Vector& hx,
                                                     const Vector& vx, const CellState& prev) {
  if (params.kind != CellKind::glf) throw std::invalid_argument("glf_lstm_step: params are not a glf cell");
  check_same_len("glf_lstm_step", hx, vx);
  StepCache cache;
  cache.kind = params.kind;
  cache.hx = hx;
  cache.vx = vx;
  cache.prev = prev;
  for (int s = 0; s < 2; ++s) {
    const Vector& x = s == 0 ? hx : vx;
    cache.gate_i[s] = sigmoid(gate_preactivation(params.block(s, Gate::input), x, prev));
    cache.cand[s] = tanh_act(gate_preactivation(params.block(s, Gate::candidate), x, prev));
    cache.gate_f[s] = sigmoid(gate_preactivation(params.block(s, Gate::forget), x, prev));
    cache.gate_o[s] = sigmoid(gate_preactivation(params.block(s, Gate::output), x, prev));
  }
  cache.fused_i = add(cache.gate_i[0], cache.gate_i[1]);
  cache.fused_cand = add(cache.cand[0], cache.cand[1]);
  cache.fused_f = add(cache.gate_f[0], cache.gate_f[1]);
  cache.fused_o = add(cache.gate_o[0], cache.gate_o[1]);

  const std::size_t n = prev.h.size();
  CellState next = zero_state(static_cast<int>(n));
  for (std::size_t i = 0; i < n; ++i) {
    next.c[i] = cache.fused_f[i] * prev.c[i] + cache.fused_i[i] * cache.fused_cand[i];
    next.h[i] = cache.fused_o[i] * std::tanh(next.c[i]);
  }
  cache.out = next;
  return {next, cache};
}

inline std::pair<CellState, StepCache> slf_lstm_step(const CellParams& params, const Vector& hx,
                                                     const Vector& vx, const CellState& prev) {
  if (params.kind != CellKind::slf) throw std::invalid_argument("slf_lstm_step: params are not an slf cell");
  check_same_len("slf_lstm_step", hx, vx);
  StepCache cache;
  cache.kind = params.kind;
  cache.hx = hx;
  cache.vx = vx;
  cache.prev = prev;
  const std::size_t n = prev.h.size();
  for (int s = 0; s < 2; ++s) {
    const Vector& x = s == 0 ? hx : vx;
    cache.gate_i[s] = sigmoid(gate_preactivation(params.block(s, Gate::input), x, prev));
    cache.cand[s] = tanh_act(gate_preactivation(params.block(s, Gate::candidate), x, prev));
    cache.gate_f[s] = sigmoid(gate_preactivation(params.block(s, Gate::forget), x, prev));
    cache.gate_o[s] = sigmoid(gate_preactivation(params.block(s, Gate::output), x, prev));
    cache.c_dir[s].resize(n);
    cache.h_dir[s].resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      cache.c_dir[s][i] = cache.gate_f[s][i] * prev.c[i] + cache.gate_i[s][i] * cache.cand[s][i];
      cache.h_dir[s][i] = cache.gate_o[s][i] * std::tanh(cache.c_dir[s][i]);
    }
  }
  CellState next;
  next.c = add(cache.c_dir[0], cache.c_dir[1]);
  next.h = add(cache.h_dir[0], cache.h_dir[1]);
  cache.out = next;
  return {next, cache};
}

// Gradients flowing out of one step, toward its inputs and the previous state.
struct StepInputGrads {
  Vector d_hx, d_vx;  // d_vx stays empty for the conventional cell
  CellState d_prev;
};

namespace detail {

// Reverse of gate_preactivation; parameter gradients accumulate into `grad`.
inline void gate_preactivation_backward(const GateBlock& g, const Vector& x, const CellState& prev,
                                        const Vector& dpre, GateBlock& grad, Vector& d_x,
                                        CellState& d_prev) {
  outer_acc(grad.wx, dpre, x);
  outer_acc(grad.wh, dpre, prev.h);
  hadamard_acc(grad.peep, dpre, prev.c);
  add_acc(grad.bias, dpre);
  matvec_transpose_acc(g.wx, dpre, d_x);
  matvec_transpose_acc(g.wh, dpre, d_prev.h);
  hadamard_acc(d_prev.c, g.peep, dpre);
}

inline Vector dsigmoid_from_value(const Vector& s, const Vector& upstream) {
  Vector d(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) d[i] = upstream[i] * s[i] * (1.0 - s[i]);
  return d;
}

inline Vector dtanh_from_value(const Vector& t, const Vector& upstream) {
  Vector d(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) d[i] = upstream[i] * (1.0 - t[i] * t[i]);
  return d;
}

}  // namespace detail

// Exact reverse mode of the matching forward step. grad_h / grad_c are the
// upstream gradients at the step's outputs; parameter gradients accumulate
// into grad_acc (never overwritten).
inline StepInputGrads cell_step_backward(const CellParams& params, const StepCache& cache,
                                         const Vector& grad_h, const Vector& grad_c,
                                         CellParams& grad_acc) {
  if (params.kind != cache.kind || grad_acc.kind != cache.kind)
    throw std::invalid_argument("cell_step_backward: cache/params kind mismatch");
  const std::size_t n = cache.out.h.size();
  check_same_len("cell_step_backward", grad_h, cache.out.h);
  check_same_len("cell_step_backward", grad_c, cache.out.c);

  StepInputGrads out;
  out.d_hx.assign(cache.hx.size(), 0.0);
  if (params.dual_stream()) out.d_vx.assign(cache.vx.size(), 0.0);
  out.d_prev = zero_state(static_cast<int>(n));

  if (params.kind == CellKind::slf) {
    // h = h_H + h_V and c = c_H + c_V, so both streams see the full upstream
    // gradient; each stream then runs a standard LSTM step backward into the
    // shared previous state.
    for (int s = 0; s < 2; ++s) {
      const Vector& x = s == 0 ? cache.hx : cache.vx;
      Vector& d_x = s == 0 ? out.d_hx : out.d_vx;
      Vector d_o(n), gc(n), d_f(n), d_i(n), d_cand(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double t = std::tanh(cache.c_dir[s][i]);
        d_o[i] = grad_h[i] * t;
        gc[i] = grad_c[i] + grad_h[i] * cache.gate_o[s][i] * (1.0 - t * t);
        d_f[i] = gc[i] * cache.prev.c[i];
        d_i[i] = gc[i] * cache.cand[s][i];
        d_cand[i] = gc[i] * cache.gate_i[s][i];
        out.d_prev.c[i] += gc[i] * cache.gate_f[s][i];
      }
      detail::gate_preactivation_backward(params.block(s, Gate::input), x, cache.prev,
                                          detail::dsigmoid_from_value(cache.gate_i[s], d_i),
                                          grad_acc.block(s, Gate::input), d_x, out.d_prev);
      detail::gate_preactivation_backward(params.block(s, Gate::candidate), x, cache.prev,
                                          detail::dtanh_from_value(cache.cand[s], d_cand),
                                          grad_acc.block(s, Gate::candidate), d_x, out.d_prev);
      detail::gate_preactivation_backward(params.block(s, Gate::forget), x, cache.prev,
                                          detail::dsigmoid_from_value(cache.gate_f[s], d_f),
                                          grad_acc.block(s, Gate::forget), d_x, out.d_prev);
      detail::gate_preactivation_backward(params.block(s, Gate::output), x, cache.prev,
                                          detail::dsigmoid_from_value(cache.gate_o[s], d_o),
                                          grad_acc.block(s, Gate::output), d_x, out.d_prev);
    }
    return out;
  }

  // Conventional and GLF share the update c = F .* c_prev + I .* Cand,
  // h = O .* tanh(c); only the gate values differ (per-stream vs fused).
  const bool fused = params.kind == CellKind::glf;
  const Vector& gi = fused ? cache.fused_i : cache.gate_i[0];
  const Vector& gf = fused ? cache.fused_f : cache.gate_f[0];
  const Vector& go = fused ? cache.fused_o : cache.gate_o[0];
  const Vector& gcand = fused ? cache.fused_cand : cache.cand[0];

  Vector d_o(n), gc(n), d_f(n), d_i(n), d_cand(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = std::tanh(cache.out.c[i]);
    d_o[i] = grad_h[i] * t;
    gc[i] = grad_c[i] + grad_h[i] * go[i] * (1.0 - t * t);
    d_f[i] = gc[i] * cache.prev.c[i];
    d_i[i] = gc[i] * gcand[i];
    d_cand[i] = gc[i] * gi[i];
    out.d_prev.c[i] += gc[i] * gf[i];
  }

  const int streams = fused ? 2 : 1;
  for (int s = 0; s < streams; ++s) {
    const Vector& x = s == 0 ? cache.hx : cache.vx;
    Vector& d_x = s == 0 ? out.d_hx : out.d_vx;
    auto& bi = fused ? grad_acc.block(s, Gate::input) : grad_acc.block(Gate::input);
    auto& bc = fused ? grad_acc.block(s, Gate::candidate) : grad_acc.block(Gate::candidate);
    auto& bf = fused ? grad_acc.block(s, Gate::forget) : grad_acc.block(Gate::forget);
    auto& bo = fused ? grad_acc.block(s, Gate::output) : grad_acc.block(Gate::output);
    const auto& pi = fused ? params.block(s, Gate::input) : params.block(Gate::input);
    const auto& pc = fused ? params.block(s, Gate::candidate) : params.block(Gate::candidate);
    const auto& pf = fused ? params.block(s, Gate::forget) : params.block(Gate::forget);
    const auto& po = fused ? params.block(s, Gate::output) : params.block(Gate::output);
    detail::gate_preactivation_backward(pi, x, cache.prev,
                                        detail::dsigmoid_from_value(cache.gate_i[s], d_i), bi, d_x,
                                        out.d_prev);
    detail::gate_preactivation_backward(pc, x, cache.prev,
                                        detail::dtanh_from_value(cache.cand[s], d_cand), bc, d_x,
                                        out.d_prev);
    detail::gate_preactivation_backward(pf, x, cache.prev,
                                        detail::dsigmoid_from_value(cache.gate_f[s], d_f), bf, d_x,
                                        out.d_prev);
    detail::gate_preactivation_backward(po, x, cache.prev,
                                        detail::dsigmoid_from_value(cache.gate_o[s], d_o), bo, d_x,
                                        out.d_prev);
  }
  return out;
}

}  // namespace fuselstm
