#pragma once

// Central finite-difference gradient checks, at cell level and for the whole
// model. The finite-difference side only ever calls the forward path, so it
// is an independent route against the analytic backward pass.

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fuselstm/network.hpp"
#include "fuselstm/training.hpp"

namespace fuselstm {

// Relative for gradients above 1, absolute below; the floor keeps
// finite-difference roundoff (~1e-10 at step 1e-6) from dominating
// near-zero gradients.
inline double grad_rel_err(double analytic, double numeric) {
  const double denom = std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
  return std::fabs(analytic - numeric) / denom;
}

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  std::size_t checked = 0;
};

namespace detail {

struct Slot {
  std::string name;
  double* value;
  double analytic;
};

inline void fd_compare(std::vector<Slot>& slots, const std::function<double()>& loss, double step,
                       GradCheckReport& report) {
  for (auto& slot : slots) {
    const double saved = *slot.value;
    *slot.value = saved + step;
    const double up = loss();
    *slot.value = saved - step;
    const double down = loss();
    *slot.value = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double err = grad_rel_err(slot.analytic, numeric);
    if (err > report.max_rel_err) {
      report.max_rel_err = err;
      report.worst_param = slot.name;
    }
    ++report.checked;
  }
}

constexpr std::uint64_t kGradcheckParamTag = 20;
constexpr std::uint64_t kGradcheckInputTag = 21;
constexpr std::uint64_t kGradcheckDropoutTag = 22;

}  // namespace detail

// One cell step from random parameters, inputs and previous state, with the
// scalar loss 0.5*||h||^2 + 0.5*||c||^2. Covers every parameter, both step
// inputs and the previous state.
inline GradCheckReport cell_gradient_check(CellKind kind, int input_dim, int hidden_dim,
                                           std::uint64_t seed, double step = 1e-6) {
  RngStream pstream(derive_seed(seed, detail::kGradcheckParamTag));
  CellParams params = init_cell_params(kind, input_dim, hidden_dim, pstream);
  detail::visit_cell(params, "cell", [&](const std::string&, auto& p) {
    using P = std::decay_t<decltype(p)>;
    if constexpr (std::is_same_v<P, Matrix>) {
      for (auto& v : p.data) v += pstream.next_uniform(-0.3, 0.3);
    } else {
      for (auto& v : p) v += pstream.next_uniform(-0.3, 0.3);
    }
  });

  RngStream istream(derive_seed(seed, detail::kGradcheckInputTag));
  Vector hx = sample_gaussian(istream, input_dim);
  Vector vx = params.dual_stream() ? sample_gaussian(istream, input_dim) : Vector{};
  CellState prev{sample_gaussian(istream, hidden_dim), sample_gaussian(istream, hidden_dim)};

  const auto forward = [&]() {
    switch (params.kind) {
      case CellKind::conventional: return conv_lstm_step(params, hx, prev).first;
      case CellKind::glf: return glf_lstm_step(params, hx, vx, prev).first;
      case CellKind::slf: return slf_lstm_step(params, hx, vx, prev).first;
    }
    throw std::logic_error("bad CellKind");
  };
  const auto loss = [&]() {
    const CellState out = forward();
    return 0.5 * dot(out.h, out.h) + 0.5 * dot(out.c, out.c);
  };

  StepCache cache;
  switch (params.kind) {
    case CellKind::conventional: cache = conv_lstm_step(params, hx, prev).second; break;
    case CellKind::glf: cache = glf_lstm_step(params, hx, vx, prev).second; break;
    case CellKind::slf: cache = slf_lstm_step(params, hx, vx, prev).second; break;
  }
  CellParams grads = zeroed_like(params);
  const StepInputGrads input_grads =
      cell_step_backward(params, cache, cache.out.h, cache.out.c, grads);

  std::vector<detail::Slot> slots;
  // Walk params and grads in lockstep (same traversal order).
  {
    std::vector<std::pair<std::string, std::vector<double>*>> pflat, gflat;
    detail::visit_cell(params, "cell", [&](const std::string& name, auto& p) {
      using P = std::decay_t<decltype(p)>;
      if constexpr (std::is_same_v<P, Matrix>) {
        pflat.emplace_back(name, &p.data);
      } else {
        pflat.emplace_back(name, &p);
      }
    });
    detail::visit_cell(grads, "cell", [&](const std::string& name, auto& g) {
      using P = std::decay_t<decltype(g)>;
      if constexpr (std::is_same_v<P, Matrix>) {
        gflat.emplace_back(name, &g.data);
      } else {
        gflat.emplace_back(name, &g);
      }
    });
    for (std::size_t k = 0; k < pflat.size(); ++k)
      for (std::size_t i = 0; i < pflat[k].second->size(); ++i)
        slots.push_back({pflat[k].first + "[" + std::to_string(i) + "]",
                         &(*pflat[k].second)[i], (*gflat[k].second)[i]});
  }
  for (std::size_t i = 0; i < hx.size(); ++i)
    slots.push_back({"hx[" + std::to_string(i) + "]", &hx[i], input_grads.d_hx[i]});
  for (std::size_t i = 0; i < vx.size(); ++i)
    slots.push_back({"vx[" + std::to_string(i) + "]", &vx[i], input_grads.d_vx[i]});
  for (std::size_t i = 0; i < prev.h.size(); ++i)
    slots.push_back({"prev.h[" + std::to_string(i) + "]", &prev.h[i], input_grads.d_prev.h[i]});
  for (std::size_t i = 0; i < prev.c.size(); ++i)
    slots.push_back({"prev.c[" + std::to_string(i) + "]", &prev.c[i], input_grads.d_prev.c[i]});

  GradCheckReport report;
  detail::fd_compare(slots, loss, step, report);
  return report;
}

// Whole-model check: cross-entropy of one random sample through a randomly
// initialized model, against central differences over every parameter.
// Dropout masks are replayed by reseeding the dropout stream per forward, so
// they are identical on both sides of each difference.
inline GradCheckReport model_gradient_check(const ModelConfig& config, std::uint64_t seed,
                                            double step = 1e-6) {
  RngStream pstream(derive_seed(seed, detail::kGradcheckParamTag));
  Model model = init_model(config, pstream);
  visit_param_data(model, [&](const std::string&, std::vector<double>& d) {
    for (auto& v : d) v += pstream.next_uniform(-0.3, 0.3);
  });

  TaskConfig task;
  task.num_classes = config.num_classes;
  task.dim = config.input_dim;
  task.steps = config.steps;
  RngStream istream(derive_seed(seed, detail::kGradcheckInputTag));
  const int label = static_cast<int>(istream.next_u64() % static_cast<std::uint64_t>(config.num_classes));
  const SamplePair sample = generate_sample(task, label, istream);

  const std::uint64_t dropout_seed = derive_seed(seed, detail::kGradcheckDropoutTag);
  const auto loss = [&]() {
    RngStream ds(dropout_seed);
    const ModelCache cache = model_forward(model, sample, true, ds);
    return cross_entropy(cache.probs, label);
  };

  Model grads = zeroed_like(model);
  {
    RngStream ds(dropout_seed);
    const ModelCache cache = model_forward(model, sample, true, ds);
    model_backward(model, cache, label, grads);
  }

  std::vector<detail::Slot> slots;
  {
    std::vector<std::pair<std::string, std::vector<double>*>> pflat, gflat;
    visit_param_data(model, [&](const std::string& name, std::vector<double>& d) {
      pflat.emplace_back(name, &d);
    });
    visit_param_data(grads, [&](const std::string& name, std::vector<double>& d) {
      gflat.emplace_back(name, &d);
    });
    for (std::size_t k = 0; k < pflat.size(); ++k)
      for (std::size_t i = 0; i < pflat[k].second->size(); ++i)
        slots.push_back({pflat[k].first + "[" + std::to_string(i) + "]",
                         &(*pflat[k].second)[i], (*gflat[k].second)[i]});
  }

  GradCheckReport report;
  detail::fd_compare(slots, loss, step, report);
  return report;
}

}  // namespace fuselstm
