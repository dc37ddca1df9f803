#pragma once

// Cross-entropy loss, rmsprop, the mini-batch training loop and rank-1
// evaluation. Everything is sequential and order-fixed so a (model seed,
// data seed, train seed) triple pins the final parameters bit-exactly.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "fuselstm/network.hpp"

namespace fuselstm {

inline double cross_entropy(const Vector& probs, int label) {
  if (label < 0 || label >= static_cast<int>(probs.size()))
    throw std::invalid_argument("cross_entropy: label " + std::to_string(label) + " out of range");
  const double p = probs[static_cast<std::size_t>(label)];
  return -std::log(p > kProbFloor ? p : kProbFloor);
}

struct TrainConfig {
  int epochs = 200;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double rho = 0.9;       // squared-gradient decay
  double epsilon = 1e-8;
  std::uint64_t seed = 1;
  bool shuffle = true;
};

// Squared-gradient accumulators, one per parameter, stored as a zeroed
// model clone so the shapes always mirror the parameter set.
struct RmspropState {
  double learning_rate = 1e-3;
  double rho = 0.9;
  double epsilon = 1e-8;
  Model acc;
};

inline RmspropState init_rmsprop(const Model& model, double learning_rate, double rho, double epsilon) {
  return RmspropState{learning_rate, rho, epsilon, zeroed_like(model)};
}

// Per element: acc <- rho*acc + (1-rho)*g^2;  theta <- theta - lr*g/(sqrt(acc)+eps)
inline void rmsprop_update(RmspropState& state, Model& params, const Model& grads) {
  std::vector<std::vector<double>*> pdata, adata;
  std::vector<const std::vector<double>*> gdata;
  visit_param_data(params, [&](const std::string&, std::vector<double>& d) { pdata.push_back(&d); });
  visit_param_data(state.acc, [&](const std::string&, std::vector<double>& d) { adata.push_back(&d); });
  visit_param_data(grads, [&](const std::string&, const std::vector<double>& d) { gdata.push_back(&d); });
  if (pdata.size() != gdata.size() || pdata.size() != adata.size())
    throw std::invalid_argument("rmsprop_update: parameter/gradient layout mismatch");
  for (std::size_t k = 0; k < pdata.size(); ++k) {
    auto& p = *pdata[k];
    auto& a = *adata[k];
    const auto& g = *gdata[k];
    if (p.size() != g.size() || p.size() != a.size())
      throw std::invalid_argument("rmsprop_update: parameter/gradient shape mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      a[i] = state.rho * a[i] + (1.0 - state.rho) * g[i] * g[i];
      p[i] -= state.learning_rate * g[i] / (std::sqrt(a[i]) + state.epsilon);
    }
  }
}

struct EvalResult {
  double accuracy = 0.0;
  long correct = 0;
  long total = 0;
  std::vector<std::vector<long>> confusion;  // [true label][predicted]
};

// Argmax ties break toward the lowest class index.
inline int argmax_class(const Vector& probs) {
  int best = 0;
  for (int k = 1; k < static_cast<int>(probs.size()); ++k)
    if (probs[k] > probs[best]) best = k;
  return best;
}

inline EvalResult evaluate(const Model& model, const std::vector<SamplePair>& dataset) {
  if (dataset.empty()) throw std::invalid_argument("evaluate: empty dataset");
  EvalResult r;
  const int k = model.config.num_classes;
  r.confusion.assign(k, std::vector<long>(k, 0));
  for (const auto& sample : dataset) {
    const int pred = argmax_class(predict(model, sample));
    r.confusion[sample.label][pred] += 1;
    if (pred == sample.label) ++r.correct;
    ++r.total;
  }
  r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.total);
  return r;
}

struct EpochStats {
  int epoch = 0;           // 1-based
  double train_loss = 0.0; // mean cross-entropy over the epoch's samples
  double valid_accuracy = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> history;
};

namespace detail {

// Stream tags; dataset splits use 0..2, so keep these clear of that range.
constexpr std::uint64_t kShuffleTag = 10;
constexpr std::uint64_t kDropoutTag = 11;

inline void fisher_yates(std::vector<int>& idx, RngStream& stream) {
  for (std::size_t i = idx.size(); i-- > 1;) {
    const std::size_t j = static_cast<std::size_t>(stream.next_u64() % (i + 1));
    std::swap(idx[i], idx[j]);
  }
}

}  // namespace detail

// One rmsprop update per batch using the batch-mean gradient; gradients are
// accumulated sample by sample in a fixed order. Validation accuracy is
// recorded per epoch but never gates training.
inline TrainResult train(Model& model, const std::vector<SamplePair>& train_set,
                         const std::vector<SamplePair>& valid_set, const TrainConfig& cfg) {
  if (cfg.epochs < 1 || cfg.batch_size < 1)
    throw std::invalid_argument("train: epochs and batch_size must be >= 1");
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  for (const auto& s : train_set) validate_sample(model.config, s);
  for (const auto& s : valid_set) validate_sample(model.config, s);

  RmspropState opt = init_rmsprop(model, cfg.learning_rate, cfg.rho, cfg.epsilon);
  RngStream shuffle_stream(derive_seed(cfg.seed, detail::kShuffleTag));
  RngStream dropout_stream(derive_seed(cfg.seed, detail::kDropoutTag));

  std::vector<int> idx(train_set.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);

  TrainResult result;
  Model grads = zeroed_like(model);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.shuffle) detail::fisher_yates(idx, shuffle_stream);
    double loss_sum = 0.0;
    std::size_t cursor = 0;
    while (cursor < idx.size()) {
      const std::size_t batch_end = std::min(cursor + static_cast<std::size_t>(cfg.batch_size), idx.size());
      const double inv_batch = 1.0 / static_cast<double>(batch_end - cursor);
      visit_param_data(grads, [](const std::string&, std::vector<double>& d) {
        d.assign(d.size(), 0.0);
      });
      for (std::size_t k = cursor; k < batch_end; ++k) {
        const SamplePair& sample = train_set[static_cast<std::size_t>(idx[k])];
        ModelCache cache = model_forward(model, sample, true, dropout_stream);
        loss_sum += cross_entropy(cache.probs, sample.label);
        model_backward(model, cache, sample.label, grads);
      }
      visit_param_data(grads, [&](const std::string&, std::vector<double>& d) {
        for (auto& v : d) v *= inv_batch;
      });
      rmsprop_update(opt, model, grads);
      cursor = batch_end;
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(train_set.size());
    stats.valid_accuracy = valid_set.empty() ? 0.0 : evaluate(model, valid_set).accuracy;
    result.history.push_back(stats);
  }
  return result;
}

}  // namespace fuselstm
