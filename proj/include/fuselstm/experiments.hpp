#pragma once

// The fusion-strategy comparison: seven configurations (no-fusion H, V,
// feature-level 1 and 2, score-level, joint GLF, joint SLF) trained on one
// shared dataset from one base seed, varying only the architecture.
// Per-configuration seeds are derived from the base seed so the whole
// experiment is reproducible; wall-clock timings go to a sidecar file
// because report files must be byte-identical across identical runs.

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "fuselstm/checkpoint.hpp"
#include "fuselstm/data.hpp"
#include "fuselstm/network.hpp"
#include "fuselstm/serialize.hpp"
#include "fuselstm/training.hpp"

namespace fuselstm {

struct DatasetSplits {
  std::vector<SamplePair> train;
  std::vector<SamplePair> valid;
  std::vector<SamplePair> test;
};

inline DatasetSplits generate_splits(const TaskConfig& task) {
  return DatasetSplits{generate_split(task, Split::train), generate_split(task, Split::valid),
                       generate_split(task, Split::test)};
}

inline DatasetSplits load_splits(const std::string& dataset_dir) {
  return DatasetSplits{load_split(dataset_dir, Split::train), load_split(dataset_dir, Split::valid),
                       load_split(dataset_dir, Split::test)};
}

struct TrainedConfig {
  Model model;
  TrainResult history;
  double test_accuracy = 0.0;
  double final_train_loss = 0.0;
  double final_valid_accuracy = 0.0;
};

inline TrainedConfig train_single_config(const ModelConfig& config, const TrainConfig& train_cfg,
                                         std::uint64_t model_seed, const DatasetSplits& data) {
  TrainedConfig out;
  RngStream init_stream(model_seed);
  out.model = init_model(config, init_stream);
  out.history = train(out.model, data.train, data.valid, train_cfg);
  out.final_train_loss = out.history.history.back().train_loss;
  out.final_valid_accuracy = out.history.history.back().valid_accuracy;
  out.test_accuracy = data.test.empty() ? 0.0 : evaluate(out.model, data.test).accuracy;
  return out;
}

struct CompareFusionOptions {
  TaskConfig task;
  TrainConfig train;        // per-config seeds are derived from base_seed
  int hidden_dim = 32;
  bool bidirectional = true;
  bool attention = true;
  double dropout = 0.1;
  std::uint64_t base_seed = 1;
  int threads = 1;
};

struct FusionRow {
  std::string name;  // report row label
  FusionStrategy strategy;
  CellKind cell;
};

inline const std::vector<FusionRow>& fusion_rows() {
  static const std::vector<FusionRow> rows = {
      {"none_h", FusionStrategy::none_h, CellKind::conventional},
      {"none_v", FusionStrategy::none_v, CellKind::conventional},
      {"feat1", FusionStrategy::feat1, CellKind::conventional},
      {"feat2", FusionStrategy::feat2, CellKind::conventional},
      {"score", FusionStrategy::score, CellKind::conventional},
      {"glf", FusionStrategy::joint, CellKind::glf},
      {"slf", FusionStrategy::joint, CellKind::slf},
  };
  return rows;
}

struct FusionOutcome {
  FusionRow row;
  std::uint64_t model_seed = 0;
  std::uint64_t train_seed = 0;
  double test_accuracy = 0.0;
  double final_train_loss = 0.0;
  double final_valid_accuracy = 0.0;
  double seconds = 0.0;  // wall time; sidecar only
};

namespace detail {
constexpr std::uint64_t kModelSeedBase = 100;
constexpr std::uint64_t kTrainSeedBase = 200;
}  // namespace detail

inline ModelConfig fusion_model_config(const FusionRow& row, const CompareFusionOptions& opt) {
  ModelConfig mc;
  mc.cell = row.cell;
  mc.fusion = row.strategy;
  mc.input_dim = opt.task.dim;
  mc.hidden_dim = opt.hidden_dim;
  mc.steps = opt.task.steps;
  mc.bidirectional = opt.bidirectional;
  mc.attention = opt.attention;
  mc.dropout = opt.dropout;
  mc.num_classes = opt.task.num_classes;
  return mc;
}

// Trains every row; rows run concurrently when opt.threads > 1 (each owns
// its model and streams), results land in fixed slots so the outcome order
// never depends on scheduling. checkpoint_dir may be empty to skip saving.
inline std::vector<FusionOutcome> run_compare_fusion(const CompareFusionOptions& opt,
                                                     const DatasetSplits& data,
                                                     const std::string& checkpoint_dir) {
  const auto& rows = fusion_rows();
  std::vector<FusionOutcome> outcomes(rows.size());
  if (!checkpoint_dir.empty()) std::filesystem::create_directories(checkpoint_dir);

  const auto run_one = [&](std::size_t i) {
    const auto t0 = std::chrono::steady_clock::now();
    FusionOutcome& out = outcomes[i];
    out.row = rows[i];
    out.model_seed = derive_seed(opt.base_seed, detail::kModelSeedBase + i);
    out.train_seed = derive_seed(opt.base_seed, detail::kTrainSeedBase + i);
    TrainConfig tc = opt.train;
    tc.seed = out.train_seed;
    const TrainedConfig trained = train_single_config(fusion_model_config(rows[i], opt), tc,
                                                      out.model_seed, data);
    out.test_accuracy = trained.test_accuracy;
    out.final_train_loss = trained.final_train_loss;
    out.final_valid_accuracy = trained.final_valid_accuracy;
    if (!checkpoint_dir.empty()) {
      CheckpointMeta meta;
      meta.seed = out.model_seed;
      meta.epoch = tc.epochs;
      meta.final_train_loss = out.final_train_loss;
      meta.final_valid_accuracy = out.final_valid_accuracy;
      save_checkpoint(trained.model, nullptr, meta,
                      (std::filesystem::path(checkpoint_dir) / (rows[i].name + ".json")).string());
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  const int threads = std::max(1, opt.threads);
  if (threads == 1) {
    for (std::size_t i = 0; i < rows.size(); ++i) run_one(i);
  } else {
    std::vector<std::thread> pool;
    std::size_t next = 0;
    while (next < rows.size()) {
      const std::size_t batch = std::min<std::size_t>(threads, rows.size() - next);
      for (std::size_t t = 0; t < batch; ++t) pool.emplace_back(run_one, next + t);
      for (auto& th : pool) th.join();
      pool.clear();
      next += batch;
    }
  }
  return outcomes;
}

constexpr int kReportFormatVersion = 1;

inline void append_train_config(JsonWriter& w, const TrainConfig& t, bool include_seed) {
  w.begin_object();
  w.key("epochs").value(t.epochs);
  w.key("batch_size").value(t.batch_size);
  w.key("learning_rate").value(t.learning_rate);
  w.key("rho").value(t.rho);
  w.key("epsilon").value(t.epsilon);
  if (include_seed) w.key("seed").value(t.seed);
  w.key("shuffle").value(t.shuffle);
  w.end_object();
}

inline std::string render_compare_report(const CompareFusionOptions& opt,
                                         const std::vector<FusionOutcome>& outcomes) {
  JsonWriter w;
  w.begin_object();
  w.key("format_version").value(kReportFormatVersion);
  w.key("kind").value("report");
  w.key("experiment").value("compare-fusion");
  w.key("base_seed").value(opt.base_seed);
  w.key("task");
  append_task_config(w, opt.task);
  w.key("train");
  append_train_config(w, opt.train, false);
  w.key("model").begin_object();
  w.key("hidden_dim").value(opt.hidden_dim);
  w.key("bidirectional").value(opt.bidirectional);
  w.key("attention").value(opt.attention);
  w.key("dropout").value(opt.dropout);
  w.end_object();
  w.key("results").begin_array();
  for (const auto& out : outcomes) {
    w.begin_object();
    w.key("name").value(out.row.name);
    w.key("fusion").value(to_string(out.row.strategy));
    w.key("cell").value(to_string(out.row.cell));
    w.key("model_seed").value(out.model_seed);
    w.key("train_seed").value(out.train_seed);
    w.key("final_train_loss").value(out.final_train_loss);
    w.key("valid_accuracy").value(out.final_valid_accuracy);
    w.key("test_accuracy").value(out.test_accuracy);
    w.end_object();
  }
  w.end_array();
  w.end_object();
  return w.str() + "\n";
}

inline std::string render_timings(const std::vector<FusionOutcome>& outcomes) {
  std::string s = "# wall-clock seconds per configuration (not reproducible across runs)\n";
  double total = 0.0;
  for (const auto& out : outcomes) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%-8s %.3f\n", out.row.name.c_str(), out.seconds);
    s += buf;
    total += out.seconds;
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%-8s %.3f\n", "total", total);
  s += buf;
  return s;
}

inline std::string render_history(const ModelConfig& config, const TrainConfig& train_cfg,
                                  const TrainResult& result) {
  JsonWriter w;
  w.begin_object();
  w.key("format_version").value(kReportFormatVersion);
  w.key("kind").value("history");
  w.key("config");
  detail::append_model_config(w, config);
  w.key("train");
  append_train_config(w, train_cfg, true);
  w.key("epochs").begin_array();
  for (const auto& e : result.history) {
    w.begin_object();
    w.key("epoch").value(e.epoch);
    w.key("train_loss").value(e.train_loss);
    w.key("valid_accuracy").value(e.valid_accuracy);
    w.end_object();
  }
  w.end_array();
  w.end_object();
  return w.str() + "\n";
}

// Thread-count override, shared by every command that can run work in
// parallel: FUSELSTM_THREADS.
inline int env_thread_count(int fallback) {
  const char* env = std::getenv("FUSELSTM_THREADS");
  if (!env) return fallback;
  const int n = std::atoi(env);
  return n >= 1 ? n : fallback;
}

}  // namespace fuselstm
