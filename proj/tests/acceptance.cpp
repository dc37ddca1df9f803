// Acceptance suite: runs every gate criterion at its stated tolerance and
// prints one PASS/FAIL line per criterion. Exit code is the number of
// failures. The fusion-ordering experiment trains seven configurations at
// desk scale, so a full run takes several minutes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "fuselstm/checkpoint.hpp"
#include "fuselstm/data.hpp"
#include "fuselstm/experiments.hpp"
#include "fuselstm/gradcheck.hpp"
#include "fuselstm/network.hpp"
#include "fuselstm/training.hpp"
#include "phase_oracle.hpp"

using namespace fuselstm;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
  std::printf("[%s] %-24s %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("fuselstm_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// ---- 1. gradient correctness ---------------------------------------------

void criterion_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::string worst_desc;
  for (CellKind cell : {CellKind::conventional, CellKind::glf, CellKind::slf}) {
    ModelConfig c;
    c.cell = cell;
    c.fusion = cell == CellKind::conventional ? FusionStrategy::none_h : FusionStrategy::joint;
    c.input_dim = 3;
    c.hidden_dim = 4;
    c.steps = 5;
    c.bidirectional = true;
    c.attention = true;
    c.dropout = 0.1;
    c.num_classes = 3;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const GradCheckReport rep = model_gradient_check(c, seed);
      if (rep.max_rel_err > worst) {
        worst = rep.max_rel_err;
        worst_desc = std::string(to_string(cell)) + " seed " + std::to_string(seed) + " at " +
                     rep.worst_param;
      }
    }
  }
  const double elapsed = seconds_since(t0);
  char detail[256];
  std::snprintf(detail, sizeof(detail),
                "max relative error %.3e (tol 1e-4, worst: %s), %.1f s (limit 60)", worst,
                worst_desc.c_str(), elapsed);
  report("gradient-correctness", worst < 1e-4 && elapsed < 60.0, detail);
}

// ---- 2. cell algebra -------------------------------------------------------

void criterion_cell_algebra() {
  bool ok = true;
  std::string why;
  RngStream stream(101);
  const int input_dim = 3, hidden = 4;
  const Vector hx = sample_gaussian(stream, input_dim);
  const Vector vx = sample_gaussian(stream, input_dim);
  const CellState prev0 = zero_state(hidden);
  const CellState prev_rand{sample_gaussian(stream, hidden), sample_gaussian(stream, hidden)};

  // zero-parameter fixed points
  {
    RngStream init(102);
    CellParams conv = zeroed_like(init_cell_params(CellKind::conventional, input_dim, hidden, init));
    CellParams glf = zeroed_like(init_cell_params(CellKind::glf, input_dim, hidden, init));
    CellParams slf = zeroed_like(init_cell_params(CellKind::slf, input_dim, hidden, init));
    const auto [ch, cc] = conv_lstm_step(conv, hx, prev0);
    const auto [gh, gc] = glf_lstm_step(glf, hx, vx, prev0);
    const auto [sh, sc] = slf_lstm_step(slf, hx, vx, prev0);
    for (int i = 0; i < hidden; ++i) {
      if (ch.h[i] != 0.0 || ch.c[i] != 0.0 || gh.h[i] != 0.0 || gh.c[i] != 0.0 ||
          sh.h[i] != 0.0 || sh.c[i] != 0.0) {
        ok = false;
        why = "zero-parameter fixed point violated";
      }
      if (gc.fused_i[i] != 1.0 || gc.fused_f[i] != 1.0 || gc.fused_o[i] != 1.0) {
        ok = false;
        why = "glf fused gates not exactly 1.0 at zero parameters";
      }
    }
  }

  // stream-swap symmetry, bit exact
  for (CellKind kind : {CellKind::glf, CellKind::slf}) {
    RngStream init(103 + static_cast<int>(kind));
    CellParams p = init_cell_params(kind, input_dim, hidden, init);
    CellParams swapped = p;
    for (int b = 0; b < 4; ++b) std::swap(swapped.blocks[b], swapped.blocks[4 + b]);
    const CellState a = kind == CellKind::glf ? glf_lstm_step(p, hx, vx, prev_rand).first
                                              : slf_lstm_step(p, hx, vx, prev_rand).first;
    const CellState b = kind == CellKind::glf ? glf_lstm_step(swapped, vx, hx, prev_rand).first
                                              : slf_lstm_step(swapped, vx, hx, prev_rand).first;
    if (a.h != b.h || a.c != b.c) {
      ok = false;
      why = "stream-swap symmetry not bit-exact for " + std::string(to_string(kind));
    }
  }

  // stream-duplication doubling, exact
  {
    RngStream init(107);
    CellParams glf = init_cell_params(CellKind::glf, input_dim, hidden, init);
    for (int b = 0; b < 4; ++b) glf.blocks[4 + b] = glf.blocks[b];
    const auto [next, cache] = glf_lstm_step(glf, hx, hx, prev_rand);
    for (int i = 0; i < hidden; ++i)
      if (cache.fused_i[i] != 2.0 * cache.gate_i[0][i] ||
          cache.fused_f[i] != 2.0 * cache.gate_f[0][i] ||
          cache.fused_o[i] != 2.0 * cache.gate_o[0][i] ||
          cache.fused_cand[i] != 2.0 * cache.cand[0][i]) {
        ok = false;
        why = "glf duplication doubling not exact";
      }
    CellParams slf = init_cell_params(CellKind::slf, input_dim, hidden, init);
    for (int b = 0; b < 4; ++b) slf.blocks[4 + b] = slf.blocks[b];
    const auto [snext, scache] = slf_lstm_step(slf, hx, hx, prev_rand);
    for (int i = 0; i < hidden; ++i)
      if (snext.h[i] != 2.0 * scache.h_dir[0][i] || snext.c[i] != 2.0 * scache.c_dir[0][i]) {
        ok = false;
        why = "slf duplication doubling not exact";
      }
  }

  // gate ranges on random instances
  {
    RngStream init(108);
    CellParams conv = init_cell_params(CellKind::conventional, input_dim, hidden, init);
    CellParams glf = init_cell_params(CellKind::glf, input_dim, hidden, init);
    for (int trial = 0; trial < 25; ++trial) {
      const Vector a = sample_gaussian(stream, input_dim);
      const Vector b = sample_gaussian(stream, input_dim);
      const CellState prev{sample_gaussian(stream, hidden), sample_gaussian(stream, hidden)};
      const StepCache cc = conv_lstm_step(conv, a, prev).second;
      const StepCache gc = glf_lstm_step(glf, a, b, prev).second;
      for (int i = 0; i < hidden; ++i) {
        const bool conv_ok = cc.gate_i[0][i] > 0.0 && cc.gate_i[0][i] < 1.0 &&
                             cc.gate_f[0][i] > 0.0 && cc.gate_f[0][i] < 1.0 &&
                             cc.gate_o[0][i] > 0.0 && cc.gate_o[0][i] < 1.0;
        const bool glf_ok = gc.fused_i[i] > 0.0 && gc.fused_i[i] < 2.0 && gc.fused_f[i] > 0.0 &&
                            gc.fused_f[i] < 2.0 && gc.fused_o[i] > 0.0 && gc.fused_o[i] < 2.0;
        if (!conv_ok || !glf_ok) {
          ok = false;
          why = "gate range violated";
        }
      }
    }
  }

  report("cell-algebra", ok, ok ? "fixed points, swap symmetry, duplication, gate ranges" : why);
}

// ---- 3. attention / classifier -------------------------------------------

void criterion_attention_classifier() {
  bool ok = true;
  std::string why;

  AttentionParams att;
  att.wh = Matrix(1, 6);
  att.bh = {0.0};
  RngStream stream(110);
  std::vector<Vector> seq;
  for (int i = 0; i < 15; ++i) seq.push_back(sample_gaussian(stream, 6));
  const AttentionCache cache = attention_forward(att, seq);
  double sum = 0.0;
  for (double w : cache.weights) {
    sum += w;
    if (std::fabs(w - 1.0 / 15.0) > 1e-12) {
      ok = false;
      why = "weights not uniform under zero attention parameters";
    }
  }
  if (std::fabs(sum - 1.0) > 1e-12) {
    ok = false;
    why = "attention weights do not sum to 1";
  }

  // non-zero attention parameters still sum to 1
  att.wh = glorot_uniform(stream, 1, 6);
  att.bh = {0.3};
  const AttentionCache cache2 = attention_forward(att, seq);
  double sum2 = 0.0;
  for (double w : cache2.weights) sum2 += w;
  if (std::fabs(sum2 - 1.0) > 1e-12) {
    ok = false;
    why = "attention weights do not sum to 1 (random params)";
  }

  const Vector logits = {0.4, -1.1, 2.2, 0.0};
  const Vector p1 = softmax(logits);
  Vector shifted = logits;
  for (auto& v : shifted) v += 123.456;
  const Vector p2 = softmax(shifted);
  for (int k = 0; k < 4; ++k)
    if (std::fabs(p1[k] - p2[k]) > 1e-12) {
      ok = false;
      why = "softmax shift invariance violated";
    }

  const double ce = cross_entropy({0.25, 0.25, 0.25, 0.25}, 3);
  if (std::fabs(ce - std::log(4.0)) > 1e-12) {
    ok = false;
    why = "uniform cross-entropy differs from ln 4";
  }

  report("attention-classifier", ok,
         ok ? "weight normalization, shift invariance, uniform cross-entropy" : why);
}

// ---- 4 + 5. fusion ordering and ablations ---------------------------------

struct FusionResults {
  std::vector<FusionOutcome> outcomes;
  DatasetSplits data;
  CompareFusionOptions opt;
};

FusionResults run_fusion_experiment() {
  FusionResults r;
  r.opt.base_seed = 1;
  r.opt.task.seed = r.opt.base_seed;
  r.opt.threads = 1;  // the runtime budget is for one core
  r.data = generate_splits(r.opt.task);
  r.outcomes = run_compare_fusion(r.opt, r.data, "");
  return r;
}

void criterion_fusion_ordering(const FusionResults& r, double elapsed) {
  double acc[7];
  for (int i = 0; i < 7; ++i) acc[i] = r.outcomes[i].test_accuracy;
  // order: none_h, none_v, feat1, feat2, score, glf, slf
  const bool joint_ok = acc[5] >= 0.85 && acc[6] >= 0.85;
  const bool baseline_ok = acc[0] <= 0.40 && acc[1] <= 0.40 && acc[4] <= 0.40;
  const bool time_ok = elapsed < 900.0;
  char detail[384];
  std::snprintf(detail, sizeof(detail),
                "glf %.3f slf %.3f (>=0.85) | none_h %.3f none_v %.3f score %.3f (<=0.40) | "
                "feat1 %.3f feat2 %.3f (reported) | %.0f s (limit 900)",
                acc[5], acc[6], acc[0], acc[1], acc[4], acc[2], acc[3], elapsed);
  report("fusion-ordering", joint_ok && baseline_ok && time_ok, detail);
}

void criterion_ablations(const FusionResults& r) {
  // same dataset, same model/train seeds for all three variants; only the
  // architecture flags change
  const std::uint64_t model_seed = derive_seed(r.opt.base_seed, 500);
  const std::uint64_t train_seed = derive_seed(r.opt.base_seed, 501);
  TrainConfig tc = r.opt.train;
  tc.seed = train_seed;

  const auto run_variant = [&](bool bidirectional, bool attention) {
    ModelConfig mc = fusion_model_config(fusion_rows()[5], r.opt);  // glf joint
    mc.bidirectional = bidirectional;
    mc.attention = attention;
    return train_single_config(mc, tc, model_seed, r.data).test_accuracy;
  };
  const double full = run_variant(true, true);
  const double uni = run_variant(false, true);
  const double no_att = run_variant(true, false);

  const bool ok = full >= uni - 0.02 && full >= no_att - 0.02;
  char detail[256];
  std::snprintf(detail, sizeof(detail),
                "bi+att %.3f vs uni+att %.3f, bi-no-att %.3f (margin 2pp)", full, uni, no_att);
  report("ablation-direction", ok, detail);
}

// ---- 6. determinism and round trips ----------------------------------------

void criterion_determinism() {
  bool ok = true;
  std::string why;

  TaskConfig task;
  task.num_classes = 3;
  task.dim = 3;
  task.steps = 5;
  task.train_per_class = 8;
  task.valid_per_class = 3;
  task.test_per_class = 3;
  task.seed = 77;

  // dataset bytes
  const fs::path d1 = fresh_dir("ds1");
  const fs::path d2 = fresh_dir("ds2");
  generate_dataset(task, d1.string(), true);
  generate_dataset(task, d2.string(), true);
  for (const char* f : {"metadata.json", "train.jsonl", "valid.jsonl", "test.jsonl"})
    if (read_text_file((d1 / f).string()) != read_text_file((d2 / f).string())) {
      ok = false;
      why = std::string("dataset file differs: ") + f;
    }

  // checkpoint bytes + evaluation round trip
  const DatasetSplits data = load_splits(d1.string());
  ModelConfig mc;
  mc.cell = CellKind::glf;
  mc.fusion = FusionStrategy::joint;
  mc.input_dim = task.dim;
  mc.hidden_dim = 5;
  mc.steps = task.steps;
  mc.num_classes = task.num_classes;
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 8;
  tc.seed = 78;
  const fs::path ckdir = fresh_dir("ck");
  std::string bytes[2];
  for (int i = 0; i < 2; ++i) {
    const TrainedConfig trained = train_single_config(mc, tc, derive_seed(78, 12), data);
    CheckpointMeta meta;
    meta.seed = tc.seed;
    meta.epoch = tc.epochs;
    meta.final_train_loss = trained.final_train_loss;
    meta.final_valid_accuracy = trained.final_valid_accuracy;
    const std::string path = (ckdir / ("run" + std::to_string(i) + ".json")).string();
    save_checkpoint(trained.model, nullptr, meta, path);
    bytes[i] = read_text_file(path);
  }
  if (bytes[0] != bytes[1]) {
    ok = false;
    why = "checkpoint bytes differ across identical runs";
  }

  // save -> load preserves evaluation bit-exactly on 10 samples
  {
    const Checkpoint ck = load_checkpoint((ckdir / "run0.json").string());
    const TrainedConfig trained = train_single_config(mc, tc, derive_seed(78, 12), data);
    RngStream sstream(79);
    for (int i = 0; i < 10; ++i) {
      const SamplePair sp = generate_sample(task, i % task.num_classes, sstream);
      if (predict(trained.model, sp) != predict(ck.model, sp)) {
        ok = false;
        why = "loaded checkpoint evaluates differently";
      }
    }
  }

  // report bytes on a miniature comparison
  {
    CompareFusionOptions opt;
    opt.task = task;
    opt.base_seed = 80;
    opt.task.seed = 80;
    opt.hidden_dim = 4;
    opt.train.epochs = 2;
    opt.train.batch_size = 8;
    opt.threads = 2;
    const DatasetSplits mini = generate_splits(opt.task);
    const auto out1 = run_compare_fusion(opt, mini, "");
    const auto out2 = run_compare_fusion(opt, mini, "");
    if (render_compare_report(opt, out1) != render_compare_report(opt, out2)) {
      ok = false;
      why = "report bytes differ across identical runs";
    }
  }

  report("determinism-roundtrip", ok,
         ok ? "dataset, checkpoint and report bytes identical; eval bit-exact after reload" : why);
}

// ---- 7. oracle classifier ---------------------------------------------------

void criterion_oracle_classifier() {
  TaskConfig task;
  task.noise_sigma = 0.0;
  task.seed = 5;
  int correct = 0, total = 0;
  for (Split split : {Split::valid, Split::test}) {
    for (const auto& sp : generate_split(task, split)) {
      correct += fuselstm::testing::phase_oracle_classify(task, sp) == sp.label;
      ++total;
    }
  }
  char detail[128];
  std::snprintf(detail, sizeof(detail), "nearest-phase classifier %d/%d on noiseless data", correct,
                total);
  report("oracle-classifier", correct == total, detail);
}

}  // namespace

int main() {
  std::printf("acceptance suite\n");
  criterion_gradients();
  criterion_cell_algebra();
  criterion_attention_classifier();
  criterion_oracle_classifier();
  criterion_determinism();

  const auto t0 = std::chrono::steady_clock::now();
  const FusionResults fusion = run_fusion_experiment();
  const double elapsed = seconds_since(t0);
  criterion_fusion_ordering(fusion, elapsed);
  criterion_ablations(fusion);

  std::printf("%d criterion(s) failed\n", g_failures);
  return g_failures;
}
