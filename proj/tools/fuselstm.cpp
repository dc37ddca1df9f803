// fuselstm CLI: dataset generation, training, evaluation, gradient checking
// and the fusion-strategy comparison. Exit codes: 0 success, 1 runtime
// failure, 2 usage error, 3 gradient-check tolerance breach.

#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fuselstm/checkpoint.hpp"
#include "fuselstm/data.hpp"
#include "fuselstm/experiments.hpp"
#include "fuselstm/gradcheck.hpp"
#include "fuselstm/network.hpp"
#include "fuselstm/training.hpp"

namespace fs = std::filesystem;
using namespace fuselstm;

namespace {

constexpr std::uint64_t kModelInitTag = 12;  // model init stream, derived from --seed

int usage_error(const std::string& msg) {
  std::cerr << "usage error: " << msg << "\n";
  return 2;
}

struct GenDataArgs {
  TaskConfig task;
  std::string out;
  bool force = false;
};

int run_gen_data(const GenDataArgs& a) {
  generate_dataset(a.task, a.out, a.force);
  const int total_per_class = a.task.train_per_class + a.task.valid_per_class + a.task.test_per_class;
  std::cout << "wrote dataset to " << a.out << " (" << a.task.num_classes << " classes, "
            << total_per_class * a.task.num_classes << " samples)\n";
  return 0;
}

struct TrainArgs {
  std::string data;
  std::string out = "checkpoint.json";
  std::string history;
  std::string cell = "glf";
  std::string fusion = "joint";
  int hidden = 32;
  double dropout = 0.1;
  bool bidirectional = true;
  bool attention = true;
  TrainConfig train;
};

int run_train(const TrainArgs& a) {
  const TaskConfig task = load_task_config(a.data);
  ModelConfig mc;
  mc.cell = cell_kind_from_string(a.cell);
  mc.fusion = fusion_from_string(a.fusion);
  mc.input_dim = task.dim;
  mc.hidden_dim = a.hidden;
  mc.steps = task.steps;
  mc.bidirectional = a.bidirectional;
  mc.attention = a.attention;
  mc.dropout = a.dropout;
  mc.num_classes = task.num_classes;
  try {
    validate_config(mc);
  } catch (const std::invalid_argument& e) {
    return usage_error(e.what());
  }

  DatasetSplits data{load_split(a.data, Split::train), load_split(a.data, Split::valid), {}};
  const std::uint64_t model_seed = derive_seed(a.train.seed, kModelInitTag);
  const TrainedConfig trained = train_single_config(mc, a.train, model_seed, data);

  CheckpointMeta meta;
  meta.seed = a.train.seed;
  meta.epoch = a.train.epochs;
  meta.final_train_loss = trained.final_train_loss;
  meta.final_valid_accuracy = trained.final_valid_accuracy;
  save_checkpoint(trained.model, nullptr, meta, a.out);
  if (!a.history.empty()) write_text_file(a.history, render_history(mc, a.train, trained.history));

  std::printf("trained %s/%s for %d epochs: final train loss %.6f, valid accuracy %.4f\n",
              a.cell.c_str(), a.fusion.c_str(), a.train.epochs, trained.final_train_loss,
              trained.final_valid_accuracy);
  std::cout << "checkpoint written to " << a.out << "\n";
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string split = "test";
};

int run_eval(const EvalArgs& a) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const std::vector<SamplePair> samples = load_split(a.data, split_from_string(a.split));
  const EvalResult r = evaluate(ck.model, samples);
  std::printf("rank-1 accuracy: %.6f (%ld/%ld correct, split=%s)\n", r.accuracy, r.correct, r.total,
              a.split.c_str());
  return 0;
}

struct GradcheckArgs {
  std::string cell = "glf";
  double tol = 1e-4;
  std::uint64_t seed = 1;
  int num_seeds = 3;
  int input_dim = 3;
  int hidden = 4;
  int steps = 5;
  int classes = 3;
  double dropout = 0.1;
  bool bidirectional = true;
  bool attention = true;
  std::string report_path;
};

int run_gradcheck(const GradcheckArgs& a) {
  ModelConfig mc;
  mc.cell = cell_kind_from_string(a.cell);
  mc.fusion = mc.cell == CellKind::conventional ? FusionStrategy::none_h : FusionStrategy::joint;
  mc.input_dim = a.input_dim;
  mc.hidden_dim = a.hidden;
  mc.steps = a.steps;
  mc.bidirectional = a.bidirectional;
  mc.attention = a.attention;
  mc.dropout = a.dropout;
  mc.num_classes = a.classes;
  try {
    validate_config(mc);
  } catch (const std::invalid_argument& e) {
    return usage_error(e.what());
  }

  double overall = 0.0;
  std::string worst;
  std::vector<std::pair<std::uint64_t, double>> per_seed;
  for (int i = 0; i < a.num_seeds; ++i) {
    const std::uint64_t seed = derive_seed(a.seed, static_cast<std::uint64_t>(i));
    const GradCheckReport rep = model_gradient_check(mc, seed);
    per_seed.emplace_back(seed, rep.max_rel_err);
    std::printf("seed %d: max relative error %.3e over %zu parameters (worst: %s)\n", i,
                rep.max_rel_err, rep.checked, rep.worst_param.c_str());
    if (rep.max_rel_err > overall) {
      overall = rep.max_rel_err;
      worst = rep.worst_param;
    }
  }
  std::printf("gradcheck %s: max relative error %.3e (tolerance %.1e)\n", a.cell.c_str(), overall,
              a.tol);

  if (!a.report_path.empty()) {
    JsonWriter w;
    w.begin_object();
    w.key("format_version").value(kReportFormatVersion);
    w.key("kind").value("report");
    w.key("experiment").value("gradcheck");
    w.key("cell").value(a.cell);
    w.key("tolerance").value(a.tol);
    w.key("base_seed").value(a.seed);
    w.key("max_rel_err").value(overall);
    w.key("seeds").begin_array();
    for (const auto& [seed, err] : per_seed) {
      w.begin_object();
      w.key("seed").value(seed);
      w.key("max_rel_err").value(err);
      w.end_object();
    }
    w.end_array();
    w.end_object();
    write_text_file(a.report_path, w.str() + "\n");
  }
  return overall < a.tol ? 0 : 3;
}

struct CompareArgs {
  std::string out;
  std::string data;  // optional existing dataset
  CompareFusionOptions opt;
  int threads = 0;  // 0: env or 1
};

int run_compare_fusion(CompareArgs a) {
  a.opt.threads = a.threads > 0 ? a.threads : env_thread_count(1);
  DatasetSplits data;
  fs::create_directories(a.out);
  if (!a.data.empty()) {
    a.opt.task = load_task_config(a.data);
    data = load_splits(a.data);
  } else {
    a.opt.task.seed = a.opt.base_seed;
    generate_dataset(a.opt.task, (fs::path(a.out) / "dataset").string(), true);
    data = generate_splits(a.opt.task);
  }

  const auto outcomes =
      run_compare_fusion(a.opt, data, (fs::path(a.out) / "checkpoints").string());

  write_text_file((fs::path(a.out) / "report.json").string(), render_compare_report(a.opt, outcomes));
  write_text_file((fs::path(a.out) / "timings.txt").string(), render_timings(outcomes));

  std::printf("%-8s %-6s %-10s %s\n", "name", "cell", "test acc", "final train loss");
  for (const auto& out : outcomes)
    std::printf("%-8s %-6s %-10.4f %.6f\n", out.row.name.c_str(), to_string(out.row.cell),
                out.test_accuracy, out.final_train_loss);
  std::cout << "report written to " << (fs::path(a.out) / "report.json").string() << "\n";
  return 0;
}

void add_task_flags(CLI::App* cmd, TaskConfig& task) {
  cmd->add_option("--classes", task.num_classes, "number of classes")->check(CLI::Range(2, 1 << 20));
  cmd->add_option("--dim", task.dim, "embedding dimension per stream")->check(CLI::PositiveNumber);
  cmd->add_option("--steps", task.steps, "sequence length")->check(CLI::Range(2, 1 << 20));
  cmd->add_option("--freq", task.freq, "sinusoid cycles over the sequence");
  cmd->add_option("--noise", task.noise_sigma, "additive noise sigma")->check(CLI::NonNegativeNumber);
  cmd->add_option("--train-per-class", task.train_per_class, "training samples per class")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--valid-per-class", task.valid_per_class, "validation samples per class")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--test-per-class", task.test_per_class, "test samples per class")
      ->check(CLI::PositiveNumber);
}

void add_train_flags(CLI::App* cmd, TrainConfig& t) {
  cmd->add_option("--epochs", t.epochs, "training epochs")->check(CLI::PositiveNumber);
  cmd->add_option("--batch", t.batch_size, "mini-batch size")->check(CLI::PositiveNumber);
  cmd->add_option("--lr", t.learning_rate, "rmsprop learning rate");
  cmd->add_option("--rho", t.rho, "rmsprop squared-gradient decay");
  cmd->add_option("--epsilon", t.epsilon, "rmsprop epsilon");
  cmd->add_flag("--shuffle,!--no-shuffle", t.shuffle, "shuffle training samples per epoch");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-input LSTM cells (gate- and state-level fusion) on a synthetic dual-sequence task"};
  app.require_subcommand(1);
  std::function<int()> action;

  // gen-data
  auto gen_args = std::make_shared<GenDataArgs>();
  CLI::App* gen = app.add_subcommand("gen-data", "generate the synthetic dual-sequence dataset");
  gen->add_option("--out", gen_args->out, "output dataset directory")->required();
  add_task_flags(gen, gen_args->task);
  gen->add_option("--seed", gen_args->task.seed, "dataset seed");
  gen->add_flag("--force", gen_args->force, "overwrite an existing dataset directory");
  gen->callback([&action, gen_args]() { action = [gen_args]() { return run_gen_data(*gen_args); }; });

  // train
  auto train_args = std::make_shared<TrainArgs>();
  CLI::App* train = app.add_subcommand("train", "train a model on a generated dataset");
  train->add_option("--data", train_args->data, "dataset directory")->required();
  train->add_option("--out", train_args->out, "checkpoint output path");
  train->add_option("--history", train_args->history, "per-epoch history output path");
  train->add_option("--cell", train_args->cell, "cell architecture")
      ->check(CLI::IsMember({"conv", "glf", "slf"}));
  train->add_option("--fusion", train_args->fusion, "fusion strategy")
      ->check(CLI::IsMember({"joint", "none_h", "none_v", "feat1", "feat2", "score"}));
  train->add_option("--hidden", train_args->hidden, "hidden state size")->check(CLI::PositiveNumber);
  train->add_option("--dropout", train_args->dropout, "encoder input dropout rate")
      ->check(CLI::Range(0.0, 0.999));
  train->add_flag("--bidirectional,!--no-bidirectional", train_args->bidirectional,
                  "bi-directional encoder");
  train->add_flag("--attention,!--no-attention", train_args->attention,
                  "attention layer (mean pooling when disabled)");
  add_train_flags(train, train_args->train);
  train->add_option("--seed", train_args->train.seed, "training seed (model init derives from it)");
  train->callback([&action, train_args]() { action = [train_args]() { return run_train(*train_args); }; });

  // eval
  auto eval_args = std::make_shared<EvalArgs>();
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset split");
  eval->add_option("--checkpoint", eval_args->checkpoint, "checkpoint path")->required();
  eval->add_option("--data", eval_args->data, "dataset directory")->required();
  eval->add_option("--split", eval_args->split, "dataset split")
      ->check(CLI::IsMember({"train", "valid", "test"}));
  eval->callback([&action, eval_args]() { action = [eval_args]() { return run_eval(*eval_args); }; });

  // gradcheck
  auto gc_args = std::make_shared<GradcheckArgs>();
  CLI::App* gc = app.add_subcommand("gradcheck", "whole-model finite-difference gradient check");
  gc->add_option("--cell", gc_args->cell, "cell architecture")
      ->check(CLI::IsMember({"conv", "glf", "slf"}));
  gc->add_option("--tol", gc_args->tol, "max relative error tolerance");
  gc->add_option("--seed", gc_args->seed, "base seed");
  gc->add_option("--seeds", gc_args->num_seeds, "number of seeds to check")->check(CLI::PositiveNumber);
  gc->add_option("--input-dim", gc_args->input_dim, "input dimension")->check(CLI::PositiveNumber);
  gc->add_option("--hidden", gc_args->hidden, "hidden state size")->check(CLI::PositiveNumber);
  gc->add_option("--steps", gc_args->steps, "sequence length")->check(CLI::PositiveNumber);
  gc->add_option("--classes", gc_args->classes, "number of classes")->check(CLI::Range(2, 1 << 20));
  gc->add_option("--dropout", gc_args->dropout, "dropout rate")->check(CLI::Range(0.0, 0.999));
  gc->add_flag("--bidirectional,!--no-bidirectional", gc_args->bidirectional, "bi-directional encoder");
  gc->add_flag("--attention,!--no-attention", gc_args->attention, "attention layer");
  gc->add_option("--report", gc_args->report_path, "write a JSON report to this path");
  gc->callback([&action, gc_args]() { action = [gc_args]() { return run_gradcheck(*gc_args); }; });

  // compare-fusion
  auto cmp_args = std::make_shared<CompareArgs>();
  CLI::App* cmp = app.add_subcommand(
      "compare-fusion", "train all fusion strategies on one dataset and write a report");
  cmp->add_option("--out", cmp_args->out, "output directory for report and checkpoints")->required();
  cmp->add_option("--data", cmp_args->data,
                  "existing dataset directory (default: generate under --out)");
  add_task_flags(cmp, cmp_args->opt.task);
  add_train_flags(cmp, cmp_args->opt.train);
  cmp->add_option("--hidden", cmp_args->opt.hidden_dim, "hidden state size")->check(CLI::PositiveNumber);
  cmp->add_option("--dropout", cmp_args->opt.dropout, "dropout rate")->check(CLI::Range(0.0, 0.999));
  cmp->add_flag("--bidirectional,!--no-bidirectional", cmp_args->opt.bidirectional,
                "bi-directional encoders");
  cmp->add_flag("--attention,!--no-attention", cmp_args->opt.attention, "attention layers");
  cmp->add_option("--seed", cmp_args->opt.base_seed, "shared base seed");
  cmp->add_option("--threads", cmp_args->threads,
                  "configurations trained in parallel (default: FUSELSTM_THREADS or 1)");
  cmp->callback([&action, cmp_args]() {
    action = [cmp_args]() { return run_compare_fusion(*cmp_args); };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exits 0
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    return action ? action() : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
