#pragma once

// Synthetic dual-sequence benchmark. A sample is two length-n sequences of
// d-dim vectors tracing the same randomly-phased sinusoid along a random
// latent direction z; the class lives ONLY in the phase offset between the
// two streams, phi_c = 2*pi*c/K. Each stream's marginal distribution is the
// same for every class (theta is uniform), so single-stream models cannot do
// better than chance by construction.
//
// Draw order per sample (one dedicated stream per sample): z as d gaussians,
// theta as one uniform in [0, 2*pi), then per step i the noise eps_i (d
// gaussians, horizontal) followed by eta_i (d gaussians, vertical).
// Per-sample stream seed: derive_seed(derive_seed(dataset_seed, split_id),
// sample_index) with split ids train=0, valid=1, test=2 -- fixed so a
// regeneration with the same TaskConfig is byte-identical.
//
// Dataset directory layout: metadata.json plus train.jsonl / valid.jsonl /
// test.jsonl, one record per line: {"label": c, "h": [[...], ...], "v":
// [[...], ...]} with n rows of d doubles per stream, written with 17
// significant digits.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fuselstm/matrix.hpp"
#include "fuselstm/rng.hpp"
#include "fuselstm/serialize.hpp"

namespace fuselstm {

struct SamplePair {
  std::vector<Vector> h_seq;
  std::vector<Vector> v_seq;
  int label = 0;
};

struct TaskConfig {
  int num_classes = 4;
  int dim = 8;
  int steps = 15;
  double freq = 2.0;
  double noise_sigma = 0.1;
  int train_per_class = 200;
  int valid_per_class = 50;
  int test_per_class = 50;
  std::uint64_t seed = 1;
};

enum class Split { train = 0, valid = 1, test = 2 };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
  }
  throw std::logic_error("bad Split");
}

inline Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "valid") return Split::valid;
  if (s == "test") return Split::test;
  throw std::invalid_argument("unknown split '" + s + "' (expected train, valid or test)");
}

enum class FusionStrategy { joint, none_h, none_v, feat1, feat2, score };

inline const char* to_string(FusionStrategy f) {
  switch (f) {
    case FusionStrategy::joint: return "joint";
    case FusionStrategy::none_h: return "none_h";
    case FusionStrategy::none_v: return "none_v";
    case FusionStrategy::feat1: return "feat1";
    case FusionStrategy::feat2: return "feat2";
    case FusionStrategy::score: return "score";
  }
  throw std::logic_error("bad FusionStrategy");
}

inline FusionStrategy fusion_from_string(const std::string& s) {
  for (auto f : {FusionStrategy::joint, FusionStrategy::none_h, FusionStrategy::none_v,
                 FusionStrategy::feat1, FusionStrategy::feat2, FusionStrategy::score})
    if (s == to_string(f)) return f;
  throw std::invalid_argument("unknown fusion strategy '" + s +
                              "' (expected joint, none_h, none_v, feat1, feat2 or score)");
}

inline double class_phase(const TaskConfig& task, int label) {
  return 2.0 * M_PI * static_cast<double>(label) / static_cast<double>(task.num_classes);
}

inline std::uint64_t sample_seed(const TaskConfig& task, Split split, int index) {
  return derive_seed(derive_seed(task.seed, static_cast<std::uint64_t>(split)),
                     static_cast<std::uint64_t>(index));
}

// Deterministic core given the latent direction and global phase; `stream`
// supplies only the additive noise.
inline SamplePair generate_sample_with_latent(const TaskConfig& task, int label, const Vector& z,
                                              double theta, RngStream& stream) {
  if (label < 0 || label >= task.num_classes)
    throw std::invalid_argument("generate_sample: class " + std::to_string(label) +
                                " out of range [0, " + std::to_string(task.num_classes) + ")");
  const double phi = class_phase(task, label);
  SamplePair sp;
  sp.label = label;
  sp.h_seq.resize(task.steps);
  sp.v_seq.resize(task.steps);
  for (int i = 0; i < task.steps; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(task.steps - 1);
    const double angle = 2.0 * M_PI * task.freq * t + theta;
    const Vector eps = sample_gaussian(stream, task.dim);
    const Vector eta = sample_gaussian(stream, task.dim);
    Vector h(z.size()), v(z.size());
    const double ch = std::cos(angle);
    const double cv = std::cos(angle + phi);
    for (std::size_t j = 0; j < z.size(); ++j) {
      h[j] = z[j] * ch + task.noise_sigma * eps[j];
      v[j] = z[j] * cv + task.noise_sigma * eta[j];
    }
    sp.h_seq[i] = std::move(h);
    sp.v_seq[i] = std::move(v);
  }
  return sp;
}

inline SamplePair generate_sample(const TaskConfig& task, int label, RngStream& stream) {
  if (task.steps < 2) throw std::invalid_argument("generate_sample: steps must be >= 2");
  const Vector z = sample_gaussian(stream, task.dim);
  const double theta = stream.next_uniform(0.0, 2.0 * M_PI);
  return generate_sample_with_latent(task, label, z, theta, stream);
}

inline int split_per_class(const TaskConfig& task, Split split) {
  switch (split) {
    case Split::train: return task.train_per_class;
    case Split::valid: return task.valid_per_class;
    case Split::test: return task.test_per_class;
  }
  throw std::logic_error("bad Split");
}

// Class-major order: sample index = label * per_class + j.
inline std::vector<SamplePair> generate_split(const TaskConfig& task, Split split) {
  const int per_class = split_per_class(task, split);
  std::vector<SamplePair> out;
  out.reserve(static_cast<std::size_t>(per_class) * task.num_classes);
  for (int c = 0; c < task.num_classes; ++c) {
    for (int j = 0; j < per_class; ++j) {
      const int index = c * per_class + j;
      RngStream stream(sample_seed(task, split, index));
      out.push_back(generate_sample(task, c, stream));
    }
  }
  return out;
}

inline std::string record_to_json_line(const SamplePair& sp) {
  JsonWriter w(false);
  w.begin_object();
  w.key("label").value(sp.label);
  w.key("h").begin_array();
  for (const auto& row : sp.h_seq) w.value(row);
  w.end_array();
  w.key("v").begin_array();
  for (const auto& row : sp.v_seq) w.value(row);
  w.end_array();
  w.end_object();
  return w.str();
}

inline void append_task_config(JsonWriter& w, const TaskConfig& task) {
  w.begin_object();
  w.key("num_classes").value(task.num_classes);
  w.key("dim").value(task.dim);
  w.key("steps").value(task.steps);
  w.key("freq").value(task.freq);
  w.key("noise_sigma").value(task.noise_sigma);
  w.key("train_per_class").value(task.train_per_class);
  w.key("valid_per_class").value(task.valid_per_class);
  w.key("test_per_class").value(task.test_per_class);
  w.key("seed").value(task.seed);
  w.end_object();
}

constexpr int kDatasetFormatVersion = 1;

inline void generate_dataset(const TaskConfig& task, const std::string& out_dir, bool overwrite = false) {
  if (task.num_classes < 2 || task.dim < 1 || task.steps < 2 || task.noise_sigma < 0.0)
    throw std::invalid_argument("generate_dataset: invalid task configuration");
  namespace fs = std::filesystem;
  const fs::path dir(out_dir);
  const fs::path meta_path = dir / "metadata.json";
  if (fs::exists(meta_path) && !overwrite)
    throw std::runtime_error("dataset already exists at '" + meta_path.string() +
                             "' (pass --force to overwrite)");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory '" + dir.string() + "': " + ec.message());

  JsonWriter meta;
  meta.begin_object();
  meta.key("format_version").value(kDatasetFormatVersion);
  meta.key("kind").value("dataset");
  meta.key("task");
  append_task_config(meta, task);
  meta.end_object();
  write_text_file(meta_path.string(), meta.str() + "\n");

  for (Split split : {Split::train, Split::valid, Split::test}) {
    std::string body;
    for (const auto& sp : generate_split(task, split)) {
      body += record_to_json_line(sp);
      body += '\n';
    }
    write_text_file((dir / (std::string(to_string(split)) + ".jsonl")).string(), body);
  }
}

inline TaskConfig task_config_from_json(const nlohmann::json& j) {
  TaskConfig t;
  t.num_classes = j.at("num_classes").get<int>();
  t.dim = j.at("dim").get<int>();
  t.steps = j.at("steps").get<int>();
  t.freq = j.at("freq").get<double>();
  t.noise_sigma = j.at("noise_sigma").get<double>();
  t.train_per_class = j.at("train_per_class").get<int>();
  t.valid_per_class = j.at("valid_per_class").get<int>();
  t.test_per_class = j.at("test_per_class").get<int>();
  t.seed = j.at("seed").get<std::uint64_t>();
  return t;
}

inline TaskConfig load_task_config(const std::string& dataset_dir) {
  const std::string path = (std::filesystem::path(dataset_dir) / "metadata.json").string();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed metadata '" + path + "': " + e.what());
  }
  if (!j.contains("format_version") || !j["format_version"].is_number_integer())
    throw std::runtime_error("metadata '" + path + "': missing integer field 'format_version'");
  if (j["format_version"].get<int>() != kDatasetFormatVersion)
    throw std::runtime_error("metadata '" + path + "': unsupported format_version " +
                             j["format_version"].dump() + " (expected " +
                             std::to_string(kDatasetFormatVersion) + ")");
  try {
    return task_config_from_json(j.at("task"));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("metadata '" + path + "': bad 'task' section: " + e.what());
  }
}

inline std::vector<SamplePair> load_split(const std::string& dataset_dir, Split split) {
  const TaskConfig task = load_task_config(dataset_dir);
  const std::string path =
      (std::filesystem::path(dataset_dir) / (std::string(to_string(split)) + ".jsonl")).string();
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for reading");
  std::vector<SamplePair> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed record: " + e.what());
    }
    SamplePair sp;
    try {
      sp.label = j.at("label").get<int>();
      for (const auto& row : j.at("h")) sp.h_seq.push_back(row.get<Vector>());
      for (const auto& row : j.at("v")) sp.v_seq.push_back(row.get<Vector>());
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed record: " + e.what());
    }
    if (sp.label < 0 || sp.label >= task.num_classes)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": label out of range");
    if (static_cast<int>(sp.h_seq.size()) != task.steps ||
        static_cast<int>(sp.v_seq.size()) != task.steps)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": record " +
                               std::to_string(out.size()) + " has wrong sequence length");
    for (const auto& row : sp.h_seq)
      if (static_cast<int>(row.size()) != task.dim)
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": record " +
                                 std::to_string(out.size()) + " has wrong vector dim");
    for (const auto& row : sp.v_seq)
      if (static_cast<int>(row.size()) != task.dim)
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": record " +
                                 std::to_string(out.size()) + " has wrong vector dim");
    out.push_back(std::move(sp));
  }
  return out;
}

// Encoder-ready input. vx is empty for single-stream (conventional) cells.
struct EncoderInput {
  std::vector<Vector> hx;
  std::vector<Vector> vx;
};

// joint keeps the pair; none_h / none_v select one stream; feat1 concatenates
// per step (n vectors of dim 2d); feat2 concatenates in time (2n vectors of
// dim d, horizontal first); score yields two single-stream inputs, one per
// sub-model.
inline std::vector<EncoderInput> assemble_fusion_input(const SamplePair& sample, FusionStrategy strategy) {
  switch (strategy) {
    case FusionStrategy::joint:
      return {EncoderInput{sample.h_seq, sample.v_seq}};
    case FusionStrategy::none_h:
      return {EncoderInput{sample.h_seq, {}}};
    case FusionStrategy::none_v:
      return {EncoderInput{sample.v_seq, {}}};
    case FusionStrategy::feat1: {
      EncoderInput in;
      in.hx.reserve(sample.h_seq.size());
      for (std::size_t i = 0; i < sample.h_seq.size(); ++i)
        in.hx.push_back(concat(sample.h_seq[i], sample.v_seq[i]));
      return {std::move(in)};
    }
    case FusionStrategy::feat2: {
      EncoderInput in;
      in.hx.reserve(sample.h_seq.size() + sample.v_seq.size());
      in.hx.insert(in.hx.end(), sample.h_seq.begin(), sample.h_seq.end());
      in.hx.insert(in.hx.end(), sample.v_seq.begin(), sample.v_seq.end());
      return {std::move(in)};
    }
    case FusionStrategy::score:
      return {EncoderInput{sample.h_seq, {}}, EncoderInput{sample.v_seq, {}}};
  }
  throw std::logic_error("bad FusionStrategy");
}

}  // namespace fuselstm
