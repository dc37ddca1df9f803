#pragma once

// Checkpoint files: one self-describing JSON document holding the model
// config, every named parameter array, optional rmsprop state and training
// metadata. Written through JsonWriter, so saving the same model twice gives
// byte-identical files and a save -> load -> save round trip is exact.

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "fuselstm/network.hpp"
#include "fuselstm/serialize.hpp"
#include "fuselstm/training.hpp"

namespace fuselstm {

constexpr int kCheckpointFormatVersion = 1;

struct CheckpointMeta {
  std::uint64_t seed = 0;
  int epoch = 0;
  double final_train_loss = 0.0;
  double final_valid_accuracy = 0.0;
};

struct Checkpoint {
  Model model;
  std::optional<RmspropState> opt;
  CheckpointMeta meta;
};

namespace detail {

inline void append_model_config(JsonWriter& w, const ModelConfig& c) {
  w.begin_object();
  w.key("cell").value(to_string(c.cell));
  w.key("fusion").value(to_string(c.fusion));
  w.key("input_dim").value(c.input_dim);
  w.key("hidden_dim").value(c.hidden_dim);
  w.key("steps").value(c.steps);
  w.key("bidirectional").value(c.bidirectional);
  w.key("attention").value(c.attention);
  w.key("dropout").value(c.dropout);
  w.key("num_classes").value(c.num_classes);
  w.end_object();
}

inline void append_param_map(JsonWriter& w, const Model& m) {
  w.begin_object();
  visit_params(m, [&](const std::string& name, const auto& p) {
    using P = std::decay_t<decltype(p)>;
    w.key(name).begin_object();
    if constexpr (std::is_same_v<P, Matrix>) {
      w.key("rows").value(p.rows);
      w.key("cols").value(p.cols);
      w.key("data").value(p.data);
    } else {
      w.key("len").value(static_cast<int>(p.size()));
      w.key("data").value(p);
    }
    w.end_object();
  });
  w.end_object();
}

template <class T>
T require_field(const nlohmann::json& j, const std::string& ctx, const std::string& name) {
  if (!j.is_object() || !j.contains(name))
    throw std::runtime_error(ctx + ": missing field '" + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw std::runtime_error(ctx + ": malformed field '" + name + "'");
  }
}

inline ModelConfig parse_model_config(const nlohmann::json& j, const std::string& ctx) {
  ModelConfig c;
  c.cell = cell_kind_from_string(require_field<std::string>(j, ctx, "cell"));
  c.fusion = fusion_from_string(require_field<std::string>(j, ctx, "fusion"));
  c.input_dim = require_field<int>(j, ctx, "input_dim");
  c.hidden_dim = require_field<int>(j, ctx, "hidden_dim");
  c.steps = require_field<int>(j, ctx, "steps");
  c.bidirectional = require_field<bool>(j, ctx, "bidirectional");
  c.attention = require_field<bool>(j, ctx, "attention");
  c.dropout = require_field<double>(j, ctx, "dropout");
  c.num_classes = require_field<int>(j, ctx, "num_classes");
  return c;
}

// Fills an already-shaped model from the named-array map, checking every
// field in traversal order so the first malformed one is reported.
inline void fill_params(Model& m, const nlohmann::json& params, const std::string& ctx) {
  visit_params(m, [&](const std::string& name, auto& p) {
    using P = std::decay_t<decltype(p)>;
    if (!params.contains(name)) throw std::runtime_error(ctx + ": missing parameter '" + name + "'");
    const nlohmann::json& entry = params.at(name);
    const std::string ectx = ctx + ": parameter '" + name + "'";
    if constexpr (std::is_same_v<P, Matrix>) {
      const int rows = require_field<int>(entry, ectx, "rows");
      const int cols = require_field<int>(entry, ectx, "cols");
      if (rows != p.rows || cols != p.cols)
        throw std::runtime_error(ectx + ": expected shape " + shape_str(p) + ", file has " +
                                 std::to_string(rows) + "x" + std::to_string(cols));
      auto data = require_field<std::vector<double>>(entry, ectx, "data");
      if (data.size() != p.data.size())
        throw std::runtime_error(ectx + ": data length " + std::to_string(data.size()) +
                                 " does not match shape");
      p.data = std::move(data);
    } else {
      const int len = require_field<int>(entry, ectx, "len");
      if (len != static_cast<int>(p.size()))
        throw std::runtime_error(ectx + ": expected length " + std::to_string(p.size()) +
                                 ", file has " + std::to_string(len));
      auto data = require_field<std::vector<double>>(entry, ectx, "data");
      if (data.size() != p.size())
        throw std::runtime_error(ectx + ": data length " + std::to_string(data.size()) +
                                 " does not match 'len'");
      p = std::move(data);
    }
  });
}

}  // namespace detail

inline void save_checkpoint(const Model& model, const RmspropState* opt, const CheckpointMeta& meta,
                            const std::string& path) {
  JsonWriter w;
  w.begin_object();
  w.key("format_version").value(kCheckpointFormatVersion);
  w.key("kind").value("checkpoint");
  w.key("config");
  detail::append_model_config(w, model.config);
  w.key("meta").begin_object();
  w.key("seed").value(meta.seed);
  w.key("epoch").value(meta.epoch);
  w.key("final_train_loss").value(meta.final_train_loss);
  w.key("final_valid_accuracy").value(meta.final_valid_accuracy);
  w.end_object();
  w.key("params");
  detail::append_param_map(w, model);
  if (opt) {
    w.key("opt_state").begin_object();
    w.key("learning_rate").value(opt->learning_rate);
    w.key("rho").value(opt->rho);
    w.key("epsilon").value(opt->epsilon);
    w.key("acc");
    detail::append_param_map(w, opt->acc);
    w.end_object();
  }
  w.end_object();
  write_text_file(path, w.str() + "\n");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  const std::string ctx = "checkpoint '" + path + "'";
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(ctx + ": parse error: " + e.what());
  }
  const int version = detail::require_field<int>(j, ctx, "format_version");
  if (version != kCheckpointFormatVersion)
    throw std::runtime_error(ctx + ": unsupported format_version " + std::to_string(version) +
                             " (expected " + std::to_string(kCheckpointFormatVersion) + ")");
  if (detail::require_field<std::string>(j, ctx, "kind") != "checkpoint")
    throw std::runtime_error(ctx + ": field 'kind' is not 'checkpoint'");

  if (!j.contains("config")) throw std::runtime_error(ctx + ": missing field 'config'");
  const ModelConfig config = detail::parse_model_config(j.at("config"), ctx + ": config");
  validate_config(config);

  Checkpoint ck;
  RngStream scratch(0);
  ck.model = init_model(config, scratch);
  ck.model = zeroed_like(ck.model);
  if (!j.contains("params")) throw std::runtime_error(ctx + ": missing field 'params'");
  detail::fill_params(ck.model, j.at("params"), ctx);

  if (j.contains("opt_state")) {
    const nlohmann::json& o = j.at("opt_state");
    const std::string octx = ctx + ": opt_state";
    RmspropState opt = init_rmsprop(ck.model, detail::require_field<double>(o, octx, "learning_rate"),
                                    detail::require_field<double>(o, octx, "rho"),
                                    detail::require_field<double>(o, octx, "epsilon"));
    if (!o.contains("acc")) throw std::runtime_error(octx + ": missing field 'acc'");
    detail::fill_params(opt.acc, o.at("acc"), octx);
    ck.opt = std::move(opt);
  }

  if (!j.contains("meta")) throw std::runtime_error(ctx + ": missing field 'meta'");
  const nlohmann::json& meta = j.at("meta");
  ck.meta.seed = detail::require_field<std::uint64_t>(meta, ctx + ": meta", "seed");
  ck.meta.epoch = detail::require_field<int>(meta, ctx + ": meta", "epoch");
  ck.meta.final_train_loss = detail::require_field<double>(meta, ctx + ": meta", "final_train_loss");
  ck.meta.final_valid_accuracy =
      detail::require_field<double>(meta, ctx + ": meta", "final_valid_accuracy");
  return ck;
}

}  // namespace fuselstm
