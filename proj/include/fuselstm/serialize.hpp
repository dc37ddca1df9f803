#pragma once

// Deterministic JSON emitter for every file this project writes (datasets,
// checkpoints, histories, reports). Doubles are printed with 17 significant
// digits so a reload reproduces the exact bit pattern; field order is the
// insertion order, so identical inputs give byte-identical files. Reading
// is delegated to nlohmann/json.

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fuselstm/matrix.hpp"

namespace fuselstm {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  std::string s = buf;
  // Keep the output a JSON *number* that reparses as floating point.
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

class JsonWriter {
 public:
  explicit JsonWriter(bool pretty = true) : pretty_(pretty) {}

  JsonWriter& begin_object() { return open('{'); }
  JsonWriter& end_object() { return close('}'); }
  JsonWriter& begin_array() { return open('['); }
  JsonWriter& end_array() { return close(']'); }

  JsonWriter& key(const std::string& k) {
    comma();
    newline_indent();
    out_ += '"';
    out_ += escape(k);
    out_ += pretty_ ? "\": " : "\":";
    pending_key_ = true;
    return *this;
  }

  JsonWriter& value(double v) { return raw(format_double(v)); }
  JsonWriter& value(int v) { return raw(std::to_string(v)); }
  JsonWriter& value(long v) { return raw(std::to_string(v)); }
  JsonWriter& value(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%" PRIu64, v);
    return raw(buf);
  }
  JsonWriter& value(bool v) { return raw(v ? "true" : "false"); }
  JsonWriter& value(const std::string& v) { return raw('"' + escape(v) + '"'); }
  JsonWriter& value(const char* v) { return value(std::string(v)); }

  // Numeric arrays stay on one line regardless of pretty mode.
  JsonWriter& value(const Vector& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s += ',';
      s += format_double(v[i]);
    }
    s += ']';
    return raw(s);
  }

  const std::string& str() const { return out_; }

 private:
  JsonWriter& raw(const std::string& token) {
    comma();
    newline_indent();
    out_ += token;
    pending_key_ = false;
    first_ = false;
    return *this;
  }

  JsonWriter& open(char ch) {
    comma();
    newline_indent();
    out_ += ch;
    pending_key_ = false;
    first_ = true;
    ++depth_;
    return *this;
  }

  JsonWriter& close(char ch) {
    --depth_;
    if (!first_ && pretty_) {
      out_ += '\n';
      out_.append(static_cast<std::size_t>(depth_) * 2, ' ');
    }
    out_ += ch;
    first_ = false;
    return *this;
  }

  void comma() {
    if (pending_key_) return;
    if (!first_ && !out_.empty()) out_ += ',';
  }

  void newline_indent() {
    if (pending_key_) return;
    if (pretty_ && depth_ > 0) {
      out_ += '\n';
      out_.append(static_cast<std::size_t>(depth_) * 2, ' ');
    }
  }

  static std::string escape(const std::string& s) {
    std::string r;
    for (char c : s) {
      switch (c) {
        case '"': r += "\\\""; break;
        case '\\': r += "\\\\"; break;
        case '\n': r += "\\n"; break;
        case '\t': r += "\\t"; break;
        default: r += c;
      }
    }
    return r;
  }

  std::string out_;
  bool pretty_;
  bool pending_key_ = false;
  bool first_ = true;
  int depth_ = 0;
};

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for reading");
  std::string content((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return content;
}

}  // namespace fuselstm
