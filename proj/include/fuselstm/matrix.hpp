#pragma once

// Minimal dense double-precision matrix/vector kernels. Row-major storage,
// no aliasing allowed between outputs and inputs unless stated.

#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fuselstm {

using Vector = std::vector<double>;

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;  // row-major, data.size() == rows * cols

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), 0.0) {}

  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  double* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
  const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }
};

[[noreturn]] inline void dim_error(const std::string& op, const std::string& detail) {
  throw std::invalid_argument(op + ": dimension mismatch, " + detail);
}

inline std::string shape_str(const Matrix& m) {
  std::ostringstream os;
  os << m.rows << "x" << m.cols;
  return os.str();
}

// y = W x
inline Vector matvec(const Matrix& w, const Vector& x) {
  if (w.cols != static_cast<int>(x.size()))
    dim_error("matvec", "W is " + shape_str(w) + ", x has length " + std::to_string(x.size()));
  Vector y(static_cast<std::size_t>(w.rows));
  for (int r = 0; r < w.rows; ++r) {
    const double* row = w.row(r);
    double acc = 0.0;
    for (int c = 0; c < w.cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
  return y;
}

// y += W^T v  (v has length rows, y has length cols)
inline void matvec_transpose_acc(const Matrix& w, const Vector& v, Vector& y) {
  if (w.rows != static_cast<int>(v.size()) || w.cols != static_cast<int>(y.size()))
    dim_error("matvec_transpose_acc",
              "W is " + shape_str(w) + ", v has length " + std::to_string(v.size()) +
                  ", y has length " + std::to_string(y.size()));
  for (int r = 0; r < w.rows; ++r) {
    const double* row = w.row(r);
    const double vr = v[r];
    for (int c = 0; c < w.cols; ++c) y[c] += vr * row[c];
  }
}

// W += v x^T
inline void outer_acc(Matrix& w, const Vector& v, const Vector& x) {
  if (w.rows != static_cast<int>(v.size()) || w.cols != static_cast<int>(x.size()))
    dim_error("outer_acc", "W is " + shape_str(w) + ", v has length " + std::to_string(v.size()) +
                               ", x has length " + std::to_string(x.size()));
  for (int r = 0; r < w.rows; ++r) {
    double* row = w.row(r);
    const double vr = v[r];
    for (int c = 0; c < w.cols; ++c) row[c] += vr * x[c];
  }
}

// W x + b
inline Vector affine(const Matrix& w, const Vector& x, const Vector& b) {
  if (w.cols != static_cast<int>(x.size()) || w.rows != static_cast<int>(b.size()))
    dim_error("affine", "W is " + shape_str(w) + ", x has length " + std::to_string(x.size()) +
                            ", b has length " + std::to_string(b.size()));
  Vector y = matvec(w, x);
  for (int r = 0; r < w.rows; ++r) y[r] += b[r];
  return y;
}

inline void check_same_len(const char* op, const Vector& a, const Vector& b) {
  if (a.size() != b.size())
    dim_error(op, "lengths " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
}

inline void add_acc(Vector& y, const Vector& a) {
  check_same_len("add_acc", y, a);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a[i];
}

// y += s * a
inline void axpy(Vector& y, double s, const Vector& a) {
  check_same_len("axpy", y, a);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += s * a[i];
}

inline Vector add(const Vector& a, const Vector& b) {
  check_same_len("add", a, b);
  Vector y(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) y[i] = a[i] + b[i];
  return y;
}

inline Vector hadamard(const Vector& a, const Vector& b) {
  check_same_len("hadamard", a, b);
  Vector y(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) y[i] = a[i] * b[i];
  return y;
}

// y += a .* b
inline void hadamard_acc(Vector& y, const Vector& a, const Vector& b) {
  check_same_len("hadamard_acc", y, a);
  check_same_len("hadamard_acc", y, b);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a[i] * b[i];
}

inline double dot(const Vector& a, const Vector& b) {
  check_same_len("dot", a, b);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline Vector scaled(const Vector& a, double s) {
  Vector y(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) y[i] = s * a[i];
  return y;
}

inline Vector concat(const Vector& a, const Vector& b) {
  Vector y;
  y.reserve(a.size() + b.size());
  y.insert(y.end(), a.begin(), a.end());
  y.insert(y.end(), b.begin(), b.end());
  return y;
}

}  // namespace fuselstm
