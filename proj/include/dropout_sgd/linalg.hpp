#pragma once

// Small dense linear algebra for the dropout recursions: value-type Matrix
// and Vector, the dropout matrix calculus (Diag, off-diagonal part,
// p-rescaling, Hadamard, Kronecker, vec), cyclic Jacobi eigenvalues,
// pivoted Gaussian elimination and a deterministic moment inequality.
//
// Sizes are tiny (d <= 64, d^2 <= 4096 for Lyapunov solves), so everything
// is row-major std::vector<double> storage with no expression templates.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dropout_sgd/errors.hpp"

namespace dsgd {

class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t dim, double fill = 0.0) : data_(dim, fill) {}
  explicit Vector(std::vector<double> entries) : data_(std::move(entries)) { check_finite(); }
  Vector(std::initializer_list<double> entries) : data_(entries) { check_finite(); }

  static Vector unit(std::size_t dim, std::size_t axis) {
    Vector e(dim);
    e[axis] = 1.0;
    return e;
  }

  std::size_t dim() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<double> span() noexcept { return data_; }
  std::span<const double> span() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  Vector& operator+=(const Vector& o) {
    same_dim(o, "Vector +=");
    for (std::size_t i = 0; i < dim(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Vector& operator-=(const Vector& o) {
    same_dim(o, "Vector -=");
    for (std::size_t i = 0; i < dim(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  Vector& operator*=(double s) noexcept {
    for (double& v : data_) v *= s;
    return *this;
  }

  friend bool operator==(const Vector&, const Vector&) = default;

 private:
  void check_finite() const {
    if (!all_finite()) throw ParameterError("Vector: non-finite entry");
  }
  void same_dim(const Vector& o, const char* what) const {
    if (o.dim() != dim()) throw DimensionError(std::string(what) + ": dimension mismatch");
  }

  std::vector<double> data_;
};

inline Vector operator+(Vector a, const Vector& b) { return a += b; }
inline Vector operator-(Vector a, const Vector& b) { return a -= b; }
inline Vector operator*(double s, Vector a) { return a *= s; }
inline Vector operator*(Vector a, double s) { return a *= s; }

inline double dot(const Vector& a, const Vector& b) {
  if (a.dim() != b.dim()) throw DimensionError("dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const Vector& a) { return std::sqrt(dot(a, a)); }

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> row_major)
      : rows_(rows), cols_(cols), data_(std::move(row_major)) {
    if (data_.size() != rows_ * cols_) throw DimensionError("Matrix: entry count != rows*cols");
    check_finite();
  }
  // Row-wise literal: Matrix{{1, 2}, {3, 4}}.
  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw DimensionError("Matrix: ragged initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
    check_finite();
  }

  static Matrix identity(std::size_t d) {
    Matrix m(d, d);
    for (std::size_t i = 0; i < d; ++i) m(i, i) = 1.0;
    return m;
  }
  static Matrix diagonal(const Vector& v) {
    Matrix m(v.dim(), v.dim());
    for (std::size_t i = 0; i < v.dim(); ++i) m(i, i) = v[i];
    return m;
  }
  static Matrix outer(const Vector& a, const Vector& b) {
    Matrix m(a.dim(), b.dim());
    for (std::size_t i = 0; i < a.dim(); ++i)
      for (std::size_t j = 0; j < b.dim(); ++j) m(i, j) = a[i] * b[j];
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const noexcept { return {data_.data() + i * cols_, cols_}; }
  const std::vector<double>& values() const noexcept { return data_; }

  Vector column(std::size_t j) const {
    Vector c(rows_);
    for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
    return c;
  }
  Vector diag() const {
    Vector v(std::min(rows_, cols_));
    for (std::size_t i = 0; i < v.dim(); ++i) v[i] = (*this)(i, i);
    return v;
  }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  double max_abs() const noexcept {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }
  double frobenius() const noexcept {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return std::sqrt(s);
  }
  double trace() const {
    if (!square()) throw DimensionError("trace: non-square");
    double s = 0.0;
    for (std::size_t i = 0; i < rows_; ++i) s += (*this)(i, i);
    return s;
  }
  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  Matrix& operator+=(const Matrix& o) {
    same_shape(o, "Matrix +=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Matrix& operator-=(const Matrix& o) {
    same_shape(o, "Matrix -=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  Matrix& operator*=(double s) noexcept {
    for (double& v : data_) v *= s;
    return *this;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  void check_finite() const {
    if (!all_finite()) throw ParameterError("Matrix: non-finite entry");
  }
  void same_shape(const Matrix& o, const char* what) const {
    if (o.rows_ != rows_ || o.cols_ != cols_) throw DimensionError(std::string(what) + ": shape mismatch");
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
inline Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
inline Matrix operator*(double s, Matrix a) { return a *= s; }
inline Matrix operator*(Matrix a, double s) { return a *= s; }

inline Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw DimensionError("matmul: inner dimension mismatch");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

inline Vector operator*(const Matrix& a, const Vector& x) {
  if (a.cols() != x.dim()) throw DimensionError("matvec: dimension mismatch");
  Vector y(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

// x^T A y
inline double quadratic_form(const Vector& x, const Matrix& a, const Vector& y) { return dot(x, a * y); }

inline bool is_symmetric(const Matrix& a, double rel_tol = 1e-10) {
  if (!a.square()) return false;
  const double scale = std::max(a.max_abs(), 1e-300);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i + 1; j < a.cols(); ++j)
      if (std::abs(a(i, j) - a(j, i)) > rel_tol * scale) return false;
  return true;
}

inline Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

// ---------------------------------------------------------------------------
// Dropout matrix calculus

namespace detail {
inline void require_square(const Matrix& a, const char* what) {
  if (!a.square()) throw DimensionError(std::string(what) + ": matrix must be square");
}
}  // namespace detail

// Diag(A) = I ⊙ A
inline Matrix diag_part(const Matrix& a) {
  detail::require_square(a, "diag_part");
  Matrix d(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) d(i, i) = a(i, i);
  return d;
}

// A - Diag(A)
inline Matrix off_diag(const Matrix& a) {
  detail::require_square(a, "off_diag");
  Matrix o = a;
  for (std::size_t i = 0; i < a.rows(); ++i) o(i, i) = 0.0;
  return o;
}

// A_p = pA + (1-p) Diag(A): off-diagonal entries scaled by p, diagonal kept.
inline Matrix p_rescale(const Matrix& a, double p) {
  detail::require_square(a, "p_rescale");
  detail::require_probability(p, "p_rescale");
  Matrix r = a;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j) r(i, j) *= p;
  return r;
}

inline Matrix hadamard(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("hadamard: shape mismatch");
  Matrix c(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) = a(i, j) * b(i, j);
  return c;
}

inline Matrix kronecker(const Matrix& a, const Matrix& b) {
  Matrix k(a.rows() * b.rows(), a.cols() * b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double aij = a(i, j);
      for (std::size_t r = 0; r < b.rows(); ++r)
        for (std::size_t c = 0; c < b.cols(); ++c) k(i * b.rows() + r, j * b.cols() + c) = aij * b(r, c);
    }
  return k;
}

// Column stacking.
inline Vector vec(const Matrix& u) {
  Vector v(u.rows() * u.cols());
  std::size_t k = 0;
  for (std::size_t j = 0; j < u.cols(); ++j)
    for (std::size_t i = 0; i < u.rows(); ++i) v[k++] = u(i, j);
  return v;
}

// Inverse of vec for a rows x cols target.
inline Matrix unvec(const Vector& v, std::size_t rows, std::size_t cols) {
  if (v.dim() != rows * cols) throw DimensionError("unvec: length != rows*cols");
  Matrix u(rows, cols);
  std::size_t k = 0;
  for (std::size_t j = 0; j < cols; ++j)
    for (std::size_t i = 0; i < rows; ++i) u(i, j) = v[k++];
  return u;
}

// ---------------------------------------------------------------------------
// Symmetric eigenproblem: cyclic Jacobi rotations.

struct SymEigen {
  Vector values;   // descending
  Matrix vectors;  // column k pairs with values[k]
};

namespace detail {

inline SymEigen jacobi_eigen(const Matrix& s, bool want_vectors) {
  const std::size_t n = s.rows();
  Matrix a = s;
  Matrix v = want_vectors ? Matrix::identity(n) : Matrix();
  const double target = 1e-12 * s.frobenius();

  auto off_mass = [&] {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) m += 2.0 * a(i, j) * a(i, j);
    return std::sqrt(m);
  };

  constexpr int kMaxSweeps = 100;
  for (int sweep = 0; sweep < kMaxSweeps && off_mass() > target; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
        if (want_vectors) {
          for (std::size_t k = 0; k < n; ++k) {
            const double vkp = v(k, p), vkq = v(k, q);
            v(k, p) = c * vkp - sn * vkq;
            v(k, q) = sn * vkp + c * vkq;
          }
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

  SymEigen out{Vector(n), want_vectors ? Matrix(n, n) : Matrix()};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    if (want_vectors)
      for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  return out;
}

inline void require_symmetric(const Matrix& s, const char* what) {
  if (!s.square()) throw DimensionError(std::string(what) + ": matrix must be square");
  if (!is_symmetric(s, 1e-10)) throw ContractError(std::string(what) + ": matrix is not symmetric");
}

}  // namespace detail

// All eigenvalues of a symmetric matrix, sorted descending.
inline Vector sym_eigenvalues(const Matrix& s) {
  detail::require_symmetric(s, "sym_eigenvalues");
  return detail::jacobi_eigen(s, false).values;
}

inline SymEigen sym_eigen(const Matrix& s) {
  detail::require_symmetric(s, "sym_eigen");
  return detail::jacobi_eigen(s, true);
}

inline double lambda_max(const Matrix& s) { return sym_eigenvalues(s)[0]; }
inline double lambda_min(const Matrix& s) {
  const Vector ev = sym_eigenvalues(s);
  return ev[ev.dim() - 1];
}

// Spectral norm sqrt(lambda_max(A^T A)).
inline double operator_norm(const Matrix& a) {
  if (a.rows() == 0 || a.cols() == 0) return 0.0;
  const Matrix ata = symmetrize(a.transpose() * a);
  return std::sqrt(std::max(0.0, detail::jacobi_eigen(ata, false).values[0]));
}

// ---------------------------------------------------------------------------
// Linear solves: Gaussian elimination with partial pivoting.

// Solves M X = B for a block of right-hand sides.
inline Matrix solve(const Matrix& m, const Matrix& rhs) {
  if (!m.square()) throw DimensionError("solve: matrix must be square");
  if (rhs.rows() != m.rows()) throw DimensionError("solve: right-hand side has wrong length");
  const std::size_t n = m.rows(), k = rhs.cols();
  Matrix a = m;
  Matrix b = rhs;
  const double threshold = 1e-12 * m.max_abs();

  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
    if (!(std::abs(a(piv, col)) > threshold)) throw SingularMatrixError("solve: matrix is singular to working precision");
    if (piv != col) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(col, j), a(piv, j));
      for (std::size_t j = 0; j < k; ++j) std::swap(b(col, j), b(piv, j));
    }
    const double inv = 1.0 / a(col, col);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a(r, col) * inv;
      if (f == 0.0) continue;
      a(r, col) = 0.0;
      for (std::size_t j = col + 1; j < n; ++j) a(r, j) -= f * a(col, j);
      for (std::size_t j = 0; j < k; ++j) b(r, j) -= f * b(col, j);
    }
  }
  Matrix x(n, k);
  for (std::size_t ii = n; ii-- > 0;) {
    for (std::size_t j = 0; j < k; ++j) {
      double s = b(ii, j);
      for (std::size_t c = ii + 1; c < n; ++c) s -= a(ii, c) * x(c, j);
      x(ii, j) = s / a(ii, ii);
    }
  }
  return x;
}

inline Vector solve(const Matrix& m, const Vector& b) {
  if (b.dim() != m.rows()) throw DimensionError("solve: right-hand side has wrong length");
  Matrix rhs(b.dim(), 1, std::vector<double>(b.begin(), b.end()));
  return solve(m, rhs).column(0);
}

inline Matrix inverse(const Matrix& m) { return solve(m, Matrix::identity(m.rows())); }

// Lower Cholesky factor of an SPD matrix.
inline Matrix cholesky_lower(const Matrix& s) {
  detail::require_symmetric(s, "cholesky_lower");
  const std::size_t n = s.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = s(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
    if (!(diag > 0.0)) throw SingularMatrixError("cholesky_lower: matrix is not positive definite");
    l(j, j) = std::sqrt(diag);
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = s(i, j);
      for (std::size_t k = 0; k < j; ++k) v -= l(i, k) * l(j, k);
      l(i, j) = v / l(j, j);
    }
  }
  return l;
}

// ---------------------------------------------------------------------------
// Deterministic moment inequality: for q >= 2,
//   | |x+y|^q - |x|^q - q |x|^{q-2} x'y |  <=  (|x|+|y|)^q - |x|^q - q |x|^{q-1} |y|.
// rhs_ii is the moment-form bound evaluated with single-sample norms.

struct MomentGap {
  double lhs;
  double rhs_i;
  double rhs_ii;
};

inline MomentGap moment_inequality_gap(const Vector& x, const Vector& y, double q) {
  if (x.dim() != y.dim()) throw DimensionError("moment_inequality_gap: dimension mismatch");
  if (!(q >= 2.0)) throw ParameterError("moment_inequality_gap: q must be >= 2");
  const double nx = norm2(x), ny = norm2(y), nxy = norm2(x + y);
  const double xq = std::pow(nx, q);
  const double cross = nx > 0.0 ? q * std::pow(nx, q - 2.0) * dot(x, y) : 0.0;
  MomentGap g{};
  g.lhs = std::abs(std::pow(nxy, q) - xq - cross);
  g.rhs_i = std::pow(nx + ny, q) - xq - q * std::pow(nx, q - 1.0) * ny;
  const double mx = std::pow(xq, 1.0 / q), my = std::pow(std::pow(ny, q), 1.0 / q);
  g.rhs_ii = std::pow(mx + my, q) - xq - q * std::pow(xq, (q - 1.0) / q) * my;
  return g;
}

}  // namespace dsgd
