#include "rep/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "rep/errors.hpp"

namespace rep {

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> init) {
  rows_ = init.size();
  cols_ = rows_ ? init.begin()->size() : 0;
  data_.reserve(rows_ * cols_);
  for (const auto& r : init) {
    if (r.size() != cols_) throw DimMismatch("ragged initializer list");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diag(const Vector& d) {
  Matrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

Matrix Matrix::from_column(const Vector& v) {
  Matrix m(v.size(), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(i, 0) = v[i];
  return m;
}

Matrix Matrix::ones(std::size_t rows, std::size_t cols) {
  return Matrix(rows, cols, 1.0);
}

Vector Matrix::row(std::size_t i) const {
  return Vector(data_.begin() + i * cols_, data_.begin() + (i + 1) * cols_);
}

Vector Matrix::col(std::size_t j) const {
  Vector v(rows_);
  for (std::size_t i = 0; i < rows_; ++i) v[i] = (*this)(i, j);
  return v;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

bool Matrix::is_symmetric(double rel_tol) const {
  if (rows_ != cols_) return false;
  double scale = 0.0;
  for (double v : data_) scale = std::max(scale, std::fabs(v));
  if (scale == 0.0) return true;
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = i + 1; j < cols_; ++j)
      if (std::fabs((*this)(i, j) - (*this)(j, i)) > rel_tol * scale)
        return false;
  return true;
}

void Matrix::symmetrize() {
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = i + 1; j < cols_; ++j) {
      double v = 0.5 * ((*this)(i, j) + (*this)(j, i));
      (*this)(i, j) = v;
      (*this)(j, i) = v;
    }
}

Matrix& Matrix::operator+=(const Matrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_)
    throw DimMismatch("matrix addition shape mismatch");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_)
    throw DimMismatch("matrix subtraction shape mismatch");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double s) { return a *= s; }
Matrix operator*(double s, Matrix a) { return a *= s; }

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw DimMismatch("matrix product shape mismatch");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* brow = b.row_ptr(k);
      double* crow = c.row_ptr(i);
      for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

Vector operator*(const Matrix& a, const Vector& v) {
  if (a.cols() != v.size()) throw DimMismatch("matrix-vector shape mismatch");
  Vector out(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* arow = a.row_ptr(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) acc += arow[j] * v[j];
    out[i] = acc;
  }
  return out;
}

double dot(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw DimMismatch("dot product length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm2(const Vector& v) { return std::sqrt(dot(v, v)); }

Vector operator+(Vector a, const Vector& b) {
  if (a.size() != b.size()) throw DimMismatch("vector addition mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

Vector operator-(Vector a, const Vector& b) {
  if (a.size() != b.size()) throw DimMismatch("vector subtraction mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
  return a;
}

Vector operator*(double s, Vector v) {
  for (double& x : v) x *= s;
  return v;
}

double quad_form(const Vector& x, const Matrix& m, const Vector& y) {
  if (m.rows() != x.size() || m.cols() != y.size())
    throw DimMismatch("quadratic form shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] == 0.0) continue;
    const double* row = m.row_ptr(i);
    double inner = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j) inner += row[j] * y[j];
    acc += x[i] * inner;
  }
  return acc;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double aij = a(i, j);
      if (aij == 0.0) continue;
      for (std::size_t k = 0; k < b.rows(); ++k)
        for (std::size_t l = 0; l < b.cols(); ++l)
          out(i * b.rows() + k, j * b.cols() + l) = aij * b(k, l);
    }
  return out;
}

Matrix cholesky(const Matrix& m) {
  if (m.rows() != m.cols()) throw DimMismatch("cholesky needs a square matrix");
  if (!m.is_symmetric(1e-12))
    throw std::invalid_argument("cholesky: matrix is not symmetric");
  const std::size_t n = m.rows();
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, m(i, i));
  const double tol = 1e-12 * max_diag;

  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = m(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (d <= tol)
      throw NotPositiveDefinite("cholesky pivot below tolerance");
    l(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return l;
}

namespace {

// Solves L y = b then L^T x = y.
Vector chol_solve(const Matrix& l, const Vector& b) {
  const std::size_t n = l.rows();
  Vector y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
    y[i] = s / l(i, i);
  }
  Vector x(n);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x[k];
    x[ii] = s / l(ii, ii);
  }
  return x;
}

}  // namespace

Matrix invert_spd(const Matrix& m) {
  const Matrix l = cholesky(m);
  const std::size_t n = m.rows();
  Matrix inv(n, n);
  Vector e(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    Vector x = chol_solve(l, e);
    for (std::size_t i = 0; i < n; ++i) inv(i, j) = x[i];
    e[j] = 0.0;
  }
  inv.symmetrize();
  return inv;
}

Matrix sqrt_spd(const Matrix& m) {
  cholesky(m);  // validates symmetry and positive definiteness
  const std::size_t n = m.rows();
  Matrix y = m;
  Matrix z = Matrix::identity(n);
  for (int iter = 0; iter < 60; ++iter) {
    Matrix y_inv = invert_spd(y);
    Matrix z_inv = invert_spd(z);
    Matrix y_next = 0.5 * (y + z_inv);
    Matrix z_next = 0.5 * (z + y_inv);
    double delta = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < y.data().size(); ++k) {
      delta = std::max(delta, std::fabs(y_next.data()[k] - y.data()[k]));
      scale = std::max(scale, std::fabs(y_next.data()[k]));
    }
    y = std::move(y_next);
    z = std::move(z_next);
    if (delta <= 1e-14 * std::max(scale, 1.0)) break;
  }
  y.symmetrize();
  return y;
}

Vector solve_spd(const Matrix& m, const Vector& b) {
  if (m.rows() != b.size()) throw DimMismatch("solve_spd shape mismatch");
  return chol_solve(cholesky(m), b);
}

Matrix solve_spd(const Matrix& m, const Matrix& b) {
  if (m.rows() != b.rows()) throw DimMismatch("solve_spd shape mismatch");
  const Matrix l = cholesky(m);
  Matrix x(b.rows(), b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j) {
    Vector xj = chol_solve(l, b.col(j));
    for (std::size_t i = 0; i < b.rows(); ++i) x(i, j) = xj[i];
  }
  return x;
}

std::pair<Matrix, Matrix> sigma_and_corr(const Matrix& v) {
  if (v.rows() != v.cols()) throw DimMismatch("sigma_and_corr needs square");
  const std::size_t n = v.rows();
  Vector s(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (v(i, i) <= 0.0)
      throw NonPositiveDiagonal("sigma_and_corr: diagonal entry <= 0");
    s[i] = std::sqrt(v(i, i));
  }
  Matrix corr(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) corr(i, j) = v(i, j) / (s[i] * s[j]);
  for (std::size_t i = 0; i < n; ++i) corr(i, i) = 1.0;
  return {Matrix::diag(s), corr};
}

double mahalanobis(const Vector& v, const Matrix& cov) {
  if (cov.rows() != v.size()) throw DimMismatch("mahalanobis shape mismatch");
  Vector x = solve_spd(cov, v);
  double d = dot(v, x);
  return d < 0.0 ? 0.0 : d;
}

}  // namespace rep
