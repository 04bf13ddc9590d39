#pragma once

#include <cstddef>
#include <initializer_list>
#include <utility>
#include <vector>

namespace rep {

using Vector = std::vector<double>;

// Dense row-major matrix. Operations that require symmetry or positive
// definiteness validate it at the call site; the type itself is general.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> init);

  static Matrix identity(std::size_t n);
  static Matrix diag(const Vector& d);
  static Matrix from_column(const Vector& v);
  static Matrix ones(std::size_t rows, std::size_t cols);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) {
    return data_[i * cols_ + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  const double* row_ptr(std::size_t i) const { return &data_[i * cols_]; }
  double* row_ptr(std::size_t i) { return &data_[i * cols_]; }

  Vector row(std::size_t i) const;
  Vector col(std::size_t j) const;
  Matrix transposed() const;

  // Symmetry within relative tolerance (scaled by the largest entry).
  bool is_symmetric(double rel_tol = 1e-12) const;
  void symmetrize();  // averages m and m^T in place

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);

  const std::vector<double>& data() const { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);
Matrix operator*(double s, Matrix a);
Matrix operator*(const Matrix& a, const Matrix& b);
Vector operator*(const Matrix& a, const Vector& v);

double dot(const Vector& a, const Vector& b);
double norm2(const Vector& v);
Vector operator+(Vector a, const Vector& b);
Vector operator-(Vector a, const Vector& b);
Vector operator*(double s, Vector v);

// x^T m y with dimension checks.
double quad_form(const Vector& x, const Matrix& m, const Vector& y);

Matrix kron(const Matrix& a, const Matrix& b);

// Lower-triangular L with L L^T = m. Throws NotPositiveDefinite when a
// pivot falls at or below 1e-12 times the largest diagonal entry.
Matrix cholesky(const Matrix& m);

// Inverse of a symmetric positive-definite matrix via its Cholesky factor.
Matrix invert_spd(const Matrix& m);

// Principal (symmetric positive-definite) square root, computed by the
// Denman-Beavers iteration so no eigendecomposition is needed.
Matrix sqrt_spd(const Matrix& m);

// Solve m x = b for SPD m.
Vector solve_spd(const Matrix& m, const Vector& b);
Matrix solve_spd(const Matrix& m, const Matrix& b);

// Given v with positive diagonal, returns (sigma, corr) where
// sigma = diag(v_kk^{1/2}) and corr = sigma^{-1} v sigma^{-1}.
std::pair<Matrix, Matrix> sigma_and_corr(const Matrix& v);

// v^T cov^{-1} v; zero iff v = 0.
double mahalanobis(const Vector& v, const Matrix& cov);

}  // namespace rep
