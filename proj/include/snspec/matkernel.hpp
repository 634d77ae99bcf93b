#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace snspec {

/// Dense real matrix, row-major storage.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double* row(std::size_t i) { return data_.data() + i * cols_; }
  const double* row(std::size_t i) const { return data_.data() + i * cols_; }

  bool all_finite() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

DenseMatrix transpose(const DenseMatrix& A);
DenseMatrix matmul(const DenseMatrix& A, const DenseMatrix& B);
std::vector<double> matvec(const DenseMatrix& A, const std::vector<double>& x);
double frobenius_norm(const DenseMatrix& A);
double dot(const std::vector<double>& a, const std::vector<double>& b);
double norm2(const std::vector<double>& a);

/// Eigendecomposition of a symmetric matrix. Eigenvalues descending,
/// eigenvectors stored as the columns of `vectors`, matching order.
struct SymEigResult {
  std::vector<double> values;
  DenseMatrix vectors;

  std::vector<double> vector(std::size_t k) const;
};

/// Full symmetric eigendecomposition (Householder tridiagonalization +
/// implicit-shift QL, 64 sweeps per eigenvalue).
/// Throws std::invalid_argument for non-square or asymmetric input
/// (symmetry checked to 1e-12 relative), std::runtime_error naming the
/// failing index if a QL sweep fails to converge.
SymEigResult sym_eig(const DenseMatrix& M);

/// Eigenvalues only (descending); same algorithm without accumulating
/// the orthogonal transform. Much cheaper for large matrices.
std::vector<double> sym_eig_values(const DenseMatrix& M);

enum class GramSide { Left, Right };

/// Left: X X^T (rows x rows). Right: X^T X (cols x cols).
/// Result symmetric by construction.
DenseMatrix gram(const DenseMatrix& X, GramSide side);

/// Symmetric PSD square root Q with Q*Q = S (relative Frobenius 1e-9).
/// Eigenvalues in [-1e-10*||S||, 0) are clamped to 0; anything below
/// that throws std::domain_error.
DenseMatrix psd_sqrt(const DenseMatrix& S);

}  // namespace snspec
