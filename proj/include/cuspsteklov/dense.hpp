#pragma once

#include <cstddef>
#include <vector>

namespace cusp {

/// Dense symmetric matrix, full row-major storage; set() writes both triangles.
class DenseSym {
 public:
  DenseSym() = default;
  explicit DenseSym(std::size_t n) : n_(n), a_(n * n, 0.0) {}

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }
  void set(std::size_t i, std::size_t j, double v) {
    a_[i * n_ + j] = v;
    a_[j * n_ + i] = v;
  }
  void add(std::size_t i, std::size_t j, double v) {
    a_[i * n_ + j] += v;
    if (i != j) a_[j * n_ + i] += v;
  }
  const double* row(std::size_t i) const { return a_.data() + i * n_; }
  double* data() { return a_.data(); }
  const double* data() const { return a_.data(); }

  std::vector<double> multiply(const std::vector<double>& x) const;
  double quad(const std::vector<double>& x) const;
  double max_abs() const;

 private:
  std::size_t n_ = 0;
  std::vector<double> a_;
};

/// Column-major general matrix.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double& operator()(std::size_t i, std::size_t j) { return data[j * rows + i]; }
  double operator()(std::size_t i, std::size_t j) const { return data[j * rows + i]; }
  double* col(std::size_t j) { return data.data() + j * rows; }
  const double* col(std::size_t j) const { return data.data() + j * rows; }
  std::vector<double> column(std::size_t j) const {
    return {col(j), col(j) + rows};
  }
};

struct JacobiOptions {
  std::size_t dense_cap = 4000;
  int max_sweeps = 60;
};

/// Eigenvalues ascending; eigenvectors are the matching columns.
struct EigenResult {
  std::vector<double> values;
  DenseMatrix vectors;
  int sweeps = 0;
};

/// Cyclic Jacobi rotations. Throws SizeError above the dense cap.
EigenResult jacobi_sym_eigen(const DenseSym& A, const JacobiOptions& options = {});

/// Lower Cholesky factor; throws NotSpdError.
DenseMatrix dense_cholesky(const DenseSym& B);

/// A v = lambda B v with B SPD: diagonal scaling to unit diag(B), Cholesky transform to a
/// standard problem, Jacobi. Eigenvectors are B-orthonormal.
EigenResult generalized_sym_eigen(const DenseSym& A, const DenseSym& B,
                                  const JacobiOptions& options = {});

/// Same pencil restricted to {v : m^T v = 0}, realized by eliminating the DOF with the
/// largest scaled constraint coefficient. Returns n-1 pairs.
EigenResult generalized_sym_eigen_constrained(const DenseSym& A, const DenseSym& B,
                                              const std::vector<double>& m,
                                              const JacobiOptions& options = {});

/// Symmetric matrix held as off-diagonal weights w_ij = -A_ij plus the row sums A 1. The
/// diagonal is never formed by subtraction, so energies far below eps * max|A_ij| survive.
struct LaplacianForm {
  DenseSym weights;  // diagonal ignored
  std::vector<double> excess;
};

/// Singular values and right singular vectors of G by one-sided (Hestenes) Jacobi: values
/// are the squared singular values ascending, vectors the matching columns of V.
EigenResult one_sided_jacobi(DenseMatrix G, const JacobiOptions& options = {});

/// A v = lambda B v for a positive semidefinite A in Laplacian form, optionally restricted
/// to m^T v = 0. A = F^T F from an LDL^T whose pivots are sums of weights; the eigenvalues
/// are squared singular values of the scaled F, hence never negative. Vectors are
/// B-orthonormal.
EigenResult laplacian_pencil_eigen(const LaplacianForm& A, const DenseSym& B,
                                   const std::vector<double>* m = nullptr,
                                   const JacobiOptions& options = {});

}  // namespace cusp
