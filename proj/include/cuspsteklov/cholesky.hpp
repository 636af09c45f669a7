#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "cuspsteklov/sparse.hpp"

namespace cusp {

/// Fill-reducing ordering and the sparsity pattern of the factor. Reusable for any matrix
/// with the same pattern (Newton tangents on a fixed mesh).
struct CholeskySymbolic {
  std::size_t n = 0;
  std::vector<int> perm;   // new -> old
  std::vector<int> iperm;  // old -> new
  // Columns of L in the new numbering; the diagonal is the first entry of each column.
  std::vector<std::size_t> col_ptr;
  std::vector<int> row_idx;
  // Row view of L below the diagonal: for row i, columns k and positions in row_idx.
  std::vector<std::size_t> rv_ptr;
  std::vector<int> rv_col;
  std::vector<std::size_t> rv_pos;
  // Lower part of P A P^T per column: row and source index into the values of A.
  std::vector<std::size_t> a_ptr;
  std::vector<int> a_row;
  std::vector<std::size_t> a_src;
  // Pattern of the analysed matrix, for reuse checks.
  std::vector<std::size_t> pattern_ptr;
  std::vector<int> pattern_idx;
};

/// Minimum-degree ordering on the elimination graph (ties broken by lowest index).
std::shared_ptr<const CholeskySymbolic> chol_analyze(const SparseSym& A);

class CholeskyFactor {
 public:
  explicit CholeskyFactor(const SparseSym& A);
  /// Throws NotSpdError on a nonpositive pivot.
  CholeskyFactor(std::shared_ptr<const CholeskySymbolic> symbolic, const SparseSym& A);

  std::vector<double> solve(const std::vector<double>& b) const;
  /// Solves in place; `work` is scratch of any size.
  void solve_in_place(std::vector<double>& b, std::vector<double>& work) const;

  std::size_t size() const { return sym_->n; }
  std::size_t nnz() const { return values_.size(); }
  const CholeskySymbolic& symbolic() const { return *sym_; }
  std::shared_ptr<const CholeskySymbolic> symbolic_ptr() const { return sym_; }
  const std::vector<double>& values() const { return values_; }

 private:
  void factor(const SparseSym& A);

  std::shared_ptr<const CholeskySymbolic> sym_;
  std::vector<double> values_;
};

CholeskyFactor chol_factor(const SparseSym& A);
std::vector<double> chol_solve(const CholeskyFactor& F, const std::vector<double>& b);

struct CgOptions {
  double tol = 1e-10;  // relative residual
  int max_iter = 10000;
  bool deflate_constants = false;  // A is SPSD with kernel span{1}
  bool jacobi_precondition = true;
};

struct CgResult {
  std::vector<double> x;
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Preconditioned conjugate gradients. With deflate_constants, b and the iterates are
/// projected onto the complement of the constants and the returned x has zero mean.
/// Throws NonConvergenceError (carrying the residual) when max_iter is reached.
CgResult cg_solve(const SparseSym& A, const std::vector<double>& b, const CgOptions& options = {},
                  const std::vector<double>* x0 = nullptr);

}  // namespace cusp
