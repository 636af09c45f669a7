#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <utility>
#include <vector>

#include "cuspsteklov/cholesky.hpp"
#include "cuspsteklov/sparse.hpp"

namespace cusp {

/// Nodes whose largest weight exceeds this multiple of the median peak count as stiff.
inline constexpr double kStiffRatio = 64.0;

/// One pivot-by-summation step: u_v = (r_v + sum_j w_j u_j) / pivot.
struct StiffStep {
  int v = 0;
  double pivot = 0.0;
  std::vector<std::pair<int, double>> weights;
};

/// A symmetric matrix as off-diagonal weights w_ij = -A_ij plus the excess A 1, after the
/// stiff eligible nodes were eliminated with pivots D_c = sum_j w_cj + e_c. The diagonal is
/// never formed by subtraction, so couplings far below eps * max|A_ij| survive.
struct StiffElimination {
  std::vector<StiffStep> steps;           // in elimination order
  std::vector<std::map<int, double>> adj; // remaining weights, empty rows for gone nodes
  std::vector<double> excess;
  std::vector<char> gone;
};

/// Row sums of A accumulated entry by entry.
std::vector<double> row_sums(const SparseSym& A);

/// `excess` is A 1 computed without cancellation (empty: row_sums). `eligible` marks the
/// nodes that may be eliminated (empty: all). Greedy minimum-degree order with ties broken
/// by index. Throws NotSpdError on a nonpositive pivot.
StiffElimination eliminate_stiff(const SparseSym& A, std::vector<double> excess,
                                 const std::vector<char>& eligible = {},
                                 double ratio = kStiffRatio);

/// Solver for A x = b with A SPD given in Laplacian form: stiff nodes by summed pivots,
/// the rest by sparse Cholesky with diagonals sum_j w_ij + e_i.
class LaplacianSolver {
 public:
  /// `symbolic` is reused when it matches the pattern of the remaining block.
  LaplacianSolver(const SparseSym& A, std::vector<double> excess,
                  std::shared_ptr<const CholeskySymbolic> symbolic = nullptr);

  std::vector<double> solve(const std::vector<double>& b) const;

  std::size_t size() const { return n_; }
  std::size_t stiff_eliminated() const { return steps_.size(); }
  std::shared_ptr<const CholeskySymbolic> symbolic_ptr() const {
    return factor_ ? factor_->symbolic_ptr() : nullptr;
  }

 private:
  std::size_t n_ = 0;
  std::vector<StiffStep> steps_;
  std::vector<int> rest_;  // remaining nodes, ascending
  std::unique_ptr<CholeskyFactor> factor_;
};

}  // namespace cusp
