#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

namespace cusp {

struct Triplet {
  int row = 0;
  int col = 0;
  double value = 0.0;
};

/// Symmetric sparse matrix, upper triangle (row <= col) stored once in CSR form.
class SparseSym {
 public:
  SparseSym() = default;

  /// Entries below the diagonal are mirrored into the upper triangle. Duplicates are
  /// summed in input order, so the result is bitwise reproducible.
  static SparseSym from_triplets(std::size_t n, std::vector<Triplet> entries);
  static SparseSym identity(std::size_t n);
  static SparseSym diagonal(const std::vector<double>& d);

  std::size_t size() const { return n_; }
  std::size_t nnz() const { return values_.size(); }
  double at(std::size_t i, std::size_t j) const;

  std::vector<double> multiply(const std::vector<double>& x) const;
  void multiply(const std::vector<double>& x, std::vector<double>& y) const;
  double quad(const std::vector<double>& x) const;

  /// a*this + b*other; patterns are merged.
  SparseSym combine(double a, const SparseSym& other, double b) const;
  SparseSym scaled(double s) const;
  std::vector<double> diag() const;

  const std::vector<std::size_t>& row_ptr() const { return row_ptr_; }
  const std::vector<int>& col_idx() const { return col_idx_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  /// Coordinate text, one "i j value" line per stored entry (0-based).
  void write_coo(std::ostream& os) const;

 private:
  std::size_t n_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<int> col_idx_;
  std::vector<double> values_;
};

double dot(const std::vector<double>& a, const std::vector<double>& b);
double norm2(const std::vector<double>& a);
double norm_inf(const std::vector<double>& a);

}  // namespace cusp
