#include "cuspsteklov/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "cuspsteklov/errors.hpp"

namespace cusp {

SparseSym SparseSym::from_triplets(std::size_t n, std::vector<Triplet> entries) {
  for (auto& e : entries) {
    if (e.row < 0 || e.col < 0 || static_cast<std::size_t>(e.row) >= n ||
        static_cast<std::size_t>(e.col) >= n)
      throw SizeError("triplet index out of range");
    if (e.row > e.col) std::swap(e.row, e.col);
  }
  std::stable_sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  SparseSym s;
  s.n_ = n;
  s.row_ptr_.assign(n + 1, 0);
  for (std::size_t k = 0; k < entries.size();) {
    const Triplet& e = entries[k];
    double v = 0.0;
    std::size_t m = k;
    for (; m < entries.size() && entries[m].row == e.row && entries[m].col == e.col; ++m)
      v += entries[m].value;
    s.col_idx_.push_back(e.col);
    s.values_.push_back(v);
    ++s.row_ptr_[static_cast<std::size_t>(e.row) + 1];
    k = m;
  }
  for (std::size_t i = 0; i < n; ++i) s.row_ptr_[i + 1] += s.row_ptr_[i];
  return s;
}

SparseSym SparseSym::identity(std::size_t n) { return diagonal(std::vector<double>(n, 1.0)); }

SparseSym SparseSym::diagonal(const std::vector<double>& d) {
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < d.size(); ++i)
    t.push_back({static_cast<int>(i), static_cast<int>(i), d[i]});
  return from_triplets(d.size(), std::move(t));
}

double SparseSym::at(std::size_t i, std::size_t j) const {
  if (i > j) std::swap(i, j);
  if (j >= n_) throw SizeError("index out of range");
  const auto b = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i]);
  const auto e = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i + 1]);
  auto it = std::lower_bound(b, e, static_cast<int>(j));
  if (it == e || *it != static_cast<int>(j)) return 0.0;
  return values_[static_cast<std::size_t>(it - col_idx_.begin())];
}

void SparseSym::multiply(const std::vector<double>& x, std::vector<double>& y) const {
  if (x.size() != n_) throw SizeError("vector length does not match matrix dimension");
  y.assign(n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i) {
    double acc = 0.0;
    const double xi = x[i];
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      const auto j = static_cast<std::size_t>(col_idx_[k]);
      acc += values_[k] * x[j];
      if (j != i) y[j] += values_[k] * xi;
    }
    y[i] += acc;
  }
}

std::vector<double> SparseSym::multiply(const std::vector<double>& x) const {
  std::vector<double> y;
  multiply(x, y);
  return y;
}

double SparseSym::quad(const std::vector<double>& x) const {
  if (x.size() != n_) throw SizeError("vector length does not match matrix dimension");
  double s = 0.0;
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      const auto j = static_cast<std::size_t>(col_idx_[k]);
      s += (j == i ? 1.0 : 2.0) * values_[k] * x[i] * x[j];
    }
  return s;
}

SparseSym SparseSym::combine(double a, const SparseSym& other, double b) const {
  if (other.n_ != n_) throw SizeError("matrix dimensions differ");
  SparseSym s;
  s.n_ = n_;
  s.row_ptr_.assign(n_ + 1, 0);
  for (std::size_t i = 0; i < n_; ++i) {
    std::size_t p = row_ptr_[i], q = other.row_ptr_[i];
    const std::size_t pe = row_ptr_[i + 1], qe = other.row_ptr_[i + 1];
    while (p < pe || q < qe) {
      int c;
      double v;
      if (q >= qe || (p < pe && col_idx_[p] < other.col_idx_[q])) {
        c = col_idx_[p];
        v = a * values_[p++];
      } else if (p >= pe || other.col_idx_[q] < col_idx_[p]) {
        c = other.col_idx_[q];
        v = b * other.values_[q++];
      } else {
        c = col_idx_[p];
        v = a * values_[p++] + b * other.values_[q++];
      }
      s.col_idx_.push_back(c);
      s.values_.push_back(v);
    }
    s.row_ptr_[i + 1] = s.col_idx_.size();
  }
  return s;
}

SparseSym SparseSym::scaled(double f) const {
  SparseSym s = *this;
  for (double& v : s.values_) v *= f;
  return s;
}

std::vector<double> SparseSym::diag() const {
  std::vector<double> d(n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i)
    if (row_ptr_[i] < row_ptr_[i + 1] && col_idx_[row_ptr_[i]] == static_cast<int>(i))
      d[i] = values_[row_ptr_[i]];
  return d;
}

void SparseSym::write_coo(std::ostream& os) const {
  os << std::setprecision(17);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
      os << i << ' ' << col_idx_[k] << ' ' << values_[k] << '\n';
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw SizeError("vector lengths differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

double norm_inf(const std::vector<double>& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace cusp
