#include "cuspsteklov/cholesky.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cuspsteklov/errors.hpp"

namespace cusp {

namespace {

// a := (a ∪ b) \ {skip1, skip2}; both inputs sorted.
void merge_into(std::vector<int>& a, const std::vector<int>& b, int skip1, int skip2,
                std::vector<int>& scratch) {
  scratch.clear();
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    int v;
    if (j >= b.size() || (i < a.size() && a[i] < b[j]))
      v = a[i++];
    else if (i >= a.size() || b[j] < a[i])
      v = b[j++];
    else {
      v = a[i++];
      ++j;
    }
    if (v != skip1 && v != skip2) scratch.push_back(v);
  }
  a.swap(scratch);
}

}  // namespace

std::shared_ptr<const CholeskySymbolic> chol_analyze(const SparseSym& A) {
  const std::size_t n = A.size();
  auto S = std::make_shared<CholeskySymbolic>();
  S->n = n;
  S->pattern_ptr = A.row_ptr();
  S->pattern_idx = A.col_idx();

  std::vector<std::vector<int>> adj(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = A.row_ptr()[i]; k < A.row_ptr()[i + 1]; ++k) {
      const int j = A.col_idx()[k];
      if (j == static_cast<int>(i)) continue;
      adj[i].push_back(j);
      adj[static_cast<std::size_t>(j)].push_back(static_cast<int>(i));
    }
  for (auto& a : adj) {
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
  }

  std::set<std::pair<std::size_t, int>> queue;
  for (std::size_t v = 0; v < n; ++v) queue.insert({adj[v].size(), static_cast<int>(v)});
  S->perm.reserve(n);
  std::vector<std::vector<int>> cols(n);  // pattern in old numbering, by elimination step
  std::vector<int> scratch;
  for (std::size_t step = 0; step < n; ++step) {
    const int v = queue.begin()->second;
    queue.erase(queue.begin());
    S->perm.push_back(v);
    std::vector<int> nb = std::move(adj[static_cast<std::size_t>(v)]);
    for (int u : nb) {
      auto& au = adj[static_cast<std::size_t>(u)];
      queue.erase({au.size(), u});
      merge_into(au, nb, u, v, scratch);
      queue.insert({au.size(), u});
    }
    cols[step] = std::move(nb);
  }
  S->iperm.assign(n, 0);
  for (std::size_t k = 0; k < n; ++k) S->iperm[static_cast<std::size_t>(S->perm[k])] = static_cast<int>(k);

  S->col_ptr.assign(n + 1, 0);
  for (std::size_t j = 0; j < n; ++j) {
    auto& c = cols[j];
    for (int& u : c) u = S->iperm[static_cast<std::size_t>(u)];
    std::sort(c.begin(), c.end());
    S->col_ptr[j + 1] = S->col_ptr[j] + 1 + c.size();
  }
  S->row_idx.resize(S->col_ptr[n]);
  std::vector<std::size_t> row_count(n, 0);
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t p = S->col_ptr[j];
    S->row_idx[p++] = static_cast<int>(j);
    for (int r : cols[j]) {
      S->row_idx[p++] = r;
      ++row_count[static_cast<std::size_t>(r)];
    }
  }
  S->rv_ptr.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) S->rv_ptr[i + 1] = S->rv_ptr[i] + row_count[i];
  S->rv_col.resize(S->rv_ptr[n]);
  S->rv_pos.resize(S->rv_ptr[n]);
  std::vector<std::size_t> fill(S->rv_ptr.begin(), S->rv_ptr.end() - 1);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t p = S->col_ptr[k] + 1; p < S->col_ptr[k + 1]; ++p) {
      const auto r = static_cast<std::size_t>(S->row_idx[p]);
      S->rv_col[fill[r]] = static_cast<int>(k);
      S->rv_pos[fill[r]++] = p;
    }

  // Lower part of the permuted matrix, grouped by new column.
  std::vector<std::size_t> a_count(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = A.row_ptr()[i]; k < A.row_ptr()[i + 1]; ++k) {
      const int a = S->iperm[i], b = S->iperm[static_cast<std::size_t>(A.col_idx()[k])];
      ++a_count[static_cast<std::size_t>(std::min(a, b)) + 1];
    }
  for (std::size_t j = 0; j < n; ++j) a_count[j + 1] += a_count[j];
  S->a_ptr = a_count;
  S->a_row.resize(a_count[n]);
  S->a_src.resize(a_count[n]);
  std::vector<std::size_t> pos(a_count.begin(), a_count.end() - 1);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = A.row_ptr()[i]; k < A.row_ptr()[i + 1]; ++k) {
      const int a = S->iperm[i], b = S->iperm[static_cast<std::size_t>(A.col_idx()[k])];
      const auto c = static_cast<std::size_t>(std::min(a, b));
      S->a_row[pos[c]] = std::max(a, b);
      S->a_src[pos[c]++] = k;
    }
  return S;
}

CholeskyFactor::CholeskyFactor(const SparseSym& A) : sym_(chol_analyze(A)) { factor(A); }

CholeskyFactor::CholeskyFactor(std::shared_ptr<const CholeskySymbolic> symbolic,
                               const SparseSym& A)
    : sym_(std::move(symbolic)) {
  if (A.size() != sym_->n || A.row_ptr() != sym_->pattern_ptr || A.col_idx() != sym_->pattern_idx)
    throw SizeError("matrix pattern differs from the analysed pattern");
  factor(A);
}

void CholeskyFactor::factor(const SparseSym& A) {
  const CholeskySymbolic& S = *sym_;
  const std::size_t n = S.n;
  values_.assign(S.row_idx.size(), 0.0);
  std::vector<double> x(n, 0.0);
  const auto& av = A.values();
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t p = S.a_ptr[j]; p < S.a_ptr[j + 1]; ++p)
      x[static_cast<std::size_t>(S.a_row[p])] += av[S.a_src[p]];
    for (std::size_t r = S.rv_ptr[j]; r < S.rv_ptr[j + 1]; ++r) {
      const auto k = static_cast<std::size_t>(S.rv_col[r]);
      const std::size_t pos = S.rv_pos[r];
      const double ljk = values_[pos];
      for (std::size_t p = pos; p < S.col_ptr[k + 1]; ++p)
        x[static_cast<std::size_t>(S.row_idx[p])] -= values_[p] * ljk;
    }
    const double d = x[j];
    if (!(d > 0.0) || !std::isfinite(d))
      throw NotSpdError("nonpositive pivot " + std::to_string(d) + " at elimination step " +
                        std::to_string(j));
    const double ljj = std::sqrt(d);
    values_[S.col_ptr[j]] = ljj;
    x[j] = 0.0;
    for (std::size_t p = S.col_ptr[j] + 1; p < S.col_ptr[j + 1]; ++p) {
      const auto i = static_cast<std::size_t>(S.row_idx[p]);
      values_[p] = x[i] / ljj;
      x[i] = 0.0;
    }
  }
}

void CholeskyFactor::solve_in_place(std::vector<double>& b, std::vector<double>& y) const {
  const CholeskySymbolic& S = *sym_;
  const std::size_t n = S.n;
  if (b.size() != n) throw SizeError("right-hand side length does not match the factor");
  y.resize(n);
  for (std::size_t k = 0; k < n; ++k) y[k] = b[static_cast<std::size_t>(S.perm[k])];
  for (std::size_t j = 0; j < n; ++j) {
    const double yj = y[j] / values_[S.col_ptr[j]];
    y[j] = yj;
    for (std::size_t p = S.col_ptr[j] + 1; p < S.col_ptr[j + 1]; ++p)
      y[static_cast<std::size_t>(S.row_idx[p])] -= values_[p] * yj;
  }
  for (std::size_t j = n; j-- > 0;) {
    double s = y[j];
    for (std::size_t p = S.col_ptr[j] + 1; p < S.col_ptr[j + 1]; ++p)
      s -= values_[p] * y[static_cast<std::size_t>(S.row_idx[p])];
    y[j] = s / values_[S.col_ptr[j]];
  }
  for (std::size_t k = 0; k < n; ++k) b[static_cast<std::size_t>(S.perm[k])] = y[k];
}

std::vector<double> CholeskyFactor::solve(const std::vector<double>& b) const {
  std::vector<double> x = b, work;
  solve_in_place(x, work);
  return x;
}

CholeskyFactor chol_factor(const SparseSym& A) { return CholeskyFactor(A); }

std::vector<double> chol_solve(const CholeskyFactor& F, const std::vector<double>& b) {
  return F.solve(b);
}

namespace {

void remove_mean(std::vector<double>& v) {
  if (v.empty()) return;
  double s = 0.0;
  for (double x : v) s += x;
  s /= static_cast<double>(v.size());
  for (double& x : v) x -= s;
}

}  // namespace

CgResult cg_solve(const SparseSym& A, const std::vector<double>& b_in, const CgOptions& opt,
                  const std::vector<double>* x0) {
  const std::size_t n = A.size();
  if (b_in.size() != n) throw SizeError("right-hand side length does not match the matrix");
  std::vector<double> b = b_in;
  if (opt.deflate_constants) remove_mean(b);
  CgResult res;
  res.x = x0 ? *x0 : std::vector<double>(n, 0.0);
  if (res.x.size() != n) throw SizeError("initial guess has the wrong length");
  if (opt.deflate_constants) remove_mean(res.x);

  std::vector<double> inv_d(n, 1.0);
  if (opt.jacobi_precondition) {
    const auto d = A.diag();
    for (std::size_t i = 0; i < n; ++i) inv_d[i] = d[i] > 0.0 ? 1.0 / d[i] : 1.0;
  }
  const double bnorm = norm2(b);
  if (bnorm == 0.0) {
    std::fill(res.x.begin(), res.x.end(), 0.0);
    return res;
  }
  std::vector<double> r = A.multiply(res.x);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
  if (opt.deflate_constants) remove_mean(r);
  std::vector<double> z(n), p(n), q(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = inv_d[i] * r[i];
  if (opt.deflate_constants) remove_mean(z);
  p = z;
  double rz = dot(r, z);
  double rel = norm2(r) / bnorm;
  int it = 0;
  while (rel > opt.tol) {
    if (it >= opt.max_iter)
      throw NonConvergenceError("conjugate gradients did not reach the tolerance in " +
                                    std::to_string(opt.max_iter) + " iterations",
                                rel);
    A.multiply(p, q);
    const double pq = dot(p, q);
    if (!(pq > 0.0)) throw NotSpdError("conjugate gradients met a non-positive curvature");
    const double a = rz / pq;
    for (std::size_t i = 0; i < n; ++i) {
      res.x[i] += a * p[i];
      r[i] -= a * q[i];
    }
    if (opt.deflate_constants) remove_mean(r);
    for (std::size_t i = 0; i < n; ++i) z[i] = inv_d[i] * r[i];
    if (opt.deflate_constants) remove_mean(z);
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    ++it;
    rel = norm2(r) / bnorm;
  }
  if (opt.deflate_constants) remove_mean(res.x);
  std::vector<double> tr = A.multiply(res.x);
  for (std::size_t i = 0; i < n; ++i) tr[i] = b[i] - tr[i];
  res.iterations = it;
  res.relative_residual = norm2(tr) / bnorm;
  return res;
}

}  // namespace cusp
