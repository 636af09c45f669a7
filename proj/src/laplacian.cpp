#include "cuspsteklov/laplacian.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "cuspsteklov/errors.hpp"

namespace cusp {

std::vector<double> row_sums(const SparseSym& A) {
  std::vector<double> s(A.size(), 0.0);
  for (std::size_t i = 0; i < A.size(); ++i)
    for (std::size_t p = A.row_ptr()[i]; p < A.row_ptr()[i + 1]; ++p) {
      const auto j = static_cast<std::size_t>(A.col_idx()[p]);
      s[i] += A.values()[p];
      if (j != i) s[j] += A.values()[p];
    }
  return s;
}

StiffElimination eliminate_stiff(const SparseSym& A, std::vector<double> excess,
                                 const std::vector<char>& eligible, double ratio) {
  const std::size_t n = A.size();
  if (excess.empty()) excess = row_sums(A);
  if (excess.size() != n) throw SizeError("excess vector has the wrong length");
  if (!eligible.empty() && eligible.size() != n) throw SizeError("eligibility mask has the wrong length");
  StiffElimination out;
  out.adj.assign(n, {});
  auto& adj = out.adj;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = A.row_ptr()[i]; p < A.row_ptr()[i + 1]; ++p) {
      const auto j = static_cast<std::size_t>(A.col_idx()[p]);
      if (j == i || A.values()[p] == 0.0) continue;
      adj[i][static_cast<int>(j)] -= A.values()[p];
      adj[j][static_cast<int>(i)] -= A.values()[p];
    }
  out.excess = std::move(excess);
  auto& e = out.excess;
  out.gone.assign(n, 0);
  if (n == 0) return out;

  std::vector<double> peak(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& [j, w] : adj[i]) peak[i] = std::max(peak[i], std::abs(w));
  std::vector<double> sorted = peak;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<long>(n / 2), sorted.end());
  const double cut = ratio * sorted[n / 2];
  std::set<std::pair<std::size_t, int>> queue;
  std::vector<char> stiff(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    if ((eligible.empty() || eligible[i]) && peak[i] > cut) {
      stiff[i] = 1;
      queue.insert({adj[i].size(), static_cast<int>(i)});
    }
  while (!queue.empty()) {
    const int c = queue.begin()->second;
    queue.erase(queue.begin());
    StiffStep step;
    step.v = c;
    step.weights.assign(adj[c].begin(), adj[c].end());
    double d = e[c];
    for (const auto& [j, w] : step.weights) d += w;
    if (!(d > 0.0))
      throw NotSpdError("nonpositive summed pivot at stiff node " + std::to_string(c));
    step.pivot = d;
    for (const auto& [a, wa] : step.weights) {
      if (stiff[a] && !out.gone[a]) queue.erase({adj[a].size(), a});
      adj[a].erase(c);
      const double f = wa / d;
      e[a] += f * e[c];
      for (const auto& [b, wb] : step.weights)
        if (b != a) adj[a][b] += f * wb;
    }
    for (const auto& [a, wa] : step.weights)
      if (stiff[a] && !out.gone[a]) queue.insert({adj[a].size(), a});
    adj[c].clear();
    out.gone[c] = 1;
    out.steps.push_back(std::move(step));
  }
  return out;
}

LaplacianSolver::LaplacianSolver(const SparseSym& A, std::vector<double> excess,
                                 std::shared_ptr<const CholeskySymbolic> symbolic)
    : n_(A.size()) {
  StiffElimination el = eliminate_stiff(A, std::move(excess));
  steps_ = std::move(el.steps);
  std::vector<int> pos(n_, -1);
  for (std::size_t v = 0; v < n_; ++v)
    if (!el.gone[v]) {
      pos[v] = static_cast<int>(rest_.size());
      rest_.push_back(static_cast<int>(v));
    }
  if (rest_.empty()) return;
  std::vector<Triplet> t;
  for (const int v : rest_) {
    double diag = el.excess[static_cast<std::size_t>(v)];
    for (const auto& [j, w] : el.adj[static_cast<std::size_t>(v)]) {
      diag += w;
      if (j > v) t.push_back({pos[static_cast<std::size_t>(v)], pos[static_cast<std::size_t>(j)], -w});
    }
    t.push_back({pos[static_cast<std::size_t>(v)], pos[static_cast<std::size_t>(v)], diag});
  }
  const SparseSym R = SparseSym::from_triplets(rest_.size(), std::move(t));
  const bool reuse = symbolic && symbolic->n == R.size() && symbolic->pattern_ptr == R.row_ptr() &&
                     symbolic->pattern_idx == R.col_idx();
  factor_ = std::make_unique<CholeskyFactor>(reuse ? symbolic : chol_analyze(R), R);
}

std::vector<double> LaplacianSolver::solve(const std::vector<double>& b) const {
  if (b.size() != n_) throw SizeError("right-hand side length does not match the matrix");
  std::vector<double> r = b;
  for (const auto& s : steps_) {
    const double rc = r[static_cast<std::size_t>(s.v)] / s.pivot;
    for (const auto& [a, w] : s.weights) r[static_cast<std::size_t>(a)] += w * rc;
  }
  std::vector<double> x(n_, 0.0);
  if (factor_) {
    std::vector<double> y(rest_.size()), scratch;
    for (std::size_t k = 0; k < rest_.size(); ++k) y[k] = r[static_cast<std::size_t>(rest_[k])];
    factor_->solve_in_place(y, scratch);
    for (std::size_t k = 0; k < rest_.size(); ++k) x[static_cast<std::size_t>(rest_[k])] = y[k];
  }
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) {
    double s = r[static_cast<std::size_t>(it->v)];
    for (const auto& [j, w] : it->weights) s += w * x[static_cast<std::size_t>(j)];
    x[static_cast<std::size_t>(it->v)] = s / it->pivot;
  }
  return x;
}

}  // namespace cusp
