#include "cuspsteklov/dense.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "cuspsteklov/errors.hpp"

namespace cusp {

std::vector<double> DenseSym::multiply(const std::vector<double>& x) const {
  if (x.size() != n_) throw SizeError("vector length does not match matrix dimension");
  std::vector<double> y(n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i) {
    const double* r = row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < n_; ++j) s += r[j] * x[j];
    y[i] = s;
  }
  return y;
}

double DenseSym::quad(const std::vector<double>& x) const {
  const auto y = multiply(x);
  double s = 0.0;
  for (std::size_t i = 0; i < n_; ++i) s += x[i] * y[i];
  return s;
}

double DenseSym::max_abs() const {
  double m = 0.0;
  for (double v : a_) m = std::max(m, std::abs(v));
  return m;
}

namespace {

void sort_and_fix_signs(EigenResult& r) {
  const std::size_t n = r.values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return r.values[a] < r.values[b]; });
  EigenResult s;
  s.sweeps = r.sweeps;
  s.values.resize(n);
  s.vectors = DenseMatrix(r.vectors.rows, n);
  for (std::size_t k = 0; k < n; ++k) {
    s.values[k] = r.values[order[k]];
    const double* src = r.vectors.col(order[k]);
    double* dst = s.vectors.col(k);
    std::size_t big = 0;
    for (std::size_t i = 0; i < r.vectors.rows; ++i)
      if (std::abs(src[i]) > std::abs(src[big]) * (1.0 + 1e-10)) big = i;
    const double sign = src[big] < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < r.vectors.rows; ++i) dst[i] = sign * src[i];
  }
  r = std::move(s);
}

}  // namespace

EigenResult jacobi_sym_eigen(const DenseSym& A, const JacobiOptions& opt) {
  const std::size_t n = A.size();
  if (n > opt.dense_cap)
    throw SizeError("dense eigenproblem of dimension " + std::to_string(n) +
                    " exceeds the cap of " + std::to_string(opt.dense_cap));
  std::vector<double> a(A.data(), A.data() + n * n);
  EigenResult r;
  r.vectors = DenseMatrix(n, n);
  for (std::size_t i = 0; i < n; ++i) r.vectors(i, i) = 1.0;

  // Rotations are skipped only when the pivot is negligible relative to its diagonal
  // entries, which keeps small eigenvalues of graded matrices relatively accurate.
  constexpr double rel = 1e-15;
  int sweep = 0;
  for (; sweep < opt.max_sweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        const double app = a[p * n + p], aqq = a[q * n + q];
        if (std::abs(apq) <= rel * std::sqrt(std::abs(app) * std::abs(aqq)) ||
            std::abs(apq) < 1e-300) {
          a[p * n + q] = a[q * n + p] = 0.0;
          continue;
        }
        rotated = true;
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = std::isinf(theta * theta)
                             ? 0.5 / theta
                             : (theta >= 0.0 ? 1.0 : -1.0) /
                                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        double* rp = a.data() + p * n;
        double* rq = a.data() + q * n;
        for (std::size_t k = 0; k < n; ++k) {
          const double x = rp[k], y = rq[k];
          rp[k] = c * x - s * y;
          rq[k] = s * x + c * y;
        }
        for (std::size_t k = 0; k < n; ++k) {
          a[k * n + p] = rp[k];
          a[k * n + q] = rq[k];
        }
        rp[p] = app - t * apq;
        rq[q] = aqq + t * apq;
        rp[q] = rq[p] = 0.0;
        double* vp = r.vectors.col(p);
        double* vq = r.vectors.col(q);
        for (std::size_t k = 0; k < n; ++k) {
          const double x = vp[k], y = vq[k];
          vp[k] = c * x - s * y;
          vq[k] = s * x + c * y;
        }
      }
    }
    if (!rotated) break;
  }
  if (sweep == opt.max_sweeps)
    throw NonConvergenceError("Jacobi sweeps did not converge", 0.0);
  r.sweeps = sweep;
  r.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) r.values[i] = a[i * n + i];
  sort_and_fix_signs(r);
  return r;
}

namespace {

// Lower factor in row-major storage.
std::vector<double> cholesky_rows(const DenseSym& B) {
  const std::size_t n = B.size();
  std::vector<double> l(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = B(i, j);
      const double* li = l.data() + i * n;
      const double* lj = l.data() + j * n;
      for (std::size_t k = 0; k < j; ++k) s -= li[k] * lj[k];
      if (i == j) {
        if (!(s > 0.0) || !std::isfinite(s))
          throw NotSpdError("matrix is not positive definite (pivot " + std::to_string(s) +
                            " at row " + std::to_string(i) + ")");
        l[i * n + i] = std::sqrt(s);
      } else {
        l[i * n + j] = s / lj[j];
      }
    }
  }
  return l;
}

}  // namespace

DenseMatrix dense_cholesky(const DenseSym& B) {
  const std::size_t n = B.size();
  const std::vector<double> l = cholesky_rows(B);
  DenseMatrix L(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) L(i, j) = l[i * n + j];
  return L;
}

namespace {

// C = L^{-1} A L^{-T} with exact symmetry; l is the row-major lower factor.
DenseSym transform(const DenseSym& A, const std::vector<double>& l) {
  const std::size_t n = A.size();
  DenseMatrix Y(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double* y = Y.col(j);
    for (std::size_t i = 0; i < n; ++i) {
      const double* li = l.data() + i * n;
      double s = A(i, j);
      for (std::size_t k = 0; k < i; ++k) s -= li[k] * y[k];
      y[i] = s / li[i];
    }
  }
  // Column j of C solves L c = (row j of Y).
  DenseSym C(n);
  std::vector<double> c(n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      const double* li = l.data() + i * n;
      double s = Y(j, i);
      for (std::size_t k = 0; k < i; ++k) s -= li[k] * c[k];
      c[i] = s / li[i];
    }
    // The upper entries were set from earlier columns; average the two triangles.
    for (std::size_t i = 0; i < j; ++i) C.set(i, j, 0.5 * (c[i] + C(i, j)));
    for (std::size_t i = j; i < n; ++i) C.set(i, j, c[i]);
  }
  return C;
}

// v := L^{-T} v for each column.
void back_transform(DenseMatrix& V, const std::vector<double>& l) {
  const std::size_t n = V.rows;
  for (std::size_t j = 0; j < V.cols; ++j) {
    double* v = V.col(j);
    for (std::size_t i = n; i-- > 0;) {
      const double* li = l.data() + i * n;
      v[i] /= li[i];
      for (std::size_t k = 0; k < i; ++k) v[k] -= li[k] * v[i];
    }
  }
}

void check_pencil(const DenseSym& A, const DenseSym& B, const JacobiOptions& opt) {
  if (B.size() != A.size()) throw SizeError("pencil matrices differ in size");
  if (A.size() > opt.dense_cap)
    throw SizeError("dense eigenproblem of dimension " + std::to_string(A.size()) +
                    " exceeds the cap of " + std::to_string(opt.dense_cap));
}

}  // namespace

namespace {

// Pencil solve after a symmetric diagonal scaling that makes B unit-diagonal; the scaled
// B is well conditioned for boundary mass matrices however small the weight gets.
EigenResult scaled_pencil(const DenseSym& A, const DenseSym& B, const JacobiOptions& opt) {
  const std::size_t n = A.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(B(i, i) > 0.0)) throw NotSpdError("pencil mass has a nonpositive diagonal entry");
    d[i] = 1.0 / std::sqrt(B(i, i));
  }
  DenseSym As(n), Bs(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      As.set(i, j, d[i] * A(i, j) * d[j]);
      Bs.set(i, j, d[i] * B(i, j) * d[j]);
    }
  const std::vector<double> l = cholesky_rows(Bs);
  EigenResult w = jacobi_sym_eigen(transform(As, l), opt);
  back_transform(w.vectors, l);
  for (std::size_t k = 0; k < w.vectors.cols; ++k) {
    double* v = w.vectors.col(k);
    for (std::size_t i = 0; i < n; ++i) v[i] *= d[i];
  }
  return w;
}

}  // namespace

EigenResult generalized_sym_eigen(const DenseSym& A, const DenseSym& B, const JacobiOptions& opt) {
  check_pencil(A, B, opt);
  return scaled_pencil(A, B, opt);
}

EigenResult generalized_sym_eigen_constrained(const DenseSym& A, const DenseSym& B,
                                              const std::vector<double>& m,
                                              const JacobiOptions& opt) {
  check_pencil(A, B, opt);
  const std::size_t n = A.size();
  if (m.size() != n) throw SizeError("constraint vector has the wrong length");
  if (n < 2) throw SizeError("constrained pencil needs dimension at least 2");
  // Eliminate the DOF r with the largest scaled constraint coefficient:
  // v_r = sum_{i != r} c_i v_i with c_i = -m_i / m_r.
  std::size_t r = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = std::abs(m[i]) / std::sqrt(std::max(B(i, i), 1e-300));
    if (s > best) {
      best = s;
      r = i;
    }
  }
  if (!(std::abs(m[r]) > 0.0)) throw ParameterError("constraint vector vanishes");
  std::vector<std::size_t> keep;
  std::vector<double> c;
  for (std::size_t i = 0; i < n; ++i)
    if (i != r) {
      keep.push_back(i);
      c.push_back(-m[i] / m[r]);
    }
  auto reduce = [&](const DenseSym& X) {
    DenseSym R(n - 1);
    const double xrr = X(r, r);
    for (std::size_t a = 0; a < n - 1; ++a)
      for (std::size_t b = a; b < n - 1; ++b) {
        const std::size_t i = keep[a], j = keep[b];
        R.set(a, b, X(i, j) + c[a] * X(r, j) + c[b] * X(i, r) + c[a] * c[b] * xrr);
      }
    return R;
  };
  EigenResult w = scaled_pencil(reduce(A), reduce(B), opt);
  DenseMatrix V(n, n - 1);
  for (std::size_t k = 0; k < n - 1; ++k) {
    const double* src = w.vectors.col(k);
    double* dst = V.col(k);
    double vr = 0.0;
    for (std::size_t a = 0; a < n - 1; ++a) {
      dst[keep[a]] = src[a];
      vr += c[a] * src[a];
    }
    dst[r] = vr;
  }
  w.vectors = std::move(V);
  return w;
}

EigenResult one_sided_jacobi(DenseMatrix G, const JacobiOptions& opt) {
  const std::size_t m = G.rows, n = G.cols;
  if (n > opt.dense_cap)
    throw SizeError("dense problem of dimension " + std::to_string(n) + " exceeds the cap of " +
                    std::to_string(opt.dense_cap));
  const double tol = std::sqrt(static_cast<double>(std::max<std::size_t>(m, 1))) *
                     std::numeric_limits<double>::epsilon();
  EigenResult r;
  r.vectors = DenseMatrix(n, n);
  for (std::size_t i = 0; i < n; ++i) r.vectors(i, i) = 1.0;
  auto dotc = [&](const double* a, const double* b) {
    double s = 0.0;
    for (std::size_t k = 0; k < m; ++k) s += a[k] * b[k];
    return s;
  };
  std::vector<double> nrm(n);
  int sweep = 0;
  for (; sweep < opt.max_sweeps; ++sweep) {
    for (std::size_t j = 0; j < n; ++j) nrm[j] = dotc(G.col(j), G.col(j));
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double* gp = G.col(p);
        double* gq = G.col(q);
        const double c = dotc(gp, gq);
        const double a = nrm[p], b = nrm[q];
        if (std::abs(c) <= tol * std::sqrt(a) * std::sqrt(b) || std::abs(c) < 1e-280) continue;
        rotated = true;
        const double zeta = (b - a) / (2.0 * c);
        const double t = std::isinf(zeta * zeta)
                             ? 0.5 / zeta
                             : (zeta >= 0.0 ? 1.0 : -1.0) /
                                   (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double cs = 1.0 / std::sqrt(1.0 + t * t), sn = cs * t;
        for (std::size_t k = 0; k < m; ++k) {
          const double x = gp[k], y = gq[k];
          gp[k] = cs * x - sn * y;
          gq[k] = sn * x + cs * y;
        }
        nrm[p] = std::max(a - t * c, 0.0);
        nrm[q] = b + t * c;
        double* vp = r.vectors.col(p);
        double* vq = r.vectors.col(q);
        for (std::size_t k = 0; k < n; ++k) {
          const double x = vp[k], y = vq[k];
          vp[k] = cs * x - sn * y;
          vq[k] = sn * x + cs * y;
        }
      }
    }
    if (!rotated) break;
  }
  if (sweep == opt.max_sweeps)
    throw NonConvergenceError("one-sided Jacobi did not converge", 0.0);
  r.sweeps = sweep + 1;
  r.values.resize(n);
  for (std::size_t j = 0; j < n; ++j) r.values[j] = dotc(G.col(j), G.col(j));
  sort_and_fix_signs(r);
  return r;
}

EigenResult laplacian_pencil_eigen(const LaplacianForm& A, const DenseSym& B,
                                   const std::vector<double>* m, const JacobiOptions& opt) {
  const std::size_t n = A.weights.size();
  if (A.excess.size() != n || B.size() != n) throw SizeError("pencil parts differ in size");
  if (n > opt.dense_cap)
    throw SizeError("dense eigenproblem of dimension " + std::to_string(n) +
                    " exceeds the cap of " + std::to_string(opt.dense_cap));

  // Pivot-by-summation LDL^T; row k of F = D^{1/2} L^T is written into f.
  std::vector<double> w(A.weights.data(), A.weights.data() + n * n);
  std::vector<double> e = A.excess;
  DenseMatrix F(n, n);  // column-major, F(k, j) nonzero for j >= k
  for (std::size_t k = 0; k < n; ++k) {
    const double* wk = w.data() + k * n;
    double d = e[k], scale = std::abs(e[k]);
    for (std::size_t j = k + 1; j < n; ++j) {
      d += wk[j];
      scale += std::abs(wk[j]);
    }
    if (d < -1e-12 * scale) throw NotSpdError("Laplacian-form matrix has a negative pivot");
    if (!(d > 0.0)) continue;  // zero pivot: a null direction
    const double sd = std::sqrt(d);
    F(k, k) = sd;
    for (std::size_t j = k + 1; j < n; ++j) F(k, j) = -wk[j] / sd;
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = w[i * n + k] / d;
      if (f == 0.0) continue;
      double* wi = w.data() + i * n;
      for (std::size_t j = k + 1; j < n; ++j)
        if (j != i) wi[j] += f * wk[j];
      e[i] += f * e[k];
    }
  }

  // Optional constraint by eliminating one DOF, as in the matrix pencil.
  std::vector<std::size_t> keep;
  std::vector<double> c;
  std::size_t r = n;
  if (m) {
    if (m->size() != n) throw SizeError("constraint vector has the wrong length");
    if (n < 2) throw SizeError("constrained pencil needs dimension at least 2");
    double best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double s = std::abs((*m)[i]) / std::sqrt(std::max(B(i, i), 1e-300));
      if (s > best) {
        best = s;
        r = i;
      }
    }
    if (!(std::abs((*m)[r]) > 0.0)) throw ParameterError("constraint vector vanishes");
  }
  for (std::size_t i = 0; i < n; ++i)
    if (i != r) {
      keep.push_back(i);
      c.push_back(r < n ? -(*m)[i] / (*m)[r] : 0.0);
    }
  const std::size_t nk = keep.size();
  DenseSym Br(nk);
  for (std::size_t a = 0; a < nk; ++a)
    for (std::size_t b = a; b < nk; ++b) {
      const std::size_t i = keep[a], j = keep[b];
      double v = B(i, j);
      if (r < n) v += c[a] * B(r, j) + c[b] * B(i, r) + c[a] * c[b] * B(r, r);
      Br.set(a, b, v);
    }
  std::vector<double> dsc(nk);
  for (std::size_t a = 0; a < nk; ++a) {
    if (!(Br(a, a) > 0.0)) throw NotSpdError("pencil mass has a nonpositive diagonal entry");
    dsc[a] = 1.0 / std::sqrt(Br(a, a));
  }
  for (std::size_t a = 0; a < nk; ++a)
    for (std::size_t b = a; b < nk; ++b) Br.set(a, b, dsc[a] * Br(a, b) * dsc[b]);
  const std::vector<double> l = cholesky_rows(Br);

  // G = F P D L^{-T}, one row of F at a time.
  DenseMatrix G(n, nk);
  std::vector<double> row(nk);
  for (std::size_t i = 0; i < n; ++i) {
    const double fr = r < n ? F(i, r) : 0.0;
    for (std::size_t a = 0; a < nk; ++a) row[a] = (F(i, keep[a]) + c[a] * fr) * dsc[a];
    for (std::size_t a = 0; a < nk; ++a) {
      const double* la = l.data() + a * nk;
      double s = row[a];
      for (std::size_t b = 0; b < a; ++b) s -= la[b] * row[b];
      row[a] = s / la[a];
    }
    for (std::size_t a = 0; a < nk; ++a) G(i, a) = row[a];
  }

  EigenResult z = one_sided_jacobi(std::move(G), opt);
  back_transform(z.vectors, l);
  DenseMatrix V(n, nk);
  for (std::size_t k = 0; k < nk; ++k) {
    const double* src = z.vectors.col(k);
    double* dst = V.col(k);
    double vr = 0.0;
    for (std::size_t a = 0; a < nk; ++a) {
      dst[keep[a]] = src[a] * dsc[a];
      vr += c[a] * dst[keep[a]];
    }
    if (r < n) dst[r] = vr;
  }
  z.vectors = std::move(V);
  sort_and_fix_signs(z);
  return z;
}

}  // namespace cusp
