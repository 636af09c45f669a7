#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "cuspsteklov/assembly.hpp"
#include "cuspsteklov/cholesky.hpp"
#include "cuspsteklov/dense.hpp"
#include "cuspsteklov/laplacian.hpp"
#include "cuspsteklov/sparse.hpp"

namespace cusp::linear {

using fem::FemFunction;
using fem::Problem;
using fem::WeightMode;

/// Boundary elimination of a symmetric system: S = A_GG - A_GI A_II^{-1} A_IG.
///
/// Interior nodes with needle-sized couplings (max |A_ij| above kStiffRatio times the
/// median) are eliminated first by pivot-by-summation steps on the Laplacian form; the
/// rest go through the sparse Cholesky. S is also kept in Laplacian form, since its
/// diagonal cannot carry energies below eps * max|S_ij|.
class DtnReduction {
 public:
  /// `boundary` lists the kept DOFs (ascending). `excess` is A 1 computed without
  /// cancellation; empty means the row sums of A. Column solves are split over `threads`
  /// with a fixed partition, so S does not depend on the thread count.
  DtnReduction(const SparseSym& A, std::vector<int> boundary, int threads = 1,
               std::vector<double> excess = {});

  const DenseSym& schur() const { return S_; }
  const LaplacianForm& laplacian() const { return L_; }
  const std::vector<int>& boundary() const { return boundary_; }
  const std::vector<int>& interior() const { return interior_; }
  std::size_t stiff_eliminated() const { return stiff_.size(); }

  /// Full vector with trace g and its discrete A-harmonic extension.
  FemFunction extend(const std::vector<double>& g) const;

 private:
  std::size_t n_ = 0;
  std::vector<int> boundary_, interior_;  // interior_: nodes left to the Cholesky
  std::vector<StiffStep> stiff_;
  DenseSym S_;
  LaplacianForm L_;
  std::unique_ptr<CholeskyFactor> factor_;
  // A_IG by boundary column: interior position and value
  std::vector<std::vector<std::pair<int, double>>> coupling_;
};

DenseSym dtn_reduce(const SparseSym& A, const std::vector<int>& boundary, int threads = 1);

/// A 1 for the system matrix, summed from nonnegative terms: zero (harmonic) or the
/// lumped mass (Schrodinger).
std::vector<double> system_excess(const fem::FemSpace& V, Problem problem);

struct EigenPair {
  double lambda = 0.0;
  std::vector<double> trace;  // on boundary vertices, ascending vertex order
  FemFunction volume;
  double residual = 0.0;
  double rayleigh = 0.0;
};

struct SpectrumResult {
  Problem problem = Problem::Harmonic;
  bool constrained = false;
  WeightMode weight_mode = WeightMode::Weighted;
  std::vector<EigenPair> pairs;
  std::vector<int> boundary;  // vertex ids of the trace entries
  std::size_t vertices = 0;
  std::size_t triangles = 0;
};

struct SpectrumOptions {
  int threads = 1;
  std::size_t dense_cap = 4000;
};

/// The k smallest eigenpairs of S g = lambda M_G g. Harmonic unconstrained problems get
/// lambda_0 = 0 with the constant trace inserted explicitly after deflating constants.
SpectrumResult steklov_spectrum(const fem::FemSpace& V, Problem problem, int k, bool constrained,
                                const SpectrumOptions& options = {});

/// System matrix of the volume form: K (harmonic) or K + M (Schrodinger).
SparseSym system_matrix(const fem::FemSpace& V, Problem problem);

struct MinMaxReport {
  double max_violation = 0.0;   // max over samples of R(u) - lambda_n
  double max_self_error = 0.0;  // max |R(v_n) - lambda_n| / max(1, |lambda_n|)
  std::size_t samples = 0;
  bool ok = true;
};

MinMaxReport minmax_check(const SpectrumResult& result, const SparseSym& A, const SparseSym& Bw,
                          int trials, std::uint64_t seed, std::size_t max_n = 0);

struct LadderSpec {
  bool disk = false;
  geometry::DomainSpec domain;
  double radius = 1.0;
  double h = 0.2;  // base mesh size
  int levels = 4;  // level 0 is the base mesh
  fem::SpaceOptions space;
};

/// Base mesh plus levels-1 uniform refinements.
std::vector<mesh::TriMesh> build_ladder(const LadderSpec& spec);
fem::FemSpace make_space(const LadderSpec& spec, mesh::TriMesh mesh);

struct ConvergenceResult {
  std::vector<std::size_t> vertices;
  std::vector<std::vector<double>> lambda;     // [level][j]
  std::vector<std::vector<double>> rel_delta;  // [level][j], level >= 1
  std::vector<double> extrapolated;            // Richardson, second order in h
  std::vector<double> observed_order;          // from the last three levels (NaN if < 3)
};

ConvergenceResult convergence_study(const LadderSpec& spec, Problem problem, int k,
                                    bool constrained = false, const SpectrumOptions& options = {});

}  // namespace cusp::linear
