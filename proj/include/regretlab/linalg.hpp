#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

// Small dense symmetric-matrix kernel: eigendecomposition (cyclic Jacobi),
// PSD square roots, PSD-cone projection, and the discrete algebraic Riccati
// equation. Sizes here are tiny (n <= 8), so everything is plain loops over
// packed storage; no attempt at large-scale performance.
namespace regretlab::linalg {

// Symmetric matrix with packed upper-triangle storage, so entries (i,j) and
// (j,i) are literally the same slot and symmetry can never drift.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(int n);
  static SymMatrix identity(int n);
  static SymMatrix diag(const std::vector<double>& d);
  // Accepts a full square matrix and symmetrizes it as (A + A^T)/2.
  static SymMatrix from_rows(const std::vector<std::vector<double>>& rows);
  static SymMatrix from_dense_symmetrized(int n, const std::vector<double>& a);

  int dim() const { return n_; }
  double operator()(int i, int j) const { return data_[idx(i, j)]; }
  void set(int i, int j, double v) { data_[idx(i, j)] = v; }
  void add(int i, int j, double v) { data_[idx(i, j)] += v; }

  SymMatrix operator+(const SymMatrix& o) const;
  SymMatrix operator-(const SymMatrix& o) const;
  SymMatrix scaled(double c) const;
  void add_scaled(const SymMatrix& o, double c);  // *this += c*o

  double trace() const;
  double frobenius_norm() const;
  double max_abs() const;
  std::vector<double> dense() const;  // row-major n*n copy

 private:
  std::size_t idx(int i, int j) const {
    if (i > j) std::swap(i, j);
    return static_cast<std::size_t>(i) * n_ - static_cast<std::size_t>(i) * (i - 1) / 2 + (j - i);
  }
  int n_ = 0;
  std::vector<double> data_;
};

struct EigenDecomposition {
  std::vector<double> values;   // descending
  std::vector<double> vectors;  // row-major n*n; column k is the k-th eigenvector
  int n = 0;
  double vector_entry(int row, int col) const { return vectors[static_cast<std::size_t>(row) * n + col]; }
};

// Cyclic Jacobi rotations; reconstruction error <= 1e-12 relative Frobenius.
EigenDecomposition sym_eigen(const SymMatrix& m);

// Positive-semidefinite wrapper. Construction validates eigenvalues against
// tol_psd = 1e-10 * max(1, spectral norm) and throws std::invalid_argument.
class PsdMatrix {
 public:
  explicit PsdMatrix(const SymMatrix& m);
  static PsdMatrix zero(int n);
  static PsdMatrix identity(int n);

  const SymMatrix& sym() const { return m_; }
  int dim() const { return m_.dim(); }
  double operator()(int i, int j) const { return m_(i, j); }

 private:
  struct Unchecked {};
  PsdMatrix(const SymMatrix& m, Unchecked) : m_(m) {}
  SymMatrix m_;

  friend PsdMatrix psd_sqrt(const PsdMatrix& m);
  friend PsdMatrix project_psd(const SymMatrix& m);
};

// Unique PSD square root via eigendecomposition (negative round-off clipped).
PsdMatrix psd_sqrt(const PsdMatrix& m);

// Frobenius-nearest PSD matrix: eigenvalues clipped at zero.
PsdMatrix project_psd(const SymMatrix& m);

// Inverse of a symmetric positive-definite matrix; throws if any eigenvalue
// is not safely positive relative to the largest.
SymMatrix inverse_spd(const SymMatrix& m);

// v * x * v for symmetric v, x (result symmetrized against round-off).
SymMatrix sandwich(const SymMatrix& v, const SymMatrix& x);

// u^T * x * u where u is a dense row-major n*n matrix.
SymMatrix congruence(const std::vector<double>& u, int n, const SymMatrix& x);

// tr(a*b) for symmetric a, b.
double trace_product(const SymMatrix& a, const SymMatrix& b);

// y = m*x for symmetric m.
std::vector<double> matvec(const SymMatrix& m, const std::vector<double>& x);

// Fixed-point DARE iteration P <- A^T P A + Q - A^T P B (R + B^T P B)^-1 B^T P A
// from P0 = Q; stops when the iterate change falls below 1e-12 (absolute),
// capped at 1e6 iterations. A is taken symmetric (the shapes used here);
// B is a column vector, R a nonnegative scalar.
PsdMatrix solve_dare(const SymMatrix& a, const std::vector<double>& b,
                     const PsdMatrix& q, double r);

// K = (R + B^T P B)^-1 B^T P A, returned as a length-n row vector.
std::vector<double> lqr_gain(const SymMatrix& a, const std::vector<double>& b,
                             double r, const PsdMatrix& p);

// Scalar fast paths used in simulation hot loops (same iteration, no allocs).
double scalar_dare(double a, double b, double q, double r);
double scalar_lqr_gain(double a, double b, double r, double p);

}  // namespace regretlab::linalg
