#include "regretlab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace regretlab::linalg {

namespace {

void check_dim(int n, const char* where) {
  if (n < 1) {
    throw std::invalid_argument(std::string(where) + ": dimension must be >= 1, got " + std::to_string(n));
  }
}

void check_same_dim(const SymMatrix& a, const SymMatrix& b, const char* where) {
  if (a.dim() != b.dim()) {
    throw std::invalid_argument(std::string(where) + ": dimension mismatch (" +
                                std::to_string(a.dim()) + " vs " + std::to_string(b.dim()) + ")");
  }
}

}  // namespace

SymMatrix::SymMatrix(int n) : n_(n) {
  check_dim(n, "SymMatrix");
  data_.assign(static_cast<std::size_t>(n) * (n + 1) / 2, 0.0);
}

SymMatrix SymMatrix::identity(int n) {
  SymMatrix m(n);
  for (int i = 0; i < n; ++i) m.set(i, i, 1.0);
  return m;
}

SymMatrix SymMatrix::diag(const std::vector<double>& d) {
  SymMatrix m(static_cast<int>(d.size()));
  for (int i = 0; i < m.dim(); ++i) m.set(i, i, d[i]);
  return m;
}

SymMatrix SymMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  const int n = static_cast<int>(rows.size());
  check_dim(n, "SymMatrix::from_rows");
  for (const auto& r : rows) {
    if (static_cast<int>(r.size()) != n) {
      throw std::invalid_argument("SymMatrix::from_rows: matrix is not square");
    }
  }
  SymMatrix m(n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      m.set(i, j, 0.5 * (rows[i][j] + rows[j][i]));
    }
  }
  return m;
}

SymMatrix SymMatrix::from_dense_symmetrized(int n, const std::vector<double>& a) {
  check_dim(n, "SymMatrix::from_dense_symmetrized");
  if (a.size() != static_cast<std::size_t>(n) * n) {
    throw std::invalid_argument("SymMatrix::from_dense_symmetrized: wrong buffer size");
  }
  SymMatrix m(n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      m.set(i, j, 0.5 * (a[static_cast<std::size_t>(i) * n + j] + a[static_cast<std::size_t>(j) * n + i]));
    }
  }
  return m;
}

SymMatrix SymMatrix::operator+(const SymMatrix& o) const {
  check_same_dim(*this, o, "SymMatrix::operator+");
  SymMatrix r = *this;
  for (std::size_t k = 0; k < r.data_.size(); ++k) r.data_[k] += o.data_[k];
  return r;
}

SymMatrix SymMatrix::operator-(const SymMatrix& o) const {
  check_same_dim(*this, o, "SymMatrix::operator-");
  SymMatrix r = *this;
  for (std::size_t k = 0; k < r.data_.size(); ++k) r.data_[k] -= o.data_[k];
  return r;
}

SymMatrix SymMatrix::scaled(double c) const {
  SymMatrix r = *this;
  for (double& v : r.data_) v *= c;
  return r;
}

void SymMatrix::add_scaled(const SymMatrix& o, double c) {
  check_same_dim(*this, o, "SymMatrix::add_scaled");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += c * o.data_[k];
}

double SymMatrix::trace() const {
  double t = 0.0;
  for (int i = 0; i < n_; ++i) t += (*this)(i, i);
  return t;
}

double SymMatrix::frobenius_norm() const {
  double s = 0.0;
  for (int i = 0; i < n_; ++i) {
    for (int j = 0; j < n_; ++j) {
      const double v = (*this)(i, j);
      s += v * v;
    }
  }
  return std::sqrt(s);
}

double SymMatrix::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::fabs(v));
  return m;
}

std::vector<double> SymMatrix::dense() const {
  std::vector<double> d(static_cast<std::size_t>(n_) * n_);
  for (int i = 0; i < n_; ++i) {
    for (int j = 0; j < n_; ++j) {
      d[static_cast<std::size_t>(i) * n_ + j] = (*this)(i, j);
    }
  }
  return d;
}

EigenDecomposition sym_eigen(const SymMatrix& m) {
  const int n = m.dim();
  std::vector<double> a = m.dense();
  std::vector<double> v(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i) * n + i] = 1.0;

  auto at = [&](std::vector<double>& buf, int r, int c) -> double& {
    return buf[static_cast<std::size_t>(r) * n + c];
  };

  // Cyclic Jacobi sweeps: rotate away every off-diagonal pair until the
  // off-diagonal mass is negligible relative to the matrix scale.
  const double scale = std::max(m.max_abs(), 1e-300);
  const int max_sweeps = 128;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) off += std::fabs(at(a, p, q));
    }
    if (off <= 1e-15 * scale * n * n) break;

    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = at(a, p, q);
        if (apq == 0.0) continue;
        const double app = at(a, p, p);
        const double aqq = at(a, q, q);
        const double tau = (aqq - app) / (2.0 * apq);
        // Smaller-magnitude root of t^2 + 2*tau*t - 1 = 0 for stability.
        const double t = (tau >= 0.0) ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                                      : 1.0 / (tau - std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;

        for (int k = 0; k < n; ++k) {
          const double akp = at(a, k, p);
          const double akq = at(a, k, q);
          at(a, k, p) = c * akp - s * akq;
          at(a, k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = at(a, p, k);
          const double aqk = at(a, q, k);
          at(a, p, k) = c * apk - s * aqk;
          at(a, q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = at(v, k, p);
          const double vkq = at(v, k, q);
          at(v, k, p) = c * vkp - s * vkq;
          at(v, k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  EigenDecomposition e;
  e.n = n;
  e.values.resize(n);
  for (int i = 0; i < n; ++i) e.values[i] = at(a, i, i);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int x, int y) { return e.values[x] > e.values[y]; });

  std::vector<double> sorted_vals(n);
  std::vector<double> sorted_vecs(static_cast<std::size_t>(n) * n);
  for (int k = 0; k < n; ++k) {
    sorted_vals[k] = e.values[order[k]];
    for (int r = 0; r < n; ++r) {
      sorted_vecs[static_cast<std::size_t>(r) * n + k] = at(v, r, order[k]);
    }
  }
  e.values = std::move(sorted_vals);
  e.vectors = std::move(sorted_vecs);
  return e;
}

namespace {

// Rebuild V * diag(f(lambda)) * V^T from a decomposition.
SymMatrix rebuild(const EigenDecomposition& e, const std::vector<double>& lambda) {
  const int n = e.n;
  SymMatrix m(n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) {
        s += lambda[k] * e.vector_entry(i, k) * e.vector_entry(j, k);
      }
      m.set(i, j, s);
    }
  }
  return m;
}

double psd_tolerance(const EigenDecomposition& e) {
  double spectral = 0.0;
  for (double v : e.values) spectral = std::max(spectral, std::fabs(v));
  return 1e-10 * std::max(1.0, spectral);
}

}  // namespace

PsdMatrix::PsdMatrix(const SymMatrix& m) : m_(m) {
  const EigenDecomposition e = sym_eigen(m);
  const double tol = psd_tolerance(e);
  const double min_eig = e.values.back();
  if (min_eig < -tol) {
    std::ostringstream msg;
    msg << "PsdMatrix: matrix has eigenvalue " << min_eig
        << " below -tol_psd (" << -tol << "); not positive semidefinite";
    throw std::invalid_argument(msg.str());
  }
}

PsdMatrix PsdMatrix::zero(int n) { return PsdMatrix(SymMatrix(n), Unchecked{}); }

PsdMatrix PsdMatrix::identity(int n) { return PsdMatrix(SymMatrix::identity(n), Unchecked{}); }

PsdMatrix psd_sqrt(const PsdMatrix& m) {
  const EigenDecomposition e = sym_eigen(m.sym());
  const double tol = psd_tolerance(e);
  std::vector<double> roots(e.n);
  for (int i = 0; i < e.n; ++i) {
    const double v = e.values[i];
    if (v < -tol) {
      throw std::invalid_argument("psd_sqrt: input not PSD (eigenvalue " + std::to_string(v) + ")");
    }
    roots[i] = std::sqrt(std::max(v, 0.0));
  }
  return PsdMatrix(rebuild(e, roots), PsdMatrix::Unchecked{});
}

PsdMatrix project_psd(const SymMatrix& m) {
  const EigenDecomposition e = sym_eigen(m);
  bool any_negative = false;
  std::vector<double> clipped(e.n);
  for (int i = 0; i < e.n; ++i) {
    clipped[i] = std::max(e.values[i], 0.0);
    any_negative = any_negative || (e.values[i] < 0.0);
  }
  if (!any_negative) return PsdMatrix(m, PsdMatrix::Unchecked{});
  return PsdMatrix(rebuild(e, clipped), PsdMatrix::Unchecked{});
}

SymMatrix inverse_spd(const SymMatrix& m) {
  const EigenDecomposition e = sym_eigen(m);
  const double lmax = e.values.front();
  const double lmin = e.values.back();
  if (!(lmin > 1e-14 * std::max(lmax, 1e-300)) || lmax <= 0.0) {
    std::ostringstream msg;
    msg << "inverse_spd: matrix is singular or not positive definite (min eigenvalue "
        << lmin << ", max " << lmax << ")";
    throw std::invalid_argument(msg.str());
  }
  std::vector<double> inv(e.n);
  for (int i = 0; i < e.n; ++i) inv[i] = 1.0 / e.values[i];
  return rebuild(e, inv);
}

SymMatrix sandwich(const SymMatrix& v, const SymMatrix& x) {
  check_same_dim(v, x, "sandwich");
  const int n = v.dim();
  const std::vector<double> vd = v.dense();
  const std::vector<double> xd = x.dense();
  std::vector<double> tmp(static_cast<std::size_t>(n) * n, 0.0);
  std::vector<double> out(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) {
      const double vik = vd[static_cast<std::size_t>(i) * n + k];
      if (vik == 0.0) continue;
      for (int j = 0; j < n; ++j) tmp[static_cast<std::size_t>(i) * n + j] += vik * xd[static_cast<std::size_t>(k) * n + j];
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) {
      const double tik = tmp[static_cast<std::size_t>(i) * n + k];
      if (tik == 0.0) continue;
      for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(i) * n + j] += tik * vd[static_cast<std::size_t>(k) * n + j];
    }
  }
  return SymMatrix::from_dense_symmetrized(n, out);
}

SymMatrix congruence(const std::vector<double>& u, int n, const SymMatrix& x) {
  if (x.dim() != n || u.size() != static_cast<std::size_t>(n) * n) {
    throw std::invalid_argument("congruence: dimension mismatch");
  }
  const std::vector<double> xd = x.dense();
  // tmp = X * U
  std::vector<double> tmp(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) {
      const double xik = xd[static_cast<std::size_t>(i) * n + k];
      if (xik == 0.0) continue;
      for (int j = 0; j < n; ++j) tmp[static_cast<std::size_t>(i) * n + j] += xik * u[static_cast<std::size_t>(k) * n + j];
    }
  }
  // out = U^T * tmp
  std::vector<double> out(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) {
      const double uki = u[static_cast<std::size_t>(k) * n + i];
      if (uki == 0.0) continue;
      for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(i) * n + j] += uki * tmp[static_cast<std::size_t>(k) * n + j];
    }
  }
  return SymMatrix::from_dense_symmetrized(n, out);
}

double trace_product(const SymMatrix& a, const SymMatrix& b) {
  check_same_dim(a, b, "trace_product");
  const int n = a.dim();
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) s += a(i, j) * b(i, j);
  }
  return s;
}

std::vector<double> matvec(const SymMatrix& m, const std::vector<double>& x) {
  const int n = m.dim();
  if (x.size() != static_cast<std::size_t>(n)) {
    throw std::invalid_argument("matvec: dimension mismatch");
  }
  std::vector<double> y(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += m(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

double scalar_dare(double a, double b, double q, double r) {
  // p <- q + a^2*p*r/(r + b^2*p), algebraically identical to the matrix
  // iteration; converges to the unique stabilizing fixed point.
  double p = q;
  const long long cap = 1000000;
  for (long long it = 0; it < cap; ++it) {
    const double denom = r + b * b * p;
    double next;
    if (denom > 0.0) {
      next = q + a * a * p * r / denom;
    } else {
      // r == 0 and b == 0: pure open-loop Lyapunov iteration.
      next = q + a * a * p;
    }
    if (std::fabs(next - p) < 1e-12) return next;
    if (!std::isfinite(next)) break;
    p = next;
  }
  std::ostringstream msg;
  msg << "solve_dare: no convergence after 1000000 iterations (a=" << a << ", b=" << b
      << ", q=" << q << ", r=" << r << ")";
  throw std::runtime_error(msg.str());
}

double scalar_lqr_gain(double a, double b, double r, double p) {
  const double denom = r + b * p * b;
  if (denom <= 0.0) {
    throw std::runtime_error("lqr_gain: R + B^T P B is not positive (" + std::to_string(denom) + ")");
  }
  return b * p * a / denom;
}

PsdMatrix solve_dare(const SymMatrix& a, const std::vector<double>& b,
                     const PsdMatrix& q, double r) {
  const int n = a.dim();
  if (b.size() != static_cast<std::size_t>(n) || q.dim() != n) {
    throw std::invalid_argument("solve_dare: dimension mismatch between A, B, Q");
  }
  if (r < 0.0) {
    throw std::invalid_argument("solve_dare: R must be >= 0, got " + std::to_string(r));
  }
  {
    const EigenDecomposition eq = sym_eigen(q.sym());
    if (eq.values.back() <= 0.0) {
      throw std::invalid_argument("solve_dare: Q must be positive definite");
    }
  }
  if (n == 1) {
    const double p = scalar_dare(a(0, 0), b[0], q(0, 0), r);
    SymMatrix pm(1);
    pm.set(0, 0, p);
    return project_psd(pm);
  }

  SymMatrix p = q.sym();
  const long long cap = 1000000;
  for (long long it = 0; it < cap; ++it) {
    // next = A P A + Q - (A P b)(A P b)^T / (r + b^T P b), with A symmetric.
    const SymMatrix apa = sandwich(a, p);
    const std::vector<double> pb = matvec(p, b);
    const std::vector<double> apb = matvec(a, pb);
    double btpb = 0.0;
    for (int i = 0; i < n; ++i) btpb += b[i] * pb[i];
    const double denom = r + btpb;

    SymMatrix next = apa + q.sym();
    if (denom > 0.0) {
      for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
          next.add(i, j, -apb[i] * apb[j] / denom);
        }
      }
    }

    double delta = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j) delta = std::max(delta, std::fabs(next(i, j) - p(i, j)));
    }
    p = next;
    if (delta < 1e-12) {
      return project_psd(p);
    }
    if (!std::isfinite(p.max_abs())) break;
  }
  std::ostringstream msg;
  msg << "solve_dare: no convergence after 1000000 iterations (n=" << n
      << ", |A|_max=" << a.max_abs() << ", r=" << r << ")";
  throw std::runtime_error(msg.str());
}

std::vector<double> lqr_gain(const SymMatrix& a, const std::vector<double>& b,
                             double r, const PsdMatrix& p) {
  const int n = a.dim();
  if (b.size() != static_cast<std::size_t>(n) || p.dim() != n) {
    throw std::invalid_argument("lqr_gain: dimension mismatch");
  }
  const std::vector<double> pb = matvec(p.sym(), b);
  double btpb = 0.0;
  for (int i = 0; i < n; ++i) btpb += b[i] * pb[i];
  const double denom = r + btpb;
  if (denom <= 0.0) {
    throw std::runtime_error("lqr_gain: R + B^T P B is not positive (" + std::to_string(denom) + ")");
  }
  // K_j = (b^T P A)_j / denom; P symmetric so b^T P = (P b)^T.
  std::vector<double> k(n, 0.0);
  for (int j = 0; j < n; ++j) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += pb[i] * a(i, j);
    k[j] = s / denom;
  }
  return k;
}

}  // namespace regretlab::linalg
