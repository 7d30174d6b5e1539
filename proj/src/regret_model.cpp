#include "regretlab/regret_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace regretlab::model {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Q f(lambda) Q^T for a spectral function f of a symmetric matrix.
template <typename Fn>
SymMatrix apply_spectral(const linalg::EigenDecomposition& eig, Fn fn) {
  std::vector<double> mapped(eig.values.size());
  for (std::size_t k = 0; k < mapped.size(); ++k) mapped[k] = fn(eig.values[k]);
  SymMatrix out(eig.n);
  for (int i = 0; i < eig.n; ++i) {
    for (int j = i; j < eig.n; ++j) {
      double acc = 0.0;
      for (int k = 0; k < eig.n; ++k)
        acc += mapped[static_cast<std::size_t>(k)] * eig.vector_entry(i, k) * eig.vector_entry(j, k);
      out.set(i, j, acc);
    }
  }
  return out;
}

// v^T M v for an eigenvector stored as column `col` of an eigendecomposition.
double quad_form_column(const SymMatrix& m, const linalg::EigenDecomposition& eig, int col) {
  const int n = m.dim();
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    for (int j = 0; j < n; ++j) row += m(i, j) * eig.vector_entry(j, col);
    acc += eig.vector_entry(i, col) * row;
  }
  return acc;
}

// Strict positive definiteness up to the relative rank tolerance the model
// uses everywhere for S: eigenvalues above 1e-10 * lambda_max count as nonzero.
bool is_strictly_pd(const SymMatrix& m) {
  const auto eig = linalg::sym_eigen(m);
  const double lmax = eig.values.front();
  if (!(lmax > 0.0)) return false;
  return eig.values.back() > 1e-10 * lmax;
}

// tr(S^{-1} W); invariant under the Z change of variables.
double information_trace(const RegretModelSpec& spec) {
  const SymMatrix sinv = linalg::inverse_spd(spec.s.sym());
  return linalg::trace_product(sinv, spec.w.sym());
}

// Objective and gradient of the one-pulse dual form on a normalized spec:
//   g(Lambda) = sum_t tr(Wtilde (tS+Lambda)^{-1} Wtilde) + tr(Lambda).
// All inverses are taken through one congruence: with C = (S+Lambda)^{1/2}
// and C^{-1} S C^{-1} = Q D Q^T, the matrix tS + Lambda equals
// C Q ((t-1)D + I) Q^T C, so every t shares the same basis U = C^{-1} Q and
// only the scalar denominators (t-1) d_i + 1 vary with t.
struct PulseObjective {
  const SymMatrix& s;
  const SymMatrix& w;
  const long horizon;
  const int n;
  std::vector<double> recip;  // n rows of length `horizon`, row-major

  // Shared factorization; returns false when S + Lambda is numerically
  // singular (the objective is +infinity there).
  bool factor(const SymMatrix& lambda, std::vector<double>* u, std::vector<double>* d,
              SymMatrix* wprime) const {
    const SymMatrix e = s + lambda;
    const auto eig_e = linalg::sym_eigen(e);
    const double lmax = eig_e.values.front();
    if (!(eig_e.values.back() > 1e-14 * std::max(lmax, 1e-300))) return false;
    const SymMatrix cinv = apply_spectral(eig_e, [](double v) { return 1.0 / std::sqrt(v); });
    const auto eig_m = linalg::sym_eigen(linalg::sandwich(cinv, s));
    d->resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      (*d)[static_cast<std::size_t>(i)] = std::clamp(eig_m.values[static_cast<std::size_t>(i)], 0.0, 1.0);
    u->assign(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int k = 0; k < n; ++k) acc += cinv(i, k) * eig_m.vector_entry(k, j);
        (*u)[static_cast<std::size_t>(i) * n + j] = acc;
      }
    }
    *wprime = linalg::congruence(*u, n, w);
    return true;
  }

  double value(const SymMatrix& lambda) const {
    std::vector<double> u, d;
    SymMatrix wprime(n);
    if (!factor(lambda, &u, &d, &wprime)) return kInf;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const double di = d[static_cast<std::size_t>(i)];
      double h = 0.0;  // small terms first: t descending
      for (long t = horizon; t >= 1; --t) h += 1.0 / (static_cast<double>(t - 1) * di + 1.0);
      acc += wprime(i, i) * h;
    }
    return acc + lambda.trace();
  }

  double value_and_gradient(const SymMatrix& lambda, SymMatrix* grad) {
    std::vector<double> u, d;
    SymMatrix wprime(n);
    if (!factor(lambda, &u, &d, &wprime))
      throw std::runtime_error("solve_problem_one: internal error, gradient requested at an infeasible point");
    recip.resize(static_cast<std::size_t>(n) * horizon);
    double obj = lambda.trace();
    for (int i = 0; i < n; ++i) {
      const double di = d[static_cast<std::size_t>(i)];
      double* row = recip.data() + static_cast<std::size_t>(i) * horizon;
      for (long t = 1; t <= horizon; ++t) row[t - 1] = 1.0 / (static_cast<double>(t - 1) * di + 1.0);
      double h = 0.0;
      for (long t = horizon; t >= 1; --t) h += row[t - 1];
      obj += wprime(i, i) * h;
    }
    // grad = I - U (W' o P) U^T with P_ij = sum_t r_i(t) r_j(t)
    SymMatrix k(n);
    for (int i = 0; i < n; ++i) {
      const double* ri = recip.data() + static_cast<std::size_t>(i) * horizon;
      for (int j = i; j < n; ++j) {
        const double* rj = recip.data() + static_cast<std::size_t>(j) * horizon;
        double p = 0.0;
        for (long t = horizon; t >= 1; --t) p += ri[t - 1] * rj[t - 1];
        k.set(i, j, wprime(i, j) * p);
      }
    }
    std::vector<double> ut(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) ut[static_cast<std::size_t>(i) * n + j] = u[static_cast<std::size_t>(j) * n + i];
    SymMatrix g = SymMatrix::identity(n);
    g.add_scaled(linalg::congruence(ut, n, k), -1.0);
    *grad = g;
    return obj;
  }
};

struct NumericResult {
  SymMatrix lambda;
  long iterations;
  double grad_norm;
};

// Projected-gradient descent on the normalized spec. Backtracking halves the
// step from 1.0 and accepts on an Armijo decrease along the projection arc.
// The required decrease must clear the rounding-noise floor of the objective:
// once every step's true decrease is below that floor the objective can no
// longer guide the search (with a locally unstable unit step the iterates
// would bounce on noise at |pg| ~ sqrt(eps * g'' * |g|), far above the
// tolerance), so a second backtracking pass then accepts on contraction of
// the projected-gradient norm itself, which is computable to full precision.
NumericResult minimize_pulse(const RegretModelSpec& nspec, const SolveOptions& options) {
  const int n = nspec.dim();
  PulseObjective objective{nspec.s.sym(), nspec.w.sym(), nspec.horizon, n, {}};
  SymMatrix lam = linalg::psd_sqrt(nspec.w).sym().scaled(std::sqrt(static_cast<double>(nspec.horizon)));
  double g_val = objective.value(lam);
  if (!std::isfinite(g_val))
    throw std::invalid_argument(
        "solve_problem_one: initial point sqrt(T)*sqrt(W) leaves S + Lambda singular "
        "(W vanishes on a null direction of S)");
  SymMatrix grad(n);
  double pg_norm = kInf;
  long iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    g_val = objective.value_and_gradient(lam, &grad);
    SymMatrix full = lam;
    full.add_scaled(grad, -1.0);
    const SymMatrix full_proj = linalg::project_psd(full).sym();
    pg_norm = (lam - full_proj).frobenius_norm();
    if (pg_norm < options.grad_tol) return {lam, iter, pg_norm};

    const auto candidate_at = [&](double step) {
      if (step == 1.0) return full_proj;  // the projection already computed
      SymMatrix trial = lam;
      trial.add_scaled(grad, -step);
      return linalg::project_psd(trial).sym();
    };

    bool accepted = false;
    const double noise_floor =
        8.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::fabs(g_val));
    double step = 1.0;
    for (int rung = 0; rung < 40 && !accepted; ++rung, step *= 0.5) {
      const SymMatrix cand = candidate_at(step);
      const double g_cand = objective.value(cand);
      if (!std::isfinite(g_cand)) continue;
      const double decrease = linalg::trace_product(grad, lam - cand);
      if (g_cand <= g_val - std::max(1e-4 * decrease, noise_floor)) {
        lam = cand;
        accepted = true;
      }
    }
    if (!accepted) {
      // objective flat at floating-point resolution: contract pg instead
      step = 1.0;
      SymMatrix cand_grad(n);
      for (int rung = 0; rung < 40 && !accepted; ++rung, step *= 0.5) {
        const SymMatrix cand = candidate_at(step);
        if (!std::isfinite(objective.value(cand))) continue;
        (void)objective.value_and_gradient(cand, &cand_grad);
        SymMatrix cand_full = cand;
        cand_full.add_scaled(cand_grad, -1.0);
        const double pg_cand = (cand - linalg::project_psd(cand_full).sym()).frobenius_norm();
        if (pg_cand <= (1.0 - 1e-4 * step) * pg_norm) {
          lam = cand;
          accepted = true;
        }
      }
    }
    if (!accepted) break;  // neither the objective nor pg can improve
  }
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "solve_problem_one: projected gradient stopped after %ld iterations with "
                "projected-gradient norm %.6g (tolerance %.6g)",
                iter, pg_norm, options.grad_tol);
  throw SolverNonConvergence(detail, pg_norm, iter);
}

}  // namespace

RegretModelSpec::RegretModelSpec(PsdMatrix w_in, PsdMatrix z_in, PsdMatrix s_in, long t)
    : w(std::move(w_in)), z(std::move(z_in)), s(std::move(s_in)), horizon(t) {
  if (z.dim() != w.dim() || s.dim() != w.dim())
    throw std::invalid_argument("RegretModelSpec: W, Z, S must share one dimension (got " +
                                std::to_string(w.dim()) + ", " + std::to_string(z.dim()) + ", " +
                                std::to_string(s.dim()) + ")");
  if (horizon < 1)
    throw std::invalid_argument("RegretModelSpec: horizon must be >= 1, got " + std::to_string(horizon));
  if (!is_strictly_pd(z.sym()))
    throw std::invalid_argument("RegretModelSpec: Z must be strictly positive definite");
}

const char* case_name(CaseLabel label) {
  switch (label) {
    case CaseLabel::kLazyCase1: return "case1_lazy";
    case CaseLabel::kImmediateCase2: return "case2_immediate";
    case CaseLabel::kImmediateCase3: return "case3_immediate";
  }
  throw std::invalid_argument("case_name: unknown case label");
}

ExcitationSchedule ExcitationSchedule::zero(int dim, long t) {
  if (dim < 1) throw std::invalid_argument("ExcitationSchedule: dimension must be >= 1");
  if (t < 1) throw std::invalid_argument("ExcitationSchedule: length must be >= 1");
  ExcitationSchedule s;
  s.entries.assign(static_cast<std::size_t>(t), PsdMatrix::zero(dim));
  return s;
}

ExcitationSchedule ExcitationSchedule::one_pulse(const PsdMatrix& x1, long t) {
  ExcitationSchedule s = zero(x1.dim(), t);
  s.entries[0] = x1;
  return s;
}

ExcitationSchedule ExcitationSchedule::sqrt_decay(const PsdMatrix& direction, double alpha, long t) {
  if (!(alpha >= 0.0))
    throw std::invalid_argument("ExcitationSchedule: sqrt_decay scale must be >= 0, got " +
                                std::to_string(alpha));
  if (t < 1) throw std::invalid_argument("ExcitationSchedule: length must be >= 1");
  ExcitationSchedule s;
  s.entries.reserve(static_cast<std::size_t>(t));
  for (long k = 1; k <= t; ++k)
    s.entries.emplace_back(direction.sym().scaled(alpha / std::sqrt(static_cast<double>(k))));
  return s;
}

double harmonic_sum(long t) {
  double acc = 0.0;
  for (long k = t; k >= 1; --k) acc += 1.0 / static_cast<double>(k);
  return acc;
}

double basel_sum(long t) {
  double acc = 0.0;
  for (long k = t; k >= 1; --k) acc += 1.0 / (static_cast<double>(k) * static_cast<double>(k));
  return acc;
}

NormalizedSpec normalize_spec(const RegretModelSpec& spec) {
  const auto eig = linalg::sym_eigen(spec.z.sym());
  const SymMatrix v = apply_spectral(eig, [](double x) { return 1.0 / std::sqrt(x); });
  const SymMatrix v_inv = apply_spectral(eig, [](double x) { return std::sqrt(x); });
  RegretModelSpec normalized(PsdMatrix(linalg::sandwich(v, spec.w.sym())),
                             PsdMatrix::identity(spec.dim()),
                             PsdMatrix(linalg::sandwich(v, spec.s.sym())), spec.horizon);
  return NormalizedSpec{std::move(normalized), v, v_inv};
}

double compute_c_T(const RegretModelSpec& spec) {
  if (!is_strictly_pd(spec.s.sym()))
    throw std::invalid_argument("compute_c_T: S is singular, c_T is undefined (Case 3 applies)");
  const NormalizedSpec norm = normalize_spec(spec);
  const SymMatrix sinv = linalg::inverse_spd(norm.spec.s.sym());
  const SymMatrix mid = linalg::sandwich(sinv, norm.spec.w.sym());  // S^{-1} W S^{-1}
  const double lmax = linalg::sym_eigen(mid).values.front();
  if (!(lmax > 0.0)) return kInf;  // W = 0: staying lazy costs nothing
  return 1.0 / (lmax * basel_sum(spec.horizon));
}

CaseLabel classify_case(const RegretModelSpec& spec) {
  if (!is_strictly_pd(spec.s.sym())) return CaseLabel::kImmediateCase3;
  return compute_c_T(spec) >= 1.0 ? CaseLabel::kLazyCase1 : CaseLabel::kImmediateCase2;
}

double lazy_regret(const RegretModelSpec& spec) {
  if (!is_strictly_pd(spec.s.sym()))
    throw std::invalid_argument("lazy_regret: S must be strictly positive definite");
  return information_trace(spec) * harmonic_sum(spec.horizon);
}

double evaluate_schedule(const RegretModelSpec& spec, const ExcitationSchedule& schedule) {
  const int n = spec.dim();
  if (static_cast<long>(schedule.entries.size()) != spec.horizon)
    throw std::invalid_argument("evaluate_schedule: schedule length " +
                                std::to_string(schedule.entries.size()) + " does not match horizon " +
                                std::to_string(spec.horizon));
  for (const PsdMatrix& entry : schedule.entries)
    if (entry.dim() != n)
      throw std::invalid_argument("evaluate_schedule: schedule entry dimension mismatch");

  if (n == 1) {
    const double s0 = spec.s(0, 0);
    const double w0 = spec.w(0, 0);
    const double zi = 1.0 / spec.z(0, 0);
    double acc = 0.0, total = 0.0;
    for (long t = 1; t <= spec.horizon; ++t) {
      const double lt = schedule.entries[static_cast<std::size_t>(t - 1)](0, 0);
      acc += lt;
      const double info = static_cast<double>(t) * s0 + acc;
      if (!(info > 1e-300))
        throw std::runtime_error("evaluate_schedule: infinite regret at t=" + std::to_string(t) +
                                 " (singular information matrix)");
      total += w0 / info + zi * lt;
    }
    return total;
  }

  const SymMatrix zinv = linalg::inverse_spd(spec.z.sym());
  SymMatrix acc(n);
  double total = 0.0;
  for (long t = 1; t <= spec.horizon; ++t) {
    const SymMatrix& lt = schedule.entries[static_cast<std::size_t>(t - 1)].sym();
    acc.add_scaled(lt, 1.0);
    SymMatrix info = acc;
    info.add_scaled(spec.s.sym(), static_cast<double>(t));
    const auto eig = linalg::sym_eigen(info);
    const double lmax = eig.values.front();
    if (!(eig.values.back() > 1e-14 * std::max(lmax, 1e-300)))
      throw std::runtime_error("evaluate_schedule: infinite regret at t=" + std::to_string(t) +
                               " (singular information matrix)");
    double trace_term = 0.0;
    for (int i = 0; i < n; ++i)
      trace_term += quad_form_column(spec.w.sym(), eig, i) / eig.values[static_cast<std::size_t>(i)];
    total += trace_term + linalg::trace_product(zinv, lt);
  }
  return total;
}

std::pair<double, double> case2_bounds(const RegretModelSpec& spec) {
  if (classify_case(spec) != CaseLabel::kImmediateCase2)
    throw std::invalid_argument("case2_bounds: spec does not classify as Case 2");
  const double c = compute_c_T(spec);
  const double upper = information_trace(spec) * harmonic_sum(spec.horizon);
  return {(2.0 - c) * c * upper, upper};
}

std::pair<double, double> case3_bounds(const RegretModelSpec& spec) {
  if (classify_case(spec) != CaseLabel::kImmediateCase3)
    throw std::invalid_argument("case3_bounds: S is not singular");
  const NormalizedSpec norm = normalize_spec(spec);
  const SymMatrix& s = norm.spec.s.sym();
  const SymMatrix& w = norm.spec.w.sym();
  const auto eig_s = linalg::sym_eigen(s);
  const double rank_tol = 1e-10 * std::max(eig_s.values.front(), 0.0);
  const SymMatrix wtilde = linalg::psd_sqrt(norm.spec.w).sym();
  const double wt_max = linalg::sym_eigen(wtilde).values.front();
  const double degenerate_tol = 1e-14 * std::max(wt_max, 1e-300);

  double null_wtilde = 0.0;   // sum over null directions of n^T Wtilde n
  double null_ratio = 0.0;    // sum over null directions of (n^T W n)/(n^T Wtilde n)
  double range_weight = 0.0;  // sum over nonzero eigenvalues of (e^T W e)/lambda
  const int n = spec.dim();
  for (int k = 0; k < n; ++k) {
    const double lambda_k = eig_s.values[static_cast<std::size_t>(k)];
    if (lambda_k <= rank_tol) {
      const double a = quad_form_column(wtilde, eig_s, k);
      if (a <= degenerate_tol)
        throw std::invalid_argument(
            "case3_bounds: W carries no weight on a null direction of S; "
            "the bound formulas are undefined for this spec");
      null_wtilde += a;
      null_ratio += quad_form_column(w, eig_s, k) / a;
    } else {
      range_weight += quad_form_column(w, eig_s, k) / lambda_k;
    }
  }
  const double sqrt_t = std::sqrt(static_cast<double>(spec.horizon));
  const double lower = 2.0 * sqrt_t * null_wtilde;
  const double upper = sqrt_t * (null_ratio + null_wtilde) + harmonic_sum(spec.horizon) * range_weight;
  return {lower, upper};
}

ProblemOneSolution solve_problem_one(const RegretModelSpec& spec, const SolveOptions& options) {
  const CaseLabel label = classify_case(spec);
  const int n = spec.dim();
  const double c_t = label == CaseLabel::kImmediateCase3
                         ? std::numeric_limits<double>::quiet_NaN()
                         : compute_c_T(spec);

  if (label == CaseLabel::kLazyCase1 && !options.force_numeric) {
    const double regret = lazy_regret(spec);
    return {label, PsdMatrix::zero(n), regret, regret, regret, c_t, 0, 0.0};
  }

  // Bounds first: case3_bounds also rejects degenerate specs (W vanishing on
  // null(S)) before any numeric work starts.
  std::pair<double, double> bounds;
  switch (label) {
    case CaseLabel::kLazyCase1: {
      const double regret = lazy_regret(spec);
      bounds = {regret, regret};
      break;
    }
    case CaseLabel::kImmediateCase2:
      bounds = case2_bounds(spec);
      break;
    case CaseLabel::kImmediateCase3:
      bounds = case3_bounds(spec);
      break;
  }

  const NormalizedSpec norm = normalize_spec(spec);
  const double sqrt_t = std::sqrt(static_cast<double>(spec.horizon));

  if (label == CaseLabel::kImmediateCase3 && spec.s.sym().max_abs() == 0.0 && !options.force_numeric) {
    // S = 0 closed form: X1 = sqrt(T) * Wtilde, R = 2 sqrt(T) tr(Wtilde),
    // both on the normalized spec, then mapped back.
    const SymMatrix wtilde = linalg::psd_sqrt(norm.spec.w).sym();
    const PsdMatrix x1{linalg::sandwich(norm.v_inv, wtilde.scaled(sqrt_t))};
    const double regret = 2.0 * sqrt_t * wtilde.trace();
    return {label, x1, regret, bounds.first, bounds.second, c_t, 0, 0.0};
  }

  const NumericResult result = minimize_pulse(norm.spec, options);
  const PsdMatrix x1{linalg::sandwich(norm.v_inv, result.lambda)};
  const double regret = evaluate_schedule(spec, ExcitationSchedule::one_pulse(x1, spec.horizon));
  return {label, x1, regret, bounds.first, bounds.second, c_t, result.iterations, result.grad_norm};
}

}  // namespace regretlab::model
