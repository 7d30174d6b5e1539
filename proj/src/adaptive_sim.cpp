#include "regretlab/adaptive_sim.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "regretlab/linalg.hpp"

namespace regretlab::sim {

namespace {

enum class Mode { kMv, kLq };

// Refreshes the certainty-equivalence gain from the current estimate.
// Returns false (caller holds the previous gain) when the estimate is
// degenerate: |b_hat| < b_floor for MV, and additionally |a_hat| >= 1
// (unstabilizable) for LQ. Never throws in the hot loop.
bool refresh_gain(Mode mode, const RlsState& rls, const SimConfig& config, double* k_out) {
  if (!std::isfinite(rls.a_hat) || !std::isfinite(rls.b_hat)) return false;
  const bool b_ok = std::fabs(rls.b_hat) >= config.b_floor;
  if (mode == Mode::kMv) {
    if (!b_ok) return false;
    *k_out = mv_gain(rls.a_hat, rls.b_hat, config.b_floor);
    return true;
  }
  if (!b_ok && std::fabs(rls.a_hat) >= 1.0) return false;
  try {
    *k_out = lq_gain_from_estimate(rls.a_hat, rls.b_hat, config.q, config.r, config.b_floor);
  } catch (const std::exception&) {
    // Riccati solve can stall on near-unstabilizable transients; holding the
    // previous controller is the same recovery as a degenerate estimate.
    return false;
  }
  return true;
}

struct BatchFit {
  double a_hat = 0.0;
  double b_hat = 0.0;
  Sym2 p_seed;
  bool fallback = false;
  bool degenerate = false;
};

// Least-squares fit of (a, b) from the open-loop samples t = 1..n_i with
// regressor phi(t) = (-y(t-1), u(t-1)). When the 2x2 normal matrix is
// singular or has condition number >= 1e12, falls back to regressing y on
// the input alone (a_hat = 0); with no input energy at all the initial
// estimate is held and the realization is flagged degenerate.
BatchFit batch_fit(const std::vector<double>& y_hist, const std::vector<double>& u_hist,
                   int n_i, const SimConfig& config) {
  double m00 = 0.0, m01 = 0.0, m11 = 0.0;
  double r0 = 0.0, r1 = 0.0;
  for (int t = 1; t <= n_i; ++t) {
    const double phi0 = -y_hist[t - 1];
    const double phi1 = u_hist[t - 1];
    m00 += phi0 * phi0;
    m01 += phi0 * phi1;
    m11 += phi1 * phi1;
    r0 += phi0 * y_hist[t];
    r1 += phi1 * y_hist[t];
  }

  BatchFit fit;
  const double half_tr = 0.5 * (m00 + m11);
  const double det = m00 * m11 - m01 * m01;
  const double disc = std::sqrt(std::max(half_tr * half_tr - det, 0.0));
  const double eig_min = half_tr - disc;
  const double eig_max = half_tr + disc;
  if (eig_min > 0.0 && eig_min > 1e-12 * eig_max) {
    fit.a_hat = (m11 * r0 - m01 * r1) / det;
    fit.b_hat = (m00 * r1 - m01 * r0) / det;
    fit.p_seed = Sym2{m11 / det, -m01 / det, m00 / det};
    return fit;
  }
  fit.p_seed = Sym2{config.p_init_scale, 0.0, config.p_init_scale};
  if (m11 > 0.0) {
    fit.a_hat = 0.0;
    fit.b_hat = r1 / m11;  // pulse-only regression on the input channel
    fit.fallback = true;
    return fit;
  }
  fit.a_hat = config.a_init;
  fit.b_hat = config.b_init;
  fit.degenerate = true;
  return fit;
}

SimResult run_adaptive(Mode mode, const ArxSystem& system, const ExplorationPolicy& policy,
                       const std::vector<double>& e_bar, const SimConfig& config,
                       const std::vector<double>* w_bar) {
  if (e_bar.empty()) {
    throw std::invalid_argument("simulate: noise realization must be non-empty");
  }
  if (policy.kind == ExplorationPolicy::Kind::kDecaying && w_bar == nullptr) {
    throw std::invalid_argument(
        "simulate: decaying policy requires an exploration noise array");
  }
  if (w_bar != nullptr && w_bar->size() != e_bar.size()) {
    throw std::invalid_argument("simulate: exploration noise length " +
                                std::to_string(w_bar->size()) + " does not match horizon " +
                                std::to_string(e_bar.size()));
  }
  if (!(config.p_init_scale >= 0.0)) {
    throw std::invalid_argument("simulate: p_init_scale must be nonnegative");
  }
  if (!(config.b_floor > 0.0)) {
    throw std::invalid_argument("simulate: b_floor must be positive");
  }
  if (!(config.y_max > 0.0)) {
    throw std::invalid_argument("simulate: y_max must be positive");
  }
  if (mode == Mode::kLq && (!(config.q >= 0.0) || !(config.r > 0.0))) {
    throw std::invalid_argument("simulate: LQ weights require q >= 0 and r > 0");
  }

  const long horizon = static_cast<long>(e_bar.size());
  const double sigma_e = std::sqrt(system.sigma_e2);
  const bool open_loop = policy.kind != ExplorationPolicy::Kind::kLazy;
  const long fit_time = open_loop ? policy.n_i : 0;

  SimResult result;
  RlsState rls;
  rls.a_hat = config.a_init;
  rls.b_hat = config.b_init;
  rls.p = Sym2{config.p_init_scale, 0.0, config.p_init_scale};

  double k_gain = 0.0;
  bool have_gain = refresh_gain(mode, rls, config, &k_gain);

  double k_star = 0.0;
  if (mode == Mode::kLq) {
    k_star = lq_gain_from_estimate(system.a0, system.b0, config.q, config.r, config.b_floor);
  }

  std::vector<double> y_hist, u_hist;
  if (open_loop) {
    y_hist.reserve(static_cast<std::size_t>(fit_time) + 1);
    u_hist.reserve(static_cast<std::size_t>(fit_time) + 1);
    y_hist.push_back(0.0);  // y(0)
    u_hist.push_back(0.0);  // u(0)
  }
  if (config.record_trace) {
    const auto n = static_cast<std::size_t>(horizon);
    result.trace.y.reserve(n);
    result.trace.u.reserve(n);
    result.trace.w.reserve(n);
    result.trace.e.reserve(n);
    result.trace.instant_regret.reserve(n);
  }

  double y_prev = 0.0, u_prev = 0.0;
  double y_opt_prev = 0.0, u_opt_prev = 0.0;
  double regret_acc = 0.0;  // MV: running sum of (y - e)^2
  double j_adapt = 0.0, j_opt = 0.0;

  for (long t = 1; t <= horizon; ++t) {
    const double e_t = sigma_e * e_bar[static_cast<std::size_t>(t - 1)];
    const double y_t = arx_step(system, y_prev, u_prev, e_t);
    if (!(std::fabs(y_t) <= config.y_max)) {
      result.diverged = true;
      result.diverged_at = t;
      break;
    }

    const double wbar_t = (w_bar != nullptr) ? (*w_bar)[static_cast<std::size_t>(t - 1)] : 0.0;
    const double w_t = exploration_signal(policy, t, wbar_t);

    double u_t;
    if (open_loop && t <= fit_time) {
      u_t = w_t;  // pure exploration until the fit
      y_hist.push_back(y_t);
      u_hist.push_back(u_t);
      if (t == fit_time) {
        const BatchFit fit = batch_fit(y_hist, u_hist, policy.n_i, config);
        rls.a_hat = fit.a_hat;
        rls.b_hat = fit.b_hat;
        rls.p = fit.p_seed;
        result.fit_fallback = fit.fallback;
        result.fit_degenerate = fit.degenerate;
        double k_new = 0.0;
        if (refresh_gain(mode, rls, config, &k_new)) {
          k_gain = k_new;
          have_gain = true;
        }
      }
    } else {
      if (policy.kind != ExplorationPolicy::Kind::kImmediate) {
        // Lazy always updates; Decaying resumes recursive updates after the
        // fit. Order within the step: update, refresh, then actuate.
        rls = rls_update(rls, -y_prev, u_prev, y_t);
        double k_new = 0.0;
        if (refresh_gain(mode, rls, config, &k_new)) {
          k_gain = k_new;
          have_gain = true;
        }
      }
      u_t = have_gain ? -(k_gain * y_t) + w_t : w_t;
    }

    double step_regret;
    if (mode == Mode::kMv) {
      const double d = y_t - e_t;
      step_regret = d * d;
      regret_acc += step_regret;
    } else {
      // Paired optimal trajectory: same noise, true-parameter gain, w = 0,
      // evaluated with the identical arithmetic shape as the adaptive run.
      const double y_opt = arx_step(system, y_opt_prev, u_opt_prev, e_t);
      const double u_opt = -(k_star * y_opt) + 0.0;
      const double cost_adapt = config.q * (y_t * y_t) + config.r * (u_t * u_t);
      const double cost_opt = config.q * (y_opt * y_opt) + config.r * (u_opt * u_opt);
      j_adapt += cost_adapt;
      j_opt += cost_opt;
      step_regret = cost_adapt - cost_opt;
      y_opt_prev = y_opt;
      u_opt_prev = u_opt;
    }

    if (config.record_trace) {
      result.trace.y.push_back(y_t);
      result.trace.u.push_back(u_t);
      result.trace.w.push_back(w_t);
      result.trace.e.push_back(e_t);
      result.trace.instant_regret.push_back(step_regret);
    }

    y_prev = y_t;
    u_prev = u_t;
  }

  result.final_estimate = rls;
  if (result.diverged) {
    result.regret_sample = config.y_max;  // clipped contribution for averages
  } else if (mode == Mode::kMv) {
    result.regret_sample = regret_acc;
  } else {
    result.regret_sample = j_adapt - j_opt;
  }
  return result;
}

}  // namespace

ArxSystem::ArxSystem(double a0_in, double b0_in, double sigma_e2_in)
    : a0(a0_in), b0(b0_in), sigma_e2(sigma_e2_in) {
  if (!(std::fabs(a0) < 1.0)) {
    throw std::invalid_argument("ArxSystem: |a0| must be < 1, got " + std::to_string(a0));
  }
  if (!std::isfinite(b0) || b0 == 0.0) {
    throw std::invalid_argument("ArxSystem: b0 must be nonzero and finite");
  }
  if (!std::isfinite(sigma_e2) || !(sigma_e2 >= 0.0)) {
    throw std::invalid_argument("ArxSystem: sigma_e2 must be nonnegative, got " +
                                std::to_string(sigma_e2));
  }
}

RlsState rls_update(const RlsState& state, double phi0, double phi1, double y_t) {
  const double g0 = state.p.p00 * phi0 + state.p.p01 * phi1;  // P phi
  const double g1 = state.p.p01 * phi0 + state.p.p11 * phi1;
  const double s = 1.0 + (phi0 * g0 + phi1 * g1);
  const double innovation = y_t - (phi0 * state.a_hat + phi1 * state.b_hat);
  RlsState next;
  next.a_hat = state.a_hat + (g0 / s) * innovation;
  next.b_hat = state.b_hat + (g1 / s) * innovation;
  next.p.p00 = state.p.p00 - g0 * g0 / s;
  next.p.p01 = state.p.p01 - g0 * g1 / s;
  next.p.p11 = state.p.p11 - g1 * g1 / s;
  return next;
}

ExplorationPolicy ExplorationPolicy::lazy() {
  ExplorationPolicy policy;
  policy.kind = Kind::kLazy;
  return policy;
}

ExplorationPolicy ExplorationPolicy::immediate(double beta, int n_i) {
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw std::invalid_argument("ExplorationPolicy: pulse height beta must be nonnegative");
  }
  if (n_i < 2) {
    throw std::invalid_argument("ExplorationPolicy: fit length n_i must be at least 2, got " +
                                std::to_string(n_i));
  }
  ExplorationPolicy policy;
  policy.kind = Kind::kImmediate;
  policy.beta = beta;
  policy.n_i = n_i;
  return policy;
}

ExplorationPolicy ExplorationPolicy::decaying(double alpha, int n_i) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument(
        "ExplorationPolicy: variance scale alpha must be nonnegative");
  }
  if (n_i < 2) {
    throw std::invalid_argument("ExplorationPolicy: fit length n_i must be at least 2, got " +
                                std::to_string(n_i));
  }
  ExplorationPolicy policy;
  policy.kind = Kind::kDecaying;
  policy.alpha = alpha;
  policy.n_i = n_i;
  return policy;
}

double arx_step(const ArxSystem& system, double y_prev, double u_prev, double e_t) {
  return (-system.a0) * y_prev + system.b0 * u_prev + e_t;
}

double mv_gain(double a_hat, double b_hat, double b_floor) {
  if (!(std::fabs(b_hat) >= b_floor)) {
    throw std::domain_error("mv_gain: degenerate estimate, |b_hat| = " +
                            std::to_string(std::fabs(b_hat)) + " below floor " +
                            std::to_string(b_floor));
  }
  return -a_hat / b_hat;
}

double lq_gain_from_estimate(double a_hat, double b_hat, double q, double r, double b_floor) {
  if (!std::isfinite(a_hat) || !std::isfinite(b_hat)) {
    throw std::domain_error("lq_gain_from_estimate: degenerate estimate (non-finite)");
  }
  if (std::fabs(b_hat) < b_floor && std::fabs(a_hat) >= 1.0) {
    throw std::domain_error("lq_gain_from_estimate: degenerate estimate, |b_hat| = " +
                            std::to_string(std::fabs(b_hat)) + " below floor with |a_hat| = " +
                            std::to_string(std::fabs(a_hat)) + " >= 1");
  }
  const double a = -a_hat;  // state realization x = y: x(t+1) = a x(t) + b u(t)
  const double b = b_hat;
  const double p = linalg::scalar_dare(a, b, q, r);
  return linalg::scalar_lqr_gain(a, b, r, p);
}

double exploration_signal(const ExplorationPolicy& policy, long t, double wbar_t) {
  if (t < 1) {
    throw std::invalid_argument("exploration_signal: t must be >= 1, got " + std::to_string(t));
  }
  switch (policy.kind) {
    case ExplorationPolicy::Kind::kLazy:
      return 0.0;
    case ExplorationPolicy::Kind::kImmediate:
      return t == 1 ? policy.beta : 0.0;
    case ExplorationPolicy::Kind::kDecaying:
      return std::sqrt(policy.alpha / std::sqrt(static_cast<double>(t))) * wbar_t;
  }
  throw std::logic_error("exploration_signal: unknown policy kind");
}

SimResult simulate_mvac(const ArxSystem& system, const ExplorationPolicy& policy,
                        const std::vector<double>& e_bar, const SimConfig& config,
                        const std::vector<double>* w_bar) {
  return run_adaptive(Mode::kMv, system, policy, e_bar, config, w_bar);
}

SimResult simulate_lqac(const ArxSystem& system, const ExplorationPolicy& policy,
                        const std::vector<double>& e_bar, const SimConfig& config,
                        const std::vector<double>* w_bar) {
  return run_adaptive(Mode::kLq, system, policy, e_bar, config, w_bar);
}

}  // namespace regretlab::sim
