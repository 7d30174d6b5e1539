#pragma once

#include <stdexcept>
#include <vector>

// Time-domain simulation of the first-order ARX plant
//
//   y(t) = -a0*y(t-1) + b0*u(t-1) + e(t),   y(0) = u(0) = 0,
//
// under certainty-equivalence minimum-variance or linear-quadratic control,
// recursive least-squares identification, and one of three exploration
// policies (lazy, immediate pulse, 1/sqrt(t)-decaying). Every operation is
// deterministic given the injected noise arrays; the simulator draws nothing
// itself.
namespace regretlab::sim {

struct ArxSystem {
  double a0;
  double b0;
  double sigma_e2;

  // validates |a0| < 1 (open-loop stability), b0 != 0, sigma_e2 >= 0
  ArxSystem(double a0_in, double b0_in, double sigma_e2_in);
};

// 2x2 symmetric matrix in flat form for the RLS hot loop.
struct Sym2 {
  double p00 = 0.0;
  double p01 = 0.0;
  double p11 = 0.0;
};

struct RlsState {
  double a_hat = 0.0;
  double b_hat = 0.0;
  Sym2 p;
};

// One recursive least-squares step with regressor phi = (phi0, phi1):
//   k = P phi / (1 + phi^T P phi),  theta += k (y - phi^T theta),
//   P -= (P phi)(P phi)^T / (1 + phi^T P phi)
// The covariance update is symmetric by construction, which coincides with
// the (P + P^T)/2 re-symmetrization of the textbook form.
RlsState rls_update(const RlsState& state, double phi0, double phi1, double y_t);

struct ExplorationPolicy {
  enum class Kind { kLazy, kImmediate, kDecaying };
  Kind kind = Kind::kLazy;
  double beta = 0.0;   // Immediate: pulse height at t = 1
  double alpha = 0.0;  // Decaying: variance scale of w(t) ~ N(0, alpha/sqrt(t))
  int n_i = 3;         // Immediate/Decaying: open-loop fit length

  static ExplorationPolicy lazy();
  static ExplorationPolicy immediate(double beta, int n_i = 3);  // beta >= 0, n_i >= 2
  static ExplorationPolicy decaying(double alpha, int n_i = 3);  // alpha >= 0, n_i >= 2
};

double arx_step(const ArxSystem& system, double y_prev, double u_prev, double e_t);

// K = -a_hat / b_hat so that u = -K*y cancels the plant recursion.
// Throws std::domain_error ("degenerate estimate") when |b_hat| < b_floor.
double mv_gain(double a_hat, double b_hat, double b_floor = 1e-6);

// Scalar-state LQ gain for the realization x = y, A = -a_hat, B = b_hat:
// solves the scalar DARE and returns K with u = -K*x. Throws
// std::domain_error ("degenerate estimate") when the estimate is
// unstabilizable: |b_hat| < b_floor together with |a_hat| >= 1.
double lq_gain_from_estimate(double a_hat, double b_hat, double q, double r,
                             double b_floor = 1e-6);

// Lazy -> 0; Immediate -> beta at t = 1, else 0;
// Decaying -> (alpha/sqrt(t))^{1/2} * wbar_t.
double exploration_signal(const ExplorationPolicy& policy, long t, double wbar_t);

struct SimConfig {
  double a_init = -0.3;
  double b_init = 0.8;
  double p_init_scale = 1e3;  // P_init = p_init_scale * I (0 freezes RLS)
  double q = 1.0;             // LQ state weight
  double r = 1.0;             // LQ input weight
  double b_floor = 1e-6;      // mv/lq degeneracy floor
  double y_max = 1e12;        // divergence guard and regret clip value
  bool record_trace = false;
};

struct SimTrace {
  std::vector<double> y, u, w, e;
  std::vector<double> instant_regret;
};

struct SimResult {
  SimTrace trace;  // filled only when record_trace; truncated if diverged
  RlsState final_estimate;  // identifier state when the run ended
  double regret_sample = 0.0;
  bool diverged = false;
  long diverged_at = 0;         // first t with |y| > y_max (0 = none)
  bool fit_fallback = false;    // batch fit fell back to the pulse-only regression
  bool fit_degenerate = false;  // batch fit had no informative samples; init held
};

// Minimum-variance adaptive control; regret_sample = sum_t (y(t) - e(t))^2.
// e_bar is the unit-variance noise realization (scaled by sigma_e inside);
// w_bar is required exactly when the policy is Decaying.
SimResult simulate_mvac(const ArxSystem& system, const ExplorationPolicy& policy,
                        const std::vector<double>& e_bar, const SimConfig& config,
                        const std::vector<double>* w_bar = nullptr);

// Linear-quadratic adaptive control; regret_sample = J_T(u) - J_T(u*) with
// J_T = sum_t q*y(t)^2 + r*u(t)^2 and u* the paired trajectory under the
// true-parameter LQ gain, driven by the same e realization with w = 0.
SimResult simulate_lqac(const ArxSystem& system, const ExplorationPolicy& policy,
                        const std::vector<double>& e_bar, const SimConfig& config,
                        const std::vector<double>* w_bar = nullptr);

}  // namespace regretlab::sim
