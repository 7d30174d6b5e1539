#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "regretlab/linalg.hpp"

// The abstract finite-horizon regret model and its exact case analysis.
//
// A spec (W, Z, S, T) describes the designed-exploration problem: pick PSD
// information increments L_{w,1..T} minimizing
//
//   R(T) = sum_t [ tr(W * I_t^{-1}) + tr(Z^{-1} * L_{w,t}) ],
//   I_t  = t*S + sum_{k<=t} L_{w,k}.
//
// The optimum always concentrates all excitation at t = 1 ("one pulse");
// depending on S and the threshold statistic c_T the pulse is zero (lazy)
// or positive (immediate), with closed forms at the extremes and a
// projected-gradient solve in between.
namespace regretlab::model {

using linalg::PsdMatrix;
using linalg::SymMatrix;

// Problem data. Z must be strictly positive definite; W and S are PSD.
struct RegretModelSpec {
  PsdMatrix w;    // degradation weight (Hessian half)
  PsdMatrix z;    // excitation-power normalizer, strictly PD
  PsdMatrix s;    // per-step noise information (time-invariant)
  long horizon;   // T >= 1

  RegretModelSpec(PsdMatrix w_in, PsdMatrix z_in, PsdMatrix s_in, long t);
  int dim() const { return w.dim(); }
};

enum class CaseLabel {
  kLazyCase1,       // S PD and c_T >= 1: zero excitation is optimal
  kImmediateCase2,  // S PD and c_T < 1: positive pulse at t = 1
  kImmediateCase3,  // S singular: pulse mandatory, sqrt(T) regret
};

// Stable identifier used in CSV/JSON output.
const char* case_name(CaseLabel label);

// A full excitation plan L_{w,1..T}.
struct ExcitationSchedule {
  std::vector<PsdMatrix> entries;

  static ExcitationSchedule zero(int dim, long t);
  static ExcitationSchedule one_pulse(const PsdMatrix& x1, long t);
  // L_{w,t} = (alpha / sqrt(t)) * direction — the model-level analogue of
  // 1/sqrt(t)-decaying excitation with scale alpha.
  static ExcitationSchedule sqrt_decay(const PsdMatrix& direction, double alpha, long t);
};

// Partial sums computed by direct summation, small terms first
// (descending t), so no closed-form approximation error enters the model.
double harmonic_sum(long t);  // alpha_T = sum_{t<=T} 1/t
double basel_sum(long t);     // beta_T  = sum_{t<=T} 1/t^2

// Change of variables making Z the identity: with Z^{-1} = V*V, the
// normalized spec has S -> VSV, W -> VWV, and any solution X of the
// normalized problem maps back as V^{-1} X V^{-1}. Regret and c_T are
// invariant under the transform.
struct NormalizedSpec {
  RegretModelSpec spec;
  SymMatrix v;
  SymMatrix v_inv;
};
NormalizedSpec normalize_spec(const RegretModelSpec& spec);

// c_T = 1 / (lambda_max(Z S^{-1} W S^{-1}) * beta_T), evaluated on the
// normalized spec (the two routes agree by similarity). Returns +infinity
// when W = 0. Throws std::invalid_argument when S is singular.
double compute_c_T(const RegretModelSpec& spec);

CaseLabel classify_case(const RegretModelSpec& spec);

// tr(S^{-1} W) * alpha_T — the regret of the all-zero schedule. Requires S PD.
double lazy_regret(const RegretModelSpec& spec);

// Evaluates R(T) for an arbitrary schedule. Throws std::runtime_error
// naming t if some information matrix I_t is singular.
double evaluate_schedule(const RegretModelSpec& spec, const ExcitationSchedule& schedule);

// Certificate bounds per case. Both validate the spec's classification and
// throw std::invalid_argument when called for the wrong case.
std::pair<double, double> case2_bounds(const RegretModelSpec& spec);
std::pair<double, double> case3_bounds(const RegretModelSpec& spec);

struct SolveOptions {
  bool force_numeric = false;     // skip closed forms, always run descent
  double grad_tol = 1e-9;         // projected-gradient norm threshold
  long max_iterations = 100000;
};

// Raised when the projected-gradient descent cannot reach grad_tol.
class SolverNonConvergence : public std::runtime_error {
 public:
  SolverNonConvergence(const std::string& what, double grad_norm_in, long iterations_in)
      : std::runtime_error(what), grad_norm(grad_norm_in), iterations(iterations_in) {}
  double grad_norm;
  long iterations;
};

struct ProblemOneSolution {
  CaseLabel case_label;
  PsdMatrix x1;         // optimal L_{w,1}; zero matrix in Case 1
  double regret;        // objective of the one-pulse schedule {x1, 0, ...}
  double lower_bound;
  double upper_bound;
  double c_t;           // NaN when S is singular
  long iterations;      // 0 when a closed form was used
  double grad_norm;     // final projected-gradient norm (0 for closed forms)
};

ProblemOneSolution solve_problem_one(const RegretModelSpec& spec,
                                     const SolveOptions& options = SolveOptions{});

}  // namespace regretlab::model
