// fisher.hpp — system-environment quantum Fisher information via the
// two-sided master equation, Monte-Carlo trajectory estimators, an exact
// record enumerator for small systems, and the saturation diagnostics
// (condition I/II, saturating-state class membership and closure).

#pragma once

#include <cstdint>
#include <vector>

#include "sbm/hilbert.hpp"
#include "sbm/models.hpp"
#include "sbm/rng.hpp"
#include "sbm/trajectories.hpp"

namespace sbm::fisher {

using hilbert::CompositeSpace;
using models::ModelParams;
using models::ParamTarget;

// rho and its parameter derivatives sigma1 = d_eta1 rho, sigma2 = d_eta2 rho,
// tau = d_eta1 d_eta2 rho, all evaluated at eta1 = eta2 = eta.
struct TwoSidedState {
    Matrix rho, sigma1, sigma2, tau;
};

struct FisherSeries {
    std::vector<double> t;
    std::vector<double> f_se;          // system-environment QFI
    std::vector<double> f_total;       // I_E + F_S for the unravelling
    std::vector<double> i_e;           // classical FI of the record
    std::vector<double> f_s;           // mean conditional-state QFI
    std::vector<double> stderr_total;  // MC standard error of f_total
};

// F_SE(t) = 4 (tr tau - tr sigma1 tr sigma2) from the coupled linear ODEs
// obtained by differentiating the two-sided master equation. Initial state
// must be pure and normalized; sigma1 = sigma2 = tau = 0 at t = 0.
FisherSeries qfi_system_environment(const Vector& initial,
                                    const CompositeSpace& space,
                                    const ModelParams& params, ParamTarget target,
                                    const std::vector<double>& t_grid,
                                    double dt_me = 1e-3);

// Exposes the full two-sided state at the grid times (used by invariants:
// tr rho = 1 and sigma2 = sigma1^dag along the evolution).
std::vector<TwoSidedState> propagate_two_sided(const Vector& initial,
                                               const CompositeSpace& space,
                                               const ModelParams& params,
                                               ParamTarget target,
                                               const std::vector<double>& t_grid,
                                               double dt_me = 1e-3);

// Finite-difference oracle: evolve rho_{eta1,eta2} at the four stencil points
// (eta +- h, eta +- h) and take the mixed log-trace derivative. Kept
// independent of the derivative-propagation path above.
FisherSeries qfi_fd_oracle(const Vector& initial, const CompositeSpace& space,
                           const ModelParams& params, ParamTarget target,
                           const std::vector<double>& t_grid, double h,
                           double dt_me = 1e-3);

// Monte-Carlo estimators over sampled trajectories (records sampled with
// their physical probability, so weighted sums become plain means):
//   I_E = 4 mean(A^2),  F_S = 4 mean(<phi|phi> - A^2 - B^2),
//   F_total = 4 mean(<phi|phi> - B^2).
FisherSeries trajectory_fisher(const traj::EnsembleResult& ensemble);

struct EnumerationResult {
    double total_probability = 0.0;
    double f_total = 0.0;  // exact I_E + F_S over all 2^M records
    double i_e = 0.0;
    double f_s = 0.0;
    // per record (binary order, bit j = outcome of step j+1)
    std::vector<double> record_probability;
    std::vector<double> record_a, record_b;
};

// Exact sum over all 2^M photocounting records; M <= 12 and a tiny space
// (N <= 2, n_max <= 3) are enforced.
EnumerationResult enumerate_counting_records(const Vector& initial,
                                             const CompositeSpace& space,
                                             const ModelParams& params,
                                             ParamTarget target, int n_steps,
                                             double dt);

// |tr(dH rho(t))| on the master-equation solution; condition (I) holds when
// the maximum over the grid stays below tolerance.
std::vector<double> check_condition_I(const Matrix& initial,
                                      const CompositeSpace& space,
                                      const ModelParams& params,
                                      ParamTarget target,
                                      const std::vector<double>& t_grid,
                                      double dt_me = 1e-3);

struct ConditionIIStats {
    std::vector<double> per_trajectory_max;  // max_t |Im<psi|phi>| per trajectory
    double ensemble_max = 0.0;
};

ConditionIIStats check_condition_II(const traj::EnsembleResult& ensemble);

// Membership in the saturating-state class: every adjacent coefficient pair
// with both magnitudes above the floor must have its product on the required
// axis (imaginary for spin pairs; real (TC) or imaginary (GD) for boson
// pairs; BTC has spin pairs only). Violations are relative, |Re|/|.| or
// |Im|/|.|, hence global-phase invariant.
struct ClassReport {
    double max_violation_first = 0.0;   // spin pairs
    double max_violation_second = 0.0;  // boson pairs
    bool is_member = false;
};

ClassReport check_saturating_class(const Vector& psi, const CompositeSpace& space,
                                   models::Model model, double tol = 1e-8,
                                   double amplitude_floor = 1e-12);

// Convenience: worst violation of either kind (used for entry-time tracking).
double class_violation(const Vector& psi, const CompositeSpace& space,
                       models::Model model, double amplitude_floor = 1e-12);

// Random class member: random magnitudes/signs on the phase pattern the class
// prescribes, plus a random global phase.
Vector sample_class_member(const CompositeSpace& space, models::Model model,
                           RngStream& rng);

struct ClosureReport {
    double worst_violation_k0 = 0.0;
    double worst_violation_k1 = 0.0;
    double worst_violation_kj = 0.0;  // only probed for the homodyne unravelling
    bool pass = false;
};

// Draws n_random class members, applies each Kraus operator of the chosen
// unravelling, and re-checks membership. Homodyne currents are drawn from
// N(0, 1/dt).
ClosureReport class_closure_test(const CompositeSpace& space,
                                 const ModelParams& params,
                                 traj::Unravelling unravelling, int n_random,
                                 std::uint64_t seed, double dt = 0.05,
                                 double tol = 1e-8);

}  // namespace sbm::fisher
