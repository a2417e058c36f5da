// meanfield.hpp — thermodynamic-limit dynamics of the generalized Dicke model
// (spin components and boson quadratures), critical coupling, stationary
// branches with linear stability, and the closed-form Tavis-Cummings
// stationary QFI rates.

#pragma once

#include <vector>

#include "sbm/models.hpp"

namespace sbm::meanfield {

using models::ModelParams;

struct MeanFieldState {
    double m_x = 0, m_y = 0, m_z = 0;  // spin components (|m| <= 1)
    double m_q = 0, m_p = 0;           // boson quadratures
};

// Heisenberg equations of motion in the N -> infinity limit:
//   m_x' = -sqrt(2) lambda m_p m_y
//   m_y' = -Omega m_z + sqrt(2) lambda m_p m_x
//   m_z' =  Omega m_y
//   m_q' =  delta m_p + sqrt(2) lambda m_z - (kappa/2) m_q
//   m_p' = -delta m_q - (kappa/2) m_p
MeanFieldState gd_meanfield_rhs(const MeanFieldState& state, const ModelParams& params);

// lambda_c = sqrt((delta^2 + (kappa/2)^2) Omega / (2 delta)); requires delta > 0.
double critical_coupling(const ModelParams& params);

enum class Stability { Stable, Unstable };

struct Branch {
    MeanFieldState state;
    Stability stability = Stability::Stable;
    int n_marginal = 0;  // eigenvalues with |Re| below tolerance (the conserved
                         // spin norm always contributes one)
    const char* name = "";
};

// Normal branch (-1,0,0,0,0) always; for lambda > lambda_c additionally the
// two superradiant branches with m_x = -lambda_c^2/lambda^2,
// m_z = +-sqrt(1 - m_x^2). Stability from the Jacobian eigenvalues, ignoring
// marginal directions (|Re| < 1e-10).
std::vector<Branch> stationary_branches(const ModelParams& params);

struct QfiRates {
    double rate_omega = 0;   // kappa S / lambda^2
    double rate_lambda = 0;  // kappa Omega^2 S / lambda^4
};

// Stationary-phase (small Omega/kappa) analytic rates for the Tavis-Cummings
// model, S = N/2.
QfiRates tc_stationary_qfi_rates(const ModelParams& params, int n_spins);

struct FlowPoint {
    double t;
    MeanFieldState state;
};

// Fixed-step RK4; throws on non-finite values.
std::vector<FlowPoint> integrate_meanfield(const MeanFieldState& initial,
                                           const ModelParams& params,
                                           const std::vector<double>& t_grid,
                                           double dt = 1e-3);

// Jacobian of the flow at a point (for stability and bifurcation analysis).
Eigen::Matrix<double, 5, 5> gd_meanfield_jacobian(const MeanFieldState& state,
                                                  const ModelParams& params);

}  // namespace sbm::meanfield
