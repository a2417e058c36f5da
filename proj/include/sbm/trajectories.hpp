// trajectories.hpp — stochastic pure-state trajectories for the counting and
// homodyne unravellings, co-propagating the Fisher derivative vector, plus the
// unconditional (Lindblad) master-equation integrator.

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "sbm/hilbert.hpp"
#include "sbm/linalg.hpp"
#include "sbm/models.hpp"
#include "sbm/rng.hpp"

namespace sbm::traj {

using hilbert::CompositeSpace;
using models::ModelParams;
using models::ParamTarget;

enum class Unravelling { Counting, Homodyne };

// Conditional state |psi> (normalized) together with the derivative vector
// |phi> = |d_eta psi~> / ||psi~|| of SM-style recursions. phi is NOT
// normalized; a and b track Re<psi|phi> and Im<psi|phi>.
struct TrajectoryState {
    Vector psi;
    Vector phi;
    double a = 0.0;
    double b = 0.0;
    double log_likelihood = 0.0;  // accumulated log <psi~|psi~>
    double t = 0.0;
};

struct CountingRecord {
    double dt = 0.0;
    std::vector<std::uint8_t> bits;  // 1 = click
    std::vector<double> jump_times() const;
};

struct HomodyneRecord {
    double dt = 0.0;
    std::vector<double> currents;
};

struct EnsembleConfig {
    int n_traj = 1;
    std::uint64_t master_seed = 0;
    double dt = 1e-3;
    double t_final = 1.0;
    int sample_stride = 1;  // steps between recorded observables
};

// Operators precomputed once per (params, target, dt) and shared read-only by
// all trajectory workers.
struct StepOperators {
    CompositeSpace space;
    ModelParams params;
    ParamTarget target = ParamTarget::Omega;
    Unravelling unravelling = Unravelling::Counting;
    double dt = 0.0;

    // counting
    Matrix k0, dk0;
    linalg::BandedOperator k1;  // sqrt(dt) L

    // homodyne (all first order in dt, kept banded: H couples few diagonals)
    linalg::BandedOperator m0_minus_identity;  // -iH dt - L^dag L dt / 2
    linalg::BandedOperator l_phi;              // L e^{i Phi}
    linalg::BandedOperator dh;

    RealVector jump_rate_diag;   // diagonal of L^dag L
    std::vector<int> leak_rows;  // top two Fock levels, empty if no boson
    double leak_tol = 1e-6;
    double max_click_probability = 0.1;
};

StepOperators make_step_operators(const CompositeSpace& space,
                                  const ModelParams& params, ParamTarget target,
                                  double dt, Unravelling unravelling);

// One photocounting step: Bernoulli click with p1 = dt <psi|L^dag L|psi>,
// apply K1 or K0, renormalize and push |phi> through the same Kraus operator.
// Returns the emitted bit. Throws if p1 exceeds max_click_probability.
int step_counting(TrajectoryState& state, const StepOperators& ops, RngStream& rng);

// One homodyne step: J ~ Normal(<L e^{iPhi} + h.c.>, 1/dt), apply K_J.
// Returns the sampled current.
double step_homodyne(TrajectoryState& state, const StepOperators& ops,
                     RngStream& rng);

struct TrajectoryResult {
    std::vector<double> sample_times;
    std::vector<double> a, b, phi_norm_sq;  // at sample times
    double max_abs_b = 0.0;                 // over every step
    double log_likelihood = 0.0;            // final
    double total_outcome = 0.0;             // clicks, or integral J dt
    double class_entry_time = -1.0;         // first sample inside the target class
    CountingRecord counting_record;         // filled when records are kept
    HomodyneRecord homodyne_record;
};

struct EnsembleOptions {
    int n_threads = 1;
    bool keep_records = false;
    bool accumulate_mean_state = false;
    // optional per-sample diagnostic: worst saturating-class violation of |psi>
    std::function<double(const Vector&)> class_violation;
    double class_entry_tol = 1e-8;
};

struct EnsembleResult {
    std::vector<double> sample_times;
    // one row per trajectory, one column per sample time
    Eigen::ArrayXXd a, b, phi_norm_sq;
    std::vector<double> max_abs_b;
    std::vector<double> log_likelihood;
    std::vector<double> total_outcome;
    std::vector<double> class_entry_time;  // -1 when never entered / not tracked
    // ensemble means of <psi|L^dag L|psi> with standard errors
    std::vector<double> mean_jump_rate, stderr_jump_rate;
    std::vector<Matrix> mean_state;  // ensemble-averaged projector (optional)
    std::vector<CountingRecord> counting_records;
    std::vector<HomodyneRecord> homodyne_records;
};

// Deterministic given (master_seed, traj_index); |phi(0)> = 0.
TrajectoryResult run_trajectory(const Vector& initial, const StepOperators& ops,
                                const EnsembleConfig& config, int traj_index,
                                bool keep_record = true,
                                const std::function<double(const Vector&)>&
                                    class_violation = nullptr,
                                double class_entry_tol = 1e-8);

// Embarrassingly parallel over trajectories; any trajectory error aborts with
// its index. Reduction order is fixed regardless of thread count.
EnsembleResult run_ensemble(const Vector& initial, const StepOperators& ops,
                            const EnsembleConfig& config,
                            const EnsembleOptions& options = {});

// Fixed-step RK4 integration of the quantum master equation; returns the state
// at every grid time (the grid must start at 0 and increase). Trace drift
// beyond 1e-6 aborts the run.
std::vector<Matrix> integrate_master(const Matrix& initial,
                                     const CompositeSpace& space,
                                     const ModelParams& params,
                                     const std::vector<double>& t_grid,
                                     double dt_me = 1e-3);

}  // namespace sbm::traj
