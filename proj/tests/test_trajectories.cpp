#include <doctest.h>

#include <cmath>
#include <numeric>

#include "sbm/fisher.hpp"
#include "sbm/linalg.hpp"
#include "sbm/trajectories.hpp"

using namespace sbm;
using namespace sbm::traj;
using hilbert::dicke_number_state;
using hilbert::make_space;
using models::Model;
using models::ModelParams;
using models::ParamTarget;

namespace {

ModelParams tc_params(double omega = 2.0, double lambda = 0.5) {
    ModelParams p;
    p.model = Model::TavisCummings;
    p.omega = omega;
    p.lambda = lambda;
    p.kappa = 1.0;
    return p;
}

Matrix projector(const Vector& psi) { return psi * psi.adjoint(); }

}  // namespace

TEST_CASE("frozen dynamics: Omega = lambda = 0 from |S,S>|0>") {
    // state constant; sensing Omega still picks up conditional-state
    // information (dH = S_x), but the overlap <psi|phi> stays zero
    const auto space = make_space(2, 2);
    const auto ops = make_step_operators(space, tc_params(0.0, 0.0),
                                         ParamTarget::Omega, 1e-3,
                                         Unravelling::Counting);
    EnsembleConfig config;
    config.dt = 1e-3;
    config.t_final = 0.5;
    config.sample_stride = 100;
    const auto result = run_trajectory(dicke_number_state(space, 1.0, 0), ops,
                                       config, 0);
    for (std::size_t s = 0; s < result.sample_times.size(); ++s) {
        CHECK(result.a[s] == 0.0);
        CHECK(result.b[s] == 0.0);
    }
    // p1 = 0 throughout: the record contains no clicks
    CHECK(result.total_outcome == 0.0);
}

TEST_CASE("eta-independent dynamics keeps phi at zero") {
    // |S,-S>|0> is dark for the TC coupling at Omega = 0, so for target
    // lambda both dK0 psi and K1 psi vanish and phi never grows
    const auto space = make_space(2, 2);
    const auto ops = make_step_operators(space, tc_params(0.0, 0.8),
                                         ParamTarget::Lambda, 1e-3,
                                         Unravelling::Counting);
    EnsembleConfig config;
    config.dt = 1e-3;
    config.t_final = 0.5;
    config.sample_stride = 100;
    const auto result = run_trajectory(dicke_number_state(space, -1.0, 0), ops,
                                       config, 0);
    for (std::size_t s = 0; s < result.sample_times.size(); ++s) {
        CHECK(result.phi_norm_sq[s] < 1e-25);
        CHECK(result.a[s] == 0.0);
        CHECK(result.b[s] == 0.0);
    }
}

TEST_CASE("click probability equals dt <L^dag L>") {
    const auto space = make_space(2, 2);
    const auto ops = make_step_operators(space, tc_params(), ParamTarget::Omega,
                                         1e-3, Unravelling::Counting);
    const Vector one_boson = dicke_number_state(space, 1.0, 1);
    const double p1 = 1e-3 * ops.jump_rate_diag.dot(one_boson.cwiseAbs2());
    CHECK(p1 == doctest::Approx(1e-3).epsilon(1e-12));
}

TEST_CASE("phi recursion base case: one no-click step from phi = 0") {
    const auto space = make_space(2, 3);
    const auto params = tc_params();
    const double dt = 1e-3;
    const auto ops = make_step_operators(space, params, ParamTarget::Omega, dt,
                                         Unravelling::Counting);
    TrajectoryState state;
    state.psi = dicke_number_state(space, 1.0, 0);  // vacuum boson: p1 = 0
    state.phi = Vector::Zero(space.dim);
    RngStream rng(7, 0);
    const int bit = step_counting(state, ops, rng);
    CHECK(bit == 0);

    const Vector k0psi = ops.k0 * dicke_number_state(space, 1.0, 0);
    const Vector expected = (ops.dk0 * dicke_number_state(space, 1.0, 0)) / k0psi.norm();
    CHECK((state.phi - expected).norm() < 1e-14);
    CHECK(std::abs(state.psi.norm() - 1.0) < 1e-12);
    // A + iB matches <psi|phi> by construction
    const Complex overlap = state.psi.dot(state.phi);
    CHECK(state.a == doctest::Approx(overlap.real()).epsilon(1e-14));
    CHECK(state.b == doctest::Approx(overlap.imag()).epsilon(1e-14));
}

TEST_CASE("seed reproducibility and stream independence") {
    const auto space = make_space(2, 12);
    const auto ops = make_step_operators(space, tc_params(), ParamTarget::Omega,
                                         1e-3, Unravelling::Counting);
    // start with three photons so every stream sees clicks
    const Vector initial = dicke_number_state(space, 1.0, 3);
    EnsembleConfig config;
    config.dt = 1e-3;
    config.t_final = 2.0;
    config.sample_stride = 200;

    const auto first = run_trajectory(initial, ops, config, 3);
    const auto second = run_trajectory(initial, ops, config, 3);
    REQUIRE(first.counting_record.bits.size() == second.counting_record.bits.size());
    CHECK(first.counting_record.bits == second.counting_record.bits);
    CHECK(first.log_likelihood == second.log_likelihood);

    const auto other = run_trajectory(initial, ops, config, 4);
    CHECK(first.counting_record.bits != other.counting_record.bits);
}

TEST_CASE("n_traj = 1 ensemble reduces to run_trajectory") {
    const auto space = make_space(2, 8);
    const auto ops = make_step_operators(space, tc_params(), ParamTarget::Omega,
                                         1e-3, Unravelling::Counting);
    const Vector initial = dicke_number_state(space, 1.0, 0);
    EnsembleConfig config;
    config.n_traj = 1;
    config.dt = 1e-3;
    config.t_final = 1.0;
    config.sample_stride = 100;

    EnsembleOptions options;
    options.keep_records = true;
    const auto ensemble = run_ensemble(initial, ops, config, options);
    const auto single = run_trajectory(initial, ops, config, 0);

    CHECK(ensemble.counting_records[0].bits == single.counting_record.bits);
    for (std::size_t s = 0; s < single.sample_times.size(); ++s) {
        CHECK(ensemble.a(0, s) == single.a[s]);
        CHECK(ensemble.b(0, s) == single.b[s]);
        CHECK(ensemble.phi_norm_sq(0, s) == single.phi_norm_sq[s]);
    }
    CHECK(ensemble.log_likelihood[0] == single.log_likelihood);
}

TEST_CASE("batched kernel agrees with the single-step functions") {
    const auto space = make_space(2, 8);
    const auto params = tc_params();
    const double dt = 1e-3;
    const Vector initial = dicke_number_state(space, 1.0, 0);

    for (auto unravelling : {Unravelling::Counting, Unravelling::Homodyne}) {
        const auto ops = make_step_operators(space, params, ParamTarget::Omega,
                                             dt, unravelling);
        EnsembleConfig config;
        config.dt = dt;
        config.t_final = 0.3;
        config.sample_stride = 300;  // sample only the end
        const auto kernel = run_trajectory(initial, ops, config, 5);

        TrajectoryState state;
        state.psi = initial;
        state.phi = Vector::Zero(space.dim);
        RngStream rng(0, 5);
        for (int j = 0; j < 300; ++j) {
            if (unravelling == Unravelling::Counting) {
                step_counting(state, ops, rng);
            } else {
                step_homodyne(state, ops, rng);
            }
        }
        CHECK(state.a == doctest::Approx(kernel.a.back()).epsilon(1e-10));
        CHECK(state.b == doctest::Approx(kernel.b.back()).epsilon(1e-10));
        CHECK(state.phi.squaredNorm() ==
              doctest::Approx(kernel.phi_norm_sq.back()).epsilon(1e-9));
        CHECK(state.log_likelihood ==
              doctest::Approx(kernel.log_likelihood).epsilon(1e-9));
    }
}

TEST_CASE("saturating initial state keeps Im<psi|phi> at zero") {
    const auto space = make_space(3, 10);
    const Vector initial = dicke_number_state(space, 1.5, 0);
    EnsembleConfig config;
    config.dt = 1e-3;
    config.t_final = 1.0;
    config.sample_stride = 100;

    SUBCASE("counting") {
        const auto ops = make_step_operators(space, tc_params(), ParamTarget::Omega,
                                             config.dt, Unravelling::Counting);
        const auto result = run_trajectory(initial, ops, config, 1);
        CHECK(result.max_abs_b < 1e-8);
    }
    SUBCASE("homodyne at Phi = 0") {
        const auto ops = make_step_operators(space, tc_params(), ParamTarget::Omega,
                                             config.dt, Unravelling::Homodyne);
        const auto result = run_trajectory(initial, ops, config, 1);
        CHECK(result.max_abs_b < 1e-8);
    }
}

TEST_CASE("homodyne current statistics: std of J over 1e5 draws") {
    // vacuum, frozen dynamics: J ~ N(0, 1/dt)
    const auto space = make_space(1, 1);
    auto params = tc_params(0.0, 0.0);
    const double dt = 1e-3;
    const auto ops = make_step_operators(space, params, ParamTarget::Omega, dt,
                                         Unravelling::Homodyne);
    EnsembleConfig config;
    config.dt = dt;
    config.t_final = 100.0;  // 1e5 steps
    config.sample_stride = 100000;
    const auto result = run_trajectory(dicke_number_state(space, 0.5, 0), ops,
                                       config, 0, true);
    const auto& currents = result.homodyne_record.currents;
    REQUIRE(currents.size() == 100000);
    double sum = 0, sum2 = 0;
    for (double j : currents) {
        sum += j;
        sum2 += j * j;
    }
    const double mean = sum / currents.size();
    const double std = std::sqrt(sum2 / currents.size() - mean * mean);
    CHECK(std == doctest::Approx(std::sqrt(1000.0)).epsilon(0.01));
}

TEST_CASE("log-likelihood equals the unnormalized propagation") {
    const auto space = make_space(2, 8);
    const auto params = tc_params();
    const double dt = 1e-3;
    const int n_steps = 300;
    const auto ops = make_step_operators(space, params, ParamTarget::Omega, dt,
                                         Unravelling::Counting);
    EnsembleConfig config;
    config.dt = dt;
    config.t_final = n_steps * dt;
    config.sample_stride = n_steps;
    const Vector initial = dicke_number_state(space, 1.0, 2);
    const auto result = run_trajectory(initial, ops, config, 2);

    const auto kraus = models::kraus_counting(space, params, dt);
    Vector unnormalized = initial;
    for (int j = 0; j < n_steps; ++j) {
        unnormalized = result.counting_record.bits[j] ? (kraus.k1 * unnormalized).eval()
                                                      : (kraus.k0 * unnormalized).eval();
    }
    CHECK(result.log_likelihood ==
          doctest::Approx(std::log(unnormalized.squaredNorm())).epsilon(1e-8));
}

TEST_CASE("master equation: analytic photon decay") {
    const auto space = make_space(1, 3);
    auto params = tc_params(0.0, 0.0);
    const Matrix rho0 = projector(dicke_number_state(space, -0.5, 1));
    const std::vector<double> grid{0.0, 0.5, 1.0, 2.0};
    const auto states = integrate_master(rho0, space, params, grid);
    const auto boson = hilbert::build_boson_operators(space);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double occupancy = (boson.number * states[i]).trace().real();
        CHECK(occupancy == doctest::Approx(std::exp(-grid[i])).epsilon(1e-8));
    }
}

TEST_CASE("master equation: diagonal spin states are stationary at Omega = lambda = 0") {
    const auto space = make_space(2, 1);
    auto params = tc_params(0.0, 0.0);
    params.delta_spin = 0.7;
    Matrix rho0 = Matrix::Zero(space.dim, space.dim);
    rho0(space.index(1.0, 0), space.index(1.0, 0)) = 0.25;
    rho0(space.index(0.0, 0), space.index(0.0, 0)) = 0.75;
    const auto states = integrate_master(rho0, space, params, {0.0, 1.0, 3.0});
    CHECK((states.back() - rho0).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("master equation input validation") {
    const auto space = make_space(1, 1);
    const auto params = tc_params();
    Matrix rho = Matrix::Zero(space.dim, space.dim);
    rho(0, 0) = 1.0;
    CHECK_THROWS(integrate_master(rho, space, params, {}));
    CHECK_THROWS(integrate_master(rho, space, params, {1.0, 0.5}));
    Matrix bad_trace = rho * 0.5;
    CHECK_THROWS(integrate_master(bad_trace, space, params, {0.0, 1.0}));
    Matrix not_hermitian = rho;
    not_hermitian(0, 1) = Complex(0.3, 0.1);
    CHECK_THROWS(integrate_master(not_hermitian, space, params, {0.0, 1.0}));
}

TEST_CASE("ensemble mean projector converges to the master equation") {
    const auto space = make_space(3, 13);
    const auto params = tc_params();
    const Vector initial = dicke_number_state(space, 1.5, 0);
    const double t_final = 5.0;

    EnsembleConfig config;
    config.dt = 2e-3;
    config.t_final = t_final;
    config.sample_stride = 2500;
    config.master_seed = 11;

    const auto rho_final =
        integrate_master(projector(initial), space, params, {t_final}).front();

    EnsembleOptions options;
    options.accumulate_mean_state = true;

    auto distance_at = [&](int n_traj, Unravelling unravelling) {
        config.n_traj = n_traj;
        const auto ops = make_step_operators(space, params, ParamTarget::Omega,
                                             config.dt, unravelling);
        const auto ensemble = run_ensemble(initial, ops, config, options);
        return linalg::trace_distance(ensemble.mean_state.back(), rho_final);
    };

    // counting at 2000 trajectories: the spec-level bound
    const double td2000 = distance_at(2000, Unravelling::Counting);
    CHECK(td2000 < 0.05);

    // 1/sqrt(n) improvement probed with a 16x trajectory ratio
    const double td125 = distance_at(125, Unravelling::Counting);
    CHECK(td125 / td2000 > 2.0);

    // homodyne unravels the same master equation
    const double td_hom = distance_at(2000, Unravelling::Homodyne);
    CHECK(td_hom < 0.05);
}

TEST_CASE("click statistics match kappa * integral of <a^dag a>") {
    const auto space = make_space(2, 12);
    const auto params = tc_params();
    const Vector initial = dicke_number_state(space, 1.0, 0);
    const double t_final = 3.0;

    EnsembleConfig config;
    config.n_traj = 1000;
    config.dt = 2e-3;
    config.t_final = t_final;
    config.sample_stride = 25;
    config.master_seed = 5;

    const auto ops = make_step_operators(space, params, ParamTarget::Omega,
                                         config.dt, Unravelling::Counting);
    const auto ensemble = run_ensemble(initial, ops, config, {});

    // master-equation side: kappa int <n> dt via trapezoid on a fine grid
    std::vector<double> grid;
    for (int i = 0; i <= 300; ++i) grid.push_back(i * 0.01);
    grid.erase(grid.begin());
    const auto states = integrate_master(projector(initial), space, params, grid);
    const auto boson = hilbert::build_boson_operators(space);
    double integral = 0.0;
    double prev_t = 0.0, prev_val = 0.0;  // <n>(0) = 0
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double val = (boson.number * states[i]).trace().real();
        integral += 0.5 * (val + prev_val) * (grid[i] - prev_t);
        prev_t = grid[i];
        prev_val = val;
    }
    const double expected = params.kappa * integral;

    double mean = 0, var = 0;
    for (double clicks : ensemble.total_outcome) mean += clicks;
    mean /= ensemble.total_outcome.size();
    for (double clicks : ensemble.total_outcome) {
        var += (clicks - mean) * (clicks - mean);
    }
    var /= (ensemble.total_outcome.size() - 1.0);
    const double stderr_mean = std::sqrt(var / ensemble.total_outcome.size());
    CHECK(std::abs(mean - expected) < 3.0 * stderr_mean + 0.02 * expected);
}

TEST_CASE("homodyne mean current matches the monitored quadrature") {
    const auto space = make_space(2, 12);
    auto params = tc_params();
    params.phi_lo = 0.0;
    const Vector initial = dicke_number_state(space, 1.0, 0);
    const double t_final = 3.0;

    EnsembleConfig config;
    config.n_traj = 1000;
    config.dt = 2e-3;
    config.t_final = t_final;
    config.sample_stride = 100;
    config.master_seed = 6;

    const auto ops = make_step_operators(space, params, ParamTarget::Omega,
                                         config.dt, Unravelling::Homodyne);
    const auto ensemble = run_ensemble(initial, ops, config, {});

    std::vector<double> grid;
    for (int i = 1; i <= 300; ++i) grid.push_back(i * 0.01);
    const auto states = integrate_master(projector(initial), space, params, grid);
    const Matrix jump = models::build_jump_operator(space, params);
    const Matrix quad = jump + jump.adjoint().eval();
    double integral = 0.0;
    double prev_t = 0.0, prev_val = (quad * projector(initial)).trace().real();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double val = (quad * states[i]).trace().real();
        integral += 0.5 * (val + prev_val) * (grid[i] - prev_t);
        prev_t = grid[i];
        prev_val = val;
    }

    double mean = 0, var = 0;
    for (double v : ensemble.total_outcome) mean += v;
    mean /= ensemble.total_outcome.size();
    for (double v : ensemble.total_outcome) var += (v - mean) * (v - mean);
    var /= (ensemble.total_outcome.size() - 1.0);
    const double stderr_mean = std::sqrt(var / ensemble.total_outcome.size());
    CHECK(std::abs(mean - integral) < 3.0 * stderr_mean);
}

TEST_CASE("counting and homodyne agree on unconditional observables") {
    const auto space = make_space(2, 12);
    const auto params = tc_params();
    const Vector initial = dicke_number_state(space, 1.0, 0);

    EnsembleConfig config;
    config.n_traj = 800;
    config.dt = 2e-3;
    config.t_final = 2.0;
    config.sample_stride = 500;
    config.master_seed = 9;

    const auto counting_ops = make_step_operators(space, params, ParamTarget::Omega,
                                                  config.dt, Unravelling::Counting);
    const auto homodyne_ops = make_step_operators(space, params, ParamTarget::Omega,
                                                  config.dt, Unravelling::Homodyne);
    const auto counting = run_ensemble(initial, counting_ops, config, {});
    const auto homodyne = run_ensemble(initial, homodyne_ops, config, {});

    for (std::size_t s = 0; s < counting.sample_times.size(); ++s) {
        const double gap =
            std::abs(counting.mean_jump_rate[s] - homodyne.mean_jump_rate[s]);
        const double combined = std::hypot(counting.stderr_jump_rate[s],
                                           homodyne.stderr_jump_rate[s]);
        CHECK(gap < 3.5 * combined + 1e-12);
    }
}

TEST_CASE("guards: oversized dt and Fock leakage") {
    SUBCASE("p1 > 0.1 is a hard error") {
        const auto space = make_space(1, 3);
        const auto ops = make_step_operators(space, tc_params(), ParamTarget::Omega,
                                             0.2, Unravelling::Counting);
        EnsembleConfig config;
        config.dt = 0.2;
        config.t_final = 1.0;
        const Vector initial = dicke_number_state(space, 0.5, 2);  // <L^dag L> = 2
        CHECK_THROWS_WITH_AS(run_trajectory(initial, ops, config, 0),
                             doctest::Contains("reduce dt"), std::runtime_error);
    }
    SUBCASE("population on the top Fock levels aborts") {
        const auto space = make_space(1, 3);
        const auto ops = make_step_operators(space, tc_params(), ParamTarget::Omega,
                                             1e-3, Unravelling::Counting);
        EnsembleConfig config;
        config.dt = 1e-3;
        config.t_final = 1.0;
        const Vector initial = dicke_number_state(space, 0.5, 3);
        CHECK_THROWS_WITH_AS(run_trajectory(initial, ops, config, 0),
                             doctest::Contains("n_max"), std::runtime_error);
    }
    SUBCASE("unnormalized initial state is rejected") {
        const auto space = make_space(1, 2);
        const auto ops = make_step_operators(space, tc_params(), ParamTarget::Omega,
                                             1e-3, Unravelling::Counting);
        EnsembleConfig config;
        CHECK_THROWS(run_ensemble(2.0 * dicke_number_state(space, 0.5, 0), ops,
                                  config, {}));
    }
}
