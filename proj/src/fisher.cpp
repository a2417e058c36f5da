#include "sbm/fisher.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "sbm/linalg.hpp"

namespace sbm::fisher {

namespace {

constexpr Complex kImagUnit{0.0, 1.0};

void check_grid(const std::vector<double>& t_grid) {
    if (t_grid.empty()) throw std::invalid_argument("fisher: empty time grid");
    if (t_grid.front() < 0) throw std::invalid_argument("fisher: grid starts before 0");
    for (std::size_t i = 1; i < t_grid.size(); ++i) {
        if (t_grid[i] <= t_grid[i - 1]) {
            throw std::invalid_argument("fisher: time grid must increase");
        }
    }
}

void check_pure(const Vector& initial) {
    if (std::abs(initial.norm() - 1.0) > 1e-10) {
        throw std::invalid_argument("fisher: initial state is not normalized");
    }
}

struct LindbladOps {
    linalg::BandedOperator g;     // -iH - L^dag L / 2
    linalg::BandedOperator jump;  // L
    linalg::BandedOperator dh;    // dH (left empty when not needed)
};

LindbladOps make_lindblad_ops(const CompositeSpace& space, const ModelParams& params,
                              const ParamTarget* target) {
    const Matrix h = models::build_hamiltonian(space, params);
    const Matrix jump = models::build_jump_operator(space, params);
    LindbladOps ops;
    ops.g = linalg::BandedOperator::from_dense(-kImagUnit * h -
                                               0.5 * (jump.adjoint() * jump));
    ops.jump = linalg::BandedOperator::from_dense(jump);
    if (target) {
        ops.dh = linalg::BandedOperator::from_dense(
            models::build_dH(space, params, *target));
    }
    return ops;
}

// dX = G X + X G^dag + L X L^dag, accumulated into dx
void dissipative_flow(const LindbladOps& ops, const Matrix& x, Matrix& dx,
                      Matrix& scratch) {
    ops.g.apply_add(x, dx);
    ops.g.apply_add_right_adjoint(x, dx);
    scratch.setZero();
    ops.jump.apply_add(x, scratch);
    ops.jump.apply_add_right_adjoint(scratch, dx);
}

}  // namespace

std::vector<TwoSidedState> propagate_two_sided(const Vector& initial,
                                               const CompositeSpace& space,
                                               const ModelParams& params,
                                               ParamTarget target,
                                               const std::vector<double>& t_grid,
                                               double dt_me) {
    check_grid(t_grid);
    check_pure(initial);
    const auto ops = make_lindblad_ops(space, params, &target);
    const int dim = space.dim;

    TwoSidedState s;
    s.rho = initial * initial.adjoint();
    s.sigma1 = Matrix::Zero(dim, dim);
    s.sigma2 = Matrix::Zero(dim, dim);
    s.tau = Matrix::Zero(dim, dim);

    Matrix scratch(dim, dim), dh_x(dim, dim);

    auto rhs = [&](const TwoSidedState& x, TwoSidedState& dx) {
        dx.rho.setZero();
        dissipative_flow(ops, x.rho, dx.rho, scratch);

        // sigma1' = -i dH rho + (flow)
        dx.sigma1.setZero();
        dissipative_flow(ops, x.sigma1, dx.sigma1, scratch);
        dh_x.setZero();
        ops.dh.apply_add(x.rho, dh_x);
        dx.sigma1 -= kImagUnit * dh_x;

        // sigma2' = +i rho dH + (flow)
        dx.sigma2.setZero();
        dissipative_flow(ops, x.sigma2, dx.sigma2, scratch);
        dh_x.setZero();
        ops.dh.apply_add_right_adjoint(x.rho, dh_x);  // rho dH (dH Hermitian)
        dx.sigma2 += kImagUnit * dh_x;

        // tau' = -i dH sigma2 + i sigma1 dH + (flow)
        dx.tau.setZero();
        dissipative_flow(ops, x.tau, dx.tau, scratch);
        dh_x.setZero();
        ops.dh.apply_add(x.sigma2, dh_x);
        dx.tau -= kImagUnit * dh_x;
        dh_x.setZero();
        ops.dh.apply_add_right_adjoint(x.sigma1, dh_x);
        dx.tau += kImagUnit * dh_x;
    };

    TwoSidedState k1 = s, k2 = s, k3 = s, k4 = s, stage = s;
    auto axpy = [](TwoSidedState& y, double alpha, const TwoSidedState& x,
                   const TwoSidedState& base) {
        y.rho = base.rho + alpha * x.rho;
        y.sigma1 = base.sigma1 + alpha * x.sigma1;
        y.sigma2 = base.sigma2 + alpha * x.sigma2;
        y.tau = base.tau + alpha * x.tau;
    };
    auto rk4_step = [&](double h_step) {
        rhs(s, k1);
        axpy(stage, 0.5 * h_step, k1, s);
        rhs(stage, k2);
        axpy(stage, 0.5 * h_step, k2, s);
        rhs(stage, k3);
        axpy(stage, h_step, k3, s);
        rhs(stage, k4);
        const double w = h_step / 6.0;
        s.rho += w * (k1.rho + 2.0 * k2.rho + 2.0 * k3.rho + k4.rho);
        s.sigma1 += w * (k1.sigma1 + 2.0 * k2.sigma1 + 2.0 * k3.sigma1 + k4.sigma1);
        s.sigma2 += w * (k1.sigma2 + 2.0 * k2.sigma2 + 2.0 * k3.sigma2 + k4.sigma2);
        s.tau += w * (k1.tau + 2.0 * k2.tau + 2.0 * k3.tau + k4.tau);
    };

    std::vector<TwoSidedState> result;
    result.reserve(t_grid.size());
    double t = 0.0;
    for (double tout : t_grid) {
        const double span = tout - t;
        if (span > 0) {
            const int n_sub =
                std::max(1, static_cast<int>(std::ceil(span / dt_me - 1e-12)));
            const double h_step = span / n_sub;
            for (int i = 0; i < n_sub; ++i) rk4_step(h_step);
            t = tout;
        }
        result.push_back(s);
    }
    return result;
}

FisherSeries qfi_system_environment(const Vector& initial,
                                    const CompositeSpace& space,
                                    const ModelParams& params, ParamTarget target,
                                    const std::vector<double>& t_grid,
                                    double dt_me) {
    const auto states = propagate_two_sided(initial, space, params, target,
                                            t_grid, dt_me);
    FisherSeries series;
    series.t = t_grid;
    series.f_se.reserve(states.size());
    for (const auto& s : states) {
        const Complex value =
            4.0 * (s.tau.trace() - s.sigma1.trace() * s.sigma2.trace());
        series.f_se.push_back(value.real());
    }
    return series;
}

FisherSeries qfi_fd_oracle(const Vector& initial, const CompositeSpace& space,
                           const ModelParams& params, ParamTarget target,
                           const std::vector<double>& t_grid, double h,
                           double dt_me) {
    if (h <= 0) throw std::invalid_argument("qfi_fd_oracle: h must be positive");
    check_grid(t_grid);
    check_pure(initial);

    auto shifted = [&](double sign) {
        ModelParams p = params;
        if (target == ParamTarget::Omega) {
            p.omega += sign * h;
        } else {
            p.lambda += sign * h;
        }
        return p;
    };

    // evolve rho_{eta1,eta2} for one (eta1, eta2) pair: d rho = G1 rho +
    // rho G2^dag + L rho L^dag; the trace is complex off the diagonal
    auto evolve_traces = [&](double s1, double s2) {
        const auto left = make_lindblad_ops(space, shifted(s1), nullptr);
        const auto right = make_lindblad_ops(space, shifted(s2), nullptr);
        const int dim = space.dim;
        Matrix rho = initial * initial.adjoint();
        Matrix k1(dim, dim), k2(dim, dim), k3(dim, dim), k4(dim, dim);
        Matrix stage(dim, dim), scratch(dim, dim);
        auto rhs = [&](const Matrix& x, Matrix& dx) {
            dx.setZero();
            left.g.apply_add(x, dx);
            right.g.apply_add_right_adjoint(x, dx);
            scratch.setZero();
            left.jump.apply_add(x, scratch);
            left.jump.apply_add_right_adjoint(scratch, dx);
        };
        auto rk4_step = [&](double h_step) {
            rhs(rho, k1);
            stage = rho + 0.5 * h_step * k1;
            rhs(stage, k2);
            stage = rho + 0.5 * h_step * k2;
            rhs(stage, k3);
            stage = rho + h_step * k3;
            rhs(stage, k4);
            rho += (h_step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        };
        std::vector<Complex> traces;
        traces.reserve(t_grid.size());
        double t = 0.0;
        for (double tout : t_grid) {
            const double span = tout - t;
            if (span > 0) {
                const int n_sub =
                    std::max(1, static_cast<int>(std::ceil(span / dt_me - 1e-12)));
                const double h_step = span / n_sub;
                for (int i = 0; i < n_sub; ++i) rk4_step(h_step);
                t = tout;
            }
            traces.push_back(rho.trace());
        }
        return traces;
    };

    const auto tr_pp = evolve_traces(+1, +1);
    const auto tr_pm = evolve_traces(+1, -1);
    const auto tr_mp = evolve_traces(-1, +1);
    const auto tr_mm = evolve_traces(-1, -1);

    FisherSeries series;
    series.t = t_grid;
    series.f_se.reserve(t_grid.size());
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        const Complex mixed = std::log(tr_pp[i]) - std::log(tr_pm[i]) -
                              std::log(tr_mp[i]) + std::log(tr_mm[i]);
        series.f_se.push_back(mixed.real() / (h * h));
    }

    // catastrophic cancellation: the stencil moved the traces by less than
    // double precision can resolve (h too small), as opposed to an exactly
    // eta-independent evolution where all four runs coincide bit for bit
    const std::size_t last = t_grid.size() - 1;
    const double spread =
        std::max({std::abs(tr_pp[last] - tr_pm[last]), std::abs(tr_pp[last] - tr_mp[last]),
                  std::abs(tr_pp[last] - tr_mm[last])});
    if (spread > 0.0 && spread < 1e-12) {
        throw std::runtime_error("qfi_fd_oracle: parameter step h too small, "
                                 "trace differences below 1e-12");
    }
    return series;
}

FisherSeries trajectory_fisher(const traj::EnsembleResult& ensemble) {
    const auto n_traj = ensemble.a.rows();
    const auto n_samples = ensemble.a.cols();
    if (n_traj < 1) throw std::invalid_argument("trajectory_fisher: empty ensemble");

    FisherSeries series;
    series.t = ensemble.sample_times;
    series.f_total.resize(n_samples);
    series.i_e.resize(n_samples);
    series.f_s.resize(n_samples);
    series.stderr_total.resize(n_samples);

    const double n = static_cast<double>(n_traj);
    for (Eigen::Index s = 0; s < n_samples; ++s) {
        const auto a2 = ensemble.a.col(s).square();
        const auto b2 = ensemble.b.col(s).square();
        const Eigen::ArrayXd x = ensemble.phi_norm_sq.col(s) - b2;
        const double mean_a2 = a2.mean();
        const double mean_x = x.mean();
        series.i_e[s] = 4.0 * mean_a2;
        series.f_total[s] = 4.0 * mean_x;
        series.f_s[s] = 4.0 * (mean_x - mean_a2);
        const double var = n > 1 ? (x - mean_x).square().sum() / (n - 1.0) : 0.0;
        series.stderr_total[s] = 4.0 * std::sqrt(var / n);
    }
    return series;
}

EnumerationResult enumerate_counting_records(const Vector& initial,
                                             const CompositeSpace& space,
                                             const ModelParams& params,
                                             ParamTarget target, int n_steps,
                                             double dt) {
    if (n_steps < 0 || n_steps > 12) {
        throw std::invalid_argument(
            "enumerate_counting_records: need 0 <= M <= 12 steps");
    }
    if (space.n_spins > 2 || space.fock_cutoff > 3) {
        throw std::invalid_argument(
            "enumerate_counting_records: space too large (N <= 2, n_max <= 3)");
    }
    check_pure(initial);

    const auto kraus = models::kraus_counting(space, params, dt);
    const Matrix dk0 =
        models::build_dK(space, params, target, models::KrausKind::K0, dt);
    const Matrix k1 = kraus.k1;  // dK1 = 0

    EnumerationResult result;
    const std::size_t n_records = std::size_t{1} << n_steps;
    result.record_probability.resize(n_records);
    result.record_a.resize(n_records);
    result.record_b.resize(n_records);

    // depth-first over the record tree; prefixes share propagation work
    struct Frame {
        Vector psi, phi;
    };
    std::vector<Frame> stack(n_steps + 1);
    stack[0].psi = initial;
    stack[0].phi = Vector::Zero(space.dim);

    std::size_t record = 0;
    auto leaf = [&](const Frame& f) {
        const double n2 = f.psi.squaredNorm();
        const Complex overlap = f.psi.dot(f.phi);
        const double phi2 = f.phi.squaredNorm();
        result.total_probability += n2;
        if (n2 > 0) {
            result.i_e += 4.0 * overlap.real() * overlap.real() / n2;
            result.f_s += 4.0 * (phi2 - std::norm(overlap) / n2);
            result.record_a[record] = overlap.real() / n2;
            result.record_b[record] = overlap.imag() / n2;
        }
        result.record_probability[record] = n2;
        ++record;
    };

    // recursion over outcomes; bit j of the record index is step j+1
    auto descend = [&](auto&& self, int depth) -> void {
        if (depth == n_steps) {
            leaf(stack[depth]);
            return;
        }
        const Frame& cur = stack[depth];
        // outcome 0
        stack[depth + 1].psi = kraus.k0 * cur.psi;
        stack[depth + 1].phi = kraus.k0 * cur.phi + dk0 * cur.psi;
        self(self, depth + 1);
        // outcome 1
        stack[depth + 1].psi = k1 * cur.psi;
        stack[depth + 1].phi = k1 * cur.phi;
        self(self, depth + 1);
    };
    descend(descend, 0);

    result.f_total = result.i_e + result.f_s;

    // records were visited with step-1 outcome as the slowest bit; re-index to
    // bit j = step j+1 (binary order) for the per-record arrays
    if (n_steps > 0) {
        std::vector<double> prob(n_records), ra(n_records), rb(n_records);
        for (std::size_t visit = 0; visit < n_records; ++visit) {
            std::size_t idx = 0;
            for (int j = 0; j < n_steps; ++j) {
                if (visit & (std::size_t{1} << (n_steps - 1 - j))) {
                    idx |= std::size_t{1} << j;
                }
            }
            prob[idx] = result.record_probability[visit];
            ra[idx] = result.record_a[visit];
            rb[idx] = result.record_b[visit];
        }
        result.record_probability = std::move(prob);
        result.record_a = std::move(ra);
        result.record_b = std::move(rb);
    }
    return result;
}

std::vector<double> check_condition_I(const Matrix& initial,
                                      const CompositeSpace& space,
                                      const ModelParams& params,
                                      ParamTarget target,
                                      const std::vector<double>& t_grid,
                                      double dt_me) {
    const Matrix dh = models::build_dH(space, params, target);
    const auto states = traj::integrate_master(initial, space, params, t_grid, dt_me);
    std::vector<double> values;
    values.reserve(states.size());
    for (const auto& rho : states) {
        values.push_back(std::abs((dh * rho).trace()));
    }
    return values;
}

ConditionIIStats check_condition_II(const traj::EnsembleResult& ensemble) {
    ConditionIIStats stats;
    stats.per_trajectory_max = ensemble.max_abs_b;
    for (double v : stats.per_trajectory_max) {
        stats.ensemble_max = std::max(stats.ensemble_max, v);
    }
    return stats;
}

namespace {

// accumulate the violation of one coefficient product against its axis
void product_violation(Complex ci, Complex cj, bool want_imaginary, double floor,
                       double& worst) {
    if (std::abs(ci) <= floor || std::abs(cj) <= floor) return;
    const Complex p = std::conj(ci) * cj;
    const double mag = std::abs(p);
    const double off = want_imaginary ? std::abs(p.real()) : std::abs(p.imag());
    worst = std::max(worst, off / mag);
}

}  // namespace

ClassReport check_saturating_class(const Vector& psi, const CompositeSpace& space,
                                   models::Model model, double tol,
                                   double amplitude_floor) {
    if (psi.size() != space.dim) {
        throw std::invalid_argument("check_saturating_class: dimension mismatch");
    }
    const int nf = space.fock_levels();
    ClassReport report;
    for (int row = 0; row < space.spin_levels(); ++row) {
        for (int n = 0; n < nf; ++n) {
            const int i = row * nf + n;
            // spin pair (M_z, n) -> (M_z + 1, n): row - 1
            if (row > 0) {
                product_violation(psi(i), psi(i - nf), true, amplitude_floor,
                                  report.max_violation_first);
            }
            // boson pair (M_z, n) -> (M_z, n + 1)
            if (n + 1 < nf && model != models::Model::BoundaryTimeCrystal) {
                const bool want_imag = model == models::Model::GeneralizedDicke;
                product_violation(psi(i), psi(i + 1), want_imag, amplitude_floor,
                                  report.max_violation_second);
            }
        }
    }
    report.is_member = report.max_violation_first < tol &&
                       report.max_violation_second < tol;
    return report;
}

double class_violation(const Vector& psi, const CompositeSpace& space,
                       models::Model model, double amplitude_floor) {
    const auto report =
        check_saturating_class(psi, space, model, 1e-8, amplitude_floor);
    return std::max(report.max_violation_first, report.max_violation_second);
}

Vector sample_class_member(const CompositeSpace& space, models::Model model,
                           RngStream& rng) {
    const int nf = space.fock_levels();
    Vector psi(space.dim);
    const Complex global = std::exp(kImagUnit * (2.0 * M_PI * rng.uniform()));
    for (int row = 0; row < space.spin_levels(); ++row) {
        for (int n = 0; n < nf; ++n) {
            // magnitudes bounded away from zero so every adjacent pair counts
            double s = 0.25 + 0.75 * rng.uniform();
            if (rng.uniform() < 0.5) s = -s;
            int power = row;
            if (model == models::Model::GeneralizedDicke) power += n;
            Complex phase{1.0, 0.0};
            switch (power % 4) {
                case 0: phase = {1.0, 0.0}; break;
                case 1: phase = {0.0, 1.0}; break;
                case 2: phase = {-1.0, 0.0}; break;
                case 3: phase = {0.0, -1.0}; break;
            }
            psi(row * nf + n) = s * phase * global;
        }
    }
    psi.normalize();
    return psi;
}

ClosureReport class_closure_test(const CompositeSpace& space,
                                 const ModelParams& params,
                                 traj::Unravelling unravelling, int n_random,
                                 std::uint64_t seed, double dt, double tol) {
    if (n_random < 1) {
        throw std::invalid_argument("class_closure_test: n_random must be positive");
    }
    const auto kraus = models::kraus_counting(space, params, dt);
    RngStream rng(seed, 0);
    ClosureReport report;

    auto probe = [&](const Matrix& op, const Vector& psi, double& worst) {
        Vector mapped = op * psi;
        const double norm = mapped.norm();
        if (norm < 1e-14) return;  // operator annihilated the state
        mapped /= norm;
        worst = std::max(worst, class_violation(mapped, space, params.model));
    };

    for (int trial = 0; trial < n_random; ++trial) {
        const Vector psi = sample_class_member(space, params.model, rng);
        probe(kraus.k0, psi, report.worst_violation_k0);
        probe(kraus.k1, psi, report.worst_violation_k1);
        if (unravelling == traj::Unravelling::Homodyne) {
            const double current = rng.normal() / std::sqrt(dt);
            probe(models::kraus_homodyne(space, params, current, dt), psi,
                  report.worst_violation_kj);
        }
    }
    double worst = std::max(report.worst_violation_k0, report.worst_violation_k1);
    if (unravelling == traj::Unravelling::Homodyne) {
        worst = std::max(worst, report.worst_violation_kj);
    }
    report.pass = worst < tol;
    return report;
}

}  // namespace sbm::fisher
