#include "sbm/trajectories.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>

namespace sbm::traj {

namespace {

constexpr Complex kImagUnit{0.0, 1.0};

// Trajectories are advanced in blocks of columns so the no-click propagation
// runs as one dense matrix-matrix product instead of per-trajectory matvecs.
constexpr int kBatchColumns = 64;

int step_count(const EnsembleConfig& config) {
    if (config.dt <= 0) throw std::invalid_argument("trajectories: dt must be positive");
    if (config.t_final <= 0) {
        throw std::invalid_argument("trajectories: t_final must be positive");
    }
    const int n = static_cast<int>(std::llround(config.t_final / config.dt));
    if (n < 1) throw std::invalid_argument("trajectories: t_final shorter than one step");
    return n;
}

std::vector<int> sample_steps(int n_steps, int stride) {
    if (stride < 1) throw std::invalid_argument("trajectories: sample_stride must be >= 1");
    std::vector<int> steps;
    for (int j = 0; j <= n_steps; j += stride) steps.push_back(j);
    if (steps.back() != n_steps) steps.push_back(n_steps);
    return steps;
}

double jump_rate(const RealVector& diag, const Vector& psi) {
    return diag.dot(psi.cwiseAbs2());
}

[[noreturn]] void throw_dt_too_large(double p1, int traj_index) {
    throw std::runtime_error(
        "step_counting: click probability " + std::to_string(p1) +
        " exceeds 0.1 on trajectory " + std::to_string(traj_index) +
        "; the discretization is invalid, reduce dt");
}

[[noreturn]] void throw_leakage(double population, int traj_index) {
    throw std::runtime_error(
        "trajectories: top Fock levels hold population " + std::to_string(population) +
        " (> 1e-6) on trajectory " + std::to_string(traj_index) +
        "; increase the Fock cutoff n_max");
}

}  // namespace

std::vector<double> CountingRecord::jump_times() const {
    std::vector<double> times;
    for (std::size_t j = 0; j < bits.size(); ++j) {
        if (bits[j]) times.push_back(static_cast<double>(j + 1) * dt);
    }
    return times;
}

StepOperators make_step_operators(const CompositeSpace& space,
                                  const ModelParams& params, ParamTarget target,
                                  double dt, Unravelling unravelling) {
    if (dt <= 0) throw std::invalid_argument("make_step_operators: dt must be positive");
    StepOperators ops;
    ops.space = space;
    ops.params = params;
    ops.target = target;
    ops.unravelling = unravelling;
    ops.dt = dt;

    const Matrix h = models::build_hamiltonian(space, params);
    const Matrix jump = models::build_jump_operator(space, params);
    const Matrix dh = models::build_dH(space, params, target);
    const Matrix ldagl = jump.adjoint() * jump;

    // all three models have a diagonal L^dag L; the steppers rely on it
    Matrix offdiag = ldagl;
    offdiag.diagonal().setZero();
    if (offdiag.cwiseAbs().maxCoeff() > 1e-12) {
        throw std::logic_error("make_step_operators: L^dag L is not diagonal");
    }
    ops.jump_rate_diag = ldagl.diagonal().real();

    if (unravelling == Unravelling::Counting) {
        const auto kraus = models::kraus_counting(space, params, dt);
        ops.k0 = kraus.k0;
        ops.dk0 = models::build_dK(space, params, target, models::KrausKind::K0, dt);
    } else {
        const Matrix m0_minus_identity =
            -kImagUnit * dt * h - 0.5 * dt * ldagl;
        ops.m0_minus_identity = linalg::BandedOperator::from_dense(m0_minus_identity);
        ops.l_phi = linalg::BandedOperator::from_dense(
            std::exp(kImagUnit * params.phi_lo) * jump);
        ops.dh = linalg::BandedOperator::from_dense(dh);
    }
    ops.k1 = linalg::BandedOperator::from_dense(std::sqrt(dt) * jump);

    if (space.fock_cutoff >= 2 && params.model != models::Model::BoundaryTimeCrystal) {
        for (int row = 0; row < space.spin_levels(); ++row) {
            ops.leak_rows.push_back(row * space.fock_levels() + space.fock_cutoff);
            ops.leak_rows.push_back(row * space.fock_levels() + space.fock_cutoff - 1);
        }
    }
    return ops;
}

namespace {

double leak_population(const StepOperators& ops, const Vector& psi) {
    double pop = 0.0;
    for (int i : ops.leak_rows) pop += std::norm(psi(i));
    return pop;
}

void finish_step(TrajectoryState& state, Vector& new_psi, Vector& new_phi,
                 const StepOperators& ops, int traj_index) {
    const double nu_sq = new_psi.squaredNorm();
    if (!(nu_sq > 0.0) || !std::isfinite(nu_sq)) {
        throw std::runtime_error("trajectories: step norm underflow on trajectory " +
                                 std::to_string(traj_index));
    }
    const double inv_nu = 1.0 / std::sqrt(nu_sq);
    state.psi = inv_nu * new_psi;
    state.phi = inv_nu * new_phi;
    const Complex overlap = state.psi.dot(state.phi);
    state.a = overlap.real();
    state.b = overlap.imag();
    state.log_likelihood += std::log(nu_sq);
    state.t += ops.dt;
    if (!ops.leak_rows.empty()) {
        const double pop = leak_population(ops, state.psi);
        if (pop > ops.leak_tol) throw_leakage(pop, traj_index);
    }
}

}  // namespace

int step_counting(TrajectoryState& state, const StepOperators& ops, RngStream& rng) {
    const double p1 = ops.dt * jump_rate(ops.jump_rate_diag, state.psi);
    if (p1 > ops.max_click_probability) throw_dt_too_large(p1, -1);
    const int bit = rng.bernoulli(p1) ? 1 : 0;

    Vector new_psi, new_phi;
    if (bit) {
        new_psi = Vector::Zero(state.psi.size());
        new_phi = Vector::Zero(state.psi.size());
        ops.k1.apply_add(state.psi, new_psi);
        ops.k1.apply_add(state.phi, new_phi);  // dK1 = 0
    } else {
        new_psi = ops.k0 * state.psi;
        new_phi = ops.k0 * state.phi + ops.dk0 * state.psi;
    }
    finish_step(state, new_psi, new_phi, ops, -1);
    return bit;
}

double step_homodyne(TrajectoryState& state, const StepOperators& ops, RngStream& rng) {
    Vector lpsi = Vector::Zero(state.psi.size());
    ops.l_phi.apply_add(state.psi, lpsi);
    const double mean = 2.0 * state.psi.dot(lpsi).real();
    const double current = mean + rng.normal() / std::sqrt(ops.dt);
    const double jdt = current * ops.dt;

    Vector new_psi = state.psi;
    ops.m0_minus_identity.apply_add(state.psi, new_psi);
    new_psi += jdt * lpsi;

    Vector new_phi = state.phi;
    ops.m0_minus_identity.apply_add(state.phi, new_phi);
    Vector lphi_phi = Vector::Zero(state.phi.size());
    ops.l_phi.apply_add(state.phi, lphi_phi);
    new_phi += jdt * lphi_phi;
    Vector dh_psi = Vector::Zero(state.psi.size());
    ops.dh.apply_add(state.psi, dh_psi);
    new_phi -= kImagUnit * ops.dt * dh_psi;

    finish_step(state, new_psi, new_phi, ops, -1);
    return current;
}

namespace {

struct BatchPartial {
    Eigen::ArrayXd rate_sum, rate_sum2;
    std::vector<Matrix> state_sum;
};

// Advances trajectories with stream indices [stream_begin, stream_begin +
// width) in lockstep, writing rows [row_begin, row_begin + width) of `out`;
// cross-trajectory sums land in `partial`.
void run_batch(const Vector& initial, const StepOperators& ops,
               const EnsembleConfig& config, const EnsembleOptions& options,
               int stream_begin, int row_begin, int width,
               const std::vector<int>& samples, EnsembleResult& out,
               BatchPartial& partial) {
    const int dim = static_cast<int>(initial.size());
    const int n_steps = samples.back();
    const int n_samples = static_cast<int>(samples.size());
    const bool counting = ops.unravelling == Unravelling::Counting;

    Matrix psiphi = Matrix::Zero(dim, 2 * width);
    for (int k = 0; k < width; ++k) psiphi.col(k) = initial;
    Matrix scratch(dim, 2 * width);   // K0 [psi|phi] or M0 [psi|phi]
    Matrix deriv(dim, width);         // dK0 psi or dH psi
    Matrix lfield;                    // L_phi [psi|phi] (homodyne only)
    if (!counting) lfield.resize(dim, 2 * width);
    Vector click_tmp(dim);

    std::vector<RngStream> rngs;
    rngs.reserve(width);
    for (int k = 0; k < width; ++k) {
        rngs.emplace_back(config.master_seed,
                          static_cast<std::uint64_t>(stream_begin + k));
    }

    std::vector<double> cur_a(width, 0.0), cur_b(width, 0.0);
    std::vector<double> loglik(width, 0.0), maxb(width, 0.0), outcome(width, 0.0);
    std::vector<double> entry(width, -1.0);

    partial.rate_sum = Eigen::ArrayXd::Zero(n_samples);
    partial.rate_sum2 = Eigen::ArrayXd::Zero(n_samples);
    if (options.accumulate_mean_state) {
        partial.state_sum.assign(n_samples, Matrix::Zero(dim, dim));
    }

    auto take_sample = [&](int sample_idx, int step) {
        const double t = step * config.dt;
        for (int k = 0; k < width; ++k) {
            const int row = row_begin + k;
            out.a(row, sample_idx) = cur_a[k];
            out.b(row, sample_idx) = cur_b[k];
            out.phi_norm_sq(row, sample_idx) = psiphi.col(width + k).squaredNorm();
            const double rate = jump_rate(ops.jump_rate_diag, psiphi.col(k));
            partial.rate_sum(sample_idx) += rate;
            partial.rate_sum2(sample_idx) += rate * rate;
            if (options.accumulate_mean_state) {
                partial.state_sum[sample_idx].noalias() +=
                    psiphi.col(k) * psiphi.col(k).adjoint();
            }
            if (options.class_violation && entry[k] < 0.0) {
                if (options.class_violation(psiphi.col(k)) < options.class_entry_tol) {
                    entry[k] = t;
                }
            }
        }
    };

    take_sample(0, 0);
    int next_sample = 1;

    const double inv_sqrt_dt = counting ? 0.0 : 1.0 / std::sqrt(config.dt);

    for (int j = 1; j <= n_steps; ++j) {
        if (counting) {
            scratch.noalias() = ops.k0 * psiphi;
            deriv.noalias() = ops.dk0 * psiphi.leftCols(width);
        } else {
            scratch = psiphi;
            ops.m0_minus_identity.apply_add(psiphi, scratch);
            lfield.setZero();
            ops.l_phi.apply_add(psiphi, lfield);
            deriv.setZero();
            ops.dh.apply_add(psiphi.leftCols(width), deriv);
        }

        for (int k = 0; k < width; ++k) {
            const int traj_index = stream_begin + k;
            if (counting) {
                const double p1 =
                    config.dt * jump_rate(ops.jump_rate_diag, psiphi.col(k));
                if (p1 > ops.max_click_probability) throw_dt_too_large(p1, traj_index);
                const bool click = rngs[k].bernoulli(p1);
                if (click) {
                    click_tmp.setZero();
                    ops.k1.apply_add(psiphi.col(k), click_tmp);
                    scratch.col(k) = click_tmp;
                    click_tmp.setZero();
                    ops.k1.apply_add(psiphi.col(width + k), click_tmp);
                    scratch.col(width + k) = click_tmp;
                    outcome[k] += 1.0;
                } else {
                    scratch.col(width + k) += deriv.col(k);
                }
                if (options.keep_records) {
                    out.counting_records[row_begin + k].bits.push_back(click ? 1 : 0);
                }
            } else {
                const double mean = 2.0 * psiphi.col(k).dot(lfield.col(k)).real();
                const double current = mean + rngs[k].normal() * inv_sqrt_dt;
                const double jdt = current * config.dt;
                scratch.col(k) += jdt * lfield.col(k);
                scratch.col(width + k) += jdt * lfield.col(width + k);
                scratch.col(width + k) -= kImagUnit * config.dt * deriv.col(k);
                outcome[k] += jdt;
                if (options.keep_records) {
                    out.homodyne_records[row_begin + k].currents.push_back(current);
                }
            }

            const double nu_sq = scratch.col(k).squaredNorm();
            if (!(nu_sq > 0.0) || !std::isfinite(nu_sq)) {
                throw std::runtime_error(
                    "trajectories: step norm underflow on trajectory " +
                    std::to_string(traj_index));
            }
            const double inv_nu = 1.0 / std::sqrt(nu_sq);
            scratch.col(k) *= inv_nu;
            scratch.col(width + k) *= inv_nu;
            loglik[k] += std::log(nu_sq);

            const Complex overlap = scratch.col(k).dot(scratch.col(width + k));
            cur_a[k] = overlap.real();
            cur_b[k] = overlap.imag();
            maxb[k] = std::max(maxb[k], std::abs(cur_b[k]));

            if (!ops.leak_rows.empty()) {
                double pop = 0.0;
                for (int i : ops.leak_rows) pop += std::norm(scratch(i, k));
                if (pop > ops.leak_tol) throw_leakage(pop, traj_index);
            }
        }

        std::swap(psiphi, scratch);
        if (next_sample < n_samples && samples[next_sample] == j) {
            take_sample(next_sample, j);
            ++next_sample;
        }
    }

    for (int k = 0; k < width; ++k) {
        const int row = row_begin + k;
        out.max_abs_b[row] = maxb[k];
        out.log_likelihood[row] = loglik[k];
        out.total_outcome[row] = outcome[k];
        out.class_entry_time[row] = entry[k];
    }
}

}  // namespace

EnsembleResult run_ensemble(const Vector& initial, const StepOperators& ops,
                            const EnsembleConfig& config,
                            const EnsembleOptions& options) {
    if (config.n_traj < 1) {
        throw std::invalid_argument("run_ensemble: n_traj must be positive");
    }
    if (std::abs(initial.norm() - 1.0) > 1e-10) {
        throw std::invalid_argument("run_ensemble: initial state is not normalized");
    }
    const int n_steps = step_count(config);
    const auto samples = sample_steps(n_steps, config.sample_stride);
    const int n_samples = static_cast<int>(samples.size());
    const int n_traj = config.n_traj;

    EnsembleResult out;
    out.sample_times.resize(n_samples);
    for (int s = 0; s < n_samples; ++s) out.sample_times[s] = samples[s] * config.dt;
    out.a.resize(n_traj, n_samples);
    out.b.resize(n_traj, n_samples);
    out.phi_norm_sq.resize(n_traj, n_samples);
    out.max_abs_b.resize(n_traj);
    out.log_likelihood.resize(n_traj);
    out.total_outcome.resize(n_traj);
    out.class_entry_time.assign(n_traj, -1.0);
    if (options.keep_records) {
        if (ops.unravelling == Unravelling::Counting) {
            out.counting_records.assign(n_traj, CountingRecord{config.dt, {}});
        } else {
            out.homodyne_records.assign(n_traj, HomodyneRecord{config.dt, {}});
        }
    }

    const int n_batches = (n_traj + kBatchColumns - 1) / kBatchColumns;
    std::vector<BatchPartial> partials(n_batches);

    std::atomic<int> next_batch{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&]() {
        while (true) {
            const int batch = next_batch.fetch_add(1);
            if (batch >= n_batches) return;
            const int k_begin = batch * kBatchColumns;
            const int width = std::min(kBatchColumns, n_traj - k_begin);
            try {
                run_batch(initial, ops, config, options, k_begin, k_begin, width,
                          samples, out, partials[batch]);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    const int n_threads = std::max(1, std::min(options.n_threads, n_batches));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    // merge cross-trajectory sums in batch order so results do not depend on
    // the thread count
    Eigen::ArrayXd rate_sum = Eigen::ArrayXd::Zero(n_samples);
    Eigen::ArrayXd rate_sum2 = Eigen::ArrayXd::Zero(n_samples);
    std::vector<Matrix> state_sum;
    if (options.accumulate_mean_state) {
        state_sum.assign(n_samples, Matrix::Zero(initial.size(), initial.size()));
    }
    for (const auto& partial : partials) {
        rate_sum += partial.rate_sum;
        rate_sum2 += partial.rate_sum2;
        for (std::size_t s = 0; s < state_sum.size(); ++s) {
            state_sum[s] += partial.state_sum[s];
        }
    }
    out.mean_jump_rate.resize(n_samples);
    out.stderr_jump_rate.resize(n_samples);
    const double n = static_cast<double>(n_traj);
    for (int s = 0; s < n_samples; ++s) {
        const double mean = rate_sum(s) / n;
        out.mean_jump_rate[s] = mean;
        const double var = std::max(0.0, rate_sum2(s) / n - mean * mean);
        out.stderr_jump_rate[s] = n > 1 ? std::sqrt(var / (n - 1)) : 0.0;
    }
    if (options.accumulate_mean_state) {
        out.mean_state.resize(n_samples);
        for (int s = 0; s < n_samples; ++s) out.mean_state[s] = state_sum[s] / n;
    }
    return out;
}

TrajectoryResult run_trajectory(const Vector& initial, const StepOperators& ops,
                                const EnsembleConfig& config, int traj_index,
                                bool keep_record,
                                const std::function<double(const Vector&)>&
                                    class_violation,
                                double class_entry_tol) {
    if (traj_index < 0) {
        throw std::invalid_argument("run_trajectory: negative trajectory index");
    }
    if (std::abs(initial.norm() - 1.0) > 1e-10) {
        throw std::invalid_argument("run_trajectory: initial state is not normalized");
    }
    const int n_steps = step_count(config);
    const auto samples = sample_steps(n_steps, config.sample_stride);
    const int n_samples = static_cast<int>(samples.size());

    EnsembleResult out;
    out.sample_times.resize(n_samples);
    for (int s = 0; s < n_samples; ++s) out.sample_times[s] = samples[s] * config.dt;
    out.a.resize(1, n_samples);
    out.b.resize(1, n_samples);
    out.phi_norm_sq.resize(1, n_samples);
    out.max_abs_b.resize(1);
    out.log_likelihood.resize(1);
    out.total_outcome.resize(1);
    out.class_entry_time.assign(1, -1.0);
    if (keep_record) {
        if (ops.unravelling == Unravelling::Counting) {
            out.counting_records.assign(1, CountingRecord{config.dt, {}});
        } else {
            out.homodyne_records.assign(1, HomodyneRecord{config.dt, {}});
        }
    }

    EnsembleOptions options;
    options.keep_records = keep_record;
    options.class_violation = class_violation;
    options.class_entry_tol = class_entry_tol;

    BatchPartial partial;
    run_batch(initial, ops, config, options, traj_index, 0, 1, samples, out, partial);

    TrajectoryResult result;
    result.sample_times = std::move(out.sample_times);
    result.a.assign(out.a.row(0).begin(), out.a.row(0).end());
    result.b.assign(out.b.row(0).begin(), out.b.row(0).end());
    result.phi_norm_sq.assign(out.phi_norm_sq.row(0).begin(),
                              out.phi_norm_sq.row(0).end());
    result.max_abs_b = out.max_abs_b[0];
    result.log_likelihood = out.log_likelihood[0];
    result.total_outcome = out.total_outcome[0];
    result.class_entry_time = out.class_entry_time[0];
    if (keep_record) {
        if (ops.unravelling == Unravelling::Counting) {
            result.counting_record = std::move(out.counting_records[0]);
        } else {
            result.homodyne_record = std::move(out.homodyne_records[0]);
        }
    }
    return result;
}

std::vector<Matrix> integrate_master(const Matrix& initial,
                                     const CompositeSpace& space,
                                     const ModelParams& params,
                                     const std::vector<double>& t_grid,
                                     double dt_me) {
    if (t_grid.empty()) throw std::invalid_argument("integrate_master: empty time grid");
    if (t_grid.front() < 0) {
        throw std::invalid_argument("integrate_master: grid must start at t >= 0");
    }
    for (std::size_t i = 1; i < t_grid.size(); ++i) {
        if (t_grid[i] <= t_grid[i - 1]) {
            throw std::invalid_argument("integrate_master: grid must increase");
        }
    }
    if (initial.rows() != space.dim || initial.cols() != space.dim) {
        throw std::invalid_argument("integrate_master: state dimension mismatch");
    }
    // physical-state checks
    if ((initial - initial.adjoint().eval()).cwiseAbs().maxCoeff() > 1e-9) {
        throw std::invalid_argument("integrate_master: initial state not Hermitian");
    }
    if (std::abs(initial.trace().real() - 1.0) > 1e-9 ||
        std::abs(initial.trace().imag()) > 1e-9) {
        throw std::invalid_argument("integrate_master: initial state not trace one");
    }
    {
        Eigen::SelfAdjointEigenSolver<Matrix> solver(initial, Eigen::EigenvaluesOnly);
        if (solver.eigenvalues().minCoeff() < -1e-9) {
            throw std::invalid_argument("integrate_master: initial state not positive");
        }
    }

    const Matrix h = models::build_hamiltonian(space, params);
    const Matrix jump = models::build_jump_operator(space, params);
    const Matrix g_dense = -kImagUnit * h - 0.5 * (jump.adjoint() * jump);
    const auto g = linalg::BandedOperator::from_dense(g_dense);
    const auto l = linalg::BandedOperator::from_dense(jump);

    const int dim = space.dim;
    Matrix tmp(dim, dim);
    auto rhs = [&](const Matrix& x, Matrix& dx) {
        dx.setZero();
        g.apply_add(x, dx);            // G x
        g.apply_add_right_adjoint(x, dx);  // x G^dag
        tmp.setZero();
        l.apply_add(x, tmp);           // L x
        l.apply_add_right_adjoint(tmp, dx);  // (L x) L^dag
    };

    Matrix rho = initial;
    Matrix k1(dim, dim), k2(dim, dim), k3(dim, dim), k4(dim, dim), stage(dim, dim);
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

    std::vector<Matrix> result;
    result.reserve(t_grid.size());
    double t = 0.0;
    for (double target : t_grid) {
        const double span = target - t;
        if (span > 0) {
            const int n_sub = std::max(1, static_cast<int>(std::ceil(span / dt_me - 1e-12)));
            const double h_step = span / n_sub;
            for (int i = 0; i < n_sub; ++i) rk4_step(h_step);
            t = target;
            const double drift = std::abs(rho.trace() - Complex(1.0, 0.0));
            if (drift > 1e-6) {
                throw std::runtime_error(
                    "integrate_master: trace drifted by " + std::to_string(drift));
            }
        }
        result.push_back(rho);
    }
    return result;
}

}  // namespace sbm::traj
