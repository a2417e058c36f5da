#include "sbm/meanfield.hpp"

#include <cmath>
#include <stdexcept>

namespace sbm::meanfield {

namespace {

constexpr double kSqrt2 = 1.4142135623730950488;
constexpr double kMarginalTol = 1e-10;

MeanFieldState axpy(const MeanFieldState& base, double alpha, const MeanFieldState& d) {
    return {base.m_x + alpha * d.m_x, base.m_y + alpha * d.m_y,
            base.m_z + alpha * d.m_z, base.m_q + alpha * d.m_q,
            base.m_p + alpha * d.m_p};
}

bool finite(const MeanFieldState& s) {
    return std::isfinite(s.m_x) && std::isfinite(s.m_y) && std::isfinite(s.m_z) &&
           std::isfinite(s.m_q) && std::isfinite(s.m_p);
}

}  // namespace

MeanFieldState gd_meanfield_rhs(const MeanFieldState& s, const ModelParams& p) {
    MeanFieldState d;
    d.m_x = -kSqrt2 * p.lambda * s.m_p * s.m_y;
    d.m_y = -p.omega * s.m_z + kSqrt2 * p.lambda * s.m_p * s.m_x;
    d.m_z = p.omega * s.m_y;
    d.m_q = p.delta_boson * s.m_p + kSqrt2 * p.lambda * s.m_z - 0.5 * p.kappa * s.m_q;
    d.m_p = -p.delta_boson * s.m_q - 0.5 * p.kappa * s.m_p;
    return d;
}

Eigen::Matrix<double, 5, 5> gd_meanfield_jacobian(const MeanFieldState& s,
                                                  const ModelParams& p) {
    const double lam = kSqrt2 * p.lambda;
    Eigen::Matrix<double, 5, 5> j = Eigen::Matrix<double, 5, 5>::Zero();
    // d/d(m_x, m_y, m_z, m_q, m_p)
    j(0, 1) = -lam * s.m_p;
    j(0, 4) = -lam * s.m_y;
    j(1, 0) = lam * s.m_p;
    j(1, 2) = -p.omega;
    j(1, 4) = lam * s.m_x;
    j(2, 1) = p.omega;
    j(3, 2) = lam;
    j(3, 3) = -0.5 * p.kappa;
    j(3, 4) = p.delta_boson;
    j(4, 3) = -p.delta_boson;
    j(4, 4) = -0.5 * p.kappa;
    return j;
}

double critical_coupling(const ModelParams& p) {
    if (p.delta_boson <= 0) {
        throw std::invalid_argument(
            "critical_coupling: requires delta > 0 (no finite critical point)");
    }
    const double half_kappa = 0.5 * p.kappa;
    return std::sqrt((p.delta_boson * p.delta_boson + half_kappa * half_kappa) *
                     p.omega / (2.0 * p.delta_boson));
}

namespace {

Branch classify(const MeanFieldState& state, const ModelParams& params,
                const char* name) {
    Branch branch;
    branch.state = state;
    branch.name = name;
    const auto j = gd_meanfield_jacobian(state, params);
    const Eigen::EigenSolver<Eigen::Matrix<double, 5, 5>> solver(j);
    double max_re = -1.0;
    for (int i = 0; i < 5; ++i) {
        const double re = solver.eigenvalues()(i).real();
        if (std::abs(re) < kMarginalTol) {
            ++branch.n_marginal;
        } else {
            max_re = std::max(max_re, re);
        }
    }
    branch.stability = max_re > 0 ? Stability::Unstable : Stability::Stable;
    return branch;
}

}  // namespace

std::vector<Branch> stationary_branches(const ModelParams& params) {
    std::vector<Branch> branches;
    branches.push_back(classify({-1, 0, 0, 0, 0}, params, "normal"));

    if (params.delta_boson > 0) {
        const double lambda_c = critical_coupling(params);
        if (params.lambda > lambda_c) {
            const double mx = -(lambda_c * lambda_c) / (params.lambda * params.lambda);
            const double mz = std::sqrt(1.0 - mx * mx);
            const double denom = params.delta_boson * params.delta_boson +
                                 0.25 * params.kappa * params.kappa;
            for (double sign : {+1.0, -1.0}) {
                MeanFieldState s;
                s.m_x = mx;
                s.m_y = 0;
                s.m_z = sign * mz;
                s.m_q = params.kappa * params.lambda * s.m_z / (kSqrt2 * denom);
                s.m_p = -kSqrt2 * params.lambda * params.delta_boson * s.m_z / denom;
                branches.push_back(
                    classify(s, params, sign > 0 ? "superradiant+" : "superradiant-"));
            }
        }
    }
    return branches;
}

QfiRates tc_stationary_qfi_rates(const ModelParams& params, int n_spins) {
    if (n_spins < 1) {
        throw std::invalid_argument("tc_stationary_qfi_rates: need N > 0");
    }
    if (params.lambda == 0) {
        throw std::invalid_argument("tc_stationary_qfi_rates: lambda must be nonzero");
    }
    const double s = 0.5 * n_spins;
    const double lambda2 = params.lambda * params.lambda;
    QfiRates rates;
    rates.rate_omega = params.kappa * s / lambda2;
    rates.rate_lambda = params.kappa * params.omega * params.omega * s /
                        (lambda2 * lambda2);
    return rates;
}

std::vector<FlowPoint> integrate_meanfield(const MeanFieldState& initial,
                                           const ModelParams& params,
                                           const std::vector<double>& t_grid,
                                           double dt) {
    if (t_grid.empty()) throw std::invalid_argument("integrate_meanfield: empty grid");
    const double norm = initial.m_x * initial.m_x + initial.m_y * initial.m_y +
                        initial.m_z * initial.m_z;
    if (norm > 1.0 + 1e-9) {
        throw std::invalid_argument("integrate_meanfield: spin norm exceeds 1");
    }

    MeanFieldState s = initial;
    auto rk4_step = [&](double h) {
        const MeanFieldState k1 = gd_meanfield_rhs(s, params);
        const MeanFieldState k2 = gd_meanfield_rhs(axpy(s, 0.5 * h, k1), params);
        const MeanFieldState k3 = gd_meanfield_rhs(axpy(s, 0.5 * h, k2), params);
        const MeanFieldState k4 = gd_meanfield_rhs(axpy(s, h, k3), params);
        s.m_x += h / 6.0 * (k1.m_x + 2 * k2.m_x + 2 * k3.m_x + k4.m_x);
        s.m_y += h / 6.0 * (k1.m_y + 2 * k2.m_y + 2 * k3.m_y + k4.m_y);
        s.m_z += h / 6.0 * (k1.m_z + 2 * k2.m_z + 2 * k3.m_z + k4.m_z);
        s.m_q += h / 6.0 * (k1.m_q + 2 * k2.m_q + 2 * k3.m_q + k4.m_q);
        s.m_p += h / 6.0 * (k1.m_p + 2 * k2.m_p + 2 * k3.m_p + k4.m_p);
    };

    std::vector<FlowPoint> flow;
    flow.reserve(t_grid.size());
    double t = 0.0;
    for (double tout : t_grid) {
        const double span = tout - t;
        if (span > 0) {
            const int n_sub = std::max(1, static_cast<int>(std::ceil(span / dt - 1e-12)));
            const double h = span / n_sub;
            for (int i = 0; i < n_sub; ++i) {
                rk4_step(h);
                if (!finite(s)) {
                    throw std::runtime_error("integrate_meanfield: step instability");
                }
            }
            t = tout;
        }
        flow.push_back({tout, s});
    }
    return flow;
}

}  // namespace sbm::meanfield
