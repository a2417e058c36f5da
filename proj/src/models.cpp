#include "sbm/models.hpp"

#include <cmath>
#include <stdexcept>

#include "sbm/linalg.hpp"

namespace sbm::models {

namespace {
constexpr Complex kImagUnit{0.0, 1.0};
}

void validate(const CompositeSpace& space, const ModelParams& params) {
    if (space.dim <= 0) throw std::invalid_argument("models: empty space");
    if (params.model == Model::BoundaryTimeCrystal) {
        if (params.gamma < 0) throw std::invalid_argument("models: gamma must be >= 0");
    } else {
        if (params.kappa < 0) throw std::invalid_argument("models: kappa must be >= 0");
        if (space.fock_cutoff < 1) {
            throw std::invalid_argument("models: TC/GD need a boson mode (fock_cutoff >= 1)");
        }
    }
}

Matrix build_hamiltonian(const CompositeSpace& space, const ModelParams& params) {
    validate(space, params);
    const auto spin = hilbert::build_spin_operators(space);

    if (params.model == Model::BoundaryTimeCrystal) {
        return 0.5 * params.omega * (spin.s_plus + spin.s_minus);
    }

    const auto boson = hilbert::build_boson_operators(space);
    Matrix h = 0.5 * params.omega * (spin.s_plus + spin.s_minus) +
               params.delta_spin * spin.sz + params.delta_boson * boson.number;
    const double g = params.lambda / std::sqrt(space.total_spin);
    switch (params.model) {
        case Model::TavisCummings:
            h += g * (boson.a * spin.s_plus + boson.a_dag * spin.s_minus);
            break;
        case Model::GeneralizedDicke:
            h += g * ((boson.a + boson.a_dag) * spin.sz);
            break;
        default:
            throw std::invalid_argument("build_hamiltonian: unknown model");
    }
    return h;
}

Matrix build_jump_operator(const CompositeSpace& space, const ModelParams& params) {
    validate(space, params);
    if (params.model == Model::BoundaryTimeCrystal) {
        const auto spin = hilbert::build_spin_operators(space);
        return std::sqrt(params.gamma / space.total_spin) * spin.s_minus;
    }
    const auto boson = hilbert::build_boson_operators(space);
    return std::sqrt(params.kappa) * boson.a;
}

Matrix build_dH(const CompositeSpace& space, const ModelParams& params,
                ParamTarget target) {
    validate(space, params);
    const auto spin = hilbert::build_spin_operators(space);
    if (target == ParamTarget::Omega) {
        return spin.sx;
    }
    const double inv_sqrt_s = 1.0 / std::sqrt(space.total_spin);
    switch (params.model) {
        case Model::TavisCummings: {
            const auto boson = hilbert::build_boson_operators(space);
            return inv_sqrt_s * (boson.a * spin.s_plus + boson.a_dag * spin.s_minus);
        }
        case Model::GeneralizedDicke: {
            const auto boson = hilbert::build_boson_operators(space);
            return inv_sqrt_s * ((boson.a + boson.a_dag) * spin.sz);
        }
        default:
            throw std::invalid_argument(
                "build_dH: the boundary time crystal has no coupling parameter");
    }
}

KrausPair kraus_counting(const CompositeSpace& space, const ModelParams& params,
                         double dt) {
    if (dt <= 0) throw std::invalid_argument("kraus_counting: dt must be positive");
    const Matrix h = build_hamiltonian(space, params);
    const Matrix jump = build_jump_operator(space, params);
    const Matrix h_eff = h - 0.5 * kImagUnit * (jump.adjoint() * jump);
    KrausPair pair;
    pair.k0 = linalg::expm((-kImagUnit * dt) * h_eff);
    pair.k1 = std::sqrt(dt) * jump;
    return pair;
}

Matrix kraus_homodyne(const CompositeSpace& space, const ModelParams& params,
                      double current, double dt) {
    if (dt <= 0) throw std::invalid_argument("kraus_homodyne: dt must be positive");
    const Matrix h = build_hamiltonian(space, params);
    const Matrix jump = build_jump_operator(space, params);
    return Matrix::Identity(space.dim, space.dim) - kImagUnit * dt * h -
           0.5 * dt * (jump.adjoint() * jump) +
           (current * dt * std::exp(kImagUnit * params.phi_lo)) * jump;
}

Matrix build_dK(const CompositeSpace& space, const ModelParams& params,
                ParamTarget target, KrausKind kind, double dt, double /*current*/) {
    if (dt <= 0) throw std::invalid_argument("build_dK: dt must be positive");
    switch (kind) {
        case KrausKind::K1:
            // the jump operator carries no Hamiltonian parameter
            return Matrix::Zero(space.dim, space.dim);
        case KrausKind::KJ:
            return -kImagUnit * dt * build_dH(space, params, target);
        case KrausKind::K0: {
            const Matrix h = build_hamiltonian(space, params);
            const Matrix jump = build_jump_operator(space, params);
            const Matrix h_eff = h - 0.5 * kImagUnit * (jump.adjoint() * jump);
            const Matrix dh = build_dH(space, params, target);
            return linalg::expm_frechet((-kImagUnit * dt) * h_eff,
                                        (-kImagUnit * dt) * dh);
        }
    }
    throw std::invalid_argument("build_dK: unknown Kraus kind");
}

}  // namespace sbm::models
