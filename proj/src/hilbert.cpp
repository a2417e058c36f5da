#include "sbm/hilbert.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace sbm::hilbert {

namespace {

// M_z must sit on the ladder -S, -S+1, ..., S.
int spin_row(const CompositeSpace& space, double m_z) {
    const double offset = space.total_spin - m_z;
    const int row = static_cast<int>(std::llround(offset));
    if (std::abs(offset - row) > 1e-9 || row < 0 || row >= space.spin_levels()) {
        throw std::invalid_argument("CompositeSpace: M_z = " + std::to_string(m_z) +
                                    " is not a valid magnetization for S = " +
                                    std::to_string(space.total_spin));
    }
    return row;
}

}  // namespace

int CompositeSpace::index(double m_z, int n) const {
    if (n < 0 || n > fock_cutoff) {
        throw std::invalid_argument("CompositeSpace: boson number " + std::to_string(n) +
                                    " outside [0, " + std::to_string(fock_cutoff) + "]");
    }
    return spin_row(*this, m_z) * fock_levels() + n;
}

CompositeSpace::Label CompositeSpace::label(int flat_index) const {
    if (flat_index < 0 || flat_index >= dim) {
        throw std::invalid_argument("CompositeSpace: flat index out of range");
    }
    const int row = flat_index / fock_levels();
    const int n = flat_index % fock_levels();
    return Label{total_spin - row, n};
}

CompositeSpace make_space(int n_spins, int fock_cutoff) {
    if (n_spins < 1) {
        throw std::invalid_argument("make_space: need at least one spin");
    }
    if (fock_cutoff < 0) {
        throw std::invalid_argument("make_space: negative Fock cutoff");
    }
    CompositeSpace space;
    space.n_spins = n_spins;
    space.total_spin = 0.5 * n_spins;
    space.fock_cutoff = fock_cutoff;
    space.dim = (n_spins + 1) * (fock_cutoff + 1);
    return space;
}

SpinOperators build_spin_operators(const CompositeSpace& space) {
    const int dim = space.dim;
    const int nf = space.fock_levels();
    const double s = space.total_spin;

    SpinOperators ops;
    ops.sz = Matrix::Zero(dim, dim);
    ops.s_plus = Matrix::Zero(dim, dim);

    for (int row = 0; row < space.spin_levels(); ++row) {
        const double m = s - row;
        for (int n = 0; n < nf; ++n) {
            const int i = row * nf + n;
            ops.sz(i, i) = m;
            if (row + 1 < space.spin_levels()) {
                // S_+ |S, m-1> = sqrt((S+m)(S-m+1)) |S, m>
                const double c = std::sqrt((s + m) * (s - m + 1.0));
                ops.s_plus(i, (row + 1) * nf + n) = c;
            }
        }
    }
    ops.s_minus = ops.s_plus.adjoint();
    ops.sx = 0.5 * (ops.s_plus + ops.s_minus);
    ops.sy = Complex(0, -0.5) * (ops.s_plus - ops.s_minus);
    return ops;
}

BosonOperators build_boson_operators(const CompositeSpace& space) {
    const int dim = space.dim;
    const int nf = space.fock_levels();

    BosonOperators ops;
    ops.a = Matrix::Zero(dim, dim);
    for (int row = 0; row < space.spin_levels(); ++row) {
        for (int n = 1; n < nf; ++n) {
            const int i = row * nf + n;
            ops.a(i - 1, i) = std::sqrt(static_cast<double>(n));
        }
    }
    ops.a_dag = ops.a.adjoint();
    ops.number = ops.a_dag * ops.a;
    return ops;
}

Vector dicke_number_state(const CompositeSpace& space, double m_z, int n) {
    Vector psi = Vector::Zero(space.dim);
    psi(space.index(m_z, n)) = 1.0;
    return psi;
}

Vector spin_coherent_state(const CompositeSpace& space, double theta,
                           double phi, int n) {
    if (n < 0 || n > space.fock_cutoff) {
        throw std::invalid_argument("spin_coherent_state: boson number out of range");
    }
    const double s = space.total_spin;
    const double c = std::cos(0.5 * theta);
    const double sn = std::sin(0.5 * theta);

    Vector psi = Vector::Zero(space.dim);
    for (int row = 0; row < space.spin_levels(); ++row) {
        const double m = s - row;
        // ln binom(2S, S+m) via lgamma keeps large-N coefficients stable.
        const double ln_binom = std::lgamma(2 * s + 1.0) - std::lgamma(s + m + 1.0) -
                                std::lgamma(s - m + 1.0);
        double amp = 0.0;
        if (c == 0.0 || sn == 0.0) {
            // poles: only the extremal component survives
            if ((c == 0.0 && m == -s) || (sn == 0.0 && m == s)) amp = 1.0;
        } else {
            amp = std::exp(0.5 * ln_binom + (s + m) * std::log(std::abs(c)) +
                           (s - m) * std::log(std::abs(sn)));
            if (c < 0.0 && std::llround(s + m) % 2 != 0) amp = -amp;
            if (sn < 0.0 && std::llround(s - m) % 2 != 0) amp = -amp;
        }
        psi(space.index(m, n)) = amp * std::exp(Complex(0, -(s - m) * phi));
    }
    psi.normalize();
    return psi;
}

}  // namespace sbm::hilbert
