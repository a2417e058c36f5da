// hilbert.hpp — composite Hilbert space of N collective spins and a truncated
// bosonic mode, with elementary operators and product states.

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>

namespace sbm {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

namespace hilbert {

// Basis bookkeeping for |S, M_z> ⊗ |n> product states.
//
// Ordering is M_z-major with M_z DESCENDING (|S,S> first) and n minor, so the
// flat index of (M_z, n) is (S - M_z)*(fock_cutoff+1) + n. On the bare spin
// factor this makes S_z = diag(S, S-1, ..., -S).
struct CompositeSpace {
    int n_spins = 0;        // N
    double total_spin = 0;  // S = N/2
    int fock_cutoff = 0;    // n_max; 0 collapses the boson factor to a point
    int dim = 0;            // (N+1)*(n_max+1)

    int spin_levels() const { return n_spins + 1; }
    int fock_levels() const { return fock_cutoff + 1; }

    // Flat index of |S,M_z> ⊗ |n>; throws on out-of-range quantum numbers.
    int index(double m_z, int n) const;

    // Inverse of index().
    struct Label {
        double m_z;
        int n;
    };
    Label label(int flat_index) const;
};

// n_max = 0 is allowed so that boson-free models (BTC) can reuse the space.
CompositeSpace make_space(int n_spins, int fock_cutoff);

struct SpinOperators {
    Matrix sx, sy, sz, s_plus, s_minus;
};

struct BosonOperators {
    Matrix a, a_dag, number;
};

// Collective spin operators tensored with the boson identity. Matrix elements
// follow <S,M±1|S_±|S,M> = sqrt((S∓M)(S±M+1)).
SpinOperators build_spin_operators(const CompositeSpace& space);

// Truncated ladder operators tensored with the spin identity;
// <n-1|a|n> = sqrt(n) for n <= n_max.
BosonOperators build_boson_operators(const CompositeSpace& space);

// Unit vector on the basis state |S,M_z> ⊗ |n>.
Vector dicke_number_state(const CompositeSpace& space, double m_z, int n);

// SU(2) spin coherent state |S,θ,φ> ⊗ |n>, with coefficients
//   C_{M_z} = binom(2S, S+M_z)^{1/2} cos(θ/2)^{S+M_z} sin(θ/2)^{S-M_z}
//             e^{-i(S-M_z)φ}.
Vector spin_coherent_state(const CompositeSpace& space, double theta,
                           double phi, int n);

}  // namespace hilbert
}  // namespace sbm
