// models.hpp — dissipative Tavis-Cummings, generalized Dicke and boundary
// time-crystal models: Hamiltonians, jump operators, parameter derivatives and
// the Kraus operators of the photon-counting and homodyne unravellings.

#pragma once

#include "sbm/hilbert.hpp"

namespace sbm::models {

using hilbert::CompositeSpace;

enum class Model { TavisCummings, GeneralizedDicke, BoundaryTimeCrystal };

// All rates and frequencies are in units of the boson decay rate kappa
// (the collective decay gamma for the boundary time crystal).
struct ModelParams {
    Model model = Model::TavisCummings;
    double omega = 0.0;        // Rabi frequency
    double delta_spin = 0.0;   // laser-atom detuning Delta
    double delta_boson = 0.0;  // laser-boson detuning delta
    double lambda = 0.0;       // spin-boson coupling
    double kappa = 1.0;        // boson decay rate (TC, GD)
    double gamma = 1.0;        // collective spin decay rate (BTC)
    double phi_lo = 0.0;       // homodyne local-oscillator phase
};

// Which Hamiltonian parameter is being estimated.
enum class ParamTarget { Omega, Lambda };

void validate(const CompositeSpace& space, const ModelParams& params);

// H = (Omega/2)(S_+ + S_-) + Delta S_z + delta a^dag a + H_SB with
// H_SB = (lambda/sqrt(S)) (a S_+ + a^dag S_-)   (Tavis-Cummings)
// H_SB = (lambda/sqrt(S)) (a + a^dag) S_z       (generalized Dicke)
// and H = (Omega/2)(S_+ + S_-) for the boundary time crystal.
Matrix build_hamiltonian(const CompositeSpace& space, const ModelParams& params);

// L = sqrt(kappa) a (TC, GD); L = sqrt(gamma/S) S_- (BTC).
Matrix build_jump_operator(const CompositeSpace& space, const ModelParams& params);

// dH/d(eta): S_x for Omega; (a S_+ + a^dag S_-)/sqrt(S) or (a + a^dag) S_z/sqrt(S)
// for Lambda. Lambda is rejected for the boundary time crystal.
Matrix build_dH(const CompositeSpace& space, const ModelParams& params,
                ParamTarget target);

struct KrausPair {
    Matrix k0;  // exp(-i (H - i/2 L^dag L) dt), exact dense exponential
    Matrix k1;  // sqrt(dt) L
};

KrausPair kraus_counting(const CompositeSpace& space, const ModelParams& params,
                         double dt);

// K_J = 1 - iH dt - (L^dag L/2) dt + L e^{i Phi} J dt, first order in dt.
// The local-oscillator phase multiplies the jump operator, so the monitored
// quadrature is L e^{i Phi} + L^dag e^{-i Phi}.
Matrix kraus_homodyne(const CompositeSpace& space, const ModelParams& params,
                      double current, double dt);

enum class KrausKind { K0, K1, KJ };

// Parameter derivative of the selected Kraus operator: zero for K1,
// -i dH dt for K_J, and the Fréchet derivative of the exponential for K0.
// `current` is ignored except for KJ.
Matrix build_dK(const CompositeSpace& space, const ModelParams& params,
                ParamTarget target, KrausKind kind, double dt,
                double current = 0.0);

}  // namespace sbm::models
