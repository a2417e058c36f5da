// linalg.hpp — small dense/banded helpers shared by the simulation kernels.

#pragma once

#include <Eigen/Dense>

#include <utility>
#include <vector>

#include "sbm/hilbert.hpp"

namespace sbm::linalg {

// Matrix exponential (Padé scaling-and-squaring, via Eigen's MatrixFunctions).
Matrix expm(const Matrix& m);

// Fréchet derivative of expm at `m` in direction `e`, computed from the block
// identity  exp([[M, E], [0, M]]) = [[exp(M), D exp(M){E}], [0, exp(M)]].
Matrix expm_frechet(const Matrix& m, const Matrix& e);

// Collective-spin/boson operators couple only a handful of diagonals, so the
// time steppers store them band by band: y[i] += c_d[i] * x[i+d].
class BandedOperator {
  public:
    BandedOperator() = default;

    // Collects every nonzero diagonal of `m` (entries with |m_ij| > tol).
    static BandedOperator from_dense(const Matrix& m, double tol = 0.0);

    int dim() const { return dim_; }
    bool empty() const { return bands_.empty(); }

    // y += op * x
    void apply_add(const Eigen::Ref<const Vector>& x, Vector& y) const;
    // Y += op * X, column by column
    void apply_add(const Eigen::Ref<const Matrix>& x, Eigen::Ref<Matrix> y) const;
    // Y += X * op^dagger (used by the master-equation right products)
    void apply_add_right_adjoint(const Eigen::Ref<const Matrix>& x,
                                 Eigen::Ref<Matrix> y) const;

    Matrix to_dense() const;

  private:
    struct Band {
        int offset;      // column = row + offset
        int lo, len;     // valid row range [lo, lo+len)
        Vector coeffs;   // coeffs[i - lo] multiplies x[i + offset]
    };
    int dim_ = 0;
    std::vector<Band> bands_;
};

// 0.5 * sum of absolute eigenvalues of the Hermitian difference.
double trace_distance(const Matrix& rho, const Matrix& sigma);

// Least-squares slope of y(t) over the trailing fraction of the grid.
double fit_tail_slope(const std::vector<double>& t, const std::vector<double>& y,
                      double tail_fraction = 0.25);

}  // namespace sbm::linalg
