#include "sbm/linalg.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <stdexcept>

namespace sbm::linalg {

Matrix expm(const Matrix& m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("expm: matrix not square");
    return m.exp();
}

Matrix expm_frechet(const Matrix& m, const Matrix& e) {
    const auto n = m.rows();
    if (m.cols() != n || e.rows() != n || e.cols() != n) {
        throw std::invalid_argument("expm_frechet: dimension mismatch");
    }
    Matrix block = Matrix::Zero(2 * n, 2 * n);
    block.topLeftCorner(n, n) = m;
    block.bottomRightCorner(n, n) = m;
    block.topRightCorner(n, n) = e;
    return block.exp().topRightCorner(n, n);
}

BandedOperator BandedOperator::from_dense(const Matrix& m, double tol) {
    if (m.rows() != m.cols()) {
        throw std::invalid_argument("BandedOperator: matrix not square");
    }
    const int n = static_cast<int>(m.rows());
    BandedOperator op;
    op.dim_ = n;
    for (int offset = -(n - 1); offset <= n - 1; ++offset) {
        const int lo = std::max(0, -offset);
        const int hi = std::min(n, n - offset);  // exclusive
        int first = -1, last = -1;
        for (int i = lo; i < hi; ++i) {
            if (std::abs(m(i, i + offset)) > tol) {
                if (first < 0) first = i;
                last = i;
            }
        }
        if (first < 0) continue;
        Band band;
        band.offset = offset;
        band.lo = first;
        band.len = last - first + 1;
        band.coeffs = Vector(band.len);
        for (int i = 0; i < band.len; ++i) {
            band.coeffs(i) = m(first + i, first + i + offset);
        }
        op.bands_.push_back(std::move(band));
    }
    return op;
}

void BandedOperator::apply_add(const Eigen::Ref<const Vector>& x, Vector& y) const {
    for (const Band& b : bands_) {
        y.segment(b.lo, b.len).array() +=
            b.coeffs.array() * x.segment(b.lo + b.offset, b.len).array();
    }
}

void BandedOperator::apply_add(const Eigen::Ref<const Matrix>& x,
                               Eigen::Ref<Matrix> y) const {
    const auto cols = x.cols();
    for (const Band& b : bands_) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            y.col(c).segment(b.lo, b.len).array() +=
                b.coeffs.array() * x.col(c).segment(b.lo + b.offset, b.len).array();
        }
    }
}

void BandedOperator::apply_add_right_adjoint(const Eigen::Ref<const Matrix>& x,
                                             Eigen::Ref<Matrix> y) const {
    // (X op^dag)_{ij} = sum_d conj(c_d[j]) X_{i, j+d}
    for (const Band& b : bands_) {
        for (int k = 0; k < b.len; ++k) {
            const int j = b.lo + k;
            y.col(j) += std::conj(b.coeffs(k)) * x.col(j + b.offset);
        }
    }
}

Matrix BandedOperator::to_dense() const {
    Matrix m = Matrix::Zero(dim_, dim_);
    for (const Band& b : bands_) {
        for (int k = 0; k < b.len; ++k) {
            m(b.lo + k, b.lo + k + b.offset) = b.coeffs(k);
        }
    }
    return m;
}

double trace_distance(const Matrix& rho, const Matrix& sigma) {
    Matrix diff = rho - sigma;
    diff = 0.5 * (diff + diff.adjoint().eval());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(diff, Eigen::EigenvaluesOnly);
    return 0.5 * solver.eigenvalues().cwiseAbs().sum();
}

double fit_tail_slope(const std::vector<double>& t, const std::vector<double>& y,
                      double tail_fraction) {
    if (t.size() != y.size() || t.size() < 2) {
        throw std::invalid_argument("fit_tail_slope: need at least two samples");
    }
    const std::size_t n = t.size();
    std::size_t start = static_cast<std::size_t>(std::floor((1.0 - tail_fraction) * n));
    if (start > n - 2) start = n - 2;
    double st = 0, sy = 0, stt = 0, sty = 0;
    const double m = static_cast<double>(n - start);
    for (std::size_t i = start; i < n; ++i) {
        st += t[i];
        sy += y[i];
        stt += t[i] * t[i];
        sty += t[i] * y[i];
    }
    const double denom = m * stt - st * st;
    if (denom == 0.0) throw std::invalid_argument("fit_tail_slope: degenerate grid");
    return (m * sty - st * sy) / denom;
}

}  // namespace sbm::linalg
