#pragma once

#include <Eigen/Dense>
#include <complex>

namespace rayleigh {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;
using Index   = Eigen::Index;

/// Largest elementwise deviation from Hermitian symmetry.
inline double hermitianDefect(const CMatrix &m) { return (m - m.adjoint()).cwiseAbs().maxCoeff(); }

/// Re tr(a b) for Hermitian a, b without forming the product.
inline double traceProductReal(const CMatrix &a, const CMatrix &b) {
    return a.cwiseProduct(b.conjugate()).sum().real();
}

} // namespace rayleigh
