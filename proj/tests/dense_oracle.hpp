#pragma once

// Test-only oracle: direct dense factorization of the assembled saddle
// systems. Independent of the Krylov path it is used to check.

#include <Eigen/Dense>
#include <utility>

#include "stokesrve/saddle.hpp"

namespace stokesrve::testing {

inline std::pair<Eigen::VectorXd, Eigen::VectorXd> dense_saddle_solve(
    const SaddleSystem& sys) {
    const long nq = sys.nq();
    const long np = sys.np();
    const long n = nq + np;
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
    K.topLeftCorner(nq, nq) = Eigen::MatrixXd(sys.A);
    if (np > 0) {
        const Eigen::MatrixXd Bd(sys.B);
        K.bottomLeftCorner(np, nq) = Bd;
        K.topRightCorner(nq, np) = Bd.transpose();
    }
    Eigen::VectorXd b(n);
    b.head(nq) = sys.rhs_q;
    b.tail(np) = sys.rhs_p;
    // minimum-norm least-squares: tolerates the known null space (constant
    // velocities / pressures) of consistent systems
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(K);
    Eigen::VectorXd x = cod.solve(b);
    return {x.head(nq), x.tail(np)};
}

}  // namespace stokesrve::testing
