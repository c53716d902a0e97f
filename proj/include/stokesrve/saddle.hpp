#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <vector>

namespace stokesrve {

enum class PreconKind { None, BlockDiag };

struct SaddleOptions {
    double tol = 1e-9;  // relative 2-norm residual of the full system
    int max_iter = 5000;
    PreconKind precon = PreconKind::BlockDiag;
    bool auto_project = true;  // project known null components out of rhs/iterates
};

// Symmetric indefinite KKT system
//   [A  B^T] [q]   [rhs_q]
//   [B   0 ] [p] = [rhs_p]
// with optional descriptors of the known null space (constant velocities on
// periodic grids, the constant pressure when no inclusions are present).
struct SaddleSystem {
    Eigen::SparseMatrix<double> A;
    Eigen::SparseMatrix<double> B;
    Eigen::VectorXd rhs_q;
    Eigen::VectorXd rhs_p;
    std::vector<Eigen::VectorXd> null_q;
    bool pressure_const_null = false;
    double pressure_scale = 1.0;  // ~ h^d/2; pressure mass scaling for the preconditioner

    long nq() const { return A.rows(); }
    long np() const { return B.rows(); }
};

struct SaddleResult {
    Eigen::VectorXd q, p;
    int iters = 0;
    double rel_residual = 0.0;
    std::vector<double> history;  // estimated relative residual per iteration
    bool converged = false;
};

// Preconditioned MINRES on the full saddle system. Block-diagonal
// preconditioner: incomplete Cholesky of A (Jacobi fallback) for the
// velocity block, mass scaling for the pressure block. Throws NoConvergence
// when the Krylov iteration stalls, or when auto_project is off and the rhs
// has a component in the declared null space.
SaddleResult saddle_solve(const SaddleSystem& sys, const SaddleOptions& opt);

}  // namespace stokesrve
