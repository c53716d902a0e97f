#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "stokesrve/effective.hpp"
#include "stokesrve/grid.hpp"
#include "stokesrve/solver.hpp"

namespace stokesrve {

// Homogenized Stokes flow: -div 2 Bbar D(u) + grad P = (1-lambda) f + lambda g,
// div u = 0, u = 0 on the box boundary, P mean-zero. Bbar is given as the
// m x m matrix in the canonical trace-free basis; it must be coercive
// (eigenvalues >= 1 up to round-off).
CorrectorSolution solve_homogenized(const Grid& grid, const Eigen::MatrixXd& Bbar,
                                    double lambda, const StaggeredField& f,
                                    const StaggeredField* g = nullptr,
                                    const SolverOptions& opt = {});

struct TwoScaleRow {
    double eps = 0.0;
    double lambda_eps = 0.0;    // realized inclusion fraction of the eps grid
    double h1_err_vel = 0.0;    // discrete H1 norm of u_eps - ubar - eps sum psi_k(./eps) F_k
    double l2_err_press = 0.0;  // kappa-optimized pressure error over fluid cells
    double l2_err_press_k0 = 0.0;  // same without the optimal shift
    double weak_avg_err = 0.0;  // max |average of u_eps - ubar| over a 4x4 partition
};

struct TwoScaleReport {
    std::vector<TwoScaleRow> rows;  // eps strictly decreasing
    double lambda = 0.0;            // cell realization fraction used in the hom rhs
    Eigen::MatrixXd Bbar;
    Eigen::VectorXd bbar;
    std::uint64_t seed = 0;
    std::string f_descriptor;
};

// Inputs shared across the ladder: the unit-cell correctors and effective
// coefficients of one periodized realization.
struct TwoScaleSetup {
    Grid cell_grid;
    LabelField cell_labels;
    std::vector<CorrectorSolution> correctors;  // one per canonical basis element
    StrainBasis basis;
    Eigen::MatrixXd Bbar;  // m x m
    Eigen::VectorXd bbar;  // m coefficients
    double lambda = 0.0;
};

TwoScaleRow two_scale_errors(const CorrectorSolution& ueps, const LabelField& eps_labels,
                             const CorrectorSolution& hom, const TwoScaleSetup& setup,
                             double eps);

struct TwoScaleConfig {
    int dim = 2;
    double lambda = 0.1;
    double gap = 0.2;
    std::uint64_t seed = 1;
    double cell_L = 8.0;
    int cell_N = 128;
    int box_N = 256;  // resolution of the unit box U
    std::vector<double> eps_ladder{0.25, 0.125, 0.0625};
    double tol = 1e-9;
    bool sediment = false;  // f = 0, constant g, hom rhs (1-lambda) f + lambda g
};

// Full pipeline: correctors on the periodic cell, homogenized solve on the
// unit box, eps-ladder of rescaled tiled realizations, per-rung error rows.
TwoScaleReport run_two_scale(const TwoScaleConfig& cfg);

// Default smooth body force (divergence-free in 2D).
StaggeredField default_body_force(const Grid& grid);
StaggeredField constant_field(const Grid& grid, const Vec3& value);

}  // namespace stokesrve
