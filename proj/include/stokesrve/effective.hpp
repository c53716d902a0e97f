#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "stokesrve/geometry.hpp"
#include "stokesrve/grid.hpp"
#include "stokesrve/solver.hpp"

namespace stokesrve {

// Orthonormal basis of trace-free symmetric matrices, canonical ordering:
//   2D: {diag(1,-1)/sqrt2, offdiag(1,1)/sqrt2}
//   3D: {diag(1,-1,0)/sqrt2, diag(1,1,-2)/sqrt6, (01), (02), (12) offdiag/sqrt2}
struct StrainBasis {
    int dim = 2;
    std::vector<Eigen::MatrixXd> E;
    static StrainBasis canonical(int dim);
    int m() const { return static_cast<int>(E.size()); }
};

struct EffectiveMeta {
    std::uint64_t seed = 0;
    double L = 0.0;
    int N = 0;
    double tol = 0.0;
};

struct EffectiveCoefficients {
    Eigen::MatrixXd B;         // m x m, E_k : Bbar E_l
    Eigen::VectorXd b;         // bbar : E_k (surface assembly)
    Eigen::MatrixXd b_matrix;  // bbar reconstructed as a trace-free symmetric matrix
    double lambda = 0.0;       // realized volume fraction of the rasterized labels
    EffectiveMeta meta;

    // diagnostics
    double min_eig = 0.0;
    double sym_res = 0.0;            // ||B - B^T|| / ||B||
    double quad_cross_res = 0.0;     // bilinear vs direct quadratic diagonal
    double shear_mean = 0.0;         // isotropic fit tr(B)/m
    double aniso_res = 0.0;          // ||B - shear_mean Id|| / ||B||
    double b_route_diff = 0.0;       // max_k |b_surf - b_vol| for bbar:E_k
    double skew_res = 0.0;           // max skew-test residual of Zbar
    double force_res = 0.0, torque_res = 0.0;
    int iters = 0;
};

// Per-inclusion traction moments Z_n = -(1/|I_n|) sum_facets sigma nu (x-x_n)
// from one-sided stresses on the staircase interface, fluid-side values.
struct ZFieldSummary {
    std::vector<Eigen::MatrixXd> Z_n;
    Eigen::MatrixXd Zbar;        // cell average of the Z field (surface route)
    double tr_zbar_volume = 0.0; // independent cutoff-shell volume assembly of tr Zbar
    double skew_res = 0.0;       // max |A : Zbar| over unit skew A
};

ZFieldSummary z_summary(const CorrectorSolution& sol, const LabelField& labels);

// B part: cell averages of (D psi_k + E_k):(D psi_l + E_l).
Eigen::MatrixXd effective_tensor(const std::vector<CorrectorSolution>& sols,
                                 const LabelField& labels, const StrainBasis& basis,
                                 double* quad_cross_res = nullptr);

// b part: surface traction moments per basis direction; *vol_route gets the
// cutoff-shell values for the cross-check.
Eigen::VectorXd effective_pressure_coefficient(const std::vector<CorrectorSolution>& sols,
                                               const LabelField& labels,
                                               const StrainBasis& basis,
                                               Eigen::VectorXd* vol_route = nullptr,
                                               double* skew_res = nullptr);

// One-stop assembly with diagnostics.
EffectiveCoefficients compute_effective(const std::vector<CorrectorSolution>& sols,
                                        const LabelField& labels, const StrainBasis& basis,
                                        const EffectiveMeta& meta);

double realized_fraction(const LabelField& labels);

// ----------------------------------------------------------------------

struct DiluteConfig {
    int dim = 2;
    std::vector<double> lambda_ladder{0.005, 0.01, 0.02};
    int N = 512;
    double gap = 0.5;
    bool single_inclusion = true;  // one centered ball per cell; else RSA
    double rsa_cell_length = 32.0;
    std::vector<std::uint64_t> seeds{0};
    double tol = 1e-9;
};

struct DilutePoint {
    std::uint64_t seed = 0;
    double lambda_nominal = 0.0;
    double lambda_realized = 0.0;
    double shear_eig_mean = 0.0;
};

struct DiluteFit {
    double c = 0.0;   // fitted slope of (shear eigenvalue - 1) vs realized lambda
    double ci = 0.0;  // ~95% half-width over seeds (0 for deterministic cells)
    std::vector<DilutePoint> points;
};

DiluteFit dilute_slope(const DiluteConfig& cfg);

// ----------------------------------------------------------------------

struct EnsembleConfig {
    int dim = 2;
    double lambda = 0.1;
    double gap = 0.2;
    std::vector<double> L_ladder{16, 32, 64};
    int n_seeds = 8;
    std::uint64_t seed0 = 1;
    double h = 0.125;  // fixed spacing across the ladder
    GeneratorTag generator = GeneratorTag::RSA;
    Vec3 spacing{4, 4, 4};
    double jitter = 0.0;
    double tol = 1e-9;
};

struct EnsembleRow {
    double L = 0.0;
    std::uint64_t seed = 0;
    double lambda = 0.0;
    Eigen::MatrixXd B;
    Eigen::VectorXd b;
    double mean_grad_res = 0.0;
    double sigma_fluid_mean = 0.0;
    int iters = 0;
};

struct EnsembleStats {
    std::vector<EnsembleRow> rows;
    std::vector<double> L_values;
    std::vector<double> mean_shear;    // per L: mean of B(0,0)
    std::vector<double> stddev_shear;  // per L
    bool stddev_decreasing = false;    // endpoint comparison across the ladder
};

EnsembleStats ensemble_stats(const EnsembleConfig& cfg);

}  // namespace stokesrve
