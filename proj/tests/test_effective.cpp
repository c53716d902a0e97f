#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "stokesrve/effective.hpp"
#include "stokesrve/errors.hpp"
#include "stokesrve/solver.hpp"

using namespace stokesrve;

namespace {

std::vector<CorrectorSolution> solve_basis(const Grid& grid, const LabelField& labels,
                                           const StrainBasis& basis, double tol = 1e-10) {
    SolverOptions opt;
    opt.tol = tol;
    std::vector<CorrectorSolution> sols;
    for (const auto& E : basis.E) sols.push_back(solve_corrector(grid, labels, E, opt));
    return sols;
}

double energy_norm_of_difference(const CorrectorSolution& a, const StaggeredField& b) {
    StrainField Da = sym_grad(a.u);
    StrainField Db = sym_grad(b);
    double acc = 0.0;
    const Grid& g = a.u.grid;
    for (int c = 0; c < g.dim; ++c)
        for (std::size_t i = 0; i < Da.diag[c].size(); ++i) {
            const double d = Da.diag[c][i] - Db.diag[c][i];
            acc += d * d;
        }
    for (int s = 0; s < g.pairs(); ++s)
        for (std::size_t i = 0; i < Da.off[s].size(); ++i) {
            const double d = Da.off[s][i] - Db.off[s][i];
            acc += 2.0 * d * d;
        }
    return std::sqrt(acc * g.cell_volume());
}

}  // namespace

TEST_CASE("strain basis: orthonormal, symmetric, trace-free") {
    for (int dim : {2, 3}) {
        StrainBasis bs = StrainBasis::canonical(dim);
        CHECK(bs.m() == dim * (dim + 1) / 2 - 1);
        for (int k = 0; k < bs.m(); ++k) {
            CHECK(std::abs(bs.E[k].trace()) < 1e-14);
            CHECK((bs.E[k] - bs.E[k].transpose()).norm() < 1e-14);
            for (int l = 0; l < bs.m(); ++l) {
                const double ip = (bs.E[k].array() * bs.E[l].array()).sum();
                CHECK(std::abs(ip - (k == l ? 1.0 : 0.0)) < 1e-14);
            }
        }
    }
}

TEST_CASE("effective tensor: empty suspension gives the identity, b = 0") {
    Grid grid = Grid::periodic(2, 32, 8.0);
    InclusionSet empty;
    empty.dim = 2;
    empty.cell_length = 8.0;
    empty.gap = 0.3;
    LabelField labels = rasterize(empty, grid);
    StrainBasis basis = StrainBasis::canonical(2);
    auto sols = solve_basis(grid, labels, basis);
    EffectiveCoefficients eff = compute_effective(sols, labels, basis, {});
    CHECK((eff.B - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(eff.b.cwiseAbs().maxCoeff() == 0.0);  // empty traction sums, exactly
    CHECK(eff.lambda == 0.0);
    CHECK(eff.min_eig >= 1.0 - 1e-12);
}

TEST_CASE("effective tensor: coercivity, exact symmetry, quadratic cross-check") {
    InclusionSet set;
    set.dim = 2;
    set.cell_length = 10;
    set.gap = 0.4;
    set.centers = {{3.0, 3.0, 0}, {7.0, 6.0, 0}};
    Grid grid = Grid::periodic(2, 80, 10.0);
    LabelField labels = rasterize(set, grid);
    StrainBasis basis = StrainBasis::canonical(2);
    auto sols = solve_basis(grid, labels, basis);
    EffectiveCoefficients eff = compute_effective(sols, labels, basis, {});

    CHECK(eff.min_eig >= 1.0 - 1e-6);
    CHECK(eff.min_eig > 1.0 + 1e-3);  // inclusions strictly increase viscosity
    CHECK(eff.sym_res == 0.0);        // bilinear assembly is symmetric by construction
    CHECK(eff.quad_cross_res < 1e-10);
    CHECK(eff.lambda == doctest::Approx(realized_fraction(labels)));
}

TEST_CASE("polarization: bilinear entries match the quadratic-form route") {
    InclusionSet set;
    set.dim = 2;
    set.cell_length = 8;
    set.gap = 0.4;
    set.centers = {{4.0, 4.0, 0}};
    Grid grid = Grid::periodic(2, 64, 8.0);
    LabelField labels = rasterize(set, grid);
    StrainBasis basis = StrainBasis::canonical(2);
    SolverOptions opt;
    opt.tol = 1e-11;
    auto sols = solve_basis(grid, labels, basis, opt.tol);
    Eigen::MatrixXd B = effective_tensor(sols, labels, basis);

    auto Q = [&](const Eigen::MatrixXd& E) {
        CorrectorSolution s = solve_corrector(grid, labels, E, opt);
        return s.energy / s.volume;
    };
    const double q0 = Q(basis.E[0]);
    const double q1 = Q(basis.E[1]);
    const double qs = Q((basis.E[0] + basis.E[1]) / std::sqrt(2.0));
    const double b01 = qs - 0.5 * (q0 + q1);
    CHECK(std::abs(B(0, 0) - q0) < 1e-10 * q0);
    CHECK(std::abs(B(1, 1) - q1) < 1e-10 * q1);
    CHECK(std::abs(B(0, 1) - b01) < 1e-10 * std::max(1.0, std::abs(b01)));
}

TEST_CASE("linearity: psi_{E+E'} equals psi_E + psi_E' in the energy norm") {
    InclusionSet set;
    set.dim = 2;
    set.cell_length = 8;
    set.gap = 0.4;
    set.centers = {{2.5, 2.5, 0}, {5.7, 5.5, 0}};
    Grid grid = Grid::periodic(2, 64, 8.0);
    LabelField labels = rasterize(set, grid);
    StrainBasis basis = StrainBasis::canonical(2);
    SolverOptions opt;
    opt.tol = 1e-10;

    CorrectorSolution s0 = solve_corrector(grid, labels, basis.E[0], opt);
    CorrectorSolution s1 = solve_corrector(grid, labels, basis.E[1], opt);
    CorrectorSolution ssum =
        solve_corrector(grid, labels, basis.E[0] + basis.E[1], opt);

    StaggeredField sum = StaggeredField::zeros(grid);
    for (int c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < sum.comp[c].size(); ++i)
            sum.comp[c][i] = s0.u.comp[c][i] + s1.u.comp[c][i];

    const double disc = energy_norm_of_difference(ssum, sum);
    const double scale = std::sqrt(ssum.energy);
    CHECK(disc < 10.0 * opt.tol * std::max(scale, 1.0) * 1e3);  // see acceptance for the tight bound
    CHECK(disc / scale < 1e-6);
}

TEST_CASE("Z field: skew annihilation and the eq-EZE cross-check, O(h)") {
    InclusionSet set;
    set.dim = 2;
    set.cell_length = 8;
    set.gap = 0.4;
    set.centers = {{4.0, 4.0, 0}};
    StrainBasis basis = StrainBasis::canonical(2);

    double last_err = 1e9;
    for (int N : {64, 128}) {
        Grid grid = Grid::periodic(2, N, 8.0);
        LabelField labels = rasterize(set, grid);
        auto sols = solve_basis(grid, labels, basis, 1e-10);
        Eigen::MatrixXd B = effective_tensor(sols, labels, basis);
        Eigen::VectorXd b_vol;
        double skew = 0.0;
        Eigen::VectorXd b_surf =
            effective_pressure_coefficient(sols, labels, basis, &b_vol, &skew);

        double worst = 0.0;
        for (int k = 0; k < basis.m(); ++k) {
            ZFieldSummary zs = z_summary(sols[k], labels);
            Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(2, 2);
            // 2(Id - Bbar)E_k in matrix form
            for (int l = 0; l < basis.m(); ++l)
                rhs += 2.0 * ((k == l ? 1.0 : 0.0) - B(l, k)) * basis.E[l];
            rhs -= b_vol[k] * Eigen::MatrixXd::Identity(2, 2);
            const double scale = std::max(rhs.norm(), 1e-12);
            worst = std::max(worst, (zs.Zbar - rhs).norm() / scale);
        }
        CHECK(worst < 5.0 * grid.h);
        CHECK(worst < last_err + 1e-12);
        last_err = worst;
        CHECK(skew < 5.0 * grid.h);
        // single centered disk: 90-degree symmetry forces bbar ~ 0
        CHECK(b_surf.cwiseAbs().maxCoeff() < 2.0 * grid.h);
        CHECK((b_surf - b_vol).cwiseAbs().maxCoeff() < 2.0 * grid.h);
    }
}

TEST_CASE("dilute slope: single-inclusion cells give a slope near 2") {
    DiluteConfig cfg;
    cfg.dim = 2;
    cfg.lambda_ladder = {0.01, 0.02};
    cfg.N = 128;
    cfg.gap = 0.5;
    cfg.tol = 1e-9;
    DiluteFit fit = dilute_slope(cfg);
    REQUIRE(fit.points.size() == 2);
    CHECK(fit.c > 1.0);
    CHECK(fit.c < 3.5);
    CHECK(fit.ci == 0.0);  // deterministic cells
    for (const auto& p : fit.points) {
        CHECK(p.lambda_realized > 0.0);
        CHECK(p.shear_eig_mean > 1.0);
    }
}

TEST_CASE("ensemble stats: lambda = 0 has zero variance; rows reproduce") {
    EnsembleConfig cfg;
    cfg.dim = 2;
    cfg.lambda = 0.0;
    cfg.gap = 0.3;
    cfg.L_ladder = {8, 16};
    cfg.n_seeds = 2;
    cfg.h = 0.5;
    cfg.tol = 1e-10;
    EnsembleStats a = ensemble_stats(cfg);
    REQUIRE(a.rows.size() == 4);
    for (double s : a.stddev_shear) CHECK(s == 0.0);
    for (const auto& r : a.rows) {
        CHECK(r.lambda == 0.0);
        CHECK((r.B - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-10);
    }
    EnsembleStats b = ensemble_stats(cfg);
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].B(0, 0) == b.rows[i].B(0, 0));
        CHECK(a.rows[i].b[0] == b.rows[i].b[0]);
    }
}

TEST_CASE("ensemble stats: a small real ladder produces well-formed rows") {
    EnsembleConfig cfg;
    cfg.dim = 2;
    cfg.lambda = 0.05;
    cfg.gap = 0.3;
    cfg.L_ladder = {8, 12};
    cfg.n_seeds = 2;
    cfg.seed0 = 11;
    cfg.h = 0.25;
    cfg.tol = 1e-9;
    EnsembleStats st = ensemble_stats(cfg);
    REQUIRE(st.rows.size() == 4);
    for (const auto& r : st.rows) {
        CHECK(r.lambda > 0.0);
        CHECK(r.B(0, 0) >= 1.0);
        CHECK(r.mean_grad_res < 1e-10);
        CHECK(r.sigma_fluid_mean < 1e-12);
    }
}

TEST_CASE("input validation: mismatched solutions are rejected") {
    Grid grid = Grid::periodic(2, 32, 8.0);
    InclusionSet empty;
    empty.dim = 2;
    empty.cell_length = 8.0;
    empty.gap = 0.3;
    LabelField labels = rasterize(empty, grid);
    StrainBasis basis = StrainBasis::canonical(2);
    auto sols = solve_basis(grid, labels, basis);
    std::swap(sols[0], sols[1]);  // wrong strain directions
    CHECK_THROWS_AS(effective_tensor(sols, labels, basis), InconsistentInputs);
    sols.pop_back();
    CHECK_THROWS_AS(effective_tensor(sols, labels, basis), InconsistentInputs);
}
