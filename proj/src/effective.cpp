#include "stokesrve/effective.hpp"

#include <algorithm>
#include <cmath>

#include "stokesrve/errors.hpp"

namespace stokesrve {

StrainBasis StrainBasis::canonical(int dim) {
    StrainBasis bs;
    bs.dim = dim;
    const double s2 = 1.0 / std::sqrt(2.0);
    if (dim == 2) {
        Eigen::MatrixXd e1(2, 2), e2(2, 2);
        e1 << s2, 0, 0, -s2;
        e2 << 0, s2, s2, 0;
        bs.E = {e1, e2};
    } else if (dim == 3) {
        const double s6 = 1.0 / std::sqrt(6.0);
        Eigen::MatrixXd e1 = Eigen::MatrixXd::Zero(3, 3);
        e1(0, 0) = s2;
        e1(1, 1) = -s2;
        Eigen::MatrixXd e2 = Eigen::MatrixXd::Zero(3, 3);
        e2(0, 0) = s6;
        e2(1, 1) = s6;
        e2(2, 2) = -2.0 * s6;
        auto off = [&](int a, int b) {
            Eigen::MatrixXd e = Eigen::MatrixXd::Zero(3, 3);
            e(a, b) = s2;
            e(b, a) = s2;
            return e;
        };
        bs.E = {e1, e2, off(0, 1), off(0, 2), off(1, 2)};
    } else {
        throw InvalidParams("basis dim must be 2 or 3");
    }
    return bs;
}

double realized_fraction(const LabelField& labels) {
    long count = 0;
    for (auto l : labels.cell)
        if (l >= 0) ++count;
    return static_cast<double>(count) / static_cast<double>(labels.cell.size());
}

namespace {

// G = D(u) + E as a StrainField
StrainField total_strain(const CorrectorSolution& sol) {
    StrainField G = sym_grad(sol.u);
    const int d = sol.u.grid.dim;
    if (sol.E.size() > 0) {
        std::array<double, 9> erow{};
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) erow[i * d + j] = sol.E(i, j);
        add_constant_strain(G, erow.data(), d);
    }
    return G;
}

void check_inputs(const std::vector<CorrectorSolution>& sols, const LabelField& labels,
                  const StrainBasis& basis) {
    if (static_cast<int>(sols.size()) != basis.m())
        throw InconsistentInputs("need one solution per basis element");
    for (int k = 0; k < basis.m(); ++k) {
        if (!sols[k].u.grid.same_as(labels.grid))
            throw InconsistentInputs("solution grids differ from label grid");
        if ((sols[k].E - basis.E[k]).norm() > 1e-12)
            throw InconsistentInputs("solution strain directions do not match the basis");
    }
}

}  // namespace

Eigen::MatrixXd effective_tensor(const std::vector<CorrectorSolution>& sols,
                                 const LabelField& labels, const StrainBasis& basis,
                                 double* quad_cross_res) {
    check_inputs(sols, labels, basis);
    const int m = basis.m();
    const Grid& g = labels.grid;
    const double vol = std::pow(g.extent, g.dim);

    std::vector<StrainField> G;
    G.reserve(m);
    for (const auto& s : sols) G.push_back(total_strain(s));

    Eigen::MatrixXd B(m, m);
    for (int k = 0; k < m; ++k)
        for (int l = k; l < m; ++l) {
            const double v = strain_inner(G[k], G[l]) / vol;
            B(k, l) = v;
            B(l, k) = v;
        }

    if (quad_cross_res) {
        // diagonal must equal |E|^2 + avg |D psi|^2 (mean strain telescopes)
        double worst = 0.0;
        for (int k = 0; k < m; ++k) {
            StrainField D = sym_grad(sols[k].u);
            const double direct = basis.E[k].squaredNorm() + strain_inner(D, D) / vol;
            worst = std::max(worst, std::abs(direct - B(k, k)));
        }
        *quad_cross_res = worst;
    }
    return B;
}

ZFieldSummary z_summary(const CorrectorSolution& sol, const LabelField& labels) {
    const Grid& g = labels.grid;
    const int d = g.dim;
    if (!sol.u.grid.same_as(g)) throw InconsistentInputs("solution/label grid mismatch");
    const Extents ce = cell_extents(g);
    const double hd = g.cell_volume();
    const double area = hd / g.h;  // facet area h^(d-1)
    const double vol = std::pow(g.extent, d);
    const double r = labels.radius;

    StrainField G = total_strain(sol);

    ZFieldSummary zs;
    zs.Zbar = Eigen::MatrixXd::Zero(d, d);
    zs.Z_n.assign(labels.n_inclusions, Eigen::MatrixXd::Zero(d, d));
    std::vector<long> counts(labels.n_inclusions, 0);
    std::vector<Eigen::MatrixXd> M(labels.n_inclusions, Eigen::MatrixXd::Zero(d, d));

    std::array<int, 3> m{0, 0, 0};
    for (m[2] = 0; m[2] < ce.e[2]; ++m[2])
        for (m[1] = 0; m[1] < ce.e[1]; ++m[1])
            for (m[0] = 0; m[0] < ce.e[0]; ++m[0]) {
                const std::int32_t n = labels.cell[ce.flat(m)];
                if (n < 0) continue;
                ++counts[n];
                for (int a = 0; a < d; ++a) {
                    for (int dir = -1; dir <= 1; dir += 2) {
                        std::array<int, 3> nb = m;
                        nb[a] += dir;
                        if (g.boundary == Boundary::Periodic)
                            nb[a] = (nb[a] + g.n) % g.n;
                        else if (nb[a] < 0 || nb[a] >= g.n)
                            continue;
                        if (labels.cell[ce.flat(nb)] != kFluid) continue;

                        // facet between inclusion cell m and fluid cell nb;
                        // outward normal dir * e_a, stress from the fluid cell
                        Eigen::MatrixXd S = strain_at_cell(G, nb);
                        const double sigma_p = sol.p.v[ce.flat(nb)];
                        // facet center: shared face of m and nb along a
                        std::array<int, 3> fidx = m;
                        if (dir > 0) fidx[a] = m[a] + 1;  // unwrapped; position only
                        Vec3 xf{0, 0, 0};
                        for (int c = 0; c < d; ++c)
                            xf[c] = g.origin[c] +
                                    (c == a ? fidx[c] * g.h : (fidx[c] + 0.5) * g.h);
                        Vec3 arm = g.boundary == Boundary::Periodic
                                       ? min_image(xf, labels.centers[n], g.extent, d)
                                       : vsub(xf, labels.centers[n]);
                        for (int i = 0; i < d; ++i) {
                            const double sig_ia =
                                2.0 * S(i, a) - (i == a ? sigma_p : 0.0);
                            const double traction_i = sig_ia * dir;
                            for (int j = 0; j < d; ++j)
                                M[n](i, j) += area * traction_i * arm[j];
                        }
                    }
                }
            }

    for (int n = 0; n < labels.n_inclusions; ++n) {
        const double vn = counts[n] * hd;
        zs.Z_n[n] = -M[n] / vn;
        zs.Zbar -= M[n] / vol;
    }

    // skew test: unit skew basis against Zbar
    const double zscale = std::max(zs.Zbar.norm(), 1e-300);
    for (int a = 0; a < d; ++a)
        for (int b = a + 1; b < d; ++b) {
            const double t = (zs.Zbar(a, b) - zs.Zbar(b, a)) / std::sqrt(2.0);
            zs.skew_res = std::max(zs.skew_res, std::abs(t) / zscale);
        }

    // cutoff-shell volume route for tr Zbar:
    //   tr Zbar = (1/|cell|) sum_n int_shell [ grad(chi) . sigma (x - x_n)
    //                                          - d chi Sigma ]
    // with chi a radial C^1 cutoff, 1 on the ball, 0 at distance gap*0.9.
    const double s = 0.9 * labels.gap;
    double acc = 0.0;
    for (std::int32_t n = 0; n < labels.n_inclusions; ++n) {
        const Vec3& xn = labels.centers[n];
        std::array<int, 3> lo{0, 0, 0}, hi{0, 0, 0};
        for (int c = 0; c < d; ++c) {
            lo[c] = static_cast<int>(std::floor((xn[c] - r - s - g.origin[c]) / g.h)) - 1;
            hi[c] = static_cast<int>(std::ceil((xn[c] + r + s - g.origin[c]) / g.h)) + 1;
            if (g.boundary == Boundary::DirichletZero) {
                lo[c] = std::max(lo[c], 0);
                hi[c] = std::min(hi[c], g.n - 1);
            }
        }
        std::array<int, 3> mm{0, 0, 0};
        for (mm[2] = lo[2]; mm[2] <= hi[2]; ++mm[2])
            for (mm[1] = lo[1]; mm[1] <= hi[1]; ++mm[1])
                for (mm[0] = lo[0]; mm[0] <= hi[0]; ++mm[0]) {
                    std::array<int, 3> w{0, 0, 0};
                    for (int c = 0; c < d; ++c)
                        w[c] = g.boundary == Boundary::Periodic
                                   ? ((mm[c] % g.n) + g.n) % g.n
                                   : mm[c];
                    const long cf = ce.flat(w);
                    if (labels.cell[cf] != kFluid) continue;
                    Vec3 xc = cell_center(g, w);
                    Vec3 rel = g.boundary == Boundary::Periodic
                                   ? min_image(xc, xn, g.extent, d)
                                   : vsub(xc, xn);
                    const double rho = vnorm(rel, d);
                    if (rho <= r || rho >= r + s) continue;
                    const double t = (rho - r) / s;
                    const double chi = 1.0 - (3.0 * t * t - 2.0 * t * t * t);
                    const double dchi = -(6.0 * t - 6.0 * t * t) / s;
                    Eigen::MatrixXd S = strain_at_cell(G, w);
                    const double sigma_p = sol.p.v[cf];
                    double term = 0.0;
                    for (int i = 0; i < d; ++i) {
                        double sig_row = 0.0;  // (sigma (x-x_n))_i
                        for (int j = 0; j < d; ++j)
                            sig_row += (2.0 * S(i, j) - (i == j ? sigma_p : 0.0)) * rel[j];
                        term += dchi * (rel[i] / rho) * sig_row;
                    }
                    term -= d * chi * sigma_p;
                    acc += hd * term;
                }
    }
    zs.tr_zbar_volume = acc / vol;
    return zs;
}

Eigen::VectorXd effective_pressure_coefficient(const std::vector<CorrectorSolution>& sols,
                                               const LabelField& labels,
                                               const StrainBasis& basis,
                                               Eigen::VectorXd* vol_route,
                                               double* skew_res) {
    check_inputs(sols, labels, basis);
    const int m = basis.m();
    const int d = basis.dim;
    Eigen::VectorXd b_surf(m), b_vol(m);
    double skew = 0.0;
    for (int k = 0; k < m; ++k) {
        ZFieldSummary zs = z_summary(sols[k], labels);
        b_surf[k] = -zs.Zbar.trace() / d;
        b_vol[k] = -zs.tr_zbar_volume / d;
        skew = std::max(skew, zs.skew_res);
    }
    if (vol_route) *vol_route = b_vol;
    if (skew_res) *skew_res = skew;
    return b_surf;
}

EffectiveCoefficients compute_effective(const std::vector<CorrectorSolution>& sols,
                                        const LabelField& labels, const StrainBasis& basis,
                                        const EffectiveMeta& meta) {
    EffectiveCoefficients eff;
    eff.meta = meta;
    eff.lambda = realized_fraction(labels);
    eff.B = effective_tensor(sols, labels, basis, &eff.quad_cross_res);

    Eigen::VectorXd b_vol;
    eff.b = effective_pressure_coefficient(sols, labels, basis, &b_vol, &eff.skew_res);
    eff.b_route_diff = (eff.b - b_vol).cwiseAbs().maxCoeff();
    const int d = basis.dim;
    eff.b_matrix = Eigen::MatrixXd::Zero(d, d);
    for (int k = 0; k < basis.m(); ++k) eff.b_matrix += eff.b[k] * basis.E[k];

    Eigen::MatrixXd sym = 0.5 * (eff.B + eff.B.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    eff.min_eig = es.eigenvalues().minCoeff();
    eff.sym_res = (eff.B - eff.B.transpose()).norm() / std::max(eff.B.norm(), 1e-300);
    eff.shear_mean = eff.B.trace() / basis.m();
    eff.aniso_res =
        (eff.B - eff.shear_mean * Eigen::MatrixXd::Identity(basis.m(), basis.m())).norm() /
        std::max(eff.B.norm(), 1e-300);
    for (const auto& s : sols) {
        eff.force_res = std::max(eff.force_res, s.res.force_res);
        eff.torque_res = std::max(eff.torque_res, s.res.torque_res);
        eff.iters = std::max(eff.iters, s.iters);
    }
    return eff;
}

DiluteFit dilute_slope(const DiluteConfig& cfg) {
    DiluteFit fit;
    const StrainBasis basis = StrainBasis::canonical(cfg.dim);
    std::vector<double> slopes;

    for (std::uint64_t seed : cfg.seeds) {
        std::vector<DilutePoint> pts;
        for (double lam : cfg.lambda_ladder) {
            InclusionSet set;
            if (cfg.single_inclusion) {
                const double L = std::pow(ball_volume(cfg.dim) / lam, 1.0 / cfg.dim);
                set.dim = cfg.dim;
                set.cell_length = L;
                set.gap = cfg.gap;
                set.seed = seed;
                set.tag = GeneratorTag::Manual;
                Vec3 c{L / 2, L / 2, cfg.dim == 3 ? L / 2 : 0.0};
                set.centers = {c};
            } else {
                RsaParams rp;
                rp.dim = cfg.dim;
                rp.cell_length = cfg.rsa_cell_length;
                rp.target_fraction = lam;
                rp.gap = cfg.gap;
                rp.seed = seed;
                set = rsa_generate(rp);
            }
            Grid grid = Grid::periodic(cfg.dim, cfg.N, set.cell_length);
            LabelField labels = rasterize(set, grid);
            SolverOptions opt;
            opt.tol = cfg.tol;
            std::vector<CorrectorSolution> sols;
            for (const auto& E : basis.E)
                sols.push_back(solve_corrector(grid, labels, E, opt));
            Eigen::MatrixXd B = effective_tensor(sols, labels, basis);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (B + B.transpose()));
            DilutePoint pt;
            pt.seed = seed;
            pt.lambda_nominal = lam;
            pt.lambda_realized = realized_fraction(labels);
            pt.shear_eig_mean = es.eigenvalues().mean();
            pts.push_back(pt);
            fit.points.push_back(pt);
        }
        // least squares through the origin: intercept is 0 by construction
        double sxy = 0.0, sxx = 0.0;
        for (const auto& p : pts) {
            sxy += p.lambda_realized * (p.shear_eig_mean - 1.0);
            sxx += p.lambda_realized * p.lambda_realized;
        }
        slopes.push_back(sxy / sxx);
    }

    double mean = 0.0;
    for (double s : slopes) mean += s;
    mean /= slopes.size();
    fit.c = mean;
    if (slopes.size() > 1) {
        double var = 0.0;
        for (double s : slopes) var += (s - mean) * (s - mean);
        var /= (slopes.size() - 1);
        fit.ci = 2.0 * std::sqrt(var / slopes.size());
    }
    return fit;
}

EnsembleStats ensemble_stats(const EnsembleConfig& cfg) {
    if (cfg.n_seeds < 2) throw InvalidParams("ensemble_stats needs at least 2 seeds");
    EnsembleStats out;
    const StrainBasis basis = StrainBasis::canonical(cfg.dim);
    for (double L : cfg.L_ladder) {
        const int N = static_cast<int>(std::lround(L / cfg.h));
        std::vector<double> shear_vals;
        for (int s = 0; s < cfg.n_seeds; ++s) {
            const std::uint64_t seed = cfg.seed0 + static_cast<std::uint64_t>(s);
            InclusionSet set;
            if (cfg.generator == GeneratorTag::RSA) {
                RsaParams rp;
                rp.dim = cfg.dim;
                rp.cell_length = L;
                rp.target_fraction = cfg.lambda;
                rp.gap = cfg.gap;
                rp.seed = seed;
                set = rsa_generate(rp);
            } else {
                PerturbedLatticeParams pp;
                pp.dim = cfg.dim;
                pp.cell_length = L;
                pp.spacing = cfg.spacing;
                pp.jitter = cfg.jitter;
                pp.gap = cfg.gap;
                pp.seed = seed;
                set = perturbed_lattice_generate(pp);
            }
            Grid grid = Grid::periodic(cfg.dim, N, L);
            LabelField labels = rasterize(set, grid);
            SolverOptions opt;
            opt.tol = cfg.tol;
            std::vector<CorrectorSolution> sols;
            for (const auto& E : basis.E)
                sols.push_back(solve_corrector(grid, labels, E, opt));

            EnsembleRow row;
            row.L = L;
            row.seed = seed;
            row.lambda = realized_fraction(labels);
            row.B = effective_tensor(sols, labels, basis);
            row.b = effective_pressure_coefficient(sols, labels, basis);
            for (const auto& so : sols) {
                row.mean_grad_res = std::max(row.mean_grad_res, so.res.mean_grad_res);
                row.iters = std::max(row.iters, so.iters);
                double pm = 0.0;
                long nf = 0;
                const auto& lc = labels.cell;
                for (long f = 0; f < static_cast<long>(lc.size()); ++f)
                    if (lc[f] == kFluid) {
                        pm += so.p.v[f];
                        ++nf;
                    }
                row.sigma_fluid_mean =
                    std::max(row.sigma_fluid_mean, std::abs(pm / nf));
            }
            shear_vals.push_back(row.B(0, 0));
            out.rows.push_back(std::move(row));
        }
        double mean = 0.0;
        for (double v : shear_vals) mean += v;
        mean /= shear_vals.size();
        double var = 0.0;
        for (double v : shear_vals) var += (v - mean) * (v - mean);
        var /= (shear_vals.size() - 1);
        out.L_values.push_back(L);
        out.mean_shear.push_back(mean);
        out.stddev_shear.push_back(std::sqrt(var));
    }
    out.stddev_decreasing =
        out.stddev_shear.size() >= 2 && out.stddev_shear.back() < out.stddev_shear.front();
    return out;
}

}  // namespace stokesrve
