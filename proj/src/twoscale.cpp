#include "stokesrve/twoscale.hpp"

#include <algorithm>
#include <cmath>

#include "stokesrve/errors.hpp"

namespace stokesrve {

namespace {

// d-linear interpolation of one staggered component on a periodic grid at a
// point y given in torus coordinates [0,L)^d.
double interp_face_component(const StaggeredField& psi, int c, const Vec3& y) {
    const Grid& g = psi.grid;
    const Extents fe = face_extents(g, c);
    std::array<int, 3> i0{0, 0, 0};
    std::array<double, 3> fr{0, 0, 0};
    for (int a = 0; a < g.dim; ++a) {
        const double t = y[a] / g.h - (a == c ? 0.0 : 0.5);
        const double fl = std::floor(t);
        i0[a] = static_cast<int>(fl);
        fr[a] = t - fl;
    }
    double acc = 0.0;
    const int corners = 1 << g.dim;
    for (int k = 0; k < corners; ++k) {
        double wgt = 1.0;
        std::array<int, 3> idx{0, 0, 0};
        for (int a = 0; a < g.dim; ++a) {
            const int da = (k >> a) & 1;
            wgt *= da ? fr[a] : 1.0 - fr[a];
            idx[a] = ((i0[a] + da) % g.n + g.n) % g.n;
        }
        acc += wgt * psi.comp[c][fe.flat(idx)];
    }
    return acc;
}

double interp_cell_scalar(const ScalarField& p, const Vec3& y) {
    const Grid& g = p.grid;
    const Extents ce = cell_extents(g);
    std::array<int, 3> i0{0, 0, 0};
    std::array<double, 3> fr{0, 0, 0};
    for (int a = 0; a < g.dim; ++a) {
        const double t = y[a] / g.h - 0.5;
        const double fl = std::floor(t);
        i0[a] = static_cast<int>(fl);
        fr[a] = t - fl;
    }
    double acc = 0.0;
    const int corners = 1 << g.dim;
    for (int k = 0; k < corners; ++k) {
        double wgt = 1.0;
        std::array<int, 3> idx{0, 0, 0};
        for (int a = 0; a < g.dim; ++a) {
            const int da = (k >> a) & 1;
            wgt *= da ? fr[a] : 1.0 - fr[a];
            idx[a] = ((i0[a] + da) % g.n + g.n) % g.n;
        }
        acc += wgt * p.v[ce.flat(idx)];
    }
    return acc;
}

Vec3 wrap_to_cell(const Vec3& x, double eps, double L, int dim) {
    Vec3 y{0, 0, 0};
    for (int a = 0; a < dim; ++a) {
        double t = std::fmod(x[a] / eps, L);
        if (t < 0) t += L;
        y[a] = t;
    }
    return y;
}

struct RowOp {
    // sparse operator rows (eval points x reduced unknowns)
    std::vector<Eigen::Triplet<double>> trip;
    long rows = 0;
};

}  // namespace

CorrectorSolution solve_homogenized(const Grid& grid, const Eigen::MatrixXd& Bbar,
                                    double lambda, const StaggeredField& f,
                                    const StaggeredField* g_field,
                                    const SolverOptions& opt) {
    if (grid.boundary != Boundary::DirichletZero)
        throw InvalidParams("homogenized solves live on Dirichlet grids");
    const int d = grid.dim;
    const StrainBasis basis = StrainBasis::canonical(d);
    const int m = basis.m();
    if (Bbar.rows() != m || Bbar.cols() != m)
        throw InvalidParams("Bbar must be m x m in the canonical basis");
    {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (Bbar + Bbar.transpose()));
        if (es.eigenvalues().minCoeff() < 1.0 - 1e-6)
            throw InvalidParams("Bbar must be coercive (eigenvalues >= 1)");
    }

    LabelField fluid = LabelField::all_fluid(grid);
    fluid.grid = grid;
    DofMaps maps = build_dof_maps(grid, fluid);
    const double hd = grid.cell_volume();

    // basis element -> off-diagonal pair slot, or -1 for diagonal type
    std::vector<int> slot_of(m, -1);
    for (int k = 0; k < m; ++k) {
        for (int s = 0; s < grid.pairs(); ++s) {
            auto [a, b] = pair_axes(s);
            if (std::abs(basis.E[k](a, b)) > 1e-14) slot_of[k] = s;
        }
    }

    // S_k: cell-located value of E_k : D(u) (off-diagonal parts averaged to
    // cells); P_k: native point values for off-diagonal elements; T: trace.
    const Extents ce = cell_extents(grid);
    std::vector<RowOp> S(m);
    std::vector<RowOp> P(m);
    RowOp T;
    T.rows = ce.size();
    for (int k = 0; k < m; ++k) {
        S[k].rows = ce.size();
        if (slot_of[k] >= 0) P[k].rows = pair_extents(grid, slot_of[k]).size();
    }

    // stash pair-point stencils for the cell-averaged rows
    std::vector<std::vector<StrainPoint>> ppoints(grid.pairs());
    for (int s = 0; s < grid.pairs(); ++s)
        ppoints[s].resize(pair_extents(grid, s).size());
    for_each_strain_point(grid, [&](const StrainPoint& pt) {
        if (pt.kind >= d) ppoints[pt.kind - d][pt.index] = pt;
    });

    auto push_term = [&](RowOp& op, long row, int comp, long face, double coeff) {
        const long qi = maps.face_q[comp][face];
        if (qi >= 0)
            op.trip.emplace_back(static_cast<int>(row), static_cast<int>(qi), coeff);
    };

    const double sqrt2 = std::sqrt(2.0);
    std::array<int, 3> mm{0, 0, 0};
    for (mm[2] = 0; mm[2] < ce.e[2]; ++mm[2])
        for (mm[1] = 0; mm[1] < ce.e[1]; ++mm[1])
            for (mm[0] = 0; mm[0] < ce.e[0]; ++mm[0]) {
                const long row = ce.flat(mm);
                for_each_div_term(grid, mm, [&](int c, long fc, double coeff) {
                    // D_cc / trace terms share the divergence stencil
                    push_term(T, row, c, fc, coeff);
                    for (int k = 0; k < m; ++k)
                        if (slot_of[k] < 0 && std::abs(basis.E[k](c, c)) > 1e-14)
                            push_term(S[k], row, c, fc, basis.E[k](c, c) * coeff);
                });
                for (int k = 0; k < m; ++k) {
                    if (slot_of[k] < 0) continue;
                    const int s = slot_of[k];
                    auto [a, b] = pair_axes(s);
                    const Extents pe = pair_extents(grid, s);
                    for (int da = 0; da <= 1; ++da)
                        for (int db = 0; db <= 1; ++db) {
                            std::array<int, 3> pm = mm;
                            pm[a] = mm[a] + da;
                            pm[b] = mm[b] + db;
                            const StrainPoint& pt = ppoints[s][pe.flat(pm)];
                            for (int t = 0; t < pt.nterms; ++t)
                                push_term(S[k], row, pt.terms[t].comp, pt.terms[t].face,
                                          sqrt2 * 0.25 * pt.terms[t].coeff);
                        }
                }
            }
    for (int k = 0; k < m; ++k) {
        if (slot_of[k] < 0) continue;
        const int s = slot_of[k];
        for (const auto& pt : ppoints[s])
            for (int t = 0; t < pt.nterms; ++t)
                push_term(P[k], pt.index, pt.terms[t].comp, pt.terms[t].face,
                          sqrt2 * pt.terms[t].coeff);
    }

    auto to_sparse = [&](RowOp& op) {
        Eigen::SparseMatrix<double> sm(op.rows, maps.nq);
        sm.setFromTriplets(op.trip.begin(), op.trip.end());
        op.trip.clear();
        op.trip.shrink_to_fit();
        return sm;
    };
    std::vector<Eigen::SparseMatrix<double>> Ss(m), Ps(m);
    for (int k = 0; k < m; ++k) {
        Ss[k] = to_sparse(S[k]);
        if (slot_of[k] >= 0) Ps[k] = to_sparse(P[k]);
    }
    Eigen::SparseMatrix<double> Ts = to_sparse(T);

    Eigen::SparseMatrix<double> A(maps.nq, maps.nq);
    for (int k = 0; k < m; ++k)
        for (int l = k; l < m; ++l) {
            const double factor = (k == l ? 2.0 : 4.0) * hd * Bbar(k, l);
            if (std::abs(factor) < 1e-300) continue;
            Eigen::SparseMatrix<double> contrib;
            if (k == l && slot_of[k] >= 0)
                contrib = Eigen::SparseMatrix<double>(Ps[k].transpose() * Ps[k]);
            else
                contrib = Eigen::SparseMatrix<double>(Ss[k].transpose() * Ss[l]);
            if (k != l) {
                Eigen::SparseMatrix<double> sym = contrib.transpose();
                contrib = contrib + sym;
                A += Eigen::SparseMatrix<double>(0.5 * factor * contrib);
            } else {
                A += Eigen::SparseMatrix<double>(factor * contrib);
            }
        }
    // trace augmentation: vanishes on the divergence-free manifold, keeps A
    // positive definite off it
    A += Eigen::SparseMatrix<double>((2.0 / d) * hd *
                                     Eigen::SparseMatrix<double>(Ts.transpose() * Ts));

    DiscreteSystem ds;
    ds.maps = maps;
    ds.sys.A = std::move(A);

    std::vector<Eigen::Triplet<double>> btrip;
    std::array<int, 3> bm{0, 0, 0};
    for (bm[2] = 0; bm[2] < ce.e[2]; ++bm[2])
        for (bm[1] = 0; bm[1] < ce.e[1]; ++bm[1])
            for (bm[0] = 0; bm[0] < ce.e[0]; ++bm[0]) {
                const long prow = maps.cell_p[ce.flat(bm)];
                for_each_div_term(grid, bm, [&](int c, long fc, double coeff) {
                    const long qi = maps.face_q[c][fc];
                    if (qi >= 0)
                        btrip.emplace_back(static_cast<int>(prow), static_cast<int>(qi),
                                           -hd * coeff);
                });
            }
    ds.sys.B.resize(maps.np, maps.nq);
    ds.sys.B.setFromTriplets(btrip.begin(), btrip.end());

    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(maps.nq);
    for (int c = 0; c < d; ++c) {
        const Extents fe = face_extents(grid, c);
        for (long fc = 0; fc < fe.size(); ++fc) {
            const long qi = maps.face_q[c][fc];
            if (qi < 0) continue;
            double val = (1.0 - lambda) * f.comp[c][fc];
            if (g_field) val += lambda * g_field->comp[c][fc];
            rhs[qi] += hd * val;
        }
    }
    ds.sys.rhs_q = std::move(rhs);
    ds.sys.rhs_p = Eigen::VectorXd::Zero(maps.np);
    ds.sys.pressure_const_null = true;
    ds.sys.pressure_scale = hd / 2.0;

    SaddleOptions sopt;
    sopt.tol = opt.tol;
    sopt.max_iter = opt.max_iter > 0 ? opt.max_iter : default_max_iter(grid);
    sopt.precon = opt.precon;
    sopt.auto_project = opt.auto_project;
    SaddleResult sr = saddle_solve(ds.sys, sopt);
    return finalize_solution(ds, fluid, Eigen::MatrixXd(), sr.q, sr.p, sr);
}

StaggeredField default_body_force(const Grid& grid) {
    return sample_on_faces(grid, [&](int c, const Vec3& x) {
        if (c == 0) return std::sin(M_PI * x[0]) * std::sin(M_PI * x[1]);
        if (c == 1) return std::cos(M_PI * x[0]) * std::cos(M_PI * x[1]);
        return 0.0;
    });
}

StaggeredField constant_field(const Grid& grid, const Vec3& value) {
    return sample_on_faces(grid, [&](int c, const Vec3&) { return value[c]; });
}

TwoScaleRow two_scale_errors(const CorrectorSolution& ueps, const LabelField& eps_labels,
                             const CorrectorSolution& hom, const TwoScaleSetup& setup,
                             double eps) {
    const Grid& G = ueps.u.grid;
    if (!hom.u.grid.same_as(G) || !eps_labels.grid.same_as(G))
        throw GridMismatch("eps solution, labels and homogenized grid must agree");
    if (setup.correctors.size() != static_cast<std::size_t>(setup.basis.m()))
        throw GridMismatch("need one corrector per basis element");
    const int d = G.dim;
    const int m = setup.basis.m();
    const double cell_L = setup.cell_grid.extent;
    const Extents ce = cell_extents(G);
    const double hd = G.cell_volume();

    TwoScaleRow row;
    row.eps = eps;
    row.lambda_eps = realized_fraction(eps_labels);

    // nabla_E ubar per basis element at cells
    StrainField Du = sym_grad(hom.u);
    std::vector<std::vector<double>> F(m, std::vector<double>(ce.size(), 0.0));
    std::array<int, 3> mm{0, 0, 0};
    for (mm[2] = 0; mm[2] < ce.e[2]; ++mm[2])
        for (mm[1] = 0; mm[1] < ce.e[1]; ++mm[1])
            for (mm[0] = 0; mm[0] < ce.e[0]; ++mm[0]) {
                Eigen::MatrixXd S = strain_at_cell(Du, mm);
                for (int k = 0; k < m; ++k)
                    F[k][ce.flat(mm)] = (setup.basis.E[k].array() * S.array()).sum();
            }

    // F at a face: average of the adjacent cells (one-sided at the boundary)
    auto F_at_face = [&](int k, int c, const std::array<int, 3>& fm) {
        std::array<int, 3> up = fm, dn = fm;
        dn[c] = fm[c] - 1;
        double acc = 0.0;
        int cnt = 0;
        if (up[c] <= G.n - 1) {
            acc += F[k][ce.flat(up)];
            ++cnt;
        }
        if (dn[c] >= 0) {
            acc += F[k][ce.flat(dn)];
            ++cnt;
        }
        return cnt > 0 ? acc / cnt : 0.0;
    };

    // two-scale velocity error and the weak-convergence proxy
    StaggeredField w = StaggeredField::zeros(G);
    StaggeredField diff = StaggeredField::zeros(G);
    const int nbox = 4;
    std::vector<double> box_sum(static_cast<std::size_t>(std::pow(nbox, d)) * d, 0.0);
    std::vector<long> box_cnt(box_sum.size(), 0);
    for (int c = 0; c < d; ++c) {
        const Extents fe = face_extents(G, c);
        std::array<int, 3> fm{0, 0, 0};
        for (fm[2] = 0; fm[2] < fe.e[2]; ++fm[2])
            for (fm[1] = 0; fm[1] < fe.e[1]; ++fm[1])
                for (fm[0] = 0; fm[0] < fe.e[0]; ++fm[0]) {
                    const long fc = fe.flat(fm);
                    const Vec3 x = face_center(G, c, fm);
                    const Vec3 y = wrap_to_cell(x, eps, cell_L, d);
                    double corr = 0.0;
                    for (int k = 0; k < m; ++k) {
                        const double psi =
                            interp_face_component(setup.correctors[k].u, c, y);
                        corr += psi * F_at_face(k, c, fm);
                    }
                    const double dv = ueps.u.comp[c][fc] - hom.u.comp[c][fc];
                    diff.comp[c][fc] = dv;
                    w.comp[c][fc] = dv - eps * corr;

                    long bidx = 0;
                    for (int a = d - 1; a >= 0; --a) {
                        int ba = static_cast<int>((x[a] - G.origin[a]) / G.extent * nbox);
                        ba = std::clamp(ba, 0, nbox - 1);
                        bidx = bidx * nbox + ba;
                    }
                    box_sum[bidx * d + c] += dv;
                    box_cnt[bidx * d + c] += 1;
                }
    }
    for (std::size_t i = 0; i < box_sum.size(); ++i)
        if (box_cnt[i] > 0)
            row.weak_avg_err =
                std::max(row.weak_avg_err, std::abs(box_sum[i] / box_cnt[i]));

    // discrete H1 norm of w: L2 over faces plus full-gradient sum (diagonal
    // parts at cells, off-diagonal one-sided terms skipped on the walls)
    double l2 = inner(w, w);
    double grad2 = 0.0;
    for (mm[2] = 0; mm[2] < ce.e[2]; ++mm[2])
        for (mm[1] = 0; mm[1] < ce.e[1]; ++mm[1])
            for (mm[0] = 0; mm[0] < ce.e[0]; ++mm[0])
                for (int c = 0; c < d; ++c) {
                    const Extents fe = face_extents(G, c);
                    std::array<int, 3> up = mm;
                    up[c] = mm[c] + 1;
                    const double dd =
                        (w.comp[c][fe.flat(up)] - w.comp[c][fe.flat(mm)]) / G.h;
                    grad2 += hd * dd * dd;
                }
    for (int slot = 0; slot < G.pairs(); ++slot) {
        auto [a, b] = pair_axes(slot);
        const Extents pe = pair_extents(G, slot);
        const Extents fa = face_extents(G, a);
        const Extents fb = face_extents(G, b);
        std::array<int, 3> pm{0, 0, 0};
        for (pm[2] = 0; pm[2] < pe.e[2]; ++pm[2])
            for (pm[1] = 0; pm[1] < pe.e[1]; ++pm[1])
                for (pm[0] = 0; pm[0] < pe.e[0]; ++pm[0]) {
                    if (pm[a] < 1 || pm[a] > G.n - 1 || pm[b] < 1 || pm[b] > G.n - 1)
                        continue;
                    std::array<int, 3> lo = pm;
                    lo[b] = pm[b] - 1;
                    const double dba =
                        (w.comp[a][fa.flat(pm)] - w.comp[a][fa.flat(lo)]) / G.h;
                    lo = pm;
                    lo[a] = pm[a] - 1;
                    const double dab =
                        (w.comp[b][fb.flat(pm)] - w.comp[b][fb.flat(lo)]) / G.h;
                    grad2 += hd * (dba * dba + dab * dab);
                }
    }
    row.h1_err_vel = std::sqrt(l2 + grad2);

    // pressure error with the optimal additive constant over fluid cells
    double sum = 0.0;
    long nfluid = 0;
    std::vector<double> qv(ce.size(), 0.0);
    for (mm[2] = 0; mm[2] < ce.e[2]; ++mm[2])
        for (mm[1] = 0; mm[1] < ce.e[1]; ++mm[1])
            for (mm[0] = 0; mm[0] < ce.e[0]; ++mm[0]) {
                const long cf = ce.flat(mm);
                if (eps_labels.cell[cf] != kFluid) continue;
                const Vec3 x = cell_center(G, mm);
                const Vec3 y = wrap_to_cell(x, eps, cell_L, d);
                double val = ueps.p.v[cf] - hom.p.v[cf];
                for (int k = 0; k < m; ++k) {
                    val -= setup.bbar[k] * F[k][cf];
                    val -= interp_cell_scalar(setup.correctors[k].p, y) * F[k][cf];
                }
                qv[cf] = val;
                sum += val;
                ++nfluid;
            }
    if (nfluid > 0) {
        const double kappa = sum / nfluid;
        double acc = 0.0, acc0 = 0.0;
        for (long cf = 0; cf < ce.size(); ++cf)
            if (eps_labels.cell[cf] == kFluid) {
                const double e = qv[cf] - kappa;
                acc += hd * e * e;
                acc0 += hd * qv[cf] * qv[cf];
            }
        row.l2_err_press = std::sqrt(acc);
        row.l2_err_press_k0 = std::sqrt(acc0);
    }
    return row;
}

TwoScaleReport run_two_scale(const TwoScaleConfig& cfg) {
    RsaParams rp;
    rp.dim = cfg.dim;
    rp.cell_length = cfg.cell_L;
    rp.target_fraction = cfg.lambda;
    rp.gap = cfg.gap;
    rp.seed = cfg.seed;
    InclusionSet set = rsa_generate(rp);

    TwoScaleSetup setup;
    setup.cell_grid = Grid::periodic(cfg.dim, cfg.cell_N, cfg.cell_L);
    setup.cell_labels = rasterize(set, setup.cell_grid);
    setup.basis = StrainBasis::canonical(cfg.dim);
    SolverOptions opt;
    opt.tol = cfg.tol;
    for (const auto& E : setup.basis.E)
        setup.correctors.push_back(
            solve_corrector(setup.cell_grid, setup.cell_labels, E, opt));
    setup.Bbar = effective_tensor(setup.correctors, setup.cell_labels, setup.basis);
    setup.bbar =
        effective_pressure_coefficient(setup.correctors, setup.cell_labels, setup.basis);
    setup.lambda = realized_fraction(setup.cell_labels);

    Box U;
    U.lo = {0, 0, 0};
    U.hi = {1, 1, cfg.dim == 3 ? 1.0 : 0.0};
    Grid GU = Grid::dirichlet(cfg.dim, cfg.box_N, U);

    StaggeredField f = cfg.sediment ? StaggeredField::zeros(GU) : default_body_force(GU);
    StaggeredField g = constant_field(GU, Vec3{0.0, -1.0, 0.0});

    CorrectorSolution hom = solve_homogenized(GU, setup.Bbar, setup.lambda, f,
                                              cfg.sediment ? &g : nullptr, opt);

    TwoScaleReport report;
    report.lambda = setup.lambda;
    report.Bbar = setup.Bbar;
    report.bbar = setup.bbar;
    report.seed = cfg.seed;
    report.f_descriptor = cfg.sediment ? "f=0, g=(0,-1) constant buoyancy"
                                       : "f=(sin pi x sin pi y, cos pi x cos pi y)";

    std::vector<double> ladder = cfg.eps_ladder;
    std::sort(ladder.begin(), ladder.end(), std::greater<double>());
    for (double eps : ladder) {
        InclusionSet restricted = restrict_to_box(set, eps, U);
        LabelField labels_eps = rasterize(restricted, GU);
        CorrectorSolution ueps =
            cfg.sediment ? solve_weak_sedimentation(GU, labels_eps, f, g, opt)
                         : solve_eps_problem(GU, labels_eps, f, opt);
        report.rows.push_back(two_scale_errors(ueps, labels_eps, hom, setup, eps));
    }
    return report;
}

}  // namespace stokesrve
