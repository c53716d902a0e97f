#include "stokesrve/solver.hpp"

#include <algorithm>
#include <cmath>

#include "stokesrve/errors.hpp"

namespace stokesrve {

void theta_coefficients(int dim, int c, const Vec3& r, int* idx, double* coeff,
                        int* count) {
    if (dim == 2) {
        // Theta = [[0, -t0], [t0, 0]]
        idx[0] = 0;
        coeff[0] = c == 0 ? -r[1] : r[0];
        *count = 1;
        return;
    }
    // Theta(r) = t x r
    switch (c) {
        case 0:
            idx[0] = 1; coeff[0] = r[2];
            idx[1] = 2; coeff[1] = -r[1];
            break;
        case 1:
            idx[0] = 2; coeff[0] = r[0];
            idx[1] = 0; coeff[1] = -r[2];
            break;
        default:
            idx[0] = 0; coeff[0] = r[1];
            idx[1] = 1; coeff[1] = -r[0];
            break;
    }
    *count = 2;
}

namespace {

// one face expanded into reduced unknowns: value = sum coeff_i q_i + constant
struct FaceExpansion {
    int count = 0;
    long idx[4];
    double coeff[4];
    double constant = 0.0;
};

inline Vec3 face_offset(const Grid& g, int comp, const std::array<int, 3>& m,
                        const Vec3& xn) {
    Vec3 xf = face_center(g, comp, m);
    return g.boundary == Boundary::Periodic ? min_image(xf, xn, g.extent, g.dim)
                                            : vsub(xf, xn);
}

FaceExpansion expand_face(const DofMaps& maps, const LabelField& labels,
                          const Eigen::MatrixXd& E, int comp,
                          const std::array<int, 3>& m) {
    const Grid& g = maps.grid;
    const Extents fe = face_extents(g, comp);
    const long f = fe.flat(m);
    FaceExpansion ex;
    const long qi = maps.face_q[comp][f];
    if (qi >= 0) {
        ex.idx[0] = qi;
        ex.coeff[0] = 1.0;
        ex.count = 1;
        return ex;
    }
    if (qi == DofMaps::kPinned) return ex;  // value identically zero
    const std::int32_t n = maps.face_incl[comp][f];
    const Vec3 r = face_offset(g, comp, m, labels.centers[n]);
    ex.idx[0] = maps.v_index(n, comp);
    ex.coeff[0] = 1.0;
    int tidx[2];
    double tcoef[2];
    int tcount = 0;
    theta_coefficients(g.dim, comp, r, tidx, tcoef, &tcount);
    for (int k = 0; k < tcount; ++k) {
        ex.idx[1 + k] = maps.th_index(n, tidx[k]);
        ex.coeff[1 + k] = tcoef[k];
    }
    ex.count = 1 + tcount;
    if (E.size() > 0) {
        double er = 0.0;
        for (int j = 0; j < g.dim; ++j) er += E(comp, j) * r[j];
        ex.constant = -er;
    }
    return ex;
}

}  // namespace

DofMaps build_dof_maps(const Grid& grid, const LabelField& labels) {
    DofMaps maps;
    maps.grid = grid;
    maps.n_incl = labels.n_inclusions;
    maps.rigid_per = grid.dim + grid.pairs();

    long q = 0;
    for (int c = 0; c < grid.dim; ++c) {
        const Extents fe = face_extents(grid, c);
        maps.face_q[c].assign(fe.size(), 0);
        maps.face_incl[c].assign(fe.size(), -1);
        std::array<int, 3> m{0, 0, 0};
        for (m[2] = 0; m[2] < fe.e[2]; ++m[2])
            for (m[1] = 0; m[1] < fe.e[1]; ++m[1])
                for (m[0] = 0; m[0] < fe.e[0]; ++m[0]) {
                    const long f = fe.flat(m);
                    const FaceInfo fi = face_info(grid, labels, c, m);
                    switch (fi.kind) {
                        case FaceKind::Pinned:
                            maps.face_q[c][f] = DofMaps::kPinned;
                            break;
                        case FaceKind::Interior:
                            maps.face_q[c][f] = DofMaps::kInterior;
                            maps.face_incl[c][f] = fi.incl;
                            break;
                        case FaceKind::Fluid:
                            maps.face_q[c][f] = q++;
                            break;
                    }
                }
    }
    maps.n_fluid_faces = q;
    maps.nq = q + static_cast<long>(maps.n_incl) * maps.rigid_per;

    const Extents ce = cell_extents(grid);
    maps.cell_p.assign(ce.size(), -1);
    long p = 0;
    for (long f = 0; f < ce.size(); ++f)
        if (labels.cell[f] == kFluid) maps.cell_p[f] = p++;
    maps.np = p;
    if (p == 0) throw SingularSystem("no fluid cells: nothing to solve");
    return maps;
}

namespace {

DiscreteSystem build_system(const Grid& grid, const LabelField& labels,
                            const Eigen::MatrixXd& E, const StaggeredField* f_load,
                            const StaggeredField* g_load) {
    if (!labels.grid.same_as(grid))
        throw InconsistentInputs("labels were rasterized on a different grid");
    if (E.size() > 0) {
        if (E.rows() != grid.dim || E.cols() != grid.dim)
            throw InvalidParams("E must be d x d");
        const double nrm = E.norm();
        if ((E - E.transpose()).norm() > 1e-12 * (nrm + 1e-300))
            throw InvalidParams("E must be symmetric");
        if (std::abs(E.trace()) > 1e-12 * (nrm + 1e-300))
            throw InvalidParams("E must be trace-free");
    }

    DiscreteSystem ds;
    ds.maps = build_dof_maps(grid, labels);
    const DofMaps& maps = ds.maps;

    const int d = grid.dim;
    const double hd = grid.cell_volume();

    std::vector<Eigen::Triplet<double>> atrip;
    atrip.reserve(static_cast<std::size_t>(maps.nq) * 12);
    Eigen::VectorXd rhs_q = Eigen::VectorXd::Zero(maps.nq);

    const Extents ce = cell_extents(grid);

    // momentum block: 2 sum_pts w (D u + E)_pt : (D v)_pt
    for_each_strain_point(grid, [&](const StrainPoint& pt) {
        long row_idx[12];
        double row_coef[12];
        int nrow = 0;
        double cnst = 0.0;
        for (int t = 0; t < pt.nterms; ++t) {
            const StrainTerm& st = pt.terms[t];
            const Extents fe = face_extents(grid, st.comp);
            FaceExpansion ex = expand_face(maps, labels, E, st.comp, fe.unflat(st.face));
            for (int k = 0; k < ex.count; ++k) {
                row_idx[nrow] = ex.idx[k];
                row_coef[nrow] = st.coeff * ex.coeff[k];
                ++nrow;
            }
            cnst += st.coeff * ex.constant;
        }
        double e_pt = 0.0;
        if (E.size() > 0) {
            if (pt.kind < d) {
                e_pt = E(pt.kind, pt.kind);
            } else {
                auto [a, b] = pair_axes(pt.kind - d);
                e_pt = E(a, b);
            }
        }
        const double w2 = 2.0 * pt.weight;
        const double dval = cnst + e_pt;
        for (int i = 0; i < nrow; ++i) {
            for (int j = 0; j < nrow; ++j)
                atrip.emplace_back(static_cast<int>(row_idx[i]), static_cast<int>(row_idx[j]),
                                   w2 * row_coef[i] * row_coef[j]);
            rhs_q[row_idx[i]] -= w2 * dval * row_coef[i];
        }
    });

    ds.sys.A.resize(maps.nq, maps.nq);
    ds.sys.A.setFromTriplets(atrip.begin(), atrip.end());
    atrip.clear();
    atrip.shrink_to_fit();

    // constraint block: -h^d div u = 0 on fluid cells
    std::vector<Eigen::Triplet<double>> btrip;
    btrip.reserve(static_cast<std::size_t>(maps.np) * 2 * d);
    std::array<int, 3> m{0, 0, 0};
    for (m[2] = 0; m[2] < ce.e[2]; ++m[2])
        for (m[1] = 0; m[1] < ce.e[1]; ++m[1])
            for (m[0] = 0; m[0] < ce.e[0]; ++m[0]) {
                const long prow = maps.cell_p[ce.flat(m)];
                if (prow < 0) continue;
                for_each_div_term(grid, m, [&](int c, long f, double coeff) {
                    const long qi = maps.face_q[c][f];
                    if (qi == DofMaps::kPinned) return;
                    if (qi == DofMaps::kInterior)
                        throw InconsistentInputs(
                            "fluid cell touches an inclusion-interior face");
                    btrip.emplace_back(static_cast<int>(prow), static_cast<int>(qi),
                                       -hd * coeff);
                });
            }
    ds.sys.B.resize(maps.np, maps.nq);
    ds.sys.B.setFromTriplets(btrip.begin(), btrip.end());

    // loads
    auto add_load = [&](const StaggeredField& load, bool on_fluid) {
        if (!load.grid.same_as(grid)) throw ShapeMismatch("load field grid mismatch");
        for (int c = 0; c < d; ++c) {
            const Extents fe = face_extents(grid, c);
            std::array<int, 3> mm{0, 0, 0};
            for (mm[2] = 0; mm[2] < fe.e[2]; ++mm[2])
                for (mm[1] = 0; mm[1] < fe.e[1]; ++mm[1])
                    for (mm[0] = 0; mm[0] < fe.e[0]; ++mm[0]) {
                        const long f = fe.flat(mm);
                        const long qi = maps.face_q[c][f];
                        const double val = hd * load.comp[c][f];
                        if (val == 0.0) continue;
                        if (on_fluid) {
                            if (qi >= 0) rhs_q[qi] += val;
                        } else if (qi == DofMaps::kInterior) {
                            FaceExpansion ex = expand_face(maps, labels, E, c, mm);
                            for (int k = 0; k < ex.count; ++k)
                                rhs_q[ex.idx[k]] += val * ex.coeff[k];
                        }
                    }
        }
    };
    if (f_load) add_load(*f_load, true);
    if (g_load) add_load(*g_load, false);

    ds.sys.rhs_q = std::move(rhs_q);
    ds.sys.rhs_p = Eigen::VectorXd::Zero(maps.np);

    // null-space descriptors
    if (grid.boundary == Boundary::Periodic) {
        for (int c = 0; c < d; ++c) {
            Eigen::VectorXd nv = Eigen::VectorXd::Zero(maps.nq);
            const Extents fe = face_extents(grid, c);
            for (long f = 0; f < fe.size(); ++f)
                if (maps.face_q[c][f] >= 0) nv[maps.face_q[c][f]] = 1.0;
            for (int n = 0; n < maps.n_incl; ++n) nv[maps.v_index(n, c)] = 1.0;
            ds.sys.null_q.push_back(std::move(nv));
        }
    }
    ds.sys.pressure_const_null = labels.n_inclusions == 0;
    ds.sys.pressure_scale = hd / 2.0;
    return ds;
}

}  // namespace

double rigid_face_value(const RigidMotion& rm, const Eigen::MatrixXd& E, const Vec3& r,
                        int c) {
    const int dim = static_cast<int>(rm.V.size());
    double v = rm.V[c];
    int tidx[2];
    double tcoef[2];
    int tcount = 0;
    theta_coefficients(dim, c, r, tidx, tcoef, &tcount);
    // rotation parameters from the stored skew matrix
    double tpar[3] = {0, 0, 0};
    if (dim == 2) {
        tpar[0] = rm.Theta(1, 0);
    } else {
        tpar[0] = rm.Theta(2, 1);
        tpar[1] = rm.Theta(0, 2);
        tpar[2] = rm.Theta(1, 0);
    }
    for (int k = 0; k < tcount; ++k) v += tcoef[k] * tpar[tidx[k]];
    if (E.size() > 0) {
        double er = 0.0;
        for (int j = 0; j < dim; ++j) er += E(c, j) * r[j];
        v += -er;
    }
    return v;
}

DiscreteSystem build_corrector_system(const Grid& grid, const LabelField& labels,
                                      const Eigen::MatrixXd& E) {
    if (grid.boundary != Boundary::Periodic)
        throw InvalidParams("corrector problems live on periodic grids");
    return build_system(grid, labels, E, nullptr, nullptr);
}

DiscreteSystem build_eps_system(const Grid& grid, const LabelField& labels,
                                const StaggeredField& f) {
    if (grid.boundary != Boundary::DirichletZero)
        throw InvalidParams("eps-problems live on Dirichlet grids");
    return build_system(grid, labels, Eigen::MatrixXd(), &f, nullptr);
}

DiscreteSystem build_sedimentation_system(const Grid& grid, const LabelField& labels,
                                          const StaggeredField& f,
                                          const StaggeredField& g) {
    if (grid.boundary != Boundary::DirichletZero)
        throw InvalidParams("sedimentation problems live on Dirichlet grids");
    return build_system(grid, labels, Eigen::MatrixXd(), &f, &g);
}

int default_max_iter(const Grid& grid) {
    const double nd = std::pow(static_cast<double>(grid.n), grid.dim / 2.0);
    return std::max(200, static_cast<int>(20.0 * nd));
}

CorrectorSolution finalize_solution(const DiscreteSystem& ds, const LabelField& labels,
                                    const Eigen::MatrixXd& E, const Eigen::VectorXd& q_in,
                                    const Eigen::VectorXd& p_in, const SaddleResult& sr) {
    const DofMaps& maps = ds.maps;
    const Grid& grid = maps.grid;
    const int d = grid.dim;

    CorrectorSolution sol;
    sol.E = E.size() > 0 ? E : Eigen::MatrixXd::Zero(d, d);
    sol.iters = sr.iters;
    sol.residual_history = sr.history;
    sol.volume = std::pow(grid.extent, d);

    // residuals with the raw multiplier (the pressure shift below is not a
    // null direction once inclusions are present)
    Eigen::VectorXd rq = ds.sys.rhs_q - ds.sys.A * q_in;
    if (maps.np > 0) rq -= ds.sys.B.transpose() * p_in;
    const double rhs_norm =
        std::sqrt(ds.sys.rhs_q.squaredNorm() + ds.sys.rhs_p.squaredNorm());
    const double rscale = std::max(rhs_norm, 1e-300);
    sol.res.momentum_res = sr.rel_residual;
    for (int n = 0; n < maps.n_incl; ++n) {
        for (int c = 0; c < d; ++c)
            sol.res.force_res =
                std::max(sol.res.force_res, std::abs(rq[maps.v_index(n, c)]) / rscale);
        for (int k = 0; k < grid.pairs(); ++k)
            sol.res.torque_res =
                std::max(sol.res.torque_res, std::abs(rq[maps.th_index(n, k)]) / rscale);
    }
    const double qaq = q_in.dot(ds.sys.A * q_in);
    const double qf = q_in.dot(ds.sys.rhs_q);
    sol.res.energy_res =
        std::abs(qaq - qf) / std::max({std::abs(qaq), std::abs(qf), 1e-300});

    // anchor: periodic correctors get zero cell-mean per component, applied
    // to the reduced unknowns before expansion so interior faces stay exact
    Eigen::VectorXd q = q_in;
    if (grid.boundary == Boundary::Periodic) {
        for (int c = 0; c < d; ++c) {
            const Extents fe = face_extents(grid, c);
            // field mean counts every face once (interior ones via rigid data)
            double sum = 0.0;
            std::array<int, 3> m{0, 0, 0};
            for (m[2] = 0; m[2] < fe.e[2]; ++m[2])
                for (m[1] = 0; m[1] < fe.e[1]; ++m[1])
                    for (m[0] = 0; m[0] < fe.e[0]; ++m[0]) {
                        FaceExpansion ex = expand_face(maps, labels, sol.E, c, m);
                        double v = ex.constant;
                        for (int k = 0; k < ex.count; ++k) v += ex.coeff[k] * q[ex.idx[k]];
                        sum += v;
                    }
            const double mean = sum / static_cast<double>(fe.size());
            for (long f = 0; f < fe.size(); ++f)
                if (maps.face_q[c][f] >= 0) q[maps.face_q[c][f]] -= mean;
            for (int n = 0; n < maps.n_incl; ++n) q[maps.v_index(n, c)] -= mean;
        }
    }

    // expand to the full face field
    sol.u = StaggeredField::zeros(grid);
    for (int c = 0; c < d; ++c) {
        const Extents fe = face_extents(grid, c);
        std::array<int, 3> m{0, 0, 0};
        for (m[2] = 0; m[2] < fe.e[2]; ++m[2])
            for (m[1] = 0; m[1] < fe.e[1]; ++m[1])
                for (m[0] = 0; m[0] < fe.e[0]; ++m[0]) {
                    FaceExpansion ex = expand_face(maps, labels, sol.E, c, m);
                    double v = 0.0;
                    for (int k = 0; k < ex.count; ++k) v += ex.coeff[k] * q[ex.idx[k]];
                    v += ex.constant;
                    sol.u.comp[c][fe.flat(m)] = v;
                }
    }

    // rigid motions
    sol.rigid.resize(maps.n_incl);
    for (int n = 0; n < maps.n_incl; ++n) {
        RigidMotion rm;
        rm.V = Eigen::VectorXd::Zero(d);
        for (int c = 0; c < d; ++c) rm.V[c] = q[maps.v_index(n, c)];
        rm.Theta = Eigen::MatrixXd::Zero(d, d);
        if (d == 2) {
            const double t = q[maps.th_index(n, 0)];
            rm.Theta(1, 0) = t;
            rm.Theta(0, 1) = -t;
        } else {
            const double t0 = q[maps.th_index(n, 0)];
            const double t1 = q[maps.th_index(n, 1)];
            const double t2 = q[maps.th_index(n, 2)];
            rm.Theta(2, 1) = t0;
            rm.Theta(1, 2) = -t0;
            rm.Theta(0, 2) = t1;
            rm.Theta(2, 0) = -t1;
            rm.Theta(1, 0) = t2;
            rm.Theta(0, 1) = -t2;
        }
        sol.rigid[n] = std::move(rm);
    }

    // pressure: scatter and shift to zero fluid mean
    sol.p = ScalarField::zeros(grid);
    if (maps.np > 0) {
        double mean = 0.0;
        for (long f = 0; f < static_cast<long>(maps.cell_p.size()); ++f)
            if (maps.cell_p[f] >= 0) mean += p_in[maps.cell_p[f]];
        mean /= static_cast<double>(maps.np);
        sol.pressure_shift = mean;
        for (long f = 0; f < static_cast<long>(maps.cell_p.size()); ++f)
            if (maps.cell_p[f] >= 0) sol.p.v[f] = p_in[maps.cell_p[f]] - mean;
    }

    // divergence residual over constrained cells
    ScalarField dv = divergence(sol.u);
    double data_scale = sol.E.norm();
    data_scale = std::max(data_scale, rhs_norm / std::max(grid.cell_volume(), 1e-300) /
                                          std::sqrt(static_cast<double>(maps.nq)));
    data_scale = std::max(data_scale, 1e-300);
    double max_div = 0.0;
    for (long f = 0; f < static_cast<long>(maps.cell_p.size()); ++f)
        if (maps.cell_p[f] >= 0) max_div = std::max(max_div, std::abs(dv.v[f]));
    sol.res.div_res = max_div / data_scale;

    // cell-average of the full velocity gradient (periodic: telescopes to 0)
    if (grid.boundary == Boundary::Periodic) {
        for (int a = 0; a < d; ++a) {
            const Extents fe = face_extents(grid, a);
            for (int b = 0; b < d; ++b) {
                double acc = 0.0;
                std::array<int, 3> m{0, 0, 0};
                for (m[2] = 0; m[2] < fe.e[2]; ++m[2])
                    for (m[1] = 0; m[1] < fe.e[1]; ++m[1])
                        for (m[0] = 0; m[0] < fe.e[0]; ++m[0]) {
                            std::array<int, 3> lo = m;
                            lo[b] = (m[b] - 1 + grid.n) % grid.n;
                            acc += sol.u.comp[a][fe.flat(m)] - sol.u.comp[a][fe.flat(lo)];
                        }
                const double mean =
                    acc / grid.h / static_cast<double>(fe.size());
                sol.res.mean_grad_res =
                    std::max(sol.res.mean_grad_res, std::abs(mean) / data_scale);
            }
        }
    }

    // energy sum_pts w |D(u)+E|^2
    StrainField G = sym_grad(sol.u);
    if (E.size() > 0) {
        std::array<double, 9> erow{};
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) erow[i * d + j] = E(i, j);
        add_constant_strain(G, erow.data(), d);
    }
    sol.energy = strain_inner(G, G);
    return sol;
}

namespace {

CorrectorSolution run(const DiscreteSystem& ds, const LabelField& labels,
                      const Eigen::MatrixXd& E, const SolverOptions& opt) {
    SaddleOptions sopt;
    sopt.tol = opt.tol;
    sopt.max_iter = opt.max_iter > 0 ? opt.max_iter : default_max_iter(ds.maps.grid);
    sopt.precon = opt.precon;
    sopt.auto_project = opt.auto_project;
    SaddleResult sr = saddle_solve(ds.sys, sopt);
    return finalize_solution(ds, labels, E, sr.q, sr.p, sr);
}

}  // namespace

CorrectorSolution solve_corrector(const Grid& grid, const LabelField& labels,
                                  const Eigen::MatrixXd& E, const SolverOptions& opt) {
    DiscreteSystem ds = build_corrector_system(grid, labels, E);
    return run(ds, labels, E, opt);
}

CorrectorSolution solve_eps_problem(const Grid& grid, const LabelField& labels,
                                    const StaggeredField& f, const SolverOptions& opt) {
    DiscreteSystem ds = build_eps_system(grid, labels, f);
    return run(ds, labels, Eigen::MatrixXd(), opt);
}

CorrectorSolution solve_weak_sedimentation(const Grid& grid, const LabelField& labels,
                                           const StaggeredField& f,
                                           const StaggeredField& g,
                                           const SolverOptions& opt) {
    DiscreteSystem ds = build_sedimentation_system(grid, labels, f, g);
    return run(ds, labels, Eigen::MatrixXd(), opt);
}

StaggeredField sample_on_faces(const Grid& grid,
                               const std::function<double(int, const Vec3&)>& f) {
    StaggeredField out = StaggeredField::zeros(grid);
    for (int c = 0; c < grid.dim; ++c) {
        const Extents fe = face_extents(grid, c);
        std::array<int, 3> m{0, 0, 0};
        for (m[2] = 0; m[2] < fe.e[2]; ++m[2])
            for (m[1] = 0; m[1] < fe.e[1]; ++m[1])
                for (m[0] = 0; m[0] < fe.e[0]; ++m[0])
                    out.comp[c][fe.flat(m)] = f(c, face_center(grid, c, m));
    }
    return out;
}

}  // namespace stokesrve
