#include "stokesrve/saddle.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/OrderingMethods>
#include <cmath>

#include "stokesrve/errors.hpp"

namespace stokesrve {

namespace {

using Vec = Eigen::VectorXd;
using Sp = Eigen::SparseMatrix<double>;

struct BlockPrecon {
    bool identity = true;
    bool ic_ok = false;
    Eigen::IncompleteCholesky<double, Eigen::Lower, Eigen::AMDOrdering<int>> ic;
    Vec inv_diag_a;
    double inv_pressure = 1.0;
    long nq = 0, np = 0;

    void setup(const SaddleSystem& sys, PreconKind kind) {
        nq = sys.nq();
        np = sys.np();
        if (kind == PreconKind::None) {
            identity = true;
            return;
        }
        identity = false;
        inv_pressure = 1.0 / sys.pressure_scale;
        ic.compute(sys.A);
        ic_ok = ic.info() == Eigen::Success;
        if (!ic_ok) {
            inv_diag_a = sys.A.diagonal();
            for (long i = 0; i < nq; ++i)
                inv_diag_a[i] = inv_diag_a[i] > 0 ? 1.0 / inv_diag_a[i] : 1.0;
        }
    }

    void apply(const Vec& r, Vec& z) const {
        if (identity) {
            z = r;
            return;
        }
        if (ic_ok)
            z.head(nq) = ic.solve(r.head(nq));
        else
            z.head(nq) = inv_diag_a.cwiseProduct(r.head(nq));
        z.tail(np) = inv_pressure * r.tail(np);
    }
};

}  // namespace

SaddleResult saddle_solve(const SaddleSystem& sys, const SaddleOptions& opt) {
    const long nq = sys.nq();
    const long np = sys.np();
    const long n = nq + np;

    Sp BT = sys.B.transpose();

    // orthonormal null-space basis on the stacked vector
    std::vector<Vec> nulls;
    for (const auto& nv : sys.null_q) {
        Vec v = Vec::Zero(n);
        v.head(nq) = nv;
        v /= v.norm();
        nulls.push_back(std::move(v));
    }
    if (sys.pressure_const_null && np > 0) {
        Vec v = Vec::Zero(n);
        v.tail(np).setConstant(1.0 / std::sqrt(static_cast<double>(np)));
        nulls.push_back(std::move(v));
    }
    auto project = [&](Vec& v) {
        for (const auto& nv : nulls) v -= nv.dot(v) * nv;
    };

    auto matvec = [&](const Vec& v, Vec& out) {
        out.head(nq).noalias() = sys.A * v.head(nq);
        if (np > 0) {
            out.head(nq).noalias() += BT * v.tail(np);
            out.tail(np).noalias() = sys.B * v.head(nq);
        }
    };

    Vec b(n);
    b.head(nq) = sys.rhs_q;
    b.tail(np) = sys.rhs_p;
    const double bnorm_raw = b.norm();

    if (!nulls.empty()) {
        double null_part = 0.0;
        for (const auto& nv : nulls) null_part = std::max(null_part, std::abs(nv.dot(b)));
        if (!opt.auto_project && null_part > 1e-13 * (bnorm_raw + 1e-300)) {
            throw NoConvergence("saddle_solve: rhs has a null-space component and "
                                "auto_project is off", 0, null_part);
        }
        project(b);
    }

    SaddleResult res;
    res.q = Vec::Zero(nq);
    res.p = Vec::Zero(np);

    const double bnorm = b.norm();
    if (bnorm == 0.0 || bnorm < 1e-300) {
        res.converged = true;
        return res;
    }

    BlockPrecon M;
    M.setup(sys, opt.precon);

    // Paige-Saunders MINRES with SPD preconditioner
    Vec x = Vec::Zero(n);
    Vec r1 = b;
    Vec y(n);
    M.apply(r1, y);
    project(y);
    double beta1 = r1.dot(y);
    if (beta1 < 0)
        throw NoConvergence("saddle_solve: preconditioner is not positive definite", 0, beta1);
    beta1 = std::sqrt(beta1);
    if (beta1 == 0.0) {
        res.converged = true;
        return res;
    }

    double oldb = 0.0, beta = beta1, dbar = 0.0, epsln = 0.0;
    double phibar = beta1, cs = -1.0, sn = 0.0;
    Vec r2 = r1;
    Vec w = Vec::Zero(n), w2 = Vec::Zero(n), w1(n), v(n), yk(n);

    double target = opt.tol;
    int it = 0;
    double true_rel = 1.0;
    while (it < opt.max_iter) {
        ++it;
        v = y / beta;
        matvec(v, yk);
        project(yk);
        if (it >= 2) yk -= (beta / oldb) * r1;
        const double alfa = v.dot(yk);
        yk -= (alfa / beta) * r2;
        r1 = r2;
        r2 = yk;
        M.apply(r2, y);
        project(y);
        oldb = beta;
        double bb = r2.dot(y);
        if (bb < 0)
            throw NoConvergence("saddle_solve: preconditioner lost positivity", it, bb);
        beta = std::sqrt(bb);

        const double oldeps = epsln;
        const double delta = cs * dbar + sn * alfa;
        const double gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        double gamma = std::sqrt(gbar * gbar + beta * beta);
        gamma = std::max(gamma, 1e-300);
        cs = gbar / gamma;
        sn = beta / gamma;
        const double phi = cs * phibar;
        phibar = sn * phibar;

        w1 = w2;
        w2 = w;
        w = (v - oldeps * w1 - delta * w2) / gamma;
        x += phi * w;

        const double est = phibar / beta1;
        res.history.push_back(est);

        if (est <= target || it == opt.max_iter) {
            // verify with the true residual; the estimate tracks the
            // preconditioned norm
            Vec rr(n);
            matvec(x, rr);
            rr = b - rr;
            project(rr);
            true_rel = rr.norm() / bnorm;
            if (true_rel <= opt.tol) {
                res.converged = true;
                break;
            }
            target = std::max(target * 0.1, 1e-18);
            if (est < 1e-16) break;  // stagnated at round-off
        }
    }

    project(x);
    res.q = x.head(nq);
    res.p = x.tail(np);
    res.iters = it;
    res.rel_residual = true_rel;
    if (!res.converged)
        throw NoConvergence("saddle_solve: no convergence after " + std::to_string(it) +
                                " iterations (rel res " + std::to_string(true_rel) + ")",
                            it, true_rel);
    return res;
}

}  // namespace stokesrve
