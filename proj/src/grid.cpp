#include "stokesrve/grid.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <sstream>

namespace stokesrve {

Grid Grid::periodic(int dim, int n, double L) {
    if (dim != 2 && dim != 3) throw InvalidParams("grid dim must be 2 or 3");
    if (n < 4) throw InvalidParams("grid needs at least 4 cells per side");
    if (L <= 0) throw InvalidParams("grid extent must be positive");
    Grid g;
    g.dim = dim;
    g.n = n;
    g.extent = L;
    g.h = L / n;
    g.boundary = Boundary::Periodic;
    return g;
}

Grid Grid::dirichlet(int dim, int n, const Box& box) {
    if (dim != 2 && dim != 3) throw InvalidParams("grid dim must be 2 or 3");
    if (n < 4) throw InvalidParams("grid needs at least 4 cells per side");
    const double side = box.side(0);
    for (int c = 1; c < dim; ++c) {
        if (std::abs(box.side(c) - side) > 1e-12 * side)
            throw InvalidParams("Dirichlet grids require a cubic box");
    }
    if (side <= 0) throw InvalidParams("box must have positive extent");
    Grid g;
    g.dim = dim;
    g.n = n;
    g.extent = side;
    g.h = side / n;
    g.boundary = Boundary::DirichletZero;
    g.origin = box.lo;
    return g;
}

// ----------------------------------------------------------------------
// Rasterization
// ----------------------------------------------------------------------

LabelField rasterize(const InclusionSet& set, const Grid& grid) {
    if (set.dim != grid.dim) throw InconsistentInputs("set/grid dimension mismatch");
    if (set.periodic != (grid.boundary == Boundary::Periodic))
        throw InconsistentInputs("set/grid boundary type mismatch");
    if (set.periodic &&
        std::abs(set.cell_length - grid.extent) > 1e-10 * set.cell_length)
        throw InconsistentInputs("periodic set and grid extents differ");

    const double r = set.radius;
    if (!set.centers.empty()) {
        if (grid.h > r / 4.0 + 1e-12)
            throw ResolutionTooCoarse("h = " + fmt17(grid.h) +
                                      " > radius/4 = " + fmt17(r / 4.0));
        // h < gap guarantees cells of distinct inclusions never share a face:
        // adjacent cell centers are h apart while inclusion supports are
        // separated by at least the gap.
        if (grid.h >= set.gap - 1e-12)
            throw ResolutionTooCoarse("h = " + fmt17(grid.h) +
                                      " >= gap = " + fmt17(set.gap));
    }

    LabelField lf = LabelField::all_fluid(grid);
    lf.n_inclusions = static_cast<int>(set.centers.size());
    lf.centers = set.centers;
    lf.radius = r;
    lf.gap = set.gap;

    const Extents ce = cell_extents(grid);
    const double r2 = r * r;
    for (std::int32_t n = 0; n < lf.n_inclusions; ++n) {
        const Vec3& xn = set.centers[n];
        // cell index window around the ball
        std::array<int, 3> lo{0, 0, 0}, hi{0, 0, 0};
        for (int c = 0; c < grid.dim; ++c) {
            lo[c] = static_cast<int>(std::floor((xn[c] - r - grid.origin[c]) / grid.h)) - 1;
            hi[c] = static_cast<int>(std::ceil((xn[c] + r - grid.origin[c]) / grid.h)) + 1;
            if (grid.boundary == Boundary::DirichletZero) {
                lo[c] = std::max(lo[c], 0);
                hi[c] = std::min(hi[c], grid.n - 1);
            }
        }
        std::array<int, 3> m{0, 0, 0};
        bool nonempty = false;
        for (m[2] = lo[2]; m[2] <= hi[2]; ++m[2])
            for (m[1] = lo[1]; m[1] <= hi[1]; ++m[1])
                for (m[0] = lo[0]; m[0] <= hi[0]; ++m[0]) {
                    std::array<int, 3> w{0, 0, 0};
                    for (int c = 0; c < grid.dim; ++c)
                        w[c] = grid.boundary == Boundary::Periodic
                                   ? ((m[c] % grid.n) + grid.n) % grid.n
                                   : m[c];
                    Vec3 xc = cell_center(grid, w);
                    Vec3 dvec = set.periodic ? min_image(xc, xn, grid.extent, grid.dim)
                                             : vsub(xc, xn);
                    if (vdot(dvec, dvec, grid.dim) <= r2) {
                        long f = ce.flat(w);
                        if (lf.cell[f] != kFluid && lf.cell[f] != n)
                            throw ResolutionTooCoarse(
                                "two inclusions claim one cell; gap under-resolved");
                        lf.cell[f] = n;
                        nonempty = true;
                    }
                }
        if (!nonempty)
            throw ResolutionTooCoarse("inclusion " + std::to_string(n) +
                                      " rasterized to no cells");
    }

    bool any_fluid = false;
    for (long f = 0; f < ce.size(); ++f)
        if (lf.cell[f] == kFluid) { any_fluid = true; break; }
    if (!any_fluid && lf.n_inclusions > 0)
        throw SingularSystem("no fluid cells remain after rasterization");
    return lf;
}

void check_label_structure(const LabelField& lf) {
    const Grid& g = lf.grid;
    const Extents ce = cell_extents(g);
    // no cross-inclusion face adjacency
    std::array<int, 3> m{0, 0, 0};
    for (m[2] = 0; m[2] < ce.e[2]; ++m[2])
        for (m[1] = 0; m[1] < ce.e[1]; ++m[1])
            for (m[0] = 0; m[0] < ce.e[0]; ++m[0]) {
                const std::int32_t l = lf.cell[ce.flat(m)];
                if (l < 0) continue;
                for (int c = 0; c < g.dim; ++c) {
                    std::array<int, 3> nb = m;
                    if (g.boundary == Boundary::Periodic) {
                        nb[c] = (m[c] + 1) % g.n;
                    } else {
                        nb[c] = m[c] + 1;
                        if (nb[c] >= g.n) continue;
                    }
                    const std::int32_t ln = lf.cell[ce.flat(nb)];
                    if (ln >= 0 && ln != l)
                        throw ResolutionTooCoarse("inclusions " + std::to_string(l) +
                                                  " and " + std::to_string(ln) +
                                                  " share a face");
                }
            }
    // each label set nonempty and face-connected (BFS from one seed cell)
    for (std::int32_t n = 0; n < lf.n_inclusions; ++n) {
        long seed = -1, count = 0;
        for (long f = 0; f < ce.size(); ++f)
            if (lf.cell[f] == n) {
                if (seed < 0) seed = f;
                ++count;
            }
        if (seed < 0) throw ResolutionTooCoarse("empty label set");
        std::vector<char> seen(ce.size(), 0);
        std::deque<long> work{seed};
        seen[seed] = 1;
        long reached = 0;
        while (!work.empty()) {
            long f = work.front();
            work.pop_front();
            ++reached;
            std::array<int, 3> mi = ce.unflat(f);
            for (int c = 0; c < g.dim; ++c) {
                for (int dir = -1; dir <= 1; dir += 2) {
                    std::array<int, 3> nb = mi;
                    nb[c] += dir;
                    if (g.boundary == Boundary::Periodic) {
                        nb[c] = (nb[c] + g.n) % g.n;
                    } else if (nb[c] < 0 || nb[c] >= g.n) {
                        continue;
                    }
                    long fn = ce.flat(nb);
                    if (!seen[fn] && lf.cell[fn] == n) {
                        seen[fn] = 1;
                        work.push_back(fn);
                    }
                }
            }
        }
        if (reached != count)
            throw ResolutionTooCoarse("label set " + std::to_string(n) +
                                      " is not face-connected");
    }
}

// ----------------------------------------------------------------------
// Operators
// ----------------------------------------------------------------------

ScalarField divergence(const StaggeredField& u) {
    const Grid& g = u.grid;
    ScalarField out = ScalarField::zeros(g);
    const Extents ce = cell_extents(g);
    std::array<int, 3> m{0, 0, 0};
    for (m[2] = 0; m[2] < ce.e[2]; ++m[2])
        for (m[1] = 0; m[1] < ce.e[1]; ++m[1])
            for (m[0] = 0; m[0] < ce.e[0]; ++m[0]) {
                double s = 0.0;
                for_each_div_term(g, m, [&](int c, long f, double coeff) {
                    s += coeff * u.comp[c][f];
                });
                out.v[ce.flat(m)] = s;
            }
    return out;
}

StaggeredField gradient(const ScalarField& p) {
    const Grid& g = p.grid;
    StaggeredField out = StaggeredField::zeros(g);
    const Extents ce = cell_extents(g);
    for (int c = 0; c < g.dim; ++c) {
        const Extents fe = face_extents(g, c);
        std::array<int, 3> m{0, 0, 0};
        for (m[2] = 0; m[2] < fe.e[2]; ++m[2])
            for (m[1] = 0; m[1] < fe.e[1]; ++m[1])
                for (m[0] = 0; m[0] < fe.e[0]; ++m[0]) {
                    if (g.boundary == Boundary::DirichletZero &&
                        (m[c] == 0 || m[c] == g.n))
                        continue;  // pinned faces carry no gradient unknown
                    std::array<int, 3> up = m, dn = m;
                    if (g.boundary == Boundary::Periodic) {
                        up[c] = m[c] % g.n;
                        dn[c] = (m[c] - 1 + g.n) % g.n;
                    } else {
                        dn[c] = m[c] - 1;
                    }
                    out.comp[c][fe.flat(m)] =
                        (p.v[ce.flat(up)] - p.v[ce.flat(dn)]) / g.h;
                }
    }
    return out;
}

StrainField sym_grad(const StaggeredField& u) {
    const Grid& g = u.grid;
    StrainField s = StrainField::zeros(g);
    for_each_strain_point(g, [&](const StrainPoint& pt) {
        double val = 0.0;
        for (int t = 0; t < pt.nterms; ++t)
            val += pt.terms[t].coeff * u.comp[pt.terms[t].comp][pt.terms[t].face];
        if (pt.kind < g.dim)
            s.diag[pt.kind][pt.index] = val;
        else
            s.off[pt.kind - g.dim][pt.index] = val;
    });
    return s;
}

StaggeredField vector_laplacian(const StaggeredField& u) {
    const Grid& g = u.grid;
    StaggeredField out = StaggeredField::zeros(g);
    const double inv_h2 = 1.0 / (g.h * g.h);
    for (int c = 0; c < g.dim; ++c) {
        const Extents fe = face_extents(g, c);
        std::array<int, 3> m{0, 0, 0};
        for (m[2] = 0; m[2] < fe.e[2]; ++m[2])
            for (m[1] = 0; m[1] < fe.e[1]; ++m[1])
                for (m[0] = 0; m[0] < fe.e[0]; ++m[0]) {
                    if (g.boundary == Boundary::DirichletZero &&
                        (m[c] == 0 || m[c] == g.n))
                        continue;
                    const double uc = u.comp[c][fe.flat(m)];
                    double acc = 0.0;
                    for (int d = 0; d < g.dim; ++d) {
                        double up, dn;
                        std::array<int, 3> mi = m;
                        if (g.boundary == Boundary::Periodic) {
                            mi[d] = (m[d] + 1) % g.n;
                            up = u.comp[c][fe.flat(mi)];
                            mi[d] = (m[d] - 1 + g.n) % g.n;
                            dn = u.comp[c][fe.flat(mi)];
                        } else if (d == c) {
                            mi[d] = m[d] + 1;  // in range: interior faces only
                            up = u.comp[c][fe.flat(mi)];
                            mi[d] = m[d] - 1;
                            dn = u.comp[c][fe.flat(mi)];
                        } else {
                            if (m[d] + 1 < fe.e[d]) {
                                mi[d] = m[d] + 1;
                                up = u.comp[c][fe.flat(mi)];
                            } else {
                                up = -uc;  // no-slip ghost
                            }
                            mi = m;
                            if (m[d] - 1 >= 0) {
                                mi[d] = m[d] - 1;
                                dn = u.comp[c][fe.flat(mi)];
                            } else {
                                dn = -uc;
                            }
                        }
                        acc += (up - 2.0 * uc + dn) * inv_h2;
                    }
                    out.comp[c][fe.flat(m)] = acc;
                }
    }
    return out;
}

Eigen::MatrixXd strain_at_cell(const StrainField& s, const std::array<int, 3>& cell) {
    const Grid& g = s.grid;
    const int d = g.dim;
    const Extents ce = cell_extents(g);
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(d, d);
    const long cf = ce.flat(cell);
    for (int c = 0; c < d; ++c) S(c, c) = s.diag[c][cf];
    for (int slot = 0; slot < g.pairs(); ++slot) {
        auto [a, b] = pair_axes(slot);
        const Extents pe = pair_extents(g, slot);
        double acc = 0.0;
        for (int da = 0; da <= 1; ++da)
            for (int db = 0; db <= 1; ++db) {
                std::array<int, 3> m = cell;
                if (g.boundary == Boundary::Periodic) {
                    m[a] = (cell[a] + da) % g.n;
                    m[b] = (cell[b] + db) % g.n;
                } else {
                    m[a] = cell[a] + da;
                    m[b] = cell[b] + db;
                }
                acc += s.off[slot][pe.flat(m)];
            }
        S(a, b) = S(b, a) = 0.25 * acc;
    }
    return S;
}

void add_constant_strain(StrainField& s, const double* E, int dim) {
    for (int c = 0; c < dim; ++c)
        for (double& v : s.diag[c]) v += E[c * dim + c];
    for (int slot = 0; slot < dim * (dim - 1) / 2; ++slot) {
        auto [a, b] = pair_axes(slot);
        for (double& v : s.off[slot]) v += E[a * dim + b];
    }
}

double inner(const ScalarField& a, const ScalarField& b) {
    if (!a.grid.same_as(b.grid)) throw ShapeMismatch("scalar inner: grids differ");
    double s = 0.0;
    for (std::size_t i = 0; i < a.v.size(); ++i) s += a.v[i] * b.v[i];
    return s * a.grid.cell_volume();
}

double inner(const StaggeredField& a, const StaggeredField& b) {
    if (!a.grid.same_as(b.grid)) throw ShapeMismatch("staggered inner: grids differ");
    double s = 0.0;
    for (int c = 0; c < a.grid.dim; ++c)
        for (std::size_t i = 0; i < a.comp[c].size(); ++i)
            s += a.comp[c][i] * b.comp[c][i];
    return s * a.grid.cell_volume();
}

double strain_inner(const StrainField& a, const StrainField& b) {
    if (!a.grid.same_as(b.grid)) throw ShapeMismatch("strain inner: grids differ");
    const double hd = a.grid.cell_volume();
    double sd = 0.0, so = 0.0;
    for (int c = 0; c < a.grid.dim; ++c)
        for (std::size_t i = 0; i < a.diag[c].size(); ++i)
            sd += a.diag[c][i] * b.diag[c][i];
    for (int slot = 0; slot < a.grid.pairs(); ++slot)
        for (std::size_t i = 0; i < a.off[slot].size(); ++i)
            so += a.off[slot][i] * b.off[slot][i];
    return hd * sd + 2.0 * hd * so;
}

// ----------------------------------------------------------------------
// Dumps
// ----------------------------------------------------------------------

namespace {
const char* boundary_name(Boundary b) {
    return b == Boundary::Periodic ? "periodic" : "dirichlet";
}
}  // namespace

void dump_field(std::ostream& os, const ScalarField& f, const std::string& role) {
    os << f.grid.dim << ' ' << f.grid.n << ' ' << boundary_name(f.grid.boundary)
       << ' ' << role << '\n';
    for (double v : f.v) os << fmt17(v) << '\n';
}

void dump_field(std::ostream& os, const StaggeredField& f, const std::string& role) {
    os << f.grid.dim << ' ' << f.grid.n << ' ' << boundary_name(f.grid.boundary)
       << ' ' << role << '\n';
    for (int c = 0; c < f.grid.dim; ++c)
        for (double v : f.comp[c]) os << fmt17(v) << '\n';
}

void dump_field(const std::string& path, const ScalarField& f, const std::string& role) {
    std::ofstream os(path);
    if (!os) throw FormatError("cannot open " + path);
    dump_field(os, f, role);
}

void dump_field(const std::string& path, const StaggeredField& f, const std::string& role) {
    std::ofstream os(path);
    if (!os) throw FormatError("cannot open " + path);
    dump_field(os, f, role);
}

FieldDump load_field(std::istream& is) {
    FieldDump d;
    if (!(is >> d.dim >> d.n >> d.boundary >> d.role))
        throw FormatError("field dump: malformed header");
    double v;
    while (is >> v) d.values.push_back(v);
    return d;
}

FieldDump load_field(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open " + path);
    return load_field(is);
}

}  // namespace stokesrve
