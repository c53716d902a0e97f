#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "stokesrve/errors.hpp"
#include "stokesrve/geometry.hpp"
#include "stokesrve/util.hpp"

namespace stokesrve {

enum class Boundary { Periodic, DirichletZero };

// Regular MAC grid: velocity components on faces normal to them, scalars at
// cell centers. Cubic cells, N per side.
struct Grid {
    int dim = 2;
    int n = 0;
    double h = 0.0;
    Boundary boundary = Boundary::Periodic;
    double extent = 0.0;  // torus side L, or box side for Dirichlet
    Vec3 origin{0, 0, 0};

    static Grid periodic(int dim, int n, double L);
    static Grid dirichlet(int dim, int n, const Box& box);

    long cells() const {
        long s = 1;
        for (int c = 0; c < dim; ++c) s *= n;
        return s;
    }
    int pairs() const { return dim * (dim - 1) / 2; }
    double cell_volume() const {
        double v = 1.0;
        for (int c = 0; c < dim; ++c) v *= h;
        return v;
    }
    bool same_as(const Grid& o) const {
        return dim == o.dim && n == o.n && boundary == o.boundary &&
               std::abs(extent - o.extent) < 1e-12 * (1.0 + std::abs(extent));
    }
};

inline std::pair<int, int> pair_axes(int slot) {
    // slot order: (0,1), (0,2), (1,2)
    switch (slot) {
        case 0: return {0, 1};
        case 1: return {0, 2};
        default: return {1, 2};
    }
}

struct Extents {
    std::array<int, 3> e{1, 1, 1};
    long size() const { return static_cast<long>(e[0]) * e[1] * e[2]; }
    long flat(int i, int j, int k) const {
        return i + static_cast<long>(e[0]) * (j + static_cast<long>(e[1]) * k);
    }
    long flat(const std::array<int, 3>& m) const { return flat(m[0], m[1], m[2]); }
    std::array<int, 3> unflat(long f) const {
        std::array<int, 3> m;
        m[0] = static_cast<int>(f % e[0]);
        f /= e[0];
        m[1] = static_cast<int>(f % e[1]);
        m[2] = static_cast<int>(f / e[1]);
        return m;
    }
};

inline Extents cell_extents(const Grid& g) {
    Extents x;
    for (int c = 0; c < g.dim; ++c) x.e[c] = g.n;
    return x;
}

// Component c lives on faces normal to c. Dirichlet grids store the pinned
// boundary faces (i_c = 0 and i_c = n) explicitly as zeros.
inline Extents face_extents(const Grid& g, int comp) {
    Extents x;
    for (int c = 0; c < g.dim; ++c) x.e[c] = g.n;
    if (g.boundary == Boundary::DirichletZero) x.e[comp] = g.n + 1;
    return x;
}

// Off-diagonal strain components live at points with integer coordinates in
// the two pair axes and half-offsets elsewhere (nodes in 2D, edges in 3D).
inline Extents pair_extents(const Grid& g, int slot) {
    auto [a, b] = pair_axes(slot);
    Extents x;
    for (int c = 0; c < g.dim; ++c) x.e[c] = g.n;
    if (g.boundary == Boundary::DirichletZero) {
        x.e[a] = g.n + 1;
        x.e[b] = g.n + 1;
    }
    return x;
}

struct ScalarField {
    Grid grid;
    std::vector<double> v;  // cell-centered, row-major (x fastest)
    static ScalarField zeros(const Grid& g) {
        ScalarField f;
        f.grid = g;
        f.v.assign(cell_extents(g).size(), 0.0);
        return f;
    }
};

struct StaggeredField {
    Grid grid;
    std::array<std::vector<double>, 3> comp;
    static StaggeredField zeros(const Grid& g) {
        StaggeredField f;
        f.grid = g;
        for (int c = 0; c < g.dim; ++c) f.comp[c].assign(face_extents(g, c).size(), 0.0);
        return f;
    }
};

// Deviatoric+diagonal strain storage: D_cc at cells, D_ab at pair points.
struct StrainField {
    Grid grid;
    std::array<std::vector<double>, 3> diag;
    std::array<std::vector<double>, 3> off;
    static StrainField zeros(const Grid& g) {
        StrainField s;
        s.grid = g;
        for (int c = 0; c < g.dim; ++c) s.diag[c].assign(cell_extents(g).size(), 0.0);
        for (int sl = 0; sl < g.pairs(); ++sl) s.off[sl].assign(pair_extents(g, sl).size(), 0.0);
        return s;
    }
};

inline Vec3 cell_center(const Grid& g, const std::array<int, 3>& m) {
    Vec3 x{0, 0, 0};
    for (int c = 0; c < g.dim; ++c) x[c] = g.origin[c] + (m[c] + 0.5) * g.h;
    return x;
}

inline Vec3 face_center(const Grid& g, int comp, const std::array<int, 3>& m) {
    Vec3 x{0, 0, 0};
    for (int c = 0; c < g.dim; ++c)
        x[c] = g.origin[c] + (c == comp ? m[c] * g.h : (m[c] + 0.5) * g.h);
    return x;
}

// ----------------------------------------------------------------------
// Strain-point enumeration: the single definition of the discrete
// symmetric-gradient stencils, shared by system assembly and evaluation.
// Weights make  sum_pts w * value^2  a quadrature of  int |D(u)|^2:
// h^d at diagonal points, 2 h^d at off-diagonal points.
// Dirichlet walls use the no-slip ghost reflection for tangential
// derivatives (one-sided value 2 u/h at the wall).
// ----------------------------------------------------------------------

struct StrainTerm {
    int comp;
    long face;
    double coeff;
};

struct StrainPoint {
    int kind;    // 0..dim-1 diagonal component, dim+slot off-diagonal
    long index;  // flat index within the point lattice
    double weight;
    int nterms;
    std::array<StrainTerm, 4> terms;
};

template <class F>
void for_each_strain_point(const Grid& g, F&& visit) {
    const double hd = g.cell_volume();
    const double inv_h = 1.0 / g.h;
    const bool per = g.boundary == Boundary::Periodic;

    // diagonal components at cells: D_cc = (u_c(i+e_c) - u_c(i)) / h
    const Extents ce = cell_extents(g);
    for (int c = 0; c < g.dim; ++c) {
        const Extents fe = face_extents(g, c);
        std::array<int, 3> m{0, 0, 0};
        for (m[2] = 0; m[2] < ce.e[2]; ++m[2])
            for (m[1] = 0; m[1] < ce.e[1]; ++m[1])
                for (m[0] = 0; m[0] < ce.e[0]; ++m[0]) {
                    StrainPoint pt;
                    pt.kind = c;
                    pt.index = ce.flat(m);
                    pt.weight = hd;
                    std::array<int, 3> up = m;
                    up[c] = per ? (m[c] + 1) % g.n : m[c] + 1;
                    pt.terms[0] = {c, fe.flat(up), inv_h};
                    pt.terms[1] = {c, fe.flat(m), -inv_h};
                    pt.nterms = 2;
                    visit(pt);
                }
    }

    // off-diagonal components: D_ab = (d_b u_a + d_a u_b) / 2
    for (int slot = 0; slot < g.pairs(); ++slot) {
        auto [a, b] = pair_axes(slot);
        const Extents pe = pair_extents(g, slot);
        const Extents fa = face_extents(g, a);
        const Extents fb = face_extents(g, b);
        std::array<int, 3> m{0, 0, 0};
        for (m[2] = 0; m[2] < pe.e[2]; ++m[2])
            for (m[1] = 0; m[1] < pe.e[1]; ++m[1])
                for (m[0] = 0; m[0] < pe.e[0]; ++m[0]) {
                    StrainPoint pt;
                    pt.kind = g.dim + slot;
                    pt.index = pe.flat(m);
                    pt.weight = 2.0 * hd;
                    pt.nterms = 0;
                    auto add_deriv = [&](int uc, int dc, const Extents& fe) {
                        // d/dx_dc of component uc at the pair point
                        std::array<int, 3> hi = m, lo = m;
                        if (per) {
                            hi[dc] = m[dc] % g.n;
                            lo[dc] = (m[dc] - 1 + g.n) % g.n;
                            pt.terms[pt.nterms++] = {uc, fe.flat(hi), 0.5 * inv_h};
                            pt.terms[pt.nterms++] = {uc, fe.flat(lo), -0.5 * inv_h};
                        } else if (m[dc] == 0) {
                            // wall below: ghost = -u(first)
                            pt.terms[pt.nterms++] = {uc, fe.flat(hi), inv_h};
                        } else if (m[dc] == g.n) {
                            lo[dc] = g.n - 1;
                            pt.terms[pt.nterms++] = {uc, fe.flat(lo), -inv_h};
                        } else {
                            lo[dc] = m[dc] - 1;
                            pt.terms[pt.nterms++] = {uc, fe.flat(hi), 0.5 * inv_h};
                            pt.terms[pt.nterms++] = {uc, fe.flat(lo), -0.5 * inv_h};
                        }
                    };
                    add_deriv(a, b, fa);
                    add_deriv(b, a, fb);
                    visit(pt);
                }
    }
}

// Divergence stencil of one cell: visit(comp, face_flat, coeff).
template <class F>
void for_each_div_term(const Grid& g, const std::array<int, 3>& cell, F&& visit) {
    const double inv_h = 1.0 / g.h;
    for (int c = 0; c < g.dim; ++c) {
        const Extents fe = face_extents(g, c);
        std::array<int, 3> up = cell;
        up[c] = g.boundary == Boundary::Periodic ? (cell[c] + 1) % g.n : cell[c] + 1;
        visit(c, fe.flat(up), inv_h);
        visit(c, fe.flat(cell), -inv_h);
    }
}

// ----------------------------------------------------------------------
// Labels and rasterization
// ----------------------------------------------------------------------

constexpr int kFluid = -1;

struct LabelField {
    Grid grid;
    std::vector<std::int32_t> cell;  // kFluid or inclusion index
    int n_inclusions = 0;
    std::vector<Vec3> centers;
    double radius = 1.0;
    double gap = 0.0;  // hardcore clearance of the rasterized set

    std::int32_t label(long flat) const { return cell[flat]; }
    static LabelField all_fluid(const Grid& g) {
        LabelField lf;
        lf.grid = g;
        lf.cell.assign(cell_extents(g).size(), kFluid);
        return lf;
    }
};

enum class FaceKind : std::uint8_t { Fluid, Pinned, Interior };

struct FaceInfo {
    FaceKind kind;
    std::int32_t incl;  // valid when kind == Interior
};

// A face is Interior to inclusion n iff both adjacent cells carry label n.
// Faces with one fluid neighbour are interface faces, treated as fluid.
inline FaceInfo face_info(const Grid& g, const LabelField& lf, int comp,
                          const std::array<int, 3>& m) {
    if (g.boundary == Boundary::DirichletZero && (m[comp] == 0 || m[comp] == g.n))
        return {FaceKind::Pinned, -1};
    const Extents ce = cell_extents(g);
    std::array<int, 3> up = m, dn = m;
    if (g.boundary == Boundary::Periodic) {
        up[comp] = m[comp] % g.n;
        dn[comp] = (m[comp] - 1 + g.n) % g.n;
    } else {
        dn[comp] = m[comp] - 1;
    }
    const std::int32_t lu = lf.cell[ce.flat(up)];
    const std::int32_t ld = lf.cell[ce.flat(dn)];
    if (lu >= 0 && lu == ld) return {FaceKind::Interior, lu};
    return {FaceKind::Fluid, -1};
}

// Cell labels: a cell belongs to inclusion n iff its center lies within the
// ball radius of x_n (minimum image on periodic grids). Throws
// ResolutionTooCoarse when h > r/4 or h >= gap, InconsistentInputs when the
// set and grid disagree, SingularSystem when no fluid cell remains.
LabelField rasterize(const InclusionSet& set, const Grid& grid);

// Structural checks used by tests: nonempty, face-connected labels, no
// cross-inclusion adjacency.
void check_label_structure(const LabelField& lf);

// ----------------------------------------------------------------------
// Discrete operators (second-order centered; Galerkin-consistent with the
// strain-point stencils above)
// ----------------------------------------------------------------------

ScalarField divergence(const StaggeredField& u);
StaggeredField gradient(const ScalarField& p);      // zero on pinned faces
StrainField sym_grad(const StaggeredField& u);      // via for_each_strain_point
StaggeredField vector_laplacian(const StaggeredField& u);

void add_constant_strain(StrainField& s, const double* E, int dim);  // E row-major dim x dim

// Full strain tensor at a cell center: diagonal entries native, off-diagonal
// averaged from the surrounding pair points.
Eigen::MatrixXd strain_at_cell(const StrainField& s, const std::array<int, 3>& cell);

double inner(const ScalarField& a, const ScalarField& b);      // sum a b h^d
double inner(const StaggeredField& a, const StaggeredField& b);
double strain_inner(const StrainField& a, const StrainField& b);  // with point weights

// ----------------------------------------------------------------------
// ASCII field dumps: header "d N boundary role", then values one per line,
// 17 significant digits, row-major (components concatenated for velocity).
// ----------------------------------------------------------------------

void dump_field(std::ostream& os, const ScalarField& f, const std::string& role = "pressure");
void dump_field(std::ostream& os, const StaggeredField& f, const std::string& role = "velocity");
void dump_field(const std::string& path, const ScalarField& f, const std::string& role = "pressure");
void dump_field(const std::string& path, const StaggeredField& f, const std::string& role = "velocity");

struct FieldDump {
    int dim = 0;
    int n = 0;
    std::string boundary;
    std::string role;
    std::vector<double> values;
};
FieldDump load_field(std::istream& is);
FieldDump load_field(const std::string& path);

}  // namespace stokesrve
