#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "stokesrve/errors.hpp"
#include "stokesrve/grid.hpp"
#include "stokesrve/util.hpp"

using namespace stokesrve;

namespace {

StaggeredField random_field(const Grid& g, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    StaggeredField u = StaggeredField::zeros(g);
    for (int c = 0; c < g.dim; ++c) {
        const Extents fe = face_extents(g, c);
        std::array<int, 3> m{0, 0, 0};
        for (m[2] = 0; m[2] < fe.e[2]; ++m[2])
            for (m[1] = 0; m[1] < fe.e[1]; ++m[1])
                for (m[0] = 0; m[0] < fe.e[0]; ++m[0]) {
                    if (g.boundary == Boundary::DirichletZero && (m[c] == 0 || m[c] == g.n))
                        continue;  // keep pinned faces zero
                    u.comp[c][fe.flat(m)] = 2.0 * uniform01(rng) - 1.0;
                }
    }
    return u;
}

ScalarField random_scalar(const Grid& g, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    ScalarField p = ScalarField::zeros(g);
    for (auto& v : p.v) v = 2.0 * uniform01(rng) - 1.0;
    return p;
}

}  // namespace

TEST_CASE("operators: constant velocity has zero divergence and strain") {
    for (Boundary b : {Boundary::Periodic, Boundary::DirichletZero}) {
        Grid g = b == Boundary::Periodic
                     ? Grid::periodic(2, 8, 2.0)
                     : Grid::dirichlet(2, 8, Box{{0, 0, 0}, {2, 2, 0}});
        StaggeredField u = StaggeredField::zeros(g);
        for (int c = 0; c < 2; ++c)
            for (auto& v : u.comp[c]) v = 3.25;
        ScalarField dv = divergence(u);
        for (double v : dv.v) CHECK(v == 0.0);
        StrainField s = sym_grad(u);
        for (int c = 0; c < 2; ++c)
            for (double v : s.diag[c]) CHECK(v == 0.0);
        // interior off-diagonal points see constant values; boundary points of
        // Dirichlet grids use the no-slip ghost and legitimately differ
        if (b == Boundary::Periodic)
            for (double v : s.off[0]) CHECK(v == 0.0);
    }
}

TEST_CASE("operators: sampled linear field reproduces its strain exactly") {
    Grid g = Grid::periodic(2, 16, 4.0);
    const double E[4] = {0.7, 0.3, 0.3, -0.7};  // trace-free symmetric
    StaggeredField u = StaggeredField::zeros(g);
    for (int c = 0; c < 2; ++c) {
        const Extents fe = face_extents(g, c);
        std::array<int, 3> m{0, 0, 0};
        for (m[1] = 0; m[1] < fe.e[1]; ++m[1])
            for (m[0] = 0; m[0] < fe.e[0]; ++m[0]) {
                const Vec3 x = face_center(g, c, m);
                u.comp[c][fe.flat(m)] = E[c * 2] * x[0] + E[c * 2 + 1] * x[1];
            }
    }
    StrainField s = sym_grad(u);
    const Extents ce = cell_extents(g);
    const Extents pe = pair_extents(g, 0);
    // interior evaluation points only: the sampled affine field is not
    // periodic, so stencils that wrap are meaningless
    std::array<int, 3> m{0, 0, 0};
    for (m[1] = 1; m[1] < g.n - 1; ++m[1])
        for (m[0] = 1; m[0] < g.n - 1; ++m[0]) {
            CHECK(s.diag[0][ce.flat(m)] == doctest::Approx(E[0]).epsilon(1e-13));
            CHECK(s.diag[1][ce.flat(m)] == doctest::Approx(E[3]).epsilon(1e-13));
            CHECK(s.off[0][pe.flat(m)] == doctest::Approx(E[1]).epsilon(1e-13));
        }
    ScalarField dv = divergence(u);
    for (m[1] = 1; m[1] < g.n - 1; ++m[1])
        for (m[0] = 1; m[0] < g.n - 1; ++m[0])
            CHECK(dv.v[ce.flat(m)] == doctest::Approx(0.0).epsilon(1e-13));
}

TEST_CASE("operators: div/grad adjointness to round-off, 100 random pairs") {
    for (int dim : {2, 3}) {
        for (Boundary b : {Boundary::Periodic, Boundary::DirichletZero}) {
            Grid g = b == Boundary::Periodic
                         ? Grid::periodic(dim, 8, 1.0)
                         : Grid::dirichlet(dim, 8, Box{{0, 0, 0}, {1, 1, 1}});
            for (int trial = 0; trial < 100; ++trial) {
                StaggeredField u = random_field(g, 1000 + trial);
                ScalarField p = random_scalar(g, 2000 + trial);
                const double lhs = inner(divergence(u), p);
                const double rhs = -inner(u, gradient(p));
                CHECK(std::abs(lhs - rhs) <=
                      1e-13 * std::max(1.0, std::abs(lhs) + std::abs(rhs)));
            }
        }
    }
}

TEST_CASE("operators: div(grad p) equals the (2d+1)-point Laplacian entrywise") {
    Grid g = Grid::periodic(2, 6, 3.0);
    ScalarField p = random_scalar(g, 77);
    ScalarField lap = divergence(gradient(p));
    const Extents ce = cell_extents(g);
    std::array<int, 3> m{0, 0, 0};
    for (m[1] = 0; m[1] < g.n; ++m[1])
        for (m[0] = 0; m[0] < g.n; ++m[0]) {
            double stencil = -4.0 * p.v[ce.flat(m)];
            for (int c = 0; c < 2; ++c)
                for (int dir = -1; dir <= 1; dir += 2) {
                    std::array<int, 3> nb = m;
                    nb[c] = (m[c] + dir + g.n) % g.n;
                    stencil += p.v[ce.flat(nb)];
                }
            stencil /= g.h * g.h;
            CHECK(lap.v[ce.flat(m)] == doctest::Approx(stencil).epsilon(1e-12));
        }
}

TEST_CASE("rasterize: empty set labels everything fluid") {
    InclusionSet set;
    set.dim = 2;
    set.cell_length = 8;
    set.gap = 0.3;
    Grid g = Grid::periodic(2, 64, 8.0);
    LabelField lf = rasterize(set, g);
    for (auto l : lf.cell) CHECK(l == kFluid);
}

TEST_CASE("rasterize: disk cell count matches the point-in-disk oracle") {
    InclusionSet set;
    set.dim = 2;
    set.cell_length = 8;
    set.gap = 0.6;
    set.centers = {{4.0, 4.0, 0}};
    Grid g = Grid::periodic(2, 32, 8.0);  // h = 0.25
    LabelField lf = rasterize(set, g);
    check_label_structure(lf);

    // oracle: brute-force scan of every cell center
    long oracle = 0;
    const Extents ce = cell_extents(g);
    std::array<int, 3> m{0, 0, 0};
    for (m[1] = 0; m[1] < g.n; ++m[1])
        for (m[0] = 0; m[0] < g.n; ++m[0]) {
            const Vec3 x = cell_center(g, m);
            const double dx = x[0] - 4.0, dy = x[1] - 4.0;
            if (dx * dx + dy * dy <= 1.0) ++oracle;
        }
    long labeled = 0;
    for (auto l : lf.cell)
        if (l == 0) ++labeled;
    CHECK(labeled == oracle);
    // area consistency: |count h^2 - pi| = O(perimeter * h)
    CHECK(std::abs(labeled * g.h * g.h - M_PI) <= 2.0 * M_PI * g.h + g.h * g.h);
}

TEST_CASE("rasterize: cell count converges to the disk area on an h-ladder") {
    InclusionSet set;
    set.dim = 2;
    set.cell_length = 8;
    set.gap = 0.6;
    set.centers = {{4.0, 4.0, 0}};
    double last_err = 1e9;
    for (int n : {32, 64, 128, 256}) {
        Grid g = Grid::periodic(2, n, 8.0);
        LabelField lf = rasterize(set, g);
        long labeled = 0;
        for (auto l : lf.cell)
            if (l == 0) ++labeled;
        const double err = std::abs(labeled * g.h * g.h - M_PI);
        CHECK(err <= 2.0 * M_PI * g.h + g.h * g.h);
        CHECK(err < last_err + 1e-12);
        last_err = err;
    }
}

TEST_CASE("rasterize: separated disks never touch in the discrete graph") {
    InclusionSet set;
    set.dim = 2;
    set.cell_length = 16;
    set.gap = 0.5;
    set.centers = {{5.0, 8.0, 0}, {7.5, 8.0, 0}};  // surface gap exactly 0.5
    Grid g = Grid::periodic(2, 80, 16.0);           // h = 0.2 < gap
    LabelField lf = rasterize(set, g);
    check_label_structure(lf);

    // brute-force adjacency scan
    const Extents ce = cell_extents(g);
    std::array<int, 3> m{0, 0, 0};
    for (m[1] = 0; m[1] < g.n; ++m[1])
        for (m[0] = 0; m[0] < g.n; ++m[0]) {
            const auto l = lf.cell[ce.flat(m)];
            if (l < 0) continue;
            for (int c = 0; c < 2; ++c) {
                std::array<int, 3> nb = m;
                nb[c] = (m[c] + 1) % g.n;
                const auto ln = lf.cell[ce.flat(nb)];
                if (ln >= 0) CHECK(ln == l);
            }
        }
}

TEST_CASE("rasterize: resolution preconditions raise ResolutionTooCoarse") {
    InclusionSet set;
    set.dim = 2;
    set.cell_length = 8;
    set.gap = 0.5;
    set.centers = {{4.0, 4.0, 0}};
    // h = 0.5 > radius/4
    CHECK_THROWS_AS(rasterize(set, Grid::periodic(2, 16, 8.0)), ResolutionTooCoarse);
    // h = 0.25 > gap = 0.2
    set.gap = 0.2;
    CHECK_THROWS_AS(rasterize(set, Grid::periodic(2, 32, 8.0)), ResolutionTooCoarse);
}

TEST_CASE("face classification: interface faces stay fluid unknowns") {
    InclusionSet set;
    set.dim = 2;
    set.cell_length = 8;
    set.gap = 0.6;
    set.centers = {{4.0, 4.0, 0}};
    Grid g = Grid::periodic(2, 64, 8.0);
    LabelField lf = rasterize(set, g);
    const Extents ce = cell_extents(g);
    long interior = 0, interface_fluid = 0;
    for (int c = 0; c < 2; ++c) {
        const Extents fe = face_extents(g, c);
        std::array<int, 3> m{0, 0, 0};
        for (m[1] = 0; m[1] < fe.e[1]; ++m[1])
            for (m[0] = 0; m[0] < fe.e[0]; ++m[0]) {
                const FaceInfo fi = face_info(g, lf, c, m);
                std::array<int, 3> dn = m;
                dn[c] = (m[c] - 1 + g.n) % g.n;
                const auto lu = lf.cell[ce.flat(m)];
                const auto ld = lf.cell[ce.flat(dn)];
                if (lu >= 0 && ld >= 0) {
                    CHECK(fi.kind == FaceKind::Interior);
                    ++interior;
                } else {
                    CHECK(fi.kind == FaceKind::Fluid);
                    if (lu >= 0 || ld >= 0) ++interface_fluid;
                }
            }
    }
    CHECK(interior > 0);
    CHECK(interface_fluid > 0);
}

TEST_CASE("field dumps: header and value round trip") {
    Grid g = Grid::dirichlet(2, 6, Box{{0, 0, 0}, {1, 1, 0}});
    StaggeredField u = random_field(g, 5);
    std::stringstream ss;
    dump_field(ss, u, "velocity");
    FieldDump d = load_field(ss);
    CHECK(d.dim == 2);
    CHECK(d.n == 6);
    CHECK(d.boundary == "dirichlet");
    CHECK(d.role == "velocity");
    REQUIRE(d.values.size() == u.comp[0].size() + u.comp[1].size());
    for (std::size_t i = 0; i < u.comp[0].size(); ++i) CHECK(d.values[i] == u.comp[0][i]);
}

TEST_CASE("3d smoke: strain of a sampled linear field at an interior cell") {
    Grid g = Grid::periodic(3, 8, 2.0);
    Eigen::MatrixXd E(3, 3);
    E << 0.2, 0.1, -0.3, 0.1, 0.5, 0.05, -0.3, 0.05, -0.7;
    StaggeredField u = StaggeredField::zeros(g);
    for (int c = 0; c < 3; ++c) {
        const Extents fe = face_extents(g, c);
        std::array<int, 3> m{0, 0, 0};
        for (m[2] = 0; m[2] < fe.e[2]; ++m[2])
            for (m[1] = 0; m[1] < fe.e[1]; ++m[1])
                for (m[0] = 0; m[0] < fe.e[0]; ++m[0]) {
                    const Vec3 x = face_center(g, c, m);
                    u.comp[c][fe.flat(m)] =
                        E(c, 0) * x[0] + E(c, 1) * x[1] + E(c, 2) * x[2];
                }
    }
    StrainField s = sym_grad(u);
    std::array<int, 3> cell{2, 3, 4};
    Eigen::MatrixXd S = strain_at_cell(s, cell);
    Eigen::MatrixXd expected = 0.5 * (E + E.transpose());
    CHECK((S - expected).norm() < 1e-12);
}
