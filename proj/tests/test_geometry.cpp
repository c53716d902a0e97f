#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "stokesrve/errors.hpp"
#include "stokesrve/geometry.hpp"

using namespace stokesrve;

namespace {

// independent oracle: O(n^2) periodic surface-gap scan with explicit image
// shifts, no minimum-image shortcut
double brute_force_gap(const InclusionSet& set) {
    const int d = set.dim;
    const double L = set.cell_length;
    double best = std::numeric_limits<double>::infinity();
    const long n = static_cast<long>(set.centers.size());
    for (long i = 0; i < n; ++i) {
        for (long j = i; j < n; ++j) {
            for (int sx = -1; sx <= 1; ++sx)
                for (int sy = -1; sy <= 1; ++sy)
                    for (int sz = (d == 3 ? -1 : 0); sz <= (d == 3 ? 1 : 0); ++sz) {
                        if (i == j && sx == 0 && sy == 0 && sz == 0) continue;
                        double dist2 = 0.0;
                        const double sh[3] = {sx * L, sy * L, sz * L};
                        for (int c = 0; c < d; ++c) {
                            const double dd =
                                set.centers[i][c] - set.centers[j][c] + sh[c];
                            dist2 += dd * dd;
                        }
                        best = std::min(best, std::sqrt(dist2));
                    }
        }
    }
    return best - 2.0 * set.radius;
}

}  // namespace

TEST_CASE("rsa: zero target fraction gives the empty set") {
    RsaParams p;
    p.dim = 2;
    p.cell_length = 32;
    p.target_fraction = 0.0;
    p.gap = 0.1;
    p.seed = 7;
    InclusionSet set = rsa_generate(p);
    CHECK(set.centers.empty());
    CHECK(set.volume_fraction() == 0.0);
    CHECK(validate(set).pass());
}

TEST_CASE("rsa: lambda=0.10 on the 32-torus hits the forced count with gaps") {
    RsaParams p;
    p.dim = 2;
    p.cell_length = 32;
    p.target_fraction = 0.10;
    p.gap = 0.1;
    p.seed = 7;
    InclusionSet set = rsa_generate(p);

    const long expected = std::lround(0.10 * 32.0 * 32.0 / M_PI);
    CHECK(expected == 33);
    CHECK(static_cast<long>(set.centers.size()) == expected);
    // achieved fraction within one ball volume of target
    CHECK(std::abs(set.volume_fraction() - 0.10) * 32.0 * 32.0 <= M_PI + 1e-12);
    // hardcore: surface gap above delta, centers > 2.1 apart
    CHECK(brute_force_gap(set) > 0.1);
    for (const auto& x : set.centers) {
        CHECK(x[0] >= 0.0);
        CHECK(x[0] < 32.0);
        CHECK(x[1] >= 0.0);
        CHECK(x[1] < 32.0);
    }
    // pure function of (params, seed)
    InclusionSet again = rsa_generate(p);
    REQUIRE(again.centers.size() == set.centers.size());
    for (std::size_t i = 0; i < set.centers.size(); ++i) {
        CHECK(again.centers[i][0] == set.centers[i][0]);
        CHECK(again.centers[i][1] == set.centers[i][1]);
    }
    CHECK(min_surface_gap(set) == doctest::Approx(brute_force_gap(set)).epsilon(1e-14));
}

TEST_CASE("rsa: tight cell either jams or returns a legal tiny packing") {
    RsaParams p;
    p.dim = 2;
    p.cell_length = 4;
    p.target_fraction = 0.25;
    p.gap = 1.5;
    p.seed = 1;
    p.max_attempts = 2000;
    try {
        InclusionSet set = rsa_generate(p);
        CHECK(set.centers.size() >= 1);
        CHECK(set.centers.size() <= 2);
        CHECK(brute_force_gap(set) > 1.5);
    } catch (const JammingFailure&) {
        CHECK(true);  // jamming is an allowed outcome at this density
    }
}

TEST_CASE("rsa: guard rejects fractions beyond the jamming regime") {
    RsaParams p;
    p.dim = 2;
    p.cell_length = 32;
    p.target_fraction = 0.35;
    p.gap = 0.1;
    CHECK_THROWS_AS(rsa_generate(p), InvalidParams);
    p.dim = 3;
    p.target_fraction = 0.28;
    CHECK_THROWS_AS(rsa_generate(p), InvalidParams);
}

TEST_CASE("perturbed lattice: zero jitter gives the exact square lattice") {
    PerturbedLatticeParams p;
    p.dim = 2;
    p.cell_length = 32;
    p.spacing = {4, 4, 4};
    p.jitter = 0.0;
    p.gap = 0.1;
    InclusionSet set = perturbed_lattice_generate(p);
    REQUIRE(set.centers.size() == 64);
    for (const auto& x : set.centers) {
        const double ix = (x[0] - 2.0) / 4.0;
        const double iy = (x[1] - 2.0) / 4.0;
        CHECK(ix == doctest::Approx(std::round(ix)).epsilon(1e-15));
        CHECK(iy == doctest::Approx(std::round(iy)).epsilon(1e-15));
    }
    CHECK(validate(set).pass());
}

TEST_CASE("perturbed lattice: jitter keeps the guaranteed gap") {
    PerturbedLatticeParams p;
    p.dim = 2;
    p.cell_length = 32;
    p.spacing = {4, 4, 4};
    p.jitter = 0.4;
    p.gap = 0.1;
    p.seed = 3;
    InclusionSet set = perturbed_lattice_generate(p);
    REQUIRE(set.centers.size() == 64);
    // spacing 4 >= 2 + 0.1 + 0.8, so pairwise distance >= 4 - 2*0.4 > 2.1
    CHECK(brute_force_gap(set) > 0.1);
    CHECK(validate(set).pass());
}

TEST_CASE("perturbed lattice: precondition violation is rejected") {
    PerturbedLatticeParams p;
    p.dim = 2;
    p.cell_length = 30;
    p.spacing = {3, 3, 3};
    p.jitter = 0.5;
    p.gap = 0.2;
    CHECK_THROWS_AS(perturbed_lattice_generate(p), InvalidParams);
}

TEST_CASE("validate: trivial pass/fail arithmetic") {
    InclusionSet set;
    set.dim = 2;
    set.cell_length = 32;
    set.gap = 0.5;

    SUBCASE("empty set") {
        ValidationReport r = validate(set);
        CHECK(r.pass());
        CHECK(r.volume_fraction == 0.0);
        CHECK(std::isinf(r.min_gap));
    }
    SUBCASE("surface gap 1.0 > 0.5 passes") {
        set.centers = {{0, 0, 0}, {3, 0, 0}};
        ValidationReport r = validate(set);
        CHECK(r.min_gap == doctest::Approx(1.0));
        CHECK(r.pass());
    }
    SUBCASE("surface gap 0.3 < 0.5 fails") {
        set.centers = {{0, 0, 0}, {2.3, 0, 0}};
        ValidationReport r = validate(set);
        CHECK(r.min_gap == doctest::Approx(0.3));
        CHECK_FALSE(r.pass());
    }
}

TEST_CASE("restrict_to_box: containment rule") {
    Box U;
    U.lo = {0, 0, 0};
    U.hi = {1, 1, 0};

    InclusionSet set;
    set.dim = 2;
    set.cell_length = 10;
    set.gap = 0.1;

    SUBCASE("no inclusion fits at large eps") {
        set.centers = {{5, 5, 0}};
        InclusionSet r = restrict_to_box(set, 0.6, U);
        CHECK(r.centers.empty());
    }
    SUBCASE("centered inclusion is retained") {
        set.centers = {{5, 5, 0}};
        InclusionSet r = restrict_to_box(set, 0.1, U);
        REQUIRE(r.centers.size() == 1);
        CHECK(r.centers[0][0] == doctest::Approx(0.5));
        CHECK(r.radius == doctest::Approx(0.1));
    }
    SUBCASE("inclusion too close to the wall is dropped") {
        set.centers = {{0.5, 5, 0}};
        // eps x_n = (0.05, 0.5); 0.05 < eps(1+delta) = 0.11
        InclusionSet r = restrict_to_box(set, 0.1, U);
        CHECK(r.centers.empty());
    }
}

TEST_CASE("restrict_to_box: fraction never exceeds the periodized fraction") {
    RsaParams p;
    p.dim = 2;
    p.cell_length = 8;
    p.target_fraction = 0.1;
    p.gap = 0.2;
    p.seed = 1;
    InclusionSet set = rsa_generate(p);
    Box U;
    U.lo = {0, 0, 0};
    U.hi = {1, 1, 0};
    for (double eps : {0.25, 0.125, 0.0625, 0.03125}) {
        InclusionSet r = restrict_to_box(set, eps, U);
        const double frac =
            static_cast<double>(r.centers.size()) * M_PI * r.radius * r.radius;
        CHECK(frac <= set.volume_fraction() + 1e-12);
        // hardcore survives rescaling: direct pair scan, gap eps*delta
        for (std::size_t i = 0; i < r.centers.size(); ++i)
            for (std::size_t j = i + 1; j < r.centers.size(); ++j) {
                const double dx = r.centers[i][0] - r.centers[j][0];
                const double dy = r.centers[i][1] - r.centers[j][1];
                CHECK(std::sqrt(dx * dx + dy * dy) > 2.0 * r.radius + r.gap - 1e-12);
            }
    }
}

TEST_CASE("serialization: bit-exact round trip") {
    RsaParams p;
    p.dim = 2;
    p.cell_length = 17.25;
    p.target_fraction = 0.08;
    p.gap = 0.13;
    p.seed = 99;
    InclusionSet set = rsa_generate(p);
    REQUIRE(set.centers.size() > 0);

    std::stringstream ss;
    save_inclusions(set, ss);
    InclusionSet back = load_inclusions(ss);
    CHECK(back.dim == set.dim);
    CHECK(back.cell_length == set.cell_length);
    CHECK(back.gap == set.gap);
    CHECK(back.seed == set.seed);
    REQUIRE(back.centers.size() == set.centers.size());
    for (std::size_t i = 0; i < set.centers.size(); ++i)
        for (int c = 0; c < 2; ++c) CHECK(back.centers[i][c] == set.centers[i][c]);
}

TEST_CASE("serialization: malformed header is rejected") {
    std::stringstream ss("2 banana");
    CHECK_THROWS_AS(load_inclusions(ss), FormatError);
}
