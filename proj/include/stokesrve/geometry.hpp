#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "stokesrve/util.hpp"

namespace stokesrve {

enum class GeneratorTag { RSA, PerturbedLattice, Manual };

struct Box {
    Vec3 lo{0, 0, 0};
    Vec3 hi{0, 0, 0};
    double side(int c) const { return hi[c] - lo[c]; }
};

// Periodic hardcore configuration of equal balls on the torus [0,L)^d.
// Generated sets always have radius 1; restrict_to_box produces rescaled
// (radius eps, non-periodic) sets living in an absolute box.
struct InclusionSet {
    int dim = 2;
    double cell_length = 0.0;  // torus side, or box side for restricted sets
    double radius = 1.0;
    double gap = 0.1;  // hardcore surface-to-surface clearance delta
    bool periodic = true;
    Vec3 origin{0, 0, 0};  // lower corner for non-periodic (restricted) sets
    std::uint64_t seed = 0;
    GeneratorTag tag = GeneratorTag::Manual;
    std::vector<Vec3> centers;

    std::size_t size() const { return centers.size(); }
    double volume_fraction() const;
};

struct RsaParams {
    int dim = 2;
    double cell_length = 32.0;
    double target_fraction = 0.1;
    double gap = 0.1;
    std::uint64_t seed = 0;
    int max_attempts = 200000;  // consecutive rejections before JammingFailure
    // guard against asking for densities RSA cannot reach
    double max_fraction_2d = 0.30;
    double max_fraction_3d = 0.25;
};

InclusionSet rsa_generate(const RsaParams& p);

struct PerturbedLatticeParams {
    int dim = 2;
    double cell_length = 32.0;
    Vec3 spacing{4.0, 4.0, 4.0};  // per-axis lattice pitch
    double jitter = 0.0;          // uniform jitter amplitude per coordinate
    double gap = 0.1;
    std::uint64_t seed = 0;
};

InclusionSet perturbed_lattice_generate(const PerturbedLatticeParams& p);

struct ValidationReport {
    double min_gap = std::numeric_limits<double>::infinity();  // surface gap
    double volume_fraction = 0.0;
    bool gap_ok = true;
    bool fraction_ok = true;
    bool centers_in_cell = true;
    bool pass() const { return gap_ok && fraction_ok && centers_in_cell; }
};

ValidationReport validate(const InclusionSet& set);

// Minimum surface-to-surface gap by brute-force O(n^2) scan; includes
// self-image distances across the torus. +inf for the empty set.
double min_surface_gap(const InclusionSet& set);

// Keep the eps-rescaled inclusions whose gap-enlargement fits inside the
// box: tiles the periodic set, keeps centers y with dist(y, boundary of U)
// >= eps*(radius+gap) on every side. Result has radius eps*r, absolute
// coordinates, periodic=false.
InclusionSet restrict_to_box(const InclusionSet& set, double eps, const Box& box);

// Plain-text serialization: header "d L delta n_centers seed", one center
// per line, 17 significant digits. Bit-exact round trip.
void save_inclusions(const InclusionSet& set, std::ostream& os);
void save_inclusions(const InclusionSet& set, const std::string& path);
InclusionSet load_inclusions(std::istream& is);
InclusionSet load_inclusions(const std::string& path);

}  // namespace stokesrve
