#include "stokesrve/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "stokesrve/errors.hpp"

namespace stokesrve {

double InclusionSet::volume_fraction() const {
    if (centers.empty()) return 0.0;
    const double vol = periodic ? std::pow(cell_length, dim)
                                : std::pow(cell_length, dim);
    return static_cast<double>(centers.size()) * ball_volume(dim) *
           std::pow(radius, dim) / vol;
}

namespace {

void check_dim(int dim) {
    if (dim != 2 && dim != 3) throw InvalidParams("dim must be 2 or 3");
}

// distance from candidate to the nearest accepted center (min image),
// including the candidate's own periodic images (at distance >= L).
bool admissible(const Vec3& x, const std::vector<Vec3>& accepted, double L,
                int dim, double min_dist) {
    if (L <= min_dist) return false;  // own periodic image too close
    for (const auto& y : accepted) {
        Vec3 d = min_image(x, y, L, dim);
        if (vnorm(d, dim) <= min_dist) return false;
    }
    return true;
}

}  // namespace

InclusionSet rsa_generate(const RsaParams& p) {
    check_dim(p.dim);
    if (p.cell_length <= 0) throw InvalidParams("cell_length must be positive");
    if (p.gap <= 0) throw InvalidParams("gap must be positive");
    if (p.target_fraction < 0 || p.target_fraction >= 1)
        throw InvalidParams("target_fraction must lie in [0,1)");
    const double guard = p.dim == 2 ? p.max_fraction_2d : p.max_fraction_3d;
    if (p.target_fraction > guard) {
        throw InvalidParams("target_fraction " + fmt17(p.target_fraction) +
                            " above the RSA guard " + fmt17(guard));
    }

    InclusionSet set;
    set.dim = p.dim;
    set.cell_length = p.cell_length;
    set.radius = 1.0;
    set.gap = p.gap;
    set.seed = p.seed;
    set.tag = GeneratorTag::RSA;

    const double cell_vol = std::pow(p.cell_length, p.dim);
    const long n_target =
        std::lround(p.target_fraction * cell_vol / ball_volume(p.dim));
    if (n_target == 0) return set;

    const double min_dist = 2.0 + p.gap;
    if (p.cell_length <= min_dist)
        throw InvalidParams("cell_length too small for one inclusion at this gap");

    std::mt19937_64 rng(p.seed);
    int consecutive_rejections = 0;
    while (static_cast<long>(set.centers.size()) < n_target) {
        Vec3 x{0, 0, 0};
        for (int c = 0; c < p.dim; ++c) x[c] = uniform01(rng) * p.cell_length;
        if (admissible(x, set.centers, p.cell_length, p.dim, min_dist)) {
            set.centers.push_back(x);
            consecutive_rejections = 0;
        } else if (++consecutive_rejections >= p.max_attempts) {
            throw JammingFailure("rsa_generate: " + std::to_string(p.max_attempts) +
                                 " consecutive rejections at " +
                                 std::to_string(set.centers.size()) + "/" +
                                 std::to_string(n_target) + " centers");
        }
    }
    return set;
}

InclusionSet perturbed_lattice_generate(const PerturbedLatticeParams& p) {
    check_dim(p.dim);
    if (p.cell_length <= 0) throw InvalidParams("cell_length must be positive");
    if (p.gap <= 0) throw InvalidParams("gap must be positive");
    if (p.jitter < 0) throw InvalidParams("jitter must be nonnegative");

    std::array<long, 3> counts{1, 1, 1};
    for (int c = 0; c < p.dim; ++c) {
        const double s = p.spacing[c];
        if (s < 2.0 + p.gap + 2.0 * p.jitter) {
            throw InvalidParams("spacing " + fmt17(s) + " < 2 + gap + 2*jitter = " +
                                fmt17(2.0 + p.gap + 2.0 * p.jitter));
        }
        const double ratio = p.cell_length / s;
        counts[c] = std::lround(ratio);
        if (std::abs(ratio - static_cast<double>(counts[c])) > 1e-9 || counts[c] < 1)
            throw InvalidParams("cell_length must be an integer multiple of spacing");
    }

    InclusionSet set;
    set.dim = p.dim;
    set.cell_length = p.cell_length;
    set.radius = 1.0;
    set.gap = p.gap;
    set.seed = p.seed;
    set.tag = GeneratorTag::PerturbedLattice;

    std::mt19937_64 rng(p.seed);
    std::array<long, 3> idx{0, 0, 0};
    const long total = counts[0] * counts[1] * (p.dim == 3 ? counts[2] : 1);
    set.centers.reserve(total);
    for (long k = 0; k < total; ++k) {
        Vec3 x{0, 0, 0};
        for (int c = 0; c < p.dim; ++c) {
            double j = p.jitter > 0 ? (2.0 * uniform01(rng) - 1.0) * p.jitter : 0.0;
            x[c] = (static_cast<double>(idx[c]) + 0.5) * p.spacing[c] + j;
            // jitter cannot push outside [0,L) by the spacing precondition,
            // but guard the wrap anyway
            if (x[c] >= p.cell_length) x[c] -= p.cell_length;
            if (x[c] < 0) x[c] += p.cell_length;
        }
        set.centers.push_back(x);
        // row-major advance
        for (int c = 0; c < p.dim; ++c) {
            if (++idx[c] < counts[c]) break;
            idx[c] = 0;
        }
    }
    return set;
}

double min_surface_gap(const InclusionSet& set) {
    const int d = set.dim;
    double min_dist = std::numeric_limits<double>::infinity();
    const std::size_t n = set.centers.size();
    if (set.periodic && n >= 1) {
        min_dist = set.cell_length;  // nearest own periodic image
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double dist;
            if (set.periodic) {
                dist = vnorm(min_image(set.centers[i], set.centers[j],
                                       set.cell_length, d), d);
            } else {
                dist = vnorm(vsub(set.centers[i], set.centers[j]), d);
            }
            min_dist = std::min(min_dist, dist);
        }
    }
    return min_dist - 2.0 * set.radius;
}

ValidationReport validate(const InclusionSet& set) {
    ValidationReport rep;
    rep.min_gap = min_surface_gap(set);
    rep.volume_fraction = set.volume_fraction();
    rep.gap_ok = set.centers.empty() || rep.min_gap > set.gap;
    rep.fraction_ok = rep.volume_fraction >= 0.0 && rep.volume_fraction < 1.0;
    rep.centers_in_cell = true;
    if (set.periodic) {
        for (const auto& x : set.centers) {
            for (int c = 0; c < set.dim; ++c) {
                if (x[c] < 0.0 || x[c] >= set.cell_length) rep.centers_in_cell = false;
            }
        }
    }
    return rep;
}

InclusionSet restrict_to_box(const InclusionSet& set, double eps, const Box& box) {
    if (eps <= 0) throw InvalidParams("eps must be positive");
    if (!set.periodic) throw InvalidParams("restrict_to_box expects a periodic set");
    const int d = set.dim;
    for (int c = 0; c < d; ++c) {
        if (box.side(c) <= 0) throw InvalidParams("box must have positive extent");
    }

    InclusionSet out;
    out.dim = d;
    out.periodic = false;
    out.radius = eps * set.radius;
    out.gap = eps * set.gap;
    out.cell_length = box.side(0);
    out.origin = box.lo;
    out.seed = set.seed;
    out.tag = GeneratorTag::Manual;

    // margin from the N_eps(U) containment rule: eps*(I_n + gap*B) inside U
    const double margin = eps * (set.radius + set.gap);
    const double period = eps * set.cell_length;

    std::array<long, 3> klo{0, 0, 0}, khi{0, 0, 0};
    for (int c = 0; c < d; ++c) {
        klo[c] = static_cast<long>(std::floor((box.lo[c] - period) / period)) - 1;
        khi[c] = static_cast<long>(std::ceil((box.hi[c] + period) / period)) + 1;
    }
    for (const auto& xn : set.centers) {
        for (long kx = klo[0]; kx <= khi[0]; ++kx) {
            for (long ky = klo[1]; ky <= khi[1]; ++ky) {
                const long kz_lo = d == 3 ? klo[2] : 0;
                const long kz_hi = d == 3 ? khi[2] : 0;
                for (long kz = kz_lo; kz <= kz_hi; ++kz) {
                    Vec3 y{eps * (xn[0] + kx * set.cell_length),
                           eps * (xn[1] + ky * set.cell_length),
                           d == 3 ? eps * (xn[2] + kz * set.cell_length) : 0.0};
                    bool keep = true;
                    for (int c = 0; c < d; ++c) {
                        if (y[c] - margin < box.lo[c] || y[c] + margin > box.hi[c])
                            keep = false;
                    }
                    if (keep) out.centers.push_back(y);
                }
            }
        }
    }
    std::sort(out.centers.begin(), out.centers.end());
    return out;
}

void save_inclusions(const InclusionSet& set, std::ostream& os) {
    os << set.dim << ' ' << fmt17(set.cell_length) << ' ' << fmt17(set.gap) << ' '
       << set.centers.size() << ' ' << set.seed << '\n';
    for (const auto& x : set.centers) {
        os << fmt17(x[0]);
        for (int c = 1; c < set.dim; ++c) os << ' ' << fmt17(x[c]);
        os << '\n';
    }
}

void save_inclusions(const InclusionSet& set, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw FormatError("cannot open " + path + " for writing");
    save_inclusions(set, os);
}

InclusionSet load_inclusions(std::istream& is) {
    InclusionSet set;
    std::size_t n = 0;
    if (!(is >> set.dim >> set.cell_length >> set.gap >> n >> set.seed))
        throw FormatError("inclusion file: malformed header (want: d L delta n seed)");
    check_dim(set.dim);
    set.tag = GeneratorTag::Manual;
    set.centers.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (int c = 0; c < set.dim; ++c) {
            if (!(is >> set.centers[i][c]))
                throw FormatError("inclusion file: truncated at center " +
                                  std::to_string(i));
        }
    }
    return set;
}

InclusionSet load_inclusions(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open " + path);
    return load_inclusions(is);
}

}  // namespace stokesrve
