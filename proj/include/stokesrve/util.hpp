#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>

namespace stokesrve {

using Vec3 = std::array<double, 3>;

inline Vec3 vsub(const Vec3& a, const Vec3& b) {
    return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

inline double vdot(const Vec3& a, const Vec3& b, int dim) {
    double s = 0.0;
    for (int c = 0; c < dim; ++c) s += a[c] * b[c];
    return s;
}

inline double vnorm(const Vec3& a, int dim) { return std::sqrt(vdot(a, a, dim)); }

// Minimum-image displacement a-b on the cubic torus of side L.
inline Vec3 min_image(const Vec3& a, const Vec3& b, double L, int dim) {
    Vec3 d = vsub(a, b);
    for (int c = 0; c < dim; ++c) {
        d[c] -= L * std::round(d[c] / L);
    }
    return d;
}

// Uniform double in [0,1) from the top 53 bits of the generator output.
// uniform_real_distribution is implementation-defined; this is not.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// 17 significant digits: round-trips IEEE doubles exactly.
inline std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

// FNV-1a, used for artifact checksums in run manifests.
inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 14695981039346656037ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline double ball_volume(int dim) {
    // unit ball: pi in 2D, 4*pi/3 in 3D
    return dim == 2 ? M_PI : 4.0 * M_PI / 3.0;
}

}  // namespace stokesrve
