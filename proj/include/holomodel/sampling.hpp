#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "holomodel/types.hpp"

namespace holomodel {

// All grids are seeded; identical (domain, count, seed) always yields the
// identical point list.

inline CVec random_unit_direction(std::mt19937_64& rng, int q) {
    std::normal_distribution<double> g(0.0, 1.0);
    CVec v(q);
    do {
        for (int i = 0; i < q; ++i) v[i] = Complex(g(rng), g(rng));
    } while (v.norm() < 1e-12);
    return v / v.norm();
}

inline std::vector<CVec> interior_samples(const DomainSpec& X, int count, std::uint64_t seed,
                                          double radius_cap = 0.9) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::vector<CVec> out;
    out.reserve(count);
    const int q = X.dim;
    for (int n = 0; n < count; ++n) {
        CVec z(q);
        switch (X.kind) {
            case DomainKind::Ball: {
                CVec dir = random_unit_direction(rng, q);
                double r = radius_cap * std::pow(u01(rng), 1.0 / (2.0 * q));
                z = r * dir;
                break;
            }
            case DomainKind::Polydisc: {
                for (int i = 0; i < q; ++i) {
                    double r = radius_cap * std::sqrt(u01(rng));
                    double th = 2.0 * M_PI * u01(rng);
                    z[i] = std::polar(r, th);
                }
                break;
            }
            case DomainKind::Siegel: {
                // height in [0.2, 5], horizontal parts in a box
                double h = 0.2 + 4.8 * u01(rng);
                double x = -4.0 + 8.0 * u01(rng);
                for (int i = 1; i < q; ++i) {
                    double rr = std::sqrt(u01(rng));
                    double th = 2.0 * M_PI * u01(rng);
                    z[i] = std::polar(rr, th);
                }
                double w2 = 0.0;
                for (int i = 1; i < q; ++i) w2 += std::norm(z[i]);
                z[0] = Complex(x, h + w2);
                break;
            }
        }
        out.push_back(z);
    }
    return out;
}

// Near-boundary shell, gap away from the boundary (ball/polydisc only).
inline std::vector<CVec> shell_samples(const DomainSpec& X, int count, std::uint64_t seed,
                                       double gap = 1e-4) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::vector<CVec> out;
    out.reserve(count);
    const int q = X.dim;
    for (int n = 0; n < count; ++n) {
        CVec z(q);
        if (X.kind == DomainKind::Ball) {
            z = (1.0 - gap) * random_unit_direction(rng, q);
        } else {
            for (int i = 0; i < q; ++i)
                z[i] = std::polar(1.0 - gap, 2.0 * M_PI * u01(rng));
        }
        out.push_back(z);
    }
    return out;
}

} // namespace holomodel
