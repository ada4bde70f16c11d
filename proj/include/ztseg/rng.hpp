#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "ztseg/types.hpp"

namespace ztseg {

// Seeded RNG with fixed sampling algorithms. std::mt19937_64 produces a
// standardized bit stream, and every distribution here is implemented
// explicitly, so artifacts are reproducible across standard libraries
// (std::*_distribution makes no such guarantee).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform on [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    int uniform_int(int n) {
        // rejection-free modulo is biased; use rejection sampling
        const std::uint64_t bound = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t u;
        do { u = gen_(); } while (u >= limit);
        return static_cast<int>(u % bound);
    }

    // Standard normal via Box-Muller, pairs cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // Gamma(alpha, 1) via Marsaglia-Tsang; alpha < 1 boosted through
    // Gamma(alpha+1) * U^(1/alpha).
    double gamma(double alpha) {
        require(alpha > 0.0, "gamma: alpha must be positive");
        if (alpha < 1.0) {
            const double u = std::max(uniform(), 1e-300);
            return gamma(alpha + 1.0) * std::pow(u, 1.0 / alpha);
        }
        const double d = alpha - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    // Symmetric Dirichlet(alpha) over k components.
    Vector dirichlet(double alpha, int k) {
        Vector g(k);
        double sum = 0.0;
        for (int i = 0; i < k; ++i) {
            g[i] = gamma(alpha);
            sum += g[i];
        }
        if (sum <= 0.0) {
            g.setConstant(1.0 / k);
            return g;
        }
        return g / sum;
    }

    // Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
            std::swap(v[i], v[uniform_int(i + 1)]);
        }
    }

    // m distinct values from [0, n), ascending.
    std::vector<int> sample_without_replacement(int n, int m) {
        require(m <= n, "sample_without_replacement: m > n");
        std::vector<int> pool(n);
        for (int i = 0; i < n; ++i) pool[i] = i;
        for (int i = 0; i < m; ++i) {
            std::swap(pool[i], pool[i + uniform_int(n - i)]);
        }
        std::vector<int> out(pool.begin(), pool.begin() + m);
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// splitmix64-style mix for deriving independent seed streams.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace ztseg
