#pragma once

#include "pflab/linalg.hpp"

#include <cstdint>
#include <random>

namespace pflab {

// splitmix64 finalizer; used to derive independent substreams from
// (seed, tag) pairs so results do not depend on evaluation order.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic RNG. The raw stream is std::mt19937_64 (whose output
// sequence is pinned by the standard); uniform/normal mappings are done
// explicitly here rather than through std::*_distribution, whose output
// is implementation-defined and would break frozen-value tests.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : m_gen(seed) {}

    std::uint64_t next_u64() { return m_gen(); }

    // uniform on [0, 1): 53 random mantissa bits
    double uniform() {
        return static_cast<double>(m_gen() >> 11) * 0x1.0p-53;
    }

    // uniform on (0, 1] (safe to feed to log)
    double uniform_pos() { return 1.0 - uniform(); }

    // standard normal via Box-Muller; generates pairs, caches the spare
    double normal() {
        if (m_has_spare) {
            m_has_spare = false;
            return m_spare;
        }
        double u1 = uniform_pos();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double th = 2.0 * M_PI * u2;
        m_spare = r * std::sin(th);
        m_has_spare = true;
        return r * std::cos(th);
    }

    Vec normal_vec(int d) {
        Vec v(d);
        for (int i = 0; i < d; ++i) {
            v(i) = normal();
        }
        return v;
    }

    // uniform integer in [0, n) by rejection (unbiased)
    std::uint64_t uniform_int(std::uint64_t n) {
        std::uint64_t lim = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x;
        do {
            x = m_gen();
        } while (x >= lim);
        return x % n;
    }

private:
    std::mt19937_64 m_gen;
    bool m_has_spare = false;
    double m_spare = 0.0;
};

inline Rng substream(std::uint64_t seed, std::uint64_t tag) {
    return Rng(mix64(seed ^ mix64(tag)));
}

} // namespace pflab
