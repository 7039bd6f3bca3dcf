#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace slcnn {

// Seeded random source. mt19937 is fully specified by the standard, and the
// distributions below are implemented here rather than taken from <random>
// (whose distributions are implementation-defined), so a seed produces the
// same stream on every platform and stdlib.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        std::seed_seq seq{static_cast<uint32_t>(seed),
                          static_cast<uint32_t>(seed >> 32)};
        eng_.seed(seq);
    }

    uint32_t next_u32() { return eng_(); }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform01() {
        uint64_t a = next_u32() >> 5; // 27 bits
        uint64_t b = next_u32() >> 6; // 26 bits
        return (static_cast<double>(a) * 67108864.0 + static_cast<double>(b)) *
               (1.0 / 9007199254740992.0);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Standard normal via Box-Muller; the spare value is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        double u2 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Unbiased integer in [0, n) by rejection.
    uint64_t below(uint64_t n) {
        if (n <= 1) return 0;
        uint64_t span = 0x100000000ull;
        uint64_t limit = span - span % n;
        uint64_t x;
        do {
            x = next_u32();
        } while (x >= limit);
        return x % n;
    }

    // Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace slcnn
