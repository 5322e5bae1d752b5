#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace qplr::rng {

/// SplitMix64 finalizer. Used to turn structured seed material (master seed,
/// purpose tag, index) into well-mixed 64-bit stream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(const void *bytes, std::size_t len,
                             std::uint64_t basis = 0xcbf29ce484222325ULL) {
    const auto *p = static_cast<const unsigned char *>(bytes);
    std::uint64_t h = basis;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Derive a child seed from (master, purpose, index). Distinct purposes give
/// independent streams, so components can be re-run in any order without
/// disturbing each other's randomness.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose,
                                 std::uint64_t index = 0) {
    std::uint64_t h = fnv1a64(purpose.data(), purpose.size());
    h = splitmix64(h ^ splitmix64(master));
    return splitmix64(h ^ index);
}

/// Deterministic random stream. The engine (mt19937_64) is fully specified by
/// the standard and the value derivations below are hand-rolled, so sequences
/// are identical across platforms and standard libraries.
class Stream {
  public:
    explicit Stream(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double next_unit() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in [lo, hi).
    double next_uniform(double lo, double hi) {
        return lo + (hi - lo) * next_unit();
    }

    /// Standard normal via Box-Muller (pairs cached).
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_unit();
        double u2 = next_unit();
        while (u1 <= 0.0) {
            u1 = next_unit();
        }
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// Uniform integer in [0, bound) by rejection-free scaling; bound > 0.
    std::uint64_t next_below(std::uint64_t bound) {
        // 53-bit uniform scaled; bias is negligible for bounds << 2^53 and
        // the result stays deterministic across platforms.
        return static_cast<std::uint64_t>(next_unit() *
                                          static_cast<double>(bound));
    }

  private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace qplr::rng
