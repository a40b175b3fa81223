#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string_view>

namespace xflowdg {

/// Deterministic random stream (xoshiro256++ seeded via splitmix64).
/// Self-contained so that streams serialize bit-exactly into checkpoints;
/// standard-library distributions give no such guarantee.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& w : s_) w = splitmix64(x);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Unbiased integer in [0, n).
    std::uint64_t uniform_int(std::uint64_t n) {
        const std::uint64_t lim = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= lim);
        return x % n;
    }

    /// Standard normal via Box-Muller; the spare deviate is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    /// Full state: 4 stream words, spare-cache flag, spare bits.
    std::array<std::uint64_t, 6> state() const {
        std::array<std::uint64_t, 6> out{};
        for (int i = 0; i < 4; ++i) out[static_cast<std::size_t>(i)] = s_[static_cast<std::size_t>(i)];
        out[4] = has_spare_ ? 1u : 0u;
        std::uint64_t bits;
        static_assert(sizeof bits == sizeof spare_);
        __builtin_memcpy(&bits, &spare_, sizeof bits);
        out[5] = bits;
        return out;
    }

    void set_state(const std::array<std::uint64_t, 6>& st) {
        for (int i = 0; i < 4; ++i) s_[static_cast<std::size_t>(i)] = st[static_cast<std::size_t>(i)];
        has_spare_ = st[4] != 0;
        __builtin_memcpy(&spare_, &st[5], sizeof spare_);
    }

private:
    static std::uint64_t splitmix64(std::uint64_t& x) {
        x += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

    std::array<std::uint64_t, 4> s_{};
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// FNV-1a 64-bit hash; used for prompt perturbation seeds and file digests.
inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

/// Stable stream derivation: mix a base seed with a stream tag.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t x = base ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace xflowdg
