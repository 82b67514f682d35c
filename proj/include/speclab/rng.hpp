#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace speclab {

namespace detail {

// SplitMix64 finalizer (Stafford mix13). Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

}  // namespace detail

/// Counter-based splittable stream: output i is mix(key + i*gamma), so a
/// stream is a pure function of (key, counter) and results never depend on
/// which thread consumed which draw. Children are derived by hashing
/// (key, index), giving the (master seed, trial index, draw index) tree the
/// samplers are keyed by.
class RngStream {
public:
    explicit RngStream(std::uint64_t key) : key_(key) {}

    /// Derive an independent child stream. child(i) != child(j) for i != j.
    [[nodiscard]] RngStream child(std::uint64_t index) const {
        return RngStream(detail::mix64(key_ + detail::mix64(index + 1) * detail::kGolden));
    }

    std::uint64_t key() const { return key_; }

    std::uint64_t next_u64() { return detail::mix64(key_ + ++counter_ * detail::kGolden); }

    /// Uniform in [0,1) with 53 random mantissa bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform over {0, ..., bound-1}; rejection sampling, exactly uniform.
    std::uint64_t uniform_below(std::uint64_t bound) {
        const std::uint64_t limit = bound * (UINT64_MAX / bound);
        std::uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return v % bound;
    }

    /// Uniform sign in {+1, -1}.
    double sign() { return (next_u64() & 1) ? 1.0 : -1.0; }

    /// Standard normal via Box-Muller (pairs cached within the stream).
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1;
        do {
            u1 = uniform();
        } while (u1 == 0.0);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * uniform();
        cached_ = r * std::sin(theta);
        have_cached_ = true;
        return r * std::cos(theta);
    }

    /// Uniform random permutation of {0,...,n-1} by Fisher-Yates.
    std::vector<int> permutation(int n) {
        std::vector<int> p(n);
        for (int i = 0; i < n; ++i) p[i] = i;
        for (int i = n - 1; i > 0; --i) {
            const int j = static_cast<int>(uniform_below(static_cast<std::uint64_t>(i) + 1));
            std::swap(p[i], p[j]);
        }
        return p;
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

}  // namespace speclab
