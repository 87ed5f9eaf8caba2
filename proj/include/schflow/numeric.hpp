#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "schflow/errors.hpp"

namespace schflow {

// Shared tolerances. These are part of the observable contract (tests and the
// acceptance suite pin them), so they live in one place.
namespace tol {
inline constexpr double norm = 1e-9;       // spectrum / state normalization
inline constexpr double dist = 1e-9;       // distance comparisons, bound slack
inline constexpr double pour = 1e-12;      // residual mass treated as zero in the slot filler
inline constexpr double prep_norm = 1e-12; // controlled-prepare column normalization
inline constexpr double discard = 1e-6;    // amplitude norm allowed off |0...0> when discarding
inline constexpr double rank = 1e-10;      // singular values below this do not count toward rank
inline constexpr double grid = 1e-12;      // calculus inequality slack
inline constexpr double trace = 1e-9;      // trace-norm comparisons
inline constexpr double replay = 1e-9;     // 1 - fidelity allowed after protocol replay
} // namespace tol

// Compensated (Neumaier) summation. Cumulative masses and conservation checks
// go through this so thousands of atoms do not drift past the 1e-9 gates.
class NeumaierSum {
public:
    void add(double x) noexcept {
        double t = s_ + x;
        if (std::abs(s_) >= std::abs(x))
            c_ += (s_ - t) + x;
        else
            c_ += (x - t) + s_;
        s_ = t;
    }
    double value() const noexcept { return s_ + c_; }

private:
    double s_ = 0.0;
    double c_ = 0.0;
};

inline double sum_compensated(const std::vector<double>& xs) {
    NeumaierSum acc;
    for (double x : xs) acc.add(x);
    return acc.value();
}

// log2(1/lambda) for lambda in (0,1]. Decomposing through frexp makes the
// result exact for dyadic lambda (frexp is exact; log2 on [0.5,1) never
// crosses an integer), which keeps dyadic positions, spreads and distances
// free of libm rounding.
inline double log_position(double lambda) {
    if (!(lambda > 0.0) || lambda > 1.0)
        fail(Errc::out_of_domain, "coefficient outside (0,1]");
    int e = 0;
    double f = std::frexp(lambda, &e); // lambda = f * 2^e, f in [0.5,1)
    if (f == 0.5) return static_cast<double>(1 - e);
    return static_cast<double>(-e) - std::log2(f);
}

// ceil of a nonnegative distance with 1e-9 slack: positions are exact for
// dyadic inputs, so the nudge only absorbs float noise on near-dyadic data.
// Safe for the slot construction, which needs m - l <= ceil(d) + 1 with
// m - l an integer bounded by d + 1.
inline int ceil_distance(double d) {
    double c = std::ceil(d - tol::dist);
    return c <= 0.0 ? 0 : static_cast<int>(c);
}

inline int ceil_log2_int(std::int64_t n) {
    if (n <= 0) fail(Errc::out_of_domain, "ceil_log2 of nonpositive value");
    int q = 0;
    std::int64_t p = 1;
    while (p < n) {
        p <<= 1;
        ++q;
    }
    return q;
}

// 17 significant digits: enough to round-trip any double exactly.
inline std::string format_double17(double x) {
    if (!std::isfinite(x)) fail(Errc::out_of_domain, "non-finite value in output");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic per-case seed so parallel suite runs match serial ones.
inline std::uint64_t case_seed(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(seed ^ splitmix64(index + 0x51ed5eedULL));
}

} // namespace schflow
