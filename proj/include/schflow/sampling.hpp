#pragma once

#include <Eigen/Dense>
#include <Eigen/QR>
#include <cstdint>
#include <random>
#include <vector>

#include "schflow/numeric.hpp"
#include "schflow/simulator.hpp"
#include "schflow/spectrum.hpp"
#include "schflow/transport.hpp"

namespace schflow {

inline constexpr std::uint64_t default_seed = 0x5EED;

struct Rng {
    std::mt19937_64 engine;

    explicit Rng(std::uint64_t seed) : engine(seed) {}

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine); }
    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(engine);
    }
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) { // inclusive
        return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine);
    }
    double gauss() { return std::normal_distribution<double>(0.0, 1.0)(engine); }
};

enum class SpectrumStyle { generic, dyadic, wide };

// Random canonical spectra. `generic` draws flat-ish weights, `dyadic` splits
// 1 into exact powers of two, `wide` spreads atoms across max_scale octaves.
inline SchmidtSpectrum random_spectrum(Rng& rng, std::size_t max_atoms, SpectrumStyle style,
                                       double max_scale = 8.0) {
    switch (style) {
    case SpectrumStyle::generic: {
        std::size_t n = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(max_atoms)));
        std::vector<double> vals;
        for (std::size_t i = 0; i < n; ++i) vals.push_back(rng.uniform(0.05, 1.0));
        return normalize_spectrum(vals, {}, true);
    }
    case SpectrumStyle::dyadic: {
        std::vector<double> vals{1.0};
        while (vals.size() < max_atoms) {
            std::size_t k = static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(vals.size()) - 1));
            if (vals[k] <= std::ldexp(1.0, -static_cast<int>(max_scale))) break;
            double half = vals[k] / 2.0;
            vals[k] = half;
            vals.push_back(half);
            if (rng.uniform() < 0.15) break;
        }
        return normalize_spectrum(vals, {}, false);
    }
    case SpectrumStyle::wide: {
        std::size_t n = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(max_atoms)));
        std::vector<double> vals;
        for (std::size_t i = 0; i < n; ++i)
            vals.push_back(std::exp2(-rng.uniform(0.0, max_scale)));
        return normalize_spectrum(vals, {}, true);
    }
    }
    fail(Errc::out_of_domain, "unknown spectrum style");
}

inline SchmidtSpectrum random_spectrum_mixed(Rng& rng, std::size_t max_atoms,
                                             double max_scale = 8.0) {
    double pick = rng.uniform();
    SpectrumStyle style = pick < 0.4 ? SpectrumStyle::generic
                          : pick < 0.7 ? SpectrumStyle::dyadic
                                       : SpectrumStyle::wide;
    return random_spectrum(rng, max_atoms, style, max_scale);
}

// Source/target pair whose transport distance stays under max_d. Rejection
// sampling with a safe fallback, so callers always get a usable pair.
inline std::pair<SchmidtSpectrum, SchmidtSpectrum> random_bounded_pair(Rng& rng,
                                                                       std::size_t max_atoms,
                                                                       double max_d) {
    for (int attempt = 0; attempt < 200; ++attempt) {
        SchmidtSpectrum a = random_spectrum_mixed(rng, max_atoms, 4.0);
        SchmidtSpectrum b = random_spectrum_mixed(rng, max_atoms, 4.0);
        if (emd_linf_quantile(a, b) <= max_d) return {std::move(a), std::move(b)};
    }
    SchmidtSpectrum a = normalize_spectrum({0.5, 0.5});
    return {a, a};
}

// Haar-distributed unitary via QR of a complex Gaussian matrix with the
// R-diagonal phase fix.
inline Eigen::MatrixXcd haar_unitary(Rng& rng, Eigen::Index n) {
    Eigen::MatrixXcd z(n, n);
    for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c < n; ++c) z(r, c) = cplx{rng.gauss(), rng.gauss()};
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(z);
    Eigen::MatrixXcd q = qr.householderQ();
    Eigen::VectorXcd diag = qr.matrixQR().diagonal();
    for (Eigen::Index k = 0; k < n; ++k) {
        double a = std::abs(diag(k));
        q.col(k) *= a > 0.0 ? diag(k) / a : cplx{1.0, 0.0};
    }
    return q;
}

// Random protocol alternating local Haar rotations with register moves; the
// state shape decides what a move costs, the caller just picks how many.
inline CommUnitary random_comm_unitary(Rng& rng, const BipartiteState& st,
                                       const std::vector<std::string>& movable, std::size_t moves) {
    CommUnitary u;
    BipartiteState probe = st; // tracks ownership to size the local rotations
    auto party_dim = [&](Party p) {
        std::int64_t d = 1;
        for (const auto& r : probe.registers)
            if (r.owner == p) d *= r.dim;
        return d;
    };
    auto rotate = [&](Party p) {
        std::int64_t d = party_dim(p);
        if (d > 1 && d <= 512) u.ops.push_back(LocalUnitary{p, haar_unitary(rng, d)});
    };
    rotate(Party::A);
    for (std::size_t t = 0; t < moves && t < movable.size(); ++t) {
        std::size_t k = probe.reg_index(movable[t]);
        Party from = probe.registers[k].owner;
        Party to = from == Party::A ? Party::B : Party::A;
        u.ops.push_back(MoveRegister{movable[t], from, to});
        probe.registers[k].owner = to;
        rotate(to);
    }
    rotate(Party::B);
    return u;
}

} // namespace schflow
