#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "schflow/errors.hpp"
#include "schflow/numeric.hpp"

namespace schflow {

// A Schmidt spectrum in canonical form: strictly positive coefficients sorted
// descending (ties broken by label), summing to 1 within 1e-9. Labels default
// to the decimal input index and survive normalization, so provenance of an
// atom is never lost by sorting or zero-stripping.
struct SchmidtSpectrum {
    std::vector<double> coefficients;
    std::vector<std::string> labels;

    std::size_t size() const noexcept { return coefficients.size(); }
    bool operator==(const SchmidtSpectrum&) const = default;
};

inline SchmidtSpectrum normalize_spectrum(const std::vector<double>& values,
                                          std::vector<std::string> labels = {},
                                          bool renormalize = false) {
    if (!labels.empty() && labels.size() != values.size())
        fail(Errc::out_of_domain, "labels length does not match coefficients");

    std::vector<double> coeffs;
    std::vector<std::string> kept;
    coeffs.reserve(values.size());
    kept.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        double v = values[i];
        if (v < 0.0) fail(Errc::negative_entry, "negative coefficient at index " + std::to_string(i));
        if (v == 0.0) continue;
        coeffs.push_back(v);
        kept.push_back(labels.empty() ? std::to_string(i) : labels[i]);
    }
    if (coeffs.empty()) fail(Errc::all_zero, "spectrum has no positive coefficients");

    double s = sum_compensated(coeffs);
    if (renormalize) {
        for (double& c : coeffs) c /= s;
    } else if (std::abs(s - 1.0) > tol::norm) {
        fail(Errc::not_normalized, "coefficients sum to " + format_double17(s));
    }

    std::vector<std::size_t> order(coeffs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (coeffs[a] != coeffs[b]) return coeffs[a] > coeffs[b];
        return kept[a] < kept[b];
    });

    SchmidtSpectrum out;
    out.coefficients.reserve(coeffs.size());
    out.labels.reserve(coeffs.size());
    for (std::size_t k : order) {
        out.coefficients.push_back(coeffs[k]);
        out.labels.push_back(kept[k]);
    }
    return out;
}

// Per-atom positions log2(1/coeff), in canonical (descending-coefficient)
// order, hence nondecreasing.
inline std::vector<double> atom_positions(const SchmidtSpectrum& spec) {
    std::vector<double> pos;
    pos.reserve(spec.size());
    for (double c : spec.coefficients) pos.push_back(log_position(c));
    return pos;
}

struct LogMass {
    double position;
    double mass;
};

// Mass distribution over log-positions; atoms strictly ascending in position,
// exactly equal positions merged.
struct LogMassDistribution {
    std::vector<LogMass> atoms;

    double total_mass() const {
        NeumaierSum s;
        for (const auto& a : atoms) s.add(a.mass);
        return s.value();
    }
};

inline LogMassDistribution log_positions(const SchmidtSpectrum& spec) {
    std::vector<double> pos = atom_positions(spec);
    // Canonical order gives nondecreasing positions already; merge equal runs.
    LogMassDistribution out;
    for (std::size_t i = 0; i < pos.size(); ++i) {
        if (!out.atoms.empty() && out.atoms.back().position == pos[i])
            out.atoms.back().mass += spec.coefficients[i];
        else
            out.atoms.push_back({pos[i], spec.coefficients[i]});
    }
    return out;
}

// Right-continuous-from-the-left inverse CDF over (0,1]: value(q) = values[k]
// for q in (breakpoints[k-1], breakpoints[k]], with an implicit breakpoint 0
// in front. The last breakpoint is pinned to exactly 1.
struct QuantileFunction {
    std::vector<double> breakpoints;
    std::vector<double> values;

    std::size_t segment(double q) const {
        if (!(q > 0.0) || q > 1.0) fail(Errc::out_of_domain, "quantile argument outside (0,1]");
        auto it = std::lower_bound(breakpoints.begin(), breakpoints.end(), q);
        return static_cast<std::size_t>(it - breakpoints.begin());
    }

    double operator()(double q) const { return values[segment(q)]; }
};

inline QuantileFunction quantile_function(const SchmidtSpectrum& spec) {
    LogMassDistribution dist = log_positions(spec);
    QuantileFunction qf;
    qf.breakpoints.reserve(dist.atoms.size());
    qf.values.reserve(dist.atoms.size());
    NeumaierSum cum;
    for (const auto& a : dist.atoms) {
        cum.add(a.mass);
        qf.breakpoints.push_back(cum.value());
        qf.values.push_back(a.position);
    }
    // Cumulative drift stays within the normalization gate; pin the top.
    if (std::abs(qf.breakpoints.back() - 1.0) > tol::norm)
        fail(Errc::not_normalized, "cumulative mass drifted from 1");
    qf.breakpoints.back() = 1.0;
    return qf;
}

// log2(lambda_max / lambda_min), computed as a position difference so it is
// exact whenever the endpoints are dyadic.
inline double spread(const SchmidtSpectrum& spec) {
    return log_position(spec.coefficients.back()) - log_position(spec.coefficients.front());
}

} // namespace schflow
