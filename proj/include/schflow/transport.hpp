#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <queue>
#include <vector>

#include "schflow/errors.hpp"
#include "schflow/numeric.hpp"
#include "schflow/spectrum.hpp"

namespace schflow {

struct TransportEntry {
    std::size_t i; // source atom index
    std::size_t j; // target atom index
    double mass;   // > 0
};

struct TransportPlan {
    SchmidtSpectrum source;
    SchmidtSpectrum target;
    std::vector<TransportEntry> entries;

    // Largest per-entry position displacement |log2(chi_i) - log2(ups_j)|.
    double max_move() const {
        std::vector<double> ps = atom_positions(source);
        std::vector<double> pt = atom_positions(target);
        double m = 0.0;
        for (const auto& e : entries) m = std::max(m, std::abs(ps[e.i] - pt[e.j]));
        return m;
    }
};

// Row sums must match the source, column sums the target, within 1e-9.
inline void validate_plan(const TransportPlan& plan) {
    std::vector<NeumaierSum> row(plan.source.size()), col(plan.target.size());
    for (const auto& e : plan.entries) {
        if (e.i >= plan.source.size() || e.j >= plan.target.size())
            fail(Errc::index_out_of_range, "transport entry out of range");
        if (!(e.mass > 0.0)) fail(Errc::invalid_flow, "transport entry with nonpositive mass");
        row[e.i].add(e.mass);
        col[e.j].add(e.mass);
    }
    for (std::size_t i = 0; i < row.size(); ++i)
        if (std::abs(row[i].value() - plan.source.coefficients[i]) > tol::norm)
            fail(Errc::invalid_flow, "row sum mismatch at " + std::to_string(i));
    for (std::size_t j = 0; j < col.size(); ++j)
        if (std::abs(col[j].value() - plan.target.coefficients[j]) > tol::norm)
            fail(Errc::invalid_flow, "column sum mismatch at " + std::to_string(j));
}

// Northwest-corner walk in canonical order. Positions are sorted the same way
// on both sides, so this coupling minimizes the largest displacement; it is
// the witness returned by emd_linf and the feasibility certificate.
inline TransportPlan monotone_coupling(const SchmidtSpectrum& source, const SchmidtSpectrum& target) {
    TransportPlan plan{source, target, {}};
    std::size_t i = 0, j = 0;
    double ri = source.coefficients[0];
    double rj = target.coefficients[0];
    while (i < source.size() && j < target.size()) {
        double take = std::min(ri, rj);
        if (take > tol::pour) plan.entries.push_back({i, j, take});
        ri -= take;
        rj -= take;
        // min() zeroes at least one residual exactly; the other may keep a
        // subtraction sliver. Flushing anything under tol::pour stops rounding
        // noise from being coupled across the whole axis.
        if (ri <= tol::pour) {
            ++i;
            if (i < source.size()) ri = source.coefficients[i];
        }
        if (rj <= tol::pour) {
            ++j;
            if (j < target.size()) rj = target.coefficients[j];
        }
    }
    return plan;
}

// Quantile form of the distance: max_q |F_a^-1(q) - F_b^-1(q)|, evaluated at
// every merged breakpoint (both inverse CDFs are constant between them).
// Breakpoints within tol::pour of each other are the same cumulative mass
// accumulated in two summation orders; the sliver between them is rounding
// noise and must not be transported.
inline double emd_linf_quantile(const SchmidtSpectrum& a, const SchmidtSpectrum& b) {
    QuantileFunction qa = quantile_function(a);
    QuantileFunction qb = quantile_function(b);
    double best = 0.0;
    std::size_t ia = 0, ib = 0;
    while (ia < qa.breakpoints.size() && ib < qb.breakpoints.size()) {
        best = std::max(best, std::abs(qa.values[ia] - qb.values[ib]));
        double ba = qa.breakpoints[ia], bb = qb.breakpoints[ib];
        if (ba <= bb + tol::pour) ++ia;
        if (bb <= ba + tol::pour) ++ib;
    }
    return best;
}

struct EmdResult {
    double distance;
    TransportPlan witness;
};

inline EmdResult emd_linf(const SchmidtSpectrum& a, const SchmidtSpectrum& b) {
    EmdResult r{emd_linf_quantile(a, b), monotone_coupling(a, b)};
    if (r.witness.max_move() > r.distance + tol::dist)
        throw std::logic_error("monotone coupling exceeded the quantile distance");
    return r;
}

inline std::optional<TransportPlan> feasible_coupling(const SchmidtSpectrum& a,
                                                      const SchmidtSpectrum& b, double mu) {
    if (!(mu >= 0.0)) fail(Errc::out_of_domain, "threshold must be nonnegative");
    TransportPlan plan = monotone_coupling(a, b);
    if (plan.max_move() <= mu + tol::dist) return plan;
    return std::nullopt;
}

namespace detail {

// Nearest attained value: the window of quantile levels reaches the run of
// target values v[lo..hi]; a step function attains nothing in between, so the
// distance is to the closest run element, not to the spanned interval.
inline double nearest_attained(double x, const std::vector<double>& values, std::size_t lo,
                               std::size_t hi) {
    if (x <= values[lo]) return values[lo] - x;
    if (x >= values[hi]) return x - values[hi];
    auto first = values.begin() + static_cast<std::ptrdiff_t>(lo);
    auto last = values.begin() + static_cast<std::ptrdiff_t>(hi) + 1;
    auto it = std::lower_bound(first, last, x); // *it >= x, it > first
    return std::min(*it - x, x - *(it - 1));
}

inline double smoothed_eval(const QuantileFunction& qa, const QuantileFunction& qb, double q,
                            double eps) {
    double va = qa(q);
    double lo = q - eps;
    double hi = std::min(q + eps, 1.0);
    std::size_t lo_idx = lo <= 0.0 ? 0 : qb.segment(lo);
    std::size_t hi_idx = qb.segment(hi);
    return nearest_attained(va, qb.values, lo_idx, hi_idx);
}

} // namespace detail

// eps-smoothed distance: max over q of the distance from F_a^-1(q) to the
// values F_b^-1 attains on [q-eps, q+eps] (window clamped to (0,1]). The
// objective is piecewise monotone between breakpoints of q -> (segment of q,
// segments of q-eps and q+eps), so the sweep evaluates every candidate
// breakpoint plus the midpoints between neighbours; midpoints guard against
// (b-eps)+eps rounding landing on the wrong side of a segment edge.
inline double smoothed_emd(const SchmidtSpectrum& a, const SchmidtSpectrum& b, double eps) {
    if (!(eps >= 0.0) || eps > 1.0) fail(Errc::eps_out_of_range, "smoothing outside [0,1]");
    if (eps == 0.0) return emd_linf_quantile(a, b);

    QuantileFunction qa = quantile_function(a);
    QuantileFunction qb = quantile_function(b);

    std::vector<double> cand;
    cand.reserve(qa.breakpoints.size() + 2 * qb.breakpoints.size() + 3);
    auto push = [&](double q) {
        if (q > 0.0 && q <= 1.0) cand.push_back(q);
    };
    for (double q : qa.breakpoints) push(q);
    for (double q : qb.breakpoints) {
        push(q - eps);
        push(q + eps);
    }
    push(eps);
    push(1.0 - eps);
    push(1.0);
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());

    double best = 0.0;
    auto consider = [&](double q) { best = std::max(best, detail::smoothed_eval(qa, qb, q, eps)); };
    consider(cand.front() / 2.0);
    for (std::size_t k = 0; k < cand.size(); ++k) {
        consider(cand[k]);
        if (k + 1 < cand.size()) consider(cand[k] + (cand[k + 1] - cand[k]) / 2.0);
    }
    return best;
}

namespace detail {

// Max-flow feasibility oracle, deliberately independent of the quantile and
// coupling code paths: source -> atoms(a) -> atoms(b) -> sink with a->b arcs
// open iff the displacement is within mu.
inline bool flow_feasible(const std::vector<double>& pa, const std::vector<double>& pb,
                          const std::vector<double>& ma, const std::vector<double>& mb, double mu) {
    std::size_t n = pa.size(), m = pb.size();
    std::size_t V = n + m + 2, S = n + m, T = n + m + 1;
    std::vector<std::vector<double>> cap(V, std::vector<double>(V, 0.0));
    for (std::size_t i = 0; i < n; ++i) cap[S][i] = ma[i];
    for (std::size_t j = 0; j < m; ++j) cap[n + j][T] = mb[j];
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            if (std::abs(pa[i] - pb[j]) <= mu) cap[i][n + j] = 2.0;

    double flow = 0.0;
    for (;;) {
        std::vector<std::size_t> prev(V, V);
        std::queue<std::size_t> bfs;
        bfs.push(S);
        prev[S] = S;
        while (!bfs.empty() && prev[T] == V) {
            std::size_t u = bfs.front();
            bfs.pop();
            for (std::size_t v = 0; v < V; ++v)
                if (prev[v] == V && cap[u][v] > 1e-12) {
                    prev[v] = u;
                    bfs.push(v);
                }
        }
        if (prev[T] == V) break;
        double aug = 2.0;
        for (std::size_t v = T; v != S; v = prev[v]) aug = std::min(aug, cap[prev[v]][v]);
        for (std::size_t v = T; v != S; v = prev[v]) {
            cap[prev[v]][v] -= aug;
            cap[v][prev[v]] += aug;
        }
        flow += aug;
    }
    return flow >= 1.0 - tol::dist;
}

} // namespace detail

// Reference distance by bisecting the sorted pairwise displacements with the
// max-flow oracle. Exponential-ish in spirit, bounded in practice: refuses
// instances with |a| * |b| > 64.
inline double brute_force_emd(const SchmidtSpectrum& a, const SchmidtSpectrum& b) {
    if (a.size() * b.size() > 64)
        fail(Errc::too_large, "brute-force distance limited to |a|*|b| <= 64");
    std::vector<double> pa = atom_positions(a), pb = atom_positions(b);
    std::vector<double> th;
    th.reserve(pa.size() * pb.size());
    for (double x : pa)
        for (double y : pb) th.push_back(std::abs(x - y));
    std::sort(th.begin(), th.end());
    th.erase(std::unique(th.begin(), th.end()), th.end());

    std::size_t lo = 0, hi = th.size() - 1;
    while (lo < hi) {
        std::size_t mid = lo + (hi - lo) / 2;
        if (detail::flow_feasible(pa, pb, a.coefficients, b.coefficients, th[mid]))
            hi = mid;
        else
            lo = mid + 1;
    }
    return th[lo];
}

} // namespace schflow
