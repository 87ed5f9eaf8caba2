#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "schflow/errors.hpp"
#include "schflow/numeric.hpp"
#include "schflow/protocol.hpp"
#include "schflow/simulator.hpp"
#include "schflow/spectrum.hpp"
#include "schflow/transport.hpp"

namespace schflow {

// Width-N grouping: an atom at position L = log2(1/lambda) is pulled down to
// the window (2^(-jN-1), 2^(-jN)] of its bin j = ceil(L/N) by splitting into
// f = 2^ceil(jN - L) equal copies. f ranges over {1, 2, ..., 2^N}.
inline int grouping_multiplicity(double lambda, int n) {
    if (n < 2) fail(Errc::out_of_domain, "grouping width must be at least 2");
    double pos = log_position(lambda); // validates lambda in (0,1]
    double jn = static_cast<double>(n) * std::ceil(pos / static_cast<double>(n));
    int e = static_cast<int>(std::ceil(jn - pos));
    return 1 << e;
}

struct GroupedAtom {
    std::size_t parent; // index into base.coefficients
    std::size_t copy;   // 0 .. multiplicity-1
    double coefficient; // base coefficient / multiplicity
    int bin;            // ceil(position / N), shared by all copies
};

struct GroupedSpectrum {
    SchmidtSpectrum base;
    int n = 2;
    std::vector<GroupedAtom> atoms;          // parent-major order
    std::vector<int> multiplicities;         // per parent

    // Grouped atoms as a canonical spectrum (labels "parent:copy").
    SchmidtSpectrum as_spectrum() const {
        std::vector<double> vals;
        std::vector<std::string> labels;
        vals.reserve(atoms.size());
        labels.reserve(atoms.size());
        for (const auto& a : atoms) {
            vals.push_back(a.coefficient);
            labels.push_back(std::to_string(a.parent) + ":" + std::to_string(a.copy));
        }
        return normalize_spectrum(vals, labels, false);
    }
};

inline GroupedSpectrum build_grouped_state(const SchmidtSpectrum& base, int n) {
    GroupedSpectrum g{base, n, {}, {}};
    g.multiplicities.reserve(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
        double lambda = base.coefficients[i];
        int f = grouping_multiplicity(lambda, n);
        // Bin computed once from the same position the multiplicity used, so
        // boundary coefficients cannot land between bins.
        int bin = static_cast<int>(std::ceil(log_position(lambda) / static_cast<double>(n)));
        g.multiplicities.push_back(f);
        double nu = lambda / static_cast<double>(f);
        for (int c = 0; c < f; ++c)
            g.atoms.push_back({i, static_cast<std::size_t>(c), nu, bin});
    }
    return g;
}

struct BinComponent {
    int bin;
    std::vector<std::size_t> atom_indices; // into GroupedSpectrum::atoms
    std::vector<double> coefficients;      // subnormalized
    double norm_sq;
    double spread_value; // max - min position inside the component
};

inline std::vector<BinComponent> bin_components(const GroupedSpectrum& g) {
    std::map<int, BinComponent> by_bin;
    for (std::size_t k = 0; k < g.atoms.size(); ++k) {
        const GroupedAtom& a = g.atoms[k];
        BinComponent& c = by_bin.try_emplace(a.bin, BinComponent{a.bin, {}, {}, 0.0, 0.0}).first->second;
        c.atom_indices.push_back(k);
        c.coefficients.push_back(a.coefficient);
    }
    std::vector<BinComponent> out;
    out.reserve(by_bin.size());
    for (auto& [bin, c] : by_bin) {
        (void)bin;
        NeumaierSum s;
        double pmin = 0.0, pmax = 0.0;
        bool first = true;
        for (double v : c.coefficients) {
            s.add(v);
            double p = log_position(v);
            pmin = first ? p : std::min(pmin, p);
            pmax = first ? p : std::max(pmax, p);
            first = false;
        }
        c.norm_sq = s.value();
        c.spread_value = pmax - pmin;
        out.push_back(std::move(c));
    }
    return out;
}

// Trace norm of a real symmetric matrix.
inline double trace_norm(const Eigen::MatrixXd& m) {
    if (m.rows() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().sum();
}

// Block-diagonal surgery on phi = w w^T over the non-empty bins. P-blocks are
// the half-open B-sized bin ranges [(p-1)B, pB), p >= 1; consecutive P-block
// pairs form the M_i; the pair family S_k with the smallest trace picks the
// boundary offset k*; removing the straddling cross terms K leaves phi
// partitioned into within-group blocks (vblock) plus entries whose bins are
// more than B apart (vfar).
struct BlockDecomposition {
    double epsilon;
    int b;      // P-block width in bins
    int ceps;   // ceil(1/epsilon)
    int k_star; // 1-based offset of the removed pair family
    std::vector<int> bin_values;   // matrix index -> bin
    std::vector<double> bin_norms; // w_l
    std::vector<int> group_of;     // matrix index -> group id (0 = leading partial group)
    std::vector<double> s_traces;  // tr S_k, k = 1..ceps
    Eigen::MatrixXd phi;
    Eigen::MatrixXd vblock;
    Eigen::MatrixXd vfar;
    Eigen::MatrixXd removed; // K
    double trace_gap;        // || phi - (vblock + vfar) ||_1
    std::vector<double> block_spreads;
    double spread_bound; // 2 ceil(1/eps) B N + 4
};

inline BlockDecomposition block_decompose(const GroupedSpectrum& g, double eps,
                                          std::optional<int> b_override = std::nullopt) {
    if (!(eps > 0.0) || eps >= 1.0) fail(Errc::eps_out_of_range, "block smoothing outside (0,1)");
    std::vector<BinComponent> comps = bin_components(g);

    BlockDecomposition d{};
    d.epsilon = eps;
    d.ceps = static_cast<int>(std::ceil(1.0 / eps - tol::grid));
    d.b = b_override ? *b_override
                     : 30 + 2 * static_cast<int>(std::ceil(std::log2(1.0 / eps) /
                                                           static_cast<double>(g.n)));
    if (d.b < 1) fail(Errc::out_of_domain, "block width must be positive");

    Eigen::Index m = static_cast<Eigen::Index>(comps.size());
    Eigen::VectorXd w(m);
    for (Eigen::Index r = 0; r < m; ++r) {
        d.bin_values.push_back(comps[static_cast<std::size_t>(r)].bin);
        w(r) = std::sqrt(comps[static_cast<std::size_t>(r)].norm_sq);
        d.bin_norms.push_back(w(r));
    }
    d.phi = w * w.transpose();

    // P-block and pair indices per matrix row.
    std::vector<int> pval(static_cast<std::size_t>(m)), mval(static_cast<std::size_t>(m));
    for (Eigen::Index r = 0; r < m; ++r) {
        pval[static_cast<std::size_t>(r)] = d.bin_values[static_cast<std::size_t>(r)] / d.b + 1;
        mval[static_cast<std::size_t>(r)] = (pval[static_cast<std::size_t>(r)] + 1) / 2;
    }

    d.s_traces.assign(static_cast<std::size_t>(d.ceps), 0.0);
    for (Eigen::Index r = 0; r < m; ++r) {
        int k = mval[static_cast<std::size_t>(r)] % d.ceps; // family of pair m is m mod ceil(1/eps)
        std::size_t slot = k == 0 ? static_cast<std::size_t>(d.ceps - 1) : static_cast<std::size_t>(k - 1);
        d.s_traces[slot] += w(r) * w(r);
    }
    d.k_star = 1;
    for (int k = 2; k <= d.ceps; ++k)
        if (d.s_traces[static_cast<std::size_t>(k - 1)] <
            d.s_traces[static_cast<std::size_t>(d.k_star - 1)])
            d.k_star = k;

    auto group_of_p = [&](int p) {
        if (p < 2 * d.k_star) return 0;
        return (p - 2 * d.k_star) / (2 * d.ceps) + 1;
    };
    for (Eigen::Index r = 0; r < m; ++r)
        d.group_of.push_back(group_of_p(pval[static_cast<std::size_t>(r)]));

    d.vblock = Eigen::MatrixXd::Zero(m, m);
    d.vfar = Eigen::MatrixXd::Zero(m, m);
    d.removed = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index r = 0; r < m; ++r)
        for (Eigen::Index c = 0; c < m; ++c) {
            std::size_t rr = static_cast<std::size_t>(r), cc = static_cast<std::size_t>(c);
            bool straddle = mval[rr] == mval[cc] && pval[rr] != pval[cc] &&
                            mval[rr] % d.ceps == d.k_star % d.ceps;
            if (straddle)
                d.removed(r, c) = d.phi(r, c);
            else if (d.group_of[rr] == d.group_of[cc])
                d.vblock(r, c) = d.phi(r, c);
            else
                d.vfar(r, c) = d.phi(r, c);
        }
    d.trace_gap = trace_norm(d.phi - (d.vblock + d.vfar));

    std::map<int, std::pair<double, double>> extent; // group -> position range
    for (Eigen::Index r = 0; r < m; ++r) {
        const BinComponent& c = comps[static_cast<std::size_t>(r)];
        double pmin = 0.0, pmax = 0.0;
        bool first = true;
        for (double v : c.coefficients) {
            double p = log_position(v);
            pmin = first ? p : std::min(pmin, p);
            pmax = first ? p : std::max(pmax, p);
            first = false;
        }
        auto [it, fresh] = extent.try_emplace(d.group_of[static_cast<std::size_t>(r)],
                                              std::make_pair(pmin, pmax));
        if (!fresh) {
            it->second.first = std::min(it->second.first, pmin);
            it->second.second = std::max(it->second.second, pmax);
        }
    }
    for (const auto& [grp, range] : extent) {
        (void)grp;
        d.block_spreads.push_back(range.second - range.first);
    }
    d.spread_bound = 2.0 * d.ceps * d.b * g.n + 4.0;
    return d;
}

inline SchmidtSpectrum uniform_spectrum(int m) {
    if (m < 0 || m > 20) fail(Errc::out_of_domain, "uniform spectrum size out of range");
    std::size_t count = std::size_t{1} << m;
    return normalize_spectrum(std::vector<double>(count, std::ldexp(1.0, -m)));
}

// Conversion from the nearest maximally entangled state: pick the integer m
// minimizing max(|m - pmin|, |m - pmax|) over the block's positions (larger m
// on ties) and compile the conversion. Cost <= 4 ceil(spread) + 8.
inline ConversionProtocol prepare_block_from_epr(const SchmidtSpectrum& block) {
    std::vector<double> pos = atom_positions(block);
    double pmin = pos.front(), pmax = pos.back();
    int lo = std::max(0, static_cast<int>(std::floor(pmin)));
    int hi = std::max(lo, static_cast<int>(std::ceil(pmax)));
    int best_m = lo;
    double best = std::max(pmax - lo, static_cast<double>(lo) - pmin);
    for (int m = lo + 1; m <= hi; ++m) {
        double v = std::max(pmax - m, static_cast<double>(m) - pmin);
        if (v <= best) {
            best = v;
            best_m = m;
        }
    }
    return conversion_protocol(uniform_spectrum(best_m), block);
}

struct LowerBoundReport {
    double epsilon;
    double q;
    double d;
    double h;         // 4 * 2^((3q - d)/2)
    double bound;     // 1 - eps^2/4 + 24 * 2^(-(d - 3q)/2), equal to 1 - eps^2/4 + 6h
    double alt_bound; // same tail with the calculus-fact constant eps^2/8
};

inline constexpr const char* lower_bound_formula = "1 - eps^2/4 + 24*2^(-(d-3*q)/2)";
inline constexpr const char* lower_bound_alt_formula = "1 - eps^2/8 + 24*2^(-(d-3*q)/2)";

// The two constants differ on purpose: the headline bound carries eps^2/4
// while the calculus fact underlying it gives eps^2/8; both are reported.
inline LowerBoundReport evaluate_lower_bound(double eps, double q, double d) {
    if (!(eps >= 0.0) || eps > 1.0) fail(Errc::eps_out_of_range, "smoothing outside [0,1]");
    if (!(q >= 0.0) || !(d >= 0.0)) fail(Errc::out_of_domain, "negative cost or distance");
    LowerBoundReport r{};
    r.epsilon = eps;
    r.q = q;
    r.d = d;
    r.h = 4.0 * std::exp2((3.0 * q - d) / 2.0);
    r.bound = 1.0 - eps * eps / 4.0 + 24.0 * std::exp2(-(d - 3.0 * q) / 2.0);
    r.alt_bound = 1.0 - eps * eps / 8.0 + 24.0 * std::exp2(-(d - 3.0 * q) / 2.0);
    return r;
}

// Spectrum of a state, renormalized over the ranked coefficients; the float
// dust below rank_tol is dropped before renormalizing.
inline SchmidtSpectrum state_spectrum(const BipartiteState& st, double rank_tol = tol::rank) {
    SchmidtResult sr = schmidt_coefficients(st, rank_tol);
    std::vector<double> vals;
    for (double s2 : sr.spectrum)
        if (s2 > rank_tol * rank_tol) vals.push_back(s2);
    return normalize_spectrum(vals, {}, true);
}

struct EmpiricalLowerBound {
    double lhs; // |<phi| U |psi>|
    double d;   // eps-smoothed distance between the two spectra
    LowerBoundReport report;
    bool holds;
};

// Fidelity against the bound evaluated at the protocol's own cost and the
// smoothed distance of the states' actual spectra.
inline EmpiricalLowerBound check_lower_bound_empirically(const BipartiteState& psi,
                                                         const BipartiteState& phi, double eps,
                                                         const CommUnitary& u) {
    BipartiteState moved = apply_comm_unitary(psi, u);
    EmpiricalLowerBound r{};
    r.lhs = fidelity(phi, moved);
    r.d = smoothed_emd(state_spectrum(psi), state_spectrum(phi), eps);
    r.report = evaluate_lower_bound(eps, moved.comm_cost - psi.comm_cost, r.d);
    r.holds = r.lhs <= r.report.bound + tol::dist;
    return r;
}

// Subnormalized state embedding one bin component on the diagonal of a
// factored layout, at the component's grouped-atom indices.
inline BipartiteState make_component_state(const BinComponent& comp,
                                           const std::vector<std::int64_t>& a_dims,
                                           const std::vector<std::int64_t>& b_dims) {
    std::int64_t pa = 1, pb = 1;
    for (std::int64_t x : a_dims) pa *= x;
    for (std::int64_t x : b_dims) pb *= x;
    BipartiteState st;
    for (std::size_t k = 0; k < a_dims.size(); ++k)
        st.registers.push_back({"A" + std::to_string(k), a_dims[k], Party::A});
    for (std::size_t k = 0; k < b_dims.size(); ++k)
        st.registers.push_back({"B" + std::to_string(k), b_dims[k], Party::B});
    st.subnormalized = true;
    if (pa * pb > state_dim_cap) fail(Errc::too_large, "state exceeds the dimension cap");
    st.amplitudes.assign(static_cast<std::size_t>(pa * pb), cplx{0.0, 0.0});
    for (std::size_t t = 0; t < comp.atom_indices.size(); ++t) {
        std::int64_t i = static_cast<std::int64_t>(comp.atom_indices[t]);
        if (i >= std::min(pa, pb)) fail(Errc::out_of_domain, "component does not fit the shape");
        st.amplitudes[static_cast<std::size_t>(i * pb + i)] = std::sqrt(comp.coefficients[t]);
    }
    return st;
}

struct OffdiagBound {
    double lhs;
    double rhs;
    double q;
    bool holds;
};

// |<phi_k| U |phi_j>| <= 2^(3M/2) * 2^(-N|j-k|/2 + 2) * ||phi_min(j,k)||^2
// for bin components of a width-N grouped spectrum and an M-qubit protocol.
inline OffdiagBound check_offdiag_bound(const GroupedSpectrum& g, const BinComponent& cj,
                                        const BinComponent& ck, const CommUnitary& u,
                                        const std::vector<std::int64_t>& a_dims,
                                        const std::vector<std::int64_t>& b_dims) {
    BipartiteState sj = make_component_state(cj, a_dims, b_dims);
    BipartiteState sk = make_component_state(ck, a_dims, b_dims);
    BipartiteState moved = apply_comm_unitary(sj, u);
    OffdiagBound r{};
    r.q = moved.comm_cost - sj.comm_cost;
    r.lhs = fidelity(sk, moved);
    double gap = std::abs(static_cast<double>(cj.bin) - static_cast<double>(ck.bin));
    double min_norm = (cj.bin <= ck.bin ? cj : ck).norm_sq;
    r.rhs = std::exp2(1.5 * r.q) * std::exp2(-static_cast<double>(g.n) * gap / 2.0 + 2.0) * min_norm;
    r.holds = r.lhs <= r.rhs + tol::dist;
    return r;
}

struct FactCheck {
    double lhs;
    double rhs;
    bool holds;
};

// sqrt(p - eps) sqrt(p) + sqrt(1 - p) sqrt(1 - p + eps) <= 1 - eps^2/8
// on 0 <= eps <= p <= 1.
inline FactCheck fact_calculus_check(double p, double eps) {
    if (!(eps >= 0.0) || !(p >= eps) || !(p <= 1.0))
        fail(Errc::out_of_domain, "need 0 <= eps <= p <= 1");
    FactCheck r{};
    r.lhs = std::sqrt(std::max(p - eps, 0.0)) * std::sqrt(p) +
            std::sqrt(std::max(1.0 - p, 0.0)) * std::sqrt(1.0 - p + eps);
    r.rhs = 1.0 - eps * eps / 8.0;
    r.holds = r.lhs <= r.rhs + tol::grid;
    return r;
}

} // namespace schflow
