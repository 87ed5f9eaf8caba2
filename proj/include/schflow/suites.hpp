#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "schflow/flows.hpp"
#include "schflow/io.hpp"
#include "schflow/numeric.hpp"
#include "schflow/protocol.hpp"
#include "schflow/sampling.hpp"
#include "schflow/simulator.hpp"
#include "schflow/spectrum.hpp"
#include "schflow/transport.hpp"
#include "schflow/universality.hpp"

namespace schflow {

struct SuiteConfig {
    std::uint64_t seed = default_seed;
    int cases = 100;
    double eps = 0.1;
    int grouping = 2;
    std::optional<int> block_width; // forwarded to block_decompose when set
    int jobs = 1;
};

struct SuiteResult {
    std::string name;
    int cases = 0;
    int passed = 0;
    int failed = 0;
    std::vector<std::string> failures; // first few messages only

    bool ok() const { return failed == 0; }
};

namespace suites {

// A case returns nullopt on success or a short diagnosis on failure.
using CaseFn = std::function<std::optional<std::string>(Rng&, const SuiteConfig&)>;

inline std::string show(double v) { return format_double17(v); }

inline std::optional<std::string> case_spectra(Rng& rng, const SuiteConfig&) {
    std::size_t n = static_cast<std::size_t>(rng.uniform_int(1, 10));
    std::vector<double> raw;
    raw.reserve(n + 2);
    for (std::size_t i = 0; i < n; ++i) raw.push_back(rng.uniform(0.0, 1.0) < 0.2 ? 0.0 : rng.uniform(0.01, 1.0));
    raw.push_back(rng.uniform(0.01, 1.0)); // at least one positive entry
    SchmidtSpectrum s = normalize_spectrum(raw, {}, true);

    for (std::size_t i = 1; i < s.size(); ++i)
        if (s.coefficients[i] > s.coefficients[i - 1])
            return "coefficients not sorted descending";
    NeumaierSum sum;
    for (double c : s.coefficients) sum.add(c);
    if (std::abs(sum.value() - 1.0) > tol::dist)
        return "renormalized sum drifts: " + show(sum.value());

    std::size_t positives = 0;
    for (double c : raw)
        if (c > 0.0) ++positives;
    if (s.size() != positives) return "zero entries were not stripped";

    std::vector<double> pos = atom_positions(s);
    for (std::size_t i = 1; i < pos.size(); ++i)
        if (pos[i] < pos[i - 1]) return "positions not ascending";

    QuantileFunction qf = quantile_function(s);
    if (qf.breakpoints.empty() || qf.breakpoints.back() != 1.0)
        return "quantile breakpoints must end at 1";
    for (std::size_t i = 1; i < qf.breakpoints.size(); ++i)
        if (qf.breakpoints[i] <= qf.breakpoints[i - 1])
            return "quantile breakpoints not strictly increasing";
    for (int t = 0; t < 8; ++t) {
        double q = rng.uniform(1e-12, 1.0);
        double v = qf(q);
        if (v < pos.front() - tol::dist || v > pos.back() + tol::dist)
            return "quantile value outside the position range";
    }
    if (std::abs(qf(1.0) - pos.back()) > tol::dist) return "top quantile misses deepest atom";
    return std::nullopt;
}

inline std::optional<std::string> case_transport(Rng& rng, const SuiteConfig&) {
    SchmidtSpectrum a = random_spectrum_mixed(rng, 8);
    SchmidtSpectrum b = random_spectrum_mixed(rng, 8);
    SchmidtSpectrum c = random_spectrum_mixed(rng, 8);

    EmdResult r = emd_linf(a, b);
    validate_plan(r.witness);
    if (std::abs(r.witness.max_move() - r.distance) > tol::dist)
        return "witness max move " + show(r.witness.max_move()) + " vs distance " +
               show(r.distance);
    if (std::abs(emd_linf_quantile(b, a) - r.distance) > 1e-12) return "distance not symmetric";
    if (emd_linf_quantile(a, a) != 0.0) return "self distance nonzero";
    double dac = emd_linf_quantile(a, c), dbc = emd_linf_quantile(b, c);
    if (dac > r.distance + dbc + tol::dist) return "triangle inequality violated";

    if (!feasible_coupling(a, b, r.distance)) return "no coupling at the optimum";
    if (r.distance > 0.02 && feasible_coupling(a, b, r.distance - 0.01))
        return "coupling feasible below the optimum";

    if (a.size() * b.size() <= 36) {
        double bf = brute_force_emd(a, b);
        if (std::abs(bf - r.distance) > tol::dist)
            return "matching bound " + show(bf) + " vs quantile " + show(r.distance);
    }

    if (smoothed_emd(a, b, 0.0) != r.distance) return "zero smoothing must be exact";
    double s1 = smoothed_emd(a, b, 0.1), s2 = smoothed_emd(a, b, 0.2);
    if (s1 > r.distance + 1e-12 || s2 > s1 + 1e-12) return "smoothing must be monotone";
    return std::nullopt;
}

inline std::optional<std::string> case_flows(Rng& rng, const SuiteConfig&) {
    auto [chi, upsilon] = random_bounded_pair(rng, 6, 3.0);
    ThreeStageFlows ts = build_three_stage_flows(chi, upsilon);

    if (std::abs(ts.d - emd_linf_quantile(chi, upsilon)) > 1e-12) return "wrong recorded distance";
    verify_flow(ts.chi, ts.gamma, ts.f1);
    verify_flow(ts.gamma, ts.rho, ts.f2);
    verify_flow(ts.rho, ts.upsilon, ts.f3);

    int cd = ceil_distance(ts.d);
    std::size_t k = std::size_t{1} << (cd + 2);
    if (flow_degree(ts.f1) > (std::size_t{1} << (2 * cd + 4)))
        return "first stage degree too large";
    if (flow_degree(ts.f2) > k) return "second stage degree too large";
    if (flow_degree(ts.f3) != k) return "third stage degree must equal the slot count";
    if (ts.rho.size() != ts.upsilon.size() * k) return "wrong slot count";
    for (auto [slot, j] : ts.f3.edges)
        if (ts.rho.coefficients[slot] != ts.upsilon.coefficients[j] / static_cast<double>(k))
            return "slot weight differs from its target share";
    return std::nullopt;
}

inline std::optional<std::string> case_protocols(Rng& rng, const SuiteConfig&) {
    auto [a, b] = random_bounded_pair(rng, 5, 2.0);
    ConversionProtocol p = conversion_protocol(a, b);

    if (protocol_cost(p) != p.declared_cost) return "declared cost differs from transmit total";
    int budget = 4 * ceil_distance(emd_linf_quantile(a, b)) + 8;
    if (p.declared_cost > budget)
        return "cost " + std::to_string(p.declared_cost) + " over budget " + std::to_string(budget);
    if (p.steps.empty() || !std::holds_alternative<AppendStep>(p.steps.front()))
        return "protocol must open by appending work registers";

    if (reverse_protocol(reverse_protocol(p)) != p) return "double reverse changed the protocol";

    nlohmann::json j = parse_json(protocol_to_json(p).dump(), "round trip");
    if (protocol_from_json(j) != p) return "serialization round trip changed the protocol";
    return std::nullopt;
}

inline std::optional<std::string> case_simulator(Rng& rng, const SuiteConfig&) {
    SchmidtSpectrum spec = random_spectrum_mixed(rng, 6);
    BipartiteState st = make_canonical_state(spec);
    if (std::abs(st.norm() - 1.0) > tol::prep_norm) return "canonical state not normalized";
    if (std::abs(fidelity(st, st) - 1.0) > tol::prep_norm) return "self fidelity differs from 1";

    SchmidtResult sr = schmidt_coefficients(st);
    if (sr.rank != spec.size()) return "rank differs from atom count";
    for (std::size_t i = 0; i < spec.size(); ++i)
        if (std::abs(sr.spectrum[i] - spec.coefficients[i]) > tol::dist)
            return "recovered spectrum drifts at atom " + std::to_string(i);

    auto [a, b] = random_bounded_pair(rng, 5, 2.0);
    ConversionProtocol p = conversion_protocol(a, b);
    BipartiteState out = run_protocol(make_canonical_state(a), p);
    double f = fidelity(out, make_canonical_state(b));
    if (f < 1.0 - tol::replay) return "replay fidelity " + show(f);
    if (out.comm_cost != static_cast<double>(protocol_cost(p)))
        return "replay cost differs from the declared transmit total";

    BipartiteState back = run_protocol(make_canonical_state(b), reverse_protocol(p));
    double fb = fidelity(back, make_canonical_state(a));
    if (fb < 1.0 - tol::replay) return "reverse replay fidelity " + show(fb);
    return std::nullopt;
}

inline std::optional<std::string> case_commbound(Rng& rng, const SuiteConfig&) {
    std::vector<std::int64_t> a_dims{2, 2, 2, 2}, b_dims{16};
    SchmidtSpectrum s1 = random_spectrum_mixed(rng, 16);
    SchmidtSpectrum s2 = random_spectrum_mixed(rng, 16);
    BipartiteState psi = make_canonical_state_shaped(s1, a_dims, b_dims);
    BipartiteState nu = make_canonical_state_shaped(s2, a_dims, b_dims);

    InnerProductBound plain = check_innerprod_bound(psi, nu);
    if (!plain.holds)
        return "static bound broken: " + show(plain.lhs) + " > " + show(plain.rhs);

    std::vector<std::string> movable{"A0", "A1", "A2", "A3"};
    std::shuffle(movable.begin(), movable.end(), rng.engine);
    std::size_t q = static_cast<std::size_t>(rng.uniform_int(0, 3));
    CommUnitary u = random_comm_unitary(rng, nu, movable, q);

    CommInnerProductBound r = check_comm_innerprod_bound(psi, nu, u);
    if (r.q != static_cast<double>(q)) return "wrong accounted qubit count";
    if (!r.holds) return "comm bound broken: " + show(r.lhs) + " > " + show(r.rhs);
    if (!r.sr_growth_ok) return "rank grew past 2^q";
    if (!r.coeff_growth_ok) return "top coefficient grew past 2^q";
    return std::nullopt;
}

inline std::optional<std::string> case_grouping(Rng& rng, const SuiteConfig& cfg) {
    int n = std::max(2, cfg.grouping);
    SchmidtSpectrum base = random_spectrum_mixed(rng, 8);
    GroupedSpectrum g = build_grouped_state(base, n);

    NeumaierSum total;
    for (const auto& atom : g.atoms) {
        total.add(atom.coefficient);
        double jn = static_cast<double>(atom.bin) * n;
        if (std::abs(log_position(atom.coefficient) - jn) > 1.0 + tol::dist)
            return "grouped atom further than one octave from its bin edge";
    }
    if (std::abs(total.value() - 1.0) > tol::dist) return "grouped mass drifts";
    for (std::size_t i = 0; i < g.multiplicities.size(); ++i) {
        int f = g.multiplicities[i];
        if (f < 1 || f > (1 << n)) return "multiplicity outside [1, 2^n]";
    }

    double d = emd_linf_quantile(base, g.as_spectrum());
    if (d > static_cast<double>(n) + tol::dist)
        return "grouping moved mass " + show(d) + " > width " + std::to_string(n);

    NeumaierSum comp_total;
    for (const BinComponent& c : bin_components(g)) {
        comp_total.add(c.norm_sq);
        if (c.spread_value > 2.0 + tol::dist) return "bin component spread over two octaves";
        double cap = std::exp2(static_cast<double>(c.bin) * n + 1.0) * c.norm_sq;
        if (static_cast<double>(c.atom_indices.size()) > cap + tol::dist)
            return "bin component rank above 2^(jn+1) times its weight";
    }
    if (std::abs(comp_total.value() - 1.0) > tol::dist) return "component weights drift";
    return std::nullopt;
}

inline std::optional<std::string> case_blocks(Rng& rng, const SuiteConfig& cfg) {
    int n = std::max(2, cfg.grouping);
    double eps = cfg.eps > 0.0 && cfg.eps < 1.0 ? cfg.eps : 0.25;
    SchmidtSpectrum base = random_spectrum_mixed(rng, 8);
    GroupedSpectrum g = build_grouped_state(base, n);
    BlockDecomposition d = block_decompose(g, eps, cfg.block_width);

    if (d.trace_gap > 2.0 * eps + tol::dist)
        return "trace gap " + show(d.trace_gap) + " over 2 eps";
    if (d.s_traces[static_cast<std::size_t>(d.k_star - 1)] > eps + tol::dist)
        return "removed family heavier than eps";
    NeumaierSum trace_total;
    for (double t : d.s_traces) trace_total.add(t);
    if (std::abs(trace_total.value() - 1.0) > tol::dist) return "family traces drift";

    Eigen::Index m = d.phi.rows();
    for (Eigen::Index r = 0; r < m; ++r)
        for (Eigen::Index c = 0; c < m; ++c) {
            if (d.vblock(r, c) + d.vfar(r, c) + d.removed(r, c) != d.phi(r, c))
                return "triage does not partition the matrix";
            if (d.vfar(r, c) != 0.0) {
                int gap = std::abs(d.bin_values[static_cast<std::size_t>(r)] -
                                   d.bin_values[static_cast<std::size_t>(c)]);
                if (gap <= d.b) return "far entry within block width";
            }
        }
    for (double s : d.block_spreads)
        if (s > d.spread_bound + tol::dist) return "block spread over its budget";
    return std::nullopt;
}

inline std::optional<std::string> case_epr_blocks(Rng& rng, const SuiteConfig& cfg) {
    int n = std::max(2, cfg.grouping);
    SchmidtSpectrum base = random_spectrum_mixed(rng, 6);
    GroupedSpectrum g = build_grouped_state(base, n);
    std::vector<BinComponent> comps = bin_components(g);
    const BinComponent& comp =
        comps[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(comps.size()) - 1))];

    SchmidtSpectrum block = normalize_spectrum(comp.coefficients, {}, true);
    ConversionProtocol p = prepare_block_from_epr(block);
    if (protocol_cost(p) != p.declared_cost) return "declared cost differs from transmit total";
    int budget = 4 * ceil_distance(spread(block)) + 8;
    if (p.declared_cost > budget)
        return "cost " + std::to_string(p.declared_cost) + " over budget " + std::to_string(budget);
    for (std::size_t i = 1; i < p.source.size(); ++i)
        if (p.source.coefficients[i] != p.source.coefficients[0])
            return "starting spectrum is not flat";

    if (p.source.size() <= 16 && block.size() <= 8 && p.declared_cost <= 12) {
        BipartiteState out = run_protocol(make_canonical_state(p.source), p);
        double f = fidelity(out, make_canonical_state(block));
        if (f < 1.0 - tol::replay) return "replay fidelity " + show(f);
    }
    return std::nullopt;
}

inline std::optional<std::string> case_lowerbound(Rng& rng, const SuiteConfig& cfg) {
    double eps = cfg.eps > 0.0 && cfg.eps <= 1.0 ? cfg.eps : 0.1;
    std::vector<std::int64_t> a_dims{2, 2, 2, 2}, b_dims{16};
    SchmidtSpectrum s1 = random_spectrum_mixed(rng, 12, 30.0);
    SchmidtSpectrum s2 = random_spectrum_mixed(rng, 12, 30.0);
    BipartiteState psi = make_canonical_state_shaped(s1, a_dims, b_dims);
    BipartiteState phi = make_canonical_state_shaped(s2, a_dims, b_dims);

    std::vector<std::string> movable{"A0", "A1", "A2", "A3"};
    std::shuffle(movable.begin(), movable.end(), rng.engine);
    std::size_t q = static_cast<std::size_t>(rng.uniform_int(0, 3));
    CommUnitary u = random_comm_unitary(rng, psi, movable, q);

    EmpiricalLowerBound r = check_lower_bound_empirically(psi, phi, eps, u);
    if (!r.holds)
        return "fidelity " + show(r.lhs) + " beats the bound " + show(r.report.bound);
    if (r.report.bound != 1.0 - eps * eps / 4.0 + 6.0 * r.report.h)
        return "bound and 6h form disagree";
    if (r.report.alt_bound < r.report.bound) return "alt constant must be looser";
    return std::nullopt;
}

inline std::optional<std::string> case_offdiag(Rng& rng, const SuiteConfig& cfg) {
    int n = std::min(std::max(2, cfg.grouping), 4);
    SchmidtSpectrum base = random_spectrum_mixed(rng, 6, 12.0);
    GroupedSpectrum g = build_grouped_state(base, n);
    if (g.atoms.size() > 128) return std::nullopt; // shape below cannot hold it
    std::vector<BinComponent> comps = bin_components(g);

    std::size_t j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(comps.size()) - 1));
    std::size_t k = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(comps.size()) - 1));

    std::vector<std::int64_t> a_dims{2, 2, 32}, b_dims{128};
    std::vector<std::string> movable{"A0", "A1"};
    std::shuffle(movable.begin(), movable.end(), rng.engine);
    std::size_t moves = static_cast<std::size_t>(rng.uniform_int(0, 2));
    BipartiteState probe = make_component_state(comps[j], a_dims, b_dims);
    CommUnitary u = random_comm_unitary(rng, probe, movable, moves);

    OffdiagBound r = check_offdiag_bound(g, comps[j], comps[k], u, a_dims, b_dims);
    if (!r.holds) return "cross bin overlap " + show(r.lhs) + " > " + show(r.rhs);
    return std::nullopt;
}

inline std::optional<std::string> case_fact9(Rng& rng, const SuiteConfig&) {
    double p = rng.uniform(0.0, 1.0);
    double eps = rng.uniform(0.0, p);
    FactCheck r = fact_calculus_check(p, eps);
    if (!r.holds)
        return "lhs " + show(r.lhs) + " above 1 - eps^2/8 at p=" + show(p) + " eps=" + show(eps);
    return std::nullopt;
}

} // namespace suites

inline const std::vector<std::pair<std::string, suites::CaseFn>>& suite_registry() {
    static const std::vector<std::pair<std::string, suites::CaseFn>> reg{
        {"spectra", suites::case_spectra},
        {"transport", suites::case_transport},
        {"flows", suites::case_flows},
        {"protocols", suites::case_protocols},
        {"simulator", suites::case_simulator},
        {"commbound", suites::case_commbound},
        {"grouping", suites::case_grouping},
        {"blocks", suites::case_blocks},
        {"epr-blocks", suites::case_epr_blocks},
        {"lowerbound", suites::case_lowerbound},
        {"offdiag", suites::case_offdiag},
        {"fact9", suites::case_fact9},
    };
    return reg;
}

inline std::vector<std::string> all_suite_names() {
    std::vector<std::string> names;
    for (const auto& [name, fn] : suite_registry()) names.push_back(name);
    return names;
}

// Each case reseeds from (seed, index), so results do not depend on the job
// count; the failure list keeps the lowest-index messages.
inline SuiteResult run_suite(const std::string& name, const SuiteConfig& cfg) {
    const suites::CaseFn* fn = nullptr;
    for (const auto& [n, f] : suite_registry())
        if (n == name) fn = &f;
    if (!fn) fail(Errc::out_of_domain, "unknown suite " + name);

    int cases = std::max(0, cfg.cases);
    std::vector<std::optional<std::string>> outcomes(static_cast<std::size_t>(cases));
    auto work = [&](int begin, int end) {
        for (int i = begin; i < end; ++i) {
            Rng rng(case_seed(cfg.seed, static_cast<std::uint64_t>(i)));
            try {
                outcomes[static_cast<std::size_t>(i)] = (*fn)(rng, cfg);
            } catch (const std::exception& e) {
                outcomes[static_cast<std::size_t>(i)] = std::string("exception: ") + e.what();
            }
        }
    };

    int jobs = std::clamp(cfg.jobs, 1, cases == 0 ? 1 : cases);
    if (jobs <= 1) {
        work(0, cases);
    } else {
        std::vector<std::thread> pool;
        int chunk = (cases + jobs - 1) / jobs;
        for (int t = 0; t < jobs; ++t) {
            int begin = t * chunk, end = std::min(cases, begin + chunk);
            if (begin < end) pool.emplace_back(work, begin, end);
        }
        for (auto& th : pool) th.join();
    }

    SuiteResult r{name, cases, 0, 0, {}};
    for (int i = 0; i < cases; ++i) {
        const auto& o = outcomes[static_cast<std::size_t>(i)];
        if (!o) {
            ++r.passed;
        } else {
            ++r.failed;
            if (r.failures.size() < 5)
                r.failures.push_back("case " + std::to_string(i) + ": " + *o);
        }
    }
    return r;
}

inline std::vector<SuiteResult> run_suites(const std::vector<std::string>& names,
                                           const SuiteConfig& cfg) {
    std::vector<SuiteResult> out;
    out.reserve(names.size());
    for (const auto& n : names) out.push_back(run_suite(n, cfg));
    return out;
}

} // namespace schflow
