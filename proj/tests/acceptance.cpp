// Acceptance gate: ten independent checks, one pass/fail line each.
// Tolerances and case counts are pinned here on purpose; do not loosen them.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "schflow/flows.hpp"
#include "schflow/protocol.hpp"
#include "schflow/sampling.hpp"
#include "schflow/simulator.hpp"
#include "schflow/spectrum.hpp"
#include "schflow/transport.hpp"
#include "schflow/universality.hpp"

using namespace schflow;

namespace {

int failures = 0;

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

void report(int criterion, bool pass, double elapsed, double budget, const std::string& detail) {
    bool in_time = elapsed < budget;
    if (!pass || !in_time) ++failures;
    std::printf("criterion %2d: %s  (%.2fs of %.0fs) %s%s\n", criterion,
                pass && in_time ? "PASS" : "FAIL", elapsed, budget, detail.c_str(),
                pass && !in_time ? " [over time budget]" : "");
    std::fflush(stdout);
}

// 1. The three distance algorithms agree on 1,000 random pairs.
void criterion_1() {
    Timer t;
    Rng rng(case_seed(default_seed, 101));
    double worst = 0.0;
    bool pass = true;
    for (int i = 0; i < 1000; ++i) {
        SchmidtSpectrum a = random_spectrum_mixed(rng, 8);
        SchmidtSpectrum b = random_spectrum_mixed(rng, 8);
        double d1 = emd_linf(a, b).distance;
        double d2 = emd_linf_quantile(a, b);
        double d3 = brute_force_emd(a, b);
        worst = std::max({worst, std::abs(d1 - d2), std::abs(d1 - d3)});
        if (std::abs(d1 - d2) > 1e-9 || std::abs(d1 - d3) > 1e-9) pass = false;
    }
    report(1, pass, t.seconds(), 10.0, "oracle agreement, worst gap " + format_double17(worst));
}

// Shared by criteria 2 and 10.
struct ReplayCase {
    SchmidtSpectrum a, b;
    ConversionProtocol p;
};
std::vector<ReplayCase> replay_cases;

// 2. Conversion protocols stay within 4*ceil(d)+8 qubits and replay exactly.
void criterion_2() {
    Timer t;
    Rng rng(case_seed(default_seed, 102));
    bool pass = true;
    double worst_fid = 1.0;
    for (int i = 0; i < 100; ++i) {
        auto [a, b] = random_bounded_pair(rng, 5, 2.0);
        double d = emd_linf(a, b).distance;
        ConversionProtocol p = conversion_protocol(a, b);
        if (p.declared_cost > 4 * ceil_distance(d) + 8) pass = false;
        BipartiteState out = run_protocol(make_canonical_state(a), p);
        double f = fidelity(out, make_canonical_state(b));
        worst_fid = std::min(worst_fid, f);
        if (f < 1.0 - 1e-9) pass = false;
        replay_cases.push_back({a, b, std::move(p)});
    }
    report(2, pass, t.seconds(), 60.0,
           "100 conversions within budget, worst fidelity " + format_double17(worst_fid));
}

// 3. Three-stage flows verify with the declared degree bounds on 500 pairs.
void criterion_3() {
    Timer t;
    Rng rng(case_seed(default_seed, 103));
    bool pass = true;
    for (int i = 0; i < 500; ++i) {
        SchmidtSpectrum a = random_spectrum_mixed(rng, 6);
        SchmidtSpectrum b = random_spectrum_mixed(rng, 6);
        ThreeStageFlows ts = build_three_stage_flows(a, b);
        try {
            verify_flow(ts.chi, ts.gamma, ts.f1);
            verify_flow(ts.gamma, ts.rho, ts.f2);
            verify_flow(ts.rho, ts.upsilon, ts.f3);
        } catch (const std::exception&) {
            pass = false;
        }
        int cd = ceil_distance(ts.d);
        if (flow_degree(ts.f1) > (std::size_t{1} << (2 * cd + 4))) pass = false;
        if (flow_degree(ts.f2) > (std::size_t{1} << (cd + 2))) pass = false;
        if (flow_degree(ts.f3) != (std::size_t{1} << (cd + 2))) pass = false;
    }
    report(3, pass, t.seconds(), 30.0, "500 flow constructions verified");
}

// 4. Inner-product bounds hold on 1,000 pairs and 1,000 communication triples.
void criterion_4() {
    Timer t;
    Rng rng(case_seed(default_seed, 104));
    bool pass = true;
    std::vector<std::int64_t> a_dims{2, 2, 2, 2}, b_dims{16};
    for (int i = 0; i < 1000; ++i) {
        BipartiteState psi = make_canonical_state_shaped(random_spectrum_mixed(rng, 16), a_dims, b_dims);
        BipartiteState nu = make_canonical_state_shaped(random_spectrum_mixed(rng, 16), a_dims, b_dims);
        if (!check_innerprod_bound(psi, nu).holds) pass = false;
    }
    for (int i = 0; i < 1000; ++i) {
        BipartiteState psi = make_canonical_state_shaped(random_spectrum_mixed(rng, 16), a_dims, b_dims);
        BipartiteState nu = make_canonical_state_shaped(random_spectrum_mixed(rng, 16), a_dims, b_dims);
        std::vector<std::string> movable{"A0", "A1", "A2", "A3"};
        std::shuffle(movable.begin(), movable.end(), rng.engine);
        std::size_t q = static_cast<std::size_t>(i % 4); // Q in {0,1,2,3}
        CommUnitary u = random_comm_unitary(rng, nu, movable, q);
        CommInnerProductBound r = check_comm_innerprod_bound(psi, nu, u);
        if (!r.holds || !r.sr_growth_ok || !r.coeff_growth_ok) pass = false;
    }
    report(4, pass, t.seconds(), 120.0, "2000 bound checks including growth facts");
}

// 5. Grouping keeps mass, spread, and distance within their budgets.
void criterion_5() {
    Timer t;
    Rng rng(case_seed(default_seed, 105));
    bool pass = true;
    for (int i = 0; i < 500; ++i) {
        SchmidtSpectrum base = random_spectrum_mixed(rng, 8);
        for (int n = 2; n <= 4; ++n) {
            GroupedSpectrum g = build_grouped_state(base, n);
            NeumaierSum total;
            for (const auto& atom : g.atoms) {
                total.add(atom.coefficient);
                double jn = static_cast<double>(atom.bin) * n;
                if (std::abs(log_position(atom.coefficient) - jn) > 1.0 + 1e-9) pass = false;
            }
            if (std::abs(total.value() - 1.0) > 1e-9) pass = false;
            if (emd_linf_quantile(base, g.as_spectrum()) > n + 1e-9) pass = false;
        }
    }
    report(5, pass, t.seconds(), 10.0, "500 spectra grouped at widths 2, 3, 4");
}

// 6. Block decompositions satisfy the four structural claims.
void criterion_6() {
    Timer t;
    Rng rng(case_seed(default_seed, 106));
    bool pass = true;
    for (int i = 0; i < 200; ++i) {
        GroupedSpectrum g = build_grouped_state(random_spectrum_mixed(rng, 8, 16.0), 2);
        for (int b_override : {1, 2, 3}) {
            for (double eps : {0.25, 0.5}) {
                BlockDecomposition d = block_decompose(g, eps, b_override);
                if (d.trace_gap > 2.0 * eps + 1e-9) pass = false;
                if (d.s_traces[static_cast<std::size_t>(d.k_star - 1)] > eps + 1e-9) pass = false;
                Eigen::Index m = d.phi.rows();
                for (Eigen::Index r = 0; r < m; ++r)
                    for (Eigen::Index c = 0; c < m; ++c)
                        if (d.vfar(r, c) != 0.0 &&
                            std::abs(d.bin_values[static_cast<std::size_t>(r)] -
                                     d.bin_values[static_cast<std::size_t>(c)]) <= d.b)
                            pass = false;
                double budget = 2.0 * std::ceil(1.0 / eps) * d.b * g.n + 4.0;
                for (double s : d.block_spreads)
                    if (s > budget + 1e-9) pass = false;
            }
        }
    }
    report(6, pass, t.seconds(), 60.0, "200 spectra, six width/eps settings each");
}

// 7. The calculus fact holds on the full percent grid.
void criterion_7() {
    Timer t;
    bool pass = true;
    double min_margin = 1.0;
    for (int pi = 1; pi <= 100; ++pi) {
        for (int ei = 1; ei <= pi; ++ei) {
            double p = pi / 100.0, eps = ei / 100.0;
            double lhs = std::sqrt(std::max(p - eps, 0.0)) * std::sqrt(p) +
                         std::sqrt(std::max(1.0 - p, 0.0)) * std::sqrt(1.0 - p + eps);
            double rhs = 1.0 - eps * eps / 8.0;
            min_margin = std::min(min_margin, rhs - lhs);
            if (lhs > rhs + 1e-12) pass = false;
        }
    }
    report(7, pass, t.seconds(), 1.0,
           "5050 grid points, smallest margin " + format_double17(min_margin));
}

// 8. Smoothed distance: exact at eps 0, monotone in eps, worked example pinned.
void criterion_8() {
    Timer t;
    Rng rng(case_seed(default_seed, 108));
    bool pass = true;
    for (int i = 0; i < 500; ++i) {
        SchmidtSpectrum a = random_spectrum_mixed(rng, 6);
        SchmidtSpectrum b = random_spectrum_mixed(rng, 6);
        if (smoothed_emd(a, b, 0.0) != emd_linf(a, b).distance) pass = false;
        double prev = smoothed_emd(a, b, 0.0);
        for (double eps = 0.05; eps <= 0.5001; eps += 0.05) {
            double s = smoothed_emd(a, b, eps);
            if (s > prev + 1e-12) pass = false;
            prev = s;
        }
    }
    SchmidtSpectrum one = normalize_spectrum({1.0});
    SchmidtSpectrum tail = normalize_spectrum({0.9, 0.025, 0.025, 0.025, 0.025});
    double plain = emd_linf_quantile(one, tail);
    double smoothed = smoothed_emd(one, tail, 0.1);
    if (std::abs(plain - 5.321928094887363) > 1e-6) pass = false;
    if (std::abs(smoothed - 0.15200309344505006) > 1e-6) pass = false;
    report(8, pass, t.seconds(), 5.0,
           "500 pairs plus the worked tail example (" + format_double17(plain) + ", " +
               format_double17(smoothed) + ")");
}

// 9. The fidelity lower bound holds on 200 simulated instances.
void criterion_9() {
    Timer t;
    Rng rng(case_seed(default_seed, 109));
    bool pass = true;
    std::vector<std::int64_t> a_dims{2, 2, 2, 2}, b_dims{16};
    for (int i = 0; i < 200; ++i) {
        BipartiteState psi =
            make_canonical_state_shaped(random_spectrum_mixed(rng, 12, 30.0), a_dims, b_dims);
        BipartiteState phi =
            make_canonical_state_shaped(random_spectrum_mixed(rng, 12, 30.0), a_dims, b_dims);
        std::vector<std::string> movable{"A0", "A1", "A2", "A3"};
        std::shuffle(movable.begin(), movable.end(), rng.engine);
        std::size_t q = static_cast<std::size_t>(i % 4);
        CommUnitary u = random_comm_unitary(rng, psi, movable, q);
        double eps = 0.05 + 0.9 * rng.uniform();
        EmpiricalLowerBound r = check_lower_bound_empirically(psi, phi, eps, u);
        if (r.lhs > r.report.bound + 1e-9) pass = false;
    }
    report(9, pass, t.seconds(), 120.0, "200 simulated instances against the bound");
}

// 10. Reversal: every criterion-2 protocol replays backwards, and double
// reversal is the identity on the step list.
void criterion_10() {
    Timer t;
    bool pass = !replay_cases.empty();
    double worst_fid = 1.0;
    for (const auto& rc : replay_cases) {
        ConversionProtocol rev = reverse_protocol(rc.p);
        BipartiteState back = run_protocol(make_canonical_state(rc.b), rev);
        double f = fidelity(back, make_canonical_state(rc.a));
        worst_fid = std::min(worst_fid, f);
        if (f < 1.0 - 1e-9) pass = false;
        if (reverse_protocol(rev) != rc.p) pass = false;
    }
    report(10, pass, t.seconds(), 120.0,
           "reverse replays of all criterion-2 protocols, worst fidelity " +
               format_double17(worst_fid));
}

} // namespace

int main() {
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();
    if (failures == 0)
        std::printf("acceptance: all 10 criteria passed\n");
    else
        std::printf("acceptance: %d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
