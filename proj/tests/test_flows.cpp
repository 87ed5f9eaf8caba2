#include <catch2/catch_amalgamated.hpp>

#include "schflow/flows.hpp"
#include "schflow/sampling.hpp"
#include "schflow/suites.hpp"

using namespace schflow;

TEST_CASE("dyadic bins have a closed upper edge") {
    CHECK(dyadic_bin(1.0) == 0);
    CHECK(dyadic_bin(0.6) == 0);
    CHECK(dyadic_bin(0.5) == 1);
    CHECK(dyadic_bin(0.3) == 1);
    CHECK(dyadic_bin(0.25) == 2);
    CHECK(dyadic_bin(std::ldexp(1.0, -17)) == 17);
}

TEST_CASE("flow verification on hand-built graphs") {
    SchmidtSpectrum one = normalize_spectrum({1.0});
    SchmidtSpectrum epr = normalize_spectrum({0.5, 0.5});

    FlowGraph fan{FlowDirection::right, 1, 2, {{0, 0}, {0, 1}}};
    CHECK_NOTHROW(verify_flow(one, epr, fan));
    CHECK(flow_degree(fan) == 2);

    FlowGraph broken{FlowDirection::right, 1, 2, {{0, 0}}};
    Errc c = Errc::parse;
    try {
        verify_flow(one, epr, broken);
    } catch (const Error& e) {
        c = e.code();
    }
    CHECK(c == Errc::invalid_flow);

    FlowGraph ident{FlowDirection::right, 2, 2, {{0, 0}, {1, 1}}};
    CHECK_NOTHROW(verify_flow(epr, epr, ident));
    CHECK(flow_degree(ident) == 1);

    FlowGraph out_of_range{FlowDirection::right, 1, 2, {{0, 0}, {0, 2}}};
    c = Errc::parse;
    try {
        verify_flow(one, epr, out_of_range);
    } catch (const Error& e) {
        c = e.code();
    }
    CHECK(c == Errc::index_out_of_range);
}

TEST_CASE("mirrored flows swap sides and direction") {
    FlowGraph fan{FlowDirection::right, 1, 2, {{0, 0}, {0, 1}}};
    FlowGraph m = mirror(fan);
    CHECK(m.direction == FlowDirection::left);
    CHECK(m.left_size == 2);
    CHECK(m.right_size == 1);
    CHECK(m.edges == std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}, {1, 0}});
    CHECK(mirror(m) == fan);
}

TEST_CASE("three stage construction at distance zero") {
    SchmidtSpectrum epr = normalize_spectrum({0.5, 0.5});
    ThreeStageFlows ts = build_three_stage_flows(epr, epr);

    CHECK(ts.d == 0.0);
    REQUIRE(ts.rho.size() == 8); // two targets, four slots each
    for (double c : ts.rho.coefficients) CHECK(c == 0.125);
    CHECK(flow_degree(ts.f1) <= 16);
    CHECK(flow_degree(ts.f2) <= 4);
    CHECK(flow_degree(ts.f3) == 4);
    CHECK_NOTHROW(verify_flow(ts.chi, ts.gamma, ts.f1));
    CHECK_NOTHROW(verify_flow(ts.gamma, ts.rho, ts.f2));
    CHECK_NOTHROW(verify_flow(ts.rho, ts.upsilon, ts.f3));
}

TEST_CASE("three stage construction at distance one") {
    SchmidtSpectrum one = normalize_spectrum({1.0});
    SchmidtSpectrum epr = normalize_spectrum({0.5, 0.5});
    ThreeStageFlows ts = build_three_stage_flows(one, epr);

    CHECK(ts.d == 1.0);
    REQUIRE(ts.rho.size() == 16); // two targets, eight slots each
    for (double c : ts.rho.coefficients) CHECK(c == 0.0625);
    CHECK(flow_degree(ts.f1) <= 64);
    CHECK(flow_degree(ts.f3) == 8);
    CHECK_NOTHROW(verify_flow(ts.chi, ts.gamma, ts.f1));
    CHECK_NOTHROW(verify_flow(ts.gamma, ts.rho, ts.f2));
    CHECK_NOTHROW(verify_flow(ts.rho, ts.upsilon, ts.f3));

    // Every middle atom carries exactly one edge on each side.
    std::vector<int> deg1(ts.gamma.size(), 0), deg2(ts.gamma.size(), 0);
    for (auto [i, j] : ts.f1.edges) ++deg1[j];
    for (auto [i, j] : ts.f2.edges) ++deg2[i];
    for (std::size_t k = 0; k < ts.gamma.size(); ++k) {
        CHECK(deg1[k] == 1);
        CHECK(deg2[k] == 1);
    }
}

TEST_CASE("construction is deterministic") {
    Rng rng(case_seed(default_seed, 3));
    auto [a, b] = random_bounded_pair(rng, 6, 3.0);
    ThreeStageFlows first = build_three_stage_flows(a, b);
    ThreeStageFlows second = build_three_stage_flows(a, b);
    CHECK(first.gamma == second.gamma);
    CHECK(first.rho == second.rho);
    CHECK(first.f1 == second.f1);
    CHECK(first.f2 == second.f2);
    CHECK(first.f3 == second.f3);
}

TEST_CASE("oversized slot tables are rejected") {
    double x = std::ldexp(1.0, -22);
    SchmidtSpectrum one = normalize_spectrum({1.0});
    SchmidtSpectrum deep = normalize_spectrum({1.0 - x, x});
    Errc c = Errc::parse;
    try {
        build_three_stage_flows(one, deep);
    } catch (const Error& e) {
        c = e.code();
    }
    CHECK(c == Errc::too_large);
}

TEST_CASE("flows property suite") {
    SuiteConfig cfg;
    cfg.cases = 150;
    SuiteResult r = run_suite("flows", cfg);
    INFO((r.failures.empty() ? "" : r.failures.front()));
    CHECK(r.failed == 0);
}
