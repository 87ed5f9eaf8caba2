#include <catch2/catch_amalgamated.hpp>

#include "schflow/protocol.hpp"
#include "schflow/sampling.hpp"
#include "schflow/suites.hpp"

using namespace schflow;

TEST_CASE("identity flow compiles to a free protocol") {
    SchmidtSpectrum epr = normalize_spectrum({0.5, 0.5});
    FlowGraph ident{FlowDirection::right, 2, 2, {{0, 0}, {1, 1}}};
    ConversionProtocol p = right_flow_to_protocol(epr, epr, ident);

    CHECK(p.declared_cost == 0);
    CHECK(protocol_cost(p) == 0);
    REQUIRE(p.steps.size() == 4);
    CHECK(std::holds_alternative<AppendStep>(p.steps[0]));
    CHECK(std::holds_alternative<ControlledPrepareStep>(p.steps[1]));
    CHECK(std::holds_alternative<TransmitStep>(p.steps[2]));
    CHECK(std::holds_alternative<RelabelStep>(p.steps[3]));
    CHECK(std::get<TransmitStep>(p.steps[2]).qubits == 0);
}

TEST_CASE("fan-out flow costs one qubit") {
    SchmidtSpectrum one = normalize_spectrum({1.0});
    SchmidtSpectrum epr = normalize_spectrum({0.5, 0.5});
    FlowGraph fan{FlowDirection::right, 1, 2, {{0, 0}, {0, 1}}};
    ConversionProtocol p = right_flow_to_protocol(one, epr, fan);

    CHECK(p.declared_cost == 1);
    const auto& prep = std::get<ControlledPrepareStep>(p.steps[1]);
    REQUIRE(prep.table.size() == 1);
    REQUIRE(prep.table[0].entries.size() == 2);
    // Amplitudes sqrt(kappa_j / tau_i) stored as exact ratios.
    CHECK(prep.table[0].entries[0].num == 0.5);
    CHECK(prep.table[0].entries[0].den == 1.0);
}

TEST_CASE("a degree eight flow costs three qubits") {
    SchmidtSpectrum one = normalize_spectrum({1.0});
    SchmidtSpectrum eighth = normalize_spectrum(std::vector<double>(8, 0.125));
    FlowGraph fan{FlowDirection::right, 1, 8, {}};
    for (std::size_t j = 0; j < 8; ++j) fan.edges.push_back({0, j});
    CHECK(right_flow_to_protocol(one, eighth, fan).declared_cost == 3);
}

TEST_CASE("left-direction flows are rejected by the right compiler") {
    SchmidtSpectrum epr = normalize_spectrum({0.5, 0.5});
    FlowGraph left{FlowDirection::left, 2, 2, {{0, 0}, {1, 1}}};
    Errc c = Errc::parse;
    try {
        right_flow_to_protocol(epr, epr, left);
    } catch (const Error& e) {
        c = e.code();
    }
    CHECK(c == Errc::invalid_flow);
}

TEST_CASE("reversal is a cost-preserving involution") {
    Rng rng(case_seed(default_seed, 4));
    for (int t = 0; t < 30; ++t) {
        auto [a, b] = random_bounded_pair(rng, 5, 2.0);
        ConversionProtocol p = conversion_protocol(a, b);
        ConversionProtocol r = reverse_protocol(p);
        CHECK(r.declared_cost == p.declared_cost);
        CHECK(r.source == p.target);
        CHECK(r.target == p.source);
        CHECK(reverse_protocol(r) == p);
    }
}

TEST_CASE("composite cost obeys the distance budget") {
    SchmidtSpectrum one = normalize_spectrum({1.0});
    SchmidtSpectrum epr = normalize_spectrum({0.5, 0.5});
    SchmidtSpectrum skew = normalize_spectrum({0.6, 0.4});
    SchmidtSpectrum quad = normalize_spectrum({0.25, 0.25, 0.25, 0.25});

    CHECK(conversion_protocol(epr, epr).declared_cost <= 8);
    CHECK(conversion_protocol(one, epr).declared_cost <= 12);
    int budget = 4 * ceil_distance(emd_linf_quantile(skew, quad)) + 8;
    CHECK(conversion_protocol(skew, quad).declared_cost <= budget);
}

TEST_CASE("empty protocol costs nothing") {
    ConversionProtocol p{normalize_spectrum({1.0}), normalize_spectrum({1.0}), 0, {}};
    CHECK(protocol_cost(p) == 0);
}

TEST_CASE("protocols property suite") {
    SuiteConfig cfg;
    cfg.cases = 100;
    SuiteResult r = run_suite("protocols", cfg);
    INFO((r.failures.empty() ? "" : r.failures.front()));
    CHECK(r.failed == 0);
}
