#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "schflow/sampling.hpp"
#include "schflow/suites.hpp"
#include "schflow/universality.hpp"

using namespace schflow;

TEST_CASE("grouping multiplicities on worked values") {
    CHECK(grouping_multiplicity(0.25, 2) == 1);
    CHECK(grouping_multiplicity(std::ldexp(1.0, -8), 2) == 1);
    CHECK(grouping_multiplicity(0.6, 2) == 4);
    CHECK(grouping_multiplicity(0.4, 2) == 2);
    CHECK(grouping_multiplicity(0.5, 2) == 2);

    Errc c = Errc::parse;
    try {
        grouping_multiplicity(0.5, 1);
    } catch (const Error& e) {
        c = e.code();
    }
    CHECK(c == Errc::out_of_domain);
}

TEST_CASE("grouped spectra on worked inputs") {
    GroupedSpectrum epr = build_grouped_state(normalize_spectrum({0.5, 0.5}), 2);
    REQUIRE(epr.atoms.size() == 4);
    for (const auto& a : epr.atoms) CHECK(a.coefficient == 0.25);

    GroupedSpectrum skew = build_grouped_state(normalize_spectrum({0.6, 0.4}), 2);
    REQUIRE(skew.atoms.size() == 6);
    int n15 = 0, n20 = 0;
    for (const auto& a : skew.atoms) {
        if (a.coefficient == 0.15) ++n15;
        if (a.coefficient == 0.2) ++n20;
    }
    CHECK(n15 == 4);
    CHECK(n20 == 2);

    // Exact power-of-2^N coefficients are left alone.
    SchmidtSpectrum dyadic = normalize_spectrum({0.25, 0.25, 0.25, 0.25});
    GroupedSpectrum same = build_grouped_state(dyadic, 2);
    CHECK(same.as_spectrum().coefficients == dyadic.coefficients);
}

TEST_CASE("bin components partition the grouped mass") {
    GroupedSpectrum quad = build_grouped_state(normalize_spectrum({0.25, 0.25, 0.25, 0.25}), 2);
    std::vector<BinComponent> comps = bin_components(quad);
    REQUIRE(comps.size() == 1);
    CHECK(comps[0].bin == 1);
    CHECK_THAT(comps[0].norm_sq, Catch::Matchers::WithinAbs(1.0, 1e-12));

    GroupedSpectrum skew = build_grouped_state(normalize_spectrum({0.6, 0.4}), 2);
    std::vector<BinComponent> sc = bin_components(skew);
    REQUIRE(sc.size() == 1);
    CHECK(sc[0].bin == 1);
    CHECK(sc[0].atom_indices.size() == 6);
    CHECK(sc[0].spread_value <= 2.0);
}

TEST_CASE("single-bin block decomposition is exact") {
    GroupedSpectrum g = build_grouped_state(normalize_spectrum({0.6, 0.4}), 2);
    BlockDecomposition d = block_decompose(g, 0.5, 2);
    CHECK(d.trace_gap == 0.0);
    CHECK(d.vfar.cwiseAbs().maxCoeff() == 0.0);
    CHECK(d.removed.cwiseAbs().maxCoeff() == 0.0);
    CHECK((d.vblock - d.phi).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("distant clusters land in the far part") {
    double x = std::ldexp(1.0, -16);
    GroupedSpectrum g = build_grouped_state(normalize_spectrum({1.0 - x, x}), 2);
    BlockDecomposition d = block_decompose(g, 0.5, 2);

    REQUIRE(d.phi.rows() == 2);
    CHECK(d.trace_gap <= 1.0 + tol::dist);
    CHECK(d.vfar(0, 1) == d.phi(0, 1));
    CHECK(d.vfar(1, 0) == d.phi(1, 0));
    CHECK(d.vfar(0, 0) == 0.0);
    CHECK(d.vblock(0, 0) == d.phi(0, 0));
    CHECK(d.vblock(1, 1) == d.phi(1, 1));
    CHECK(std::abs(d.bin_values[0] - d.bin_values[1]) > d.b);
    CHECK(d.s_traces[static_cast<std::size_t>(d.k_star - 1)] <= 0.5 + tol::dist);

    Errc c = Errc::parse;
    try {
        block_decompose(g, 0.0);
    } catch (const Error& e) {
        c = e.code();
    }
    CHECK(c == Errc::eps_out_of_range);
}

TEST_CASE("uniform spectra and EPR preparation") {
    SchmidtSpectrum two = uniform_spectrum(1);
    CHECK(two.coefficients == std::vector<double>{0.5, 0.5});

    ConversionProtocol flat = prepare_block_from_epr(two);
    CHECK(flat.declared_cost <= 8);
    CHECK(flat.source == two);

    SchmidtSpectrum block = normalize_spectrum({0.5, 0.25, 0.25});
    ConversionProtocol p = prepare_block_from_epr(block);
    CHECK(p.source.size() == 4); // nearest flat spectrum has four atoms
    CHECK(p.declared_cost <= 12);
    BipartiteState out = run_protocol(make_canonical_state(p.source), p);
    CHECK(fidelity(out, make_canonical_state(block)) >= 1.0 - tol::replay);
}

TEST_CASE("lower bound evaluation on worked numbers") {
    LowerBoundReport r = evaluate_lower_bound(0.2, 2.0, 40.0);
    CHECK(r.h == 3.0517578125e-05);
    CHECK(r.bound == 0.99018310546875);
    CHECK(r.bound == 1.0 - 0.2 * 0.2 / 4.0 + 6.0 * r.h);
    CHECK(r.alt_bound >= r.bound);

    // Vacuous at eps = 0.
    CHECK(evaluate_lower_bound(0.0, 1.0, 5.0).bound >= 1.0);

    // Doubling d at fixed q halves h.
    LowerBoundReport deeper = evaluate_lower_bound(0.2, 2.0, 42.0);
    CHECK(deeper.h == r.h / 2.0);

    Errc c = Errc::parse;
    try {
        evaluate_lower_bound(1.5, 0.0, 0.0);
    } catch (const Error& e) {
        c = e.code();
    }
    CHECK(c == Errc::eps_out_of_range);
}

TEST_CASE("empirical lower bound on hand-built instances") {
    // Identity evolution, identical states: d = 0 makes the bound vacuous.
    BipartiteState epr = make_canonical_state_shaped(normalize_spectrum({0.5, 0.5}), {2}, {2});
    EmpiricalLowerBound r = check_lower_bound_empirically(epr, epr, 0.1, CommUnitary{});
    CHECK_THAT(r.lhs, Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK(r.report.bound >= 1.0);
    CHECK(r.holds);

    // A one-qubit move against a flat 2^10 target.
    BipartiteState point = make_canonical_state_shaped(normalize_spectrum({1.0}), {2, 512}, {1024});
    BipartiteState flat = make_canonical_state_shaped(uniform_spectrum(10), {2, 512}, {1024});
    CommUnitary u;
    u.ops.push_back(MoveRegister{"A0", Party::A, Party::B});
    EmpiricalLowerBound far = check_lower_bound_empirically(point, flat, 0.1, u);
    CHECK(far.d == 10.0);
    CHECK(far.holds);
}

TEST_CASE("cross-bin overlap bound on a trivial instance") {
    GroupedSpectrum g = build_grouped_state(normalize_spectrum({0.6, 0.4}), 2);
    std::vector<BinComponent> comps = bin_components(g);
    REQUIRE(comps.size() == 1);
    OffdiagBound r = check_offdiag_bound(g, comps[0], comps[0], CommUnitary{}, {2, 2, 32}, {128});
    CHECK_THAT(r.lhs, Catch::Matchers::WithinAbs(comps[0].norm_sq, 1e-12));
    CHECK_THAT(r.rhs, Catch::Matchers::WithinAbs(4.0 * comps[0].norm_sq, 1e-12));
    CHECK(r.holds);
}

TEST_CASE("calculus fact margins") {
    FactCheck zero = fact_calculus_check(0.7, 0.0);
    CHECK_THAT(zero.lhs, Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK(zero.rhs == 1.0);
    CHECK(zero.holds);

    FactCheck corner = fact_calculus_check(1.0, 1.0);
    CHECK(corner.lhs == 0.0);
    CHECK(corner.rhs == 0.875);
    CHECK(corner.holds);

    // Tightest grid point sits at p = 0.5, eps = 0.01.
    FactCheck tight = fact_calculus_check(0.5, 0.01);
    CHECK_THAT(tight.rhs - tight.lhs, Catch::Matchers::WithinAbs(3.750625131282437e-05, 1e-12));

    Errc c = Errc::parse;
    try {
        fact_calculus_check(0.3, 0.4);
    } catch (const Error& e) {
        c = e.code();
    }
    CHECK(c == Errc::out_of_domain);
}

TEST_CASE("universality property suites") {
    SuiteConfig cfg;
    cfg.cases = 80;
    for (const char* name : {"grouping", "blocks", "epr-blocks", "lowerbound", "offdiag", "fact9"}) {
        SuiteResult r = run_suite(name, cfg);
        INFO(r.name << ": " << (r.failures.empty() ? "" : r.failures.front()));
        CHECK(r.failed == 0);
    }
}
