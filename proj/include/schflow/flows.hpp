#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "schflow/errors.hpp"
#include "schflow/numeric.hpp"
#include "schflow/spectrum.hpp"
#include "schflow/transport.hpp"

namespace schflow {

// Dyadic bin index: bin m holds coefficients with 2^-m >= c > 2^-(m+1)
// (boundary coefficient 2^-m belongs to bin m). Exact via frexp.
inline int dyadic_bin(double c) {
    if (!(c > 0.0) || c > 1.0) fail(Errc::out_of_domain, "coefficient outside (0,1]");
    int e = 0;
    double f = std::frexp(c, &e);
    return f == 0.5 ? 1 - e : -e;
}

enum class FlowDirection { right, left };

// Bipartite mass-splitting graph. Direction names the fine side: in a right
// flow every right vertex touches exactly one edge and each left mass equals
// the sum of its right endpoints; a left flow is the mirror image.
struct FlowGraph {
    FlowDirection direction;
    std::size_t left_size;
    std::size_t right_size;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    bool operator==(const FlowGraph&) const = default;
};

inline FlowGraph mirror(const FlowGraph& g) {
    FlowGraph m{g.direction == FlowDirection::right ? FlowDirection::left : FlowDirection::right,
                g.right_size, g.left_size, {}};
    m.edges.reserve(g.edges.size());
    for (auto [l, r] : g.edges) m.edges.push_back({r, l});
    return m;
}

inline void verify_flow(const SchmidtSpectrum& src, const SchmidtSpectrum& dst, const FlowGraph& g) {
    if (g.left_size != src.size() || g.right_size != dst.size())
        fail(Errc::index_out_of_range, "flow sides do not match the spectra");
    std::vector<std::size_t> ldeg(g.left_size, 0), rdeg(g.right_size, 0);
    std::vector<NeumaierSum> lsum(g.left_size), rsum(g.right_size);
    for (auto [l, r] : g.edges) {
        if (l >= g.left_size || r >= g.right_size)
            fail(Errc::index_out_of_range, "flow edge out of range");
        ++ldeg[l];
        ++rdeg[r];
        lsum[l].add(dst.coefficients[r]);
        rsum[r].add(src.coefficients[l]);
    }
    if (g.direction == FlowDirection::right) {
        for (std::size_t r = 0; r < g.right_size; ++r)
            if (rdeg[r] != 1) fail(Errc::invalid_flow, "right vertex degree != 1");
        for (std::size_t l = 0; l < g.left_size; ++l)
            if (std::abs(lsum[l].value() - src.coefficients[l]) > tol::norm)
                fail(Errc::invalid_flow, "left mass not conserved at " + std::to_string(l));
    } else {
        for (std::size_t l = 0; l < g.left_size; ++l)
            if (ldeg[l] != 1) fail(Errc::invalid_flow, "left vertex degree != 1");
        for (std::size_t r = 0; r < g.right_size; ++r)
            if (std::abs(rsum[r].value() - dst.coefficients[r]) > tol::norm)
                fail(Errc::invalid_flow, "right mass not conserved at " + std::to_string(r));
    }
}

inline std::size_t flow_degree(const FlowGraph& g) {
    std::vector<std::size_t> ldeg(g.left_size, 0), rdeg(g.right_size, 0);
    for (auto [l, r] : g.edges) {
        ++ldeg[l];
        ++rdeg[r];
    }
    std::size_t d = 0;
    for (std::size_t x : ldeg) d = std::max(d, x);
    for (std::size_t x : rdeg) d = std::max(d, x);
    return d;
}

// chi --f1--> gamma <--f2-- rho <--f3-- upsilon, where gamma refines chi into
// slot-sized pieces and rho splits every upsilon atom into K = 2^(ceil(d)+2)
// equal slots. d is the plain distance between the endpoints.
struct ThreeStageFlows {
    SchmidtSpectrum chi;
    SchmidtSpectrum upsilon;
    SchmidtSpectrum gamma;
    SchmidtSpectrum rho;
    FlowGraph f1;
    FlowGraph f2;
    FlowGraph f3;
    double d;
};

namespace detail {

inline std::string pad4(std::size_t v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%04zu", v);
    return buf;
}

} // namespace detail

inline ThreeStageFlows build_three_stage_flows(const SchmidtSpectrum& chi,
                                               const SchmidtSpectrum& upsilon) {
    EmdResult emd = emd_linf(chi, upsilon);
    int cd = ceil_distance(emd.distance);
    std::size_t K = std::size_t{1} << (cd + 2);
    if (upsilon.size() * K > (std::size_t{1} << 22) || upsilon.size() * K >= 10000 * 10000)
        fail(Errc::too_large, "slot construction too large for ceil(d) = " + std::to_string(cd));

    // Coupling mass regrouped as target bin -> source bin -> source atom.
    // Ordered maps keep the fill order (ascending l, then m, then i) that the
    // degree bounds rely on.
    std::vector<int> lbin(upsilon.size());
    std::vector<std::vector<std::size_t>> bin_atoms_of; // atoms per target bin, ascending
    std::map<int, std::vector<std::size_t>> atoms_by_lbin;
    for (std::size_t j = 0; j < upsilon.size(); ++j) {
        lbin[j] = dyadic_bin(upsilon.coefficients[j]);
        atoms_by_lbin[lbin[j]].push_back(j);
    }
    std::map<int, std::map<int, std::map<std::size_t, double>>> w;
    for (const auto& e : emd.witness.entries)
        w[lbin[e.j]][dyadic_bin(chi.coefficients[e.i])][e.i] += e.mass;

    struct Piece {
        std::size_t j, k, r;
        double coeff;
        std::size_t src;
    };
    std::vector<Piece> pieces;
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> rcount;

    for (const auto& [l, by_m] : w) {
        const std::vector<std::size_t>& ys = atoms_by_lbin.at(l);
        std::size_t yi = 0, k = 0;
        double slot_fill = 0.0;
        for (const auto& [m, by_i] : by_m) {
            (void)m;
            for (const auto& [i, wi] : by_i) {
                double temp = wi;
                while (temp > tol::pour) {
                    if (yi >= ys.size()) {
                        // Float drift can leave a vanishing residue after the
                        // last slot; anything larger is a real bug.
                        if (temp > 1e-8) throw std::logic_error("slot filler overran its bin");
                        break;
                    }
                    std::size_t j = ys[yi];
                    double slot_cap = upsilon.coefficients[j] / static_cast<double>(K);
                    double pour = std::min(temp, slot_cap - slot_fill);
                    if (pour > tol::pour) {
                        std::size_t r = rcount[{j, k}]++;
                        pieces.push_back({j, k, r, pour, i});
                    }
                    temp -= pour;
                    slot_fill += pour;
                    if (slot_fill >= slot_cap - tol::pour) {
                        ++k;
                        slot_fill = 0.0;
                        if (k >= K) {
                            k = 0;
                            ++yi;
                        }
                    }
                }
            }
        }
    }

    // Canonical order for the piece spectrum; zero-padded labels make the tie
    // order numeric and the whole construction bit-deterministic.
    std::vector<std::size_t> order(pieces.size());
    for (std::size_t p = 0; p < pieces.size(); ++p) order[p] = p;
    std::vector<std::string> plabel(pieces.size());
    for (std::size_t p = 0; p < pieces.size(); ++p)
        plabel[p] = detail::pad4(pieces[p].j) + ":" + detail::pad4(pieces[p].k) + ":" +
                    detail::pad4(pieces[p].r);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (pieces[a].coeff != pieces[b].coeff) return pieces[a].coeff > pieces[b].coeff;
        return plabel[a] < plabel[b];
    });

    ThreeStageFlows out{chi, upsilon, {}, {}, {}, {}, {}, emd.distance};
    out.gamma.coefficients.reserve(pieces.size());
    out.gamma.labels.reserve(pieces.size());
    NeumaierSum gsum;
    std::vector<std::size_t> canon(pieces.size());
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        const Piece& p = pieces[order[rank]];
        canon[order[rank]] = rank;
        out.gamma.coefficients.push_back(p.coeff);
        out.gamma.labels.push_back(plabel[order[rank]]);
        gsum.add(p.coeff);
    }
    if (std::abs(gsum.value() - 1.0) > tol::norm)
        throw std::logic_error("piece masses drifted from 1");

    out.rho.coefficients.reserve(upsilon.size() * K);
    out.rho.labels.reserve(upsilon.size() * K);
    for (std::size_t j = 0; j < upsilon.size(); ++j)
        for (std::size_t k = 0; k < K; ++k) {
            out.rho.coefficients.push_back(upsilon.coefficients[j] / static_cast<double>(K));
            out.rho.labels.push_back(detail::pad4(j) + ":" + detail::pad4(k));
        }

    out.f1 = {FlowDirection::right, chi.size(), out.gamma.size(), {}};
    out.f2 = {FlowDirection::left, out.gamma.size(), out.rho.size(), {}};
    out.f3 = {FlowDirection::left, out.rho.size(), upsilon.size(), {}};
    for (std::size_t p = 0; p < pieces.size(); ++p) {
        out.f1.edges.push_back({pieces[p].src, canon[p]});
        out.f2.edges.push_back({canon[p], pieces[p].j * K + pieces[p].k});
    }
    std::sort(out.f1.edges.begin(), out.f1.edges.end());
    std::sort(out.f2.edges.begin(), out.f2.edges.end());
    for (std::size_t j = 0; j < upsilon.size(); ++j)
        for (std::size_t k = 0; k < K; ++k) out.f3.edges.push_back({j * K + k, j});
    return out;
}

} // namespace schflow
