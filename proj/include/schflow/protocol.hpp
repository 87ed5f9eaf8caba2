#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "schflow/errors.hpp"
#include "schflow/flows.hpp"
#include "schflow/numeric.hpp"
#include "schflow/spectrum.hpp"

namespace schflow {

enum class Party { A, B };

inline const char* party_name(Party p) { return p == Party::A ? "A" : "B"; }

// Q-qubit ancilla registers created in |0...0>.
struct AppendStep {
    Party owner;
    std::vector<std::string> names;
    int qubits; // each named register has dimension 2^qubits
    bool operator==(const AppendStep&) const = default;
};

// Inverse of Append: the named registers must hold |0...0> up to 1e-6.
struct DiscardStep {
    Party owner;
    std::vector<std::string> names;
    int qubits;
    bool operator==(const DiscardStep&) const = default;
};

// One column of the controlled preparation: on control value `control`, the
// two target registers go from |0,0> to sum_s sqrt(num/den) |s,s>. Amplitudes
// are kept as (num, den) pairs, so serialization is exact and replay is
// bit-reproducible.
struct PrepEntry {
    std::int64_t s;
    double num;
    double den;
    bool operator==(const PrepEntry&) const = default;
};

struct PrepRow {
    std::int64_t control;
    std::vector<PrepEntry> entries; // s strictly increasing
    bool operator==(const PrepRow&) const = default;
};

struct ControlledPrepareStep {
    Party owner;
    std::string control;
    std::array<std::string, 2> targets;
    int qubits; // per target register
    bool adjoint;
    std::vector<PrepRow> table; // one row per control value, ascending
    bool operator==(const ControlledPrepareStep&) const = default;
};

struct TransmitStep {
    std::string name;
    Party from;
    Party to;
    int qubits;
    bool operator==(const TransmitStep&) const = default;
};

// Basis relabeling applied to both parties at once: each party's listed input
// registers are read as a tuple over in_dims, pushed through `pairs`, and
// written as a tuple over out_dims into freshly named output registers. The
// same pair list serves both parties (they hold mirror-image indices).
struct RelabelStep {
    std::vector<std::string> a_inputs;
    std::vector<std::string> a_outputs;
    std::vector<std::string> b_inputs;
    std::vector<std::string> b_outputs;
    std::vector<std::int64_t> in_dims;
    std::vector<std::int64_t> out_dims;
    std::vector<std::pair<std::vector<std::int64_t>, std::vector<std::int64_t>>> pairs;
    bool operator==(const RelabelStep&) const = default;
};

using ProtocolStep =
    std::variant<AppendStep, ControlledPrepareStep, TransmitStep, RelabelStep, DiscardStep>;

struct ConversionProtocol {
    SchmidtSpectrum source;
    SchmidtSpectrum target;
    int declared_cost = 0; // qubits sent, all transmits summed
    std::vector<ProtocolStep> steps;
    bool operator==(const ConversionProtocol&) const = default;
};

inline int protocol_cost(const ConversionProtocol& p) {
    int q = 0;
    for (const auto& step : p.steps)
        if (const auto* t = std::get_if<TransmitStep>(&step)) q += t->qubits;
    return q;
}

// Compile a right flow tau -> kappa into a one-round protocol: append two
// Q-qubit registers, prepare sum_j sqrt(kappa_j / tau_i) |s_ij, s_ij> under
// control i, send one register, then relabel (i, s_ij) -> j on both sides.
// s_ij is the rank of j among i's edge targets, so s = 0 always occurs and
// Q = ceil(log2(max degree)) suffices.
inline ConversionProtocol right_flow_to_protocol(const SchmidtSpectrum& tau,
                                                 const SchmidtSpectrum& kappa,
                                                 const FlowGraph& g) {
    if (g.direction != FlowDirection::right)
        fail(Errc::invalid_flow, "protocol compilation needs a right flow");
    verify_flow(tau, kappa, g);

    std::vector<std::vector<std::size_t>> targets(tau.size());
    for (auto [l, r] : g.edges) targets[l].push_back(r);
    std::size_t max_deg = 1;
    for (auto& ts : targets) {
        std::sort(ts.begin(), ts.end());
        max_deg = std::max(max_deg, ts.size());
    }
    int q = ceil_log2_int(static_cast<std::int64_t>(max_deg));

    ControlledPrepareStep prep{Party::A, "A", {"C1", "C2"}, q, false, {}};
    RelabelStep relabel{{"A", "C1"}, {"A"}, {"B", "C2"}, {"B"},
                        {static_cast<std::int64_t>(tau.size()), std::int64_t{1} << q},
                        {static_cast<std::int64_t>(kappa.size())},
                        {}};
    for (std::size_t i = 0; i < tau.size(); ++i) {
        PrepRow row{static_cast<std::int64_t>(i), {}};
        for (std::size_t s = 0; s < targets[i].size(); ++s) {
            std::size_t j = targets[i][s];
            row.entries.push_back({static_cast<std::int64_t>(s), kappa.coefficients[j],
                                   tau.coefficients[i]});
            relabel.pairs.push_back({{static_cast<std::int64_t>(i), static_cast<std::int64_t>(s)},
                                     {static_cast<std::int64_t>(j)}});
        }
        prep.table.push_back(std::move(row));
    }

    ConversionProtocol p{tau, kappa, q, {}};
    p.steps.push_back(AppendStep{Party::A, {"C1", "C2"}, q});
    p.steps.push_back(std::move(prep));
    p.steps.push_back(TransmitStep{"C2", Party::A, Party::B, q});
    p.steps.push_back(std::move(relabel));
    return p;
}

// Time-reverse: run the steps backwards, inverting each one. Appends become
// zero-checked discards, prepares flip their adjoint bit, transmits change
// direction, relabels swap their sides. Reversing twice is the identity.
inline ConversionProtocol reverse_protocol(const ConversionProtocol& p) {
    ConversionProtocol r{p.target, p.source, p.declared_cost, {}};
    r.steps.reserve(p.steps.size());
    for (auto it = p.steps.rbegin(); it != p.steps.rend(); ++it) {
        const ProtocolStep& step = *it;
        if (const auto* a = std::get_if<AppendStep>(&step)) {
            r.steps.push_back(DiscardStep{a->owner, a->names, a->qubits});
        } else if (const auto* d = std::get_if<DiscardStep>(&step)) {
            r.steps.push_back(AppendStep{d->owner, d->names, d->qubits});
        } else if (const auto* c = std::get_if<ControlledPrepareStep>(&step)) {
            ControlledPrepareStep inv = *c;
            inv.adjoint = !inv.adjoint;
            r.steps.push_back(std::move(inv));
        } else if (const auto* t = std::get_if<TransmitStep>(&step)) {
            r.steps.push_back(TransmitStep{t->name, t->to, t->from, t->qubits});
        } else if (const auto* rl = std::get_if<RelabelStep>(&step)) {
            RelabelStep inv{rl->a_outputs, rl->a_inputs, rl->b_outputs, rl->b_inputs,
                            rl->out_dims,  rl->in_dims,  {}};
            inv.pairs.reserve(rl->pairs.size());
            for (const auto& pr : rl->pairs) inv.pairs.push_back({pr.second, pr.first});
            r.steps.push_back(std::move(inv));
        }
    }
    return r;
}

// Full conversion chi -> upsilon: forward through f1, then the reverses of
// the compiled mirrors of f2 and f3. Total cost is bounded by 4 ceil(d) + 8:
// the stage degrees are at most 2^(2 ceil(d)+4), 2^(ceil(d)+2), 2^(ceil(d)+2).
inline ConversionProtocol conversion_protocol(const SchmidtSpectrum& chi,
                                              const SchmidtSpectrum& upsilon) {
    ThreeStageFlows fl = build_three_stage_flows(chi, upsilon);
    ConversionProtocol p1 = right_flow_to_protocol(fl.chi, fl.gamma, fl.f1);
    ConversionProtocol p2 = reverse_protocol(right_flow_to_protocol(fl.rho, fl.gamma, mirror(fl.f2)));
    ConversionProtocol p3 =
        reverse_protocol(right_flow_to_protocol(fl.upsilon, fl.rho, mirror(fl.f3)));

    ConversionProtocol out{chi, upsilon, p1.declared_cost + p2.declared_cost + p3.declared_cost, {}};
    for (auto* part : {&p1, &p2, &p3})
        for (auto& s : part->steps) out.steps.push_back(std::move(s));
    return out;
}

} // namespace schflow
