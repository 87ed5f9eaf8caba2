#pragma once

#include <cstdint>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "schflow/errors.hpp"
#include "schflow/flows.hpp"
#include "schflow/numeric.hpp"
#include "schflow/protocol.hpp"
#include "schflow/simulator.hpp"
#include "schflow/spectrum.hpp"
#include "schflow/transport.hpp"

namespace schflow {

// Minimal ordered JSON value for output. Doubles are emitted with 17
// significant digits and field order is insertion order, so identical data
// serializes to identical bytes.
class JsonValue {
public:
    enum class Kind { null, boolean, integer, number, string, array, object };

    JsonValue() : kind_(Kind::null) {}

    static JsonValue boolean(bool b) {
        JsonValue v;
        v.kind_ = Kind::boolean;
        v.bool_ = b;
        return v;
    }
    static JsonValue integer(std::int64_t i) {
        JsonValue v;
        v.kind_ = Kind::integer;
        v.int_ = i;
        return v;
    }
    static JsonValue number(double d) {
        JsonValue v;
        v.kind_ = Kind::number;
        v.num_ = d;
        return v;
    }
    static JsonValue str(std::string s) {
        JsonValue v;
        v.kind_ = Kind::string;
        v.str_ = std::move(s);
        return v;
    }
    static JsonValue array() {
        JsonValue v;
        v.kind_ = Kind::array;
        return v;
    }
    static JsonValue object() {
        JsonValue v;
        v.kind_ = Kind::object;
        return v;
    }

    JsonValue& push(JsonValue v) {
        items_.push_back(std::move(v));
        return *this;
    }
    JsonValue& add(std::string key, JsonValue v) {
        keys_.push_back(std::move(key));
        items_.push_back(std::move(v));
        return *this;
    }

    std::string dump(int indent = 2) const {
        std::string out;
        write(out, indent, 0);
        out.push_back('\n');
        return out;
    }

private:
    static void escape(std::string& out, const std::string& s) {
        out.push_back('"');
        for (char c : s) {
            switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", c);
                    out += buf;
                } else {
                    out.push_back(c);
                }
            }
        }
        out.push_back('"');
    }

    void write(std::string& out, int indent, int depth) const {
        auto pad = [&](int d) {
            if (indent > 0) out.append(static_cast<std::size_t>(indent * d), ' ');
        };
        switch (kind_) {
        case Kind::null: out += "null"; break;
        case Kind::boolean: out += bool_ ? "true" : "false"; break;
        case Kind::integer: out += std::to_string(int_); break;
        case Kind::number: out += format_double17(num_); break;
        case Kind::string: escape(out, str_); break;
        case Kind::array: {
            if (items_.empty()) {
                out += "[]";
                break;
            }
            out.push_back('[');
            for (std::size_t k = 0; k < items_.size(); ++k) {
                if (k) out.push_back(',');
                if (indent > 0) out.push_back('\n');
                pad(depth + 1);
                items_[k].write(out, indent, depth + 1);
            }
            if (indent > 0) out.push_back('\n');
            pad(depth);
            out.push_back(']');
            break;
        }
        case Kind::object: {
            if (items_.empty()) {
                out += "{}";
                break;
            }
            out.push_back('{');
            for (std::size_t k = 0; k < items_.size(); ++k) {
                if (k) out.push_back(',');
                if (indent > 0) out.push_back('\n');
                pad(depth + 1);
                escape(out, keys_[k]);
                out += indent > 0 ? ": " : ":";
                items_[k].write(out, indent, depth + 1);
            }
            if (indent > 0) out.push_back('\n');
            pad(depth);
            out.push_back('}');
            break;
        }
        }
    }

    Kind kind_;
    bool bool_ = false;
    std::int64_t int_ = 0;
    double num_ = 0.0;
    std::string str_;
    std::vector<std::string> keys_;
    std::vector<JsonValue> items_;
};

// --- filesystem helpers ---

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::parse, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::parse, "cannot write " + path);
    out << content;
}

inline nlohmann::json parse_json(const std::string& text, const std::string& what) {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) fail(Errc::parse, "malformed JSON in " + what);
    return j;
}

inline nlohmann::json parse_json_file(const std::string& path) {
    return parse_json(read_text_file(path), path);
}

namespace jsondetail {

inline const nlohmann::json& field(const nlohmann::json& j, const char* key) {
    if (!j.is_object() || !j.contains(key))
        fail(Errc::out_of_domain, std::string("missing field \"") + key + "\"");
    return j.at(key);
}

inline double as_finite_number(const nlohmann::json& j, const char* what) {
    if (!j.is_number()) fail(Errc::out_of_domain, std::string(what) + " must be a number");
    double v = j.get<double>();
    if (!std::isfinite(v)) fail(Errc::out_of_domain, std::string(what) + " is not finite");
    return v;
}

inline std::int64_t as_integer(const nlohmann::json& j, const char* what) {
    if (!j.is_number_integer()) fail(Errc::out_of_domain, std::string(what) + " must be an integer");
    return j.get<std::int64_t>();
}

inline Party as_party(const nlohmann::json& j) {
    if (j.is_string() && j.get<std::string>() == "A") return Party::A;
    if (j.is_string() && j.get<std::string>() == "B") return Party::B;
    fail(Errc::out_of_domain, "party must be \"A\" or \"B\"");
}

} // namespace jsondetail

// --- spectra ---

inline JsonValue spectrum_to_json(const SchmidtSpectrum& spec) {
    JsonValue coeffs = JsonValue::array();
    JsonValue labels = JsonValue::array();
    for (double c : spec.coefficients) coeffs.push(JsonValue::number(c));
    for (const auto& l : spec.labels) labels.push(JsonValue::str(l));
    JsonValue out = JsonValue::object();
    out.add("coefficients", std::move(coeffs));
    out.add("labels", std::move(labels));
    return out;
}

inline SchmidtSpectrum spectrum_from_json(const nlohmann::json& j, bool renormalize = false) {
    const nlohmann::json& cs = jsondetail::field(j, "coefficients");
    if (!cs.is_array()) fail(Errc::out_of_domain, "coefficients must be an array");
    std::vector<double> vals;
    vals.reserve(cs.size());
    for (const auto& c : cs) vals.push_back(jsondetail::as_finite_number(c, "coefficient"));
    std::vector<std::string> labels;
    if (j.is_object() && j.contains("labels") && !j.at("labels").is_null()) {
        const nlohmann::json& ls = j.at("labels");
        if (!ls.is_array()) fail(Errc::out_of_domain, "labels must be an array");
        for (const auto& l : ls) {
            if (!l.is_string()) fail(Errc::out_of_domain, "labels must be strings");
            labels.push_back(l.get<std::string>());
        }
    }
    return normalize_spectrum(vals, std::move(labels), renormalize);
}

inline SchmidtSpectrum load_spectrum(const std::string& path, bool renormalize = false) {
    return spectrum_from_json(parse_json_file(path), renormalize);
}

// --- transport plans ---

inline JsonValue plan_to_json(const TransportPlan& plan, double distance) {
    JsonValue edges = JsonValue::array();
    for (const auto& e : plan.entries) {
        JsonValue entry = JsonValue::object();
        entry.add("i", JsonValue::integer(static_cast<std::int64_t>(e.i)));
        entry.add("j", JsonValue::integer(static_cast<std::int64_t>(e.j)));
        entry.add("mass", JsonValue::number(e.mass));
        edges.push(std::move(entry));
    }
    JsonValue out = JsonValue::object();
    out.add("edges", std::move(edges));
    out.add("distance", JsonValue::number(distance));
    return out;
}

inline TransportPlan plan_from_json(const nlohmann::json& j, SchmidtSpectrum source,
                                    SchmidtSpectrum target) {
    TransportPlan plan{std::move(source), std::move(target), {}};
    const nlohmann::json& edges = jsondetail::field(j, "edges");
    if (!edges.is_array()) fail(Errc::out_of_domain, "edges must be an array");
    for (const auto& e : edges) {
        std::int64_t i = jsondetail::as_integer(jsondetail::field(e, "i"), "edge i");
        std::int64_t jj = jsondetail::as_integer(jsondetail::field(e, "j"), "edge j");
        double mass = jsondetail::as_finite_number(jsondetail::field(e, "mass"), "edge mass");
        if (i < 0 || jj < 0) fail(Errc::index_out_of_range, "negative edge index");
        plan.entries.push_back(
            {static_cast<std::size_t>(i), static_cast<std::size_t>(jj), mass});
    }
    validate_plan(plan);
    return plan;
}

// --- flow graphs ---

inline JsonValue flow_to_json(const FlowGraph& g) {
    JsonValue edges = JsonValue::array();
    for (auto [l, r] : g.edges) {
        JsonValue e = JsonValue::array();
        e.push(JsonValue::integer(static_cast<std::int64_t>(l)));
        e.push(JsonValue::integer(static_cast<std::int64_t>(r)));
        edges.push(std::move(e));
    }
    JsonValue out = JsonValue::object();
    out.add("direction", JsonValue::str(g.direction == FlowDirection::right ? "right" : "left"));
    out.add("edges", std::move(edges));
    return out;
}

inline FlowGraph flow_from_json(const nlohmann::json& j, std::size_t left_size,
                                std::size_t right_size) {
    const nlohmann::json& dir = jsondetail::field(j, "direction");
    FlowGraph g{FlowDirection::right, left_size, right_size, {}};
    if (dir.is_string() && dir.get<std::string>() == "right")
        g.direction = FlowDirection::right;
    else if (dir.is_string() && dir.get<std::string>() == "left")
        g.direction = FlowDirection::left;
    else
        fail(Errc::out_of_domain, "direction must be \"right\" or \"left\"");
    const nlohmann::json& edges = jsondetail::field(j, "edges");
    if (!edges.is_array()) fail(Errc::out_of_domain, "edges must be an array");
    for (const auto& e : edges) {
        if (!e.is_array() || e.size() != 2) fail(Errc::out_of_domain, "edge must be a pair");
        std::int64_t l = jsondetail::as_integer(e.at(0), "edge left");
        std::int64_t r = jsondetail::as_integer(e.at(1), "edge right");
        if (l < 0 || r < 0) fail(Errc::index_out_of_range, "negative edge index");
        g.edges.push_back({static_cast<std::size_t>(l), static_cast<std::size_t>(r)});
    }
    return g;
}

inline JsonValue three_stage_to_json(const ThreeStageFlows& fl) {
    JsonValue out = JsonValue::object();
    out.add("chi", spectrum_to_json(fl.chi));
    out.add("upsilon", spectrum_to_json(fl.upsilon));
    out.add("gamma", spectrum_to_json(fl.gamma));
    out.add("rho", spectrum_to_json(fl.rho));
    out.add("f1", flow_to_json(fl.f1));
    out.add("f2", flow_to_json(fl.f2));
    out.add("f3", flow_to_json(fl.f3));
    out.add("d", JsonValue::number(fl.d));
    return out;
}

inline ThreeStageFlows three_stage_from_json(const nlohmann::json& j) {
    ThreeStageFlows fl{spectrum_from_json(jsondetail::field(j, "chi")),
                       spectrum_from_json(jsondetail::field(j, "upsilon")),
                       spectrum_from_json(jsondetail::field(j, "gamma")),
                       spectrum_from_json(jsondetail::field(j, "rho")),
                       {},
                       {},
                       {},
                       jsondetail::as_finite_number(jsondetail::field(j, "d"), "d")};
    fl.f1 = flow_from_json(jsondetail::field(j, "f1"), fl.chi.size(), fl.gamma.size());
    fl.f2 = flow_from_json(jsondetail::field(j, "f2"), fl.gamma.size(), fl.rho.size());
    fl.f3 = flow_from_json(jsondetail::field(j, "f3"), fl.rho.size(), fl.upsilon.size());
    return fl;
}

// --- protocols ---

inline JsonValue protocol_to_json(const ConversionProtocol& p) {
    JsonValue steps = JsonValue::array();
    for (const auto& step : p.steps) {
        JsonValue s = JsonValue::object();
        if (const auto* a = std::get_if<AppendStep>(&step)) {
            s.add("kind", JsonValue::str("append"));
            s.add("owner", JsonValue::str(party_name(a->owner)));
            JsonValue names = JsonValue::array();
            for (const auto& n : a->names) names.push(JsonValue::str(n));
            s.add("names", std::move(names));
            s.add("qubits", JsonValue::integer(a->qubits));
        } else if (const auto* d = std::get_if<DiscardStep>(&step)) {
            s.add("kind", JsonValue::str("discard"));
            s.add("owner", JsonValue::str(party_name(d->owner)));
            JsonValue names = JsonValue::array();
            for (const auto& n : d->names) names.push(JsonValue::str(n));
            s.add("names", std::move(names));
            s.add("qubits", JsonValue::integer(d->qubits));
        } else if (const auto* c = std::get_if<ControlledPrepareStep>(&step)) {
            s.add("kind", JsonValue::str("controlled_prepare"));
            s.add("owner", JsonValue::str(party_name(c->owner)));
            s.add("control", JsonValue::str(c->control));
            JsonValue targets = JsonValue::array();
            targets.push(JsonValue::str(c->targets[0]));
            targets.push(JsonValue::str(c->targets[1]));
            s.add("targets", std::move(targets));
            s.add("qubits", JsonValue::integer(c->qubits));
            s.add("adjoint", JsonValue::boolean(c->adjoint));
            JsonValue table = JsonValue::array();
            for (const auto& row : c->table) {
                JsonValue r = JsonValue::object();
                r.add("control", JsonValue::integer(row.control));
                JsonValue entries = JsonValue::array();
                for (const auto& e : row.entries) {
                    JsonValue en = JsonValue::object();
                    en.add("s", JsonValue::integer(e.s));
                    en.add("num", JsonValue::number(e.num));
                    en.add("den", JsonValue::number(e.den));
                    entries.push(std::move(en));
                }
                r.add("entries", std::move(entries));
                table.push(std::move(r));
            }
            s.add("table", std::move(table));
        } else if (const auto* t = std::get_if<TransmitStep>(&step)) {
            s.add("kind", JsonValue::str("transmit"));
            s.add("name", JsonValue::str(t->name));
            s.add("from", JsonValue::str(party_name(t->from)));
            s.add("to", JsonValue::str(party_name(t->to)));
            s.add("qubits", JsonValue::integer(t->qubits));
        } else if (const auto* r = std::get_if<RelabelStep>(&step)) {
            s.add("kind", JsonValue::str("relabel"));
            auto names = [](const std::vector<std::string>& ns) {
                JsonValue v = JsonValue::array();
                for (const auto& n : ns) v.push(JsonValue::str(n));
                return v;
            };
            auto dims = [](const std::vector<std::int64_t>& ds) {
                JsonValue v = JsonValue::array();
                for (std::int64_t d : ds) v.push(JsonValue::integer(d));
                return v;
            };
            s.add("a_inputs", names(r->a_inputs));
            s.add("a_outputs", names(r->a_outputs));
            s.add("b_inputs", names(r->b_inputs));
            s.add("b_outputs", names(r->b_outputs));
            s.add("in_dims", dims(r->in_dims));
            s.add("out_dims", dims(r->out_dims));
            JsonValue pairs = JsonValue::array();
            for (const auto& pr : r->pairs) {
                JsonValue pv = JsonValue::object();
                pv.add("in", dims(pr.first));
                pv.add("out", dims(pr.second));
                pairs.push(std::move(pv));
            }
            s.add("pairs", std::move(pairs));
        }
        steps.push(std::move(s));
    }
    JsonValue out = JsonValue::object();
    out.add("format", JsonValue::integer(1));
    out.add("source", spectrum_to_json(p.source));
    out.add("target", spectrum_to_json(p.target));
    out.add("declared_cost", JsonValue::integer(p.declared_cost));
    out.add("steps", std::move(steps));
    return out;
}

inline ConversionProtocol protocol_from_json(const nlohmann::json& j) {
    using jsondetail::as_finite_number;
    using jsondetail::as_integer;
    using jsondetail::as_party;
    using jsondetail::field;
    if (as_integer(field(j, "format"), "format") != 1)
        fail(Errc::out_of_domain, "unsupported protocol format");
    ConversionProtocol p{spectrum_from_json(field(j, "source")),
                         spectrum_from_json(field(j, "target")),
                         static_cast<int>(as_integer(field(j, "declared_cost"), "declared_cost")),
                         {}};
    const nlohmann::json& steps = field(j, "steps");
    if (!steps.is_array()) fail(Errc::out_of_domain, "steps must be an array");
    auto name_list = [](const nlohmann::json& v, const char* what) {
        if (!v.is_array()) fail(Errc::out_of_domain, std::string(what) + " must be an array");
        std::vector<std::string> out;
        for (const auto& n : v) {
            if (!n.is_string()) fail(Errc::out_of_domain, std::string(what) + " must hold strings");
            out.push_back(n.get<std::string>());
        }
        return out;
    };
    auto dim_list = [](const nlohmann::json& v, const char* what) {
        if (!v.is_array()) fail(Errc::out_of_domain, std::string(what) + " must be an array");
        std::vector<std::int64_t> out;
        for (const auto& n : v) out.push_back(jsondetail::as_integer(n, what));
        return out;
    };
    for (const auto& s : steps) {
        const nlohmann::json& kindj = field(s, "kind");
        if (!kindj.is_string()) fail(Errc::out_of_domain, "step kind must be a string");
        std::string kind = kindj.get<std::string>();
        if (kind == "append" || kind == "discard") {
            Party owner = as_party(field(s, "owner"));
            std::vector<std::string> names = name_list(field(s, "names"), "names");
            int q = static_cast<int>(as_integer(field(s, "qubits"), "qubits"));
            if (kind == "append")
                p.steps.push_back(AppendStep{owner, std::move(names), q});
            else
                p.steps.push_back(DiscardStep{owner, std::move(names), q});
        } else if (kind == "controlled_prepare") {
            ControlledPrepareStep c{as_party(field(s, "owner")), "", {"", ""},
                                    static_cast<int>(as_integer(field(s, "qubits"), "qubits")),
                                    false,
                                    {}};
            const nlohmann::json& ctrl = field(s, "control");
            if (!ctrl.is_string()) fail(Errc::out_of_domain, "control must be a string");
            c.control = ctrl.get<std::string>();
            std::vector<std::string> targets = name_list(field(s, "targets"), "targets");
            if (targets.size() != 2) fail(Errc::out_of_domain, "prepare needs two targets");
            c.targets = {targets[0], targets[1]};
            const nlohmann::json& adj = field(s, "adjoint");
            if (!adj.is_boolean()) fail(Errc::out_of_domain, "adjoint must be a boolean");
            c.adjoint = adj.get<bool>();
            const nlohmann::json& table = field(s, "table");
            if (!table.is_array()) fail(Errc::out_of_domain, "table must be an array");
            for (const auto& rowj : table) {
                PrepRow row{as_integer(field(rowj, "control"), "row control"), {}};
                const nlohmann::json& entries = field(rowj, "entries");
                if (!entries.is_array()) fail(Errc::out_of_domain, "entries must be an array");
                for (const auto& e : entries)
                    row.entries.push_back({as_integer(field(e, "s"), "s"),
                                           as_finite_number(field(e, "num"), "num"),
                                           as_finite_number(field(e, "den"), "den")});
                c.table.push_back(std::move(row));
            }
            p.steps.push_back(std::move(c));
        } else if (kind == "transmit") {
            const nlohmann::json& namej = field(s, "name");
            if (!namej.is_string()) fail(Errc::out_of_domain, "transmit name must be a string");
            p.steps.push_back(TransmitStep{namej.get<std::string>(), as_party(field(s, "from")),
                                           as_party(field(s, "to")),
                                           static_cast<int>(as_integer(field(s, "qubits"), "qubits"))});
        } else if (kind == "relabel") {
            RelabelStep r{name_list(field(s, "a_inputs"), "a_inputs"),
                          name_list(field(s, "a_outputs"), "a_outputs"),
                          name_list(field(s, "b_inputs"), "b_inputs"),
                          name_list(field(s, "b_outputs"), "b_outputs"),
                          dim_list(field(s, "in_dims"), "in_dims"),
                          dim_list(field(s, "out_dims"), "out_dims"),
                          {}};
            const nlohmann::json& pairs = field(s, "pairs");
            if (!pairs.is_array()) fail(Errc::out_of_domain, "pairs must be an array");
            for (const auto& pr : pairs)
                r.pairs.push_back({dim_list(field(pr, "in"), "pair in"),
                                   dim_list(field(pr, "out"), "pair out")});
            p.steps.push_back(std::move(r));
        } else {
            fail(Errc::out_of_domain, "unknown step kind " + kind);
        }
    }
    return p;
}

// --- states ---

inline JsonValue state_to_json(const BipartiteState& st) {
    JsonValue regs = JsonValue::array();
    for (const auto& r : st.registers) {
        JsonValue rv = JsonValue::object();
        rv.add("name", JsonValue::str(r.name));
        rv.add("dim", JsonValue::integer(r.dim));
        rv.add("owner", JsonValue::str(party_name(r.owner)));
        regs.push(std::move(rv));
    }
    JsonValue amps = JsonValue::array();
    for (const cplx& a : st.amplitudes) {
        JsonValue pair = JsonValue::array();
        pair.push(JsonValue::number(a.real()));
        pair.push(JsonValue::number(a.imag()));
        amps.push(std::move(pair));
    }
    JsonValue out = JsonValue::object();
    out.add("registers", std::move(regs));
    out.add("amplitudes", std::move(amps));
    out.add("comm_cost", JsonValue::number(st.comm_cost));
    out.add("subnormalized", JsonValue::boolean(st.subnormalized));
    return out;
}

inline BipartiteState state_from_json(const nlohmann::json& j) {
    BipartiteState st;
    const nlohmann::json& regs = jsondetail::field(j, "registers");
    if (!regs.is_array()) fail(Errc::out_of_domain, "registers must be an array");
    for (const auto& r : regs) {
        const nlohmann::json& namej = jsondetail::field(r, "name");
        if (!namej.is_string()) fail(Errc::out_of_domain, "register name must be a string");
        st.registers.push_back({namej.get<std::string>(),
                                jsondetail::as_integer(jsondetail::field(r, "dim"), "dim"),
                                jsondetail::as_party(jsondetail::field(r, "owner"))});
    }
    const nlohmann::json& amps = jsondetail::field(j, "amplitudes");
    if (!amps.is_array()) fail(Errc::out_of_domain, "amplitudes must be an array");
    for (const auto& a : amps) {
        if (!a.is_array() || a.size() != 2)
            fail(Errc::out_of_domain, "amplitude must be [re, im]");
        st.amplitudes.push_back({jsondetail::as_finite_number(a.at(0), "re"),
                                 jsondetail::as_finite_number(a.at(1), "im")});
    }
    if (j.contains("comm_cost"))
        st.comm_cost = jsondetail::as_finite_number(j.at("comm_cost"), "comm_cost");
    if (j.contains("subnormalized")) {
        if (!j.at("subnormalized").is_boolean())
            fail(Errc::out_of_domain, "subnormalized must be a boolean");
        st.subnormalized = j.at("subnormalized").get<bool>();
    }
    validate_state(st);
    return st;
}

} // namespace schflow
