#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "schflow/io.hpp"
#include "schflow/sampling.hpp"
#include "schflow/suites.hpp"
#include "schflow/transport.hpp"
#include "schflow/universality.hpp"
#include "schflow/version.hpp"

namespace {

struct GlobalOpts {
    std::string format = "text";
    std::string out;
    std::uint64_t seed = schflow::default_seed;
};

void emit(const GlobalOpts& g, const std::string& text_report, const schflow::JsonValue& json_report) {
    const std::string body = g.format == "json" ? json_report.dump() : text_report;
    if (g.out.empty())
        std::cout << body;
    else
        schflow::write_text_file(g.out, body);
}

int cmd_distance(const GlobalOpts& g, const std::string& path_a, const std::string& path_b,
                 std::optional<double> smooth, const std::string& witness_path) {
    schflow::SchmidtSpectrum a = schflow::load_spectrum(path_a);
    schflow::SchmidtSpectrum b = schflow::load_spectrum(path_b);

    schflow::EmdResult r = schflow::emd_linf(a, b);
    std::optional<double> smoothed;
    if (smooth) smoothed = schflow::smoothed_emd(a, b, *smooth);
    if (!witness_path.empty())
        schflow::write_text_file(witness_path,
                                 schflow::plan_to_json(r.witness, r.distance).dump());

    std::string text = "emd: " + schflow::format_double17(r.distance) + "\n";
    if (smoothed)
        text += "smoothed(eps=" + schflow::format_double17(*smooth) +
                "): " + schflow::format_double17(*smoothed) + "\n";

    schflow::JsonValue j = schflow::JsonValue::object();
    j.add("command", schflow::JsonValue::str("distance"));
    j.add("version", schflow::JsonValue::str(schflow::library_version));
    j.add("emd", schflow::JsonValue::number(r.distance));
    if (smooth) {
        j.add("smoothing", schflow::JsonValue::number(*smooth));
        j.add("smoothed", schflow::JsonValue::number(*smoothed));
    }
    emit(g, text, j);
    return 0;
}

int cmd_convert(const GlobalOpts& g, const std::string& path_src, const std::string& path_dst,
                const std::string& protocol_path, bool skip_replay) {
    schflow::SchmidtSpectrum src = schflow::load_spectrum(path_src);
    schflow::SchmidtSpectrum dst = schflow::load_spectrum(path_dst);

    double d = schflow::emd_linf_quantile(src, dst);
    int budget = 4 * schflow::ceil_distance(d) + 8;
    schflow::ConversionProtocol p = schflow::conversion_protocol(src, dst);
    if (!protocol_path.empty())
        schflow::write_text_file(protocol_path, schflow::protocol_to_json(p).dump());

    std::optional<double> fid, rev_fid;
    if (!skip_replay) {
        schflow::BipartiteState out =
            schflow::run_protocol(schflow::make_canonical_state(src), p);
        fid = schflow::fidelity(out, schflow::make_canonical_state(dst));
        schflow::BipartiteState back = schflow::run_protocol(
            schflow::make_canonical_state(dst), schflow::reverse_protocol(p));
        rev_fid = schflow::fidelity(back, schflow::make_canonical_state(src));
    }

    std::string text;
    text += "distance: " + schflow::format_double17(d) + "\n";
    text += "cost: " + std::to_string(p.declared_cost) + "\n";
    text += "budget: 4*ceil(d)+8 = " + std::to_string(budget) + "\n";
    if (fid) text += "fidelity: " + schflow::format_double17(*fid) + "\n";
    if (rev_fid) text += "reverse_fidelity: " + schflow::format_double17(*rev_fid) + "\n";

    schflow::JsonValue j = schflow::JsonValue::object();
    j.add("command", schflow::JsonValue::str("convert"));
    j.add("version", schflow::JsonValue::str(schflow::library_version));
    j.add("distance", schflow::JsonValue::number(d));
    j.add("cost", schflow::JsonValue::integer(p.declared_cost));
    j.add("budget_formula", schflow::JsonValue::str("4*ceil(d)+8"));
    j.add("budget", schflow::JsonValue::integer(budget));
    if (fid) j.add("fidelity", schflow::JsonValue::number(*fid));
    if (rev_fid) j.add("reverse_fidelity", schflow::JsonValue::number(*rev_fid));
    emit(g, text, j);
    return 0;
}

int cmd_verify(const GlobalOpts& g, std::vector<std::string> names, const schflow::SuiteConfig& cfg) {
    if (names.empty()) names = schflow::all_suite_names();
    std::vector<schflow::SuiteResult> results = schflow::run_suites(names, cfg);

    bool ok = true;
    std::string text;
    for (const auto& r : results) {
        ok = ok && r.ok();
        text += "suite " + r.name + ": " + std::to_string(r.passed) + "/" +
                std::to_string(r.cases) + (r.ok() ? " ok" : " FAIL") + "\n";
        for (const auto& f : r.failures) text += "  " + f + "\n";
    }
    text += ok ? "all suites passed\n" : "some suites failed\n";

    schflow::JsonValue j = schflow::JsonValue::object();
    j.add("command", schflow::JsonValue::str("verify"));
    j.add("version", schflow::JsonValue::str(schflow::library_version));
    j.add("seed", schflow::JsonValue::integer(static_cast<std::int64_t>(cfg.seed)));
    j.add("cases", schflow::JsonValue::integer(cfg.cases));
    j.add("eps", schflow::JsonValue::number(cfg.eps));
    j.add("grouping", schflow::JsonValue::integer(cfg.grouping));
    j.add("block_width", cfg.block_width ? schflow::JsonValue::integer(*cfg.block_width)
                                         : schflow::JsonValue());
    schflow::JsonValue formulas = schflow::JsonValue::object();
    formulas.add("lower_bound", schflow::JsonValue::str(schflow::lower_bound_formula));
    formulas.add("lower_bound_alt", schflow::JsonValue::str(schflow::lower_bound_alt_formula));
    j.add("formulas", std::move(formulas));
    schflow::JsonValue arr = schflow::JsonValue::array();
    for (const auto& r : results) {
        schflow::JsonValue rv = schflow::JsonValue::object();
        rv.add("name", schflow::JsonValue::str(r.name));
        rv.add("cases", schflow::JsonValue::integer(r.cases));
        rv.add("passed", schflow::JsonValue::integer(r.passed));
        rv.add("failed", schflow::JsonValue::integer(r.failed));
        schflow::JsonValue msgs = schflow::JsonValue::array();
        for (const auto& f : r.failures) msgs.push(schflow::JsonValue::str(f));
        rv.add("failures", std::move(msgs));
        arr.push(std::move(rv));
    }
    j.add("suites", std::move(arr));
    j.add("ok", schflow::JsonValue::boolean(ok));
    emit(g, text, j);
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Schmidt spectrum transport distances, conversion protocols, and checks"};
    app.require_subcommand(1);
    app.fallthrough(); // global flags may appear after the subcommand

    GlobalOpts g;
    app.add_option("--format", g.format, "Report format")
        ->check(CLI::IsMember({"text", "json"}))
        ->envname("SCHFLOW_FORMAT");
    app.add_option("--out", g.out, "Write the report to this path instead of stdout")
        ->envname("SCHFLOW_OUT");
    app.add_option("--seed", g.seed, "Base seed for randomized commands")
        ->envname("SCHFLOW_SEED");

    std::string path_a, path_b, witness_path, protocol_path;
    std::optional<double> smooth;
    CLI::App* dist = app.add_subcommand("distance", "Transport distance between two spectra");
    dist->add_option("a", path_a, "Source spectrum JSON")->required();
    dist->add_option("b", path_b, "Target spectrum JSON")->required();
    dist->add_option("--smooth", smooth, "Also report the smoothed distance at this epsilon")
        ->envname("SCHFLOW_SMOOTH");
    dist->add_option("--witness", witness_path, "Write the optimal coupling to this path");

    std::string conv_src, conv_dst;
    bool skip_replay = false;
    CLI::App* conv = app.add_subcommand("convert", "Synthesize and replay a conversion protocol");
    conv->add_option("source", conv_src, "Source spectrum JSON")->required();
    conv->add_option("target", conv_dst, "Target spectrum JSON")->required();
    conv->add_option("--protocol", protocol_path, "Write the protocol to this path");
    conv->add_flag("--no-replay", skip_replay, "Skip the simulator replay");

    schflow::SuiteConfig cfg;
    std::vector<std::string> suite_names;
    CLI::App* verify = app.add_subcommand("verify", "Run the randomized property suites");
    verify->add_option("--suite", suite_names, "Suite name (repeatable; default all)")
        ->check(CLI::IsMember(schflow::all_suite_names()));
    verify->add_option("--cases", cfg.cases, "Cases per suite")->envname("SCHFLOW_CASES");
    verify->add_option("--eps,--smooth", cfg.eps, "Smoothing parameter for the bound suites")
        ->envname("SCHFLOW_EPS");
    verify->add_option("--grouping", cfg.grouping, "Grouping width N")
        ->envname("SCHFLOW_GROUPING");
    verify->add_option("--block-width", cfg.block_width, "Override the block width B")
        ->envname("SCHFLOW_BLOCK_WIDTH");
    verify->add_option("--jobs", cfg.jobs, "Worker threads across test cases")
        ->envname("SCHFLOW_JOBS");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (dist->parsed()) return cmd_distance(g, path_a, path_b, smooth, witness_path);
        if (conv->parsed()) return cmd_convert(g, conv_src, conv_dst, protocol_path, skip_replay);
        cfg.seed = g.seed;
        return cmd_verify(g, suite_names, cfg);
    } catch (const schflow::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
