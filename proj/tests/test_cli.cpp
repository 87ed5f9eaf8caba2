#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "schflow/io.hpp"
#include "schflow/spectrum.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code;
    std::string out;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const fs::path& work_dir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "schflow_cli_test";
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

// Runs the binary under test; the harness passes its location in SCHFLOW_BIN.
RunResult run_cli(const std::string& args, const std::string& env_prefix = "") {
    const char* bin = std::getenv("SCHFLOW_BIN");
    REQUIRE(bin != nullptr);
    fs::path out = work_dir() / "stdout.txt";
    std::string cmd = env_prefix + "\"" + bin + "\" " + args + " > \"" + out.string() +
                      "\" 2> /dev/null";
    int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    return {WEXITSTATUS(rc), slurp(out)};
}

fs::path fixture(const std::string& name, const std::vector<double>& coeffs) {
    fs::path p = work_dir() / name;
    schflow::write_text_file(
        p.string(), schflow::spectrum_to_json(schflow::normalize_spectrum(coeffs)).dump());
    return p;
}

} // namespace

TEST_CASE("distance of a spectrum with itself prints zero") {
    fs::path one = fixture("one.json", {1.0});
    RunResult r = run_cli("distance " + one.string() + " " + one.string());
    CHECK(r.exit_code == 0);
    CHECK(r.out == "emd: 0\n");
}

TEST_CASE("distance reports plain and smoothed values") {
    fs::path one = fixture("one.json", {1.0});
    fs::path tail = fixture("tail.json", {0.9, 0.025, 0.025, 0.025, 0.025});
    RunResult r = run_cli("distance " + one.string() + " " + tail.string() + " --smooth 0.1");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("emd: 5.3219280948873626") != std::string::npos);
    CHECK(r.out.find("smoothed") != std::string::npos);
    CHECK(r.out.find("0.152") != std::string::npos);
}

TEST_CASE("distance writes a loadable witness plan") {
    fs::path epr = fixture("epr.json", {0.5, 0.5});
    fs::path quad = fixture("quad.json", {0.25, 0.25, 0.25, 0.25});
    fs::path witness = work_dir() / "witness.json";
    RunResult r = run_cli("distance " + epr.string() + " " + quad.string() + " --witness " +
                          witness.string());
    CHECK(r.exit_code == 0);

    nlohmann::json j = schflow::parse_json_file(witness.string());
    schflow::TransportPlan plan = schflow::plan_from_json(
        j, schflow::normalize_spectrum({0.5, 0.5}),
        schflow::normalize_spectrum({0.25, 0.25, 0.25, 0.25}));
    CHECK(plan.entries.size() == 4);
    CHECK(j.at("distance").get<double>() == 1.0);
}

TEST_CASE("exit codes follow the contract") {
    fs::path one = fixture("one.json", {1.0});
    fs::path bad = work_dir() / "bad.json";
    schflow::write_text_file(bad.string(), "{nope");
    fs::path unnorm = work_dir() / "unnorm.json";
    schflow::write_text_file(unnorm.string(), "{\"coefficients\": [0.5, 0.2]}");

    CHECK(run_cli("distance " + bad.string() + " " + one.string()).exit_code == 2);
    CHECK(run_cli("distance " + work_dir().string() + "/missing.json " + one.string()).exit_code ==
          2);
    CHECK(run_cli("distance " + unnorm.string() + " " + one.string()).exit_code == 3);
    CHECK(run_cli("bogus-subcommand").exit_code == 2);

    double x = std::ldexp(1.0, -22);
    fs::path deep = fixture("deep.json", {1.0 - x, x});
    CHECK(run_cli("convert " + one.string() + " " + deep.string()).exit_code == 4);
}

TEST_CASE("convert reports cost within budget and writes the protocol") {
    fs::path one = fixture("one.json", {1.0});
    fs::path epr = fixture("epr.json", {0.5, 0.5});
    fs::path proto = work_dir() / "proto.json";
    RunResult r = run_cli("convert " + one.string() + " " + epr.string() + " --protocol " +
                          proto.string() + " --format json");
    CHECK(r.exit_code == 0);

    nlohmann::json report = schflow::parse_json(r.out, "report");
    CHECK(report.at("cost").get<int>() <= 12);
    CHECK(report.at("budget").get<int>() == 12);
    CHECK(report.at("fidelity").get<double>() >= 1.0 - 1e-9);
    CHECK(report.at("reverse_fidelity").get<double>() >= 1.0 - 1e-9);
    CHECK(report.at("budget_formula").get<std::string>() == "4*ceil(d)+8");

    schflow::ConversionProtocol p =
        schflow::protocol_from_json(schflow::parse_json_file(proto.string()));
    CHECK(schflow::protocol_cost(p) == p.declared_cost);
}

TEST_CASE("convert of equal spectra stays under the flat budget") {
    fs::path epr = fixture("epr.json", {0.5, 0.5});
    RunResult r = run_cli("convert " + epr.string() + " " + epr.string() + " --format json");
    CHECK(r.exit_code == 0);
    nlohmann::json report = schflow::parse_json(r.out, "report");
    CHECK(report.at("cost").get<int>() <= 8);
}

TEST_CASE("verify emits byte-identical reports for identical configs") {
    std::string args = "verify --suite fact9 --suite grouping --cases 20 --format json";
    RunResult a = run_cli(args);
    RunResult b = run_cli(args + " --jobs 3");
    CHECK(a.exit_code == 0);
    CHECK(b.exit_code == 0);
    CHECK(a.out == b.out);
    CHECK(a.out.find("\"ok\": true") != std::string::npos);

    RunResult c = run_cli("verify --suite fact9 --cases 20 --seed 99 --format json");
    CHECK(c.exit_code == 0);
    CHECK(c.out.find("\"seed\": 99") != std::string::npos);
}

TEST_CASE("environment variables configure the run when flags are absent") {
    fs::path one = fixture("one.json", {1.0});
    RunResult r = run_cli("distance " + one.string() + " " + one.string(),
                          "SCHFLOW_FORMAT=json ");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("\"emd\": 0") != std::string::npos);

    // The explicit flag wins over the environment.
    RunResult t = run_cli("distance " + one.string() + " " + one.string() + " --format text",
                          "SCHFLOW_FORMAT=json ");
    CHECK(t.exit_code == 0);
    CHECK(t.out == "emd: 0\n");
}

TEST_CASE("reports can be redirected to a file") {
    fs::path one = fixture("one.json", {1.0});
    fs::path report = work_dir() / "report.json";
    RunResult r = run_cli("distance " + one.string() + " " + one.string() + " --format json --out " +
                          report.string());
    CHECK(r.exit_code == 0);
    CHECK(r.out.empty());
    nlohmann::json j = schflow::parse_json_file(report.string());
    CHECK(j.at("emd").get<double>() == 0.0);
}
