// Emits random spectrum files for benchmarks and fixtures.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "schflow/io.hpp"
#include "schflow/sampling.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Random Schmidt spectrum generator"};

    std::size_t atoms = 6;
    std::string style = "generic";
    std::uint64_t seed = schflow::default_seed;
    double scale = 8.0;
    std::string out;
    app.add_option("--atoms", atoms, "Maximum atom count");
    app.add_option("--style", style, "Weight profile")
        ->check(CLI::IsMember({"generic", "dyadic", "wide", "mixed"}));
    app.add_option("--seed", seed, "Seed");
    app.add_option("--scale", scale, "Octave range for the wide profile");
    app.add_option("--out", out, "Output path (default stdout)");
    CLI11_PARSE(app, argc, argv);

    schflow::Rng rng(seed);
    schflow::SchmidtSpectrum s;
    if (style == "mixed")
        s = schflow::random_spectrum_mixed(rng, atoms, scale);
    else
        s = schflow::random_spectrum(rng, atoms,
                                     style == "generic"  ? schflow::SpectrumStyle::generic
                                     : style == "dyadic" ? schflow::SpectrumStyle::dyadic
                                                         : schflow::SpectrumStyle::wide,
                                     scale);

    std::string body = schflow::spectrum_to_json(s).dump();
    if (out.empty())
        std::cout << body;
    else
        schflow::write_text_file(out, body);
    return 0;
}
