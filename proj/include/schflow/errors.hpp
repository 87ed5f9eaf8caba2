#pragma once

#include <stdexcept>
#include <string>

namespace schflow {

// Every failure the library can signal, in one enum so the CLI can map
// conditions to exit codes without string matching.
enum class Errc {
    all_zero,
    negative_entry,
    not_normalized,
    eps_out_of_range,
    out_of_domain,
    index_out_of_range,
    invalid_flow,
    shape_mismatch,
    non_unitary_step,
    discard_nonzero,
    too_large,
    parse,
};

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& msg) : std::runtime_error(msg), code_(code) {}

    Errc code() const noexcept { return code_; }

    // CLI contract: 2 = unparseable input, 3 = well-formed but invalid, 4 = resource cap.
    int exit_code() const noexcept {
        switch (code_) {
        case Errc::parse: return 2;
        case Errc::too_large: return 4;
        default: return 3;
        }
    }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) { throw Error(code, msg); }

} // namespace schflow
