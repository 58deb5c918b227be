#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace roughwave {

/// Failure categories shared by every module. The CLI maps them to exit codes.
enum class Errc {
    domain,
    precondition,
    convergence,
    out_of_range,
    constraint_violation,
    ambiguity,
    window_out_of_range,
    blowup,
    seed_collapse,
    non_monotone,
    inadmissible_trace,
    no_profile,
    degenerate,
    cfl_violation,
    state_out_of_range,
    config,
    missing_file,
    io,
};

constexpr std::string_view to_string(Errc code) noexcept
{
    switch (code) {
    case Errc::domain: return "domain";
    case Errc::precondition: return "precondition";
    case Errc::convergence: return "convergence";
    case Errc::out_of_range: return "out_of_range";
    case Errc::constraint_violation: return "constraint_violation";
    case Errc::ambiguity: return "ambiguity";
    case Errc::window_out_of_range: return "window_out_of_range";
    case Errc::blowup: return "blowup";
    case Errc::seed_collapse: return "seed_collapse";
    case Errc::non_monotone: return "non_monotone";
    case Errc::inadmissible_trace: return "inadmissible_trace";
    case Errc::no_profile: return "no_profile";
    case Errc::degenerate: return "degenerate";
    case Errc::cfl_violation: return "cfl_violation";
    case Errc::state_out_of_range: return "state_out_of_range";
    case Errc::config: return "config";
    case Errc::missing_file: return "missing_file";
    case Errc::io: return "io";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message, std::string key = {})
        : std::runtime_error(message), code_(code), key_(std::move(key))
    {
    }

    Errc code() const noexcept { return code_; }

    /// Offending configuration key, empty for non-configuration failures.
    const std::string& key() const noexcept { return key_; }

private:
    Errc code_;
    std::string key_;
};

} // namespace roughwave
