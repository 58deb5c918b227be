#pragma once

#include "roughwave/error.hpp"
#include "roughwave/model_core.hpp"
#include "roughwave/profile.hpp"
#include "roughwave/simulator.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <tuple>
#include <vector>

namespace roughwave {

/**
 * One run configuration. Far-field states come either from rho_minus/rho_plus
 * or from fbar together with a case label such as "A1".
 */
struct Scenario {
    Model model = Model::m1;
    double kappa_minus = 2.0;
    double kappa_plus = 1.0;
    std::optional<double> rho_minus;
    std::optional<double> rho_plus;
    std::optional<double> fbar;
    std::string case_label;
    double h = 0.2;
    double dx = 0.005;
    double x_min = -3.0; ///< profile domain
    double x_max = 3.0;
    double sim_x_min = -5.0; ///< simulation domain
    double sim_x_max = 5.2;
    std::vector<double> traces;
    double t_final = 20.0;
    std::vector<double> snapshot_times;
    Scheme scheme = Scheme::upwind;
    double cfl = 0.4;
    std::string kernel = "linear";
    std::string velocity = "lwr";
    std::string output_dir = "out";

    bool operator==(const Scenario&) const = default;
};

/// Shortest decimal text that reads back to the same double.
inline std::string format_double(double x)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double parse_number(std::string_view text, const std::string& key)
{
    text = trim(text);
    double out = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size() || !std::isfinite(out))
        throw Error(Errc::config, "key '" + key + "': expected a number, got '" + std::string(text) + "'", key);
    return out;
}

inline std::vector<double> parse_list(std::string_view text, const std::string& key)
{
    std::vector<double> out;
    text = trim(text);
    if (text.empty())
        return out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = text.find(',', start);
        out.push_back(parse_number(text.substr(start, comma - start), key));
        if (comma == std::string_view::npos)
            break;
        start = comma + 1;
    }
    return out;
}

inline std::string join(const std::vector<double>& xs)
{
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i)
            out += ", ";
        out += format_double(xs[i]);
    }
    return out;
}

[[noreturn]] inline void invalid(const std::string& key, const std::string& what)
{
    throw Error(Errc::config, "key '" + key + "': " + what, key);
}

} // namespace detail

/// Checks the cross-key invariants; each failure names the key to fix.
inline void validate(const Scenario& s)
{
    using detail::invalid;
    if (!(s.kappa_minus > 0.0))
        invalid("kappa_minus", "must be positive");
    if (!(s.kappa_plus > 0.0))
        invalid("kappa_plus", "must be positive");
    if (!(s.h > 0.0))
        invalid("h", "must be positive");
    if (!(s.dx > 0.0))
        invalid("dx", "must be positive");
    const double cells = s.h / s.dx;
    if (std::abs(cells - std::round(cells)) > 1e-9 * cells || std::round(cells) < 1.0)
        invalid("dx", "h/dx = " + format_double(cells) + " is not a positive integer");
    if (!(s.x_min <= -s.h))
        invalid("x_min", "profile domain must contain [-h, h]");
    if (!(s.x_max >= s.h))
        invalid("x_max", "profile domain must contain [-h, h]");
    if (!(s.sim_x_min <= -s.h))
        invalid("sim_x_min", "simulation domain must contain [-h, h]");
    if (!(s.sim_x_max >= s.h))
        invalid("sim_x_max", "simulation domain must contain [-h, h]");
    if (s.rho_minus && !(*s.rho_minus >= 0.0 && *s.rho_minus <= 1.0))
        invalid("rho_minus", "density " + format_double(*s.rho_minus) + " out of range [0,1]");
    if (s.rho_plus && !(*s.rho_plus >= 0.0 && *s.rho_plus <= 1.0))
        invalid("rho_plus", "density " + format_double(*s.rho_plus) + " out of range [0,1]");
    if (s.rho_minus.has_value() != s.rho_plus.has_value())
        invalid(s.rho_minus ? "rho_plus" : "rho_minus", "rho_minus and rho_plus must be given together");
    if (!s.rho_minus) {
        if (!s.fbar)
            invalid("fbar", "needed when rho_minus/rho_plus are absent");
        if (s.case_label.empty())
            invalid("case", "needed when rho_minus/rho_plus are absent");
    }
    if (s.fbar && !(*s.fbar >= 0.0))
        invalid("fbar", "must be nonnegative");
    if (!s.case_label.empty() &&
        (s.case_label.size() != 2 || s.case_label[0] < 'A' || s.case_label[0] > 'D' || s.case_label[1] < '1' ||
         s.case_label[1] > '4'))
        invalid("case", "expected a label A1..D4, got '" + s.case_label + "'");
    for (double t : s.traces)
        if (!(t >= 0.0 && t <= 1.0))
            invalid("traces", "density " + format_double(t) + " out of range [0,1]");
    if (!(s.t_final > 0.0))
        invalid("t_final", "must be positive");
    for (double t : s.snapshot_times)
        if (!(t >= 0.0 && t <= s.t_final))
            invalid("snapshot_times", "time " + format_double(t) + " outside [0, t_final]");
    if (!(s.cfl > 0.0 && s.cfl <= 0.5))
        invalid("cfl", "must lie in (0, 0.5]");
    try {
        (void)VelocityModel::by_name(s.velocity);
        (void)Kernel::by_name(s.kernel, s.h);
    } catch (const Error& e) {
        throw Error(Errc::config, e.what(), e.key());
    }
    if (s.output_dir.empty())
        invalid("output_dir", "must not be empty");
}

/**
 * Parses `key = value` lines. Blank lines and text after '#' are ignored;
 * lists are comma separated. Unset keys keep their defaults.
 */
inline Scenario parse_scenario(std::string_view text)
{
    Scenario s;
    std::set<std::string> seen;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw Error(Errc::config, "line " + std::to_string(line_no) + ": expected 'key = value'");
        const std::string key(detail::trim(line.substr(0, eq)));
        const std::string_view value = detail::trim(line.substr(eq + 1));
        if (!seen.insert(key).second)
            detail::invalid(key, "given twice");
        auto num = [&] { return detail::parse_number(value, key); };
        if (key == "model") {
            if (value != "M1" && value != "M2" && value != "m1" && value != "m2")
                detail::invalid(key, "expected M1 or M2, got '" + std::string(value) + "'");
            s.model = parse_model(value);
        } else if (key == "kappa_minus") {
            s.kappa_minus = num();
        } else if (key == "kappa_plus") {
            s.kappa_plus = num();
        } else if (key == "rho_minus") {
            s.rho_minus = num();
        } else if (key == "rho_plus") {
            s.rho_plus = num();
        } else if (key == "fbar") {
            s.fbar = num();
        } else if (key == "case") {
            s.case_label = std::string(value);
        } else if (key == "h") {
            s.h = num();
        } else if (key == "dx") {
            s.dx = num();
        } else if (key == "x_min") {
            s.x_min = num();
        } else if (key == "x_max") {
            s.x_max = num();
        } else if (key == "sim_x_min") {
            s.sim_x_min = num();
        } else if (key == "sim_x_max") {
            s.sim_x_max = num();
        } else if (key == "traces") {
            s.traces = detail::parse_list(value, key);
        } else if (key == "t_final") {
            s.t_final = num();
        } else if (key == "snapshot_times") {
            s.snapshot_times = detail::parse_list(value, key);
        } else if (key == "scheme") {
            try {
                s.scheme = parse_scheme(value);
            } catch (const Error& e) {
                detail::invalid(key, e.what());
            }
        } else if (key == "cfl") {
            s.cfl = num();
        } else if (key == "kernel") {
            s.kernel = std::string(value);
        } else if (key == "velocity") {
            s.velocity = std::string(value);
        } else if (key == "output_dir") {
            s.output_dir = std::string(value);
        } else {
            throw Error(Errc::config, "unknown key '" + key + "'", key);
        }
    }
    validate(s);
    return s;
}

/// Writes every key, so the text documents the run completely.
inline std::string serialize(const Scenario& s)
{
    std::ostringstream out;
    out << "model = " << to_string(s.model) << '\n';
    out << "kappa_minus = " << format_double(s.kappa_minus) << '\n';
    out << "kappa_plus = " << format_double(s.kappa_plus) << '\n';
    if (s.rho_minus)
        out << "rho_minus = " << format_double(*s.rho_minus) << '\n';
    if (s.rho_plus)
        out << "rho_plus = " << format_double(*s.rho_plus) << '\n';
    if (s.fbar)
        out << "fbar = " << format_double(*s.fbar) << '\n';
    if (!s.case_label.empty())
        out << "case = " << s.case_label << '\n';
    out << "h = " << format_double(s.h) << '\n';
    out << "dx = " << format_double(s.dx) << '\n';
    out << "x_min = " << format_double(s.x_min) << '\n';
    out << "x_max = " << format_double(s.x_max) << '\n';
    out << "sim_x_min = " << format_double(s.sim_x_min) << '\n';
    out << "sim_x_max = " << format_double(s.sim_x_max) << '\n';
    out << "traces = " << detail::join(s.traces) << '\n';
    out << "t_final = " << format_double(s.t_final) << '\n';
    out << "snapshot_times = " << detail::join(s.snapshot_times) << '\n';
    out << "scheme = " << to_string(s.scheme) << '\n';
    out << "cfl = " << format_double(s.cfl) << '\n';
    out << "kernel = " << s.kernel << '\n';
    out << "velocity = " << s.velocity << '\n';
    out << "output_dir = " << s.output_dir << '\n';
    return out.str();
}

/// Model objects and far-field states of a validated scenario.
struct ResolvedScenario {
    CaseInputs inputs;
    SimGrid sim_grid;
};

inline ResolvedScenario resolve(const Scenario& s)
{
    validate(s);
    ResolvedScenario r;
    CaseInputs& in = r.inputs;
    in.model = s.model;
    in.cond = RoadCondition(s.kappa_minus, s.kappa_plus);
    in.v = VelocityModel::by_name(s.velocity);
    in.kernel = Kernel::by_name(s.kernel, s.h);
    in.dx = s.dx;
    in.x_min = s.x_min;
    in.x_max = s.x_max;
    if (s.rho_minus) {
        in.rho_minus = *s.rho_minus;
        in.rho_plus = *s.rho_plus;
    } else {
        std::tie(in.rho_minus, in.rho_plus) = densities_for_case(s.case_label, *s.fbar, in.cond, in.v, s.model);
    }
    r.sim_grid.x_min = s.sim_x_min;
    r.sim_grid.x_max = s.sim_x_max;
    r.sim_grid.dx = s.dx;
    r.sim_grid.scheme = s.scheme;
    r.sim_grid.cfl = s.cfl;
    return r;
}

} // namespace roughwave
