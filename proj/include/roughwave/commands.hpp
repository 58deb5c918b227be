#pragma once

#include "roughwave/csv.hpp"
#include "roughwave/error.hpp"
#include "roughwave/model_core.hpp"
#include "roughwave/parallel.hpp"
#include "roughwave/plot_script.hpp"
#include "roughwave/profile.hpp"
#include "roughwave/profile_m1.hpp"
#include "roughwave/profile_m2.hpp"
#include "roughwave/scenario.hpp"
#include "roughwave/simulator.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace roughwave {

namespace fs = std::filesystem;

/// Overrides and switches shared by every command.
struct CommandOptions {
    std::optional<std::string> out_dir;
    std::optional<double> dx;
    bool quiet = false;
    std::size_t workers = 0; ///< 0 = ROUGHWAVE_WORKERS or hardware concurrency
};

/// Applies command-line overrides and revalidates.
inline Scenario apply_overrides(Scenario s, const CommandOptions& opt)
{
    if (opt.out_dir)
        s.output_dir = *opt.out_dir;
    if (opt.dx)
        s.dx = *opt.dx;
    validate(s);
    return s;
}

enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_numerical = 3 };

inline int exit_code_for(Errc code) noexcept
{
    return code == Errc::config || code == Errc::missing_file ? exit_config : exit_numerical;
}

/// Single-line, machine-readable failure record for stderr.
inline std::string error_line(const Error& e)
{
    nlohmann::json j;
    j["code"] = std::string(to_string(e.code()));
    j["message"] = e.what();
    if (!e.key().empty())
        j["key"] = e.key();
    return "error " + j.dump();
}

namespace detail {

inline std::string tag_line(const CaseTag& tag)
{
    return tag.label + " | " + std::string(to_string(tag.multiplicity)) + " | " + (tag.stable ? "stable" : "unstable");
}

/// "increasing", "decreasing", "constant" or "mixed" over nodes [from, to).
inline std::string monotonicity(const std::vector<double>& v, std::size_t from, std::size_t to)
{
    bool up = true;
    bool down = true;
    for (std::size_t i = from + 1; i < to; ++i) {
        up = up && v[i] >= v[i - 1];
        down = down && v[i] <= v[i - 1];
    }
    if (up && down)
        return "constant";
    return up ? "increasing" : (down ? "decreasing" : "mixed");
}

/// Monotonicity left and right of x = 0 (the zero node belongs to the right side).
inline std::pair<std::string, std::string> side_monotonicity(const Profile& p)
{
    const auto& v = p.grid.values;
    const auto z = p.grid.zero_index();
    const std::size_t split = z ? static_cast<std::size_t>(*z) : v.size();
    std::vector<double> left(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(split));
    if (z)
        left.push_back(p.grid.left_trace_at_zero ? *p.grid.left_trace_at_zero : v[split]);
    return {monotonicity(left, 0, left.size()), monotonicity(v, split, v.size())};
}

inline std::string number_label(std::size_t k, std::size_t width = 2)
{
    std::string s = std::to_string(k);
    return std::string(width > s.size() ? width - s.size() : 0, '0') + s;
}

inline std::uint64_t fnv1a(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(Errc::missing_file, "cannot open " + path.string());
    std::uint64_t h = 1469598103934665603ull;
    std::array<char, 1 << 14> buf{};
    while (in) {
        in.read(buf.data(), buf.size());
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[static_cast<std::size_t>(i)]);
            h *= 1099511628211ull;
        }
    }
    return h;
}

inline std::string hex(std::uint64_t h)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace detail

/// Evenly spread traces over the part of the admissible range where profiles exist.
inline std::vector<double> default_family_traces(const CaseInputs& in, std::size_t n = 5,
                                                 const SolverParams& params = {})
{
    const TraceRange range = admissible_traces(in);
    const double top = in.model == Model::m1 ? family_upper_limit(in, params) : family_upper_limit_m2(in, params);
    std::vector<double> out;
    for (std::size_t k = 0; k < n; ++k) {
        const double f = range.lo_open ? static_cast<double>(k + 1) / static_cast<double>(n)
                                       : (n == 1 ? 1.0 : static_cast<double>(k) / static_cast<double>(n - 1));
        out.push_back(k + 1 == n ? top : range.lo + (top - range.lo) * f);
    }
    return out;
}

/// Builds the profiles a case admits: the family at `traces`, or the unique profile. Throws no_profile otherwise.
inline FamilyResult case_profiles(const CaseInputs& in, std::vector<double> traces, const SolverParams& params = {})
{
    const CaseTag tag = in.tag();
    if (tag.multiplicity == Multiplicity::none)
        throw Error(Errc::no_profile, "no stationary profile exists for case " + tag.label);
    if (tag.multiplicity == Multiplicity::unique) {
        if (tag.digit() != 2)
            throw Error(Errc::precondition, "case " + tag.label + " has no computable profile");
        FamilyResult out;
        out.profiles.push_back(in.model == Model::m1 ? build_unique_profile(in, params)
                                                     : build_unique_profile_m2(in, params));
        return out;
    }
    if (traces.empty())
        traces = default_family_traces(in, 5, params);
    return in.model == Model::m1 ? build_profile_family(in, traces, params)
                                 : build_profile_family_m2(in, traces, params);
}

/// Profile CSVs plus a plot script; returns the written CSV paths.
inline std::vector<fs::path> write_profiles(const fs::path& dir, const std::vector<Profile>& profiles,
                                            const CaseInputs& in, const std::string& title)
{
    std::vector<fs::path> paths;
    for (std::size_t k = 0; k < profiles.size(); ++k) {
        const Profile& p = profiles[k];
        const fs::path path =
            dir / (profiles.size() == 1 ? std::string("profile.csv") : "profile_" + detail::number_label(k) + ".csv");
        std::optional<KinkReport> kink;
        if (p.model == Model::m2) {
            try {
                kink = kink_certificate(p, in.cond, in.v, in.kernel);
            } catch (const Error& e) {
                if (e.code() != Errc::degenerate)
                    throw;
            }
        }
        write_file(path, [&](std::ostream& out) { write_profile_csv(out, p, kink); });
        paths.push_back(path);
    }
    if (!paths.empty())
        emit_plot_script(paths, PlotStyle::profiles, dir / "profiles.gp", title);
    return paths;
}

inline std::string profile_report(const CaseTag& tag, const FamilyResult& f)
{
    std::ostringstream out;
    out << "case: " << tag.label << '\n';
    out << "profiles: " << f.profiles.size() << '\n';
    for (const Profile& p : f.profiles)
        out << "trace_plus=" << format_double(p.trace_plus) << " trace_minus=" << format_double(p.trace_minus)
            << " residual=" << format_double(p.residual_sup) << " tolerance=" << format_double(p.residual_tolerance)
            << " left=" << detail::side_monotonicity(p).first << " right=" << detail::side_monotonicity(p).second
            << '\n';
    for (const FamilyFailure& e : f.failures)
        out << "failed trace=" << format_double(e.trace) << " code=" << to_string(e.code) << " message=" << e.message
            << '\n';
    if (f.profiles.size() > 1)
        out << "non-crossing: " << (family_min_gap(f.profiles) > 0.0 ? "true" : "false") << '\n';
    return out.str();
}

// ---------------------------------------------------------------------------

inline void cmd_classify(const Scenario& s, std::ostream& out)
{
    const ResolvedScenario r = resolve(s);
    const CaseInputs& in = r.inputs;
    const CaseTag tag = in.tag();
    out << detail::tag_line(tag) << '\n';
    const FluxLevelSet levels = solve_flux_level(in.fbar(), in.cond, in.v);
    out << "fbar=" << format_double(levels.fbar) << " rho1=" << format_double(levels.rho1)
        << " rho2=" << format_double(levels.rho2) << " rho3=" << format_double(levels.rho3)
        << " rho4=" << format_double(levels.rho4) << '\n';
}

inline void cmd_profile(const Scenario& s, const CommandOptions& opt, std::ostream& out)
{
    const ResolvedScenario r = resolve(s);
    const CaseInputs& in = r.inputs;
    SolverParams params;
    params.workers = opt.workers;
    std::vector<double> traces = s.traces;
    if (traces.size() > 1)
        traces.resize(1);
    if (traces.empty() && in.tag().multiplicity == Multiplicity::infinite)
        traces = {default_family_traces(in, 5, params).back()};
    FamilyResult f = case_profiles(in, traces, params);
    if (f.profiles.empty())
        throw Error(f.failures.front().code, f.failures.front().message);
    fs::create_directories(s.output_dir);
    write_profiles(s.output_dir, f.profiles, in, in.tag().label + " profile");
    const std::string report = profile_report(in.tag(), f);
    write_text(fs::path(s.output_dir) / "report.txt", report);
    if (!opt.quiet)
        out << report;
}

inline void cmd_family(const Scenario& s, const CommandOptions& opt, std::ostream& out)
{
    const ResolvedScenario r = resolve(s);
    const CaseInputs& in = r.inputs;
    SolverParams params;
    params.workers = opt.workers;
    const FamilyResult f = case_profiles(in, s.traces, params);
    fs::create_directories(s.output_dir);
    write_profiles(s.output_dir, f.profiles, in, in.tag().label + " profiles");
    const std::string report = profile_report(in.tag(), f);
    write_text(fs::path(s.output_dir) / "report.txt", report);
    if (!opt.quiet)
        out << report;
    if (f.profiles.empty())
        throw Error(f.failures.front().code, f.failures.front().message);
}

/// Snapshot CSVs, plot script and diagnostics of a Riemann run; returns the diagnostics.
inline nlohmann::json run_simulation(const Scenario& s, const fs::path& dir, std::size_t sim_workers,
                                     std::vector<fs::path>* written = nullptr)
{
    const ResolvedScenario r = resolve(s);
    const CaseInputs& in = r.inputs;
    const Simulator sim(in.model, in.cond, in.v, in.kernel, s.dx, sim_workers == 0 ? 1 : sim_workers);
    std::vector<double> times = s.snapshot_times;
    if (times.empty())
        times = {0.0, s.t_final};
    double worst_balance = 0.0;
    std::size_t limited = 0;
    std::size_t steps = 0;
    double lo = 1.0;
    double hi = 0.0;
    const auto snaps = sim.run(riemann_initial(in.rho_minus, in.rho_plus, r.sim_grid), s.t_final, times,
                               [&](const SimState& st, const StepReport& rep) {
                                   worst_balance = std::max(worst_balance, rep.balance_error);
                                   limited += rep.limited_interfaces;
                                   ++steps;
                                   const auto [a, b] = std::minmax_element(st.cells.begin(), st.cells.end());
                                   lo = std::min(lo, *a);
                                   hi = std::max(hi, *b);
                               });

    fs::create_directories(dir);
    std::vector<fs::path> paths;
    nlohmann::json snaps_json = nlohmann::json::array();
    for (std::size_t k = 0; k < snaps.size(); ++k) {
        const fs::path path = dir / ("snapshot_" + detail::number_label(k, 3) + ".csv");
        write_file(path, [&](std::ostream& o) { write_snapshot_csv(o, snaps[k]); });
        paths.push_back(path);
        snaps_json.push_back({{"file", path.filename().string()}, {"t", snaps[k].t}});
    }
    emit_plot_script(paths, PlotStyle::snapshots, dir / "snapshots.gp", in.tag().label + " Riemann run");

    nlohmann::json diag;
    diag["steps"] = steps;
    diag["max_mass_balance_error"] = worst_balance;
    diag["limited_interfaces"] = limited;
    diag["min_density"] = lo;
    diag["max_density"] = hi;
    const std::vector<double> persist = persistence_metric(snaps, ConstantPair{in.rho_minus, in.rho_plus});
    diag["persistence_vs_constant_pair"] = persist;
    if (in.tag().multiplicity == Multiplicity::infinite) {
        // Track convergence against the scheme's own stationary states.
        const TraceRange range = admissible_traces(in);
        std::vector<double> traces;
        for (int k = 0; k <= 40; ++k) {
            const double t = range.lo + (range.hi - range.lo) * k / 40.0;
            if (range.contains(t))
                traces.push_back(t);
        }
        SolverParams params;
        params.workers = 1;
        const FamilyResult fam = scheme_stationary_family(in, r.sim_grid, traces, params);
        if (!fam.profiles.empty()) {
            nlohmann::json spread = nlohmann::json::array();
            nlohmann::json l1 = nlohmann::json::array();
            for (const SimState& st : snaps) {
                const ConvergenceDiagnostic d = phi_map(st, fam.profiles);
                spread.push_back(d.phi_spread);
                l1.push_back(d.l1_distance_to_nearest);
            }
            diag["phi_spread"] = spread;
            diag["l1_distance_to_nearest"] = l1;
        }
    }
    nlohmann::json manifest;
    manifest["scenario"] = serialize(s);
    manifest["snapshots"] = snaps_json;
    manifest["diagnostics"] = diag;
    write_text(dir / "run.json", manifest.dump(2) + "\n");
    paths.push_back(dir / "snapshots.gp");
    paths.push_back(dir / "run.json");
    if (written)
        written->insert(written->end(), paths.begin(), paths.end());
    return diag;
}

inline void cmd_simulate(const Scenario& s, const CommandOptions& opt, std::ostream& out)
{
    const nlohmann::json diag = run_simulation(s, s.output_dir, opt.workers == 0 ? default_workers() : opt.workers);
    if (!opt.quiet)
        out << diag.dump(2) << '\n';
}

// ---------------------------------------------------------------------------

/// The sixteen canonical cases: (kappa-, kappa+) in {(2,1), (1,2)}, both models, digits 1..4.
inline std::vector<Scenario> sweep_scenarios(const Scenario& base, double fbar = 0.1875)
{
    std::vector<Scenario> out;
    for (char letter : {'A', 'B', 'C', 'D'}) {
        for (int digit = 1; digit <= 4; ++digit) {
            Scenario s = base;
            s.model = letter == 'A' || letter == 'B' ? Model::m1 : Model::m2;
            const bool faster_left = letter == 'A' || letter == 'C';
            s.kappa_minus = faster_left ? 2.0 : 1.0;
            s.kappa_plus = faster_left ? 1.0 : 2.0;
            s.rho_minus.reset();
            s.rho_plus.reset();
            s.fbar = fbar;
            s.case_label = std::string{letter, static_cast<char>('0' + digit)};
            s.traces.clear();
            s.output_dir = (fs::path(base.output_dir) / s.case_label).string();
            out.push_back(s);
        }
    }
    return out;
}

/// Marker file names placed in a sweep case directory for a tag.
inline std::vector<std::string> case_markers(const CaseTag& tag)
{
    std::vector<std::string> out{"multiplicity_" + std::string(to_string(tag.multiplicity)),
                                 tag.stable ? "stable" : "unstable"};
    if (tag.multiplicity == Multiplicity::none)
        out.push_back("no_stationary_profile");
    return out;
}

/// Runs one sweep case; returns every file it wrote.
inline std::vector<fs::path> run_sweep_case(const Scenario& s)
{
    const fs::path dir = s.output_dir;
    fs::create_directories(dir);
    std::vector<fs::path> files;
    const ResolvedScenario r = resolve(s);
    const CaseInputs& in = r.inputs;
    const CaseTag tag = in.tag();

    nlohmann::json info;
    info["case"] = tag.label;
    info["model"] = std::string(to_string(s.model));
    info["kappa_minus"] = s.kappa_minus;
    info["kappa_plus"] = s.kappa_plus;
    info["fbar"] = in.fbar();
    info["rho_minus"] = in.rho_minus;
    info["rho_plus"] = in.rho_plus;
    info["multiplicity"] = std::string(to_string(tag.multiplicity));
    info["stable"] = tag.stable;
    for (const std::string& m : case_markers(tag)) {
        write_text(dir / m, tag.label + "\n");
        files.push_back(dir / m);
    }
    write_text(dir / "scenario.cfg", serialize(s));
    files.push_back(dir / "scenario.cfg");

    if (tag.multiplicity != Multiplicity::none) {
        SolverParams params;
        params.workers = 1;
        const FamilyResult f = case_profiles(in, {}, params);
        const auto csvs = write_profiles(dir, f.profiles, in, tag.label + " profiles");
        files.insert(files.end(), csvs.begin(), csvs.end());
        if (!csvs.empty())
            files.push_back(dir / "profiles.gp");
        write_text(dir / "report.txt", profile_report(tag, f));
        files.push_back(dir / "report.txt");
        info["profiles"] = f.profiles.size();
        info["failed_traces"] = f.failures.size();
    }
    run_simulation(s, dir, 1, &files);
    write_text(dir / "case.json", info.dump(2) + "\n");
    files.push_back(dir / "case.json");
    return files;
}

inline nlohmann::json file_entry(const fs::path& root, const fs::path& file)
{
    return {{"path", fs::relative(file, root).generic_string()},
            {"bytes", static_cast<std::uint64_t>(fs::file_size(file))},
            {"fnv1a64", detail::hex(detail::fnv1a(file))}};
}

/**
 * Runs all sixteen cases concurrently and writes manifest.json listing every
 * artifact. Cases that fail numerically are recorded with their error and
 * make the command fail after the others finish.
 */
inline nlohmann::json cmd_sweep(const Scenario& base, const CommandOptions& opt, std::ostream& out)
{
    const fs::path root = base.output_dir;
    fs::create_directories(root);
    const std::vector<Scenario> cases = sweep_scenarios(base, base.fbar.value_or(0.1875));
    std::vector<std::vector<fs::path>> files(cases.size());
    std::vector<std::optional<Error>> errors(cases.size());
    parallel_for(cases.size(), opt.workers, [&](std::size_t k) {
        try {
            files[k] = run_sweep_case(cases[k]);
        } catch (const Error& e) {
            errors[k] = e;
        }
    });

    nlohmann::json manifest;
    manifest["cases"] = nlohmann::json::array();
    for (std::size_t k = 0; k < cases.size(); ++k) {
        nlohmann::json c;
        c["case"] = cases[k].case_label;
        c["directory"] = fs::path(cases[k].output_dir).filename().string();
        c["status"] = errors[k] ? "failed" : "ok";
        if (errors[k])
            c["error"] = {{"code", std::string(to_string(errors[k]->code()))}, {"message", errors[k]->what()}};
        std::sort(files[k].begin(), files[k].end());
        c["files"] = nlohmann::json::array();
        for (const fs::path& f : files[k])
            c["files"].push_back(file_entry(root, f));
        manifest["cases"].push_back(c);
        if (!opt.quiet)
            out << cases[k].case_label << ": " << (errors[k] ? "failed" : "ok") << '\n';
    }
    write_text(root / "manifest.json", manifest.dump(2) + "\n");
    for (const auto& e : errors)
        if (e)
            throw Error(e->code(), "sweep case failed: " + std::string(e->what()));
    return manifest;
}

/// Problems found when checking manifest.json against the files under `root`; empty means consistent.
inline std::vector<std::string> validate_manifest(const fs::path& root)
{
    std::vector<std::string> problems;
    const fs::path path = root / "manifest.json";
    std::ifstream in(path);
    if (!in)
        return {"missing manifest.json"};
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        return {std::string("manifest.json unreadable: ") + e.what()};
    }
    std::set<std::string> listed;
    for (const auto& c : manifest.at("cases")) {
        for (const auto& f : c.at("files")) {
            const std::string rel = f.at("path").get<std::string>();
            listed.insert(rel);
            const fs::path file = root / rel;
            if (!fs::exists(file)) {
                problems.push_back("listed file missing: " + rel);
                continue;
            }
            if (fs::file_size(file) != f.at("bytes").get<std::uint64_t>())
                problems.push_back("size mismatch: " + rel);
            else if (detail::hex(detail::fnv1a(file)) != f.at("fnv1a64").get<std::string>())
                problems.push_back("content mismatch: " + rel);
        }
    }
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file())
            continue;
        const std::string rel = fs::relative(entry.path(), root).generic_string();
        if (rel != "manifest.json" && !listed.count(rel))
            problems.push_back("unlisted file: " + rel);
    }
    return problems;
}

/**
 * Dispatches a command by name, mapping failures to exit codes and a single
 * `error {...}` line on `err`.
 */
inline int run_command(std::string_view name, const Scenario& scenario, const CommandOptions& opt, std::ostream& out,
                       std::ostream& err)
{
    try {
        const Scenario s = apply_overrides(scenario, opt);
        if (name == "classify")
            cmd_classify(s, out);
        else if (name == "profile")
            cmd_profile(s, opt, out);
        else if (name == "family")
            cmd_family(s, opt, out);
        else if (name == "simulate")
            cmd_simulate(s, opt, out);
        else if (name == "sweep")
            cmd_sweep(s, opt, out);
        else
            throw Error(Errc::config, "unknown command '" + std::string(name) + "'");
        return exit_ok;
    } catch (const Error& e) {
        err << error_line(e) << '\n';
        return exit_code_for(e.code());
    } catch (const fs::filesystem_error& e) {
        err << error_line(Error(Errc::io, e.what())) << '\n';
        return exit_numerical;
    }
}

/// Reads and parses a scenario file.
inline Scenario load_scenario(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(Errc::missing_file, "cannot open scenario " + path.string(), "config");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_scenario(text.str());
}

} // namespace roughwave
