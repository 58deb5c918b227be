// End-to-end checks at kappa- = 2, kappa+ = 1, h = 0.2, fbar = 0.1875.
// Prints one PASS/FAIL line per criterion; exits nonzero if any fails.

#include "roughwave/roughwave.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace roughwave;
namespace fs = std::filesystem;

namespace {

constexpr double h = 0.2;
constexpr double fbar = 0.1875;

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

CaseInputs case_inputs(const std::string& label, double dx = h / 40)
{
    CaseInputs in;
    in.model = label[0] == 'A' || label[0] == 'B' ? Model::m1 : Model::m2;
    in.cond = label[0] == 'A' || label[0] == 'C' ? RoadCondition(2.0, 1.0) : RoadCondition(1.0, 2.0);
    in.kernel = Kernel::linear(h);
    in.dx = dx;
    std::tie(in.rho_minus, in.rho_plus) = densities_for_case(label, fbar, in.cond, in.v, in.model);
    return in;
}

std::pair<double, double> quadratic_roots(double kappa)
{
    const double d = std::sqrt(1.0 - 4.0 * fbar / kappa);
    return {0.5 * (1.0 - d), 0.5 * (1.0 + d)};
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("roughwave_acceptance_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// ---------------------------------------------------------------------------

Outcome flux_level_oracle()
{
    const auto v = VelocityModel::lwr();
    const RoadCondition cond(2.0, 1.0);
    double best = 1e9;
    FluxLevelSet set;
    for (int k = 0; k < 20; ++k) {
        const auto t0 = Clock::now();
        set = solve_flux_level(fbar, cond, v);
        best = std::min(best, seconds_since(t0));
    }
    const auto [r1, r4] = quadratic_roots(2.0);
    const auto [r2, r3] = quadratic_roots(1.0);
    const double err = std::max({std::abs(set.rho1 - r1), std::abs(set.rho2 - r2), std::abs(set.rho3 - r3),
                                 std::abs(set.rho4 - r4)});
    return {err < 1e-12 && best < 1e-3,
            fmt("max root error %.2e, runtime %.1f us (rho1..4 = %.15f %.15f %.15f %.15f)", err, best * 1e6, set.rho1,
                set.rho2, set.rho3, set.rho4)};
}

Outcome a1_family()
{
    const CaseInputs in = case_inputs("A1");
    const auto t0 = Clock::now();
    std::vector<double> traces = default_family_traces(in, 6);
    const FamilyResult f = build_profile_family(in, traces);
    const double runtime = seconds_since(t0);
    double worst_residual = 0.0;
    double worst_trace = 0.0;
    double worst_left = 0.0;
    bool monotone = true;
    for (const Profile& p : f.profiles) {
        worst_residual = std::max(worst_residual, residual(p, in.cond, in.v, in.kernel));
        const double qm = *p.grid.left_trace_at_zero;
        const double qp = p.grid.values[static_cast<std::size_t>(*p.grid.zero_index())];
        worst_trace = std::max(worst_trace, std::abs(in.cond.kappa_minus() * qm - in.cond.kappa_plus() * qp));
        worst_left = std::max(worst_left, std::abs(p.grid.values.front() - in.rho_minus));
        const auto z = static_cast<std::size_t>(*p.grid.zero_index());
        for (std::size_t i = 1; i < p.grid.values.size(); ++i) {
            const double prev = i == z ? qm : p.grid.values[i - 1];
            if (i == z)
                monotone = monotone && p.grid.values[z - 1] <= qm;
            monotone = monotone && p.grid.values[i] >= prev;
        }
    }
    const double gap = f.profiles.size() > 1 ? family_min_gap(f.profiles) : 0.0;
    const bool pass = f.profiles.size() >= 5 && f.failures.empty() && worst_residual < 1e-10 && monotone &&
                      worst_trace < 1e-12 && worst_left < 1e-3 && gap > 0.0 && runtime < 5.0;
    return {pass, fmt("%zu profiles (%zu failed), residual %.2e, trace relation %.2e, |Q(x_min)-rho-| %.2e, "
                      "monotone %s, min gap %.3e, %.2f s",
                      f.profiles.size(), f.failures.size(), worst_residual, worst_trace, worst_left,
                      monotone ? "yes" : "no", gap, runtime)};
}

// Sup difference over the coarse nodes; both grids have a node at x = 0, so they are aligned at the trace.
double aligned_sup_diff(const Profile& coarse, const Profile& fine)
{
    const auto zc = *coarse.grid.zero_index();
    const auto zf = *fine.grid.zero_index();
    const auto ratio = static_cast<std::ptrdiff_t>(std::lround(coarse.grid.dx / fine.grid.dx));
    double d = std::abs(*coarse.grid.left_trace_at_zero - *fine.grid.left_trace_at_zero);
    for (std::ptrdiff_t i = 0; i < coarse.grid.size(); ++i) {
        const std::ptrdiff_t k = zf + (i - zc) * ratio;
        if (k < 0 || k >= fine.grid.size())
            continue;
        d = std::max(d, std::abs(coarse.grid.values[static_cast<std::size_t>(i)] -
                                 fine.grid.values[static_cast<std::size_t>(k)]));
    }
    return d;
}

Outcome grid_convergence()
{
    std::vector<Profile> p;
    for (double dx : {h / 40, h / 80, h / 160})
        p.push_back(build_profile_family(case_inputs("A1", dx), {0.55}).profiles.at(0));
    const double e1 = aligned_sup_diff(p[0], p[1]);
    const double e2 = aligned_sup_diff(p[1], p[2]);
    const double ratio = e1 / e2;
    return {ratio >= 1.8, fmt("|Q_dx - Q_dx/2| = %.3e, |Q_dx/2 - Q_dx/4| = %.3e, ratio %.3f", e1, e2, ratio)};
}

Outcome a2_uniqueness()
{
    const CaseInputs in = case_inputs("A2");
    const Profile p = build_unique_profile(in);
    const auto z = static_cast<std::size_t>(*p.grid.zero_index());
    double right_dev = 0.0;
    for (std::size_t i = z; i < p.grid.values.size(); ++i)
        right_dev = std::max(right_dev, std::abs(p.grid.values[i] - in.rho_plus));
    bool monotone = *p.grid.left_trace_at_zero >= p.grid.values[z - 1];
    for (std::size_t i = 1; i < z; ++i)
        monotone = monotone && p.grid.values[i] >= p.grid.values[i - 1];

    const fs::path root = scratch("a2");
    Scenario s = load_scenario(fs::path(ROUGHWAVE_SCENARIO_DIR) / "a2_profile.cfg");
    CommandOptions opt;
    opt.quiet = true;
    std::ostringstream out, err;
    bool identical = true;
    std::size_t files = 0;
    for (const char* run : {"run1", "run2"}) {
        opt.out_dir = (root / run).string();
        identical = identical && run_command("profile", s, opt, out, err) == exit_ok;
    }
    for (const auto& e : fs::directory_iterator(root / "run1")) {
        ++files;
        identical = identical && slurp(e.path()) == slurp(root / "run2" / e.path().filename());
    }
    identical = identical && files > 0 &&
                static_cast<std::size_t>(std::distance(fs::directory_iterator(root / "run2"), {})) == files;
    return {right_dev < 1e-12 && monotone && identical,
            fmt("|Q - rho+| on x>=0 %.2e, monotone on x<0 %s, %zu files byte-identical %s %s", right_dev,
                monotone ? "yes" : "no", files, identical ? "yes" : "no", err.str().c_str())};
}

Outcome b1_envelope_and_oscillation()
{
    const CaseInputs in = case_inputs("B1");
    const double rho1 = conjugate_density(in.rho_plus, in.v);
    const Profile env = build_profile_family(in, {rho1}).profiles.at(0);
    const auto z = static_cast<std::size_t>(*env.grid.zero_index());
    bool decreasing = *env.grid.left_trace_at_zero <= env.grid.values[z - 1];
    double top_value = 0.0;
    for (std::size_t i = 0; i < z; ++i) {
        top_value = std::max(top_value, env.grid.values[i]);
        if (i > 0)
            decreasing = decreasing && env.grid.values[i] <= env.grid.values[i - 1];
    }
    top_value = std::max(top_value, *env.grid.left_trace_at_zero);
    const bool below = top_value < in.rho_minus + 1e-10;

    const double limit = family_upper_limit(in);
    std::size_t peaks = 0;
    bool peaks_decreasing = false;
    double member = 0.0;
    for (double gap : {1e-11, 1e-10, 1e-9, 1e-8}) {
        const FamilyResult f = build_profile_family(in, {limit - gap});
        if (f.profiles.empty())
            continue;
        const auto maxima = local_maxima(f.profiles.front().grid, -h, 1e-6);
        bool dec = maxima.size() >= 2;
        // Collected from x = -h leftward, so the peaks must shrink along the list.
        for (std::size_t k = 1; k < maxima.size(); ++k)
            dec = dec && maxima[k].value < maxima[k - 1].value;
        if (dec) {
            peaks = maxima.size();
            peaks_decreasing = true;
            member = limit - gap;
            break;
        }
    }
    return {decreasing && below && peaks_decreasing,
            fmt("envelope (trace %.6f) decreasing %s, max %.12f vs rho- %.12f; member trace %.12f has %zu "
                "decreasing maxima on x<-h",
                rho1, decreasing ? "yes" : "no", top_value, in.rho_minus, member, peaks)};
}

Outcome c1_kink()
{
    std::vector<KinkReport> r;
    for (double dx : {h / 100, h / 200}) {
        const CaseInputs in = case_inputs("C1", dx);
        const Profile p = build_profile_family_m2(in, {0.6}).profiles.at(0);
        r.push_back(kink_certificate(p, in.cond, in.v, in.kernel));
    }
    return {r[0].relative_error < 0.05 && r[1].relative_error < r[0].relative_error,
            fmt("dx=h/100: predicted %.5f observed %.5f rel.err %.4f; dx=h/200: rel.err %.4f", r[0].predicted_jump,
                r[0].observed_jump, r[0].relative_error, r[1].relative_error)};
}

Outcome simulator_conservation()
{
    const CaseInputs in = case_inputs("A1");
    const SimGrid g{-5.0, 5.0 + h, in.dx};
    const Simulator sim(in.model, in.cond, in.v, in.kernel, in.dx);
    SimState s = riemann_initial(in.rho_minus, in.rho_plus, g);
    double worst = 0.0;
    double lo = 1.0;
    double hi = 0.0;
    for (int n = 0; n < 10000; ++n) {
        const StepReport r = sim.step(s, sim.time_step(s));
        worst = std::max(worst, r.balance_error);
        const auto [a, b] = std::minmax_element(s.cells.begin(), s.cells.end());
        lo = std::min(lo, *a);
        hi = std::max(hi, *b);
    }
    return {worst <= 1e-12 && lo >= 0.0 && hi <= 1.0,
            fmt("10000 steps to t=%.3f, worst balance %.2e, range [%.6f, %.6f]", s.t, worst, lo, hi)};
}

std::vector<double> trace_grid(const CaseInputs& in)
{
    const TraceRange range = admissible_traces(in);
    std::vector<double> traces;
    for (int k = 0; k <= 40; ++k) {
        const double t = range.lo + (range.hi - range.lo) * k / 40.0;
        if (range.contains(t))
            traces.push_back(t);
    }
    return traces;
}

Outcome stability()
{
    bool pass = true;
    std::string detail;
    for (const char* label : {"A1", "B1", "C1", "D1"}) {
        const auto t0 = Clock::now();
        const CaseInputs in = case_inputs(label);
        const SimGrid g{-5.0, 5.0 + h, in.dx};
        const Simulator sim(in.model, in.cond, in.v, in.kernel, in.dx);
        const auto snaps = sim.run(riemann_initial(in.rho_minus, in.rho_plus, g), 20.0, {1.0, 20.0});
        const std::vector<double> traces = trace_grid(in);
        const FamilyResult scheme = scheme_stationary_family(in, g, traces);
        const FamilyResult profiles =
            in.model == Model::m1 ? build_profile_family(in, traces) : build_profile_family_m2(in, traces);
        const double phi1 = phi_map(snaps[0], scheme.profiles).phi_spread;
        const double phi20 = phi_map(snaps[1], scheme.profiles).phi_spread;
        const double l1 = phi_map(snaps[1], profiles.profiles).l1_distance_to_nearest;
        const double runtime = seconds_since(t0);
        const bool ok = phi20 <= 0.5 * phi1 && l1 < 0.05 && runtime < 60.0;
        pass = pass && ok;
        detail += fmt("%s%s phi(1)=%.2e phi(20)=%.2e L1=%.2e %.1fs", detail.empty() ? "" : "; ", label, phi1, phi20,
                      l1, runtime);
    }
    return {pass, detail};
}

Outcome persistence()
{
    bool pass = true;
    std::string detail;
    std::vector<double> times;
    for (int k = 0; k <= 20; ++k)
        times.push_back(10.0 + 0.5 * k);
    for (const char* label : {"A3", "A4", "B3", "B4", "C3", "C4", "D3", "D4"}) {
        const CaseInputs in = case_inputs(label);
        const SimGrid g{-5.0, 5.0 + h, in.dx};
        const Simulator sim(in.model, in.cond, in.v, in.kernel, in.dx);
        const auto snaps = sim.run(riemann_initial(in.rho_minus, in.rho_plus, g), 20.0, times);
        const auto series = persistence_metric(snaps, ConstantPair{in.rho_minus, in.rho_plus});
        const double lowest = *std::min_element(series.begin(), series.end());
        pass = pass && lowest > 0.05;
        detail += fmt("%s%s min %.3f", detail.empty() ? "" : "; ", label, lowest);
    }
    // Unique-profile cases: a bump on the scheme's stationary state, on a domain long enough that it stays inside.
    for (const char* label : {"A2", "B2", "C2", "D2"}) {
        const CaseInputs in = case_inputs(label);
        const SimGrid g{-5.0, 20.0 + h, in.dx};
        const Profile member = scheme_stationary_family(in, g, {in.rho_plus}).profiles.at(0);
        const Simulator sim(in.model, in.cond, in.v, in.kernel, in.dx);
        const SimState base = sim.run(stationary_initial(member, g), 10.0, {10.0}).back();
        const SimState bumped = sim.run(stationary_initial(member, g, Bump{0.5, 1.0, 0.01}), 10.0, {10.0}).back();
        double linf = 0.0;
        for (std::size_t j = 0; j < base.size(); ++j)
            if (base.x_center(j) > 0.0)
                linf = std::max(linf, std::abs(bumped.cells[j] - base.cells[j]));
        pass = pass && linf > 0.003;
        detail += fmt("; %s bump Linf(T=10) %.4f", label, linf);
    }
    return {pass, detail};
}

Outcome averaging_oracle()
{
    using boost::math::quadrature::gauss_kronrod;
    const double dx = h / 40;
    const Kernel w = Kernel::linear(h);
    const NonlocalOps ops(w, dx);
    const auto v = VelocityModel::lwr();
    const RoadCondition cond(2.0, 1.0);
    std::mt19937 gen(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    // Integrate cell by cell so every piece of the integrand is smooth.
    auto oracle = [&](auto f) {
        double total = 0.0;
        for (int k = 0; k < 40; ++k)
            total += gauss_kronrod<double, 31>::integrate(f, k * dx, (k + 1) * dx, 10, 1e-14);
        return total;
    };
    double worst_density = 0.0;
    double worst_velocity = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const double a = 0.5 + 10 * u(gen), b = 6.3 * u(gen), amp = 0.45 * u(gen);
        GridFunction g = make_grid(-1.0, 1.0, dx);
        for (std::ptrdiff_t i = 0; i < g.size(); ++i)
            g.values[static_cast<std::size_t>(i)] = 0.5 + amp * std::sin(a * g.x(i) + b);
        const auto i = static_cast<std::ptrdiff_t>(u(gen) * static_cast<double>(g.size() - 41));
        const double xi = g.x(i);
        auto piece = [&](double y) {
            const auto c = static_cast<std::ptrdiff_t>(std::floor((y - g.x0) / dx + 1e-12));
            const double t = (y - g.x(c)) / dx;
            return g.values[static_cast<std::size_t>(c)] +
                   (g.values[static_cast<std::size_t>(c + 1)] - g.values[static_cast<std::size_t>(c)]) * t;
        };
        const double dens = oracle([&](double s) { return piece(xi + s) * w(s); });
        worst_density = std::max(worst_density, std::abs(ops.average_density(g, i) - dens));
        const double vel = oracle([&](double s) { return cond.at(xi + s) * v.eval(piece(xi + s)) * w(s); });
        worst_velocity = std::max(worst_velocity, std::abs(ops.average_velocity(g, i, cond, v) - vel));
    }
    return {worst_density < 1e-10 && worst_velocity < 1e-10,
            fmt("100 inputs: density error %.2e, velocity error %.2e", worst_density, worst_velocity)};
}

Outcome sweep_completeness()
{
    const fs::path root = scratch("sweep");
    Scenario base = load_scenario(fs::path(ROUGHWAVE_SCENARIO_DIR) / "sweep.cfg");
    base.output_dir = root.string();
    CommandOptions opt;
    opt.quiet = true;
    std::ostringstream out;
    const auto t0 = Clock::now();
    const nlohmann::json manifest = cmd_sweep(base, opt, out);
    const double runtime = seconds_since(t0);
    std::size_t ok_cases = 0;
    std::size_t mismatches = 0;
    std::string bad;
    for (const auto& c : manifest.at("cases")) {
        const std::string label = c.at("case");
        ok_cases += c.at("status") == "ok";
        const char digit = label[1];
        std::set<std::string> expected;
        if (digit == '1')
            expected = {"multiplicity_infinite", "stable"};
        else if (digit == '2')
            expected = {"multiplicity_unique", "unstable"};
        else
            expected = {"multiplicity_none", "unstable", "no_stationary_profile"};
        std::set<std::string> markers;
        bool has_artifacts = false;
        for (const auto& e : fs::directory_iterator(root / c.at("directory").get<std::string>())) {
            const std::string name = e.path().filename().string();
            if (name.rfind("multiplicity_", 0) == 0 || name == "stable" || name == "unstable" ||
                name == "no_stationary_profile")
                markers.insert(name);
            has_artifacts = has_artifacts || e.path().extension() == ".csv";
        }
        if (markers != expected || !has_artifacts) {
            ++mismatches;
            bad += " " + label;
        }
    }
    const auto problems = validate_manifest(root);
    return {manifest.at("cases").size() == 16 && ok_cases == 16 && mismatches == 0 && problems.empty(),
            fmt("%zu cases, %zu ok, marker mismatches %zu%s, manifest problems %zu, %.1f s",
                manifest.at("cases").size(), ok_cases, mismatches, bad.c_str(), problems.size(), runtime)};
}

} // namespace

int main()
{
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"flux-level oracle", flux_level_oracle},
        {"A1 profile family", a1_family},
        {"A1 grid convergence", grid_convergence},
        {"A2 uniqueness and determinism", a2_uniqueness},
        {"B1 envelope and oscillation", b1_envelope_and_oscillation},
        {"C1 kink certificate", c1_kink},
        {"simulator conservation and bounds", simulator_conservation},
        {"stability of infinite-family cases", stability},
        {"persistence and instability", persistence},
        {"averaging-operator oracle", averaging_oracle},
        {"sweep completeness", sweep_completeness},
    };
    int failures = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        Outcome o;
        const auto t0 = Clock::now();
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("%s %zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first, o.detail.c_str(),
                    seconds_since(t0));
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
