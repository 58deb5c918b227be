#pragma once

#include "roughwave/error.hpp"
#include "roughwave/grid.hpp"
#include "roughwave/model_core.hpp"
#include "roughwave/parallel.hpp"
#include "roughwave/profile.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace roughwave {

enum class Scheme { upwind, lax_friedrichs };

constexpr std::string_view to_string(Scheme s) noexcept
{
    return s == Scheme::upwind ? "upwind" : "lax-friedrichs";
}

inline Scheme parse_scheme(std::string_view s)
{
    if (s == "upwind")
        return Scheme::upwind;
    if (s == "lax-friedrichs" || s == "lxf")
        return Scheme::lax_friedrichs;
    throw Error(Errc::config, "unknown scheme '" + std::string(s) + "'", "scheme");
}

/// Cell averages on [x_min, x_min + N dx] with x = 0 on the interface left of cell `interface_index`.
struct SimState {
    std::vector<double> cells;
    double dx = 0.0;
    double x_min = 0.0;
    double t = 0.0;
    std::size_t interface_index = 0;
    double left_farfield = 0.0;
    double right_farfield = 0.0;
    Scheme scheme = Scheme::upwind;
    double cfl = 0.4;

    std::size_t size() const noexcept { return cells.size(); }
    double x_center(std::size_t j) const noexcept { return x_min + (static_cast<double>(j) + 0.5) * dx; }
    double x_max() const noexcept { return x_min + static_cast<double>(cells.size()) * dx; }
    double mass() const
    {
        // Neumaier summation keeps the per-step balance check at round-off level.
        double sum = 0.0;
        double comp = 0.0;
        for (double c : cells) {
            const double t1 = sum + c;
            comp += std::abs(sum) >= std::abs(c) ? (sum - t1) + c : (c - t1) + sum;
            sum = t1;
        }
        return (sum + comp) * dx;
    }
};

struct SimGrid {
    double x_min = -5.0;
    double x_max = 5.2;
    double dx = 0.005;
    Scheme scheme = Scheme::upwind;
    double cfl = 0.4;
};

/// Per-step conservation record: mass change against boundary fluxes.
struct StepReport {
    double dt = 0.0;
    double mass_before = 0.0;
    double mass_after = 0.0;
    double flux_in = 0.0;
    double flux_out = 0.0;
    double balance_error = 0.0; ///< |mass_after - mass_before - dt (flux_in - flux_out)|
    std::size_t limited_interfaces = 0;
};

namespace detail {

inline SimState empty_state(const SimGrid& g, double rho_minus, double rho_plus)
{
    if (!(g.dx > 0.0))
        throw Error(Errc::precondition, "cell size must be positive");
    const double nl = std::round(-g.x_min / g.dx);
    const double nr = std::round(g.x_max / g.dx);
    if (nl < 1.0 || nr < 1.0 || std::abs(nl * g.dx + g.x_min) > 1e-9 * std::max(1.0, std::abs(g.x_min)) ||
        std::abs(nr * g.dx - g.x_max) > 1e-9 * std::max(1.0, std::abs(g.x_max)))
        throw Error(Errc::precondition, "x=0 must fall on a cell interface inside the domain");
    for (double r : {rho_minus, rho_plus})
        if (!(r >= 0.0 && r <= 1.0))
            throw Error(Errc::domain, "far-field density outside [0,1]");
    SimState s;
    s.dx = g.dx;
    s.x_min = -nl * g.dx;
    s.interface_index = static_cast<std::size_t>(nl);
    s.cells.assign(static_cast<std::size_t>(nl + nr), 0.0);
    s.left_farfield = rho_minus;
    s.right_farfield = rho_plus;
    s.scheme = g.scheme;
    s.cfl = g.cfl;
    return s;
}

} // namespace detail

/// Riemann data: rho- on cells left of 0, rho+ on the right.
inline SimState riemann_initial(double rho_minus, double rho_plus, const SimGrid& g)
{
    SimState s = detail::empty_state(g, rho_minus, rho_plus);
    for (std::size_t j = 0; j < s.size(); ++j)
        s.cells[j] = j < s.interface_index ? rho_minus : rho_plus;
    return s;
}

/// Compactly supported bump added to initial data: `amplitude` on [a, b] (cell-average overlap).
struct Bump {
    double a = 0.5;
    double b = 1.0;
    double amplitude = 0.0;
};

namespace detail {

inline void add_bump(SimState& s, const std::optional<Bump>& bump)
{
    for (std::size_t j = 0; j < s.size(); ++j) {
        const double lo = s.x_min + static_cast<double>(j) * s.dx;
        const double hi = lo + s.dx;
        double& q = s.cells[j];
        if (bump) {
            const double overlap = std::max(0.0, std::min(hi, bump->b) - std::max(lo, bump->a));
            q += bump->amplitude * overlap / s.dx;
        }
        if (!(q >= 0.0 && q <= 1.0))
            throw Error(Errc::domain, "initial density outside [0,1] at x=" + std::to_string(s.x_center(j)));
    }
}

} // namespace detail

/// Exact cell averages of a profile's reconstruction, plus an optional bump.
inline SimState profile_initial(const Profile& p, const SimGrid& g, std::optional<Bump> bump = std::nullopt)
{
    const double rho_minus = p.grid.values.front();
    const double rho_plus = p.grid.right_padding ? *p.grid.right_padding : p.grid.values.back();
    SimState s = detail::empty_state(g, rho_minus, rho_plus);
    s.left_farfield = p.left_anchor != 0.0 ? p.left_anchor : rho_minus;
    for (std::size_t j = 0; j < s.size(); ++j) {
        const double lo = s.x_min + static_cast<double>(j) * s.dx;
        const double hi = lo + s.dx;
        s.cells[j] = p.grid.cell_average(lo, hi);
    }
    detail::add_bump(s, bump);
    return s;
}

inline double stable_time_step(const SimState& s, const RoadCondition& cond, const VelocityModel& v)
{
    if (!(s.cfl > 0.0 && s.cfl <= 0.5))
        throw Error(Errc::cfl_violation, "Courant factor " + std::to_string(s.cfl) + " outside (0, 0.5]");
    return s.cfl * s.dx / (cond.max() * v.eval(0.0));
}

/**
 * Finite-volume stepper. Interface fluxes read the upwind cell density and a
 * nonlocal velocity over the cells starting at that interface; the window
 * runs into m + 1 right ghost cells holding rho+, one left ghost holds rho-.
 *
 * A capacity limiter, swept right to left, caps each inflow at what the cell
 * can hold: F_{j-1/2} <= F_{j+1/2} + (1 - rho_j) dx / dt. It never binds
 * while the plain update stays in [0, 1]; it does bind for the first model
 * at a coefficient drop with kappa- rho(0-) > kappa+, where the stationary
 * connecting condition would demand rho(0+) > 1.
 */
class Simulator {
public:
    Simulator(Model model, RoadCondition cond, VelocityModel v, const Kernel& kernel, double dx,
              std::size_t workers = 1)
        : model_(model), cond_(cond), v_(std::move(v)), weights_(kernel.cell_moments(dx).mass), dx_(dx),
          workers_(workers == 0 ? 1 : workers)
    {
    }

    std::size_t window_cells() const noexcept { return weights_.size(); }

    double time_step(const SimState& s) const { return stable_time_step(s, cond_, v_); }

    /// Advances by min(dt, the stable step); dt <= 0 leaves the state unchanged.
    StepReport step(SimState& s, double dt) const
    {
        check(s);
        StepReport r;
        r.mass_before = s.mass();
        r.mass_after = r.mass_before;
        const double dt_max = time_step(s);
        if (dt > dt_max * (1.0 + 1e-12))
            throw Error(Errc::cfl_violation, "time step exceeds the CFL bound");
        if (!(dt > 0.0))
            return r;
        fluxes(s, dt);
        const double lambda = dt / s.dx;
        const std::size_t n = s.size();
        for (std::size_t j = n; j-- > 0;) {
            const double room = flux_[j + 1] + (1.0 - s.cells[j]) / lambda;
            if (flux_[j] > room) {
                flux_[j] = room;
                ++r.limited_interfaces;
            }
        }
        for (std::size_t j = 0; j < n; ++j)
            s.cells[j] -= lambda * (flux_[j + 1] - flux_[j]);
        for (std::size_t j = 0; j < n; ++j) {
            double& c = s.cells[j];
            if (!(c >= -1e-13 && c <= 1.0 + 1e-13))
                throw Error(Errc::state_out_of_range, "cell value " + std::to_string(c) + " left [0,1] at x=" +
                                                          std::to_string(s.x_center(j)) + ", t=" +
                                                          std::to_string(s.t + dt));
            c = std::clamp(c, 0.0, 1.0);
        }
        s.t += dt;
        r.dt = dt;
        r.flux_in = flux_.front();
        r.flux_out = flux_.back();
        r.mass_after = s.mass();
        r.balance_error = std::abs(r.mass_after - r.mass_before - dt * (r.flux_in - r.flux_out));
        return r;
    }

    StepReport step(SimState& s) const { return step(s, time_step(s)); }

    /**
     * Integrates to t_final; each requested snapshot is the first state with
     * t >= the requested time. The last step is shortened to land on t_final.
     */
    std::vector<SimState> run(SimState s, double t_final, std::vector<double> snapshot_times,
                              const std::function<void(const SimState&, const StepReport&)>& observer = {}) const
    {
        if (!(t_final > 0.0))
            throw Error(Errc::precondition, "t_final must be positive");
        std::sort(snapshot_times.begin(), snapshot_times.end());
        std::vector<SimState> out;
        std::size_t next = 0;
        auto capture = [&] {
            while (next < snapshot_times.size() && s.t >= snapshot_times[next] - 1e-12) {
                out.push_back(s);
                ++next;
            }
        };
        capture();
        const double dt = time_step(s);
        while (s.t < t_final - 1e-12) {
            const double h = std::min(dt, t_final - s.t);
            StepReport r = step(s, h);
            if (s.t > t_final - 1e-12)
                s.t = t_final;
            if (observer)
                observer(s, r);
            capture();
        }
        while (next < snapshot_times.size()) {
            out.push_back(s);
            ++next;
        }
        return out;
    }

    /// Interface fluxes F_{j-1/2}, j = 0..N, of the current state (dt only enters the Lax-Friedrichs term).
    const std::vector<double>& fluxes(const SimState& s, double dt) const
    {
        const std::size_t n = s.size();
        const std::size_t m = weights_.size();
        ext_.assign(n + m + 2, s.right_farfield);
        ext_[0] = s.left_farfield;
        std::copy(s.cells.begin(), s.cells.end(), ext_.begin() + 1);
        // Extended index e = j + 1 for cell j; cell j lies left of 0 iff j < interface_index.
        auto kappa_ext = [&](std::size_t e) {
            return e < s.interface_index + 1 ? cond_.kappa_minus() : cond_.kappa_plus();
        };
        if (model_ == Model::m2) {
            kv_.resize(ext_.size());
            for (std::size_t e = 0; e < ext_.size(); ++e)
                kv_[e] = kappa_ext(e) * v_.eval(ext_[e]);
        }
        flux_.assign(n + 1, 0.0);
        const double alpha = s.scheme == Scheme::lax_friedrichs ? 0.5 * s.dx / dt : 0.0;
        // Velocity seen from extended cell e: the window covers cells e, e+1, ..., e+m-1.
        auto velocity_from = [&](std::size_t e) {
            double acc = 0.0;
            if (model_ == Model::m1) {
                for (std::size_t k = 0; k < m; ++k)
                    acc += weights_[k] * ext_[e + k];
                return v_.eval(acc);
            }
            for (std::size_t k = 0; k < m; ++k)
                acc += weights_[k] * kv_[e + k];
            return acc;
        };
        // flux_[i] is the interface between extended cells i and i + 1; the
        // upwind flux reads the window starting right of the interface.
        auto body = [&](std::size_t i) {
            const double k_send = model_ == Model::m1 ? kappa_ext(i) : 1.0;
            const double vel = velocity_from(i + 1);
            if (s.scheme == Scheme::upwind) {
                flux_[i] = k_send * ext_[i] * vel;
                return;
            }
            const double k_recv = model_ == Model::m1 ? kappa_ext(i + 1) : 1.0;
            flux_[i] = 0.5 * (k_send * ext_[i] * velocity_from(i) + k_recv * ext_[i + 1] * vel) -
                       alpha * (ext_[i + 1] - ext_[i]);
        };
        if (workers_ > 1) {
            const std::size_t chunks = workers_ * 4;
            const std::size_t len = (n + 1 + chunks - 1) / chunks;
            parallel_for(chunks, workers_, [&](std::size_t c) {
                for (std::size_t i = c * len; i < std::min(n + 1, (c + 1) * len); ++i)
                    body(i);
            });
        } else {
            for (std::size_t i = 0; i <= n; ++i)
                body(i);
        }
        return flux_;
    }

private:
    void check(const SimState& s) const
    {
        if (std::abs(s.dx - dx_) > 1e-12 * dx_)
            throw Error(Errc::precondition, "state cell size differs from the simulator's");
    }

    Model model_;
    RoadCondition cond_;
    VelocityModel v_;
    std::vector<double> weights_;
    double dx_;
    std::size_t workers_;
    mutable std::vector<double> ext_, kv_, flux_;
};

namespace detail {

/*
 * Upwind stationarity F_{j+1/2} = fbar solved for cell j, which is explicit
 * because the velocity only reads cells j+1..j+m. Offsets d from `anchor`:
 *   first model:  d = -c [v(c + a) - v(c)] / v(c + a),  a = sum w_k d_k
 *   second model: d = -c dV / (kappa_c v(c) + dV)
 */
struct SchemeCellSolver {
    Model model;
    const std::vector<double>& w;
    const VelocityModel& v;
    RoadCondition cond;
    double anchor;

    NodeDiagnostics operator()(GridFunction& d, std::ptrdiff_t i) const
    {
        const auto m = static_cast<std::ptrdiff_t>(w.size());
        const double ka = d.node_side(i) < 0 ? cond.kappa_minus() : cond.kappa_plus();
        const double va = v.eval(anchor);
        double wsum = 0.0;
        double num = 0.0; // c (V(d) - V(0)) with the anchor's own speed factor
        double den = 0.0; // V(d)
        if (model == Model::m1) {
            double a = 0.0;
            for (std::ptrdiff_t k = 0; k < m; ++k) {
                a += w[static_cast<std::size_t>(k)] * d.right_value(i + 1 + k);
                wsum += w[static_cast<std::size_t>(k)];
            }
            a += (wsum - 1.0) * anchor;
            den = v.eval(anchor + a);
            num = anchor * v.increment(anchor, a);
        } else {
            double dv = 0.0;
            for (std::ptrdiff_t k = 0; k < m; ++k) {
                const double wk = w[static_cast<std::size_t>(k)];
                const std::ptrdiff_t e = i + 1 + k;
                const double kk = d.node_side(e) < 0 ? cond.kappa_minus() : cond.kappa_plus();
                dv += wk * (kk * v.increment(anchor, d.right_value(e)) + (kk - ka) * va);
                wsum += wk;
            }
            dv += (wsum - 1.0) * ka * va;
            den = ka * va + dv;
            num = anchor * dv;
        }
        const double off = den > 0.0 ? -num / den : std::numeric_limits<double>::infinity();
        if (!(anchor + off <= 1.0))
            throw Error(Errc::blowup, "stationary cell density would exceed 1 at x=" + std::to_string(d.x(i)));
        d.values[static_cast<std::size_t>(i)] = off;
        return {i, 0, false, den, 0.0};
    }
};

/// Decay ratio of the upwind tail rho+ - eps r^j: sum_k w_k r^(k+1) = -v / (rho+ v').
inline double scheme_tail_ratio(const std::vector<double>& w, double rho_plus, const VelocityModel& v)
{
    const double target = -v.eval(rho_plus) / (rho_plus * v.deriv(rho_plus));
    auto k_of = [&](double r) {
        double sum = 0.0;
        double p = r;
        for (double wk : w) {
            sum += wk * p;
            p *= r;
        }
        return sum - target;
    };
    return bisect(k_of, 0.0, 1.0, 1e-16, 200);
}

} // namespace detail

/**
 * Exact stationary states of the upwind scheme on the cells of `g`, one per
 * requested trace. The trace is the first cell right of x = 0. Members are
 * returned as profiles whose grid nodes are the cell centres; residual_sup
 * is the largest interface flux deviation from fbar, boundaries included,
 * with ghost cells at the member's own far-field values.
 *
 * Discretised profiles differ from these by O(dx) near the interface, so a
 * converged upwind run is tracked against this family rather than against
 * the profile solvers' output.
 */
inline FamilyResult scheme_stationary_family(const CaseInputs& in, const SimGrid& g, const std::vector<double>& traces,
                                             const SolverParams& params = {})
{
    const SimState base = detail::empty_state(g, in.rho_minus, in.rho_plus);
    const std::vector<double> w = in.kernel.cell_moments(g.dx).mass;
    const double fbar = in.fbar();
    const double la = in.left_anchor();
    const double low = in.rho_plus > in.v.stagnation() ? conjugate_density(in.rho_plus, in.v) : in.rho_plus;
    const std::optional<CaseTag> tag = in.tag();
    const auto n = static_cast<std::ptrdiff_t>(base.size());
    const auto iface = static_cast<std::ptrdiff_t>(base.interface_index);
    const Simulator sim(in.model, in.cond, in.v, in.kernel, g.dx);

    return detail::run_family(traces, params.workers, [&](double trace) {
        Branch right;
        const double right_len = static_cast<double>(n - iface - 1) * g.dx;
        if (trace == in.rho_plus || trace == low) {
            right = detail::constant_branch(trace, in.rho_plus, right_len, g.dx);
        } else {
            if (!(in.rho_plus > in.v.stagnation()) || !(trace > low && trace < in.rho_plus))
                throw Error(Errc::inadmissible_trace, "trace " + std::to_string(trace) + " outside (" +
                                                          std::to_string(low) + ", " + std::to_string(in.rho_plus) +
                                                          "]");
            const RoadCondition flat(in.cond.kappa_plus(), in.cond.kappa_plus());
            const detail::SchemeCellSolver solver{in.model, w, in.v, flat, in.rho_plus};
            const double r = detail::scheme_tail_ratio(w, in.rho_plus, in.v);
            right = detail::shoot_branch(solver, static_cast<std::ptrdiff_t>(w.size()), r, in.rho_plus, low, trace,
                                         n - iface - 1, g.dx, params);
        }

        GridFunction d;
        d.x0 = base.x_center(0);
        d.dx = g.dx;
        d.values.assign(static_cast<std::size_t>(n), 0.0);
        const double far_right = *right.grid.right_padding;
        d.right_padding = far_right - la;
        for (std::ptrdiff_t j = iface; j < n; ++j)
            d.values[static_cast<std::size_t>(j)] = right.grid.values[static_cast<std::size_t>(j - iface)] - la;
        const detail::SchemeCellSolver solver{in.model, w, in.v, in.cond, la};
        Profile p;
        detail::march_range(d, iface - 1, 0, solver, &p.diagnostics);

        p.grid = d;
        p.grid.right_padding = far_right;
        p.offsets.resize(static_cast<std::size_t>(n));
        for (std::ptrdiff_t j = 0; j < n; ++j) {
            const auto u = static_cast<std::size_t>(j);
            if (j < iface) {
                p.offsets[u] = d.values[u];
                p.grid.values[u] = std::clamp(la + d.values[u], 0.0, 1.0);
            } else {
                p.offsets[u] = right.offsets[static_cast<std::size_t>(j - iface)];
                p.grid.values[u] = right.grid.values[static_cast<std::size_t>(j - iface)];
            }
        }
        p.model = in.model;
        p.fbar = fbar;
        p.case_tag = tag;
        p.trace_minus = p.grid.values[static_cast<std::size_t>(iface - 1)];
        p.trace_plus = p.grid.values[static_cast<std::size_t>(iface)];
        p.left_anchor = la;
        p.right_anchor = in.rho_plus;
        p.residual_tolerance = params.profile_tolerance;

        SimState s = base;
        s.cells = p.grid.values;
        s.right_farfield = far_right;
        for (double f : sim.fluxes(s, 1.0))
            p.residual_sup = std::max(p.residual_sup, std::abs(f - fbar));
        if (!(p.residual_sup <= p.residual_tolerance))
            throw Error(Errc::convergence, "scheme stationary state misses the flux level by " +
                                               std::to_string(p.residual_sup));
        return p;
    });
}

/// Cells of a scheme_stationary_family member on the grid it was built for, plus an optional bump.
inline SimState stationary_initial(const Profile& member, const SimGrid& g, std::optional<Bump> bump = std::nullopt)
{
    SimState s = detail::empty_state(g, member.left_anchor, member.right_anchor);
    if (member.grid.values.size() != s.size() || std::abs(member.grid.dx - s.dx) > 1e-12 * s.dx ||
        std::abs(member.grid.x0 - s.x_center(0)) > 1e-9 * s.dx)
        throw Error(Errc::precondition, "stationary member was built on a different grid");
    s.cells = member.grid.values;
    if (member.grid.right_padding)
        s.right_farfield = *member.grid.right_padding;
    detail::add_bump(s, bump);
    return s;
}

/// Spread of the family-trace map over a state, see phi_map.
struct ConvergenceDiagnostic {
    double phi_spread = 0.0;
    double l1_distance_to_nearest = 0.0;
    std::size_t nearest_member = 0;
    bool inside_envelope = true;
    std::size_t cells_used = 0;
    std::size_t cells_clamped = 0;
};

struct PhiOptions {
    double window = 2.0;           ///< cells with |x| <= window
    double min_sensitivity = 0.25; ///< skip cells where dQ/dtrace of the bracketing pair is smaller
};

/**
 * Assigns to each cell the trace of the family member through (x_j, rho_j),
 * interpolating linearly between stored members. Cells outside the envelope
 * are clamped to the extreme traces and flagged. Cells where neighbouring
 * members nearly coincide carry no trace information (the O(dx) gap between
 * scheme and profile would dominate) and are skipped.
 */
inline ConvergenceDiagnostic phi_map(const SimState& s, const std::vector<Profile>& family, const PhiOptions& opt = {})
{
    if (family.empty())
        throw Error(Errc::precondition, "phi map needs a nonempty family");
    for (std::size_t l = 1; l < family.size(); ++l)
        if (!(family[l].trace_plus > family[l - 1].trace_plus))
            throw Error(Errc::precondition, "family must be sorted by strictly increasing trace");
    ConvergenceDiagnostic out;
    double phi_min = std::numeric_limits<double>::infinity();
    double phi_max = -phi_min;
    std::vector<double> l1(family.size(), 0.0);
    std::vector<double> q(family.size());
    for (std::size_t j = 0; j < s.size(); ++j) {
        const double x = s.x_center(j);
        if (std::abs(x) > opt.window)
            continue;
        const double rho = s.cells[j];
        for (std::size_t l = 0; l < family.size(); ++l) {
            q[l] = family[l].grid.eval(x);
            l1[l] += std::abs(rho - q[l]) * s.dx;
        }
        if (family.size() < 2)
            continue;
        // Members are ordered, so q is nondecreasing in l; locate the bracketing pair.
        std::size_t hi = static_cast<std::size_t>(std::upper_bound(q.begin(), q.end(), rho) - q.begin());
        hi = std::clamp<std::size_t>(hi, 1, family.size() - 1);
        const std::size_t lo = hi - 1;
        const double dt = family[hi].trace_plus - family[lo].trace_plus;
        if ((q[hi] - q[lo]) < opt.min_sensitivity * dt)
            continue;
        double phi = 0.0;
        if (rho < q.front()) {
            phi = family.front().trace_plus;
            out.inside_envelope = false;
            ++out.cells_clamped;
        } else if (rho > q.back()) {
            phi = family.back().trace_plus;
            out.inside_envelope = false;
            ++out.cells_clamped;
        } else {
            phi = family[lo].trace_plus + dt * (rho - q[lo]) / (q[hi] - q[lo]);
        }
        ++out.cells_used;
        phi_min = std::min(phi_min, phi);
        phi_max = std::max(phi_max, phi);
    }
    out.phi_spread = out.cells_used ? phi_max - phi_min : 0.0;
    const auto best = std::min_element(l1.begin(), l1.end());
    out.nearest_member = static_cast<std::size_t>(best - l1.begin());
    out.l1_distance_to_nearest = *best;
    return out;
}

/// Far-field pair (rho-, rho+) as a piecewise-constant comparison state.
struct ConstantPair {
    double rho_minus = 0.0;
    double rho_plus = 0.0;
};

using Candidate = std::variant<Profile, ConstantPair>;

/// Sup distance to the candidate over cells with |x| <= window, one value per snapshot.
inline std::vector<double> persistence_metric(const std::vector<SimState>& snapshots, const Candidate& candidate,
                                              double window = 2.0)
{
    std::vector<double> out;
    out.reserve(snapshots.size());
    for (const SimState& s : snapshots) {
        double worst = 0.0;
        for (std::size_t j = 0; j < s.size(); ++j) {
            const double x = s.x_center(j);
            if (std::abs(x) > window)
                continue;
            const double ref = std::visit(
                [&](const auto& c) {
                    if constexpr (std::is_same_v<std::decay_t<decltype(c)>, Profile>)
                        return c.grid.eval(x);
                    else
                        return x < 0.0 ? c.rho_minus : c.rho_plus;
                },
                candidate);
            worst = std::max(worst, std::abs(s.cells[j] - ref));
        }
        out.push_back(worst);
    }
    return out;
}

} // namespace roughwave
