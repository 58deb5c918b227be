#pragma once

#include "roughwave/error.hpp"
#include "roughwave/grid.hpp"
#include "roughwave/model_core.hpp"
#include "roughwave/nonlocal_ops.hpp"
#include "roughwave/parallel.hpp"
#include "roughwave/roots.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <tuple>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace roughwave {

struct SolverParams {
    double residual_tolerance = 1e-12; ///< per-node bound on |G| after the solve
    double profile_tolerance = 1e-10;  ///< bound recorded with every assembled profile
    int max_newton = 50;
    double seed_amplitude = 1e-6; ///< tail perturbation, relative to rho+ - rho-*
    std::size_t max_transition_nodes = 1u << 22;
    std::size_t workers = 0; ///< family concurrency, 0 = default
};

/// Per-node record of the backward solve.
struct NodeDiagnostics {
    std::ptrdiff_t index = 0;
    int iterations = 0;
    bool bisection_fallback = false;
    double g_prime = 0.0; ///< derivative of the node equation at the root
    double residual = 0.0;
};

/// A stationary profile on a uniform grid with its defining data.
struct Profile {
    GridFunction grid;
    Model model = Model::m1;
    double fbar = 0.0;
    std::optional<CaseTag> case_tag;
    double trace_minus = 0.0;
    double trace_plus = 0.0;
    double residual_sup = 0.0;
    double residual_tolerance = 0.0;
    /// Q_i - left_anchor for x_i < 0 and Q_i - right_anchor for x_i >= 0, resolved well below round-off of Q.
    std::vector<double> offsets;
    double left_anchor = 0.0;
    double right_anchor = 0.0;
    std::vector<NodeDiagnostics> diagnostics; ///< marched nodes on x < 0
};

/// A branch on [0, x_max] together with its offsets from the right far-field state.
struct Branch {
    GridFunction grid;
    std::vector<double> offsets;
    double anchor = 0.0;
};

struct MarchResult {
    GridFunction grid;
    std::vector<double> offsets;
    std::vector<NodeDiagnostics> diagnostics;
};

namespace detail {

/*
 * The march works on offsets d = Q - c from a far-field state c with
 * kappa c v(c) = fbar, so exponentially small tails keep full relative
 * precision. The node equations are rewritten without cancellation:
 *   first model:  c [v(c + a) - v(c)] + d v(c + a) = 0,  a = A(d)
 *   second model: c dV + d (kappa- v(c) + dV) = 0,       dV = V - kappa- v(c)
 */
template <class FDF>
NodeDiagnostics solve_node(GridFunction& g, std::ptrdiff_t i, FDF&& fdf, double guess, double lo, double hi,
                           const SolverParams& params)
{
    if (fdf(hi).first < 0.0)
        throw Error(Errc::blowup, "profile would exceed density 1 at x=" + std::to_string(g.x(i)));
    RootOptions opts{1e-300, 0.0, params.max_newton, 4e-16};
    RootResult root;
    bool fallback = false;
    try {
        root = safeguarded_newton(fdf, lo, hi, guess, opts);
        fallback = root.bisections > 0;
    } catch (const Error&) {
        opts.max_iterations = 4000;
        root = safeguarded_newton(fdf, lo, hi, guess, opts);
        fallback = true;
    }
    if (!(std::abs(root.f) <= params.residual_tolerance))
        throw Error(Errc::convergence, "node equation not solved at x=" + std::to_string(g.x(i)));
    g.values[static_cast<std::size_t>(i)] = root.x;
    return {i, root.iterations, fallback, root.df, std::abs(root.f)};
}

/// First model node equation on offsets from `anchor`.
struct M1NodeSolver {
    const NonlocalOps& ops;
    const VelocityModel& v;
    double anchor;
    const SolverParams& params;

    NodeDiagnostics operator()(GridFunction& d, std::ptrdiff_t i) const
    {
        const auto& mo = ops.moments();
        const double dx = ops.dx();
        const auto m = static_cast<std::ptrdiff_t>(ops.window_cells());
        const double b0 = d.left_value(i + 1);
        double c0 = b0 * mo.first[0] / dx;
        for (std::ptrdiff_t k = 1; k < m; ++k) {
            const double a = d.right_value(i + k);
            const double b = d.left_value(i + k + 1);
            c0 += a * mo.mass[k] + (b - a) * mo.first[k] / dx;
        }
        const double c1 = mo.mass[0] - mo.first[0] / dx;
        auto fdf = [&](double q) {
            const double a = c0 + c1 * q;
            const double avg = anchor + a;
            const double va = v.eval(avg);
            return std::pair{anchor * v.increment(anchor, a) + q * va, va + (anchor + q) * v.deriv(avg) * c1};
        };
        return solve_node(d, i, fdf, b0, -anchor, 1.0 - anchor, params);
    }
};

/// Second model node equation on offsets from `anchor`; the unknown enters the first window cell.
struct M2NodeSolver {
    const NonlocalOps& ops;
    const VelocityModel& v;
    const RoadCondition& cond;
    double anchor;
    const SolverParams& params;

    NodeDiagnostics operator()(GridFunction& d, std::ptrdiff_t i) const
    {
        const double km = cond.kappa_minus();
        const double kp = cond.kappa_plus();
        const double v_anchor = v.eval(anchor);
        auto dev = [&](double p) { return std::pair{v.increment(anchor, p), v.deriv(anchor + p)}; };
        auto one = [](double) { return std::pair{1.0, 0.0}; };
        const auto m = static_cast<std::ptrdiff_t>(ops.window_cells());
        double rest = 0.0;
        for (std::ptrdiff_t k = 0; k < m; ++k) {
            const std::ptrdiff_t n = i + k;
            const double split = NonlocalOps::split_fraction(d, n);
            const auto kk = static_cast<std::size_t>(k);
            if (k > 0)
                rest += ops.weighted_cell(d.right_value(n), d.left_value(n + 1), kk, split, km, kp, dev).value;
            rest += v_anchor * ops.weighted_cell(0.0, 0.0, kk, split, 0.0, kp - km, one).value;
        }
        const double b0 = d.left_value(i + 1);
        const double split0 = NonlocalOps::split_fraction(d, i);
        auto fdf = [&](double q) {
            const VelocityCell c = ops.weighted_cell(q, b0, 0, split0, km, kp, dev);
            const double dvel = rest + c.value;
            const double vel = km * v_anchor + dvel;
            return std::pair{anchor * dvel + q * vel, vel + (anchor + q) * c.d_left};
        };
        return solve_node(d, i, fdf, b0, -anchor, 1.0 - anchor, params);
    }
};

/// Solves nodes from `from` down to `to` (inclusive), right to left.
template <class Solver>
void march_range(GridFunction& g, std::ptrdiff_t from, std::ptrdiff_t to, const Solver& solver,
                 std::vector<NodeDiagnostics>* diagnostics)
{
    for (std::ptrdiff_t i = from; i >= to; --i) {
        NodeDiagnostics d = solver(g, i);
        if (diagnostics)
            diagnostics->push_back(d);
    }
}

template <class Fn>
decltype(auto) with_solver(Model model, const NonlocalOps& ops, const VelocityModel& v, const RoadCondition& cond,
                           double anchor, const SolverParams& params, Fn&& fn)
{
    if (model == Model::m1)
        return fn(M1NodeSolver{ops, v, anchor, params});
    return fn(M2NodeSolver{ops, v, cond, anchor, params});
}

/**
 * Ratio r in (0, 1) of the geometric mode rho+ - eps r^j solving the discrete
 * linearisation v(rho+) d_j + rho+ v'(rho+) A(d)_j = 0 about a stable right state.
 */
inline double tail_ratio(const CellMoments& mo, double rho_plus, const VelocityModel& v)
{
    const double target = -v.eval(rho_plus) / (rho_plus * v.deriv(rho_plus));
    auto k_of = [&](double r) {
        double sum = 0.0;
        double p = 1.0;
        for (std::size_t k = 0; k < mo.size(); ++k) {
            sum += p * (mo.mass[k] + (r - 1.0) * mo.first[k] / mo.dx);
            p *= r;
        }
        return sum - target;
    };
    if (k_of(0.0) >= 0.0)
        throw Error(Errc::precondition, "grid too coarse to resolve the profile tail");
    return bisect(k_of, 0.0, 1.0, 1e-16, 200);
}

/// Constant branch on [0, x_max] with offsets from `anchor`.
inline Branch constant_branch(double value, double anchor, double x_max, double dx)
{
    Branch b;
    b.anchor = anchor;
    b.grid.x0 = 0.0;
    b.grid.dx = dx;
    b.grid.values.assign(static_cast<std::size_t>(std::llround(x_max / dx)) + 1, value);
    b.grid.right_padding = value;
    b.offsets.assign(b.grid.values.size(), value - anchor);
    return b;
}

} // namespace detail

namespace detail {

/**
 * Shoots a monotone branch rho+ + d_j, j = 0..n_right, with d_0 = trace - rho+.
 *
 * The tail is seeded on window_nodes + 1 nodes with the decaying mode
 * -eps r^j and marched backward with `solver`; eps is then tuned by
 * bisection so the marched branch crosses the trace exactly at j = 0.
 * Shrinking eps by a factor r shifts the branch by one node, so the search
 * runs over a single such factor. Nodes still inside the seeded tail keep
 * the mode values, whose residual is O(eps^2).
 */
template <class Solver>
Branch shoot_branch(const Solver& solver, std::ptrdiff_t window_nodes, double r, double rho_plus, double low,
                    double trace, std::ptrdiff_t n_right, double dx, const SolverParams& params)
{
    const std::ptrdiff_t m = window_nodes;
    Branch out = constant_branch(rho_plus, rho_plus, static_cast<double>(n_right) * dx, dx);
    if (trace == rho_plus)
        return out;
    auto emit = [&](auto&& offset_at) {
        for (std::ptrdiff_t n = 0; n <= n_right; ++n) {
            const double e = offset_at(n);
            out.offsets[static_cast<std::size_t>(n)] = e;
            out.grid.values[static_cast<std::size_t>(n)] = std::clamp(rho_plus + e, 0.0, 1.0);
        }
        return out;
    };

    const double eps0 = params.seed_amplitude * (rho_plus - low);
    if (!(rho_plus - eps0 < rho_plus))
        throw Error(Errc::seed_collapse, "tail perturbation below floating-point resolution");
    auto mode = [&](double eps, std::ptrdiff_t j) { return -eps * std::pow(r, static_cast<double>(j)); };
    const double target = trace - rho_plus;
    if (-target <= eps0)
        return emit([&](std::ptrdiff_t n) { return mode(-target, n); });

    // Relative index j sits at buffer node cap + j; j >= 0 is the seeded tail.
    const double decay = -std::log(r);
    std::size_t capacity = static_cast<std::size_t>(
        4.0 * std::log((rho_plus - low) / eps0) / std::max(decay, 1e-300) + 8.0 * static_cast<double>(m) + 64.0);
    capacity = std::min(capacity, params.max_transition_nodes);

    GridFunction buf;
    buf.dx = dx;
    buf.right_padding = 0.0;
    std::ptrdiff_t cap = 0;
    auto seed = [&](double eps) {
        for (std::ptrdiff_t j = 0; j <= m; ++j)
            buf.values[static_cast<std::size_t>(cap + j)] = mode(eps, j);
    };
    auto at = [&](std::ptrdiff_t j) { return buf.values[static_cast<std::size_t>(cap + j)]; };

    std::ptrdiff_t crossing = 0;
    for (;;) {
        cap = static_cast<std::ptrdiff_t>(capacity);
        buf.x0 = -static_cast<double>(cap) * dx;
        buf.values.assign(static_cast<std::size_t>(cap + m) + 1, 0.0);
        seed(eps0);
        bool found = false;
        for (std::ptrdiff_t j = -1; j >= -cap; --j) {
            solver(buf, cap + j);
            if (at(j) <= target) {
                crossing = j;
                found = true;
                break;
            }
            if (!(at(j) < at(j + 1))) {
                if (at(j) >= -0.5 * eps0)
                    throw Error(Errc::seed_collapse, "marched tail returned to the constant state");
                throw Error(Errc::non_monotone,
                            "homogeneous profile lost monotonicity at relative node " + std::to_string(j));
            }
        }
        if (found)
            break;
        if (capacity >= params.max_transition_nodes)
            throw Error(Errc::inadmissible_trace, "trace " + std::to_string(trace) + " too close to the left asymptote");
        capacity = std::min(2 * capacity, params.max_transition_nodes);
    }

    auto value_at_crossing = [&](double log_eps) {
        seed(std::exp(log_eps));
        march_range(buf, cap - 1, cap + crossing, solver, nullptr);
        return at(crossing) - target;
    };
    const double hi = std::log(eps0);
    const double lo = hi + std::log(r);
    const double log_eps = bisect(value_at_crossing, lo, hi, 1e-15, 200);
    const double eps = std::exp(log_eps);
    value_at_crossing(log_eps);

    return emit([&](std::ptrdiff_t n) {
        const std::ptrdiff_t j = n + crossing;
        return j < 0 ? at(j) : mode(eps, j);
    });
}

} // namespace detail

/**
 * Branch x >= 0 of the constant-coefficient profile (speed factor kappa,
 * right state rho+ > rho-hat) passing through `trace` at x = 0, on [0, x_max].
 */
inline Branch homogeneous_branch(Model model, double kappa, double rho_plus, double trace, double x_max,
                                 const VelocityModel& v, const NonlocalOps& ops, const SolverParams& params)
{
    if (!(rho_plus > v.stagnation()))
        throw Error(Errc::precondition, "homogeneous profile needs a stable right state rho+ > rho-hat");
    const double low = conjugate_density(rho_plus, v);
    if (!(trace > low && trace <= rho_plus))
        throw Error(Errc::inadmissible_trace, "trace " + std::to_string(trace) + " outside (" + std::to_string(low) +
                                                  ", " + std::to_string(rho_plus) + "]");
    const double dx = ops.dx();
    const auto n_right = static_cast<std::ptrdiff_t>(std::llround(x_max / dx));
    const auto m = static_cast<std::ptrdiff_t>(ops.window_cells());
    const double r = trace == rho_plus ? 0.5 : detail::tail_ratio(ops.moments(), rho_plus, v);
    const RoadCondition flat(kappa, kappa);
    return detail::with_solver(model, ops, v, flat, rho_plus, params, [&](const auto& solver) {
        return detail::shoot_branch(solver, m, r, rho_plus, low, trace, n_right, dx, params);
    });
}

/**
 * Extends a right branch (grid starting at x = 0) to [x_min, x_max] by the
 * backward march. `trace_minus` is the left trace for the first model; the
 * second model passes std::nullopt and the profile stays continuous.
 * `left_anchor` is the left far-field state, the low root of
 * kappa- rho v(rho) = fbar.
 */
inline MarchResult march_left(Model model, const Branch& right, std::optional<double> trace_minus,
                              double left_anchor, const RoadCondition& cond, const VelocityModel& v,
                              const NonlocalOps& ops, double x_min, const SolverParams& params)
{
    if (std::abs(right.grid.x0) > 1e-12)
        throw Error(Errc::precondition, "seed branch must start at x=0");
    if (right.offsets.size() != right.grid.values.size())
        throw Error(Errc::precondition, "branch offsets do not match its grid");
    GridFunction d = make_grid(x_min, right.grid.x_last(), right.grid.dx);
    const auto z = *d.zero_index();
    for (std::size_t n = 0; n < right.grid.values.size(); ++n)
        d.values[static_cast<std::size_t>(z) + n] = right.grid.values[n] - left_anchor;
    if (right.grid.right_padding)
        d.right_padding = *right.grid.right_padding - left_anchor;
    if (trace_minus) {
        if (!(*trace_minus >= 0.0 && *trace_minus <= 1.0))
            throw Error(Errc::blowup, "left trace " + std::to_string(*trace_minus) + " outside [0,1]");
        d.left_trace_at_zero = *trace_minus - left_anchor;
    }

    MarchResult out;
    out.diagnostics.reserve(static_cast<std::size_t>(z));
    detail::with_solver(model, ops, v, cond, left_anchor, params,
                        [&](const auto& solver) { detail::march_range(d, z - 1, 0, solver, &out.diagnostics); });

    GridFunction g = d;
    g.left_trace_at_zero = trace_minus;
    g.right_padding = right.grid.right_padding;
    out.offsets.resize(g.values.size());
    for (std::ptrdiff_t i = 0; i < z; ++i) {
        const auto u = static_cast<std::size_t>(i);
        out.offsets[u] = d.values[u];
        g.values[u] = std::clamp(left_anchor + d.values[u], 0.0, 1.0);
    }
    for (std::size_t n = 0; n < right.grid.values.size(); ++n) {
        g.values[static_cast<std::size_t>(z) + n] = right.grid.values[n];
        out.offsets[static_cast<std::size_t>(z) + n] = right.offsets[n];
    }
    g.validate();
    out.grid = std::move(g);
    return out;
}

/// Sup-norm residual of the stationary equation at every node of the profile.
inline double profile_residual(const GridFunction& g, Model model, double fbar, const RoadCondition& cond,
                               const VelocityModel& v, const NonlocalOps& ops)
{
    double worst = 0.0;
    for (std::ptrdiff_t i = 0; i < g.size(); ++i) {
        double res = 0.0;
        if (model == Model::m1) {
            const double avg = v.eval(ops.average_density(g, i));
            const int side = g.node_side(i);
            const double q = g.values[static_cast<std::size_t>(i)];
            res = (side < 0 ? cond.kappa_minus() : cond.kappa_plus()) * q * avg - fbar;
            if (side == 0 && g.left_trace_at_zero)
                res = std::max(std::abs(res), std::abs(cond.kappa_minus() * *g.left_trace_at_zero * avg - fbar));
        } else {
            res = g.values[static_cast<std::size_t>(i)] * ops.average_velocity(g, i, cond, v) - fbar;
        }
        worst = std::max(worst, std::abs(res));
    }
    return worst;
}

inline double profile_residual(const Profile& p, const RoadCondition& cond, const VelocityModel& v,
                               const NonlocalOps& ops)
{
    return profile_residual(p.grid, p.model, p.fbar, cond, v, ops);
}

/**
 * Smallest pointwise gap Q_{l+1} - Q_l between consecutive members. Offsets
 * are compared when the members share anchors, so gaps far below the
 * round-off of Q stay visible. Both traces at x = 0 take part.
 */
inline double family_min_gap(const std::vector<Profile>& family)
{
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l + 1 < family.size(); ++l) {
        const Profile& p = family[l];
        const Profile& q = family[l + 1];
        const GridFunction& a = p.grid;
        const GridFunction& b = q.grid;
        if (a.size() != b.size() || a.x0 != b.x0)
            throw Error(Errc::precondition, "family members live on different grids");
        const bool exact = p.offsets.size() == a.values.size() && q.offsets.size() == b.values.size() &&
                           p.left_anchor == q.left_anchor && p.right_anchor == q.right_anchor;
        for (std::ptrdiff_t i = 0; i < a.size(); ++i) {
            const auto u = static_cast<std::size_t>(i);
            gap = std::min(gap, exact ? q.offsets[u] - p.offsets[u] : b.values[u] - a.values[u]);
            if (a.node_side(i) == 0 && a.left_trace_at_zero && b.left_trace_at_zero)
                gap = std::min(gap, *b.left_trace_at_zero - *a.left_trace_at_zero);
        }
    }
    return gap;
}

struct LocalMax {
    double x = 0.0;
    double value = 0.0;
};

/// Strict local maxima at nodes with x < x_upper whose prominence over both neighbours exceeds min_rise.
inline std::vector<LocalMax> local_maxima(const GridFunction& g, double x_upper, double min_rise = 1e-12)
{
    std::vector<LocalMax> out;
    for (std::ptrdiff_t i = g.size() - 2; i >= 1; --i) {
        if (!(g.x(i) < x_upper))
            continue;
        const double q = g.values[static_cast<std::size_t>(i)];
        const double ql = g.values[static_cast<std::size_t>(i - 1)];
        const double qr = g.left_value(i + 1);
        if (q > ql + min_rise && q >= qr && q > std::min(ql, qr) + min_rise)
            out.push_back({g.x(i), q});
    }
    return out;
}

/// Physical and numerical inputs of a single case.
struct CaseInputs {
    Model model = Model::m1;
    RoadCondition cond{2.0, 1.0};
    double rho_minus = 0.0;
    double rho_plus = 0.0;
    VelocityModel v = VelocityModel::lwr();
    Kernel kernel = Kernel::linear(0.2);
    double dx = 0.005;
    double x_min = -3.0;
    double x_max = 3.0;

    /// Flux level carried by the right state; the left anchor is solved at this level.
    double fbar() const { return flux(cond.kappa_plus(), rho_plus, v); }
    double left_anchor() const { return detail::flux_root(cond.kappa_minus(), fbar(), v, false); }
    CaseTag tag() const { return classify(cond, rho_minus, rho_plus, v, model); }
};

struct FamilyFailure {
    double trace = 0.0;
    Errc code = Errc::convergence;
    std::string message;
};

struct FamilyResult {
    std::vector<Profile> profiles; ///< sorted by trace
    std::vector<FamilyFailure> failures;
};

namespace detail {

inline void require_grid(const CaseInputs& in)
{
    if (!(in.x_min < 0.0 && in.x_max > 0.0))
        throw Error(Errc::precondition, "profile domain must contain x=0 in its interior");
    (void)in.kernel.cells_per_horizon(in.dx);
    if (in.x_max < in.kernel.horizon())
        throw Error(Errc::precondition, "profile domain must extend at least one horizon right of 0");
}

/// Builds one profile per trace concurrently; failures are collected per trace.
/// Largest t in [lo, hi] with build(t) not blowing up, to within tol; build(lo) must succeed.
template <class Build>
double last_buildable(double lo, double hi, double tol, Build&& build)
{
    auto ok = [&](double t) {
        try {
            build(t);
            return true;
        } catch (const Error& e) {
            if (e.code() != Errc::blowup)
                throw;
            return false;
        }
    };
    if (ok(hi))
        return hi;
    if (!ok(lo))
        throw Error(Errc::blowup, "no member of the family stays below density 1");
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi)
            break;
        (ok(mid) ? lo : hi) = mid;
    }
    return lo;
}

template <class Build>
FamilyResult run_family(const std::vector<double>& traces, std::size_t workers, Build&& build)
{
    std::vector<std::optional<Profile>> slots(traces.size());
    std::vector<std::optional<FamilyFailure>> errors(traces.size());
    parallel_for(traces.size(), workers == 0 ? default_workers() : workers, [&](std::size_t l) {
        try {
            slots[l] = build(traces[l]);
        } catch (const Error& e) {
            errors[l] = FamilyFailure{traces[l], e.code(), e.what()};
        }
    });
    FamilyResult out;
    for (std::size_t l = 0; l < traces.size(); ++l) {
        if (slots[l])
            out.profiles.push_back(std::move(*slots[l]));
        if (errors[l])
            out.failures.push_back(std::move(*errors[l]));
    }
    std::stable_sort(out.profiles.begin(), out.profiles.end(),
                     [](const Profile& a, const Profile& b) { return a.trace_plus < b.trace_plus; });
    return out;
}

} // namespace detail

} // namespace roughwave
