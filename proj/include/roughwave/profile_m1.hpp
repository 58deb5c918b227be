#pragma once

#include "roughwave/profile.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace roughwave {

/**
 * Homogeneous profile W of the first model on [-L, L] for constant speed
 * factor kappa, normalised so W(0) is the midpoint of its two asymptotes.
 */
inline Profile build_homogeneous_profile(double kappa, double rho_plus, const VelocityModel& v, const Kernel& kernel,
                                         double dx, double half_length, const SolverParams& params = {})
{
    if (!(rho_plus > v.stagnation()))
        throw Error(Errc::precondition, "homogeneous profile needs rho+ > rho-hat");
    const NonlocalOps ops(kernel, dx);
    const RoadCondition flat(kappa, kappa);
    const double low = conjugate_density(rho_plus, v);
    const double mid = 0.5 * (low + rho_plus);
    const double fbar = kappa * rho_plus * v.eval(rho_plus);
    Branch right = homogeneous_branch(Model::m1, kappa, rho_plus, mid, half_length, v, ops, params);
    MarchResult left = march_left(Model::m1, right, std::nullopt, low, flat, v, ops, -half_length, params);

    Profile p;
    p.grid = std::move(left.grid);
    p.offsets = std::move(left.offsets);
    p.left_anchor = low;
    p.right_anchor = rho_plus;
    p.model = Model::m1;
    p.fbar = fbar;
    p.trace_minus = mid;
    p.trace_plus = mid;
    p.diagnostics = std::move(left.diagnostics);
    p.residual_sup = profile_residual(p, flat, v, ops);
    p.residual_tolerance = params.profile_tolerance;
    return p;
}

/**
 * Backward march of the first model: `seed` covers [0, x_max] and holds
 * Q(0+) at x = 0; the jump trace Q(0-) is supplied separately. The left
 * far-field state defaults to the low root of kappa- rho v(rho) = fbar.
 */
inline MarchResult march_backward(const GridFunction& seed, double trace_minus, double fbar, const RoadCondition& cond,
                                  const VelocityModel& v, const Kernel& kernel, double x_min,
                                  const SolverParams& params = {}, std::optional<double> left_anchor = std::nullopt)
{
    const double anchor = left_anchor ? *left_anchor : detail::flux_root(cond.kappa_minus(), fbar, v, false);
    const double right_anchor = seed.right_padding ? *seed.right_padding : seed.values.back();
    Branch branch{seed, {}, right_anchor};
    for (double q : seed.values)
        branch.offsets.push_back(q - right_anchor);
    const NonlocalOps ops(kernel, seed.dx);
    return march_left(Model::m1, branch, trace_minus, anchor, cond, v, ops, x_min, params);
}

namespace detail {

inline Profile assemble_m1(const CaseInputs& in, const NonlocalOps& ops, const Branch& right, double trace_plus,
                           const CaseTag& tag, const SolverParams& params)
{
    const double fbar = in.fbar();
    const double trace_minus = in.cond.kappa_plus() * trace_plus / in.cond.kappa_minus();
    if (trace_minus > 1.0)
        throw Error(Errc::inadmissible_trace, "left trace kappa+ Q(0+)/kappa- exceeds 1");
    const double anchor = in.left_anchor();
    MarchResult left = march_left(Model::m1, right, trace_minus, anchor, in.cond, in.v, ops, in.x_min, params);
    Profile p;
    p.grid = std::move(left.grid);
    p.offsets = std::move(left.offsets);
    p.left_anchor = anchor;
    p.right_anchor = right.anchor;
    p.model = Model::m1;
    p.fbar = fbar;
    p.case_tag = tag;
    p.trace_minus = trace_minus;
    p.trace_plus = trace_plus;
    p.diagnostics = std::move(left.diagnostics);
    p.residual_sup = profile_residual(p, in.cond, in.v, ops);
    p.residual_tolerance = params.profile_tolerance;
    if (!(p.residual_sup <= p.residual_tolerance))
        throw Error(Errc::convergence, "profile residual " + std::to_string(p.residual_sup) + " above tolerance");
    return p;
}

/// Right branch through `trace` for an infinite-family case of either model.
inline Branch family_branch(const CaseInputs& in, const NonlocalOps& ops, double trace, const SolverParams& params)
{
    const double low = conjugate_density(in.rho_plus, in.v);
    if (trace == low)
        return constant_branch(low, in.rho_plus, in.x_max, in.dx);
    return homogeneous_branch(in.model, in.cond.kappa_plus(), in.rho_plus, trace, in.x_max, in.v, ops, params);
}

} // namespace detail

/// Admissible range [lo, hi] of Q(0+) (or P(0)) for an infinite-family case; open ends flagged.
struct TraceRange {
    double lo = 0.0;
    double hi = 0.0;
    bool lo_open = true;
    bool hi_open = false;

    bool contains(double t) const
    {
        return (lo_open ? t > lo : t >= lo) && (hi_open ? t < hi : t <= hi);
    }
};

inline TraceRange admissible_traces(const CaseInputs& in)
{
    const CaseTag tag = in.tag();
    const double low = conjugate_density(in.rho_plus, in.v);
    switch (tag.letter()) {
    case 'A':
    case 'C':
        return {low, in.rho_plus, true, false};
    case 'B': {
        const double cap = in.cond.kappa_minus() / in.cond.kappa_plus();
        if (cap < in.rho_plus)
            return {low, cap, false, false};
        return {low, in.rho_plus, false, true};
    }
    case 'D':
        return {low, in.rho_plus, false, true};
    default:
        throw Error(Errc::precondition, "case " + tag.label + " has no profile family");
    }
}

/// One profile per admissible Q(0+) for cases A1 and B1.
inline FamilyResult build_profile_family(const CaseInputs& in, const std::vector<double>& traces,
                                         const SolverParams& params = {})
{
    detail::require_grid(in);
    if (in.model != Model::m1)
        throw Error(Errc::precondition, "build_profile_family expects the first model");
    const CaseTag tag = in.tag();
    if (tag.label != "A1" && tag.label != "B1")
        throw Error(Errc::precondition, "profile families exist only for A1 and B1, not " + tag.label);
    const TraceRange range = admissible_traces(in);
    const NonlocalOps ops(in.kernel, in.dx);
    return detail::run_family(traces, params.workers, [&](double t) {
        if (!range.contains(t))
            throw Error(Errc::inadmissible_trace, "trace " + std::to_string(t) + " outside the admissible range");
        return detail::assemble_m1(in, ops, detail::family_branch(in, ops, t, params), t, tag, params);
    });
}

/**
 * Largest admissible Q(0+) whose profile exists, to within tol. Below it the
 * left part lingers longer and longer near the conjugate left state before
 * relaxing to rho-, which is where oscillating members are found.
 */
inline double family_upper_limit(const CaseInputs& in, const SolverParams& params = {}, double tol = 1e-13)
{
    const TraceRange range = admissible_traces(in);
    SolverParams serial = params;
    serial.workers = 1;
    auto build = [&](double t) {
        const FamilyResult f = build_profile_family(in, {t}, serial);
        if (!f.failures.empty())
            throw Error(f.failures.front().code, f.failures.front().message);
    };
    const double hi = range.hi_open ? std::nextafter(range.hi, range.lo) : range.hi;
    return detail::last_buildable(range.lo, hi, tol, build);
}

/// The unique profile of cases A2/B2: constant rho+ on x > 0 and the marched left part.
inline Profile build_unique_profile(const CaseInputs& in, const SolverParams& params = {})
{
    detail::require_grid(in);
    if (in.model != Model::m1)
        throw Error(Errc::precondition, "build_unique_profile expects the first model");
    const CaseTag tag = in.tag();
    if (tag.multiplicity == Multiplicity::none)
        throw Error(Errc::no_profile, "no stationary profiles exist for this case (" + tag.label + ")");
    if (tag.digit() != 2)
        throw Error(Errc::precondition, "case " + tag.label + " does not have a unique profile");
    const NonlocalOps ops(in.kernel, in.dx);
    return detail::assemble_m1(in, ops, detail::constant_branch(in.rho_plus, in.rho_plus, in.x_max, in.dx), in.rho_plus, tag,
                               params);
}

/// Sup-norm residual of the first model's stationary equation.
inline double residual(const Profile& p, const RoadCondition& cond, const VelocityModel& v, const Kernel& kernel)
{
    return profile_residual(p, cond, v, NonlocalOps(kernel, p.grid.dx));
}

} // namespace roughwave
