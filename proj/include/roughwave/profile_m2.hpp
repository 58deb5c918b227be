#pragma once

#include "roughwave/profile.hpp"
#include "roughwave/profile_m1.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace roughwave {

/// One-sided slopes of an M2 profile at x = 0 against the predicted derivative jump.
struct KinkReport {
    double left_slope = 0.0;
    double right_slope = 0.0;
    double predicted_jump = 0.0;
    double observed_jump = 0.0;
    double relative_error = 0.0;
};

/// Homogeneous profile of the second model on [-L, L], W(0) at the midpoint of the asymptotes.
inline Profile build_homogeneous_profile_m2(double kappa, double rho_plus, const VelocityModel& v,
                                            const Kernel& kernel, double dx, double half_length,
                                            const SolverParams& params = {})
{
    if (!(rho_plus > v.stagnation()))
        throw Error(Errc::precondition, "homogeneous profile needs rho+ > rho-hat");
    const NonlocalOps ops(kernel, dx);
    const RoadCondition flat(kappa, kappa);
    const double mid = 0.5 * (conjugate_density(rho_plus, v) + rho_plus);
    const double fbar = kappa * rho_plus * v.eval(rho_plus);
    const double low = conjugate_density(rho_plus, v);
    Branch right = homogeneous_branch(Model::m2, kappa, rho_plus, mid, half_length, v, ops, params);
    MarchResult left = march_left(Model::m2, right, std::nullopt, low, flat, v, ops, -half_length, params);

    Profile p;
    p.grid = std::move(left.grid);
    p.offsets = std::move(left.offsets);
    p.left_anchor = low;
    p.right_anchor = rho_plus;
    p.model = Model::m2;
    p.fbar = fbar;
    p.trace_minus = mid;
    p.trace_plus = mid;
    p.diagnostics = std::move(left.diagnostics);
    p.residual_sup = profile_residual(p, flat, v, ops);
    p.residual_tolerance = params.profile_tolerance;
    return p;
}

/// Backward march of the second model from a continuous seed on [0, x_max].
inline MarchResult march_backward_m2(const GridFunction& seed, double fbar, const RoadCondition& cond,
                                     const VelocityModel& v, const Kernel& kernel, double x_min,
                                     const SolverParams& params = {}, std::optional<double> left_anchor = std::nullopt)
{
    if (seed.left_trace_at_zero)
        throw Error(Errc::precondition, "second-model seed must be continuous");
    const double anchor = left_anchor ? *left_anchor : detail::flux_root(cond.kappa_minus(), fbar, v, false);
    const double right_anchor = seed.right_padding ? *seed.right_padding : seed.values.back();
    Branch branch{seed, {}, right_anchor};
    for (double q : seed.values)
        branch.offsets.push_back(q - right_anchor);
    const NonlocalOps ops(kernel, seed.dx);
    return march_left(Model::m2, branch, std::nullopt, anchor, cond, v, ops, x_min, params);
}

namespace detail {

inline Profile assemble_m2(const CaseInputs& in, const NonlocalOps& ops, const Branch& right, double trace,
                           const CaseTag& tag, const SolverParams& params)
{
    const double fbar = in.fbar();
    const double anchor = in.left_anchor();
    MarchResult left = march_left(Model::m2, right, std::nullopt, anchor, in.cond, in.v, ops, in.x_min, params);
    Profile p;
    p.grid = std::move(left.grid);
    p.offsets = std::move(left.offsets);
    p.left_anchor = anchor;
    p.right_anchor = right.anchor;
    p.model = Model::m2;
    p.fbar = fbar;
    p.case_tag = tag;
    p.trace_minus = trace;
    p.trace_plus = trace;
    p.diagnostics = std::move(left.diagnostics);
    p.residual_sup = profile_residual(p, in.cond, in.v, ops);
    p.residual_tolerance = params.profile_tolerance;
    if (!(p.residual_sup <= p.residual_tolerance))
        throw Error(Errc::convergence, "profile residual " + std::to_string(p.residual_sup) + " above tolerance");
    return p;
}

} // namespace detail

/// The unique profile of cases C2/D2: constant rho+ on x > 0.
inline Profile build_unique_profile_m2(const CaseInputs& in, const SolverParams& params = {})
{
    detail::require_grid(in);
    if (in.model != Model::m2)
        throw Error(Errc::precondition, "build_unique_profile_m2 expects the second model");
    const CaseTag tag = in.tag();
    if (tag.multiplicity == Multiplicity::none)
        throw Error(Errc::no_profile, "no stationary profiles exist for this case (" + tag.label + ")");
    if (tag.digit() != 2)
        throw Error(Errc::precondition, "case " + tag.label + " does not have a unique profile");
    const NonlocalOps ops(in.kernel, in.dx);
    return detail::assemble_m2(in, ops, detail::constant_branch(in.rho_plus, in.rho_plus, in.x_max, in.dx), in.rho_plus, tag,
                               params);
}

/// One profile per admissible P(0) for cases C1 and D1; C2/D2 inputs yield their unique profile.
inline FamilyResult build_profile_family_m2(const CaseInputs& in, const std::vector<double>& traces,
                                            const SolverParams& params = {})
{
    detail::require_grid(in);
    if (in.model != Model::m2)
        throw Error(Errc::precondition, "build_profile_family_m2 expects the second model");
    const CaseTag tag = in.tag();
    if (tag.digit() == 2) {
        FamilyResult out;
        out.profiles.push_back(build_unique_profile_m2(in, params));
        return out;
    }
    if (tag.label != "C1" && tag.label != "D1")
        throw Error(Errc::no_profile, "no stationary profile family exists for case " + tag.label);
    const TraceRange range = admissible_traces(in);
    const NonlocalOps ops(in.kernel, in.dx);
    return detail::run_family(traces, params.workers, [&](double t) {
        if (!range.contains(t))
            throw Error(Errc::inadmissible_trace, "trace " + std::to_string(t) + " outside the admissible range");
        return detail::assemble_m2(in, ops, detail::family_branch(in, ops, t, params), t, tag, params);
    });
}

/// Largest admissible P(0) whose second-model profile exists, to within tol.
inline double family_upper_limit_m2(const CaseInputs& in, const SolverParams& params = {}, double tol = 1e-13)
{
    const TraceRange range = admissible_traces(in);
    SolverParams serial = params;
    serial.workers = 1;
    auto build = [&](double t) {
        const FamilyResult f = build_profile_family_m2(in, {t}, serial);
        if (!f.failures.empty())
            throw Error(f.failures.front().code, f.failures.front().message);
    };
    const double hi = range.hi_open ? std::nextafter(range.hi, range.lo) : range.hi;
    return detail::last_buildable(range.lo, hi, tol, build);
}

/// Compares the one-sided slopes at x = 0 with the derivative jump (kappa+ - kappa-) P v(P) w(0) / V.
inline KinkReport kink_certificate(const Profile& p, const RoadCondition& cond, const VelocityModel& v,
                                   const Kernel& kernel)
{
    const GridFunction& g = p.grid;
    if (p.model != Model::m2 || g.left_trace_at_zero)
        throw Error(Errc::precondition, "kink certificate expects a continuous second-model profile");
    const auto z = g.zero_index();
    if (!z || *z < 2 || *z + 2 >= g.size())
        throw Error(Errc::precondition, "x=0 must be an interior node with two neighbours on each side");
    const NonlocalOps ops(kernel, g.dx);
    auto at = [&](std::ptrdiff_t i) { return g.values[static_cast<std::size_t>(i)]; };
    const std::ptrdiff_t i0 = *z;
    const double p0 = at(i0);
    KinkReport r;
    r.right_slope = (-3.0 * p0 + 4.0 * at(i0 + 1) - at(i0 + 2)) / (2.0 * g.dx);
    r.left_slope = (3.0 * p0 - 4.0 * at(i0 - 1) + at(i0 - 2)) / (2.0 * g.dx);
    r.observed_jump = r.right_slope - r.left_slope;
    const double vel = ops.average_velocity(g, i0, cond, v);
    r.predicted_jump = (cond.kappa_plus() - cond.kappa_minus()) * p0 * v.eval(p0) * kernel.at_zero() / vel;
    if (std::abs(r.predicted_jump) < 1e-14)
        throw Error(Errc::degenerate, "predicted slope jump vanishes: no kink to certify");
    r.relative_error = std::abs(r.observed_jump - r.predicted_jump) / std::abs(r.predicted_jump);
    return r;
}

/// Sup-norm residual |P_i V(x_i) - fbar| of the second model.
inline double residual_m2(const Profile& p, const RoadCondition& cond, const VelocityModel& v, const Kernel& kernel)
{
    return profile_residual(p.grid, Model::m2, p.fbar, cond, v, NonlocalOps(kernel, p.grid.dx));
}

} // namespace roughwave
