#pragma once

#include "roughwave/error.hpp"

#include <cmath>
#include <string>
#include <tuple>
#include <utility>

namespace roughwave {

struct RootOptions {
    double x_tolerance = 1e-13;
    double f_tolerance = 0.0;
    int max_iterations = 100;
    double relative_tolerance = 0.0; ///< added to x_tolerance, scaled by |x|
};

struct RootResult {
    double x = 0.0;
    double f = 0.0;
    double df = 0.0;
    int iterations = 0;
    int bisections = 0;
};

/**
 * Newton iteration kept inside a sign-changing bracket [lo, hi].
 *
 * `fdf(x)` returns the pair (f(x), f'(x)). Whenever the Newton step leaves the
 * bracket or fails to halve the previous step, a bisection step is taken
 * instead (the classical rtsafe safeguard). Endpoints with |f| <= f_tolerance
 * are accepted as roots directly.
 */
template <class FDF>
RootResult safeguarded_newton(FDF&& fdf, double lo, double hi, double guess, const RootOptions& opts = {})
{
    auto [flo, dflo] = fdf(lo);
    if (std::abs(flo) <= opts.f_tolerance || flo == 0.0)
        return {lo, flo, dflo, 0, 0};
    auto [fhi, dfhi] = fdf(hi);
    if (std::abs(fhi) <= opts.f_tolerance || fhi == 0.0)
        return {hi, fhi, dfhi, 0, 0};
    if ((flo > 0.0) == (fhi > 0.0)) {
        throw Error(Errc::convergence, "root not bracketed in [" + std::to_string(lo) + ", " +
                                           std::to_string(hi) + "]");
    }

    // Orient so that f(neg) < 0 < f(pos).
    double neg = flo < 0.0 ? lo : hi;
    double pos = flo < 0.0 ? hi : lo;

    double x = (guess > std::min(lo, hi) && guess < std::max(lo, hi)) ? guess : 0.5 * (lo + hi);
    double step_old = std::abs(hi - lo);
    double step = step_old;
    auto [f, df] = fdf(x);

    RootResult out;
    for (int it = 1; it <= opts.max_iterations; ++it) {
        out.iterations = it;
        const bool newton_leaves = ((x - pos) * df - f) * ((x - neg) * df - f) > 0.0;
        const bool newton_slow = std::abs(2.0 * f) > std::abs(step_old * df);
        if (df == 0.0 || newton_leaves || newton_slow) {
            step_old = step;
            step = 0.5 * (pos - neg);
            x = neg + step;
            ++out.bisections;
        } else {
            step_old = step;
            step = f / df;
            const double prev = x;
            x -= step;
            if (x == prev) {
                out.x = x;
                out.f = f;
                out.df = df;
                return out;
            }
        }
        std::tie(f, df) = fdf(x);
        if (f == 0.0 || std::abs(step) < opts.x_tolerance + opts.relative_tolerance * std::abs(x) || std::abs(f) <= opts.f_tolerance) {
            out.x = x;
            out.f = f;
            out.df = df;
            return out;
        }
        if (f < 0.0)
            neg = x;
        else
            pos = x;
    }
    throw Error(Errc::convergence, "safeguarded Newton exceeded " + std::to_string(opts.max_iterations) +
                                       " iterations near x=" + std::to_string(x));
}

/// Plain bisection on a sign-changing bracket; used where no derivative is at hand.
template <class F>
double bisect(F&& f, double lo, double hi, double x_tolerance = 1e-15, int max_iterations = 200)
{
    double flo = f(lo);
    if (flo == 0.0)
        return lo;
    double fhi = f(hi);
    if (fhi == 0.0)
        return hi;
    if ((flo > 0.0) == (fhi > 0.0))
        throw Error(Errc::convergence, "bisection: root not bracketed");
    for (int it = 0; it < max_iterations && std::abs(hi - lo) > x_tolerance; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (fm == 0.0)
            return mid;
        if ((fm > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

} // namespace roughwave
