#pragma once

#include "roughwave/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace roughwave {

enum class Side { left, right };

/**
 * Nodal values on a uniform grid x_i = x0 + i dx, reconstructed as the
 * piecewise-linear interpolant. A function that jumps at x = 0 stores the
 * right trace Q(0+) in `values` and the left trace Q(0-) separately.
 *
 * Windows that run past the last node read `right_padding` (the right
 * far-field constant) when it is set.
 */
struct GridFunction {
    double x0 = 0.0;
    double dx = 1.0;
    std::vector<double> values;
    std::optional<double> left_trace_at_zero;
    std::optional<double> right_padding;

    std::ptrdiff_t size() const noexcept { return static_cast<std::ptrdiff_t>(values.size()); }
    double x(std::ptrdiff_t i) const noexcept { return x0 + static_cast<double>(i) * dx; }
    double x_last() const noexcept { return x(size() - 1); }

    /// Index of the node at x = 0, if the grid has one.
    std::optional<std::ptrdiff_t> zero_index() const noexcept
    {
        const double pos = -x0 / dx;
        const double r = std::round(pos);
        if (std::abs(pos - r) > 1e-9 * std::max(1.0, std::abs(pos)))
            return std::nullopt;
        return static_cast<std::ptrdiff_t>(r);
    }

    /// Sign of node i relative to x = 0, robust to rounding in x0.
    int node_side(std::ptrdiff_t i) const noexcept
    {
        if (auto z = zero_index())
            return i < *z ? -1 : (i > *z ? 1 : 0);
        const double xi = x(i);
        return xi < 0.0 ? -1 : 1;
    }

    /// Value at node i seen from the right (start of the cell [x_i, x_{i+1}]).
    double right_value(std::ptrdiff_t i) const
    {
        if (i >= 0 && i < size())
            return values[static_cast<std::size_t>(i)];
        if (i >= size() && right_padding)
            return *right_padding;
        throw Error(Errc::window_out_of_range,
                    "node " + std::to_string(i) + " outside the stored grid and no padding supplied");
    }

    /// Value at node i seen from the left (end of the cell [x_{i-1}, x_i]).
    double left_value(std::ptrdiff_t i) const
    {
        if (left_trace_at_zero && i >= 0 && i < size()) {
            if (auto z = zero_index(); z && *z == i)
                return *left_trace_at_zero;
        }
        return right_value(i);
    }

    /// Linear interpolant at x; at x = 0 the side picks the trace. Constant extension outside the grid.
    double eval(double xq, Side side) const
    {
        if (values.empty())
            throw Error(Errc::precondition, "empty grid function");
        if (xq <= x0)
            return xq < x0 || side == Side::right ? values.front() : left_value(0);
        if (xq >= x_last()) {
            if (xq > x_last())
                return right_padding ? *right_padding : values.back();
            return side == Side::left ? left_value(size() - 1) : values.back();
        }
        const double pos = (xq - x0) / dx;
        auto c = static_cast<std::ptrdiff_t>(std::floor(pos));
        double theta = pos - static_cast<double>(c);
        if (theta < 1e-12 && c > 0) {
            return side == Side::left ? left_value(c) : right_value(c);
        }
        if (theta > 1.0 - 1e-12) {
            return side == Side::left ? left_value(c + 1) : right_value(c + 1);
        }
        const double a = right_value(c);
        const double b = left_value(c + 1);
        return a + (b - a) * theta;
    }

    double eval(double xq) const { return eval(xq, xq < 0.0 ? Side::left : Side::right); }

    /// Exact integral of the reconstruction over [a, b] (constant extension outside the grid).
    double integral(double a, double b) const
    {
        if (b <= a)
            return 0.0;
        double total = 0.0;
        double lo = a;
        while (lo < b) {
            double hi = b;
            if (lo < x0) {
                hi = std::min(b, x0);
                total += (hi - lo) * values.front();
            } else if (lo >= x_last()) {
                total += (b - lo) * (right_padding ? *right_padding : values.back());
                break;
            } else {
                auto c = std::min(static_cast<std::ptrdiff_t>(std::floor((lo - x0) / dx)), size() - 2);
                // Rounding can place lo on or past node c + 1.
                while (c + 2 < size() && x(c + 1) <= lo)
                    ++c;
                hi = std::min(b, x(c + 1));
                const double va = right_value(c);
                const double vb = left_value(c + 1);
                const double ta = (lo - x(c)) / dx;
                const double tb = (hi - x(c)) / dx;
                const double fa = va + (vb - va) * ta;
                const double fb = va + (vb - va) * tb;
                total += 0.5 * (fa + fb) * (hi - lo);
            }
            if (hi <= lo)
                break;
            lo = hi;
        }
        return total;
    }

    double cell_average(double a, double b) const { return integral(a, b) / (b - a); }

    /// Values (and trace) lie in [0, 1]; a trace requires a node at x = 0.
    void validate() const
    {
        if (!(dx > 0.0))
            throw Error(Errc::precondition, "grid spacing must be positive");
        for (double q : values)
            if (!(q >= 0.0 && q <= 1.0))
                throw Error(Errc::domain, "grid value " + std::to_string(q) + " outside [0,1]");
        if (left_trace_at_zero) {
            if (!zero_index() || *zero_index() < 0 || *zero_index() >= size())
                throw Error(Errc::precondition, "trace at zero requires a grid node at x=0");
            if (!(*left_trace_at_zero >= 0.0 && *left_trace_at_zero <= 1.0))
                throw Error(Errc::domain, "left trace outside [0,1]");
        }
    }
};

/// Uniform grid covering [x_min, x_max] with a node at x = 0. Bounds must be multiples of dx.
inline GridFunction make_grid(double x_min, double x_max, double dx)
{
    const double nl = std::round(-x_min / dx);
    const double nr = std::round(x_max / dx);
    if (std::abs(nl * dx + x_min) > 1e-9 * std::max(1.0, std::abs(x_min)) ||
        std::abs(nr * dx - x_max) > 1e-9 * std::max(1.0, std::abs(x_max)))
        throw Error(Errc::precondition, "domain bounds must be integer multiples of dx");
    if (nl < 0.0 || nr < 0.0)
        throw Error(Errc::precondition, "domain must contain x=0");
    GridFunction g;
    g.dx = dx;
    g.x0 = -nl * dx;
    g.values.assign(static_cast<std::size_t>(nl + nr) + 1, 0.0);
    return g;
}

} // namespace roughwave
