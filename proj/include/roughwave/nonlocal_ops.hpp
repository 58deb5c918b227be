#pragma once

#include "roughwave/error.hpp"
#include "roughwave/gauss.hpp"
#include "roughwave/grid.hpp"
#include "roughwave/model_core.hpp"

#include <array>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

namespace roughwave {

/// Contribution of one window cell to V, and its sensitivity to the cell's left node value.
struct VelocityCell {
    double value = 0.0;
    double d_left = 0.0;
};

/**
 * Discrete averaging operators for a fixed kernel and grid spacing.
 *
 * The density average A(Q; x_i) and its x-derivative are evaluated exactly on
 * the piecewise-linear reconstruction through precomputed cell moments. The
 * velocity average V(x_i) of the second model integrates kappa(y) v(P(y)) w
 * cell by cell with a 4-point Gauss rule, splitting any cell that straddles
 * the coefficient jump at y = 0.
 */
class NonlocalOps {
public:
    NonlocalOps(const Kernel& kernel, double dx)
        : kernel_(kernel), moments_(kernel.cell_moments(dx)), dx_(moments_.dx)
    {
        const std::size_t m = moments_.size();
        w_gauss_.resize(m);
        for (std::size_t k = 0; k < m; ++k)
            for (std::size_t g = 0; g < 4; ++g)
                w_gauss_[k][g] = kernel_((static_cast<double>(k) + gauss::four_point.nodes[g]) * dx_);
    }

    const Kernel& kernel() const noexcept { return kernel_; }
    const CellMoments& moments() const noexcept { return moments_; }
    double dx() const noexcept { return dx_; }
    std::size_t window_cells() const noexcept { return moments_.size(); }

    /// A(Q; x_i) = int_0^h Q(x_i + s) w(s) ds.
    double average_density(const GridFunction& q, std::ptrdiff_t i) const
    {
        check_spacing(q);
        const auto m = static_cast<std::ptrdiff_t>(window_cells());
        double sum = 0.0;
        for (std::ptrdiff_t k = 0; k < m; ++k) {
            const double a = q.right_value(i + k);
            const double b = q.left_value(i + k + 1);
            sum += a * moments_.mass[k] + (b - a) * moments_.first[k] / dx_;
        }
        return sum;
    }

    /// d/dx A(Q; x) at x_i, as -Q(x_i) w(0) - int_0^h Q(x_i + s) w'(s) ds (w(h) = 0).
    double average_derivative(const GridFunction& q, std::ptrdiff_t i) const
    {
        check_spacing(q);
        const auto m = static_cast<std::ptrdiff_t>(window_cells());
        double sum = 0.0;
        for (std::ptrdiff_t k = 0; k < m; ++k) {
            const double a = q.right_value(i + k);
            const double b = q.left_value(i + k + 1);
            sum += a * moments_.dmass[k] + (b - a) * moments_.dfirst[k] / dx_;
        }
        return -q.right_value(i) * kernel_.at_zero() - sum;
    }

    /**
     * One cell of the velocity average: int over [x_n, x_n + dx] of
     * kappa(y) v(P(y)) w(y - x_i), with P linear from `a` to `b` and the cell
     * sitting k cells into the window. `split` in (0, 1) marks y = 0 inside
     * the cell; pass split <= 0 (all kappa+) or >= 1 (all kappa-).
     */
    VelocityCell velocity_cell(double a, double b, std::size_t k, double split, const RoadCondition& cond,
                               const VelocityModel& v) const
    {
        return weighted_cell(a, b, k, split, cond.kappa_minus(), cond.kappa_plus(),
                             [&](double p) { return std::pair{v.eval(p), v.deriv(p)}; });
    }

    /**
     * Same quadrature for a general integrand g(P(y)) with left/right
     * multipliers; `g(p)` returns (g, g'). d_left is the derivative with
     * respect to the cell's left value `a`.
     */
    template <class G>
    VelocityCell weighted_cell(double a, double b, std::size_t k, double split, double k_left, double k_right,
                               G&& g) const
    {
        VelocityCell out;
        if (split <= 0.0 || split >= 1.0) {
            const double kappa = split >= 1.0 ? k_left : k_right;
            if (kappa == 0.0)
                return out;
            for (std::size_t q = 0; q < 4; ++q) {
                const double t = gauss::four_point.nodes[q];
                const auto [val, der] = g(a + (b - a) * t);
                const double ww = gauss::four_point.weights[q] * w_gauss_[k][q];
                out.value += ww * val;
                out.d_left += ww * der * (1.0 - t);
            }
            out.value *= kappa * dx_;
            out.d_left *= kappa * dx_;
            return out;
        }
        auto piece = [&](double t0, double t1, double kappa) {
            if (kappa == 0.0)
                return;
            for (std::size_t q = 0; q < 4; ++q) {
                const double t = t0 + (t1 - t0) * gauss::four_point.nodes[q];
                const auto [val, der] = g(a + (b - a) * t);
                const double ww =
                    gauss::four_point.weights[q] * (t1 - t0) * kernel_((static_cast<double>(k) + t) * dx_) * kappa * dx_;
                out.value += ww * val;
                out.d_left += ww * der * (1.0 - t);
            }
        };
        piece(0.0, split, k_left);
        piece(split, 1.0, k_right);
        return out;
    }

    /// Where y = 0 falls inside the cell starting at node n (see velocity_cell).
    static double split_fraction(const GridFunction& p, std::ptrdiff_t n)
    {
        const int left = p.node_side(n);
        const int right = p.node_side(n + 1);
        if (right <= 0)
            return 1.0;
        if (left >= 0)
            return 0.0;
        return -p.x(n) / p.dx;
    }

    /// V(x_i) = int_0^h kappa(x_i + s) v(P(x_i + s)) w(s) ds.
    double average_velocity(const GridFunction& p, std::ptrdiff_t i, const RoadCondition& cond,
                            const VelocityModel& v) const
    {
        check_spacing(p);
        const auto m = static_cast<std::ptrdiff_t>(window_cells());
        double sum = 0.0;
        for (std::ptrdiff_t k = 0; k < m; ++k) {
            const std::ptrdiff_t n = i + k;
            sum += velocity_cell(p.right_value(n), p.left_value(n + 1), static_cast<std::size_t>(k),
                                 split_fraction(p, n), cond, v)
                       .value;
        }
        return sum;
    }

private:
    void check_spacing(const GridFunction& q) const
    {
        if (std::abs(q.dx - dx_) > 1e-12 * dx_)
            throw Error(Errc::precondition, "grid spacing does not match the operator spacing");
    }

    Kernel kernel_;
    CellMoments moments_;
    double dx_;
    std::vector<std::array<double, 4>> w_gauss_;
};

inline double average_density(const GridFunction& q, std::ptrdiff_t i, const Kernel& kernel)
{
    return NonlocalOps(kernel, q.dx).average_density(q, i);
}

inline double average_derivative(const GridFunction& q, std::ptrdiff_t i, const Kernel& kernel)
{
    return NonlocalOps(kernel, q.dx).average_derivative(q, i);
}

inline double average_velocity_m2(const GridFunction& p, std::ptrdiff_t i, const Kernel& kernel,
                                  const RoadCondition& cond, const VelocityModel& v)
{
    if (p.left_trace_at_zero)
        throw Error(Errc::precondition, "velocity average expects a continuous profile");
    return NonlocalOps(kernel, p.dx).average_velocity(p, i, cond, v);
}

} // namespace roughwave
