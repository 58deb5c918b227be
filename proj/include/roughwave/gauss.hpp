#pragma once

#include <array>
#include <cstddef>

namespace roughwave::gauss {

/// Gauss-Legendre rule mapped to the unit interval [0, 1].
template <std::size_t N>
struct UnitRule {
    std::array<double, N> nodes;
    std::array<double, N> weights;
};

namespace detail {
template <std::size_t N>
constexpr UnitRule<N> to_unit(const std::array<double, N>& x, const std::array<double, N>& w)
{
    UnitRule<N> r{};
    for (std::size_t i = 0; i < N; ++i) {
        r.nodes[i] = 0.5 * (x[i] + 1.0);
        r.weights[i] = 0.5 * w[i];
    }
    return r;
}
} // namespace detail

inline constexpr UnitRule<4> four_point = detail::to_unit<4>(
    {-0.86113631159405257522, -0.33998104358485626480, 0.33998104358485626480, 0.86113631159405257522},
    {0.34785484513745385737, 0.65214515486254614263, 0.65214515486254614263, 0.34785484513745385737});

inline constexpr UnitRule<8> eight_point = detail::to_unit<8>(
    {-0.96028985649753623168, -0.79666647741362673959, -0.52553240991632898582, -0.18343464249564980494,
     0.18343464249564980494, 0.52553240991632898582, 0.79666647741362673959, 0.96028985649753623168},
    {0.10122853629037625915, 0.22238103445337447054, 0.31370664587788728734, 0.36268378337836198297,
     0.36268378337836198297, 0.31370664587788728734, 0.22238103445337447054, 0.10122853629037625915});

/// Integrates f over [a, b] with the given unit rule.
template <std::size_t N, class F>
double integrate(const UnitRule<N>& rule, F&& f, double a, double b)
{
    const double len = b - a;
    double sum = 0.0;
    for (std::size_t i = 0; i < N; ++i)
        sum += rule.weights[i] * f(a + len * rule.nodes[i]);
    return sum * len;
}

} // namespace roughwave::gauss
