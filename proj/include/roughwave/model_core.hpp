#pragma once

#include "roughwave/error.hpp"
#include "roughwave/gauss.hpp"
#include "roughwave/roots.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace roughwave {

enum class Model { m1, m2 };

constexpr std::string_view to_string(Model m) noexcept { return m == Model::m1 ? "M1" : "M2"; }

inline Model parse_model(std::string_view s)
{
    if (s == "M1" || s == "m1")
        return Model::m1;
    if (s == "M2" || s == "m2")
        return Model::m2;
    throw Error(Errc::config, "unknown model '" + std::string(s) + "'", "model");
}

/// Position of the unique maximiser of rho -> rho v(rho).
class VelocityModel;
double stagnation_point(const VelocityModel& v);

/**
 * Velocity law v(rho) on [0, 1] together with its first two derivatives.
 *
 * The admissibility conditions v(0) = 1, v(1) = 0, v' < 0 and v'' <= 0 are
 * checked on 1000 equispaced samples at construction; a model that fails any
 * of them is rejected with Errc::precondition.
 */
class VelocityModel {
public:
    using Fn = std::function<double(double)>;

    VelocityModel(std::string name, Fn v, Fn dv, Fn d2v)
        : name_(std::move(name)), v_(std::move(v)), dv_(std::move(dv)), d2v_(std::move(d2v))
    {
        validate();
        stagnation_ = stagnation_point(*this);
    }

    /// v(rho) = 1 - rho.
    static VelocityModel lwr()
    {
        return {"lwr", [](double r) { return 1.0 - r; }, [](double) { return -1.0; },
                [](double) { return 0.0; }};
    }

    /// v(rho) = 1 - c rho - (1 - c) rho^2 with c in (0, 1].
    static VelocityModel concave_quadratic(double c)
    {
        if (!(c > 0.0 && c <= 1.0))
            throw Error(Errc::precondition, "concave_quadratic requires c in (0, 1]");
        return {"quadratic", [c](double r) { return 1.0 - c * r - (1.0 - c) * r * r; },
                [c](double r) { return -c - 2.0 * (1.0 - c) * r; }, [c](double) { return -2.0 * (1.0 - c); }};
    }

    /// v(rho) = 1 - rho^a; only a = 1 survives validation (v'(0) = 0 for a > 1, v'' > 0 for a < 1).
    static VelocityModel power(double a)
    {
        return {"power", [a](double r) { return 1.0 - std::pow(r, a); },
                [a](double r) { return -a * std::pow(r, a - 1.0); },
                [a](double r) { return a == 1.0 ? 0.0 : -a * (a - 1.0) * std::pow(r, a - 2.0); }};
    }

    static VelocityModel by_name(std::string_view name)
    {
        if (name == "lwr")
            return lwr();
        if (name == "quadratic")
            return concave_quadratic(0.5);
        throw Error(Errc::config, "unknown velocity '" + std::string(name) + "'", "velocity");
    }

    double operator()(double rho) const { return v_(rho); }
    double eval(double rho) const { return v_(rho); }
    double deriv(double rho) const { return dv_(rho); }
    double second_deriv(double rho) const { return d2v_(rho); }
    const std::string& name() const noexcept { return name_; }

    /// v(rho + a) - v(rho) without cancellation for small a (second-order Taylor below |a| = 1e-5).
    double increment(double rho, double a) const
    {
        if (std::abs(a) < 1e-5)
            return a * (dv_(rho) + 0.5 * a * d2v_(rho));
        return v_(rho + a) - v_(rho);
    }

    /// Cached stagnation point rho-hat.
    double stagnation() const noexcept { return stagnation_; }

private:
    void validate() const
    {
        constexpr int samples = 1000;
        if (std::abs(v_(0.0) - 1.0) > 1e-12 || std::abs(v_(1.0)) > 1e-12)
            throw Error(Errc::precondition, "velocity '" + name_ + "' must satisfy v(0)=1, v(1)=0");
        for (int k = 0; k < samples; ++k) {
            const double r = static_cast<double>(k) / (samples - 1);
            const double d1 = dv_(r);
            const double d2 = d2v_(r);
            if (!(d1 < 0.0) || !std::isfinite(d1))
                throw Error(Errc::precondition,
                            "velocity '" + name_ + "' violates v'<0 at rho=" + std::to_string(r));
            if (!(d2 <= 0.0) || !std::isfinite(d2))
                throw Error(Errc::precondition,
                            "velocity '" + name_ + "' violates v''<=0 at rho=" + std::to_string(r));
        }
    }

    std::string name_;
    Fn v_, dv_, d2v_;
    double stagnation_ = 0.5;
};

inline double stagnation_point(const VelocityModel& v)
{
    // (rho v)' = v + rho v' is positive at 0 and equals v'(1) < 0 at 1.
    auto fdf = [&v](double r) {
        return std::pair{v.eval(r) + r * v.deriv(r), 2.0 * v.deriv(r) + r * v.second_deriv(r)};
    };
    return safeguarded_newton(fdf, 0.0, 1.0, 0.5, {1e-13, 0.0, 100}).x;
}

/// Zeroth and first moments of w and w' over each cell [k dx, (k+1) dx] of the window.
struct CellMoments {
    double dx = 0.0;
    std::vector<double> mass;   ///< int w
    std::vector<double> first;  ///< int (s - k dx) w
    std::vector<double> dmass;  ///< int w'
    std::vector<double> dfirst; ///< int (s - k dx) w'

    std::size_t size() const noexcept { return mass.size(); }
};

/**
 * Look-ahead weight w on [0, h]: nonnegative, strictly decreasing, w(h) = 0,
 * unit mass. Validated on construction.
 */
class Kernel {
public:
    using Fn = std::function<double(double)>;

    Kernel(std::string name, double h, Fn w, Fn dw)
        : name_(std::move(name)), h_(h), w_(std::move(w)), dw_(std::move(dw))
    {
        if (!(h_ > 0.0) || !std::isfinite(h_))
            throw Error(Errc::precondition, "kernel horizon must be positive");
        validate();
        w0_ = w_(0.0);
    }

    /// w(s) = 2 (h - s) / h^2.
    static Kernel linear(double h)
    {
        return {"linear", h, [h](double s) { return 2.0 * (h - s) / (h * h); },
                [h](double) { return -2.0 / (h * h); }};
    }

    /// w(s) = 3 (h - s)^2 / h^3.
    static Kernel quadratic(double h)
    {
        return {"quadratic", h, [h](double s) { return 3.0 * (h - s) * (h - s) / (h * h * h); },
                [h](double s) { return -6.0 * (h - s) / (h * h * h); }};
    }

    static Kernel by_name(std::string_view name, double h)
    {
        if (name == "linear")
            return linear(h);
        if (name == "quadratic")
            return quadratic(h);
        throw Error(Errc::config, "unknown kernel '" + std::string(name) + "'", "kernel");
    }

    double horizon() const noexcept { return h_; }
    const std::string& name() const noexcept { return name_; }
    double at_zero() const noexcept { return w0_; }

    double operator()(double s) const { return (s < 0.0 || s >= h_) ? 0.0 : w_(s); }
    double deriv(double s) const { return (s < 0.0 || s >= h_) ? 0.0 : dw_(s); }

    /// Number of cells of width dx spanning the horizon; dx must divide h.
    std::size_t cells_per_horizon(double dx) const
    {
        if (!(dx > 0.0))
            throw Error(Errc::precondition, "grid spacing must be positive");
        const double ratio = h_ / dx;
        const double m = std::round(ratio);
        if (m < 1.0 || std::abs(ratio - m) > 1e-9 * std::max(1.0, ratio))
            throw Error(Errc::precondition, "h/dx must be a positive integer (h=" + std::to_string(h_) +
                                                ", dx=" + std::to_string(dx) + ")");
        return static_cast<std::size_t>(m);
    }

    CellMoments cell_moments(double dx) const
    {
        const std::size_t m = cells_per_horizon(dx);
        const double step = h_ / static_cast<double>(m);
        CellMoments out;
        out.dx = step;
        out.mass.resize(m);
        out.first.resize(m);
        out.dmass.resize(m);
        out.dfirst.resize(m);
        for (std::size_t k = 0; k < m; ++k) {
            const double a = static_cast<double>(k) * step;
            const double b = a + step;
            out.mass[k] = gauss::integrate(gauss::eight_point, [&](double s) { return w_(s); }, a, b);
            out.first[k] = gauss::integrate(gauss::eight_point, [&](double s) { return (s - a) * w_(s); }, a, b);
            out.dmass[k] = gauss::integrate(gauss::eight_point, [&](double s) { return dw_(s); }, a, b);
            out.dfirst[k] =
                gauss::integrate(gauss::eight_point, [&](double s) { return (s - a) * dw_(s); }, a, b);
        }
        return out;
    }

private:
    void validate() const
    {
        if (std::abs(w_(h_)) > 1e-12 * std::max(1.0, std::abs(w_(0.0))))
            throw Error(Errc::precondition, "kernel '" + name_ + "' must vanish at s=h");
        constexpr int samples = 1000;
        double prev = w_(0.0);
        for (int k = 1; k < samples; ++k) {
            const double cur = w_(h_ * k / samples);
            if (!(cur < prev) || cur < 0.0)
                throw Error(Errc::precondition, "kernel '" + name_ + "' must be nonnegative and strictly decreasing");
            prev = cur;
        }
        double mass = 0.0;
        constexpr int pieces = 64;
        for (int k = 0; k < pieces; ++k)
            mass += gauss::integrate(gauss::eight_point, [&](double s) { return w_(s); }, h_ * k / pieces,
                                     h_ * (k + 1) / pieces);
        if (std::abs(mass - 1.0) > 1e-12)
            throw Error(Errc::precondition, "kernel '" + name_ + "' must have unit mass");
    }

    std::string name_;
    double h_;
    Fn w_, dw_;
    double w0_ = 0.0;
};

/// Piecewise-constant speed factor with a single jump at x = 0.
class RoadCondition {
public:
    RoadCondition(double kappa_minus, double kappa_plus) : kappa_minus_(kappa_minus), kappa_plus_(kappa_plus)
    {
        if (!(kappa_minus > 0.0) || !(kappa_plus > 0.0))
            throw Error(Errc::precondition, "speed factors must be positive");
    }

    double kappa_minus() const noexcept { return kappa_minus_; }
    double kappa_plus() const noexcept { return kappa_plus_; }
    double max() const noexcept { return std::max(kappa_minus_, kappa_plus_); }

    /// kappa(x); the value at x = 0 itself is taken from the right.
    double at(double x) const noexcept { return x < 0.0 ? kappa_minus_ : kappa_plus_; }

    bool operator==(const RoadCondition&) const = default;

private:
    double kappa_minus_;
    double kappa_plus_;
};

inline double flux(double kappa, double rho, const VelocityModel& v)
{
    if (!(rho >= 0.0 && rho <= 1.0))
        throw Error(Errc::domain, "density " + std::to_string(rho) + " outside [0,1]");
    return kappa * rho * v.eval(rho);
}

/// Roots of the two flux branches at a common level; see solve_flux_level.
struct FluxLevelSet {
    double fbar = 0.0;
    double rho1 = 0.0;
    double rho2 = 0.0;
    double rho3 = 1.0;
    double rho4 = 1.0;
};

namespace detail {

/// Root of kappa rho v(rho) = fbar on [0, rho-hat] (low) or [rho-hat, 1] (high).
inline double flux_root(double kappa, double fbar, const VelocityModel& v, bool high)
{
    const double rhat = v.stagnation();
    const double fmax = kappa * rhat * v.eval(rhat);
    if (fbar >= fmax * (1.0 - 4e-16))
        return rhat;
    auto fdf = [&](double r) {
        return std::pair{kappa * r * v.eval(r) - fbar, kappa * (v.eval(r) + r * v.deriv(r))};
    };
    const double lo = high ? rhat : 0.0;
    const double hi = high ? 1.0 : rhat;
    // Start near the endpoint where the branch is steepest.
    const double guess = high ? 0.5 * (rhat + 1.0) : 0.5 * rhat;
    return safeguarded_newton(fdf, lo, hi, guess, {1e-13, 0.0, 100}).x;
}

} // namespace detail

/**
 * Solves f^-(rho) = f^+(rho) = fbar on each monotone branch.
 *
 * rho1 and rho4 belong to the flux with the larger speed factor, rho2 and
 * rho3 to the one with the smaller factor, so rho1 <= rho2 <= rho-hat <= rho3 <= rho4.
 */
inline FluxLevelSet solve_flux_level(double fbar, const RoadCondition& cond, const VelocityModel& v)
{
    const double rhat = v.stagnation();
    const double peak = rhat * v.eval(rhat);
    const double k_big = std::max(cond.kappa_minus(), cond.kappa_plus());
    const double k_small = std::min(cond.kappa_minus(), cond.kappa_plus());
    if (!(fbar >= 0.0))
        throw Error(Errc::out_of_range, "flux level must be nonnegative");
    if (fbar > k_small * peak * (1.0 + 1e-14))
        throw Error(Errc::out_of_range, "flux level " + std::to_string(fbar) + " exceeds the flux maximum " +
                                            std::to_string(k_small * peak));
    FluxLevelSet out;
    out.fbar = fbar;
    out.rho1 = detail::flux_root(k_big, fbar, v, false);
    out.rho4 = detail::flux_root(k_big, fbar, v, true);
    out.rho2 = detail::flux_root(k_small, fbar, v, false);
    out.rho3 = detail::flux_root(k_small, fbar, v, true);
    return out;
}

/// Conjugate density: the other root of kappa rho v(rho) = kappa rho_given v(rho_given).
inline double conjugate_density(double rho, const VelocityModel& v)
{
    const double level = rho * v.eval(rho);
    return detail::flux_root(1.0, level, v, rho < v.stagnation());
}

enum class Multiplicity { infinite, unique, none };

constexpr std::string_view to_string(Multiplicity m) noexcept
{
    switch (m) {
    case Multiplicity::infinite: return "infinite";
    case Multiplicity::unique: return "unique";
    case Multiplicity::none: return "none";
    }
    return "none";
}

struct CaseTag {
    std::string label; ///< A1..D4, trivial-zero, trivial-one, trivial-step
    Model model = Model::m1;
    Multiplicity multiplicity = Multiplicity::none;
    bool stable = false;

    char letter() const noexcept { return label.size() == 2 ? label[0] : '\0'; }
    int digit() const noexcept { return label.size() == 2 ? label[1] - '0' : 0; }
    bool operator==(const CaseTag&) const = default;
};

/// Multiplicity and stability of a lettered case, e.g. "B2".
inline CaseTag make_case_tag(char letter, int digit, Model model)
{
    CaseTag tag;
    tag.label = std::string(1, letter) + static_cast<char>('0' + digit);
    tag.model = model;
    tag.multiplicity = digit == 1 ? Multiplicity::infinite : digit == 2 ? Multiplicity::unique : Multiplicity::none;
    tag.stable = digit == 1;
    return tag;
}

inline char case_letter(const RoadCondition& cond, Model model)
{
    const bool faster_left = cond.kappa_minus() > cond.kappa_plus();
    if (model == Model::m1)
        return faster_left ? 'A' : 'B';
    return faster_left ? 'C' : 'D';
}

/**
 * Places (rho-, rho+) in the case tables. The digit encodes which side of
 * rho-hat each far-field density lies on: (below, above) = 1, (below, below) = 2,
 * (above, above) = 3, (above, below) = 4.
 */
inline CaseTag classify(const RoadCondition& cond, double rho_minus, double rho_plus, const VelocityModel& v,
                        Model model = Model::m1, double tol = 1e-9)
{
    const double fm = flux(cond.kappa_minus(), rho_minus, v);
    const double fp = flux(cond.kappa_plus(), rho_plus, v);
    if (std::abs(fm - fp) >= tol)
        throw Error(Errc::constraint_violation, "flux mismatch |f-(rho-) - f+(rho+)| = " +
                                                    std::to_string(std::abs(fm - fp)));
    const double fbar = 0.5 * (fm + fp);
    const bool jump = std::abs(cond.kappa_minus() - cond.kappa_plus()) > tol;

    if (fbar < tol) {
        const bool lm_zero = rho_minus < 0.5;
        const bool lp_zero = rho_plus < 0.5;
        CaseTag tag;
        tag.model = model;
        tag.multiplicity = Multiplicity::unique;
        tag.stable = false;
        if (lm_zero && lp_zero)
            tag.label = "trivial-zero";
        else if (!lm_zero && !lp_zero)
            tag.label = "trivial-one";
        else if (lm_zero && !lp_zero)
            tag.label = "trivial-step";
        else if (jump)
            return make_case_tag(case_letter(cond, model), 4, model);
        else
            throw Error(Errc::degenerate, "no coefficient jump to classify");
        return tag;
    }
    if (!jump)
        throw Error(Errc::degenerate, "kappa- equals kappa+: no coefficient jump to classify");

    const double rhat = v.stagnation();
    if (std::abs(rho_minus - rhat) < tol || std::abs(rho_plus - rhat) < tol)
        throw Error(Errc::ambiguity, "far-field density coincides with the stagnation point");

    const bool minus_below = rho_minus < rhat;
    const bool plus_below = rho_plus < rhat;
    int digit = 0;
    if (minus_below && !plus_below)
        digit = 1;
    else if (minus_below && plus_below)
        digit = 2;
    else if (!minus_below && !plus_below)
        digit = 3;
    else
        digit = 4;
    return make_case_tag(case_letter(cond, model), digit, model);
}

/// Far-field densities (rho-, rho+) of a lettered case at flux level fbar.
inline std::pair<double, double> densities_for_case(std::string_view label, double fbar, const RoadCondition& cond,
                                                    const VelocityModel& v, Model model)
{
    if (label.size() != 2 || label[1] < '1' || label[1] > '4')
        throw Error(Errc::config, "unknown case label '" + std::string(label) + "'", "case");
    if (label[0] != case_letter(cond, model))
        throw Error(Errc::config,
                    "case '" + std::string(label) + "' inconsistent with kappa-/kappa+ and model", "case");
    solve_flux_level(fbar, cond, v);
    const int digit = label[1] - '0';
    const bool minus_low = digit == 1 || digit == 2;
    const bool plus_low = digit == 2 || digit == 4;
    const double rm = detail::flux_root(cond.kappa_minus(), fbar, v, !minus_low);
    const double rp = detail::flux_root(cond.kappa_plus(), fbar, v, !plus_low);
    return {rm, rp};
}

} // namespace roughwave
