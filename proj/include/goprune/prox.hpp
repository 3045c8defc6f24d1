#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace goprune {

/// How the positive stationary point above the threshold is located.
enum class RootMethod {
    automatic, ///< closed form for p in {0, 1/2, 2/3}, Newton otherwise
    newton,    ///< always Newton (with bisection fallback); p = 0 stays exact
};

/// Parameters of Prox_{lambda |.|^p}.
struct ProxParams {
    double lambda{1.0};
    double p{0.5};
    double newton_tol{1e-12};
    int newton_max_iter{100};
    RootMethod root{RootMethod::automatic};
    /// Fault-injection hook: the dead-zone threshold is multiplied by
    /// (1 + kappa_perturbation). Zero in every real use.
    double kappa_perturbation{0.0};

    void validate() const
    {
        if (!(lambda > 0.0) || !std::isfinite(lambda)) {
            throw std::invalid_argument("prox: lambda must be positive, got " + std::to_string(lambda));
        }
        check_group_exponent(p);
        if (!(newton_tol > 0.0)) {
            throw std::invalid_argument("prox: newton_tol must be positive");
        }
        if (newton_max_iter < 1) {
            throw std::invalid_argument("prox: newton_max_iter must be >= 1");
        }
    }
};

struct ProxResult {
    double value{0.0};
    /// |a| sat exactly on the threshold; both 0 and sgn(a)*c minimize, 0 is returned.
    bool is_tie{false};
};

/// kappa(lambda, p) = (2-p) lambda^{1/(2-p)} (2(1-p))^{(p-1)/(2-p)} = c (2-p) / (2(1-p)):
/// below it the prox is 0. At |a| = kappa the stationary point c ties with 0:
/// lambda c^p + (c-a)^2/2 = a^2/2.
[[nodiscard]] inline double threshold_kappa(const ProxParams& params)
{
    const double p = params.p;
    if (p == 0.0) {
        return std::sqrt(2.0 * params.lambda); // hard threshold, exact
    }
    return (2.0 - p) * std::pow(params.lambda, 1.0 / (2.0 - p)) * std::pow(2.0 * (1.0 - p), (p - 1.0) / (2.0 - p));
}

/// c(lambda, p) = (2 lambda (1-p))^{1/(2-p)}: magnitude of the nonzero minimizer at the threshold.
[[nodiscard]] inline double branch_value_c(const ProxParams& params)
{
    if (params.p == 0.0) {
        return std::sqrt(2.0 * params.lambda);
    }
    return std::pow(2.0 * params.lambda * (1.0 - params.p), 1.0 / (2.0 - params.p));
}

/// lambda |x|^p + (x-a)^2 / 2, with |x|^0 read as the indicator x != 0.
[[nodiscard]] inline double prox_objective(double x, double a, double lambda, double p)
{
    const double ax = std::abs(x);
    const double penalty = p == 0.0 ? (ax != 0.0 ? 1.0 : 0.0) : std::pow(ax, p);
    return lambda * penalty + 0.5 * (x - a) * (x - a);
}

namespace detail {

/// Largest real root of t^3 + P t + Q = 0.
inline double largest_cubic_root(double P, double Q)
{
    const double disc = Q * Q / 4.0 + P * P * P / 27.0;
    if (disc < 0.0) {
        // Three real roots (P < 0 here).
        const double r = 2.0 * std::sqrt(-P / 3.0);
        double arg = (3.0 * Q / (2.0 * P)) * std::sqrt(-3.0 / P);
        arg = std::clamp(arg, -1.0, 1.0);
        return r * std::cos(std::acos(arg) / 3.0);
    }
    // One real root. Take the cube root whose argument does not cancel and
    // recover the other from u * v = -P / 3.
    const double sq = std::sqrt(disc);
    const double u = std::cbrt(-Q / 2.0 + std::copysign(sq, -Q));
    return u == 0.0 ? 0.0 : u - P / (3.0 * u);
}

inline double stationarity_residual(double x, double a_abs, double lambda, double p)
{
    return x - a_abs + lambda * p * std::pow(x, p - 1.0);
}

/// p = 1/2: with s = sqrt(x) the stationarity condition becomes s^3 - a s + lambda/2 = 0.
inline double varpi_half(double a_abs, double lambda)
{
    const double s = largest_cubic_root(-a_abs, lambda / 2.0);
    return s * s;
}

/// p = 2/3: with s = x^{1/3} the condition becomes s^4 - a s + 2 lambda / 3 = 0,
/// solved by Ferrari's method through the resolvent m^3 - k m - a^2/8 = 0.
inline double varpi_two_thirds(double a_abs, double lambda)
{
    const double k = 2.0 * lambda / 3.0;
    const double m = largest_cubic_root(-k, -a_abs * a_abs / 8.0);
    const double root2m = std::sqrt(2.0 * m);
    const double inner = std::max(0.0, 2.0 * a_abs / root2m - 2.0 * m);
    const double s = 0.5 * (root2m + std::sqrt(inner));
    return s * s * s;
}

inline double varpi_newton(double a_abs, const ProxParams& params)
{
    const double lambda = params.lambda;
    const double p = params.p;
    const double lo_bound = branch_value_c(params);
    double x = a_abs;
    for (int it = 0; it < params.newton_max_iter; ++it) {
        const double f = stationarity_residual(x, a_abs, lambda, p);
        if (std::abs(f) < params.newton_tol) {
            return x;
        }
        const double df = 1.0 - lambda * p * (1.0 - p) * std::pow(x, p - 2.0);
        const double next = x - f / df;
        if (!(df > 0.0) || !std::isfinite(next) || next <= 0.0) {
            break;
        }
        x = next;
    }
    // Safeguarded bisection on [c, a]: the residual is negative at c and positive at a.
    double lo = std::min(lo_bound, a_abs);
    double hi = a_abs;
    if (stationarity_residual(lo, a_abs, lambda, p) > 0.0) {
        throw NumericalError("varpi: no sign change on [c, a] for a=" + std::to_string(a_abs));
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double f = stationarity_residual(mid, a_abs, lambda, p);
        if (std::abs(f) < params.newton_tol || hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) {
            return mid;
        }
        (f > 0.0 ? hi : lo) = mid;
    }
    throw NumericalError("varpi: root finding did not converge for a=" + std::to_string(a_abs));
}

} // namespace detail

[[nodiscard]] inline bool has_closed_form(double p) noexcept { return p == 0.0 || p == 0.5 || p == 2.0 / 3.0; }

/// The positive root of x - a + lambda p x^{p-1} = 0 lying in [c, a]; the
/// nonzero prox value for |a| above the threshold.
[[nodiscard]] inline double solve_varpi(double a_abs, const ProxParams& params)
{
    if (params.p == 0.0) {
        return a_abs;
    }
    if (params.root == RootMethod::automatic) {
        if (params.p == 0.5) {
            return detail::varpi_half(a_abs, params.lambda);
        }
        if (params.p == 2.0 / 3.0) {
            return detail::varpi_two_thirds(a_abs, params.lambda);
        }
    }
    return detail::varpi_newton(a_abs, params);
}

/// Prox_{lambda |.|^p}(a) for p in [0, 1).
[[nodiscard]] inline ProxResult scalar_prox(double a, const ProxParams& params)
{
    const double kappa = threshold_kappa(params) * (1.0 + params.kappa_perturbation);
    const double mag = std::abs(a);
    if (mag < kappa) {
        return {0.0, false};
    }
    if (mag == kappa) {
        return {0.0, true};
    }
    const double x = solve_varpi(mag, params);
    return {std::copysign(x, a), false};
}

/// argmin_x lambda ||x||^p + ||x - n||^2 / 2: the scalar prox applied to ||n||
/// along n's direction; zero when n is zero or ||n|| falls in the dead zone.
[[nodiscard]] inline std::vector<double> group_prox(std::span<const double> n, const ProxParams& params)
{
    std::vector<double> out(n.size(), 0.0);
    const double nrm = std::sqrt(squared_norm(n));
    if (nrm == 0.0) {
        return out;
    }
    const double magnitude = scalar_prox(nrm, params).value;
    if (magnitude == 0.0) {
        return out;
    }
    const double scale = magnitude / nrm;
    for (std::size_t i = 0; i < n.size(); ++i) {
        out[i] = n[i] * scale;
    }
    return out;
}

} // namespace goprune
