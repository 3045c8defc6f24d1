#pragma once

// Brute-force reference minimizers used to verify the proximal operators.
// Deliberately shares no code with prox.hpp.

#include <cmath>
#include <cstdint>
#include <limits>

namespace goprune::verify {

/// lambda |x|^p + (x - a)^2 / 2 with 0^0 taken as 0 (the l0 indicator).
[[nodiscard]] inline double reference_objective(double x, double a, double lambda, double p) noexcept
{
    double penalty = 0.0;
    if (x != 0.0) {
        penalty = p == 0.0 ? 1.0 : std::exp(p * std::log(std::fabs(x)));
    }
    const double d = x - a;
    return lambda * penalty + 0.5 * d * d;
}

struct GridMinimum {
    double x{0.0};
    double value{std::numeric_limits<double>::infinity()};
};

/// Exhaustive minimization over the lattice {k * step} intersected with [lo, hi].
/// The lattice always contains 0 when lo <= 0 <= hi, so the sparse candidate is exact.
[[nodiscard]] inline GridMinimum grid_minimize(double a, double lambda, double p, double step, double lo, double hi)
{
    GridMinimum best;
    const auto k_lo = static_cast<std::int64_t>(std::ceil(lo / step));
    const auto k_hi = static_cast<std::int64_t>(std::floor(hi / step));
    for (std::int64_t k = k_lo; k <= k_hi; ++k) {
        const double x = static_cast<double>(k) * step;
        const double v = reference_objective(x, a, lambda, p);
        if (v < best.value) {
            best = {x, v};
        }
    }
    return best;
}

/// Grid over [-2|a|-1, 2|a|+1].
[[nodiscard]] inline GridMinimum grid_minimize(double a, double lambda, double p, double step)
{
    const double r = 2.0 * std::fabs(a) + 1.0;
    return grid_minimize(a, lambda, p, step, -r, r);
}

/// Radial reduction for the group problem min_x lambda ||x||^p + ||x - n||^2 / 2:
/// the optimal x is r * n/||n|| with r minimizing the scalar objective at a = ||n||, r >= 0.
[[nodiscard]] inline GridMinimum radial_grid_minimize(double norm_n, double lambda, double p, double step)
{
    return grid_minimize(norm_n, lambda, p, step, 0.0, 2.0 * norm_n + 1.0);
}

} // namespace goprune::verify
