#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "prox.hpp"
#include "report.hpp"
#include "verify/grid_oracle.hpp"

namespace goprune {

/// Sweep of (a, lambda, p) points checked against the brute-force grid.
struct ProxSweep {
    double a_min{-4.0};
    double a_max{4.0};
    std::size_t a_count{9};
    std::vector<double> lambdas{0.1, 1.0, 3.0};
    std::vector<double> ps{0.0, 0.3, 0.5, 2.0 / 3.0, 0.9};
    double grid_step{1e-5};
    /// Also probe |a| = kappa (1 +- near_kappa_offset) with both signs; 0 disables.
    double near_kappa_offset{0.005};
    double tolerance{1e-6};
    /// Fault-injection hook forwarded to ProxParams::kappa_perturbation.
    double kappa_fault{0.0};
};

struct ProxCheckRow {
    double a{0.0};
    double lambda{0.0};
    double p{0.0};
    double prox_value{0.0};
    double oracle_value{0.0}; ///< grid minimizer
    double objective_gap{0.0}; ///< f(prox) - f(grid minimizer)
};

struct ProxCheckResult {
    std::vector<ProxCheckRow> rows;
    double worst_gap{-std::numeric_limits<double>::infinity()};
    std::size_t failures{0};
    [[nodiscard]] bool passed() const noexcept { return failures == 0; }
};

/// The a values of the sweep: a_count evenly spaced points on [a_min, a_max].
[[nodiscard]] inline std::vector<double> sweep_points(const ProxSweep& s)
{
    std::vector<double> out;
    if (s.a_count == 1) {
        out.push_back(s.a_min);
    } else {
        for (std::size_t i = 0; i < s.a_count; ++i) {
            out.push_back(s.a_min + (s.a_max - s.a_min) * static_cast<double>(i) / static_cast<double>(s.a_count - 1));
        }
    }
    return out;
}

inline void validate_sweep(const ProxSweep& s)
{
    if ((s.a_count == 0 && s.near_kappa_offset == 0.0) || s.lambdas.empty() || s.ps.empty()) {
        throw std::invalid_argument("prox-check: empty sweep");
    }
    if (!(s.a_max >= s.a_min)) {
        throw std::invalid_argument("prox-check: a_max must be >= a_min");
    }
    if (!(s.grid_step > 0.0)) {
        throw std::invalid_argument("prox-check: grid step must be positive");
    }
    for (double l : s.lambdas) {
        if (!(l > 0.0)) {
            throw std::invalid_argument("prox-check: lambda values must be positive");
        }
    }
    for (double p : s.ps) {
        check_group_exponent(p);
    }
}

[[nodiscard]] inline ProxCheckResult run_prox_check(const ProxSweep& s)
{
    validate_sweep(s);
    ProxCheckResult res;
    const auto base_points = sweep_points(s);
    for (double lambda : s.lambdas) {
        for (double p : s.ps) {
            ProxParams params;
            params.lambda = lambda;
            params.p = p;
            params.kappa_perturbation = s.kappa_fault;
            std::vector<double> points = base_points;
            if (s.near_kappa_offset > 0.0) {
                ProxParams clean = params;
                clean.kappa_perturbation = 0.0;
                const double kappa = threshold_kappa(clean);
                for (double f : {1.0 - s.near_kappa_offset, 1.0 + s.near_kappa_offset}) {
                    points.push_back(kappa * f);
                    points.push_back(-kappa * f);
                }
            }
            for (double a : points) {
                const double x = scalar_prox(a, params).value;
                const auto grid = verify::grid_minimize(a, lambda, p, s.grid_step);
                const double gap = verify::reference_objective(x, a, lambda, p) - grid.value;
                res.rows.push_back({a, lambda, p, x, grid.x, gap});
                res.worst_gap = std::max(res.worst_gap, gap);
                if (!(gap <= s.tolerance)) {
                    ++res.failures;
                }
            }
        }
    }
    return res;
}

inline void write_prox_check_csv(std::ostream& out, const ProxCheckResult& res)
{
    out << "a,lambda,p,prox_value,oracle_value,objective_gap\n";
    for (const auto& r : res.rows) {
        out << format_real(r.a) << ',' << format_real(r.lambda) << ',' << format_real(r.p) << ','
            << format_real(r.prox_value) << ',' << format_real(r.oracle_value) << ',' << format_real(r.objective_gap)
            << '\n';
    }
}

} // namespace goprune
