#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "pam.hpp"

namespace goprune {

struct AdmmOptions {
    int newton_max_iter{50};
    double newton_tol{1e-10};
    /// Use the closed-form roots where available (ablation only; the baseline
    /// solves every scalar iteratively).
    bool closed_form{false};
};

/// Scaled-dual ADMM iterates for min L(W) + lambda ||U||_p^p s.t. W = U.
struct AdmmState {
    LayerSet w;
    LayerSet u;
    LayerSet z;
    std::size_t k{0};
    std::vector<double> objective_trace;
    std::vector<double> primal_residuals; ///< ||W - U||_F after each iteration
};

struct AdmmResult {
    AdmmState state;
    SolverReport report;
};

inline void validate_admm(const HyperParams& hp)
{
    hp.validate();
    if (!(hp.p > 0.0 && hp.p < 1.0)) {
        throw std::invalid_argument("ADMM baseline requires p in (0, 1), got p = " + std::to_string(hp.p));
    }
}

/// L(W) + lambda sum |u|^p + beta/2 ||W - U||_F^2.
template <Model M>
[[nodiscard]] double admm_objective(const AdmmState& st, const M& model, const Batch& batch, const HyperParams& hp)
{
    M at_w = model;
    at_w.parameters() = st.w;
    const double value = at_w.loss(batch, hp.alpha) + hp.lambda * lp_norm_p(st.u, hp.p) +
                         0.5 * hp.beta * squared_distance(st.w, st.u);
    if (!std::isfinite(value)) {
        throw NumericalError("ADMM objective is not finite");
    }
    return value;
}

/// U = elementwise Prox_{(lambda/beta)|.|^p}(W + Z), every weight on its own.
[[nodiscard]] inline LayerSet admm_u_update(const AdmmState& st, const HyperParams& hp, const AdmmOptions& opt)
{
    ProxParams prox;
    prox.lambda = hp.lambda / hp.beta;
    prox.p = hp.p;
    prox.newton_tol = opt.newton_tol;
    prox.newton_max_iter = opt.newton_max_iter;
    prox.root = opt.closed_form ? RootMethod::automatic : RootMethod::newton;

    LayerSet out = st.u;
    for (std::size_t l = 0; l < out.size(); ++l) {
        auto dst = out.tensor(l).data();
        auto w = st.w.tensor(l).data();
        auto z = st.z.tensor(l).data();
        for (std::size_t i = 0; i < dst.size(); ++i) {
            const double v = static_cast<double>(w[i]) + static_cast<double>(z[i]);
            dst[i] = static_cast<float>(hp.lambda == 0.0 ? v : scalar_prox(v, prox).value);
        }
    }
    return out;
}

/// Z <- Z + W - U
[[nodiscard]] inline LayerSet admm_dual_update(const AdmmState& st)
{
    LayerSet out = st.z;
    for (std::size_t l = 0; l < out.size(); ++l) {
        auto dst = out.tensor(l).data();
        auto w = st.w.tensor(l).data();
        auto u = st.u.tensor(l).data();
        for (std::size_t i = 0; i < dst.size(); ++i) {
            dst[i] = static_cast<float>(static_cast<double>(dst[i]) + static_cast<double>(w[i]) -
                                        static_cast<double>(u[i]));
        }
    }
    return out;
}

/// Unstructured l_p baseline on the same splitting: W-step on
/// L(W) + beta/2 ||W - U + Z||^2, elementwise iterative prox for U, dual ascent on Z.
/// Uses hp.beta, hp.lambda, hp.p, hp.eta, hp.alpha, hp.batch_size, hp.outer_epochs, hp.seed;
/// rho1/rho2 play no role. Z^0 = 0, U^0 = W^0.
template <Model M>
AdmmResult run_admm(M& model, const Dataset& data, const HyperParams& hp, const AdmmOptions& opt = {})
{
    validate_admm(hp);
    AdmmResult res;
    AdmmState& st = res.state;
    st.w = model.parameters();
    st.u = st.w;
    st.z = st.w.zeros_like();
    const Batch full = whole(data);
    res.report.initial_objective = admm_objective(st, model, full, hp);

    for (std::size_t it = 0; it < hp.outer_epochs; ++it) {
        auto t0 = detail::Clock::now();
        const LayerSet target = weighted_sum(1.0, st.u, -1.0, st.z);
        model.parameters() = st.w;
        st.w = detail::solve_w_subproblem(model, data, target, hp.beta, hp.alpha, hp.eta, hp.batch_size, hp.seed,
                                          st.k, hp.w_solve);
        const double w_ms = detail::elapsed_ms(t0);

        t0 = detail::Clock::now();
        st.u = admm_u_update(st, hp, opt);
        const double u_ms = detail::elapsed_ms(t0);

        st.z = admm_dual_update(st);
        ++st.k;
        const double f = admm_objective(st, model, full, hp);
        st.objective_trace.push_back(f);
        st.primal_residuals.push_back(std::sqrt(squared_distance(st.w, st.u)));
        res.report.iterations.push_back({st.k, f, w_ms, u_ms, sparsity(st.u).zero_channel_fraction()});
    }
    model.parameters() = st.w;
    return res;
}

} // namespace goprune
