#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "data.hpp"
#include "models.hpp"
#include "prox.hpp"
#include "tensor.hpp"
#include "training.hpp"

namespace goprune {

enum class WSolve {
    sgd_epoch, ///< one epoch of mini-batch SGD on the smooth subproblem
    exact,     ///< closed-form minimizer; needs an ExactlySolvable model
};

/// Compression hyperparameters. The defaults are the large-network setting
/// (coupling weights 1.5e-3, 15 epochs); desk runs use far stronger coupling.
struct HyperParams {
    double p{0.5};
    double lambda{1e-3};
    double beta{1.5e-3};
    double rho1{1.5e-3};
    double rho2{1.5e-3};
    double alpha{1e-4};
    double eta{0.01};
    std::size_t outer_epochs{15};
    std::size_t batch_size{128};
    std::uint64_t seed{0};
    WSolve w_solve{WSolve::sgd_epoch};

    void validate() const
    {
        check_group_exponent(p);
        auto positive = [](double v, const char* name) {
            if (!(v > 0.0) || !std::isfinite(v)) {
                throw std::invalid_argument(std::string(name) + " must be positive");
            }
        };
        positive(beta, "beta");
        positive(rho1, "rho1");
        positive(rho2, "rho2");
        positive(eta, "eta");
        if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
            throw std::invalid_argument("lambda must be nonnegative");
        }
        if (!(alpha >= 0.0)) {
            throw std::invalid_argument("alpha must be nonnegative");
        }
        if (batch_size == 0) {
            throw std::invalid_argument("batch_size must be positive");
        }
    }
};

/// (W, U) iterates of the alternating scheme plus the objective after each iteration.
struct PamState {
    LayerSet w;
    LayerSet u;
    std::size_t k{0};
    std::vector<double> objective_trace;
};

struct IterationRecord {
    std::size_t iteration{0};
    double objective{0.0};
    double w_time_ms{0.0};
    double u_time_ms{0.0};
    double zero_channel_fraction{0.0};
};

/// Per-iteration trace of one compression run (PAM or ADMM).
struct SolverReport {
    double initial_objective{0.0};
    std::vector<IterationRecord> iterations;

    /// Wall-clock of the W- and U-updates only (objective evaluation excluded).
    [[nodiscard]] double compress_seconds() const noexcept
    {
        double ms = 0.0;
        for (const auto& r : iterations) {
            ms += r.w_time_ms + r.u_time_ms;
        }
        return ms / 1000.0;
    }
};

inline void write_trace_csv(std::ostream& out, const SolverReport& report)
{
    out << "iteration,objective,w_time_ms,u_time_ms,zero_channel_fraction\n";
    out << std::setprecision(17);
    for (const auto& r : report.iterations) {
        out << r.iteration << ',' << r.objective << ',' << r.w_time_ms << ',' << r.u_time_ms << ','
            << r.zero_channel_fraction << '\n';
    }
}

namespace detail {

using Clock = std::chrono::steady_clock;

inline double elapsed_ms(Clock::time_point since)
{
    return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

/// grads += tau * (w - target)
inline void add_coupling_gradient(LayerSet& grads, const LayerSet& w, const LayerSet& target, double tau)
{
    for (std::size_t l = 0; l < grads.size(); ++l) {
        auto g = grads.tensor(l).data();
        auto x = w.tensor(l).data();
        auto m = target.tensor(l).data();
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] = static_cast<float>(static_cast<double>(g[i]) +
                                      tau * (static_cast<double>(x[i]) - static_cast<double>(m[i])));
        }
    }
}

/// argmin_W L(W) + tau/2 ||W - target||^2, exactly or by one SGD epoch
/// started from the model's current parameters.
template <Model M>
LayerSet solve_w_subproblem(M& model, const Dataset& data, const LayerSet& target, double tau, double alpha,
                            double eta, std::size_t batch_size, std::uint64_t seed, std::uint64_t epoch, WSolve mode)
{
    if (mode == WSolve::exact) {
        if constexpr (ExactlySolvable<M>) {
            model.parameters() = model.solve_coupled(target, tau, alpha);
            return model.parameters();
        } else {
            throw std::invalid_argument("exact W-solve requested for a model without a closed-form subproblem");
        }
    }
    const SgdOptions opt{eta, alpha, batch_size, seed};
    sgd_epoch(model, data, opt, epoch,
              [&](LayerSet& grads, const LayerSet& w) { add_coupling_gradient(grads, w, target, tau); });
    return model.parameters();
}

} // namespace detail

/// f(W, U) = L(W) + lambda ||U||_{2,p}^p + beta/2 ||W - U||_F^2 on one batch.
template <Model M>
[[nodiscard]] double penalized_objective(const PamState& state, const M& model, const Batch& batch,
                                         const HyperParams& hp)
{
    require_congruent(state.w, state.u, "penalized_objective");
    M at_w = model;
    at_w.parameters() = state.w;
    const double value = at_w.loss(batch, hp.alpha) + hp.lambda * l2p_norm_p(state.u, hp.p) +
                         0.5 * hp.beta * squared_distance(state.w, state.u);
    if (!std::isfinite(value)) {
        throw NumericalError("penalized objective is not finite");
    }
    return value;
}

/// W^{k+1}: minimizes L(W) + (beta+rho1)/2 ||W - M||^2 with
/// M = (beta U^k + rho1 W^k) / (beta + rho1) frozen for the whole epoch.
/// Leaves the model holding W^{k+1}.
template <Model M>
LayerSet w_update(const PamState& state, M& model, const Dataset& data, const HyperParams& hp)
{
    const double tau = hp.beta + hp.rho1;
    const LayerSet anchor = weighted_sum(hp.beta / tau, state.u, hp.rho1 / tau, state.w);
    model.parameters() = state.w;
    return detail::solve_w_subproblem(model, data, anchor, tau, hp.alpha, hp.eta, hp.batch_size, hp.seed, state.k,
                                      hp.w_solve);
}

/// U^{k+1}: channel-wise group prox of N = (beta W^{k+1} + rho2 U^k) / (beta + rho2)
/// with weight lambda / (beta + rho2). `state.w` must already hold W^{k+1}.
[[nodiscard]] inline LayerSet u_update(const PamState& state, const HyperParams& hp)
{
    require_congruent(state.w, state.u, "u_update");
    const double denom = hp.beta + hp.rho2;
    const double cw = hp.beta / denom;
    const double cu = hp.rho2 / denom;
    ProxParams prox;
    prox.lambda = hp.lambda / denom;
    prox.p = hp.p;

    LayerSet out = state.u;
    std::vector<double> n;
    for (std::size_t l = 0; l < out.size(); ++l) {
        const Tensor4& w = state.w.tensor(l);
        const Tensor4& u = state.u.tensor(l);
        Tensor4& dst = out.tensor(l);
        for (std::size_t j = 0; j < dst.c_out(); ++j) {
            auto wc = w.channel(j);
            auto uc = u.channel(j);
            n.resize(wc.size());
            for (std::size_t i = 0; i < n.size(); ++i) {
                n[i] = cw * static_cast<double>(wc[i]) + cu * static_cast<double>(uc[i]);
            }
            auto target = dst.channel(j);
            if (hp.lambda == 0.0) {
                for (std::size_t i = 0; i < n.size(); ++i) {
                    target[i] = static_cast<float>(n[i]);
                }
                continue;
            }
            const std::vector<double> x = group_prox(n, prox);
            for (std::size_t i = 0; i < x.size(); ++i) {
                target[i] = static_cast<float>(x[i]);
            }
        }
    }
    return out;
}

struct PamResult {
    PamState state;
    SolverReport report;
};

/// The alternating loop: `outer_epochs` rounds of (w_update, u_update),
/// starting from U^0 = W^0 = the model's current weights. The model ends
/// holding W^{k+1}; the objective is evaluated on the whole of `data`.
template <Model M>
PamResult run_pam(M& model, const Dataset& data, const HyperParams& hp)
{
    hp.validate();
    PamResult res;
    PamState& st = res.state;
    st.w = model.parameters();
    st.u = st.w;
    const Batch full = whole(data);
    res.report.initial_objective = penalized_objective(st, model, full, hp);

    for (std::size_t it = 0; it < hp.outer_epochs; ++it) {
        auto t0 = detail::Clock::now();
        st.w = w_update(st, model, data, hp);
        const double w_ms = detail::elapsed_ms(t0);

        t0 = detail::Clock::now();
        st.u = u_update(st, hp);
        const double u_ms = detail::elapsed_ms(t0);

        ++st.k;
        const double f = penalized_objective(st, model, full, hp);
        st.objective_trace.push_back(f);
        res.report.iterations.push_back({st.k, f, w_ms, u_ms, sparsity(st.u).zero_channel_fraction()});
    }
    model.parameters() = st.w;
    return res;
}

} // namespace goprune
