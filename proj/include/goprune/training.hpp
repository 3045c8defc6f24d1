#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "data.hpp"
#include "models.hpp"

namespace goprune {

struct SgdOptions {
    double eta{0.01};
    double alpha{1e-4};
    std::size_t batch_size{128};
    std::uint64_t seed{0};
};

/// No extra gradient term.
struct NoPenalty {
    void operator()(LayerSet&, const LayerSet&) const noexcept {}
};

/// One pass over `data` in a seeded order. Each step is
/// W <- W - eta * (grad L(W) + extra(W)), where `extra` adds any penalty
/// gradient into the batch gradient in place. Returns the mean batch loss.
template <Model M, class Extra = NoPenalty>
double sgd_epoch(M& model, const Dataset& data, const SgdOptions& opt, std::uint64_t epoch, Extra&& extra = {})
{
    const auto order = epoch_permutation(data.size(), opt.seed, epoch);
    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (auto idx : batches_of(order, opt.batch_size)) {
        const Batch batch = gather(data, idx);
        LossAndGrad lg = model.loss_and_grad(batch, opt.alpha);
        if (!std::isfinite(lg.loss)) {
            throw NumericalError("non-finite loss during SGD");
        }
        extra(lg.grads, model.parameters());
        LayerSet& w = model.parameters();
        for (std::size_t l = 0; l < w.size(); ++l) {
            auto dst = w.tensor(l).data();
            auto g = lg.grads.tensor(l).data();
            for (std::size_t i = 0; i < dst.size(); ++i) {
                dst[i] = static_cast<float>(static_cast<double>(dst[i]) - opt.eta * static_cast<double>(g[i]));
            }
        }
        if (!w.all_finite()) {
            throw NumericalError("SGD step produced non-finite weights");
        }
        loss_sum += lg.loss;
        ++steps;
    }
    return steps == 0 ? 0.0 : loss_sum / static_cast<double>(steps);
}

/// Plain SGD with weight decay for `epochs` epochs; epoch counters start at
/// `first_epoch` so consecutive calls draw fresh shuffles.
template <Model M>
void train(M& model, const Dataset& data, std::size_t epochs, const SgdOptions& opt, std::uint64_t first_epoch = 0)
{
    for (std::size_t e = 0; e < epochs; ++e) {
        sgd_epoch(model, data, opt, first_epoch + e);
    }
}

} // namespace goprune
