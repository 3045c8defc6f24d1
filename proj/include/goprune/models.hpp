#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "data.hpp"
#include "tensor.hpp"

namespace goprune {

struct LossAndGrad {
    double loss{0.0};
    LayerSet grads;
};

/// Anything the compression solvers can train: parameters exposed as a
/// LayerSet, a differentiable loss L(W) = data loss + alpha ||W||_F^2.
template <class M>
concept Model = requires(M& m, const M& cm, const Batch& b, double alpha) {
    { m.parameters() } -> std::same_as<LayerSet&>;
    { cm.parameters() } -> std::same_as<const LayerSet&>;
    { cm.loss_and_grad(b, alpha) } -> std::same_as<LossAndGrad>;
    { cm.loss(b, alpha) } -> std::convertible_to<double>;
};

template <class M>
concept Classifier = Model<M> && requires(const M& cm, const Batch& b) {
    { cm.logits(b) } -> std::same_as<std::vector<double>>;
    { cm.n_classes() } -> std::convertible_to<std::size_t>;
};

/// Models whose coupled subproblem argmin_W L(W) + tau/2 ||W - target||^2 has
/// a closed form.
template <class M>
concept ExactlySolvable = Model<M> && requires(const M& cm, const LayerSet& target, double tau, double alpha) {
    { cm.solve_coupled(target, tau, alpha) } -> std::same_as<LayerSet>;
};

enum class LayerKind { conv, dense };

struct LayerSpec {
    LayerKind kind{LayerKind::dense};
    std::size_t out{0};
    std::size_t kernel{3}; ///< conv only; odd, "same" padding
    bool pool{false};      ///< conv only; 2x2 average pooling after the ReLU
};

struct InputShape {
    std::size_t channels{1};
    std::size_t height{1};
    std::size_t width{1};
    [[nodiscard]] std::size_t size() const noexcept { return channels * height * width; }
    friend bool operator==(const InputShape&, const InputShape&) = default;
};

/// Sequential stack: conv layers (ReLU, optional pooling) then dense layers
/// (ReLU on all but the last). The last dense layer is the class readout.
struct Architecture {
    InputShape input;
    std::vector<LayerSpec> layers;

    [[nodiscard]] std::size_t n_classes() const { return layers.back().out; }
};

[[nodiscard]] inline Architecture softmax_regression(std::size_t dim, std::size_t classes)
{
    return {{dim, 1, 1}, {{LayerKind::dense, classes}}};
}

[[nodiscard]] inline Architecture mlp(std::size_t dim, std::size_t hidden, std::size_t classes)
{
    return {{dim, 1, 1}, {{LayerKind::dense, hidden}, {LayerKind::dense, classes}}};
}

/// Two 3x3 conv layers with pooling, then a dense readout. Input is a
/// side x side single-channel image (side must be divisible by 4).
[[nodiscard]] inline Architecture small_cnn(std::size_t side, std::size_t c1, std::size_t c2, std::size_t classes)
{
    return {{1, side, side},
            {{LayerKind::conv, c1, 3, true}, {LayerKind::conv, c2, 3, true}, {LayerKind::dense, classes}}};
}

/// Desk-scale classifier with manual forward/backward passes.
class TinyModel {
public:
    TinyModel() = default;

    /// He-normal initialization.
    TinyModel(Architecture arch, std::uint64_t seed) : arch_(std::move(arch))
    {
        build_shapes();
        std::mt19937_64 rng(derive_seed(seed, 0x1417));
        std::normal_distribution<double> normal(0.0, 1.0);
        for (std::size_t l = 0; l < arch_.layers.size(); ++l) {
            const TensorDims dims = layer_dims(l);
            Tensor4 w(dims);
            const double scale = std::sqrt(2.0 / static_cast<double>(dims.channel_size()));
            for (float& v : w.data()) {
                v = static_cast<float>(scale * normal(rng));
            }
            params_.add(layer_name(l), std::move(w));
        }
    }

    /// Rebuilds a model from stored parameters; layer widths are taken from
    /// the tensors, so pruned checkpoints load into the same architecture family.
    TinyModel(Architecture arch, LayerSet params) : arch_(std::move(arch)), params_(std::move(params))
    {
        if (params_.size() != arch_.layers.size()) {
            throw std::invalid_argument("model: expected " + std::to_string(arch_.layers.size()) +
                                        " parameter tensors, got " + std::to_string(params_.size()));
        }
        for (std::size_t l = 0; l < arch_.layers.size(); ++l) {
            arch_.layers[l].out = params_.tensor(l).c_out();
        }
        build_shapes();
        for (std::size_t l = 0; l < arch_.layers.size(); ++l) {
            if (!(params_.tensor(l).dims() == layer_dims(l))) {
                throw std::invalid_argument("model: tensor '" + params_[l].name + "' has incompatible dims");
            }
        }
    }

    [[nodiscard]] const Architecture& architecture() const noexcept { return arch_; }
    [[nodiscard]] LayerSet& parameters() noexcept { return params_; }
    [[nodiscard]] const LayerSet& parameters() const noexcept { return params_; }
    [[nodiscard]] std::size_t n_classes() const { return arch_.n_classes(); }
    [[nodiscard]] std::size_t input_dim() const noexcept { return arch_.input.size(); }
    /// All layers except the class readout.
    [[nodiscard]] std::size_t prunable_layers() const noexcept { return arch_.layers.size() - 1; }

    [[nodiscard]] static std::string layer_name(std::size_t l) { return "layer" + std::to_string(l); }

    [[nodiscard]] std::vector<double> logits(const Batch& batch) const
    {
        check_batch(batch);
        const std::size_t classes = n_classes();
        std::vector<double> out(batch.n * classes);
        Workspace ws;
        for (std::size_t s = 0; s < batch.n; ++s) {
            forward_sample(batch.sample(s), ws);
            std::copy(ws.acts.back().begin(), ws.acts.back().end(), out.begin() + static_cast<std::ptrdiff_t>(s * classes));
        }
        return out;
    }

    [[nodiscard]] double loss(const Batch& batch, double alpha) const
    {
        check_batch(batch);
        Workspace ws;
        double total = 0.0;
        for (std::size_t s = 0; s < batch.n; ++s) {
            forward_sample(batch.sample(s), ws);
            total += cross_entropy(ws.acts.back(), batch.y[s]);
        }
        return finish_loss(total / static_cast<double>(batch.n), alpha);
    }

    /// Mean cross-entropy + alpha ||W||_F^2 and its gradient.
    [[nodiscard]] LossAndGrad loss_and_grad(const Batch& batch, double alpha) const
    {
        check_batch(batch);
        const std::size_t L = arch_.layers.size();
        std::vector<std::vector<double>> acc(L);
        for (std::size_t l = 0; l < L; ++l) {
            acc[l].assign(params_.tensor(l).size(), 0.0);
        }
        Workspace ws;
        double total = 0.0;
        const double inv_n = 1.0 / static_cast<double>(batch.n);
        for (std::size_t s = 0; s < batch.n; ++s) {
            forward_sample(batch.sample(s), ws);
            const auto& logit = ws.acts.back();
            total += cross_entropy(logit, batch.y[s]);
            std::vector<double> delta = softmax(logit);
            delta[static_cast<std::size_t>(batch.y[s])] -= 1.0;
            for (double& d : delta) {
                d *= inv_n;
            }
            backward_sample(ws, std::move(delta), acc);
        }
        LossAndGrad out;
        out.loss = finish_loss(total * inv_n, alpha);
        out.grads = params_.zeros_like();
        for (std::size_t l = 0; l < L; ++l) {
            auto g = out.grads.tensor(l).data();
            auto w = params_.tensor(l).data();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] = static_cast<float>(acc[l][i] + 2.0 * alpha * static_cast<double>(w[i]));
            }
        }
        if (!out.grads.all_finite()) {
            throw NumericalError("non-finite gradient");
        }
        return out;
    }

    /// Removes output channels of layer l (keeping `keep`, ascending) and the
    /// matching input slices of layer l + 1.
    void prune_channels(std::size_t l, std::span<const std::size_t> keep)
    {
        if (l + 1 >= arch_.layers.size()) {
            throw std::invalid_argument("the readout layer cannot be channel-pruned");
        }
        if (keep.empty()) {
            throw std::invalid_argument("pruning would empty layer " + layer_name(l));
        }
        if (!std::is_sorted(keep.begin(), keep.end()) ||
            std::adjacent_find(keep.begin(), keep.end()) != keep.end() || keep.back() >= arch_.layers[l].out) {
            throw std::invalid_argument("keep indices must be strictly increasing and in range");
        }
        const Tensor4& w = params_.tensor(l);
        Tensor4 pruned(TensorDims{w.c_in(), keep.size(), w.dims().kh, w.dims().kw});
        for (std::size_t k = 0; k < keep.size(); ++k) {
            auto src = w.channel(keep[k]);
            std::copy(src.begin(), src.end(), pruned.channel(k).begin());
        }

        // Each output channel of layer l feeds `block` consecutive inputs of
        // layer l + 1 (the spatial positions after pooling when l + 1 is dense).
        const Tensor4& next = params_.tensor(l + 1);
        const std::size_t block = arch_.layers[l + 1].kind == LayerKind::dense ? shapes_[l + 1].height * shapes_[l + 1].width : 1;
        const TensorDims nd = next.dims();
        Tensor4 next_pruned(TensorDims{keep.size() * block, nd.c_out, nd.kh, nd.kw});
        for (std::size_t o = 0; o < nd.c_out; ++o) {
            for (std::size_t k = 0; k < keep.size(); ++k) {
                for (std::size_t b = 0; b < block; ++b) {
                    for (std::size_t m = 0; m < nd.kh; ++m) {
                        for (std::size_t n = 0; n < nd.kw; ++n) {
                            next_pruned(k * block + b, o, m, n) = next(keep[k] * block + b, o, m, n);
                        }
                    }
                }
            }
        }
        params_.tensor(l) = std::move(pruned);
        params_.tensor(l + 1) = std::move(next_pruned);
        arch_.layers[l].out = keep.size();
        build_shapes();
    }

private:
    struct Workspace {
        std::vector<std::vector<double>> acts; ///< input to each layer, then logits
        std::vector<std::vector<double>> pre;  ///< pre-activation of each layer
    };

    void build_shapes()
    {
        if (arch_.layers.empty() || arch_.layers.back().kind != LayerKind::dense) {
            throw std::invalid_argument("architecture must end in a dense readout layer");
        }
        shapes_.assign(1, arch_.input);
        bool seen_dense = false;
        for (const auto& spec : arch_.layers) {
            if (spec.out == 0) {
                throw std::invalid_argument("layer width must be positive");
            }
            InputShape s = shapes_.back();
            if (spec.kind == LayerKind::conv) {
                if (seen_dense) {
                    throw std::invalid_argument("conv layers must precede dense layers");
                }
                if (spec.kernel % 2 == 0) {
                    throw std::invalid_argument("conv kernel must be odd");
                }
                s.channels = spec.out;
                if (spec.pool) {
                    if (s.height % 2 != 0 || s.width % 2 != 0) {
                        throw std::invalid_argument("pooling needs even spatial size");
                    }
                    s.height /= 2;
                    s.width /= 2;
                }
            } else {
                seen_dense = true;
                s = {spec.out, 1, 1};
            }
            shapes_.push_back(s);
        }
    }

    [[nodiscard]] TensorDims layer_dims(std::size_t l) const
    {
        const auto& spec = arch_.layers[l];
        if (spec.kind == LayerKind::conv) {
            return {shapes_[l].channels, spec.out, spec.kernel, spec.kernel};
        }
        return {shapes_[l].size(), spec.out, 1, 1};
    }

    void check_batch(const Batch& batch) const
    {
        if (batch.dim != input_dim()) {
            throw std::invalid_argument("batch feature dim " + std::to_string(batch.dim) + " != model input " +
                                        std::to_string(input_dim()));
        }
        if (batch.n == 0) {
            throw std::invalid_argument("empty batch");
        }
    }

    [[nodiscard]] double finish_loss(double data_loss, double alpha) const
    {
        const double loss = data_loss + alpha * squared_norm(params_);
        if (!std::isfinite(loss)) {
            throw NumericalError("non-finite loss");
        }
        return loss;
    }

    static std::vector<double> softmax(const std::vector<double>& z)
    {
        const double mx = *std::max_element(z.begin(), z.end());
        std::vector<double> p(z.size());
        double sum = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            p[i] = std::exp(z[i] - mx);
            sum += p[i];
        }
        for (double& v : p) {
            v /= sum;
        }
        return p;
    }

    static double cross_entropy(const std::vector<double>& z, int label)
    {
        const double mx = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (double v : z) {
            sum += std::exp(v - mx);
        }
        return mx + std::log(sum) - z[static_cast<std::size_t>(label)];
    }

    void forward_sample(std::span<const float> x, Workspace& ws) const
    {
        const std::size_t L = arch_.layers.size();
        ws.acts.resize(L + 1);
        ws.pre.resize(L);
        ws.acts[0].assign(x.begin(), x.end());
        for (std::size_t l = 0; l < L; ++l) {
            const auto& spec = arch_.layers[l];
            const Tensor4& w = params_.tensor(l);
            const auto& in = ws.acts[l];
            auto& z = ws.pre[l];
            auto& out = ws.acts[l + 1];
            if (spec.kind == LayerKind::conv) {
                const std::size_t H = shapes_[l].height;
                const std::size_t W = shapes_[l].width;
                conv_forward(w, in, H, W, z);
                std::vector<double> h(z.size());
                for (std::size_t i = 0; i < z.size(); ++i) {
                    h[i] = z[i] > 0.0 ? z[i] : 0.0;
                }
                if (spec.pool) {
                    out = avg_pool(h, spec.out, H, W);
                } else {
                    out = std::move(h);
                }
            } else {
                z.assign(spec.out, 0.0);
                for (std::size_t o = 0; o < spec.out; ++o) {
                    auto col = w.channel(o);
                    double acc = 0.0;
                    for (std::size_t i = 0; i < col.size(); ++i) {
                        acc += static_cast<double>(col[i]) * in[i];
                    }
                    z[o] = acc;
                }
                out = z;
                if (l + 1 < L) {
                    for (double& v : out) {
                        v = v > 0.0 ? v : 0.0;
                    }
                }
            }
        }
    }

    void backward_sample(const Workspace& ws, std::vector<double> delta, std::vector<std::vector<double>>& acc) const
    {
        // delta holds dLoss/d(output of layer l) on entry to each iteration.
        for (std::size_t l = arch_.layers.size(); l-- > 0;) {
            const auto& spec = arch_.layers[l];
            const Tensor4& w = params_.tensor(l);
            const auto& in = ws.acts[l];
            const auto& z = ws.pre[l];
            std::vector<double> dz;
            if (spec.kind == LayerKind::dense) {
                dz = std::move(delta);
                if (l + 1 < arch_.layers.size()) {
                    for (std::size_t o = 0; o < dz.size(); ++o) {
                        if (!(z[o] > 0.0)) {
                            dz[o] = 0.0;
                        }
                    }
                }
                std::vector<double> din(in.size(), 0.0);
                for (std::size_t o = 0; o < spec.out; ++o) {
                    if (dz[o] == 0.0) {
                        continue;
                    }
                    auto col = w.channel(o);
                    double* g = acc[l].data() + o * col.size();
                    for (std::size_t i = 0; i < col.size(); ++i) {
                        g[i] += dz[o] * in[i];
                        din[i] += dz[o] * static_cast<double>(col[i]);
                    }
                }
                delta = std::move(din);
            } else {
                const std::size_t H = shapes_[l].height;
                const std::size_t W = shapes_[l].width;
                dz = spec.pool ? avg_pool_backward(delta, spec.out, H, W) : std::move(delta);
                for (std::size_t i = 0; i < dz.size(); ++i) {
                    if (!(z[i] > 0.0)) {
                        dz[i] = 0.0;
                    }
                }
                delta = conv_backward(w, in, H, W, dz, acc[l], l > 0);
            }
        }
    }

    static void conv_forward(const Tensor4& w, const std::vector<double>& in, std::size_t H, std::size_t W,
                             std::vector<double>& z)
    {
        const std::size_t C_in = w.c_in();
        const std::size_t C_out = w.c_out();
        const std::size_t K = w.dims().kh;
        const auto pad = static_cast<std::ptrdiff_t>(K / 2);
        z.assign(C_out * H * W, 0.0);
        for (std::size_t o = 0; o < C_out; ++o) {
            for (std::size_t i = 0; i < C_in; ++i) {
                const double* src = in.data() + i * H * W;
                for (std::size_t m = 0; m < K; ++m) {
                    for (std::size_t n = 0; n < K; ++n) {
                        const double wv = w(i, o, m, n);
                        if (wv == 0.0) {
                            continue;
                        }
                        const auto dy = static_cast<std::ptrdiff_t>(m) - pad;
                        const auto dx = static_cast<std::ptrdiff_t>(n) - pad;
                        for (std::size_t y = 0; y < H; ++y) {
                            const auto sy = static_cast<std::ptrdiff_t>(y) + dy;
                            if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(H)) {
                                continue;
                            }
                            double* dst = z.data() + (o * H + y) * W;
                            const double* row = src + static_cast<std::size_t>(sy) * W;
                            const std::size_t x0 = dx < 0 ? static_cast<std::size_t>(-dx) : 0;
                            const std::size_t x1 = dx > 0 ? W - static_cast<std::size_t>(dx) : W;
                            for (std::size_t x = x0; x < x1; ++x) {
                                dst[x] += wv * row[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(x) + dx)];
                            }
                        }
                    }
                }
            }
        }
    }

    static std::vector<double> conv_backward(const Tensor4& w, const std::vector<double>& in, std::size_t H,
                                             std::size_t W, const std::vector<double>& dz, std::vector<double>& grad,
                                             bool need_input_grad)
    {
        const std::size_t C_in = w.c_in();
        const std::size_t C_out = w.c_out();
        const std::size_t K = w.dims().kh;
        const auto pad = static_cast<std::ptrdiff_t>(K / 2);
        std::vector<double> din(need_input_grad ? C_in * H * W : 0, 0.0);
        for (std::size_t o = 0; o < C_out; ++o) {
            for (std::size_t i = 0; i < C_in; ++i) {
                const double* src = in.data() + i * H * W;
                for (std::size_t m = 0; m < K; ++m) {
                    for (std::size_t n = 0; n < K; ++n) {
                        const auto dy = static_cast<std::ptrdiff_t>(m) - pad;
                        const auto dx = static_cast<std::ptrdiff_t>(n) - pad;
                        const double wv = w(i, o, m, n);
                        const std::size_t x0 = dx < 0 ? static_cast<std::size_t>(-dx) : 0;
                        const std::size_t x1 = dx > 0 ? W - static_cast<std::size_t>(dx) : W;
                        double g = 0.0;
                        for (std::size_t y = 0; y < H; ++y) {
                            const auto sy = static_cast<std::ptrdiff_t>(y) + dy;
                            if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(H)) {
                                continue;
                            }
                            const double* d = dz.data() + (o * H + y) * W;
                            const double* row = src + static_cast<std::size_t>(sy) * W;
                            double* drow = need_input_grad ? din.data() + i * H * W + static_cast<std::size_t>(sy) * W : nullptr;
                            for (std::size_t x = x0; x < x1; ++x) {
                                const auto sx = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(x) + dx);
                                g += d[x] * row[sx];
                                if (drow != nullptr) {
                                    drow[sx] += d[x] * wv;
                                }
                            }
                        }
                        grad[w.offset(i, o, m, n)] += g;
                    }
                }
            }
        }
        return din;
    }

    static std::vector<double> avg_pool(const std::vector<double>& h, std::size_t C, std::size_t H, std::size_t W)
    {
        const std::size_t Ho = H / 2;
        const std::size_t Wo = W / 2;
        std::vector<double> out(C * Ho * Wo);
        for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t y = 0; y < Ho; ++y) {
                for (std::size_t x = 0; x < Wo; ++x) {
                    const double* r0 = h.data() + (c * H + 2 * y) * W + 2 * x;
                    const double* r1 = r0 + W;
                    out[(c * Ho + y) * Wo + x] = 0.25 * (r0[0] + r0[1] + r1[0] + r1[1]);
                }
            }
        }
        return out;
    }

    static std::vector<double> avg_pool_backward(const std::vector<double>& d, std::size_t C, std::size_t H,
                                                 std::size_t W)
    {
        const std::size_t Ho = H / 2;
        const std::size_t Wo = W / 2;
        std::vector<double> out(C * H * W);
        for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t y = 0; y < H; ++y) {
                for (std::size_t x = 0; x < W; ++x) {
                    out[(c * H + y) * W + x] = 0.25 * d[(c * Ho + y / 2) * Wo + x / 2];
                }
            }
        }
        return out;
    }

    Architecture arch_;
    LayerSet params_;
    std::vector<InputShape> shapes_; ///< shapes_[l] is the input shape of layer l
};

/// Predicted class per sample; argmax ties resolve to the lowest class index.
template <Classifier M>
[[nodiscard]] std::vector<int> predict(const M& model, const Batch& batch)
{
    const std::vector<double> z = model.logits(batch);
    const std::size_t C = model.n_classes();
    std::vector<int> out(batch.n);
    for (std::size_t s = 0; s < batch.n; ++s) {
        const auto first = z.begin() + static_cast<std::ptrdiff_t>(s * C);
        out[s] = static_cast<int>(std::max_element(first, first + static_cast<std::ptrdiff_t>(C)) - first);
    }
    return out;
}

/// TOP-1 accuracy in [0, 1].
template <Classifier M>
[[nodiscard]] double evaluate_accuracy(const M& model, const Dataset& data)
{
    if (data.empty()) {
        return 0.0;
    }
    const auto pred = predict(model, whole(data));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        correct += pred[i] == data.labels[i] ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(pred.size());
}

/// L(W) = 1/2 ||W - A||_F^2 + alpha ||W||_F^2, independent of the data. Used
/// where the W-subproblem must be solved exactly.
class QuadraticModel {
public:
    QuadraticModel(LayerSet target, LayerSet init) : target_(std::move(target)), params_(std::move(init))
    {
        require_congruent(target_, params_, "QuadraticModel");
    }

    [[nodiscard]] LayerSet& parameters() noexcept { return params_; }
    [[nodiscard]] const LayerSet& parameters() const noexcept { return params_; }
    [[nodiscard]] const LayerSet& target() const noexcept { return target_; }

    [[nodiscard]] double loss(const Batch&, double alpha) const
    {
        return 0.5 * squared_distance(params_, target_) + alpha * squared_norm(params_);
    }

    [[nodiscard]] LossAndGrad loss_and_grad(const Batch& b, double alpha) const
    {
        LossAndGrad out{loss(b, alpha), weighted_sum(1.0 + 2.0 * alpha, params_, -1.0, target_)};
        return out;
    }

    /// argmin_W L(W) + tau/2 ||W - M||^2 = (A + tau M) / (1 + 2 alpha + tau).
    [[nodiscard]] LayerSet solve_coupled(const LayerSet& m, double tau, double alpha) const
    {
        const double denom = 1.0 + 2.0 * alpha + tau;
        return weighted_sum(1.0 / denom, target_, tau / denom, m);
    }

private:
    LayerSet target_;
    LayerSet params_;
};

/// Linear regression y = <x, w> with w stored as one (group_size, groups, 1, 1)
/// tensor: each output channel is one contiguous feature group.
/// L(W) = mean (y - <x, w>)^2 / 2 + alpha ||W||_F^2.
class GroupRegressionModel {
public:
    GroupRegressionModel(std::size_t groups, std::size_t group_size)
    {
        params_.add("weights", Tensor4(TensorDims{group_size, groups, 1, 1}));
    }

    [[nodiscard]] LayerSet& parameters() noexcept { return params_; }
    [[nodiscard]] const LayerSet& parameters() const noexcept { return params_; }

    [[nodiscard]] double loss(const Batch& b, double alpha) const { return evaluate(b, alpha, nullptr); }

    [[nodiscard]] LossAndGrad loss_and_grad(const Batch& b, double alpha) const
    {
        std::vector<double> g(params_.tensor(0).size(), 0.0);
        LossAndGrad out;
        out.loss = evaluate(b, alpha, &g);
        out.grads = params_.zeros_like();
        auto dst = out.grads.tensor(0).data();
        for (std::size_t i = 0; i < g.size(); ++i) {
            dst[i] = static_cast<float>(g[i]);
        }
        return out;
    }

    /// Mean squared error on a dataset (targets required).
    [[nodiscard]] double mse(const Dataset& data) const { return 2.0 * evaluate(whole(data), 0.0, nullptr); }

private:
    double evaluate(const Batch& b, double alpha, std::vector<double>* grad) const
    {
        auto w = params_.tensor(0).data();
        if (b.dim != w.size() || b.t.size() != b.n || b.n == 0) {
            throw std::invalid_argument("group regression: batch must carry targets and match the weight size");
        }
        double total = 0.0;
        const double inv_n = 1.0 / static_cast<double>(b.n);
        for (std::size_t s = 0; s < b.n; ++s) {
            auto x = b.sample(s);
            double pred = 0.0;
            for (std::size_t k = 0; k < w.size(); ++k) {
                pred += static_cast<double>(w[k]) * static_cast<double>(x[k]);
            }
            const double r = pred - static_cast<double>(b.t[s]);
            total += 0.5 * r * r;
            if (grad != nullptr) {
                for (std::size_t k = 0; k < w.size(); ++k) {
                    (*grad)[k] += r * inv_n * static_cast<double>(x[k]);
                }
            }
        }
        if (grad != nullptr) {
            for (std::size_t k = 0; k < w.size(); ++k) {
                (*grad)[k] += 2.0 * alpha * static_cast<double>(w[k]);
            }
        }
        const double loss = total * inv_n + alpha * squared_norm(params_);
        if (!std::isfinite(loss)) {
            throw NumericalError("non-finite loss");
        }
        return loss;
    }

    LayerSet params_;
};

static_assert(Classifier<TinyModel>);
static_assert(ExactlySolvable<QuadraticModel>);
static_assert(Model<GroupRegressionModel>);

} // namespace goprune
