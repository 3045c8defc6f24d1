#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "data.hpp"
#include "models.hpp"
#include "tensor.hpp"
#include "training.hpp"

namespace goprune {

/// Per-layer min-max normalized channel magnitudes, each in [0, 1].
struct ChannelImportance {
    std::vector<std::string> layers;
    std::vector<std::vector<double>> scores;
};

/// Score of channel j: (m_j - min m) / (max m - min m) with m_j the l2 norm of
/// the channel; a layer whose channels all have equal magnitude scores 0.5.
[[nodiscard]] inline ChannelImportance importance_scores(const LayerSet& weights)
{
    if (weights.empty()) {
        throw std::invalid_argument("importance_scores: no layers");
    }
    ChannelImportance out;
    for (const auto& e : weights) {
        const Tensor4& t = e.tensor;
        std::vector<double> m(t.c_out());
        for (std::size_t j = 0; j < m.size(); ++j) {
            m[j] = channel_norm(t, j);
        }
        const auto [lo, hi] = std::minmax_element(m.begin(), m.end());
        const double min = *lo;
        const double range = *hi - *lo;
        std::vector<double> s(m.size(), 0.5);
        if (range > 0.0) {
            for (std::size_t j = 0; j < m.size(); ++j) {
                s[j] = (m[j] - min) / range;
            }
        }
        out.layers.push_back(e.name);
        out.scores.push_back(std::move(s));
    }
    return out;
}

/// Number of channels kept out of `c_out` at pruning ratio `ratio` (fraction removed).
[[nodiscard]] inline std::size_t kept_count(std::size_t c_out, double ratio)
{
    const auto k = static_cast<std::size_t>(std::lround((1.0 - ratio) * static_cast<double>(c_out)));
    return std::clamp<std::size_t>(k, 1, c_out);
}

inline void check_ratio(double ratio)
{
    if (!(ratio > 0.0 && ratio < 1.0)) {
        throw std::invalid_argument("pruning ratio must lie in (0, 1), got " + std::to_string(ratio));
    }
}

/// Per-layer keep flags over output channels.
struct PruneMask {
    double ratio{0.0};
    std::vector<std::string> layers;
    std::vector<std::vector<bool>> keep;

    /// Ascending indices of kept channels of layer i.
    [[nodiscard]] std::vector<std::size_t> kept_indices(std::size_t i) const
    {
        std::vector<std::size_t> out;
        for (std::size_t j = 0; j < keep.at(i).size(); ++j) {
            if (keep[i][j]) {
                out.push_back(j);
            }
        }
        return out;
    }

    friend bool operator==(const PruneMask&, const PruneMask&) = default;
};

/// Keeps the top-scoring channels of every layer; equal scores keep the lower
/// channel index first.
[[nodiscard]] inline PruneMask build_mask(const ChannelImportance& scores, double ratio)
{
    check_ratio(ratio);
    PruneMask mask;
    mask.ratio = ratio;
    mask.layers = scores.layers;
    for (const auto& s : scores.scores) {
        std::vector<std::size_t> order(s.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
        std::vector<bool> keep(s.size(), false);
        const std::size_t k = kept_count(s.size(), ratio);
        for (std::size_t r = 0; r < k; ++r) {
            keep[order[r]] = true;
        }
        mask.keep.push_back(std::move(keep));
    }
    return mask;
}

/// The layers of `model` that may lose channels (everything but the readout).
[[nodiscard]] inline LayerSet prunable_weights(const TinyModel& model)
{
    LayerSet out;
    for (std::size_t l = 0; l < model.prunable_layers(); ++l) {
        out.add(model.parameters()[l].name, model.parameters().tensor(l));
    }
    return out;
}

/// Physically removes masked channels (and the input slices they feed).
[[nodiscard]] inline TinyModel apply_mask(const TinyModel& model, const PruneMask& mask)
{
    TinyModel out = model;
    const LayerSet& params = model.parameters();
    for (std::size_t i = 0; i < mask.layers.size(); ++i) {
        std::size_t l = 0;
        while (l < params.size() && params[l].name != mask.layers[i]) {
            ++l;
        }
        if (l == params.size()) {
            throw std::invalid_argument("mask names unknown layer " + mask.layers[i]);
        }
        if (mask.keep[i].size() != params.tensor(l).c_out()) {
            throw std::invalid_argument("mask for " + mask.layers[i] + " has wrong channel count");
        }
        const auto kept = mask.kept_indices(i);
        if (kept.empty()) {
            throw std::invalid_argument("mask would empty layer " + mask.layers[i]);
        }
        if (kept.size() == mask.keep[i].size()) {
            continue;
        }
        out.prune_channels(l, kept);
    }
    return out;
}

// Text format, one line per layer after a header:
//   # goprune mask v1 ratio=<r>
//   <layer name> <c_out> <comma-separated kept indices>
inline void write_mask(std::ostream& out, const PruneMask& mask)
{
    out << "# goprune mask v1 ratio=" << std::setprecision(17) << mask.ratio << '\n';
    for (std::size_t i = 0; i < mask.layers.size(); ++i) {
        out << mask.layers[i] << ' ' << mask.keep[i].size() << ' ';
        const auto kept = mask.kept_indices(i);
        for (std::size_t k = 0; k < kept.size(); ++k) {
            out << (k == 0 ? "" : ",") << kept[k];
        }
        out << '\n';
    }
}

[[nodiscard]] inline PruneMask read_mask(std::istream& in)
{
    PruneMask mask;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        if (line[0] == '#') {
            const auto pos = line.find("ratio=");
            if (pos != std::string::npos) {
                mask.ratio = std::stod(line.substr(pos + 6));
            }
            continue;
        }
        std::istringstream fields(line);
        std::string name;
        std::size_t c_out = 0;
        std::string kept_text;
        if (!(fields >> name >> c_out >> kept_text)) {
            throw std::runtime_error("mask line " + std::to_string(line_no) + ": expected '<name> <c_out> <indices>'");
        }
        std::vector<bool> keep(c_out, false);
        std::istringstream idx_stream(kept_text);
        std::string idx;
        while (std::getline(idx_stream, idx, ',')) {
            const auto j = static_cast<std::size_t>(std::stoull(idx));
            if (j >= c_out) {
                throw std::runtime_error("mask line " + std::to_string(line_no) + ": index out of range");
            }
            keep[j] = true;
        }
        mask.layers.push_back(name);
        mask.keep.push_back(std::move(keep));
    }
    return mask;
}

inline void save_mask(const PruneMask& mask, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write mask: " + path.string());
    }
    write_mask(out, mask);
}

[[nodiscard]] inline PruneMask load_mask(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot read mask: " + path.string());
    }
    return read_mask(in);
}

/// Per-weight keep flags for unstructured pruning (the ADMM baseline).
struct ElementMask {
    std::vector<std::string> layers;
    std::vector<std::vector<bool>> keep;
};

/// Keeps the largest-magnitude weights of each layer at the same kept-count rule
/// as channels (ties keep the lower flat index).
[[nodiscard]] inline ElementMask build_magnitude_mask(const LayerSet& weights, double ratio)
{
    check_ratio(ratio);
    ElementMask mask;
    for (const auto& e : weights) {
        auto w = e.tensor.data();
        std::vector<std::size_t> order(w.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return std::abs(w[a]) > std::abs(w[b]); });
        std::vector<bool> keep(w.size(), false);
        const std::size_t k = kept_count(w.size(), ratio);
        for (std::size_t r = 0; r < k; ++r) {
            keep[order[r]] = true;
        }
        mask.layers.push_back(e.name);
        mask.keep.push_back(std::move(keep));
    }
    return mask;
}

/// Zeroes every weight the mask drops; layers absent from the mask are untouched.
inline void apply_element_mask(LayerSet& params, const ElementMask& mask)
{
    for (std::size_t i = 0; i < mask.layers.size(); ++i) {
        for (auto& e : params) {
            if (e.name != mask.layers[i]) {
                continue;
            }
            auto w = e.tensor.data();
            if (w.size() != mask.keep[i].size()) {
                throw std::invalid_argument("element mask size mismatch for " + e.name);
            }
            for (std::size_t k = 0; k < w.size(); ++k) {
                if (!mask.keep[i][k]) {
                    w[k] = 0.0f;
                }
            }
        }
    }
}

struct FinetuneReport {
    std::vector<double> accuracy; ///< test accuracy after each epoch
};

/// Plain SGD with weight decay on the (pruned) architecture. With an element
/// mask the dropped weights are held at zero after every step.
inline FinetuneReport finetune(TinyModel& model, const Dataset& train_data, const Dataset& test_data,
                               std::size_t epochs, const SgdOptions& opt, const ElementMask* hold_zero = nullptr)
{
    FinetuneReport report;
    for (std::size_t e = 0; e < epochs; ++e) {
        if (hold_zero == nullptr) {
            sgd_epoch(model, train_data, opt, e);
        } else {
            // Zero gradients of dropped weights; weight decay cannot revive them.
            sgd_epoch(model, train_data, opt, e, [&](LayerSet& grads, const LayerSet&) {
                apply_element_mask(grads, *hold_zero);
            });
        }
        report.accuracy.push_back(evaluate_accuracy(model, test_data));
    }
    return report;
}

} // namespace goprune
