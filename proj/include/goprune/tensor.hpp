#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace goprune {

/// Thrown when a computation produces NaN/Inf (divergence, bad gradients).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TensorDims {
    std::size_t c_in{0};
    std::size_t c_out{0};
    std::size_t kh{1};
    std::size_t kw{1};

    [[nodiscard]] constexpr std::size_t size() const noexcept { return c_in * c_out * kh * kw; }
    /// Number of scalars in one output channel.
    [[nodiscard]] constexpr std::size_t channel_size() const noexcept { return c_in * kh * kw; }

    friend constexpr bool operator==(const TensorDims&, const TensorDims&) = default;
};

/// Dense 4D weight tensor of shape (c_in, c_out, kh, kw).
///
/// Storage is channel-major: the c_in*kh*kw entries of output channel j are
/// contiguous, ordered (i, m, n) with n fastest. Grouping for the l2,p norm is
/// over output channels, so channel vectorization is a plain copy.
class Tensor4 {
public:
    Tensor4() = default;

    explicit Tensor4(TensorDims dims, float fill = 0.0f) : dims_(dims), data_(dims.size(), fill) {}

    Tensor4(TensorDims dims, std::vector<float> data) : dims_(dims), data_(std::move(data))
    {
        if (data_.size() != dims_.size()) {
            throw std::invalid_argument("Tensor4: data length " + std::to_string(data_.size()) +
                                        " does not match dims product " + std::to_string(dims_.size()));
        }
    }

    [[nodiscard]] const TensorDims& dims() const noexcept { return dims_; }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] std::size_t c_in() const noexcept { return dims_.c_in; }
    [[nodiscard]] std::size_t c_out() const noexcept { return dims_.c_out; }

    [[nodiscard]] std::span<float> data() noexcept { return data_; }
    [[nodiscard]] std::span<const float> data() const noexcept { return data_; }

    [[nodiscard]] std::size_t offset(std::size_t i, std::size_t j, std::size_t m, std::size_t n) const noexcept
    {
        return ((j * dims_.c_in + i) * dims_.kh + m) * dims_.kw + n;
    }

    float& operator()(std::size_t i, std::size_t j, std::size_t m = 0, std::size_t n = 0) noexcept
    {
        return data_[offset(i, j, m, n)];
    }
    float operator()(std::size_t i, std::size_t j, std::size_t m = 0, std::size_t n = 0) const noexcept
    {
        return data_[offset(i, j, m, n)];
    }

    [[nodiscard]] std::span<float> channel(std::size_t j)
    {
        check_channel(j);
        return std::span<float>(data_).subspan(j * dims_.channel_size(), dims_.channel_size());
    }
    [[nodiscard]] std::span<const float> channel(std::size_t j) const
    {
        check_channel(j);
        return std::span<const float>(data_).subspan(j * dims_.channel_size(), dims_.channel_size());
    }

    [[nodiscard]] bool all_finite() const noexcept
    {
        return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
    }

    friend bool operator==(const Tensor4&, const Tensor4&) = default;

private:
    void check_channel(std::size_t j) const
    {
        if (j >= dims_.c_out) {
            throw std::out_of_range("channel index " + std::to_string(j) + " out of range [0, " +
                                    std::to_string(dims_.c_out) + ")");
        }
    }

    TensorDims dims_{};
    std::vector<float> data_;
};

/// vec(X_{:j::}) widened to double.
[[nodiscard]] inline std::vector<double> channel_vec(const Tensor4& x, std::size_t j)
{
    auto ch = x.channel(j);
    return {ch.begin(), ch.end()};
}

[[nodiscard]] inline double squared_norm(std::span<const float> v) noexcept
{
    double acc = 0.0;
    for (float f : v) {
        acc += static_cast<double>(f) * static_cast<double>(f);
    }
    return acc;
}

[[nodiscard]] inline double squared_norm(std::span<const double> v) noexcept
{
    double acc = 0.0;
    for (double d : v) {
        acc += d * d;
    }
    return acc;
}

[[nodiscard]] inline double frobenius_norm(const Tensor4& x) noexcept { return std::sqrt(squared_norm(x.data())); }

[[nodiscard]] inline double channel_norm(const Tensor4& x, std::size_t j) { return std::sqrt(squared_norm(x.channel(j))); }

inline void check_group_exponent(double p)
{
    if (!(p >= 0.0 && p < 1.0)) {
        throw std::invalid_argument("p must lie in [0, 1), got " + std::to_string(p));
    }
}

/// Sum over output channels of ||vec(X_{:j::})||^p. For p == 0 this counts
/// channels whose norm is exactly nonzero.
[[nodiscard]] inline double l2p_norm_p(const Tensor4& x, double p)
{
    check_group_exponent(p);
    double acc = 0.0;
    for (std::size_t j = 0; j < x.c_out(); ++j) {
        const double nrm = channel_norm(x, j);
        if (p == 0.0) {
            acc += nrm != 0.0 ? 1.0 : 0.0;
        } else {
            acc += std::pow(nrm, p);
        }
    }
    return acc;
}

/// Ordered list of named tensors; one entry per prunable layer of a model.
class LayerSet {
public:
    struct Entry {
        std::string name;
        Tensor4 tensor;
        friend bool operator==(const Entry&, const Entry&) = default;
    };

    LayerSet() = default;

    void add(std::string name, Tensor4 tensor)
    {
        if (find(name) != nullptr) {
            throw std::invalid_argument("duplicate layer name: " + name);
        }
        entries_.push_back({std::move(name), std::move(tensor)});
    }

    [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
    [[nodiscard]] bool empty() const noexcept { return entries_.empty(); }

    Entry& operator[](std::size_t i) { return entries_.at(i); }
    const Entry& operator[](std::size_t i) const { return entries_.at(i); }

    Tensor4& tensor(std::size_t i) { return entries_.at(i).tensor; }
    const Tensor4& tensor(std::size_t i) const { return entries_.at(i).tensor; }

    [[nodiscard]] const Entry* find(const std::string& name) const
    {
        auto it = std::find_if(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.name == name; });
        return it == entries_.end() ? nullptr : &*it;
    }

    [[nodiscard]] const Tensor4& at(const std::string& name) const
    {
        const Entry* e = find(name);
        if (e == nullptr) {
            throw std::out_of_range("no layer named " + name);
        }
        return e->tensor;
    }

    auto begin() noexcept { return entries_.begin(); }
    auto end() noexcept { return entries_.end(); }
    auto begin() const noexcept { return entries_.begin(); }
    auto end() const noexcept { return entries_.end(); }

    [[nodiscard]] std::size_t parameter_count() const noexcept
    {
        std::size_t n = 0;
        for (const auto& e : entries_) {
            n += e.tensor.size();
        }
        return n;
    }

    /// Same names and dims, all zero.
    [[nodiscard]] LayerSet zeros_like() const
    {
        LayerSet out;
        for (const auto& e : entries_) {
            out.entries_.push_back({e.name, Tensor4(e.tensor.dims())});
        }
        return out;
    }

    [[nodiscard]] bool congruent(const LayerSet& other) const noexcept
    {
        if (entries_.size() != other.entries_.size()) {
            return false;
        }
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            if (entries_[i].name != other.entries_[i].name ||
                !(entries_[i].tensor.dims() == other.entries_[i].tensor.dims())) {
                return false;
            }
        }
        return true;
    }

    [[nodiscard]] bool all_finite() const noexcept
    {
        return std::all_of(entries_.begin(), entries_.end(), [](const Entry& e) { return e.tensor.all_finite(); });
    }

    friend bool operator==(const LayerSet&, const LayerSet&) = default;

private:
    std::vector<Entry> entries_;
};

inline void require_congruent(const LayerSet& a, const LayerSet& b, const char* what)
{
    if (!a.congruent(b)) {
        throw std::invalid_argument(std::string(what) + ": layer sets are not shape-congruent");
    }
}

/// Squared Frobenius norm summed over layers.
[[nodiscard]] inline double squared_norm(const LayerSet& s) noexcept
{
    double acc = 0.0;
    for (const auto& e : s) {
        acc += squared_norm(e.tensor.data());
    }
    return acc;
}

/// ||a - b||_F^2 summed over layers.
[[nodiscard]] inline double squared_distance(const LayerSet& a, const LayerSet& b)
{
    require_congruent(a, b, "squared_distance");
    double acc = 0.0;
    for (std::size_t l = 0; l < a.size(); ++l) {
        auto x = a.tensor(l).data();
        auto y = b.tensor(l).data();
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
            acc += d * d;
        }
    }
    return acc;
}

[[nodiscard]] inline double l2p_norm_p(const LayerSet& s, double p)
{
    double acc = 0.0;
    for (const auto& e : s) {
        acc += l2p_norm_p(e.tensor, p);
    }
    return acc;
}

/// Elementwise sum |w|^p (|w|^0 counts nonzeros); the unstructured penalty.
[[nodiscard]] inline double lp_norm_p(const LayerSet& s, double p)
{
    double acc = 0.0;
    for (const auto& e : s) {
        for (float w : e.tensor.data()) {
            const double a = std::abs(static_cast<double>(w));
            acc += p == 0.0 ? (a != 0.0 ? 1.0 : 0.0) : std::pow(a, p);
        }
    }
    return acc;
}

/// out = ca * a + cb * b computed in double, stored as float.
[[nodiscard]] inline LayerSet weighted_sum(double ca, const LayerSet& a, double cb, const LayerSet& b)
{
    require_congruent(a, b, "weighted_sum");
    LayerSet out = a;
    for (std::size_t l = 0; l < a.size(); ++l) {
        auto dst = out.tensor(l).data();
        auto x = a.tensor(l).data();
        auto y = b.tensor(l).data();
        for (std::size_t i = 0; i < dst.size(); ++i) {
            dst[i] = static_cast<float>(ca * static_cast<double>(x[i]) + cb * static_cast<double>(y[i]));
        }
    }
    return out;
}

struct ChannelSparsity {
    std::size_t zero_channels{0};
    std::size_t total_channels{0};
    std::size_t zero_weights{0};
    std::size_t total_weights{0};

    [[nodiscard]] double zero_channel_fraction() const noexcept
    {
        return total_channels == 0 ? 0.0 : static_cast<double>(zero_channels) / static_cast<double>(total_channels);
    }
    [[nodiscard]] double zero_weight_fraction() const noexcept
    {
        return total_weights == 0 ? 0.0 : static_cast<double>(zero_weights) / static_cast<double>(total_weights);
    }
};

[[nodiscard]] inline ChannelSparsity sparsity(const LayerSet& s)
{
    ChannelSparsity out;
    for (const auto& e : s) {
        const Tensor4& t = e.tensor;
        for (std::size_t j = 0; j < t.c_out(); ++j) {
            auto ch = t.channel(j);
            const auto zeros = static_cast<std::size_t>(std::count(ch.begin(), ch.end(), 0.0f));
            out.zero_weights += zeros;
            out.zero_channels += zeros == ch.size() ? 1 : 0;
        }
        out.total_channels += t.c_out();
        out.total_weights += t.size();
    }
    return out;
}

} // namespace goprune
