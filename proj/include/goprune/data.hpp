#pragma once

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tensor.hpp"

namespace goprune {

/// Row-major sample matrix with class labels (and optional regression targets).
struct Dataset {
    std::size_t dim{0};
    std::size_t n_classes{0};
    std::vector<float> features;
    std::vector<int> labels;
    std::vector<float> targets; ///< empty for classification data
    std::string tag;            ///< "train" / "test"

    [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
    [[nodiscard]] bool empty() const noexcept { return labels.empty(); }

    [[nodiscard]] std::span<const float> sample(std::size_t i) const
    {
        return std::span<const float>(features).subspan(i * dim, dim);
    }

    void validate() const
    {
        if (features.size() != labels.size() * dim) {
            throw std::invalid_argument("dataset: feature matrix is not n x dim");
        }
        if (!targets.empty() && targets.size() != labels.size()) {
            throw std::invalid_argument("dataset: targets length differs from sample count");
        }
        for (int y : labels) {
            if (y < 0 || static_cast<std::size_t>(y) >= n_classes) {
                throw std::invalid_argument("dataset: label " + std::to_string(y) + " outside [0, " +
                                            std::to_string(n_classes) + ")");
            }
        }
    }
};

struct DataSplit {
    Dataset train;
    Dataset test;
};

/// A gathered mini-batch, contiguous in memory.
struct Batch {
    std::size_t n{0};
    std::size_t dim{0};
    std::vector<float> x;
    std::vector<int> y;
    std::vector<float> t;

    [[nodiscard]] std::span<const float> sample(std::size_t i) const
    {
        return std::span<const float>(x).subspan(i * dim, dim);
    }
};

[[nodiscard]] inline Batch gather(const Dataset& data, std::span<const std::size_t> indices)
{
    Batch b;
    b.n = indices.size();
    b.dim = data.dim;
    b.x.reserve(b.n * b.dim);
    b.y.reserve(b.n);
    for (std::size_t idx : indices) {
        auto s = data.sample(idx);
        b.x.insert(b.x.end(), s.begin(), s.end());
        b.y.push_back(data.labels[idx]);
        if (!data.targets.empty()) {
            b.t.push_back(data.targets[idx]);
        }
    }
    return b;
}

[[nodiscard]] inline Batch whole(const Dataset& data)
{
    Batch b;
    b.n = data.size();
    b.dim = data.dim;
    b.x = data.features;
    b.y = data.labels;
    b.t = data.targets;
    return b;
}

[[nodiscard]] inline std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Independent stream seed for (seed, stream).
[[nodiscard]] inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept
{
    return splitmix64(seed ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

/// Seeded shuffle order for one epoch.
[[nodiscard]] inline std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, std::uint64_t epoch)
{
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(derive_seed(seed, epoch));
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

/// Splits a permutation into consecutive mini-batches; the last one may be short.
[[nodiscard]] inline std::vector<std::span<const std::size_t>> batches_of(std::span<const std::size_t> order,
                                                                        std::size_t batch_size)
{
    if (batch_size == 0) {
        throw std::invalid_argument("batch_size must be positive");
    }
    std::vector<std::span<const std::size_t>> out;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        out.push_back(order.subspan(start, std::min(batch_size, order.size() - start)));
    }
    return out;
}

// --- CSV ------------------------------------------------------------------

namespace detail {

inline std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

template <class T>
T parse_field(std::string_view text, std::size_t line_no, std::size_t column)
{
    text = trim(text);
    T value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
        throw std::runtime_error("line " + std::to_string(line_no) + ", column " + std::to_string(column) +
                                 ": cannot parse '" + std::string(text) + "'");
    }
    return value;
}

} // namespace detail

/// CSV rows "label,f1,f2,...": integer label first, real features after.
/// Blank lines and lines starting with '#' are skipped.
[[nodiscard]] inline Dataset parse_csv_dataset(std::istream& in, std::string tag = "train")
{
    Dataset d;
    d.tag = std::move(tag);
    std::string line;
    std::size_t line_no = 0;
    int max_label = -1;
    while (std::getline(in, line)) {
        ++line_no;
        const auto body = detail::trim(line);
        if (body.empty() || body.front() == '#') {
            continue;
        }
        std::vector<std::string_view> fields;
        std::size_t start = 0;
        while (true) {
            const auto comma = body.find(',', start);
            fields.push_back(body.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
            if (comma == std::string_view::npos) {
                break;
            }
            start = comma + 1;
        }
        if (fields.size() < 2) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": expected label and at least one feature");
        }
        const int label = detail::parse_field<int>(fields[0], line_no, 1);
        if (label < 0) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": negative label");
        }
        const std::size_t dim = fields.size() - 1;
        if (d.labels.empty()) {
            d.dim = dim;
        } else if (dim != d.dim) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": expected " + std::to_string(d.dim) +
                                     " features, found " + std::to_string(dim));
        }
        for (std::size_t c = 1; c < fields.size(); ++c) {
            d.features.push_back(detail::parse_field<float>(fields[c], line_no, c + 1));
        }
        d.labels.push_back(label);
        max_label = std::max(max_label, label);
    }
    if (d.labels.empty()) {
        throw std::runtime_error("dataset contains no samples");
    }
    d.n_classes = static_cast<std::size_t>(max_label) + 1;
    return d;
}

[[nodiscard]] inline Dataset load_csv_dataset(const std::filesystem::path& path, std::string tag = "train")
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open dataset: " + path.string());
    }
    try {
        return parse_csv_dataset(in, std::move(tag));
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

// --- synthetic data ---------------------------------------------------------

/// Gaussian blobs: one random center per class, isotropic noise around it.
struct BlobsSpec {
    std::size_t classes{4};
    std::size_t dim{64};
    std::size_t samples{2000};
    double center_scale{1.0};
    double noise{1.0};
    double test_fraction{0.2};
    std::uint64_t seed{7};
};

[[nodiscard]] inline DataSplit synth_blobs(const BlobsSpec& spec)
{
    if (spec.classes < 2 || spec.dim == 0 || spec.samples < spec.classes) {
        throw std::invalid_argument("blobs: need classes >= 2, dim >= 1, samples >= classes");
    }
    if (!(spec.test_fraction >= 0.0 && spec.test_fraction < 1.0)) {
        throw std::invalid_argument("blobs: test_fraction must lie in [0, 1)");
    }
    std::mt19937_64 rng(derive_seed(spec.seed, 0xb10b5));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> centers(spec.classes * spec.dim);
    for (double& c : centers) {
        c = spec.center_scale * normal(rng);
    }
    const auto n_test = static_cast<std::size_t>(static_cast<double>(spec.samples) * spec.test_fraction);
    const std::size_t n_train = spec.samples - n_test;
    DataSplit out;
    for (Dataset* d : {&out.train, &out.test}) {
        d->dim = spec.dim;
        d->n_classes = spec.classes;
    }
    out.train.tag = "train";
    out.test.tag = "test";
    for (std::size_t i = 0; i < spec.samples; ++i) {
        Dataset& d = i < n_train ? out.train : out.test;
        const std::size_t label = i % spec.classes;
        for (std::size_t k = 0; k < spec.dim; ++k) {
            d.features.push_back(static_cast<float>(centers[label * spec.dim + k] + spec.noise * normal(rng)));
        }
        d.labels.push_back(static_cast<int>(label));
    }
    return out;
}

/// y = <x, w> + noise with w split into contiguous feature groups, a fixed
/// fraction of which are planted exactly zero.
struct GroupRegressionSpec {
    std::size_t groups{20};
    std::size_t group_size{8};
    std::size_t samples{1000};
    double zero_fraction{0.7};
    double noise{0.1};
    double test_fraction{0.2};
    std::uint64_t seed{1};
};

struct GroupRegressionProblem {
    DataSplit data;
    Tensor4 planted;           ///< (group_size, groups, 1, 1)
    std::vector<bool> support; ///< true for nonzero groups
};

[[nodiscard]] inline GroupRegressionProblem synth_group_regression(const GroupRegressionSpec& spec)
{
    if (spec.groups == 0 || spec.group_size == 0 || spec.samples == 0) {
        throw std::invalid_argument("group regression: sizes must be positive");
    }
    std::mt19937_64 rng(derive_seed(spec.seed, 0x9e0));
    std::normal_distribution<double> normal(0.0, 1.0);

    const auto n_zero = static_cast<std::size_t>(std::lround(spec.zero_fraction * static_cast<double>(spec.groups)));
    std::vector<std::size_t> order(spec.groups);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    GroupRegressionProblem prob;
    prob.support.assign(spec.groups, true);
    for (std::size_t k = 0; k < n_zero; ++k) {
        prob.support[order[k]] = false;
    }
    prob.planted = Tensor4(TensorDims{spec.group_size, spec.groups, 1, 1});
    for (std::size_t j = 0; j < spec.groups; ++j) {
        if (!prob.support[j]) {
            continue;
        }
        for (float& w : prob.planted.channel(j)) {
            w = static_cast<float>(normal(rng));
        }
    }

    const std::size_t dim = spec.groups * spec.group_size;
    const auto n_test = static_cast<std::size_t>(static_cast<double>(spec.samples) * spec.test_fraction);
    const std::size_t n_train = spec.samples - n_test;
    for (Dataset* d : {&prob.data.train, &prob.data.test}) {
        d->dim = dim;
        d->n_classes = 1;
    }
    prob.data.train.tag = "train";
    prob.data.test.tag = "test";
    auto w = prob.planted.data();
    for (std::size_t i = 0; i < spec.samples; ++i) {
        Dataset& d = i < n_train ? prob.data.train : prob.data.test;
        double y = 0.0;
        for (std::size_t k = 0; k < dim; ++k) {
            const auto x = static_cast<float>(normal(rng));
            d.features.push_back(x);
            y += static_cast<double>(x) * static_cast<double>(w[k]);
        }
        d.labels.push_back(0);
        d.targets.push_back(static_cast<float>(y + spec.noise * normal(rng)));
    }
    return prob;
}

} // namespace goprune
