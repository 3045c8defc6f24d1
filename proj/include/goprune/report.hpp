#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tensor.hpp"

namespace goprune {

/// Shortest text that reads back to the same double.
[[nodiscard]] inline std::string format_real(double v)
{
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) {
        throw std::runtime_error("format_real: conversion failed");
    }
    return {buf, ptr};
}

[[nodiscard]] inline double mean(const std::vector<double>& v)
{
    if (v.empty()) {
        return std::nan("");
    }
    double s = 0.0;
    for (double x : v) {
        s += x;
    }
    return s / static_cast<double>(v.size());
}

/// Sample standard deviation (n - 1 denominator); 0 for a single value.
[[nodiscard]] inline double stddev(const std::vector<double>& v)
{
    if (v.empty()) {
        return std::nan("");
    }
    if (v.size() == 1) {
        return 0.0;
    }
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) {
        s += (x - m) * (x - m);
    }
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

[[nodiscard]] inline double median(std::vector<double> v)
{
    if (v.empty()) {
        return std::nan("");
    }
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Counts of |w| over equal-width bins on [lo, hi]. Bin i covers
/// [lo + i w, lo + (i+1) w); the last bin also takes hi. Values outside the
/// range are clamped into the edge bins, so counts always sum to the number
/// of weights. A zero-width range puts everything in bin 0.
struct Histogram {
    double lo{0.0};
    double hi{0.0};
    std::vector<std::uint64_t> counts;

    [[nodiscard]] std::size_t bins() const noexcept { return counts.size(); }
    [[nodiscard]] double width() const noexcept { return (hi - lo) / static_cast<double>(counts.size()); }
    [[nodiscard]] double bin_lo(std::size_t i) const noexcept { return lo + width() * static_cast<double>(i); }
    [[nodiscard]] double bin_hi(std::size_t i) const noexcept
    {
        return i + 1 == counts.size() ? hi : lo + width() * static_cast<double>(i + 1);
    }
    [[nodiscard]] std::uint64_t total() const noexcept
    {
        std::uint64_t t = 0;
        for (auto c : counts) {
            t += c;
        }
        return t;
    }
    /// Fraction of all weights in the first bin.
    [[nodiscard]] double first_bin_fraction() const noexcept
    {
        const auto t = total();
        return t == 0 ? 0.0 : static_cast<double>(counts.front()) / static_cast<double>(t);
    }
};

[[nodiscard]] inline double max_magnitude(const LayerSet& weights) noexcept
{
    double m = 0.0;
    for (const auto& e : weights) {
        for (float v : e.tensor.data()) {
            m = std::max(m, static_cast<double>(std::abs(v)));
        }
    }
    return m;
}

/// Histogram of weight magnitudes; the default range is [0, max |w|].
[[nodiscard]] inline Histogram magnitude_histogram(const LayerSet& weights, std::size_t bins,
                                                   std::optional<std::pair<double, double>> range = std::nullopt)
{
    if (bins == 0) {
        throw std::invalid_argument("histogram: bins must be >= 1");
    }
    Histogram h;
    h.lo = range ? range->first : 0.0;
    h.hi = range ? range->second : max_magnitude(weights);
    if (!(h.hi >= h.lo) || !std::isfinite(h.lo) || !std::isfinite(h.hi) || (range && h.hi == h.lo)) {
        throw std::invalid_argument("histogram: range must satisfy lo < hi");
    }
    h.counts.assign(bins, 0);
    const double width = h.width();
    for (const auto& e : weights) {
        for (float v : e.tensor.data()) {
            const double a = std::abs(static_cast<double>(v));
            std::size_t idx = 0;
            if (width > 0.0 && a > h.lo) {
                const double pos = std::floor((a - h.lo) / width);
                idx = pos >= static_cast<double>(bins) ? bins - 1 : static_cast<std::size_t>(pos);
            }
            ++h.counts[idx];
        }
    }
    return h;
}

inline void write_histogram_csv(std::ostream& out, const Histogram& h)
{
    out << "bin_lo,bin_hi,count\n";
    for (std::size_t i = 0; i < h.bins(); ++i) {
        out << format_real(h.bin_lo(i)) << ',' << format_real(h.bin_hi(i)) << ',' << h.counts[i] << '\n';
    }
}

/// Several histograms over identical bins side by side, one count column each.
inline void write_histograms_csv(std::ostream& out, const std::vector<std::string>& names,
                                 const std::vector<Histogram>& hs)
{
    if (hs.empty() || names.size() != hs.size()) {
        throw std::invalid_argument("write_histograms_csv: need one name per histogram");
    }
    out << "bin_lo,bin_hi";
    for (const auto& n : names) {
        out << ',' << n;
    }
    out << '\n';
    for (std::size_t i = 0; i < hs.front().bins(); ++i) {
        out << format_real(hs.front().bin_lo(i)) << ',' << format_real(hs.front().bin_hi(i));
        for (const auto& h : hs) {
            out << ',' << h.counts.at(i);
        }
        out << '\n';
    }
}

} // namespace goprune
