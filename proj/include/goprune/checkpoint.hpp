#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace goprune {

// A checkpoint is two files:
//   <base>.manifest  text, one line per tensor:
//                    "tensor name=<name> dims=<c_in>,<c_out>,<kh>,<kw> offset=<byte offset> count=<floats>"
//   <base>.bin       raw little-endian float32 blobs, concatenated in manifest order.
// Layer names must not contain whitespace.

namespace detail {

inline std::uint32_t to_little_endian(std::uint32_t v)
{
    if constexpr (std::endian::native == std::endian::big) {
        return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
    } else {
        return v;
    }
}

inline std::string manifest_path(const std::filesystem::path& base) { return base.string() + ".manifest"; }
inline std::string blob_path(const std::filesystem::path& base) { return base.string() + ".bin"; }

inline std::size_t parse_count(const std::string& text, const std::string& context)
{
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(text, &pos);
    } catch (const std::exception&) {
        throw std::runtime_error("checkpoint: bad number '" + text + "' in " + context);
    }
    if (pos != text.size()) {
        throw std::runtime_error("checkpoint: bad number '" + text + "' in " + context);
    }
    return static_cast<std::size_t>(v);
}

} // namespace detail

inline void save_checkpoint(const LayerSet& layers, const std::filesystem::path& base)
{
    if (base.has_parent_path()) {
        std::filesystem::create_directories(base.parent_path());
    }
    std::ofstream manifest(detail::manifest_path(base), std::ios::binary | std::ios::trunc);
    std::ofstream blob(detail::blob_path(base), std::ios::binary | std::ios::trunc);
    if (!manifest || !blob) {
        throw std::runtime_error("cannot open checkpoint for writing: " + base.string());
    }
    manifest << "# goprune checkpoint v1\n";
    std::size_t offset = 0;
    for (const auto& e : layers) {
        if (e.name.empty() || e.name.find_first_of(" \t\n=") != std::string::npos) {
            throw std::invalid_argument("checkpoint: layer name not serializable: '" + e.name + "'");
        }
        const auto& d = e.tensor.dims();
        manifest << "tensor name=" << e.name << " dims=" << d.c_in << ',' << d.c_out << ',' << d.kh << ',' << d.kw
                 << " offset=" << offset << " count=" << e.tensor.size() << '\n';
        for (float f : e.tensor.data()) {
            const std::uint32_t bits = detail::to_little_endian(std::bit_cast<std::uint32_t>(f));
            blob.write(reinterpret_cast<const char*>(&bits), sizeof bits);
        }
        offset += e.tensor.size() * sizeof(float);
    }
    if (!manifest || !blob) {
        throw std::runtime_error("failed writing checkpoint: " + base.string());
    }
}

[[nodiscard]] inline LayerSet load_checkpoint(const std::filesystem::path& base)
{
    std::ifstream manifest(detail::manifest_path(base));
    if (!manifest) {
        throw std::runtime_error("cannot read checkpoint manifest: " + detail::manifest_path(base));
    }
    std::ifstream blob_file(detail::blob_path(base), std::ios::binary);
    if (!blob_file) {
        throw std::runtime_error("cannot read checkpoint blob: " + detail::blob_path(base));
    }
    std::vector<char> blob((std::istreambuf_iterator<char>(blob_file)), std::istreambuf_iterator<char>());

    LayerSet out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(manifest, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') {
            continue;
        }
        const std::string context = detail::manifest_path(base) + ":" + std::to_string(line_no);
        std::istringstream fields(line);
        std::string kind;
        fields >> kind;
        if (kind != "tensor") {
            throw std::runtime_error("checkpoint: unexpected record '" + kind + "' at " + context);
        }
        std::string name;
        std::string dims_text;
        std::string offset_text;
        std::string count_text;
        std::string kv;
        while (fields >> kv) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) {
                throw std::runtime_error("checkpoint: malformed field '" + kv + "' at " + context);
            }
            const std::string key = kv.substr(0, eq);
            const std::string value = kv.substr(eq + 1);
            if (key == "name") {
                name = value;
            } else if (key == "dims") {
                dims_text = value;
            } else if (key == "offset") {
                offset_text = value;
            } else if (key == "count") {
                count_text = value;
            }
        }
        if (name.empty() || dims_text.empty() || offset_text.empty()) {
            throw std::runtime_error("checkpoint: missing name/dims/offset at " + context);
        }
        std::vector<std::size_t> d;
        std::istringstream dims_stream(dims_text);
        std::string part;
        while (std::getline(dims_stream, part, ',')) {
            d.push_back(detail::parse_count(part, context));
        }
        if (d.size() != 4) {
            throw std::runtime_error("checkpoint: dims must have 4 entries at " + context);
        }
        const TensorDims dims{d[0], d[1], d[2], d[3]};
        const std::size_t offset = detail::parse_count(offset_text, context);
        if (!count_text.empty() && detail::parse_count(count_text, context) != dims.size()) {
            throw std::runtime_error("checkpoint: count disagrees with dims at " + context);
        }
        const std::size_t bytes = dims.size() * sizeof(float);
        if (offset > blob.size() || blob.size() - offset < bytes) {
            throw std::runtime_error("checkpoint: blob too short for tensor '" + name + "' at " + context);
        }
        std::vector<float> data(dims.size());
        for (std::size_t i = 0; i < data.size(); ++i) {
            std::uint32_t bits = 0;
            std::memcpy(&bits, blob.data() + offset + i * sizeof bits, sizeof bits);
            data[i] = std::bit_cast<float>(detail::to_little_endian(bits));
        }
        out.add(name, Tensor4(dims, std::move(data)));
    }
    return out;
}

} // namespace goprune
