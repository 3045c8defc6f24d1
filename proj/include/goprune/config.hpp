#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "admm.hpp"
#include "data.hpp"
#include "models.hpp"
#include "pam.hpp"
#include "training.hpp"

namespace goprune {

/// Bad configuration value; the message names the offending key.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class Method { goprune, admm };

[[nodiscard]] inline std::string to_string(Method m) { return m == Method::goprune ? "goprune" : "admm"; }

enum class ScoreSource { w, u };

struct ModelConfig {
    std::string kind{"cnn"}; ///< cnn | mlp
    std::size_t conv1{8};
    std::size_t conv2{16};
    std::size_t hidden{64};
};

struct DataConfig {
    std::string source{"blobs"}; ///< blobs | csv
    BlobsSpec blobs{};
    std::string train_csv;
    std::string test_csv;
};

struct PhaseConfig {
    std::size_t epochs{0};
    double eta{0.05};
    double alpha{1e-4};
    std::size_t batch_size{32};
};

struct CompressConfig {
    HyperParams hp{}; ///< p is taken per method from goprune_p / admm_p
    double goprune_p{0.5};
    double admm_p{0.2};
    AdmmOptions admm{};
};

struct PruneConfig {
    double ratio{0.7};
    ScoreSource score_source{ScoreSource::w};
};

/// Everything one pipeline invocation needs.
struct RunConfig {
    ModelConfig model;
    DataConfig data;
    PhaseConfig train{20, 0.05, 1e-4, 32};
    CompressConfig compress;
    PruneConfig prune;
    PhaseConfig finetune{30, 0.05, 1e-4, 32};
    std::vector<Method> methods{Method::goprune};
    std::vector<std::uint64_t> seeds{1};
    std::optional<std::size_t> repeats;
    std::string out{"goprune_out"};

    /// Hyperparameters of one compression run.
    [[nodiscard]] HyperParams hyper(Method m, std::uint64_t seed) const
    {
        HyperParams hp = compress.hp;
        hp.p = m == Method::goprune ? compress.goprune_p : compress.admm_p;
        hp.seed = seed;
        return hp;
    }

    [[nodiscard]] Architecture architecture(std::size_t dim, std::size_t classes) const
    {
        if (model.kind == "mlp") {
            return mlp(dim, model.hidden, classes);
        }
        const auto side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(dim))));
        if (side * side != dim || side % 4 != 0) {
            throw ConfigError("config: model.kind = cnn needs a square input whose side is divisible by 4, got dim " +
                              std::to_string(dim));
        }
        return small_cnn(side, model.conv1, model.conv2, classes);
    }

    /// Resolves run.repeats against run.seeds and checks cross-field constraints.
    void finalize()
    {
        if (repeats) {
            if (*repeats == 0) {
                throw ConfigError("config: run.repeats must be >= 1");
            }
            if (seeds.size() == 1 && *repeats > 1) {
                const std::uint64_t first = seeds.front();
                seeds.clear();
                for (std::size_t i = 0; i < *repeats; ++i) {
                    seeds.push_back(first + i);
                }
            } else if (seeds.size() != *repeats) {
                throw ConfigError("config: run.repeats (" + std::to_string(*repeats) + ") disagrees with run.seeds (" +
                                  std::to_string(seeds.size()) + " entries)");
            }
        }
        validate();
    }

    void validate() const
    {
        if (model.kind != "cnn" && model.kind != "mlp") {
            throw ConfigError("config: model.kind must be cnn or mlp, got '" + model.kind + "'");
        }
        if (model.conv1 == 0 || model.conv2 == 0 || model.hidden == 0) {
            throw ConfigError("config: model widths must be positive");
        }
        if (data.source == "csv") {
            if (data.train_csv.empty() || data.test_csv.empty()) {
                throw ConfigError("config: data.source = csv needs data.train_csv and data.test_csv");
            }
        } else if (data.source != "blobs") {
            throw ConfigError("config: data.source must be blobs or csv, got '" + data.source + "'");
        }
        if (compress.hp.outer_epochs == 0) {
            throw ConfigError("config: compress.epochs must be >= 1");
        }
        try {
            compress.hp.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config: [compress] ") + e.what());
        }
        for (const PhaseConfig* ph : {&train, &finetune}) {
            if (!(ph->eta > 0.0) || ph->batch_size == 0 || !(ph->alpha >= 0.0)) {
                throw ConfigError(std::string("config: [") + (ph == &train ? "train" : "finetune") +
                                  "] needs eta > 0, alpha >= 0, batch_size >= 1");
            }
        }
        if (!(compress.goprune_p >= 0.0 && compress.goprune_p < 1.0)) {
            throw ConfigError("config: goprune.p = " + std::to_string(compress.goprune_p) + " must lie in [0, 1)");
        }
        const bool uses_admm = std::find(methods.begin(), methods.end(), Method::admm) != methods.end();
        if (uses_admm && !(compress.admm_p > 0.0 && compress.admm_p < 1.0)) {
            throw ConfigError("config: admm.p = " + std::to_string(compress.admm_p) +
                              " rejected: ADMM baseline requires p in (0, 1)");
        }
        if (!(prune.ratio > 0.0 && prune.ratio < 1.0)) {
            throw ConfigError("config: prune.ratio must lie in (0, 1)");
        }
        if (methods.empty()) {
            throw ConfigError("config: run.methods is empty");
        }
        if (seeds.empty()) {
            throw ConfigError("config: run.seeds is empty");
        }
        if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
            throw ConfigError("config: run.seeds contains duplicates");
        }
        if (out.empty()) {
            throw ConfigError("config: run.out is empty");
        }
    }
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& text)
{
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = std::string(trim(item));
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

inline double parse_plain_real(const std::string& key, const std::string& text)
{
    double v = 0.0;
    const char* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
        throw ConfigError("config: " + key + ": expected a number, got '" + text + "'");
    }
    return v;
}

} // namespace detail

/// A real number, optionally written as a fraction "a/b".
[[nodiscard]] inline double parse_real(const std::string& key, const std::string& raw)
{
    const std::string text(detail::trim(raw));
    const auto slash = text.find('/');
    if (slash == std::string::npos) {
        return detail::parse_plain_real(key, text);
    }
    const double num = detail::parse_plain_real(key, std::string(detail::trim(text.substr(0, slash))));
    const double den = detail::parse_plain_real(key, std::string(detail::trim(text.substr(slash + 1))));
    if (den == 0.0) {
        throw ConfigError("config: " + key + ": zero denominator in '" + text + "'");
    }
    return num / den;
}

[[nodiscard]] inline std::uint64_t parse_count(const std::string& key, const std::string& raw)
{
    const std::string text(detail::trim(raw));
    std::uint64_t v = 0;
    const char* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end || text.empty()) {
        throw ConfigError("config: " + key + ": expected a nonnegative integer, got '" + text + "'");
    }
    return v;
}

[[nodiscard]] inline bool parse_bool(const std::string& key, const std::string& raw)
{
    const std::string t(detail::trim(raw));
    if (t == "true" || t == "1" || t == "yes" || t == "on") {
        return true;
    }
    if (t == "false" || t == "0" || t == "no" || t == "off") {
        return false;
    }
    throw ConfigError("config: " + key + ": expected true or false, got '" + t + "'");
}

[[nodiscard]] inline std::vector<double> parse_real_list(const std::string& key, const std::string& raw)
{
    std::vector<double> out;
    for (const auto& item : detail::split_list(raw)) {
        out.push_back(parse_real(key, item));
    }
    return out;
}

[[nodiscard]] inline std::vector<std::uint64_t> parse_seed_list(const std::string& key, const std::string& raw)
{
    std::vector<std::uint64_t> out;
    for (const auto& item : detail::split_list(raw)) {
        out.push_back(goprune::parse_count(key, item));
    }
    if (out.empty()) {
        throw ConfigError("config: " + key + ": empty seed list");
    }
    return out;
}

/// "goprune", "admm", "both" or a comma list of the first two.
[[nodiscard]] inline std::vector<Method> parse_methods(const std::string& key, const std::string& raw)
{
    std::vector<Method> out;
    for (const auto& item : detail::split_list(raw)) {
        if (item == "both") {
            out = {Method::goprune, Method::admm};
        } else if (item == "goprune") {
            out.push_back(Method::goprune);
        } else if (item == "admm") {
            out.push_back(Method::admm);
        } else {
            throw ConfigError("config: " + key + ": unknown method '" + item + "' (goprune, admm, both)");
        }
    }
    std::vector<Method> unique;
    for (Method m : out) {
        if (std::find(unique.begin(), unique.end(), m) == unique.end()) {
            unique.push_back(m);
        }
    }
    if (unique.empty()) {
        throw ConfigError("config: " + key + ": no method given");
    }
    return unique;
}

namespace detail {

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

inline const std::map<std::string, Setter>& setters()
{
    static const std::map<std::string, Setter> table = [] {
        std::map<std::string, Setter> t;
        auto real = [](auto field) {
            return Setter([field](RunConfig& c, const std::string& k, const std::string& v) {
                field(c) = parse_real(k, v);
            });
        };
        auto count = [](auto field) {
            return Setter([field](RunConfig& c, const std::string& k, const std::string& v) {
                field(c) = static_cast<std::remove_reference_t<decltype(field(c))>>(goprune::parse_count(k, v));
            });
        };
        auto text = [](auto field) {
            return Setter([field](RunConfig& c, const std::string&, const std::string& v) { field(c) = trim(v); });
        };

        t["model.kind"] = text([](RunConfig& c) -> std::string& { return c.model.kind; });
        t["model.conv1"] = count([](RunConfig& c) -> std::size_t& { return c.model.conv1; });
        t["model.conv2"] = count([](RunConfig& c) -> std::size_t& { return c.model.conv2; });
        t["model.hidden"] = count([](RunConfig& c) -> std::size_t& { return c.model.hidden; });

        t["data.source"] = text([](RunConfig& c) -> std::string& { return c.data.source; });
        t["data.classes"] = count([](RunConfig& c) -> std::size_t& { return c.data.blobs.classes; });
        t["data.dim"] = count([](RunConfig& c) -> std::size_t& { return c.data.blobs.dim; });
        t["data.samples"] = count([](RunConfig& c) -> std::size_t& { return c.data.blobs.samples; });
        t["data.center_scale"] = real([](RunConfig& c) -> double& { return c.data.blobs.center_scale; });
        t["data.noise"] = real([](RunConfig& c) -> double& { return c.data.blobs.noise; });
        t["data.test_fraction"] = real([](RunConfig& c) -> double& { return c.data.blobs.test_fraction; });
        t["data.seed"] = count([](RunConfig& c) -> std::uint64_t& { return c.data.blobs.seed; });
        t["data.train_csv"] = text([](RunConfig& c) -> std::string& { return c.data.train_csv; });
        t["data.test_csv"] = text([](RunConfig& c) -> std::string& { return c.data.test_csv; });

        for (const char* section : {"train", "finetune"}) {
            const std::string s = section;
            auto phase = [s](RunConfig& c) -> PhaseConfig& { return s == "train" ? c.train : c.finetune; };
            t[s + ".epochs"] = count([phase](RunConfig& c) -> std::size_t& { return phase(c).epochs; });
            t[s + ".eta"] = real([phase](RunConfig& c) -> double& { return phase(c).eta; });
            t[s + ".alpha"] = real([phase](RunConfig& c) -> double& { return phase(c).alpha; });
            t[s + ".batch_size"] = count([phase](RunConfig& c) -> std::size_t& { return phase(c).batch_size; });
        }

        t["compress.epochs"] = count([](RunConfig& c) -> std::size_t& { return c.compress.hp.outer_epochs; });
        t["compress.lambda"] = real([](RunConfig& c) -> double& { return c.compress.hp.lambda; });
        t["compress.beta"] = real([](RunConfig& c) -> double& { return c.compress.hp.beta; });
        t["compress.rho1"] = real([](RunConfig& c) -> double& { return c.compress.hp.rho1; });
        t["compress.rho2"] = real([](RunConfig& c) -> double& { return c.compress.hp.rho2; });
        t["compress.alpha"] = real([](RunConfig& c) -> double& { return c.compress.hp.alpha; });
        t["compress.eta"] = real([](RunConfig& c) -> double& { return c.compress.hp.eta; });
        t["compress.batch_size"] = count([](RunConfig& c) -> std::size_t& { return c.compress.hp.batch_size; });

        t["goprune.p"] = real([](RunConfig& c) -> double& { return c.compress.goprune_p; });
        t["admm.p"] = real([](RunConfig& c) -> double& { return c.compress.admm_p; });
        t["admm.newton_max_iter"] = Setter([](RunConfig& c, const std::string& k, const std::string& v) {
            c.compress.admm.newton_max_iter = static_cast<int>(goprune::parse_count(k, v));
        });
        t["admm.newton_tol"] = real([](RunConfig& c) -> double& { return c.compress.admm.newton_tol; });
        t["admm.closed_form"] = Setter([](RunConfig& c, const std::string& k, const std::string& v) {
            c.compress.admm.closed_form = parse_bool(k, v);
        });

        t["prune.ratio"] = real([](RunConfig& c) -> double& { return c.prune.ratio; });
        t["prune.score_source"] = Setter([](RunConfig& c, const std::string& k, const std::string& v) {
            const std::string s(trim(v));
            if (s == "w") {
                c.prune.score_source = ScoreSource::w;
            } else if (s == "u") {
                c.prune.score_source = ScoreSource::u;
            } else {
                throw ConfigError("config: " + k + ": expected w or u, got '" + s + "'");
            }
        });

        t["run.methods"] = Setter([](RunConfig& c, const std::string& k, const std::string& v) {
            c.methods = parse_methods(k, v);
        });
        t["run.seeds"] = Setter([](RunConfig& c, const std::string& k, const std::string& v) {
            c.seeds = parse_seed_list(k, v);
        });
        t["run.repeats"] = Setter([](RunConfig& c, const std::string& k, const std::string& v) {
            c.repeats = static_cast<std::size_t>(goprune::parse_count(k, v));
        });
        t["run.out"] = text([](RunConfig& c) -> std::string& { return c.out; });
        return t;
    }();
    return table;
}

} // namespace detail

/// Applies one "section.key" = value assignment.
inline void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value)
{
    const auto& table = detail::setters();
    const auto it = table.find(key);
    if (it == table.end()) {
        throw ConfigError("config: unknown key '" + key + "'");
    }
    it->second(cfg, key, value);
}

/// Applies a "section.key=value" override as given on the command line.
inline void apply_override(RunConfig& cfg, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw ConfigError("config: override '" + assignment + "' is not of the form section.key=value");
    }
    set_config_value(cfg, std::string(detail::trim(assignment.substr(0, eq))), assignment.substr(eq + 1));
}

/// All keys the parser accepts, in sorted order.
[[nodiscard]] inline std::vector<std::string> config_keys()
{
    std::vector<std::string> out;
    for (const auto& [k, v] : detail::setters()) {
        out.push_back(k);
    }
    return out;
}

/// INI text with [section] headers and key = value lines; ';' and '#' start comments.
/// Unknown sections or keys are errors. The result is not finalized.
[[nodiscard]] inline RunConfig parse_config(std::istream& in)
{
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError("config: line " + std::to_string(e.line()) + ": " + e.message());
    }
    RunConfig cfg;
    for (const auto& [section, body] : tree) {
        if (body.empty()) {
            throw ConfigError("config: key '" + section + "' must sit inside a [section]");
        }
        for (const auto& [key, value] : body) {
            std::string v = value.data();
            // Inline comments are not handled by the INI reader.
            const auto hash = v.find_first_of(";#");
            if (hash != std::string::npos) {
                v = v.substr(0, hash);
            }
            set_config_value(cfg, section + "." + key, v);
        }
    }
    return cfg;
}

[[nodiscard]] inline RunConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("config: cannot read " + path.string());
    }
    return parse_config(in);
}

/// Name of the environment variable that overrides run.out (command-line flags still win).
inline constexpr const char* out_dir_env = "GOPRUNE_OUT_DIR";

inline void apply_out_dir_env(RunConfig& cfg)
{
    if (const char* env = std::getenv(out_dir_env); env != nullptr && *env != '\0') {
        cfg.out = env;
    }
}

} // namespace goprune
