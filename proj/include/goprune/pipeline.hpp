#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "admm.hpp"
#include "checkpoint.hpp"
#include "config.hpp"
#include "data.hpp"
#include "models.hpp"
#include "pam.hpp"
#include "pruning.hpp"
#include "report.hpp"
#include "training.hpp"

namespace goprune {

/// Outcome of one (seed, method) pass through train, compress, prune, fine-tune.
struct RunRecord {
    std::uint64_t seed{0};
    Method method{Method::goprune};
    double p{0.0};
    bool ok{false};
    bool numerical_failure{false};
    std::string error;

    double acc_dense{0.0};
    double acc_compressed{0.0};
    double acc_pruned{0.0};
    double acc_finetuned{0.0};
    double zero_channel_fraction{0.0}; ///< channels of U that are exactly zero
    double zero_weight_fraction{0.0};  ///< entries of U that are exactly zero
    std::size_t params_dense{0};
    std::size_t params_pruned{0}; ///< nonzero weights left after pruning

    double train_s{0.0};
    double compress_s{0.0}; ///< W- and U-update wall-clock only
    double prune_s{0.0};
    double finetune_s{0.0};
};

struct PipelineResult {
    std::vector<RunRecord> runs;

    [[nodiscard]] bool any_failure() const
    {
        for (const auto& r : runs) {
            if (!r.ok) {
                return true;
            }
        }
        return false;
    }
    [[nodiscard]] bool any_numerical_failure() const
    {
        for (const auto& r : runs) {
            if (r.numerical_failure) {
                return true;
            }
        }
        return false;
    }
    /// Successful runs of one method.
    [[nodiscard]] std::vector<RunRecord> ok_runs(Method m) const
    {
        std::vector<RunRecord> out;
        for (const auto& r : runs) {
            if (r.ok && r.method == m) {
                out.push_back(r);
            }
        }
        return out;
    }
};

/// Artifacts whose bytes depend on wall-clock measurements.
inline const std::vector<std::string>& timing_bearing_files()
{
    static const std::vector<std::string> names{"timing.csv", "trace.csv"};
    return names;
}

[[nodiscard]] inline DataSplit load_data(const DataConfig& cfg)
{
    if (cfg.source == "csv") {
        DataSplit d{load_csv_dataset(cfg.train_csv), load_csv_dataset(cfg.test_csv)};
        if (d.train.dim != d.test.dim) {
            throw std::runtime_error("train and test CSV files have different feature counts");
        }
        const std::size_t classes = std::max(d.train.n_classes, d.test.n_classes);
        d.train.n_classes = d.test.n_classes = classes;
        d.train.tag = "train";
        d.test.tag = "test";
        return d;
    }
    return synth_blobs(cfg.blobs);
}

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline std::size_t nonzero_count(const LayerSet& s)
{
    std::size_t n = 0;
    for (const auto& e : s) {
        for (float v : e.tensor.data()) {
            n += v != 0.0f ? 1 : 0;
        }
    }
    return n;
}

inline double zero_weight_fraction(const LayerSet& s)
{
    const std::size_t total = s.parameter_count();
    return total == 0 ? 0.0 : 1.0 - static_cast<double>(nonzero_count(s)) / static_cast<double>(total);
}

inline std::ofstream open_out(const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    return out;
}

inline SgdOptions sgd_options(const PhaseConfig& ph, std::uint64_t seed)
{
    return SgdOptions{ph.eta, ph.alpha, ph.batch_size, seed};
}

inline void write_finetune_csv(const std::filesystem::path& path, const FinetuneReport& rep)
{
    auto out = open_out(path);
    out << "epoch,accuracy\n";
    for (std::size_t e = 0; e < rep.accuracy.size(); ++e) {
        out << e + 1 << ',' << format_real(rep.accuracy[e]) << '\n';
    }
}

struct CompressOutcome {
    LayerSet w;
    LayerSet u;
    SolverReport report;
};

/// Compress, prune and fine-tune one method starting from the trained dense model.
inline void run_method(const RunConfig& cfg, const DataSplit& data, const TinyModel& dense, RunRecord& rec,
                       const std::filesystem::path& dir, LayerSet& compressed_w)
{
    std::filesystem::create_directories(dir);
    TinyModel model = dense;
    const HyperParams hp = cfg.hyper(rec.method, rec.seed);

    CompressOutcome c;
    if (rec.method == Method::goprune) {
        PamResult r = run_pam(model, data.train, hp);
        c = {std::move(r.state.w), std::move(r.state.u), std::move(r.report)};
    } else {
        AdmmResult r = run_admm(model, data.train, hp, cfg.compress.admm);
        c = {std::move(r.state.w), std::move(r.state.u), std::move(r.report)};
    }
    rec.compress_s = c.report.compress_seconds();
    rec.acc_compressed = evaluate_accuracy(model, data.test);
    rec.zero_channel_fraction = sparsity(c.u).zero_channel_fraction();
    rec.zero_weight_fraction = zero_weight_fraction(c.u);
    save_checkpoint(c.w, dir / "compressed_w");
    save_checkpoint(c.u, dir / "compressed_u");
    {
        auto out = open_out(dir / "trace.csv");
        write_trace_csv(out, c.report);
    }
    compressed_w = c.w;

    auto t0 = std::chrono::steady_clock::now();
    TinyModel pruned;
    ElementMask element_mask;
    const bool structured = rec.method == Method::goprune;
    if (structured) {
        TinyModel source = model;
        if (cfg.prune.score_source == ScoreSource::u) {
            source.parameters() = c.u;
        }
        const PruneMask mask = build_mask(importance_scores(prunable_weights(source)), cfg.prune.ratio);
        pruned = apply_mask(model, mask);
        rec.prune_s = seconds_since(t0);
        save_mask(mask, dir / "mask.txt");
    } else {
        element_mask = build_magnitude_mask(prunable_weights(model), cfg.prune.ratio);
        pruned = model;
        apply_element_mask(pruned.parameters(), element_mask);
        rec.prune_s = seconds_since(t0);
    }
    rec.acc_pruned = evaluate_accuracy(pruned, data.test);
    rec.params_pruned = nonzero_count(pruned.parameters());
    save_checkpoint(pruned.parameters(), dir / "pruned");

    t0 = std::chrono::steady_clock::now();
    const FinetuneReport ft = finetune(pruned, data.train, data.test, cfg.finetune.epochs,
                                       sgd_options(cfg.finetune, rec.seed), structured ? nullptr : &element_mask);
    rec.finetune_s = seconds_since(t0);
    rec.acc_finetuned = ft.accuracy.empty() ? rec.acc_pruned : ft.accuracy.back();
    save_checkpoint(pruned.parameters(), dir / "finetuned");
    write_finetune_csv(dir / "finetune.csv", ft);
}

inline std::string seed_dir_name(std::uint64_t seed) { return "seed_" + std::to_string(seed); }

inline void write_report_csv(const std::filesystem::path& path, const RunConfig& cfg, const PipelineResult& res)
{
    auto out = open_out(path);
    out << "seed,method,p,status,acc_dense,acc_compressed,acc_pruned,acc_finetuned,zero_channel_fraction,"
           "zero_weight_fraction,params_dense,params_pruned\n";
    for (const auto& r : res.runs) {
        out << r.seed << ',' << to_string(r.method) << ',' << format_real(r.p) << ',' << (r.ok ? "ok" : "failed");
        if (r.ok) {
            out << ',' << format_real(r.acc_dense) << ',' << format_real(r.acc_compressed) << ','
                << format_real(r.acc_pruned) << ',' << format_real(r.acc_finetuned) << ','
                << format_real(r.zero_channel_fraction) << ',' << format_real(r.zero_weight_fraction) << ','
                << r.params_dense << ',' << r.params_pruned << '\n';
        } else {
            out << ",,,,,,,,\n";
        }
    }
    for (Method m : cfg.methods) {
        const auto ok = res.ok_runs(m);
        auto column = [&](auto field) {
            std::vector<double> v;
            for (const auto& r : ok) {
                v.push_back(static_cast<double>(field(r)));
            }
            return v;
        };
        const std::vector<std::vector<double>> cols{
            column([](const RunRecord& r) { return r.acc_dense; }),
            column([](const RunRecord& r) { return r.acc_compressed; }),
            column([](const RunRecord& r) { return r.acc_pruned; }),
            column([](const RunRecord& r) { return r.acc_finetuned; }),
            column([](const RunRecord& r) { return r.zero_channel_fraction; }),
            column([](const RunRecord& r) { return r.zero_weight_fraction; }),
            column([](const RunRecord& r) { return r.params_dense; }),
            column([](const RunRecord& r) { return r.params_pruned; }),
        };
        const double p = m == Method::goprune ? cfg.compress.goprune_p : cfg.compress.admm_p;
        for (const char* stat : {"mean", "std"}) {
            out << stat << ',' << to_string(m) << ',' << format_real(p) << ",n=" << ok.size();
            for (const auto& col : cols) {
                out << ',' << (ok.empty() ? std::string() : format_real(std::string_view(stat) == "mean" ? mean(col) : stddev(col)));
            }
            out << '\n';
        }
    }
}

inline void write_timing_csv(const std::filesystem::path& path, const RunConfig& cfg, const PipelineResult& res)
{
    auto out = open_out(path);
    out << "seed,method,train_s,compress_s,prune_s,finetune_s\n";
    for (const auto& r : res.runs) {
        if (!r.ok) {
            continue;
        }
        out << r.seed << ',' << to_string(r.method) << ',' << format_real(r.train_s) << ','
            << format_real(r.compress_s) << ',' << format_real(r.prune_s) << ',' << format_real(r.finetune_s) << '\n';
    }
    for (Method m : cfg.methods) {
        const auto ok = res.ok_runs(m);
        if (ok.empty()) {
            continue;
        }
        std::vector<std::vector<double>> cols(4);
        for (const auto& r : ok) {
            cols[0].push_back(r.train_s);
            cols[1].push_back(r.compress_s);
            cols[2].push_back(r.prune_s);
            cols[3].push_back(r.finetune_s);
        }
        for (const char* stat : {"mean", "median"}) {
            out << stat << ',' << to_string(m);
            for (const auto& col : cols) {
                out << ',' << format_real(std::string_view(stat) == "mean" ? mean(col) : median(col));
            }
            out << '\n';
        }
    }
}

inline nlohmann::ordered_json config_json(const RunConfig& cfg, const Architecture& arch)
{
    using nlohmann::ordered_json;
    ordered_json j;
    ordered_json layers = ordered_json::array();
    for (const auto& l : arch.layers) {
        layers.push_back({{"kind", l.kind == LayerKind::conv ? "conv" : "dense"},
                          {"out", l.out},
                          {"kernel", l.kind == LayerKind::conv ? l.kernel : 1},
                          {"pool", l.pool}});
    }
    j["model"] = {{"kind", cfg.model.kind},
                  {"input", {arch.input.channels, arch.input.height, arch.input.width}},
                  {"layers", layers}};
    if (cfg.data.source == "csv") {
        j["data"] = {{"source", "csv"}, {"train_csv", cfg.data.train_csv}, {"test_csv", cfg.data.test_csv}};
    } else {
        const auto& b = cfg.data.blobs;
        j["data"] = {{"source", "blobs"},     {"classes", b.classes}, {"dim", b.dim},
                     {"samples", b.samples},  {"center_scale", b.center_scale}, {"noise", b.noise},
                     {"test_fraction", b.test_fraction}, {"seed", b.seed}};
    }
    auto phase = [](const PhaseConfig& ph) {
        return ordered_json{{"epochs", ph.epochs}, {"eta", ph.eta}, {"alpha", ph.alpha}, {"batch_size", ph.batch_size}};
    };
    j["train"] = phase(cfg.train);
    const auto& hp = cfg.compress.hp;
    j["compress"] = {{"epochs", hp.outer_epochs}, {"lambda", hp.lambda}, {"beta", hp.beta},
                     {"rho1", hp.rho1},           {"rho2", hp.rho2},     {"alpha", hp.alpha},
                     {"eta", hp.eta},             {"batch_size", hp.batch_size}};
    j["goprune"] = {{"p", cfg.compress.goprune_p}};
    j["admm"] = {{"p", cfg.compress.admm_p},
                 {"newton_max_iter", cfg.compress.admm.newton_max_iter},
                 {"newton_tol", cfg.compress.admm.newton_tol},
                 {"closed_form", cfg.compress.admm.closed_form}};
    j["prune"] = {{"ratio", cfg.prune.ratio}, {"score_source", cfg.prune.score_source == ScoreSource::w ? "w" : "u"}};
    j["finetune"] = phase(cfg.finetune);
    ordered_json methods = ordered_json::array();
    for (Method m : cfg.methods) {
        methods.push_back(to_string(m));
    }
    j["run"] = {{"methods", methods}, {"seeds", cfg.seeds}};
    return j;
}

inline void write_manifest(const std::filesystem::path& path, const RunConfig& cfg, const Architecture& arch,
                           const DataSplit& data, const PipelineResult& res)
{
    using nlohmann::ordered_json;
    ordered_json j;
    j["format"] = "goprune-run v1";
    j["config"] = config_json(cfg, arch);
    j["dataset"] = {{"train_samples", data.train.size()},
                    {"test_samples", data.test.size()},
                    {"dim", data.train.dim},
                    {"classes", data.train.n_classes}};
    ordered_json runs = ordered_json::array();
    for (const auto& r : res.runs) {
        const std::string dir = seed_dir_name(r.seed) + "/" + to_string(r.method) + "/";
        ordered_json run{{"seed", r.seed}, {"method", to_string(r.method)}, {"p", r.p}, {"status", r.ok ? "ok" : "failed"}};
        if (r.ok) {
            ordered_json artifacts{{"dense", seed_dir_name(r.seed) + "/dense"},
                                   {"compressed_w", dir + "compressed_w"},
                                   {"compressed_u", dir + "compressed_u"},
                                   {"pruned", dir + "pruned"},
                                   {"finetuned", dir + "finetuned"},
                                   {"trace", dir + "trace.csv"},
                                   {"finetune_curve", dir + "finetune.csv"}};
            if (r.method == Method::goprune) {
                artifacts["mask"] = dir + "mask.txt";
            }
            run["artifacts"] = artifacts;
        } else {
            run["error"] = r.error;
        }
        runs.push_back(run);
    }
    j["runs"] = runs;
    j["reports"] = {{"report", "report.csv"}, {"timing", "timing.csv"}};
    j["timing_bearing_files"] = timing_bearing_files();
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

} // namespace detail

/// Train, compress, prune and fine-tune for every seed and method of `cfg`,
/// writing checkpoints, masks, traces, report.csv, timing.csv and
/// manifest.json under cfg.out. A failing (seed, method) is recorded and the
/// remaining runs continue. `cfg` must be finalized.
inline PipelineResult run_pipeline(const RunConfig& cfg, std::ostream* log = nullptr)
{
    cfg.validate();
    const std::filesystem::path root(cfg.out);
    std::filesystem::create_directories(root);
    const DataSplit data = load_data(cfg.data);
    const Architecture arch = cfg.architecture(data.train.dim, data.train.n_classes);

    PipelineResult res;
    for (std::uint64_t seed : cfg.seeds) {
        const std::filesystem::path seed_dir = root / detail::seed_dir_name(seed);
        std::filesystem::create_directories(seed_dir);

        TinyModel dense(arch, seed);
        double train_s = 0.0;
        double acc_dense = 0.0;
        std::string dense_error;
        bool dense_numerical = false;
        try {
            const auto t0 = std::chrono::steady_clock::now();
            train(dense, data.train, cfg.train.epochs, detail::sgd_options(cfg.train, seed));
            train_s = detail::seconds_since(t0);
            acc_dense = evaluate_accuracy(dense, data.test);
            save_checkpoint(dense.parameters(), seed_dir / "dense");
        } catch (const NumericalError& e) {
            dense_error = e.what();
            dense_numerical = true;
        } catch (const std::exception& e) {
            dense_error = e.what();
        }

        std::vector<std::string> hist_names;
        std::vector<LayerSet> compressed;
        for (Method m : cfg.methods) {
            RunRecord rec;
            rec.seed = seed;
            rec.method = m;
            rec.p = m == Method::goprune ? cfg.compress.goprune_p : cfg.compress.admm_p;
            rec.train_s = train_s;
            rec.acc_dense = acc_dense;
            rec.params_dense = dense.parameters().parameter_count();
            if (!dense_error.empty()) {
                rec.error = "dense training failed: " + dense_error;
                rec.numerical_failure = dense_numerical;
                res.runs.push_back(rec);
                continue;
            }
            try {
                LayerSet w;
                detail::run_method(cfg, data, dense, rec, seed_dir / to_string(m), w);
                rec.ok = true;
                hist_names.push_back(to_string(m));
                compressed.push_back(std::move(w));
            } catch (const NumericalError& e) {
                rec.error = e.what();
                rec.numerical_failure = true;
            } catch (const std::exception& e) {
                rec.error = e.what();
            }
            if (log != nullptr) {
                *log << "seed " << seed << ' ' << to_string(m) << ": "
                     << (rec.ok ? "dense " + format_real(rec.acc_dense) + " compressed " +
                                      format_real(rec.acc_compressed) + " pruned " + format_real(rec.acc_pruned) +
                                      " finetuned " + format_real(rec.acc_finetuned)
                                : "FAILED " + rec.error)
                     << '\n';
            }
            res.runs.push_back(rec);
        }
        if (!compressed.empty()) {
            // Compressed-W magnitudes of all methods over one shared range.
            double hi = 0.0;
            for (const auto& w : compressed) {
                hi = std::max(hi, max_magnitude(w));
            }
            std::vector<Histogram> hs;
            for (const auto& w : compressed) {
                hs.push_back(hi > 0.0 ? magnitude_histogram(w, 100, std::pair{0.0, hi}) : magnitude_histogram(w, 100));
            }
            auto out = detail::open_out(seed_dir / "histogram.csv");
            write_histograms_csv(out, hist_names, hs);
        }
    }
    detail::write_report_csv(root / "report.csv", cfg, res);
    detail::write_timing_csv(root / "timing.csv", cfg, res);
    detail::write_manifest(root / "manifest.json", cfg, arch, data, res);
    return res;
}

struct SweepRow {
    double p{0.0};
    double acc_compressed{0.0};
    double acc_pruned{0.0};
    double acc_finetuned{0.0};
    std::size_t ok_runs{0};
};

/// Rejects empty lists, values outside [0, 1) and duplicates.
inline void check_sweep_values(const std::vector<double>& ps)
{
    if (ps.empty()) {
        throw std::invalid_argument("p-sweep: no p values given");
    }
    for (std::size_t i = 0; i < ps.size(); ++i) {
        if (!(ps[i] >= 0.0 && ps[i] < 1.0)) {
            throw std::invalid_argument("p-sweep: p = " + format_real(ps[i]) + " is outside [0, 1)");
        }
        for (std::size_t k = 0; k < i; ++k) {
            if (std::abs(ps[i] - ps[k]) < 1e-12) {
                throw std::invalid_argument("p-sweep: duplicate p value " + format_real(ps[i]));
            }
        }
    }
}

/// GoPrune pipeline once per p, each under <out>/p_<p>, plus <out>/p_sweep.csv
/// with the mean stage accuracies.
inline std::vector<SweepRow> run_p_sweep(const RunConfig& base, const std::vector<double>& ps,
                                         std::ostream* log = nullptr, bool* any_numerical_failure = nullptr)
{
    check_sweep_values(ps);
    std::vector<SweepRow> rows;
    bool numerical = false;
    for (double p : ps) {
        RunConfig cfg = base;
        cfg.methods = {Method::goprune};
        cfg.compress.goprune_p = p;
        cfg.out = (std::filesystem::path(base.out) / ("p_" + format_real(p))).string();
        if (log != nullptr) {
            *log << "p = " << format_real(p) << '\n';
        }
        const PipelineResult res = run_pipeline(cfg, log);
        numerical = numerical || res.any_numerical_failure();
        const auto ok = res.ok_runs(Method::goprune);
        SweepRow row;
        row.p = p;
        row.ok_runs = ok.size();
        std::vector<double> c, pr, f;
        for (const auto& r : ok) {
            c.push_back(r.acc_compressed);
            pr.push_back(r.acc_pruned);
            f.push_back(r.acc_finetuned);
        }
        row.acc_compressed = mean(c);
        row.acc_pruned = mean(pr);
        row.acc_finetuned = mean(f);
        rows.push_back(row);
    }
    std::filesystem::create_directories(base.out);
    auto out = detail::open_out(std::filesystem::path(base.out) / "p_sweep.csv");
    out << "p,acc_compressed,acc_pruned,acc_finetuned\n";
    for (const auto& r : rows) {
        out << format_real(r.p) << ',' << format_real(r.acc_compressed) << ',' << format_real(r.acc_pruned) << ','
            << format_real(r.acc_finetuned) << '\n';
    }
    if (any_numerical_failure != nullptr) {
        *any_numerical_failure = numerical;
    }
    return rows;
}

} // namespace goprune
