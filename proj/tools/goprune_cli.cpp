// goprune: train -> compress -> prune -> fine-tune driver and report tools.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure
// (including a failed prox-check).

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "goprune/goprune.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_usage = 1;
constexpr int exit_numerical = 2;

/// Flags shared by pipeline and p-sweep; each maps onto a config key.
struct Overrides {
    std::string config;
    std::string method;
    std::string p;
    std::string lambda;
    std::string ratio;
    std::string seeds;
    std::string out;
    std::string beta;
    std::string rho1;
    std::string rho2;
    std::string alpha;
    std::string eta;
    std::string epochs;
    std::string batch_size;
    std::vector<std::string> sets;

    void add_to(CLI::App& cmd, bool with_method_and_p)
    {
        cmd.add_option("--config", config, "INI run configuration")->check(CLI::ExistingFile);
        if (with_method_and_p) {
            cmd.add_option("--method", method, "goprune, admm or both");
            cmd.add_option("--p", p, "exponent for every selected method (fractions like 2/3 allowed)");
        }
        cmd.add_option("--lambda", lambda, "regularization weight");
        cmd.add_option("--ratio", ratio, "fraction of channels removed per layer");
        cmd.add_option("--seeds", seeds, "comma-separated seed list");
        cmd.add_option("--out", out, "output directory (overrides the config and $GOPRUNE_OUT_DIR)");
        cmd.add_option("--beta", beta, "coupling penalty");
        cmd.add_option("--rho1", rho1, "proximal weight of the W-step");
        cmd.add_option("--rho2", rho2, "proximal weight of the U-step");
        cmd.add_option("--alpha", alpha, "weight decay during compression");
        cmd.add_option("--eta", eta, "learning rate during compression");
        cmd.add_option("--epochs", epochs, "compression epochs");
        cmd.add_option("--batch-size", batch_size, "compression batch size");
        cmd.add_option("--set", sets, "any config key: section.key=value (repeatable)");
    }

    [[nodiscard]] goprune::RunConfig resolve() const
    {
        goprune::RunConfig cfg = config.empty() ? goprune::RunConfig{} : goprune::load_config(config);
        goprune::apply_out_dir_env(cfg);
        for (const auto& s : sets) {
            goprune::apply_override(cfg, s);
        }
        const std::pair<const std::string*, const char*> direct[] = {
            {&method, "run.methods"},       {&lambda, "compress.lambda"}, {&ratio, "prune.ratio"},
            {&out, "run.out"},              {&beta, "compress.beta"},     {&rho1, "compress.rho1"},
            {&rho2, "compress.rho2"},       {&alpha, "compress.alpha"},   {&eta, "compress.eta"},
            {&epochs, "compress.epochs"},   {&batch_size, "compress.batch_size"},
        };
        for (const auto& [value, key] : direct) {
            if (!value->empty()) {
                goprune::set_config_value(cfg, key, *value);
            }
        }
        if (!p.empty()) {
            goprune::set_config_value(cfg, "goprune.p", p);
            goprune::set_config_value(cfg, "admm.p", p);
        }
        if (!seeds.empty()) {
            goprune::set_config_value(cfg, "run.seeds", seeds);
            cfg.repeats.reset();
        }
        cfg.finalize();
        return cfg;
    }
};

void print_summary(const goprune::RunConfig& cfg, const goprune::PipelineResult& res)
{
    for (goprune::Method m : cfg.methods) {
        const auto ok = res.ok_runs(m);
        std::vector<double> dense, fin, comp;
        for (const auto& r : ok) {
            dense.push_back(r.acc_dense);
            fin.push_back(r.acc_finetuned);
            comp.push_back(r.compress_s);
        }
        std::cout << goprune::to_string(m) << ": " << ok.size() << '/' << cfg.seeds.size() << " runs ok";
        if (!ok.empty()) {
            std::cout << ", dense " << goprune::mean(dense) << " +- " << goprune::stddev(dense) << ", finetuned "
                      << goprune::mean(fin) << " +- " << goprune::stddev(fin) << ", compress median "
                      << goprune::median(comp) << " s";
        }
        std::cout << '\n';
    }
    std::cout << "reports written to " << cfg.out << '\n';
}

int pipeline_exit_code(const goprune::PipelineResult& res)
{
    if (res.any_numerical_failure()) {
        return exit_numerical;
    }
    return res.any_failure() ? exit_usage : exit_ok;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Group-sparse l_{2,p} compression and structured pruning toolkit"};
    app.require_subcommand(1);

    Overrides pipe_opts;
    auto* pipeline = app.add_subcommand("pipeline", "train, compress, prune and fine-tune for every seed");
    pipe_opts.add_to(*pipeline, true);

    std::string hist_checkpoint;
    std::size_t hist_bins = 100;
    std::vector<double> hist_range;
    std::string hist_out;
    auto* histogram = app.add_subcommand("histogram", "weight-magnitude histogram of a checkpoint as CSV");
    histogram->add_option("--checkpoint", hist_checkpoint, "checkpoint base path (without .manifest/.bin)")
        ->required();
    histogram->add_option("--bins", hist_bins, "number of bins")->check(CLI::PositiveNumber);
    histogram->add_option("--range", hist_range, "lo,hi (default 0,max|w|)")->delimiter(',')->expected(2);
    histogram->add_option("--out", hist_out, "CSV file (default stdout)");

    Overrides sweep_opts;
    std::string sweep_values = "0,1/2,2/3";
    auto* psweep = app.add_subcommand("p-sweep", "GoPrune pipeline once per p value");
    sweep_opts.add_to(*psweep, false);
    psweep->add_option("--p-values", sweep_values, "comma-separated p values")->capture_default_str();

    goprune::ProxSweep sweep;
    std::string check_lambdas;
    std::string check_ps;
    std::string check_out;
    auto* proxcheck = app.add_subcommand("prox-check", "compare the scalar prox against a brute-force grid");
    proxcheck->add_option("--a-min", sweep.a_min, "smallest a")->capture_default_str();
    proxcheck->add_option("--a-max", sweep.a_max, "largest a")->capture_default_str();
    proxcheck->add_option("--a-count", sweep.a_count, "evenly spaced a values")->capture_default_str();
    proxcheck->add_option("--lambdas", check_lambdas, "comma-separated lambda values (default 0.1,1,3)");
    proxcheck->add_option("--ps", check_ps, "comma-separated p values (default 0,0.3,1/2,2/3,0.9)");
    proxcheck->add_option("--grid-step", sweep.grid_step, "oracle grid spacing")->capture_default_str();
    proxcheck->add_option("--near-kappa", sweep.near_kappa_offset, "relative offset of threshold probes, 0 disables")
        ->capture_default_str();
    proxcheck->add_option("--tolerance", sweep.tolerance, "largest allowed objective gap")->capture_default_str();
    proxcheck->add_option("--inject-kappa-fault", sweep.kappa_fault, "test hook: scale the threshold by 1 + value");
    proxcheck->add_option("--out", check_out, "CSV file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? exit_ok : exit_usage;
    }

    try {
        if (pipeline->parsed()) {
            const goprune::RunConfig cfg = pipe_opts.resolve();
            const auto res = goprune::run_pipeline(cfg, &std::cerr);
            print_summary(cfg, res);
            return pipeline_exit_code(res);
        }
        if (psweep->parsed()) {
            const goprune::RunConfig cfg = sweep_opts.resolve();
            const auto ps = goprune::parse_real_list("--p-values", sweep_values);
            goprune::check_sweep_values(ps);
            bool numerical = false;
            const auto rows = goprune::run_p_sweep(cfg, ps, &std::cerr, &numerical);
            for (const auto& r : rows) {
                std::cout << "p=" << goprune::format_real(r.p) << " compressed " << r.acc_compressed << " pruned "
                          << r.acc_pruned << " finetuned " << r.acc_finetuned << '\n';
            }
            return numerical ? exit_numerical : exit_ok;
        }
        if (histogram->parsed()) {
            const goprune::LayerSet w = goprune::load_checkpoint(hist_checkpoint);
            std::optional<std::pair<double, double>> range;
            if (!hist_range.empty()) {
                range = std::pair{hist_range[0], hist_range[1]};
            }
            const auto h = goprune::magnitude_histogram(w, hist_bins, range);
            if (hist_out.empty()) {
                goprune::write_histogram_csv(std::cout, h);
            } else {
                std::ofstream out(hist_out, std::ios::trunc);
                if (!out) {
                    throw std::runtime_error("cannot write " + hist_out);
                }
                goprune::write_histogram_csv(out, h);
            }
            return exit_ok;
        }
        if (proxcheck->parsed()) {
            if (!check_lambdas.empty()) {
                sweep.lambdas = goprune::parse_real_list("--lambdas", check_lambdas);
            }
            if (!check_ps.empty()) {
                sweep.ps = goprune::parse_real_list("--ps", check_ps);
            }
            const auto res = goprune::run_prox_check(sweep);
            if (check_out.empty()) {
                goprune::write_prox_check_csv(std::cout, res);
            } else {
                std::ofstream out(check_out, std::ios::trunc);
                if (!out) {
                    throw std::runtime_error("cannot write " + check_out);
                }
                goprune::write_prox_check_csv(out, res);
            }
            std::cerr << res.rows.size() << " points, " << res.failures << " above tolerance, worst gap "
                      << res.worst_gap << '\n';
            return res.passed() ? exit_ok : exit_numerical;
        }
    } catch (const goprune::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return exit_numerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    }
    return exit_usage;
}
