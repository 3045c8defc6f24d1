#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code{-1};
    std::string output; ///< stdout and stderr interleaved
};

Outcome run(const std::string& args, const std::string& env = "")
{
    const std::string cmd = env + (env.empty() ? "" : " ") + "'" + GOPRUNE_CLI_PATH + "' " + args + " 2>&1";
    Outcome o;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (pipe == nullptr) {
        return o;
    }
    std::array<char, 4096> buf{};
    while (std::fgets(buf.data(), buf.size(), pipe) != nullptr) {
        o.output += buf.data();
    }
    const int status = ::pclose(pipe);
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return o;
}

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("goprune_cli_test_" + name);
    fs::remove_all(p);
    return p;
}

// Small enough to finish in well under a second.
const std::string tiny =
    " --set data.dim=16 --set data.samples=160 --set data.classes=3 --set model.conv1=4 --set model.conv2=4"
    " --set train.epochs=2 --set finetune.epochs=1 --epochs 1 --beta 0.5 --rho1 0.5 --rho2 0.5 --lambda 0.2"
    " --batch-size 16";

std::string slurp(const fs::path& p)
{
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace

TEST(Cli, UsageErrorsExitOne)
{
    EXPECT_EQ(run("").code, 1);
    EXPECT_EQ(run("frobnicate").code, 1);
    EXPECT_EQ(run("pipeline --no-such-flag").code, 1);
    EXPECT_EQ(run("pipeline --config /nonexistent.ini").code, 1);
}

TEST(Cli, HelpExitsZero)
{
    const auto o = run("--help");
    EXPECT_EQ(o.code, 0);
    EXPECT_NE(o.output.find("prox-check"), std::string::npos);
    EXPECT_EQ(run("pipeline --help").code, 0);
}

TEST(Cli, ProxCheckDefaultPasses)
{
    const fs::path out = scratch("prox.csv");
    const auto o = run("prox-check --out " + out.string());
    EXPECT_EQ(o.code, 0) << o.output;
    EXPECT_NE(o.output.find("0 above tolerance"), std::string::npos) << o.output;
    EXPECT_EQ(slurp(out).rfind("a,lambda,p,prox_value,oracle_value,objective_gap\n", 0), 0u);
    fs::remove(out);
}

TEST(Cli, ProxCheckDetectsInjectedThresholdFault)
{
    const auto o = run("prox-check --a-count 3 --lambdas 1 --ps 1/2 --inject-kappa-fault 0.02 --out /dev/null");
    EXPECT_EQ(o.code, 2) << o.output;
}

TEST(Cli, ProxCheckEmptySweepIsUsageError)
{
    const auto o = run("prox-check --a-count 0 --near-kappa 0");
    EXPECT_EQ(o.code, 1);
    EXPECT_NE(o.output.find("empty sweep"), std::string::npos) << o.output;
}

TEST(Cli, AdmmWithZeroPIsRejected)
{
    const auto o = run("pipeline --method admm --p 0 --out /tmp/never_written");
    EXPECT_EQ(o.code, 1);
    EXPECT_NE(o.output.find("p in (0, 1)"), std::string::npos) << o.output;
    EXPECT_FALSE(fs::exists("/tmp/never_written"));
}

TEST(Cli, UnknownSetKeyIsRejected)
{
    const auto o = run("pipeline --set compress.lamda=1");
    EXPECT_EQ(o.code, 1);
    EXPECT_NE(o.output.find("compress.lamda"), std::string::npos);
}

TEST(Cli, PipelineWritesReportWhereFlagsSay)
{
    const fs::path env_dir = scratch("env");
    const fs::path flag_dir = scratch("flag");
    auto o = run("pipeline --method both --seeds 4" + tiny, "GOPRUNE_OUT_DIR=" + env_dir.string());
    EXPECT_EQ(o.code, 0) << o.output;
    EXPECT_TRUE(fs::exists(env_dir / "report.csv"));
    EXPECT_TRUE(fs::exists(env_dir / "seed_4" / "admm" / "finetuned.bin"));

    o = run("pipeline --seeds 4 --out " + flag_dir.string() + tiny, "GOPRUNE_OUT_DIR=" + env_dir.string() + "_unused");
    EXPECT_EQ(o.code, 0) << o.output;
    EXPECT_TRUE(fs::exists(flag_dir / "report.csv"));
    EXPECT_FALSE(fs::exists(env_dir.string() + "_unused"));

    o = run("histogram --checkpoint " + (flag_dir / "seed_4" / "goprune" / "compressed_w").string() + " --bins 5");
    EXPECT_EQ(o.code, 0) << o.output;
    EXPECT_EQ(o.output.rfind("bin_lo,bin_hi,count\n", 0), 0u);
    EXPECT_EQ(std::count(o.output.begin(), o.output.end(), '\n'), 6);

    fs::remove_all(env_dir);
    fs::remove_all(flag_dir);
}

TEST(Cli, NumericalFailureExitsTwo)
{
    const fs::path dir = scratch("nan");
    const auto o = run("pipeline --seeds 1 --eta 1e30 --out " + dir.string() + tiny);
    EXPECT_EQ(o.code, 2) << o.output;
    fs::remove_all(dir);
}

TEST(Cli, PSweepRejectsDuplicatesAndRunsSingleValue)
{
    EXPECT_EQ(run("p-sweep --p-values 0.5,1/2 --out /tmp/never_written").code, 1);
    const fs::path dir = scratch("sweep");
    const auto o = run("p-sweep --p-values 2/3 --seeds 2 --out " + dir.string() + tiny);
    EXPECT_EQ(o.code, 0) << o.output;
    EXPECT_TRUE(fs::exists(dir / "p_sweep.csv"));
    fs::remove_all(dir);
}

TEST(Cli, HistogramRejectsMissingCheckpoint)
{
    EXPECT_EQ(run("histogram").code, 1);
    EXPECT_EQ(run("histogram --checkpoint /nonexistent/ckpt").code, 1);
}
