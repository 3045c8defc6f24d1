#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>
#include <string>

#include "goprune/config.hpp"

namespace {

goprune::RunConfig parse(const std::string& text)
{
    std::istringstream in(text);
    return goprune::parse_config(in);
}

struct EnvGuard {
    explicit EnvGuard(const char* value) { ::setenv(goprune::out_dir_env, value, 1); }
    ~EnvGuard() { ::unsetenv(goprune::out_dir_env); }
};

} // namespace

TEST(Config, DefaultsAreValid)
{
    goprune::RunConfig cfg;
    EXPECT_NO_THROW(cfg.finalize());
    EXPECT_EQ(cfg.seeds, std::vector<std::uint64_t>{1});
    EXPECT_DOUBLE_EQ(cfg.prune.ratio, 0.7);
}

TEST(Config, ParsesSectionsCommentsAndFractions)
{
    auto cfg = parse(
        "; leading comment\n"
        "[model]\nkind = mlp\nhidden = 12\n"
        "[compress]\nlambda = 0.25 ; inline\nbeta = 1/4\n"
        "[goprune]\np = 2/3\n"
        "[admm]\np = 0.2\nclosed_form = true\n"
        "[run]\nmethods = both\nseeds = 3, 4,5\nout = somewhere\n");
    cfg.finalize();
    EXPECT_EQ(cfg.model.kind, "mlp");
    EXPECT_EQ(cfg.model.hidden, 12u);
    EXPECT_DOUBLE_EQ(cfg.compress.hp.lambda, 0.25);
    EXPECT_DOUBLE_EQ(cfg.compress.hp.beta, 0.25);
    EXPECT_DOUBLE_EQ(cfg.compress.goprune_p, 2.0 / 3.0);
    EXPECT_TRUE(cfg.compress.admm.closed_form);
    ASSERT_EQ(cfg.methods.size(), 2u);
    EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{3, 4, 5}));
    EXPECT_EQ(cfg.out, "somewhere");
    EXPECT_DOUBLE_EQ(cfg.hyper(goprune::Method::admm, 4).p, 0.2);
    EXPECT_EQ(cfg.hyper(goprune::Method::goprune, 4).seed, 4u);
}

TEST(Config, UnknownKeyIsNamed)
{
    try {
        (void)parse("[compress]\nlamda = 1\n");
        FAIL() << "expected ConfigError";
    } catch (const goprune::ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("compress.lamda"), std::string::npos);
    }
    EXPECT_THROW((void)parse("[nosuch]\nx = 1\n"), goprune::ConfigError);
}

TEST(Config, BadValuesAreRejected)
{
    EXPECT_THROW((void)parse("[compress]\nlambda = abc\n"), goprune::ConfigError);
    EXPECT_THROW((void)parse("[compress]\nepochs = -2\n"), goprune::ConfigError);
    EXPECT_THROW((void)parse("[compress]\nlambda = 1/0\n"), goprune::ConfigError);
    EXPECT_THROW((void)parse("[admm]\nclosed_form = maybe\n"), goprune::ConfigError);
    EXPECT_THROW((void)parse("[run]\nmethods = sgd\n"), goprune::ConfigError);
}

TEST(Config, AdmmWithZeroPIsRejectedNamingTheConstraint)
{
    auto cfg = parse("[admm]\np = 0\n[run]\nmethods = admm\n");
    try {
        cfg.finalize();
        FAIL() << "expected ConfigError";
    } catch (const goprune::ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("p in (0, 1)"), std::string::npos) << e.what();
    }
}

TEST(Config, GoPruneAcceptsZeroP)
{
    auto cfg = parse("[goprune]\np = 0\n[admm]\np = 0\n[run]\nmethods = goprune\n");
    EXPECT_NO_THROW(cfg.finalize());
}

TEST(Config, CrossFieldValidation)
{
    EXPECT_THROW(parse("[prune]\nratio = 1\n").finalize(), goprune::ConfigError);
    EXPECT_THROW(parse("[prune]\nratio = 0\n").finalize(), goprune::ConfigError);
    EXPECT_THROW(parse("[goprune]\np = 1\n").finalize(), goprune::ConfigError);
    EXPECT_THROW(parse("[run]\nseeds = 1,1\n").finalize(), goprune::ConfigError);
    EXPECT_THROW(parse("[run]\nrepeats = 0\n").finalize(), goprune::ConfigError);
    EXPECT_THROW(parse("[data]\nsource = csv\n").finalize(), goprune::ConfigError);
    EXPECT_THROW(parse("[compress]\nbeta = -1\n").finalize(), goprune::ConfigError);
}

TEST(Config, RepeatsExpandOneSeedOrMustMatch)
{
    auto one = parse("[run]\nseeds = 10\nrepeats = 3\n");
    one.finalize();
    EXPECT_EQ(one.seeds, (std::vector<std::uint64_t>{10, 11, 12}));

    auto match = parse("[run]\nseeds = 4,9\nrepeats = 2\n");
    match.finalize();
    EXPECT_EQ(match.seeds, (std::vector<std::uint64_t>{4, 9}));

    EXPECT_THROW(parse("[run]\nseeds = 4,9\nrepeats = 3\n").finalize(), goprune::ConfigError);
}

TEST(Config, CnnNeedsSquareInputDivisibleByFour)
{
    goprune::RunConfig cfg;
    EXPECT_NO_THROW((void)cfg.architecture(64, 4));
    EXPECT_THROW((void)cfg.architecture(36, 4), goprune::ConfigError);
    EXPECT_THROW((void)cfg.architecture(50, 4), goprune::ConfigError);
    cfg.model.kind = "mlp";
    EXPECT_NO_THROW((void)cfg.architecture(50, 4));
}

TEST(Config, OverridesReplaceFileValues)
{
    auto cfg = parse("[compress]\nlambda = 0.5\n");
    goprune::apply_override(cfg, "compress.lambda=0.125");
    EXPECT_DOUBLE_EQ(cfg.compress.hp.lambda, 0.125);
    goprune::apply_override(cfg, " prune.ratio = 1/2");
    EXPECT_DOUBLE_EQ(cfg.prune.ratio, 0.5);
    EXPECT_THROW(goprune::apply_override(cfg, "compress.lambda"), goprune::ConfigError);
    EXPECT_THROW(goprune::apply_override(cfg, "compress.nope=1"), goprune::ConfigError);
}

TEST(Config, EnvironmentOutDirSitsBetweenFileAndOverride)
{
    auto cfg = parse("[run]\nout = from_file\n");
    {
        EnvGuard env("from_env");
        goprune::apply_out_dir_env(cfg);
        EXPECT_EQ(cfg.out, "from_env");
        goprune::apply_override(cfg, "run.out=from_flag");
        EXPECT_EQ(cfg.out, "from_flag");
    }
    auto untouched = parse("[run]\nout = from_file\n");
    goprune::apply_out_dir_env(untouched);
    EXPECT_EQ(untouched.out, "from_file");
}

TEST(Config, EveryKeyIsSettable)
{
    const auto keys = goprune::config_keys();
    EXPECT_GE(keys.size(), 30u);
    for (const auto& k : keys) {
        EXPECT_EQ(k.find('.'), k.rfind('.')) << k;
    }
}

TEST(Config, ShippedConfigsLoad)
{
    for (const char* name : {"desk.ini", "reference.ini"}) {
        auto cfg = goprune::load_config(std::string(GOPRUNE_CONFIG_DIR) + "/" + name);
        EXPECT_NO_THROW(cfg.finalize()) << name;
        EXPECT_EQ(cfg.seeds.size(), 5u) << name;
        EXPECT_EQ(cfg.methods.size(), 2u) << name;
    }
    EXPECT_THROW((void)goprune::load_config("/nonexistent/x.ini"), goprune::ConfigError);
}

TEST(Config, ListParsers)
{
    EXPECT_EQ(goprune::parse_real_list("k", "0, 1/2,2/3"), (std::vector<double>{0.0, 0.5, 2.0 / 3.0}));
    EXPECT_TRUE(goprune::parse_real_list("k", "").empty());
    EXPECT_THROW(parse("[run]\nseeds =\n").finalize(), goprune::ConfigError);
    EXPECT_THROW((void)goprune::parse_seed_list("k", "1,x"), goprune::ConfigError);
}
