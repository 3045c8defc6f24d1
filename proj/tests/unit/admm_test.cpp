#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "goprune/admm.hpp"
#include "goprune/verify/grid_oracle.hpp"
#include "test_util.hpp"

using namespace goprune;

namespace {

Dataset dummy_dataset(std::size_t n)
{
    Dataset d;
    d.dim = 1;
    d.n_classes = 1;
    d.features.assign(n, 0.0f);
    d.labels.assign(n, 0);
    return d;
}

LayerSet random_layers(std::uint64_t seed, double scale = 1.0)
{
    LayerSet s;
    s.add("a", goprune::testing::random_tensor({3, 4, 2, 2}, seed, scale));
    s.add("b", goprune::testing::random_tensor({4, 5, 1, 1}, seed + 100, scale));
    return s;
}

HyperParams admm_params(double lambda)
{
    HyperParams hp;
    hp.p = 0.2;
    hp.lambda = lambda;
    hp.beta = 1.0;
    hp.alpha = 0.0;
    hp.outer_epochs = 40;
    hp.w_solve = WSolve::exact;
    return hp;
}

std::size_t zero_entries(const LayerSet& s)
{
    std::size_t n = 0;
    for (const auto& e : s) {
        for (float v : e.tensor.data()) {
            n += v == 0.0f ? 1 : 0;
        }
    }
    return n;
}

} // namespace

TEST(Admm, RejectsExponentsOutsideOpenUnitInterval)
{
    QuadraticModel model(random_layers(1), random_layers(2));
    HyperParams hp = admm_params(0.1);
    hp.p = 0.0;
    try {
        (void)run_admm(model, dummy_dataset(1), hp);
        FAIL() << "p = 0 must be rejected";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("p in (0, 1)"), std::string::npos);
    }
}

TEST(Admm, ZeroLambdaKeepsUEqualToWAndDualAtZero)
{
    QuadraticModel model(random_layers(3), random_layers(4));
    const AdmmResult r = run_admm(model, dummy_dataset(1), admm_params(0.0));
    EXPECT_LT(std::sqrt(squared_distance(r.state.w, r.state.u)), 1e-6);
    EXPECT_EQ(squared_norm(r.state.z), 0.0);
    EXPECT_LT(std::sqrt(squared_distance(r.state.w, model.target())), 1e-4);
}

TEST(Admm, IterativeProxMatchesGridOracle)
{
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> a_dist(-4.0, 4.0);
    std::uniform_real_distribution<double> l_dist(0.01, 2.0);
    ProxParams params;
    params.p = 0.2;
    params.root = RootMethod::newton;
    params.newton_tol = 1e-10;
    params.newton_max_iter = 50;
    for (int s = 0; s < 25; ++s) {
        const double a = a_dist(rng);
        params.lambda = l_dist(rng);
        const double x = scalar_prox(a, params).value;
        const auto grid = verify::grid_minimize(a, params.lambda, params.p, 1e-5);
        const double fx = verify::reference_objective(x, a, params.lambda, params.p);
        EXPECT_LE(fx, grid.value + 1e-6);
        if (std::abs(std::abs(a) - threshold_kappa(params)) > 1e-3) {
            EXPECT_NEAR(x, grid.x, 1e-4) << "a=" << a << " lambda=" << params.lambda;
        }
    }
}

TEST(Admm, NewtonAndClosedFormUUpdatesAgree)
{
    AdmmState st;
    st.w = random_layers(5);
    st.z = random_layers(6, 0.1);
    st.u = st.w;
    HyperParams hp = admm_params(0.3);
    hp.p = 0.5;
    const LayerSet iterative = admm_u_update(st, hp, AdmmOptions{});
    AdmmOptions closed;
    closed.closed_form = true;
    const LayerSet direct = admm_u_update(st, hp, closed);
    EXPECT_LT(std::sqrt(squared_distance(iterative, direct)), 1e-6);
}

TEST(Admm, SparsityNonDecreasingInLambda)
{
    std::size_t prev = 0;
    for (double lambda : {0.0, 0.01, 0.05, 0.1, 0.2, 0.4, 0.8, 1.6}) {
        QuadraticModel model(random_layers(7), random_layers(8));
        const AdmmResult r = run_admm(model, dummy_dataset(1), admm_params(lambda));
        const std::size_t zeros = zero_entries(r.state.u);
        EXPECT_GE(zeros, prev) << "lambda=" << lambda;
        prev = zeros;
    }
    EXPECT_GT(prev, 0u);
}

TEST(Admm, PrimalResidualShrinksOnQuadraticModel)
{
    QuadraticModel model(random_layers(9), random_layers(10));
    const AdmmResult r = run_admm(model, dummy_dataset(1), admm_params(0.2));
    const auto& res = r.state.primal_residuals;
    ASSERT_EQ(res.size(), 40u);
    EXPECT_LT(res.back(), 1e-3 * res.front() + 1e-6);
    for (std::size_t i = 5; i < res.size(); ++i) {
        EXPECT_LE(res[i], res[i - 5] + 1e-6);
    }
}

TEST(Admm, UpdateIsUnstructured)
{
    AdmmState st;
    LayerSet w;
    // One channel mixes a large and a tiny weight.
    w.add("w", Tensor4(TensorDims{2, 1, 1, 1}, std::vector<float>{3.0f, 0.01f}));
    st.w = w;
    st.u = w;
    st.z = w.zeros_like();
    const LayerSet u = admm_u_update(st, admm_params(0.1), AdmmOptions{});
    EXPECT_NE(u.tensor(0)(0, 0), 0.0f);
    EXPECT_EQ(u.tensor(0)(1, 0), 0.0f);
}

TEST(Admm, ReportMirrorsPamSchema)
{
    QuadraticModel model(random_layers(11), random_layers(12));
    HyperParams hp = admm_params(0.2);
    hp.outer_epochs = 4;
    const AdmmResult r = run_admm(model, dummy_dataset(1), hp);
    ASSERT_EQ(r.report.iterations.size(), 4u);
    EXPECT_EQ(r.state.objective_trace.size(), 4u);
    EXPECT_EQ(r.report.iterations.back().iteration, 4u);
    EXPECT_EQ(model.parameters(), r.state.w);
}
