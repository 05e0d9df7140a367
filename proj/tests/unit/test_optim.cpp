#include "doctest.h"

#include "hyptext/ball.hpp"
#include "hyptext/errors.hpp"
#include "hyptext/optim.hpp"

#include <cmath>
#include <random>
#include <vector>

using namespace hyptext;
using optim::GradBlock;

TEST_SUITE("optim") {

TEST_CASE("clipping leaves small gradients alone") {
    std::vector<double> g{1.2, 1.6}; // norm 2
    std::vector<GradBlock> blocks{{"g", g}};
    CHECK(optim::clip_by_global_norm(blocks, 5.0) == doctest::Approx(2.0));
    CHECK(g == std::vector<double>{1.2, 1.6});

    std::vector<double> edge{3.0, 4.0};
    std::vector<GradBlock> b2{{"edge", edge}};
    optim::clip_by_global_norm(b2, 5.0);
    CHECK(edge == std::vector<double>{3.0, 4.0});
}

TEST_CASE("clipping rescales to the maximum norm across blocks") {
    std::vector<double> g{6.0, 8.0};
    std::vector<GradBlock> blocks{{"g", g}};
    CHECK(optim::clip_by_global_norm(blocks, 5.0) == doctest::Approx(10.0));
    CHECK(g[0] == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(g[1] == doctest::Approx(4.0).epsilon(1e-15));

    std::vector<double> a{6.0};
    std::vector<double> b{8.0};
    std::vector<GradBlock> two{{"a", a}, {"b", b}};
    optim::clip_by_global_norm(two, 5.0);
    CHECK(a[0] == doctest::Approx(3.0));
    CHECK(b[0] == doctest::Approx(4.0));
}

TEST_CASE("clipping is idempotent") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(0.0, 10.0);
    for (int i = 0; i < 100; ++i) {
        std::vector<double> g(13);
        for (double& x : g) x = n(rng);
        std::vector<GradBlock> blocks{{"g", g}};
        optim::clip_by_global_norm(blocks, 5.0);
        const auto once = g;
        optim::clip_by_global_norm(blocks, 5.0);
        for (std::size_t k = 0; k < g.size(); ++k) CHECK(g[k] == doctest::Approx(once[k]).epsilon(1e-15));
    }
}

TEST_CASE("non-finite gradients are reported with their block name") {
    std::vector<double> ok{1.0};
    std::vector<double> bad{NAN};
    std::vector<GradBlock> blocks{{"fine", ok}, {"head_dir", bad}};
    try {
        optim::clip_by_global_norm(blocks, 5.0);
        FAIL("expected NonFiniteGradient");
    } catch (const NonFiniteGradient& e) {
        CHECK(e.parameter() == "head_dir");
    }
    CHECK_THROWS_AS(optim::clip_by_global_norm(blocks, 0.0), InvalidInput);
}

TEST_CASE("first Adam step moves by about lr against the gradient") {
    std::vector<double> p{1.0};
    std::vector<double> g{2.0};
    optim::AdamState st(1);
    optim::AdamHyper h;
    h.lr = 0.1;
    optim::adam_step(p, g, st, h);
    CHECK(p[0] == doctest::Approx(1.0 - 0.1 * 2.0 / (2.0 + 1e-8)).epsilon(1e-14));
    CHECK(st.t == 1);
}

TEST_CASE("Adam with zero gradient leaves parameters bit-identical") {
    std::vector<double> p{0.1, -0.2, 0.3};
    const auto before = p;
    std::vector<double> g(3, 0.0);
    optim::AdamState st(3);
    optim::adam_step(p, g, st, {});
    CHECK(p == before);
    CHECK(st.t == 1);
}

TEST_CASE("Adam matches a hand-rolled reference over several steps") {
    std::vector<double> p{0.5, -0.5};
    optim::AdamState st(2);
    optim::AdamHyper h;
    h.lr = 0.01;
    double m[2] = {0, 0}, v[2] = {0, 0}, q[2] = {0.5, -0.5};
    for (int t = 1; t <= 20; ++t) {
        std::vector<double> g{std::sin(t), std::cos(3.0 * t)};
        optim::adam_step(p, g, st, h);
        for (int i = 0; i < 2; ++i) {
            m[i] = 0.9 * m[i] + 0.1 * g[i];
            v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
            const double mh = m[i] / (1 - std::pow(0.9, t));
            const double vh = v[i] / (1 - std::pow(0.999, t));
            q[i] -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
        }
    }
    CHECK(p[0] == doctest::Approx(q[0]).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(q[1]).epsilon(1e-12));
    for (double x : st.v) CHECK(x >= 0.0);
}

TEST_CASE("identical parameters with identical gradients get identical updates") {
    std::vector<double> p{0.3, 0.3};
    std::vector<double> g{0.7, 0.7};
    optim::AdamState st(2);
    for (int i = 0; i < 5; ++i) optim::adam_step(p, g, st, {});
    CHECK(p[0] == p[1]);
}

TEST_CASE("hyperparameters are validated") {
    optim::AdamHyper h;
    h.lr = 0.0;
    CHECK_THROWS_AS(h.validate(), InvalidInput);
    h = {};
    h.beta1 = 1.0;
    CHECK_THROWS_AS(h.validate(), InvalidInput);
    std::vector<double> p{1.0}, g{1.0, 2.0};
    optim::AdamState st(1);
    CHECK_THROWS_AS(optim::adam_step(p, g, st, {}), InvalidInput);
}

TEST_CASE("sparse row Adam counts steps per row") {
    optim::SparseRowAdam adam(3, 2);
    std::vector<double> r0{1.0, 1.0};
    std::vector<double> r2{1.0, 1.0};
    std::vector<double> g{0.5, -0.5};
    adam.step_row(0, r0, g, {});
    adam.step_row(0, r0, g, {});
    adam.step_row(2, r2, g, {});
    CHECK(adam.row_steps(0) == 2);
    CHECK(adam.row_steps(1) == 0);
    CHECK(adam.row_steps(2) == 1);

    // one sparse row behaves exactly like a dense Adam over that row
    std::vector<double> dense{1.0, 1.0};
    optim::AdamState st(2);
    optim::adam_step(dense, g, st, {});
    CHECK(r2 == dense);
}

TEST_CASE("learning rate halves every half-life") {
    CHECK(optim::halving_decay(0.005, 0, 100000) == 0.005);
    CHECK(optim::halving_decay(0.005, 100000, 100000) == doctest::Approx(0.0025));
    CHECK(optim::halving_decay(0.005, 200000, 100000) == doctest::Approx(0.00125));
}

TEST_CASE("gradient checker") {
    std::vector<double> x{0.3, -1.7, 2.5, 12.0};
    auto sqnorm = [](std::span<const double> z) {
        double s = 0;
        for (double v : z) s += v * v;
        return s;
    };
    std::vector<double> g;
    for (double v : x) g.push_back(2 * v);
    CHECK(optim::check_gradient(sqnorm, x, g).max_rel_error < 1e-7);

    std::vector<double> wrong;
    for (double v : g) wrong.push_back(2 * v);
    const auto bad = optim::check_gradient(sqnorm, x, wrong);
    CHECK(bad.max_rel_error == doctest::Approx(0.5).epsilon(1e-6));

    std::vector<double> zero(4, 0.0);
    CHECK(optim::check_gradient(sqnorm, x, zero).max_rel_error == doctest::Approx(1.0));

    const std::vector<double> v{0.1, 0.4};
    std::vector<double> u{-0.3, 0.2};
    const auto dg = ball::poincare_distance_grad(u, v);
    CHECK(optim::check_gradient([&](std::span<const double> z) { return ball::poincare_distance(z, v); }, u, dg.grad_u)
              .max_rel_error < 1e-4);
}

}
