#include <doctest.h>

#include "aspinn/trainer.hpp"
#include "fd_oracle.hpp"

#include <cmath>
#include <random>

using namespace aspinn;

namespace {

TrainConfig small_poisson(long iterations = 60) {
    TrainConfig c;
    c.problem = "poisson2d";
    c.nodes = {2, 2};
    c.samples = 40;
    c.boundary_samples = 24;
    c.iterations = iterations;
    c.eval_every = 20;
    c.batch.fraction = 0.5;
    c.seed = 3;
    return c;
}

} // namespace

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    std::vector<double> theta{0.3, -1.2, 4.0};
    const std::vector<double> before = theta;
    AdamState st(3);
    const std::vector<double> g(3, 0.0);
    for (int k = 0; k < 5; ++k)
        adam_step(st, theta, g, AdamHyper{});
    CHECK(theta == before);
    CHECK(st.t == 5);
}

TEST_CASE("adam: first step is lr * sign(g)") {
    std::vector<double> theta{0.0, 1.0, -2.0, 5.0};
    const std::vector<double> start = theta;
    const std::vector<double> g{3.0, -0.02, 1e-3, -250.0};
    AdamState st(4);
    AdamHyper h;
    h.lr = 1e-3;
    adam_step(st, theta, g, h);
    for (std::size_t k = 0; k < g.size(); ++k) {
        const double expected = -h.lr * (g[k] > 0 ? 1.0 : -1.0);
        CHECK(std::abs((theta[k] - start[k]) - expected) < 1e-6 * h.lr / 1e-3);
    }
    for (double v : st.v)
        CHECK(v >= 0.0);
}

TEST_CASE("adam: moment recursions") {
    std::vector<double> theta{1.0};
    AdamState st(1);
    AdamHyper h;
    adam_step(st, theta, std::vector<double>{2.0}, h);
    adam_step(st, theta, std::vector<double>{-1.0}, h);
    const double m = 0.9 * (0.1 * 2.0) + 0.1 * -1.0;
    const double v = 0.999 * (0.001 * 4.0) + 0.001 * 1.0;
    CHECK(st.m[0] == doctest::Approx(m).epsilon(1e-15));
    CHECK(st.v[0] == doctest::Approx(v).epsilon(1e-15));
    const double step2 = h.lr * (m / (1 - 0.81)) / (std::sqrt(v / (1 - 0.999 * 0.999)) + h.eps);
    CHECK(theta[0] == doctest::Approx(1.0 - h.lr * 2.0 / (2.0 + h.eps) - step2).epsilon(1e-14));
}

TEST_CASE("adam: size mismatch and non-finite updates are rejected") {
    std::vector<double> theta{1.0, 2.0};
    AdamState st(2);
    CHECK_THROWS_AS(adam_step(st, theta, std::vector<double>{1.0}, AdamHyper{}), ValidationError);
    CHECK_THROWS_AS(adam_step(st, theta, std::vector<double>{1.0, std::nan("")}, AdamHyper{}),
                    NumericalError);
}

TEST_CASE("l2 error definition") {
    std::mt19937_64 rng(4);
    const DomainSpec box = make_box({{-1, 1}, {-1, 1}});
    const ModelParams model = testing::random_model(box, 1, rng);

    SUBCASE("matched single-Gaussian truth") {
        const EvalGrid g = make_eval_grid(box, [&](const Vec& x) { return eval(model, x); }, 41);
        CHECK(l2_error(model, g).value < 1e-12);
        CHECK_FALSE(l2_error(model, g).absolute);
    }
    SUBCASE("zero model is relative error one") {
        ModelParams zero = model;
        zero.nodes[0].weight = 0.0;
        const EvalGrid g = make_eval_grid(box, poisson2d().exact, 41);
        CHECK(l2_error(zero, g).value == doctest::Approx(1.0).epsilon(1e-15));
    }
    SUBCASE("zero truth falls back to absolute RMS") {
        const EvalGrid g = make_eval_grid(box, [](const Vec&) { return 0.0; }, 21);
        const L2Result r = l2_error(model, g);
        CHECK(r.absolute);
        double sum = 0.0;
        for (const Vec& x : g.points)
            sum += eval(model, x) * eval(model, x);
        CHECK(r.value == doctest::Approx(std::sqrt(sum / static_cast<double>(g.points.size()))));
    }
}

TEST_CASE("evaluation grids") {
    const EvalGrid box = make_eval_grid(poisson2d().domain, poisson2d().exact);
    CHECK(box.points.size() == 101 * 101);
    const PdeProblem slit = square_slit();
    const EvalGrid masked = make_eval_grid(slit.domain, [](const Vec&) { return 1.0; }, 101, 0.1);
    for (const Vec& x : masked.points) {
        CHECK_FALSE(slit.domain.on_slit(x));
        CHECK(x.norm() >= 0.1);
    }
    CHECK(masked.points.size() < 101 * 101 - 50);

    const PdeProblem adv = advection1d();
    const EvalGrid slice = make_slice_grid(adv.domain, 0.4, adv.exact);
    REQUIRE(slice.points.size() == 101);
    for (std::size_t k = 0; k < slice.points.size(); ++k) {
        CHECK(slice.points[k][1] == 0.4);
        CHECK(slice.truth[k] == adv.exact(slice.points[k]));
    }
    CHECK_THROWS_AS(make_slice_grid(adv.domain, 0.9, adv.exact), ValidationError);
    CHECK_THROWS_AS(make_slice_grid(poisson2d().domain, 0.1, poisson2d().exact), ValidationError);
}

TEST_CASE("isotropic tie projects the gradient") {
    const std::size_t stride = params_per_node(2);
    std::vector<double> g(2 * stride);
    for (std::size_t k = 0; k < g.size(); ++k)
        g[k] = static_cast<double>(k) + 1.0;
    const std::vector<double> orig = g;
    tie_isotropic(g, 2);
    for (std::size_t n = 0; n < 2; ++n) {
        const std::size_t b = n * stride;
        for (std::size_t k = 0; k < 3; ++k)
            CHECK(g[b + k] == orig[b + k]);  // weight and center untouched
        CHECK(g[b + 3] == (orig[b + 3] + orig[b + 5]) / 2);
        CHECK(g[b + 4] == 0.0);
        CHECK(g[b + 5] == g[b + 3]);
    }
}

TEST_CASE("isotropic training keeps zones round") {
    TrainConfig c = small_poisson(40);
    c.isotropic = true;
    const TrainReport r = train(c);
    REQUIRE_FALSE(r.failed);
    for (const Node& n : r.final_params.nodes) {
        CHECK(n.factor(1, 0) == 0.0);
        CHECK(n.factor(0, 0) == n.factor(1, 1));
    }
}

TEST_CASE("training is deterministic and records consistent histories") {
    const TrainConfig c = small_poisson();
    const TrainReport a = train(c);
    const TrainReport b = train(c);
    REQUIRE_FALSE(a.failed);
    CHECK(a.loss_history.size() == 60);
    CHECK(a.loss_history == b.loss_history);
    CHECK(flatten(a.final_params) == flatten(b.final_params));
    REQUIRE(a.evals.size() == 3);
    for (std::size_t k = 0; k < a.evals.size(); ++k) {
        CHECK(a.evals[k].iteration == 20 * static_cast<long>(k + 1));
        CHECK(a.evals[k].l2 == b.evals[k].l2);
        CHECK(a.evals[k].test_loss >= 0.0);
        CHECK(a.evals[k].l2 >= 0.0);
    }
    for (double l : a.loss_history)
        CHECK(l >= 0.0);
    CHECK(a.wall_seconds >= 0.0);

    TrainConfig other = c;
    other.seed = 4;
    CHECK(train(other).loss_history != a.loss_history);
}

TEST_CASE("a few hundred steps reduce the loss") {
    TrainConfig c = small_poisson(400);
    c.eval_every = 400;
    const TrainReport r = train(c);
    REQUIRE_FALSE(r.failed);
    CHECK(r.loss_history.back() < 0.5 * r.loss_history.front());
}

TEST_CASE("numerical failure ends the run with a partial report") {
    TrainConfig c = small_poisson(200);
    c.scale = 400.0;
    c.lr = 5.0;
    const TrainReport r = train(c);
    CHECK(r.failed);
    CHECK_FALSE(r.failure.empty());
    CHECK(r.loss_history.size() < 200);
    for (double l : r.loss_history)
        CHECK(std::isfinite(l));
}

TEST_CASE("config validation") {
    TrainConfig c = small_poisson();
    CHECK(c.validate().empty());

    TrainConfig zero_iters = c;
    zero_iters.iterations = 0;
    CHECK_THROWS_WITH_AS(zero_iters.validate(), doctest::Contains("--iters"), ValidationError);

    TrainConfig no_problem = c;
    no_problem.problem.clear();
    CHECK_THROWS_WITH_AS(no_problem.validate(), doctest::Contains("--problem"), ValidationError);

    TrainConfig bad_nodes = c;
    bad_nodes.nodes = {4};
    CHECK_THROWS_AS(bad_nodes.validate(), ValidationError);

    TrainConfig bad_batch = c;
    bad_batch.batch.count = 41;
    CHECK_THROWS_AS(bad_batch.validate(), ValidationError);

    TrainConfig bad_lr = c;
    bad_lr.lr = 0.0;
    CHECK_THROWS_AS(bad_lr.validate(), ValidationError);

    TrainConfig bad_beta = c;
    bad_beta.beta2 = 1.0;
    CHECK_THROWS_AS(bad_beta.validate(), ValidationError);

    TrainConfig low_alpha = c;
    low_alpha.alpha = 10.0;
    const auto warnings = low_alpha.validate();
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("alpha") != std::string::npos);

    CHECK(c.resolved_alpha() == 240.0);
    CHECK_THROWS_AS(train(zero_iters), ValidationError);
}

TEST_CASE("per-problem defaults") {
    TrainConfig c;
    c.problem = "burgers1d";
    fill_problem_defaults(c);
    CHECK(c.nodes == std::vector<int>{10, 8});
    CHECK(c.samples == 600);
    TrainConfig p;
    p.problem = "poisson2d";
    p.samples = 77;
    fill_problem_defaults(p);
    CHECK(p.nodes == std::vector<int>{4, 2});
    CHECK(p.samples == 77);
    CHECK(p.iterations == 20000);
}

TEST_CASE("batch spec resolution") {
    BatchSpec b;
    CHECK(b.resolve(200) == 200);
    b.fraction = 0.25;
    CHECK(b.resolve(200) == 50);
    b.count = 32;
    CHECK(b.resolve(1200) == 32);
}
