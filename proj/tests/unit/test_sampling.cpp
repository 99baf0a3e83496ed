#include <doctest.h>

#include "aspinn/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <set>

using namespace aspinn;

namespace {

bool identical(const std::vector<Vec>& a, const std::vector<Vec>& b) {
    if (a.size() != b.size())
        return false;
    for (std::size_t k = 0; k < a.size(); ++k)
        if (a[k] != b[k])
            return false;
    return true;
}

bool disjoint(const std::vector<Vec>& a, const std::vector<Vec>& b) {
    for (const Vec& p : a)
        for (const Vec& q : b)
            if ((p - q).cwiseAbs().maxCoeff() <= 1e-12)
                return false;
    return true;
}

} // namespace

TEST_CASE("box samples lie strictly inside") {
    const DomainSpec d = make_box({{-1, 1}, {-1, 1}});
    const SampleSet s = generate_samples(d, SampleCounts::with_default_tests(200, 128), 3);
    REQUIRE(s.interior_train.size() == 200);
    CHECK(s.interior_test.size() == 50);
    CHECK(s.boundary_test.size() == 32);
    for (const Vec& x : s.interior_train) {
        CHECK(std::abs(x[0]) < 1.0);
        CHECK(std::abs(x[1]) < 1.0);
    }
}

TEST_CASE("every sample passes its geometry predicate and train/test are disjoint") {
    for (const DomainSpec& d : {make_box({{-1, 1}, {-1, 1}}), make_box_minus_slit(),
                                make_spacetime_strip({-1, 1}, 0.8)}) {
        const SampleSet s = generate_samples(d, SampleCounts::with_default_tests(400, 128), 9);
        for (const Vec& x : s.interior_train)
            CHECK(d.is_interior(x));
        for (const Vec& x : s.interior_test)
            CHECK(d.is_interior(x));
        for (const Vec& x : s.boundary_train)
            CHECK(d.is_boundary(x));
        for (const Vec& x : s.boundary_test)
            CHECK(d.is_boundary(x));
        CHECK(disjoint(s.interior_train, s.interior_test));
        CHECK(disjoint(s.boundary_train, s.boundary_test));
        CHECK(disjoint(s.interior_train, s.boundary_train));
    }
}

TEST_CASE("slit samples keep away from the slit") {
    const DomainSpec d = make_box_minus_slit();
    const SampleSet s = generate_samples(d, {1200, 128, 300, 32}, 4);
    for (const Vec& x : s.interior_train)
        CHECK(d.distance_to_slit(x) >= 1e-3);
    std::size_t on_slit = 0;
    for (const Vec& x : s.boundary_train)
        on_slit += d.on_slit(x) ? 1 : 0;
    // slit faces carry measure 2 out of 8 + 2
    CHECK(on_slit > 0);
}

TEST_CASE("sampling is deterministic per seed") {
    const DomainSpec d = make_box_minus_slit();
    const SampleCounts c = SampleCounts::with_default_tests(300, 64);
    const SampleSet a = generate_samples(d, c, 17);
    const SampleSet b = generate_samples(d, c, 17);
    const SampleSet other = generate_samples(d, c, 18);
    CHECK(identical(a.interior_train, b.interior_train));
    CHECK(identical(a.boundary_train, b.boundary_train));
    CHECK(identical(a.interior_test, b.interior_test));
    CHECK(identical(a.boundary_test, b.boundary_test));
    CHECK_FALSE(identical(a.interior_train, other.interior_train));
}

TEST_CASE("spacetime boundary allocation follows face measure") {
    const DomainSpec d = make_spacetime_strip({-1, 1}, 0.8);
    const SampleSet s = generate_samples(d, {1, 10000, 1, 1}, 5);
    double initial = 0, left = 0, right = 0;
    for (const Vec& x : s.boundary_train) {
        if (std::abs(x[1]) <= 1e-12)
            initial += 1;
        else if (x[0] <= -1.0 + 1e-12)
            left += 1;
        else if (x[0] >= 1.0 - 1e-12)
            right += 1;
    }
    CHECK(initial + left + right == 10000);
    const double n = 10000.0;
    auto within = [n](double count, double p) {
        const double sd = std::sqrt(n * p * (1 - p));
        return std::abs(count - n * p) <= 4.0 * sd;
    };
    CHECK(within(initial, 2.0 / 3.6));
    CHECK(within(left, 0.8 / 3.6));
    CHECK(within(right, 0.8 / 3.6));
}

TEST_CASE("zero counts are rejected") {
    const DomainSpec d = make_box({{-1, 1}, {-1, 1}});
    CHECK_THROWS_AS(generate_samples(d, {0, 10, 1, 1}, 0), ValidationError);
    CHECK_THROWS_AS(generate_samples(d, {10, 0, 1, 1}, 0), ValidationError);
}

TEST_CASE("default counts") {
    CHECK(default_boundary_samples(make_box({{-1, 1}, {-1, 1}})) == 128);
    CHECK(default_boundary_samples(make_spacetime_strip({-1, 1}, 0.6)) == 128);
    const SampleCounts c = SampleCounts::with_default_tests(201, 130);
    CHECK(c.interior_test == 51);
    CHECK(c.boundary_test == 33);
}

TEST_CASE("node layout") {
    const DomainSpec box = make_box({{-1, 1}, {-1, 1}});
    SUBCASE("4x2 grid") {
        const std::vector<int> counts{4, 2};
        const auto nodes = init_nodes(box, counts, 0.5, 1);
        REQUIRE(nodes.size() == 8);
        const double xs[] = {-0.75, -0.25, 0.25, 0.75};
        const double ys[] = {-0.5, 0.5};
        for (int j = 0; j < 2; ++j)
            for (int i = 0; i < 4; ++i) {
                const Node& n = nodes[static_cast<std::size_t>(j * 4 + i)];
                CHECK(n.center[0] == doctest::Approx(xs[i]).epsilon(1e-15));
                CHECK(n.center[1] == doctest::Approx(ys[j]).epsilon(1e-15));
                CHECK(std::abs(n.weight) <= 0.1);
                CHECK(n.factor(1, 0) == 0.0);
                CHECK(n.factor(0, 0) == n.factor(1, 1));
                // Sigma = h0 I with h0 the mean spacing
                CHECK(sigma(n, 0.5)(0, 0) == doctest::Approx(0.75).epsilon(1e-14));
            }
        CHECK(initial_spacing(box, counts) == doctest::Approx(0.75));
    }
    SUBCASE("single node at the center") {
        const std::vector<int> counts{1, 1};
        const auto nodes = init_nodes(box, counts, 0.5, 1);
        REQUIRE(nodes.size() == 1);
        CHECK(nodes[0].center.norm() == 0.0);
    }
    SUBCASE("slit nodes are lifted off the slit") {
        const DomainSpec slit = make_box_minus_slit();
        const std::vector<int> counts{7, 7};
        const auto nodes = init_nodes(slit, counts, 0.5, 1);
        REQUIRE(nodes.size() == 49);
        int lifted = 0;
        for (const Node& n : nodes) {
            CHECK_FALSE(slit.on_slit(n.center));
            if (std::abs(n.center[1] - 1e-2) < 1e-15)
                ++lifted;
        }
        CHECK(lifted == 4);  // x = 0, 2/7, 4/7, 6/7 on y = 0
    }
    SUBCASE("weights are seeded") {
        const std::vector<int> counts{3, 3};
        const auto a = init_nodes(box, counts, 0.5, 5);
        const auto b = init_nodes(box, counts, 0.5, 5);
        const auto c = init_nodes(box, counts, 0.5, 6);
        CHECK(a[4].weight == b[4].weight);
        CHECK(a[4].weight != c[4].weight);
    }
}

TEST_CASE("batches partition each epoch") {
    SUBCASE("sizes") {
        const auto b = batches(10, BatchPlan{4, 1}, 0);
        REQUIRE(b.size() == 3);
        CHECK(b[0].size() == 4);
        CHECK(b[1].size() == 4);
        CHECK(b[2].size() == 2);
    }
    SUBCASE("full batch") {
        const auto b = batches(50, BatchPlan::from_fraction(1.0, 50, 3), 0);
        REQUIRE(b.size() == 1);
        std::vector<std::size_t> sorted = b[0];
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t k = 0; k < 50; ++k)
            CHECK(sorted[k] == k);
    }
    SUBCASE("coverage and determinism") {
        const BatchPlan plan = BatchPlan::from_fraction(0.25, 203, 11);
        CHECK(plan.batch_size == 51);
        for (std::uint64_t epoch = 0; epoch < 5; ++epoch) {
            std::multiset<std::size_t> seen;
            for (const auto& slice : batches(203, plan, epoch))
                seen.insert(slice.begin(), slice.end());
            CHECK(seen.size() == 203);
            for (std::size_t k = 0; k < 203; ++k)
                CHECK(seen.count(k) == 1);
        }
        CHECK(batches(203, plan, 2) == batches(203, plan, 2));
        CHECK(batches(203, plan, 2) != batches(203, plan, 3));
    }
    SUBCASE("invalid plans") {
        CHECK_THROWS_AS(batches(10, BatchPlan{11, 0}, 0), ValidationError);
        CHECK_THROWS_AS(BatchPlan::from_fraction(0.0, 10, 0), ValidationError);
        CHECK_THROWS_AS(BatchPlan::from_fraction(1.5, 10, 0), ValidationError);
    }
}
