#include <doctest.h>

#include "aspinn/problems.hpp"
#include "aspinn/sampling.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace aspinn;

namespace {

constexpr double kPi = std::numbers::pi;

Vec vec2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

/// Halton points scaled into the domain box, interior only.
std::vector<Vec> quasi_random_interior(const DomainSpec& d, int count) {
    auto halton = [](int i, int base) {
        double f = 1.0, r = 0.0;
        while (i > 0) {
            f /= base;
            r += f * (i % base);
            i /= base;
        }
        return r;
    };
    std::vector<Vec> pts;
    for (int i = 1; static_cast<int>(pts.size()) < count; ++i) {
        Vec x = vec2(d.bounds[0].lo + halton(i, 2) * d.bounds[0].length(),
                     d.bounds[1].lo + halton(i, 3) * d.bounds[1].length());
        if (d.is_interior(x))
            pts.push_back(x);
    }
    return pts;
}

/// Independent central-difference (u, grad, hess) of a scalar field.
Derivs fd_field(const ScalarField& f, const Vec& x, double h = 1e-4) {
    Derivs d;
    d.u = f(x);
    d.grad = Vec::Zero(2);
    d.hess = Mat::Zero(2, 2);
    for (int i = 0; i < 2; ++i) {
        Vec p = x, m = x;
        p(i) += h;
        m(i) -= h;
        d.grad(i) = (f(p) - f(m)) / (2 * h);
        d.hess(i, i) = (f(p) - 2 * d.u + f(m)) / (h * h);
    }
    Vec pp = x, pm = x, mp = x, mm = x;
    pp += vec2(h, h);
    pm += vec2(h, -h);
    mp += vec2(-h, h);
    mm += vec2(-h, -h);
    d.hess(0, 1) = d.hess(1, 0) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4 * h * h);
    return d;
}

} // namespace

TEST_CASE("closed-form values") {
    CHECK(poisson2d().exact(vec2(0.25, 0.5)) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(ripple2d().exact(vec2(0, 0)) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(ripple2d().exact(vec2(1, 0.3)) == doctest::Approx(0.0).scale(1.0));
    CHECK(ripple2d().exact(vec2(-1, -0.7)) == doctest::Approx(0.0).scale(1.0));
    const PdeProblem adv = advection1d();
    CHECK(adv.exact(vec2(-0.3, 0)) == doctest::Approx(1.0).epsilon(1e-15));
    for (double t : {0.1, 0.4, 0.8})
        CHECK(adv.exact(vec2(-0.3 + kAdvectionSpeed * t, t)) == doctest::Approx(1.0).epsilon(1e-15));
    // u0 = exp(-(x - mu)^2 / (2 sigma^2)) one sigma off the peak
    CHECK(advection_initial(-0.15) == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
    CHECK(burgers_initial(-0.25) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(burgers_initial(0.75) == 0.0);
    CHECK(burgers_initial(0.0) == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("exact derivative stacks satisfy the PDEs") {
    for (const std::string& name : problem_names()) {
        const PdeProblem p = make_problem(name);
        if (!p.exact)
            continue;
        double worst = 0.0;
        for (const Vec& x : quasi_random_interior(p.domain, 100)) {
            const Derivs d = p.exact_derivs(x);
            const ResidualJet r = p.residual(x, d.u, d.grad, d.hess);
            worst = std::max(worst, std::abs(r.value));
            CHECK(d.u == doctest::Approx(p.exact(x)).epsilon(1e-14));
        }
        MESSAGE(name << " max |residual| " << worst);
        CHECK(worst < 1e-9);
    }
}

TEST_CASE("exact derivative stacks agree with finite differences") {
    for (const std::string& name : problem_names()) {
        const PdeProblem p = make_problem(name);
        if (!p.exact)
            continue;
        for (const Vec& x : quasi_random_interior(p.domain, 30)) {
            const Derivs a = p.exact_derivs(x);
            const Derivs f = fd_field(p.exact, x);
            CHECK((a.grad - f.grad).norm() <= 1e-5 * std::max(1.0, a.grad.norm()));
            CHECK((a.hess - f.hess).norm() <= 1e-3 * std::max(1.0, a.hess.norm()));
        }
    }
}

TEST_CASE("ripple source agrees with a finite-difference Laplacian") {
    const PdeProblem p = ripple2d();
    for (const Vec& x : quasi_random_interior(p.domain, 50)) {
        const Derivs f = fd_field(p.exact, x, 1e-4);
        const double c = 16 * kPi * kPi * (4 * x[0] * x[0] + x[1] * x[1]);
        // residual value at (u, hess) = FD stack equals the FD truncation error only
        const ResidualJet r = p.residual(x, f.u, f.grad, f.hess);
        const double scale = std::abs(f.hess.trace()) + c * std::abs(f.u) + 1.0;
        CHECK(std::abs(r.value) < 1e-4 * scale);
        CHECK(r.d_u == doctest::Approx(c));
    }
}

TEST_CASE("boundary residual of the exact solution vanishes") {
    for (const std::string& name : problem_names()) {
        const PdeProblem p = make_problem(name);
        const SampleSet s = generate_samples(p.domain, {1, 100, 1, 1}, 1);
        for (const Vec& x : s.boundary_train) {
            const double u = p.exact ? p.exact(x) : 0.0;
            const BoundaryJet b = p.boundary_residual(x, u);
            if (name == "burgers1d" && std::abs(x[1]) < 1e-12)
                CHECK(std::abs(p.boundary_residual(x, burgers_initial(x[0])).value) < 1e-12);
            else if (name == "burgers1d")
                CHECK(b.value == 0.0);
            else if (p.exact)
                CHECK(std::abs(b.value) < 1e-12);
            else
                CHECK(b.value == 0.0);
            CHECK(b.d_u == 1.0);
        }
    }
}

TEST_CASE("problem residual examples") {
    const Vec z2 = Vec::Zero(2);
    const Mat z22 = Mat::Zero(2, 2);
    CHECK(square_slit().residual(vec2(-0.4, 0.3), 0.0, z2, z22).value == 1.0);
    CHECK(square_slit().boundary_residual(vec2(0.5, 0.0), 0.0).value == 0.0);
    CHECK(poisson2d().boundary_residual(vec2(1.0, 0.4), 0.0).value == 0.0);
    CHECK(burgers1d().residual(vec2(0.2, 0.3), 0.0, z2, z22).value == 0.0);
    const ResidualJet j = burgers1d().residual(vec2(0.2, 0.3), 0.5, vec2(2.0, 3.0), z22);
    CHECK(j.value == doctest::Approx(3.0 + 0.5 * 2.0));
    CHECK(j.d_u == 2.0);
    CHECK(j.d_grad(0) == 0.5);
    CHECK(j.d_grad(1) == 1.0);
}

TEST_CASE("slit geometry") {
    const DomainSpec d = make_box_minus_slit();
    CHECK(d.on_slit(vec2(0.5, 0.0)));
    CHECK(d.on_slit(vec2(0.0, 0.0)));
    CHECK_FALSE(d.on_slit(vec2(1.0, 0.0)));
    CHECK_FALSE(d.on_slit(vec2(-0.5, 0.0)));
    CHECK(d.is_interior(vec2(0.5, 1e-9)));
    CHECK_FALSE(d.is_interior(vec2(0.5, 0.0)));
    CHECK(d.is_boundary(vec2(0.5, 0.0)));
    CHECK(d.is_interior(vec2(-0.5, 0.0)));
    CHECK(d.is_boundary(vec2(1.0, 0.0)));
    CHECK(d.distance_to_slit(vec2(0.5, 0.2)) == doctest::Approx(0.2));
    CHECK(d.distance_to_slit(vec2(-0.3, 0.4)) == doctest::Approx(0.5));
}

TEST_CASE("spacetime boundary faces") {
    const DomainSpec d = make_spacetime_strip({-1, 1}, 0.8);
    double total = 0.0;
    for (const BoundaryFace& f : d.boundary_faces())
        total += f.measure;
    CHECK(total == doctest::Approx(2.0 + 0.8 + 0.8));
    CHECK(d.is_boundary(vec2(0.3, 0.0)));
    CHECK(d.is_boundary(vec2(-1.0, 0.5)));
    CHECK_FALSE(d.is_boundary(vec2(0.3, 0.8)));  // final time is not constrained
    CHECK(d.is_interior(vec2(0.3, 0.8)));
}

TEST_CASE("unknown problem names are rejected") {
    CHECK_THROWS_AS(make_problem("heat3d"), ValidationError);
    for (const std::string& n : problem_names())
        CHECK(make_problem(n).name == n);
}
