#include "aspinn/problems.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace aspinn {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kEdgeTol = 1e-12;

bool near(double a, double b) { return std::abs(a - b) <= kEdgeTol; }

bool inside_closed(const Vec& x, const std::vector<Interval>& bounds) {
    for (int j = 0; j < x.size(); ++j)
        if (x[j] < bounds[j].lo - kEdgeTol || x[j] > bounds[j].hi + kEdgeTol)
            return false;
    return true;
}

BoundaryJet dirichlet_zero(const Vec&, double u) { return {u, 1.0}; }

Mat scaled_identity(int d, double v) { return Mat::Identity(d, d) * v; }

} // namespace

// ---------------------------------------------------------------------------
// Geometry

void DomainSpec::validate() const {
    if (bounds.empty() || dim() > kMaxDim)
        throw ValidationError("domain dimension out of range");
    for (const Interval& iv : bounds)
        if (!(iv.hi > iv.lo))
            throw ValidationError("domain bounds must be non-degenerate");
    if (slit.has_value() != (kind == DomainKind::box_minus_slit))
        throw ValidationError("slit must be present exactly for box-minus-slit domains");
    if (kind == DomainKind::box_minus_slit && dim() != 2)
        throw ValidationError("slit domains are two-dimensional");
    const bool spacetime = kind == DomainKind::spacetime_strip;
    if (spacetime != (time_horizon > 0.0))
        throw ValidationError("time_horizon > 0 exactly for spacetime domains");
    if (spacetime && !near(bounds.back().lo, 0.0))
        throw ValidationError("spacetime domains start at t = 0");
}

bool DomainSpec::on_slit(const Vec& x) const {
    if (!slit)
        return false;
    return std::abs(x[1] - slit->y) <= kSlitTolerance && x[0] >= slit->x_begin &&
           x[0] < slit->x_end;
}

double DomainSpec::distance_to_slit(const Vec& x) const {
    if (!slit)
        return std::numeric_limits<double>::infinity();
    const double px = std::clamp(x[0], slit->x_begin, slit->x_end);
    return std::hypot(x[0] - px, x[1] - slit->y);
}

bool DomainSpec::is_interior(const Vec& x) const {
    if (x.size() != dim())
        return false;
    if (kind == DomainKind::spacetime_strip) {
        const int t = dim() - 1;
        for (int j = 0; j < t; ++j)
            if (!(x[j] > bounds[j].lo + kEdgeTol && x[j] < bounds[j].hi - kEdgeTol))
                return false;
        return x[t] > kEdgeTol && x[t] <= time_horizon + kEdgeTol;
    }
    for (int j = 0; j < dim(); ++j)
        if (!(x[j] > bounds[j].lo + kEdgeTol && x[j] < bounds[j].hi - kEdgeTol))
            return false;
    return !on_slit(x);
}

bool DomainSpec::is_boundary(const Vec& x) const {
    if (x.size() != dim() || !inside_closed(x, bounds))
        return false;
    if (kind == DomainKind::spacetime_strip) {
        const int t = dim() - 1;
        if (near(x[t], 0.0))
            return true;
        for (int j = 0; j < t; ++j)
            if (near(x[j], bounds[j].lo) || near(x[j], bounds[j].hi))
                return true;
        return false;
    }
    for (int j = 0; j < dim(); ++j)
        if (near(x[j], bounds[j].lo) || near(x[j], bounds[j].hi))
            return true;
    return on_slit(x);
}

std::vector<BoundaryFace> DomainSpec::boundary_faces() const {
    std::vector<BoundaryFace> faces;
    const int d = dim();
    auto face_measure = [&](int axis) {
        double m = 1.0;
        for (int j = 0; j < d; ++j)
            if (j != axis)
                m *= bounds[j].length();
        return m;
    };
    if (kind == DomainKind::spacetime_strip) {
        const int t = d - 1;
        faces.push_back({t, 0.0, bounds, face_measure(t)});
        for (int j = 0; j < t; ++j) {
            faces.push_back({j, bounds[j].lo, bounds, face_measure(j)});
            faces.push_back({j, bounds[j].hi, bounds, face_measure(j)});
        }
        return faces;
    }
    for (int j = 0; j < d; ++j) {
        faces.push_back({j, bounds[j].lo, bounds, face_measure(j)});
        faces.push_back({j, bounds[j].hi, bounds, face_measure(j)});
    }
    if (slit) {
        // Both crack faces share the same points; weight them together.
        std::vector<Interval> extent = bounds;
        extent[0] = {slit->x_begin, slit->x_end};
        faces.push_back({1, slit->y, extent, 2.0 * (slit->x_end - slit->x_begin)});
    }
    return faces;
}

DomainSpec make_box(std::vector<Interval> bounds) {
    DomainSpec d;
    d.kind = DomainKind::box;
    d.bounds = std::move(bounds);
    d.validate();
    return d;
}

DomainSpec make_box_minus_slit() {
    DomainSpec d;
    d.kind = DomainKind::box_minus_slit;
    d.bounds = {{-1.0, 1.0}, {-1.0, 1.0}};
    d.slit = Slit{};
    d.validate();
    return d;
}

DomainSpec make_spacetime_strip(Interval space, double horizon) {
    DomainSpec d;
    d.kind = DomainKind::spacetime_strip;
    d.bounds = {space, {0.0, horizon}};
    d.time_horizon = horizon;
    d.validate();
    return d;
}

// ---------------------------------------------------------------------------
// Problems

PdeProblem poisson2d() {
    auto source = [](const Vec& x) {
        return 5.0 * kPi * kPi * std::sin(2.0 * kPi * x[0]) * std::sin(kPi * x[1]);
    };
    PdeProblem p;
    p.name = "poisson2d";
    p.domain = make_box({{-1.0, 1.0}, {-1.0, 1.0}});
    p.residual = [source](const Vec& x, double, const Vec&, const Mat& hess) {
        return ResidualJet{-hess.trace() - source(x), 0.0, Vec::Zero(2), scaled_identity(2, -1.0)};
    };
    p.boundary_residual = dirichlet_zero;
    p.exact = [](const Vec& x) { return std::sin(2.0 * kPi * x[0]) * std::sin(kPi * x[1]); };
    p.exact_derivs = [](const Vec& x) {
        const double sx = std::sin(2.0 * kPi * x[0]), cx = std::cos(2.0 * kPi * x[0]);
        const double sy = std::sin(kPi * x[1]), cy = std::cos(kPi * x[1]);
        Derivs d;
        d.u = sx * sy;
        d.grad = Vec(2);
        d.grad << 2.0 * kPi * cx * sy, kPi * sx * cy;
        d.hess = Mat(2, 2);
        const double cross = 2.0 * kPi * kPi * cx * cy;
        d.hess << -4.0 * kPi * kPi * sx * sy, cross, cross, -kPi * kPi * sx * sy;
        return d;
    };
    return p;
}

namespace {

// u = a(x) b(y) c(theta), a = 1 - x^2, b = 1 - y^2, theta = 2 pi (2x^2 + y^2).
Derivs ripple_exact(const Vec& x) {
    const double X = x[0], Y = x[1];
    const double a = 1.0 - X * X, ax = -2.0 * X, axx = -2.0;
    const double b = 1.0 - Y * Y, by = -2.0 * Y, byy = -2.0;
    const double th = 2.0 * kPi * (2.0 * X * X + Y * Y);
    const double thx = 8.0 * kPi * X, thy = 4.0 * kPi * Y;
    const double thxx = 8.0 * kPi, thyy = 4.0 * kPi;
    const double c = std::cos(th), s = std::sin(th);
    const double cx = -s * thx, cy = -s * thy;
    const double cxx = -c * thx * thx - s * thxx;
    const double cyy = -c * thy * thy - s * thyy;
    const double cxy = -c * thx * thy;

    Derivs d;
    d.u = a * b * c;
    d.grad = Vec(2);
    d.grad << b * (ax * c + a * cx), a * (by * c + b * cy);
    d.hess = Mat(2, 2);
    const double uxx = b * (axx * c + 2.0 * ax * cx + a * cxx);
    const double uyy = a * (byy * c + 2.0 * by * cy + b * cyy);
    const double uxy = ax * by * c + ax * b * cy + a * by * cx + a * b * cxy;
    d.hess << uxx, uxy, uxy, uyy;
    return d;
}

double ripple_coefficient(const Vec& x) {
    return 16.0 * kPi * kPi * (4.0 * x[0] * x[0] + x[1] * x[1]);
}

} // namespace

PdeProblem ripple2d() {
    PdeProblem p;
    p.name = "ripple2d";
    p.domain = make_box({{-1.0, 1.0}, {-1.0, 1.0}});
    p.residual = [](const Vec& x, double u, const Vec&, const Mat& hess) {
        const Derivs ex = ripple_exact(x);
        const double c = ripple_coefficient(x);
        const double f = -ex.hess.trace() + c * ex.u;
        return ResidualJet{-hess.trace() + c * u - f, c, Vec::Zero(2), scaled_identity(2, -1.0)};
    };
    p.boundary_residual = dirichlet_zero;
    p.exact = [](const Vec& x) { return ripple_exact(x).u; };
    p.exact_derivs = ripple_exact;
    return p;
}

PdeProblem square_slit() {
    PdeProblem p;
    p.name = "square_slit";
    p.domain = make_box_minus_slit();
    p.residual = [](const Vec&, double, const Vec&, const Mat& hess) {
        return ResidualJet{hess.trace() + 1.0, 0.0, Vec::Zero(2), scaled_identity(2, 1.0)};
    };
    p.boundary_residual = dirichlet_zero;
    return p;
}

double advection_initial(double x) {
    const double r = (x - kAdvectionMean) / kAdvectionWidth;
    return std::exp(-0.5 * r * r);
}

double burgers_initial(double x) {
    if (x < -0.5 || x > 0.5)
        return 0.0;
    return std::sin(2.0 * kPi * (x + 0.5));
}

PdeProblem advection1d(double speed, double horizon) {
    PdeProblem p;
    p.name = "advection1d";
    p.domain = make_spacetime_strip({-1.0, 1.0}, horizon);
    p.needs_hessian = false;
    p.exact_derivs = [speed](const Vec& x) {
        const double var = kAdvectionWidth * kAdvectionWidth;
        const double xi = x[0] - speed * x[1] - kAdvectionMean;
        const double u = std::exp(-0.5 * xi * xi / var);
        const double du = -xi / var * u;
        const double ddu = (xi * xi / (var * var) - 1.0 / var) * u;
        Derivs d;
        d.u = u;
        d.grad = Vec(2);
        d.grad << du, -speed * du;
        d.hess = Mat(2, 2);
        d.hess << ddu, -speed * ddu, -speed * ddu, speed * speed * ddu;
        return d;
    };
    p.exact = [speed](const Vec& x) { return advection_initial(x[0] - speed * x[1]); };
    p.residual = [speed](const Vec&, double, const Vec& grad, const Mat&) {
        Vec dg(2);
        dg << speed, 1.0;
        return ResidualJet{grad[1] + speed * grad[0], 0.0, dg, Mat::Zero(2, 2)};
    };
    // Initial line and both spatial ends carry the travelling-wave values.
    p.boundary_residual = [exact = p.exact](const Vec& x, double u) {
        return BoundaryJet{u - exact(x), 1.0};
    };
    return p;
}

PdeProblem burgers1d(double horizon) {
    PdeProblem p;
    p.name = "burgers1d";
    p.domain = make_spacetime_strip({-1.0, 1.0}, horizon);
    p.needs_hessian = false;
    p.residual = [](const Vec&, double u, const Vec& grad, const Mat&) {
        Vec dg(2);
        dg << u, 1.0;
        return ResidualJet{grad[1] + u * grad[0], grad[0], dg, Mat::Zero(2, 2)};
    };
    p.boundary_residual = [](const Vec& x, double u) {
        const double g = std::abs(x[1]) <= kEdgeTol ? burgers_initial(x[0]) : 0.0;
        return BoundaryJet{u - g, 1.0};
    };
    return p;
}

std::vector<std::string> problem_names() {
    return {"poisson2d", "ripple2d", "square_slit", "advection1d", "burgers1d"};
}

PdeProblem make_problem(std::string_view name) {
    if (name == "poisson2d")
        return poisson2d();
    if (name == "ripple2d")
        return ripple2d();
    if (name == "square_slit")
        return square_slit();
    if (name == "advection1d")
        return advection1d();
    if (name == "burgers1d")
        return burgers1d();
    throw ValidationError("unknown problem '" + std::string(name) +
                          "' (expected poisson2d | ripple2d | square_slit | advection1d | burgers1d)");
}

} // namespace aspinn
