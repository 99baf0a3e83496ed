#pragma once

#include "aspinn/core_model.hpp"
#include "aspinn/types.hpp"

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace aspinn {

enum class DomainKind { box, box_minus_slit, spacetime_strip };

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    double length() const { return hi - lo; }
};

/// Horizontal crack {(x, y): x_begin <= x < x_end, y = y}.
struct Slit {
    double x_begin = 0.0;
    double x_end = 1.0;
    double y = 0.0;
};

/// Points within this distance of a slit count as on it.
inline constexpr double kSlitTolerance = 1e-12;

/// Samplers keep interior points at least this far from the slit.
inline constexpr double kSlitExclusion = 1e-3;

/// One flat piece of the boundary: coordinate `axis` fixed at `value`, the
/// remaining coordinates ranging over `extent` (the fixed axis is ignored).
/// `measure` is the sampling weight of the piece.
struct BoundaryFace {
    int axis = 0;
    double value = 0.0;
    std::vector<Interval> extent;
    double measure = 0.0;
};

struct DomainSpec {
    DomainKind kind = DomainKind::box;
    std::vector<Interval> bounds;
    std::optional<Slit> slit;
    double time_horizon = 0.0; // spacetime only; time is the last coordinate

    int dim() const { return static_cast<int>(bounds.size()); }

    void validate() const;

    bool on_slit(const Vec& x) const;
    bool is_interior(const Vec& x) const;
    bool is_boundary(const Vec& x) const;

    /// Distance from x to the slit segment, +inf when there is no slit.
    double distance_to_slit(const Vec& x) const;

    std::vector<BoundaryFace> boundary_faces() const;
};

DomainSpec make_box(std::vector<Interval> bounds);
DomainSpec make_box_minus_slit();
DomainSpec make_spacetime_strip(Interval space, double horizon);

/// Linearization of an interior residual L(u) - f at one point.
struct ResidualJet {
    double value = 0.0;
    double d_u = 0.0;
    Vec d_grad;
    Mat d_hess;
};

/// Linearization of a boundary residual B(u) - g at one point.
struct BoundaryJet {
    double value = 0.0;
    double d_u = 0.0;
};

using InteriorResidual =
    std::function<ResidualJet(const Vec& x, double u, const Vec& grad, const Mat& hess)>;
using BoundaryResidual = std::function<BoundaryJet(const Vec& x, double u)>;
using ScalarField = std::function<double(const Vec& x)>;
using DerivField = std::function<Derivs(const Vec& x)>;

struct PdeProblem {
    std::string name;
    DomainSpec domain;
    InteriorResidual residual;
    BoundaryResidual boundary_residual;
    ScalarField exact;        // empty when no closed form exists
    DerivField exact_derivs;  // analytic (u, grad, hess) of `exact`
    bool needs_hessian = true;

    bool has_exact() const { return static_cast<bool>(exact); }
};

inline constexpr double kAdvectionSpeed = 1.0;
inline constexpr double kAdvectionHorizon = 0.8;
inline constexpr double kAdvectionMean = -0.3;
inline constexpr double kAdvectionWidth = 0.15;
inline constexpr double kBurgersHorizon = 0.6;

/// -lap u = 5 pi^2 sin(2 pi x) sin(pi y) on [-1,1]^2, u = 0 on the boundary.
PdeProblem poisson2d();

/// -lap u + 16 pi^2 (4x^2 + y^2) u = f on [-1,1]^2 with manufactured f.
PdeProblem ripple2d();

/// lap u + 1 = 0 on (-1,1)^2 minus the slit [0,1) x {0}, u = 0 on the boundary.
PdeProblem square_slit();

/// u_t + a u_x = 0 on [-1,1] x [0,T], Gaussian initial profile.
PdeProblem advection1d(double speed = kAdvectionSpeed, double horizon = kAdvectionHorizon);

/// u_t + u u_x = 0 on [-1,1] x [0,T], sine-bump initial data, u(+-1, t) = 0.
PdeProblem burgers1d(double horizon = kBurgersHorizon);

double advection_initial(double x);
double burgers_initial(double x);

/// Looks a problem up by CLI name; throws ValidationError for unknown names.
PdeProblem make_problem(std::string_view name);
std::vector<std::string> problem_names();

} // namespace aspinn
