#pragma once

#include "aspinn/types.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace aspinn {

/// Scalar field sampled on a uniform tensor grid.
///
/// Values are stored with the first axis fastest: index = i + nx * j.
/// `valid[k] == 0` marks a masked node (slit, outside the domain); masked
/// values are NaN.
struct GridSolution {
    std::vector<std::vector<double>> axes;
    std::vector<double> values;
    std::vector<std::uint8_t> valid;
    double time_horizon = 0.0; // 0 for static fields

    int dim() const { return static_cast<int>(axes.size()); }
    std::size_t size() const { return values.size(); }
    std::size_t index(std::size_t i, std::size_t j = 0) const { return i + axes[0].size() * j; }

    /// Throws ValidationError if axes are not strictly increasing and uniform
    /// or valid values are not finite.
    void validate() const;
};

/// Evenly spaced points lo, ..., hi (n >= 2).
std::vector<double> uniform_axis(double lo, double hi, std::size_t n);

struct FdSolveInfo {
    int iterations = 0;
    double residual = 0.0; // max-norm of the discrete residual, unscaled
};

/// Five-point finite-difference solve of -lap u = f on [-1,1]^2 with u = g on
/// the outer boundary and, when `with_slit`, u = 0 on {y = 0, 0 <= x <= 1}.
/// Matrix-free conjugate gradients to a residual below 1e-10. `n` points per
/// side; with a slit n must be odd. Slit nodes are masked in the result.
GridSolution fd_poisson(int n, const std::function<double(double, double)>& source,
                        const std::function<double(double, double)>& boundary, bool with_slit,
                        FdSolveInfo* info = nullptr);

/// Reference for lap u + 1 = 0 on the slit square (n odd, n >= 17).
GridSolution fd_poisson_slit(int n, FdSolveInfo* info = nullptr);

/// First-order Godunov scheme for u_t + (u^2/2)_x = 0 on [-1, 1] with
/// zero-state ghost cells.
class BurgersGodunov {
public:
    BurgersGodunov(int nx, double cfl, const std::function<double(double)>& u0,
                   double lo = -1.0, double hi = 1.0);

    struct StepInfo {
        double dt = 0.0;
        double flux_left = 0.0;  // flux through x = lo
        double flux_right = 0.0; // flux through x = hi
    };

    /// Advances one CFL-limited step, never past `t_max`.
    StepInfo step(double t_max);

    double time() const { return time_; }
    double dx() const { return dx_; }
    double mass() const;
    std::span<const double> cells() const { return cells_; }
    double cell_center(std::size_t i) const { return lo_ + (static_cast<double>(i) + 0.5) * dx_; }

    /// Values at the nx+1 cell interfaces; the outer ones average with the
    /// zero ghost state.
    std::vector<double> interface_values() const;

    /// Exact Riemann-problem flux of u^2/2.
    static double godunov_flux(double left, double right);

private:
    double lo_, hi_, dx_, cfl_;
    double time_ = 0.0;
    std::vector<double> cells_;
};

/// Reference for Burgers: interface values on [-1, 1] at each requested time,
/// linearly interpolated between steps. Axes are (x interfaces, times); times
/// must be uniform and non-decreasing from 0.
GridSolution godunov_burgers(int nx, double cfl, double horizon,
                             const std::function<double(double)>& u0,
                             std::span<const double> times);

/// Multilinear interpolation. Throws ValidationError naming the point when it
/// is outside the grid hull or touches a masked node with nonzero weight.
std::vector<double> resample(const GridSolution& ref, std::span<const Vec> points);
double resample(const GridSolution& ref, const Vec& point);

/// Reference-grid CSV:
///   # ref d=<dim> nx=<..> [ny=<..>] T=<..>
///   x[,y],value      (first axis fastest, masked rows carry nan)
void write_reference_csv(std::ostream& os, const GridSolution& ref);
GridSolution read_reference_csv(std::istream& is);

} // namespace aspinn
