#pragma once

#include "aspinn/types.hpp"

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace aspinn {

/// Raw diagonal entries are clamped to this magnitude before exponentiation.
inline constexpr double kDiagClamp = 30.0;

/// Default scale applied to the raw diagonal of the log-Cholesky factor.
inline constexpr double kDefaultScale = 0.5;

/// Unconstrained parametrization of one anisotropy matrix.
///
/// Stores the d(d+1)/2 lower-triangular raw entries row-major:
/// (0,0), (1,0), (1,1), (2,0), (2,1), (2,2). Any real values are admissible;
/// the assembled factor has diagonal exp(s * raw) and the raw off-diagonals.
class LogCholeskyFactor {
public:
    explicit LogCholeskyFactor(int dim = 2);
    LogCholeskyFactor(int dim, std::span<const double> entries);

    /// Factor whose Sigma equals h * I.
    static LogCholeskyFactor isotropic(int dim, double h, double s);

    /// Re-factorizes an SPD matrix. Throws ValidationError if it is not SPD.
    static LogCholeskyFactor from_sigma(const Mat& sigma, double s);

    static constexpr std::size_t index(int row, int col) {
        return static_cast<std::size_t>(row * (row + 1) / 2 + col);
    }
    static constexpr std::size_t entry_count(int dim) {
        return static_cast<std::size_t>(dim * (dim + 1) / 2);
    }

    int dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return entry_count(dim_); }

    double operator()(int row, int col) const { return entries_[index(row, col)]; }
    double& operator()(int row, int col) { return entries_[index(row, col)]; }

    std::span<const double> entries() const { return {entries_.data(), size()}; }
    std::span<double> entries() { return {entries_.data(), size()}; }

    /// True if any raw diagonal lies outside [-kDiagClamp, kDiagClamp].
    bool clamped() const;

private:
    int dim_;
    std::array<double, kMaxDim * (kMaxDim + 1) / 2> entries_{};
};

/// One kernel unit of the ansatz.
struct Node {
    Vec center;
    double weight = 0.0;
    LogCholeskyFactor factor;
};

enum class Kernel { gaussian };

/// All trainable scalars plus the fixed scale and kernel choice.
///
/// Flattened layout, per node in index order:
///   weight, center[0..d-1], factor entries (lower triangle, row-major).
struct ModelParams {
    std::vector<Node> nodes;
    double scale = kDefaultScale;
    Kernel kernel = Kernel::gaussian;

    int dim() const { return nodes.empty() ? 0 : static_cast<int>(nodes.front().center.size()); }

    /// Throws ValidationError on an empty model or mixed dimensions.
    void validate() const;
};

constexpr std::size_t params_per_node(int dim) {
    return 1 + static_cast<std::size_t>(dim) + LogCholeskyFactor::entry_count(dim);
}

std::size_t parameter_count(const ModelParams& params);
std::vector<double> flatten(const ModelParams& params);

/// Overwrites every trainable scalar of `params` from `flat`.
void assign_flat(ModelParams& params, std::span<const double> flat);

/// Zone of influence of one node: semi-axes descending, axes as unit columns.
struct Ellipse {
    Vec center;
    Vec semi_axes;
    Mat axes;
};

/// Gaussian kernel as a function of the squared whitened radius.
inline double kernel_of_r2(double r2) { return std::exp(-r2); }

Mat assemble_L(const LogCholeskyFactor& factor, double s);
Mat sigma(const Node& node, double s);

/// z with sigma(node) * z == x - center, by two triangular solves.
Vec whiten(const Node& node, double s, const Vec& x);

double eval(const ModelParams& params, const Vec& x);

struct Derivs {
    double u = 0.0;
    Vec grad;
    Mat hess;

    double laplacian() const { return hess.trace(); }
};

/// Value, gradient and Hessian of the ansatz at x.
Derivs eval_derivs(const ModelParams& params, const Vec& x);

Ellipse zone_of_influence(const Node& node, double s);

} // namespace aspinn
