#include "aspinn/core_model.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <string>

namespace aspinn {

namespace {

void check_dim(int dim) {
    if (dim < 1 || dim > kMaxDim)
        throw ValidationError("dimension must be in [1, " + std::to_string(kMaxDim) +
                              "], got " + std::to_string(dim));
}

// x - center with sigma solved through the factor; L y = r, L^T z = y.
Vec solve_sigma(const Mat& L, const Vec& r) {
    Vec y = L.triangularView<Eigen::Lower>().solve(r);
    return L.transpose().triangularView<Eigen::Upper>().solve(y);
}

} // namespace

LogCholeskyFactor::LogCholeskyFactor(int dim) : dim_(dim) { check_dim(dim); }

LogCholeskyFactor::LogCholeskyFactor(int dim, std::span<const double> entries) : dim_(dim) {
    check_dim(dim);
    if (entries.size() != size())
        throw ValidationError("log-Cholesky factor of dim " + std::to_string(dim) + " needs " +
                              std::to_string(size()) + " entries, got " +
                              std::to_string(entries.size()));
    std::copy(entries.begin(), entries.end(), entries_.begin());
}

LogCholeskyFactor LogCholeskyFactor::isotropic(int dim, double h, double s) {
    if (!(h > 0.0) || !(s > 0.0))
        throw ValidationError("isotropic factor needs h > 0 and s > 0");
    LogCholeskyFactor f(dim);
    // Sigma = diag(exp(2 s l)) = h I.
    const double raw = std::log(h) / (2.0 * s);
    for (int j = 0; j < dim; ++j)
        f(j, j) = raw;
    return f;
}

LogCholeskyFactor LogCholeskyFactor::from_sigma(const Mat& sigma, double s) {
    const int d = static_cast<int>(sigma.rows());
    if (sigma.cols() != d)
        throw ValidationError("sigma must be square");
    Eigen::LLT<Mat> llt(sigma);
    if (llt.info() != Eigen::Success)
        throw ValidationError("sigma is not symmetric positive definite");
    const Mat L = llt.matrixL();
    LogCholeskyFactor f(d);
    for (int j = 0; j < d; ++j) {
        for (int k = 0; k < j; ++k)
            f(j, k) = L(j, k);
        f(j, j) = std::log(L(j, j)) / s;
    }
    return f;
}

bool LogCholeskyFactor::clamped() const {
    for (int j = 0; j < dim_; ++j)
        if (std::abs((*this)(j, j)) > kDiagClamp)
            return true;
    return false;
}

void ModelParams::validate() const {
    if (nodes.empty())
        throw ValidationError("model needs at least one node");
    const int d = dim();
    check_dim(d);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].center.size() != d || nodes[i].factor.dim() != d)
            throw ValidationError("node " + std::to_string(i) + " has dimension mismatch");
    }
    if (!(scale > 0.0))
        throw ValidationError("scale s must be positive");
}

std::size_t parameter_count(const ModelParams& params) {
    return params.nodes.size() * params_per_node(params.dim());
}

std::vector<double> flatten(const ModelParams& params) {
    std::vector<double> flat;
    flat.reserve(parameter_count(params));
    for (const Node& node : params.nodes) {
        flat.push_back(node.weight);
        for (int j = 0; j < node.center.size(); ++j)
            flat.push_back(node.center[j]);
        for (double e : node.factor.entries())
            flat.push_back(e);
    }
    return flat;
}

void assign_flat(ModelParams& params, std::span<const double> flat) {
    if (flat.size() != parameter_count(params))
        throw ValidationError("flat parameter vector has length " + std::to_string(flat.size()) +
                              ", expected " + std::to_string(parameter_count(params)));
    auto it = flat.begin();
    for (Node& node : params.nodes) {
        node.weight = *it++;
        for (int j = 0; j < node.center.size(); ++j)
            node.center[j] = *it++;
        for (double& e : node.factor.entries())
            e = *it++;
    }
}

Mat assemble_L(const LogCholeskyFactor& factor, double s) {
    const int d = factor.dim();
    Mat L = Mat::Zero(d, d);
    for (int j = 0; j < d; ++j) {
        for (int k = 0; k < j; ++k)
            L(j, k) = factor(j, k);
        L(j, j) = std::exp(s * std::clamp(factor(j, j), -kDiagClamp, kDiagClamp));
    }
    return L;
}

Mat sigma(const Node& node, double s) {
    const Mat L = assemble_L(node.factor, s);
    const int d = static_cast<int>(L.rows());
    Mat S(d, d);
    for (int j = 0; j < d; ++j) {
        for (int k = 0; k <= j; ++k) {
            double acc = 0.0;
            for (int m = 0; m <= k; ++m)
                acc += L(j, m) * L(k, m);
            S(j, k) = acc;
            S(k, j) = acc;
        }
    }
    return S;
}

Vec whiten(const Node& node, double s, const Vec& x) {
    if (x.size() != node.center.size())
        throw ValidationError("query point dimension does not match node");
    return solve_sigma(assemble_L(node.factor, s), x - node.center);
}

double eval(const ModelParams& params, const Vec& x) {
    double u = 0.0;
    for (std::size_t i = 0; i < params.nodes.size(); ++i) {
        const Node& node = params.nodes[i];
        const Vec z = whiten(node, params.scale, x);
        const double term = node.weight * kernel_of_r2(z.squaredNorm());
        if (!std::isfinite(term))
            throw NumericalError("non-finite kernel value at node " + std::to_string(i), i);
        u += term;
    }
    return u;
}

Derivs eval_derivs(const ModelParams& params, const Vec& x) {
    const int d = static_cast<int>(x.size());
    Derivs out;
    out.grad = Vec::Zero(d);
    out.hess = Mat::Zero(d, d);
    for (std::size_t i = 0; i < params.nodes.size(); ++i) {
        const Node& node = params.nodes[i];
        if (node.center.size() != d)
            throw ValidationError("query point dimension does not match node");
        const Mat L = assemble_L(node.factor, params.scale);
        const Vec z = solve_sigma(L, x - node.center);
        const Vec w = solve_sigma(L, z);
        // Sigma^{-2}, column by column.
        Mat inv_sq(d, d);
        for (int c = 0; c < d; ++c)
            inv_sq.col(c) = solve_sigma(L, solve_sigma(L, Vec::Unit(d, c)));
        inv_sq = 0.5 * (inv_sq + inv_sq.transpose()).eval();

        const double phi = node.weight * kernel_of_r2(z.squaredNorm());
        out.u += phi;
        out.grad += -2.0 * phi * w;
        out.hess += phi * (4.0 * w * w.transpose() - 2.0 * inv_sq);
        if (!std::isfinite(out.u) || !out.grad.allFinite() || !out.hess.allFinite())
            throw NumericalError("non-finite derivative at node " + std::to_string(i), i);
    }
    return out;
}

Ellipse zone_of_influence(const Node& node, double s) {
    const int d = static_cast<int>(node.center.size());
    Eigen::SelfAdjointEigenSolver<Mat> eig(sigma(node, s));
    Ellipse e;
    e.center = node.center;
    e.semi_axes.resize(d);
    e.axes.resize(d, d);
    // Eigen returns ascending eigenvalues.
    for (int j = 0; j < d; ++j) {
        e.semi_axes[j] = eig.eigenvalues()[d - 1 - j];
        e.axes.col(j) = eig.eigenvectors().col(d - 1 - j);
    }
    return e;
}

} // namespace aspinn
