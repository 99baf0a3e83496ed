#include "aspinn/gradients.hpp"

#include <omp.h>

#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>

namespace aspinn {

namespace {

// Per-node quantities shared by every sample: B = Sigma^{-2}.
struct NodeCache {
    Vec center;
    double weight = 0.0;
    Mat L;
    Mat A; // Sigma^{-1}
    Mat B; // Sigma^{-2}
    bool diag_active[kMaxDim] = {true, true, true};
};

std::vector<NodeCache> build_cache(const ModelParams& params) {
    std::vector<NodeCache> cache;
    cache.reserve(params.nodes.size());
    for (const Node& node : params.nodes) {
        const int d = static_cast<int>(node.center.size());
        NodeCache c;
        c.center = node.center;
        c.weight = node.weight;
        c.L = assemble_L(node.factor, params.scale);
        const Mat Linv = c.L.triangularView<Eigen::Lower>().solve(Mat::Identity(d, d));
        c.A = Linv.transpose() * Linv;
        c.A = 0.5 * (c.A + c.A.transpose()).eval();
        c.B = c.A * c.A;
        c.B = 0.5 * (c.B + c.B.transpose()).eval();
        for (int j = 0; j < d; ++j)
            c.diag_active[j] = std::abs(node.factor(j, j)) <= kDiagClamp;
        cache.push_back(std::move(c));
    }
    return cache;
}

// Adjoint of the per-sample loss term with respect to (u, grad, hess).
struct Adjoint {
    double a_u = 0.0;
    Vec a_g;
    Mat a_H;
    bool second_order = false;
};

struct ForwardPass {
    LossBreakdown loss;
    std::vector<Adjoint> adjoints;
    std::vector<double> phi; // [sample * N + node]
    std::vector<double> w;   // [(sample * N + node) * d + j], w = B r
};

void check_inputs(const ModelParams& params, const PdeProblem& problem,
                  std::span<const Vec> batch, std::span<const Vec> boundary_batch, double alpha) {
    params.validate();
    if (batch.empty())
        throw ValidationError("interior batch is empty");
    if (boundary_batch.empty())
        throw ValidationError("boundary batch is empty");
    if (!(alpha > 0.0))
        throw ValidationError("alpha must be positive");
    if (params.dim() != problem.domain.dim())
        throw ValidationError("model dimension does not match problem domain");
}

ForwardPass forward(const std::vector<NodeCache>& nodes, const PdeProblem& problem,
                    std::span<const Vec> batch, std::span<const Vec> boundary_batch, double alpha,
                    bool keep_cache) {
    const std::size_t n_int = batch.size();
    const std::size_t n_pts = n_int + boundary_batch.size();
    const std::size_t n_nodes = nodes.size();
    const int d = static_cast<int>(nodes.front().center.size());
    const double inv_m = 1.0 / static_cast<double>(n_int);
    const double bnd_scale = alpha / static_cast<double>(boundary_batch.size());

    ForwardPass out;
    out.adjoints.resize(keep_cache ? n_pts : 0);
    if (keep_cache) {
        out.phi.resize(n_pts * n_nodes);
        out.w.resize(n_pts * n_nodes * static_cast<std::size_t>(d));
    }
    std::vector<double> terms(n_pts, 0.0);
    std::vector<unsigned char> bad(n_pts, 0);

#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (std::ptrdiff_t sp = 0; sp < static_cast<std::ptrdiff_t>(n_pts); ++sp) {
        const auto p = static_cast<std::size_t>(sp);
        const bool interior = p < n_int;
        const Vec& x = interior ? batch[p] : boundary_batch[p - n_int];
        const bool want_hess = interior && problem.needs_hessian;
        const bool want_grad = interior;

        double u = 0.0;
        Vec grad = Vec::Zero(d);
        Mat hess = Mat::Zero(d, d);
        for (std::size_t i = 0; i < n_nodes; ++i) {
            const NodeCache& nc = nodes[i];
            const Vec r = x - nc.center;
            const Vec w = nc.B * r;
            const double phi = kernel_of_r2(r.dot(w));
            const double t = nc.weight * phi;
            u += t;
            if (want_grad)
                grad.noalias() -= 2.0 * t * w;
            if (want_hess)
                hess.noalias() += t * (4.0 * w * w.transpose() - 2.0 * nc.B);
            if (keep_cache) {
                out.phi[p * n_nodes + i] = phi;
                for (int j = 0; j < d; ++j)
                    out.w[(p * n_nodes + i) * d + j] = w[j];
            }
        }

        if (interior) {
            const ResidualJet jet = problem.residual(x, u, grad, hess);
            terms[p] = jet.value * jet.value * inv_m;
            if (keep_cache) {
                const double s = 2.0 * jet.value * inv_m;
                Adjoint& adj = out.adjoints[p];
                adj.a_u = s * jet.d_u;
                adj.a_g = s * jet.d_grad;
                adj.second_order = want_hess;
                adj.a_H = want_hess ? Mat(s * 0.5 * (jet.d_hess + jet.d_hess.transpose()))
                                    : Mat(Mat::Zero(d, d));
                if (!adj.a_g.allFinite() || !adj.a_H.allFinite() || !std::isfinite(adj.a_u))
                    bad[p] = 1;
            }
        } else {
            const BoundaryJet jet = problem.boundary_residual(x, u);
            terms[p] = 0.5 * bnd_scale * jet.value * jet.value;
            if (keep_cache) {
                Adjoint& adj = out.adjoints[p];
                adj.a_u = bnd_scale * jet.value * jet.d_u;
                adj.a_g = Vec::Zero(d);
                adj.a_H = Mat::Zero(d, d);
                if (!std::isfinite(adj.a_u))
                    bad[p] = 1;
            }
        }
        if (!std::isfinite(terms[p]))
            bad[p] = 1;
    }

    for (std::size_t p = 0; p < n_pts; ++p) {
        if (bad[p])
            throw NumericalError("non-finite loss contribution at sample " + std::to_string(p), p);
        if (p < n_int)
            out.loss.interior += terms[p];
        else
            out.loss.boundary += terms[p];
    }
    out.loss.total = out.loss.interior + out.loss.boundary;
    return out;
}

} // namespace

int worker_threads() {
    int threads = omp_get_max_threads();
    if (const char* env = std::getenv("ASPINN_THREADS")) {
        char* end = nullptr;
        const long cap = std::strtol(env, &end, 10);
        if (end != env && cap >= 1 && cap < threads)
            threads = static_cast<int>(cap);
    }
    return threads;
}

LossBreakdown loss_only(const ModelParams& params, const PdeProblem& problem,
                        std::span<const Vec> batch, std::span<const Vec> boundary_batch,
                        double alpha) {
    check_inputs(params, problem, batch, boundary_batch, alpha);
    return forward(build_cache(params), problem, batch, boundary_batch, alpha, false).loss;
}

LossAndGrad loss_and_grad(const ModelParams& params, const PdeProblem& problem,
                          std::span<const Vec> batch, std::span<const Vec> boundary_batch,
                          double alpha) {
    check_inputs(params, problem, batch, boundary_batch, alpha);
    const std::vector<NodeCache> nodes = build_cache(params);
    const ForwardPass fw = forward(nodes, problem, batch, boundary_batch, alpha, true);

    const std::size_t n_int = batch.size();
    const std::size_t n_pts = n_int + boundary_batch.size();
    const std::size_t n_nodes = nodes.size();
    const int d = params.dim();
    const std::size_t stride = params_per_node(d);

    LossAndGrad out;
    out.loss = fw.loss;
    out.grad.assign(n_nodes * stride, 0.0);
    std::vector<unsigned char> bad(n_nodes, 0);

    // Each node sums its samples in ascending order; nodes are independent.
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (std::ptrdiff_t si = 0; si < static_cast<std::ptrdiff_t>(n_nodes); ++si) {
        const auto i = static_cast<std::size_t>(si);
        const NodeCache& nc = nodes[i];
        double d_weight = 0.0;
        Vec d_r = Vec::Zero(d);
        Mat g_B = Mat::Zero(d, d);

        for (std::size_t p = 0; p < n_pts; ++p) {
            const Vec& x = p < n_int ? batch[p] : boundary_batch[p - n_int];
            const Adjoint& adj = fw.adjoints[p];
            const double phi = fw.phi[p * n_nodes + i];
            if (phi == 0.0)
                continue;
            Vec w(d);
            for (int j = 0; j < d; ++j)
                w[j] = fw.w[(p * n_nodes + i) * d + j];
            const Vec r = x - nc.center;
            const double uphi = nc.weight * phi;

            // Node contribution F = U phi G with
            // G = a_u - 2 a_g.w + 4 w.a_H.w - 2 a_H:B.
            Vec q = Vec::Zero(d);
            double G = adj.a_u - 2.0 * adj.a_g.dot(w);
            if (adj.second_order) {
                q = adj.a_H * w;
                G += 4.0 * w.dot(q) - 2.0 * adj.a_H.cwiseProduct(nc.B).sum();
            }
            d_weight += phi * G;
            d_r += uphi * (-2.0 * G * w + nc.B * (8.0 * q - 2.0 * adj.a_g));
            g_B += uphi * ((8.0 * q - 2.0 * adj.a_g - G * r) * r.transpose());
            if (adj.second_order)
                g_B -= 2.0 * uphi * adj.a_H;
        }

        // Chain B = A^2, A = Sigma^{-1}, Sigma = L L^T back to the raw factor.
        g_B = 0.5 * (g_B + g_B.transpose()).eval();
        const Mat g_A = g_B * nc.A + nc.A * g_B;
        const Mat g_Sigma = -(nc.A * g_A * nc.A);
        const Mat g_L = (g_Sigma + g_Sigma.transpose()) * nc.L;

        double* g = out.grad.data() + i * stride;
        g[0] = d_weight;
        for (int j = 0; j < d; ++j)
            g[1 + j] = -d_r[j];
        double* gf = g + 1 + d;
        for (int j = 0; j < d; ++j) {
            for (int k = 0; k < j; ++k)
                gf[LogCholeskyFactor::index(j, k)] = g_L(j, k);
            gf[LogCholeskyFactor::index(j, j)] =
                nc.diag_active[j] ? g_L(j, j) * params.scale * nc.L(j, j) : 0.0;
        }
        for (std::size_t k = 0; k < stride; ++k)
            if (!std::isfinite(g[k]))
                bad[i] = 1;
    }

    for (std::size_t i = 0; i < n_nodes; ++i) {
        if (!bad[i])
            continue;
        // Report the first sample whose adjoint or kernel value is unusable.
        for (std::size_t p = 0; p < n_pts; ++p)
            if (!std::isfinite(fw.phi[p * n_nodes + i]))
                throw NumericalError("non-finite gradient at sample " + std::to_string(p), p);
        throw NumericalError("non-finite gradient at node " + std::to_string(i), 0);
    }
    return out;
}

} // namespace aspinn
