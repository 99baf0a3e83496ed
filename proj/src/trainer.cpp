#include "aspinn/trainer.hpp"

#include <chrono>
#include <algorithm>
#include <cmath>
#include <iostream>
#include <string>

namespace aspinn {

std::size_t BatchSpec::resolve(std::size_t m) const {
    if (count)
        return *count;
    return BatchPlan::from_fraction(fraction, m, 0).batch_size;
}

std::size_t TrainConfig::resolved_boundary_samples() const {
    if (boundary_samples)
        return *boundary_samples;
    return default_boundary_samples(make_problem(problem).domain);
}

double TrainConfig::resolved_alpha() const {
    return alpha ? *alpha : 10.0 * static_cast<double>(resolved_boundary_samples());
}

SampleCounts TrainConfig::resolved_counts() const {
    SampleCounts c = SampleCounts::with_default_tests(samples, resolved_boundary_samples());
    if (test_samples)
        c.interior_test = *test_samples;
    if (boundary_test_samples)
        c.boundary_test = *boundary_test_samples;
    return c;
}

std::vector<std::string> TrainConfig::validate() const {
    if (problem.empty())
        throw ValidationError("--problem is required");
    const PdeProblem p = make_problem(problem);
    if (static_cast<int>(nodes.size()) != p.domain.dim())
        throw ValidationError("--nodes needs " + std::to_string(p.domain.dim()) + " counts for " +
                              problem);
    for (int c : nodes)
        if (c < 1)
            throw ValidationError("--nodes counts must be at least 1");
    if (samples < 1)
        throw ValidationError("--samples must be at least 1");
    const SampleCounts counts = resolved_counts();
    if (counts.boundary_train < 1 || counts.interior_test < 1 || counts.boundary_test < 1)
        throw ValidationError("sample counts must be at least 1");
    if (batch.count) {
        if (*batch.count < 1 || *batch.count > samples)
            throw ValidationError("--batch must lie in [1, M]");
    } else if (!(batch.fraction > 0.0) || batch.fraction > 1.0) {
        throw ValidationError("--batch fraction must lie in (0, 1]");
    }
    if (!(lr > 0.0))
        throw ValidationError("--lr must be positive");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
        throw ValidationError("Adam betas must lie in (0, 1)");
    if (!(eps > 0.0))
        throw ValidationError("Adam eps must be positive");
    if (iterations < 1)
        throw ValidationError("--iters must be at least 1");
    if (eval_every < 1)
        throw ValidationError("eval_every must be at least 1");
    if (!(scale > 0.0))
        throw ValidationError("--scale-s must be positive");
    if (alpha && !(*alpha > 0.0))
        throw ValidationError("--alpha must be positive");

    std::vector<std::string> warnings;
    if (resolved_alpha() <= static_cast<double>(counts.boundary_train))
        warnings.push_back("alpha " + std::to_string(resolved_alpha()) +
                           " is not larger than the boundary sample count " +
                           std::to_string(counts.boundary_train));
    return warnings;
}

// ---------------------------------------------------------------------------

void adam_step(AdamState& state, std::span<double> theta, std::span<const double> grad,
               const AdamHyper& hyper) {
    if (theta.size() != grad.size() || state.m.size() != grad.size() ||
        state.v.size() != grad.size())
        throw ValidationError("Adam state, parameters and gradient differ in length");
    ++state.t;
    const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.t));
    for (std::size_t k = 0; k < theta.size(); ++k) {
        const double g = grad[k];
        state.m[k] = hyper.beta1 * state.m[k] + (1.0 - hyper.beta1) * g;
        state.v[k] = hyper.beta2 * state.v[k] + (1.0 - hyper.beta2) * g * g;
        const double m_hat = state.m[k] / c1;
        const double v_hat = state.v[k] / c2;
        const double next = theta[k] - hyper.lr * m_hat / (std::sqrt(v_hat) + hyper.eps);
        if (!std::isfinite(next))
            throw NumericalError("non-finite Adam update for parameter " + std::to_string(k), k);
        theta[k] = next;
    }
}

void adam_step(AdamState& state, ModelParams& params, std::span<const double> grad,
               const AdamHyper& hyper) {
    std::vector<double> theta = flatten(params);
    adam_step(state, theta, grad, hyper);
    assign_flat(params, theta);
}

void tie_isotropic(std::span<double> grad, int dim) {
    const std::size_t stride = params_per_node(dim);
    for (std::size_t base = 0; base + stride <= grad.size(); base += stride) {
        double* f = grad.data() + base + 1 + dim;
        double mean = 0.0;
        for (int j = 0; j < dim; ++j)
            mean += f[LogCholeskyFactor::index(j, j)];
        mean /= dim;
        for (int j = 0; j < dim; ++j) {
            for (int k = 0; k < j; ++k)
                f[LogCholeskyFactor::index(j, k)] = 0.0;
            f[LogCholeskyFactor::index(j, j)] = mean;
        }
    }
}

// ---------------------------------------------------------------------------

L2Result l2_error(const ModelParams& params, const EvalGrid& grid) {
    if (grid.points.size() != grid.truth.size() || grid.points.empty())
        throw ValidationError("evaluation grid is empty or inconsistent");
    double diff = 0.0, norm = 0.0;
    for (std::size_t k = 0; k < grid.points.size(); ++k) {
        const double e = eval(params, grid.points[k]) - grid.truth[k];
        diff += e * e;
        norm += grid.truth[k] * grid.truth[k];
    }
    if (norm == 0.0)
        return {std::sqrt(diff / static_cast<double>(grid.points.size())), true};
    return {std::sqrt(diff) / std::sqrt(norm), false};
}

namespace {

std::vector<Vec> grid_points(const DomainSpec& domain, int n, double tip_mask_radius) {
    if (domain.dim() != 2)
        throw ValidationError("evaluation grids are built for two-dimensional domains");
    const auto xs = uniform_axis(domain.bounds[0].lo, domain.bounds[0].hi, static_cast<std::size_t>(n));
    const auto ys = uniform_axis(domain.bounds[1].lo, domain.bounds[1].hi, static_cast<std::size_t>(n));
    std::vector<Vec> pts;
    pts.reserve(xs.size() * ys.size());
    for (double y : ys)
        for (double x : xs) {
            Vec p(2);
            p << x, y;
            if (domain.on_slit(p))
                continue;
            if (domain.slit && tip_mask_radius > 0.0 &&
                std::hypot(x - domain.slit->x_begin, y - domain.slit->y) < tip_mask_radius)
                continue;
            pts.push_back(p);
        }
    return pts;
}

} // namespace

EvalGrid make_eval_grid(const DomainSpec& domain, const ScalarField& truth, int n,
                        double tip_mask_radius) {
    EvalGrid g;
    g.points = grid_points(domain, n, tip_mask_radius);
    g.truth.reserve(g.points.size());
    for (const Vec& p : g.points)
        g.truth.push_back(truth(p));
    return g;
}

EvalGrid make_eval_grid(const DomainSpec& domain, const GridSolution& reference, int n,
                        double tip_mask_radius) {
    EvalGrid g;
    g.points = grid_points(domain, n, tip_mask_radius);
    g.truth = resample(reference, g.points);
    return g;
}

namespace {

std::vector<Vec> slice_points(const DomainSpec& domain, double t, int n) {
    if (domain.kind != DomainKind::spacetime_strip)
        throw ValidationError("time slices need a spacetime problem");
    if (t < 0.0 || t > domain.time_horizon + 1e-12)
        throw ValidationError("slice time " + std::to_string(t) + " is outside [0, T]");
    std::vector<Vec> pts;
    for (double x : uniform_axis(domain.bounds[0].lo, domain.bounds[0].hi, static_cast<std::size_t>(n))) {
        Vec p(2);
        p << x, std::min(t, domain.time_horizon);
        pts.push_back(p);
    }
    return pts;
}

} // namespace

EvalGrid make_slice_grid(const DomainSpec& domain, double t, const ScalarField& truth, int n) {
    EvalGrid g;
    g.points = slice_points(domain, t, n);
    for (const Vec& p : g.points)
        g.truth.push_back(truth(p));
    return g;
}

EvalGrid make_slice_grid(const DomainSpec& domain, double t, const GridSolution& reference, int n) {
    EvalGrid g;
    g.points = slice_points(domain, t, n);
    g.truth = resample(reference, g.points);
    return g;
}

void fill_problem_defaults(TrainConfig& config) {
    struct Defaults {
        const char* name;
        std::vector<int> nodes;
        std::size_t samples;
        long iterations;
    };
    static const std::vector<Defaults> table = {
        {"poisson2d", {4, 2}, 200, 20000},   {"ripple2d", {8, 8}, 1600, 30000},
        {"square_slit", {7, 7}, 1200, 30000}, {"advection1d", {8, 5}, 600, 20000},
        {"burgers1d", {10, 8}, 600, 20000},
    };
    for (const Defaults& d : table) {
        if (config.problem != d.name)
            continue;
        if (config.nodes.empty())
            config.nodes = d.nodes;
        if (config.samples == 0)
            config.samples = d.samples;
        if (config.iterations == 0)
            config.iterations = d.iterations;
    }
}

std::shared_ptr<const GridSolution> builtin_reference(const PdeProblem& problem,
                                                      int slit_resolution) {
    if (problem.has_exact())
        return nullptr;
    if (problem.domain.kind == DomainKind::box_minus_slit)
        return std::make_shared<GridSolution>(fd_poisson_slit(slit_resolution));
    if (problem.name == "burgers1d") {
        const double horizon = problem.domain.time_horizon;
        const auto times = uniform_axis(0.0, horizon, 101);
        return std::make_shared<GridSolution>(
            godunov_burgers(2000, 0.5, horizon, burgers_initial, times));
    }
    throw ValidationError("no reference available for problem " + problem.name);
}

EvalGrid problem_eval_grid(const PdeProblem& problem, const TrainConfig& config,
                           const GridSolution* reference) {
    const double tip = problem.domain.slit ? config.tip_mask_radius : 0.0;
    if (reference)
        return make_eval_grid(problem.domain, *reference, 101, tip);
    if (problem.has_exact())
        return make_eval_grid(problem.domain, problem.exact, 101, tip);
    const auto ref = builtin_reference(problem, config.reference_resolution);
    return make_eval_grid(problem.domain, *ref, 101, tip);
}

ModelParams initial_model(const PdeProblem& problem, const TrainConfig& config) {
    ModelParams params;
    params.scale = config.scale;
    params.nodes = init_nodes(problem.domain, config.nodes, config.scale, config.seed);
    params.validate();
    return params;
}

std::optional<EvalRecord> TrainReport::first_reaching(double threshold) const {
    for (const EvalRecord& e : evals)
        if (e.l2 <= threshold)
            return e;
    return std::nullopt;
}

TrainReport train(const TrainConfig& config, const TrainOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    TrainReport report;
    report.config = config;
    report.warnings = config.validate();
    for (const std::string& w : report.warnings)
        std::cerr << "warning: " << w << '\n';

    const PdeProblem problem = make_problem(config.problem);
    const SampleSet samples = generate_samples(problem.domain, config.resolved_counts(), config.seed);
    const double alpha = config.resolved_alpha();
    const EvalGrid eval_grid = problem_eval_grid(problem, config, options.reference.get());

    ModelParams params = initial_model(problem, config);
    const int d = params.dim();
    std::vector<double> theta = flatten(params);
    AdamState adam(theta.size());
    const AdamHyper hyper{config.lr, config.beta1, config.beta2, config.eps};

    const BatchPlan plan{config.batch.resolve(samples.interior_train.size()), config.seed};
    const std::size_t bnd_batch = config.batch_boundary
                                      ? config.batch.resolve(samples.boundary_train.size())
                                      : samples.boundary_train.size();
    const BatchPlan bnd_plan{std::min(bnd_batch, samples.boundary_train.size()), config.seed ^ 0x5bd1e995u};

    std::uint64_t epoch = 0, bnd_epoch = 0;
    auto slices = batches(samples, plan, epoch);
    auto bnd_slices = batches(samples.boundary_train.size(), bnd_plan, bnd_epoch);
    std::size_t cursor = 0, bnd_cursor = 0;
    std::vector<Vec> batch_pts, bnd_pts;

    report.loss_history.reserve(static_cast<std::size_t>(config.iterations));
    try {
        for (long it = 0; it < config.iterations; ++it) {
            if (cursor == slices.size()) {
                slices = batches(samples, plan, ++epoch);
                cursor = 0;
            }
            batch_pts.clear();
            for (std::size_t k : slices[cursor])
                batch_pts.push_back(samples.interior_train[k]);
            ++cursor;

            if (config.batch_boundary) {
                if (bnd_cursor == bnd_slices.size()) {
                    bnd_slices = batches(samples.boundary_train.size(), bnd_plan, ++bnd_epoch);
                    bnd_cursor = 0;
                }
                bnd_pts.clear();
                for (std::size_t k : bnd_slices[bnd_cursor])
                    bnd_pts.push_back(samples.boundary_train[k]);
                ++bnd_cursor;
            }
            const std::span<const Vec> boundary =
                config.batch_boundary ? std::span<const Vec>(bnd_pts)
                                      : std::span<const Vec>(samples.boundary_train);

            LossAndGrad lg = loss_and_grad(params, problem, batch_pts, boundary, alpha);
            report.loss_history.push_back(lg.loss.total);
            if (config.isotropic)
                tie_isotropic(lg.grad, d);
            adam_step(adam, theta, lg.grad, hyper);
            assign_flat(params, theta);

            if (!report.clamp_reported) {
                for (const Node& node : params.nodes)
                    if (node.factor.clamped()) {
                        report.clamp_reported = true;
                        std::cerr << "warning: anisotropy factor clamped to |l| <= " << kDiagClamp
                                  << " at step " << it + 1 << '\n';
                        break;
                    }
            }

            const long done = it + 1;
            if (done % config.eval_every == 0 || done == config.iterations) {
                EvalRecord rec;
                rec.iteration = done;
                rec.test_loss =
                    loss_only(params, problem, samples.interior_test, samples.boundary_test, alpha).total;
                const L2Result l2 = l2_error(params, eval_grid);
                rec.l2 = l2.value;
                report.l2_absolute = l2.absolute;
                report.evals.push_back(rec);
                if (options.progress_every > 0 && done % options.progress_every == 0)
                    std::cerr << config.problem << " step " << done << " loss " << lg.loss.total
                              << " test " << rec.test_loss << " l2 " << rec.l2 << '\n';
            }
        }
    } catch (const NumericalError& e) {
        report.failed = true;
        report.failure = e.what();
    }

    report.final_params = params;
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

} // namespace aspinn
