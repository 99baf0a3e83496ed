#pragma once

#include "aspinn/core_model.hpp"
#include "aspinn/gradients.hpp"
#include "aspinn/problems.hpp"
#include "aspinn/reference.hpp"
#include "aspinn/sampling.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace aspinn {

/// Batch size given either as a count or as a fraction of M.
struct BatchSpec {
    std::optional<std::size_t> count;
    double fraction = 1.0;

    std::size_t resolve(std::size_t m) const;
};

struct TrainConfig {
    std::string problem;
    std::vector<int> nodes;               // per-dimension node grid
    std::size_t samples = 0;              // M
    std::optional<std::size_t> boundary_samples;       // M~, domain default when unset
    std::optional<std::size_t> test_samples;           // K, ceil(M/4) when unset
    std::optional<std::size_t> boundary_test_samples;  // K~, ceil(M~/4) when unset
    BatchSpec batch;
    bool batch_boundary = false;          // batch the boundary set too
    std::optional<double> alpha;          // 10 M~ when unset
    double lr = 5e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long iterations = 0;
    std::uint64_t seed = 0;
    double scale = kDefaultScale;
    long eval_every = 100;
    bool isotropic = false;               // tie zones to h I (SPINN mode)
    double tip_mask_radius = 0.1;         // slit L2 ignores a disc at the crack tip
    int reference_resolution = 257;       // built-in slit reference grid

    std::size_t resolved_boundary_samples() const;
    double resolved_alpha() const;
    SampleCounts resolved_counts() const;

    /// Throws ValidationError on the first violated constraint; returns
    /// warnings (alpha <= M~) that do not stop a run.
    std::vector<std::string> validate() const;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long t = 0;

    explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

struct AdamHyper {
    double lr = 5e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One bias-corrected Adam update of `theta` in place.
void adam_step(AdamState& state, std::span<double> theta, std::span<const double> grad,
               const AdamHyper& hyper);
void adam_step(AdamState& state, ModelParams& params, std::span<const double> grad,
               const AdamHyper& hyper);

/// Truth values on a fixed set of evaluation points.
struct EvalGrid {
    std::vector<Vec> points;
    std::vector<double> truth;
};

struct L2Result {
    double value = 0.0;
    bool absolute = false; // truth norm was zero; value is the absolute RMS
};

/// Relative L2 error sqrt(sum (u - u*)^2) / sqrt(sum u*^2) over the grid.
L2Result l2_error(const ModelParams& params, const EvalGrid& grid);

/// n x n uniform grid over the domain bounding box, truth from `truth`.
/// Slit points and, for slit domains, a disc of `tip_mask_radius` around the
/// crack tip are left out.
EvalGrid make_eval_grid(const DomainSpec& domain, const ScalarField& truth, int n = 101,
                        double tip_mask_radius = 0.0);
EvalGrid make_eval_grid(const DomainSpec& domain, const GridSolution& reference, int n = 101,
                        double tip_mask_radius = 0.0);

/// n points along the spatial axis of a spacetime domain at fixed time t.
EvalGrid make_slice_grid(const DomainSpec& domain, double t, const ScalarField& truth, int n = 101);
EvalGrid make_slice_grid(const DomainSpec& domain, double t, const GridSolution& reference,
                         int n = 101);

/// Built-in ground truth: exact solution, FD slit solve or Godunov Burgers.
/// Returns nullptr when the problem has a closed-form solution.
std::shared_ptr<const GridSolution> builtin_reference(const PdeProblem& problem,
                                                      int slit_resolution = 257);

/// Evaluation grid the trainer uses for a problem (exact, `reference` or built-in).
EvalGrid problem_eval_grid(const PdeProblem& problem, const TrainConfig& config,
                           const GridSolution* reference);

/// Fills node grid, sample count and iteration count left unset (zero/empty)
/// with per-problem defaults.
void fill_problem_defaults(TrainConfig& config);

/// Initial model for a configuration.
ModelParams initial_model(const PdeProblem& problem, const TrainConfig& config);

struct EvalRecord {
    long iteration = 0; // number of completed steps
    double test_loss = 0.0;
    double l2 = 0.0;
};

struct TrainReport {
    std::vector<double> loss_history; // train loss of step k at index k
    std::vector<EvalRecord> evals;
    ModelParams final_params;
    TrainConfig config;
    double wall_seconds = 0.0;
    bool failed = false;
    std::string failure;
    bool l2_absolute = false;
    bool clamp_reported = false;
    std::vector<std::string> warnings;

    /// First evaluation at which l2 <= threshold, if any.
    std::optional<EvalRecord> first_reaching(double threshold) const;
};

struct TrainOptions {
    /// Externally supplied truth for L2 (overrides exact/built-in).
    std::shared_ptr<const GridSolution> reference;
    /// Prints progress to stderr every this many steps (0 = silent).
    long progress_every = 0;
};

/// Adam over the collocation loss. Deterministic for a given config.
/// Throws ValidationError on a bad config; numerical failures end the run
/// early with `failed` set and the partial histories kept.
TrainReport train(const TrainConfig& config, const TrainOptions& options = {});

/// Gradient projection for SPINN mode: off-diagonals zeroed, diagonals tied.
void tie_isotropic(std::span<double> grad, int dim);

} // namespace aspinn
