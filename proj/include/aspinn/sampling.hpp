#pragma once

#include "aspinn/core_model.hpp"
#include "aspinn/problems.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace aspinn {

struct SampleCounts {
    std::size_t interior_train = 0; // M
    std::size_t boundary_train = 0; // M~
    std::size_t interior_test = 0;  // K
    std::size_t boundary_test = 0;  // K~

    /// K = ceil(M/4), K~ = ceil(M~/4).
    static SampleCounts with_default_tests(std::size_t m, std::size_t m_boundary);
};

/// Disjoint train/test collocation points on the interior and boundary.
struct SampleSet {
    std::vector<Vec> interior_train;
    std::vector<Vec> boundary_train;
    std::vector<Vec> interior_test;
    std::vector<Vec> boundary_test;
    std::uint64_t seed = 0;
};

/// Default boundary sample count for a domain (128 for every built-in domain).
std::size_t default_boundary_samples(const DomainSpec& domain);

/// Uniform random interior points and measure-weighted boundary points.
/// Throws ValidationError on zero counts and std::runtime_error if rejection
/// sampling cannot find a valid point in 10^6 draws.
SampleSet generate_samples(const DomainSpec& domain, const SampleCounts& counts,
                           std::uint64_t seed);

/// Nodes at the cell centers of a uniform grid over the domain bounding box.
/// Zones start isotropic with h equal to the mean cell spacing; weights are
/// uniform in [-0.1, 0.1]. Nodes landing on a slit are lifted by 1e-2 in y.
std::vector<Node> init_nodes(const DomainSpec& domain, std::span<const int> counts, double s,
                             std::uint64_t seed);

/// Mean cell spacing used for the isotropic initial zones.
double initial_spacing(const DomainSpec& domain, std::span<const int> counts);

struct BatchPlan {
    std::size_t batch_size = 0;
    std::uint64_t seed = 0;

    /// Batch size ceil(fraction * M), at least 1.
    static BatchPlan from_fraction(double fraction, std::size_t m, std::uint64_t seed);
};

/// Index slices of one epoch over the interior training set. Each epoch draws
/// a fresh permutation from (plan.seed, epoch); the last slice may be short.
std::vector<std::vector<std::size_t>> batches(const SampleSet& set, const BatchPlan& plan,
                                              std::uint64_t epoch);
std::vector<std::vector<std::size_t>> batches(std::size_t m, const BatchPlan& plan,
                                              std::uint64_t epoch);

} // namespace aspinn
