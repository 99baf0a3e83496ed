#include "aspinn/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace aspinn {

namespace {

constexpr std::size_t kMaxDraws = 1'000'000;
constexpr double kDistinctTol = 1e-12;

// Independent streams from one user seed.
enum class Stream : std::uint32_t { samples = 1, weights = 2, batches = 3 };

std::mt19937_64 make_engine(std::uint64_t seed, Stream stream, std::uint64_t extra = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(extra),
                      static_cast<std::uint32_t>(extra >> 32)};
    return std::mt19937_64(seq);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

bool same_point(const Vec& a, const Vec& b) {
    return (a - b).cwiseAbs().maxCoeff() <= kDistinctTol;
}

bool collides(const Vec& x, const std::vector<Vec>& others) {
    return std::any_of(others.begin(), others.end(),
                       [&](const Vec& o) { return same_point(x, o); });
}

class PointDrawer {
public:
    PointDrawer(const DomainSpec& domain, std::mt19937_64& rng)
        : domain_(domain), rng_(rng), faces_(domain.boundary_faces()) {
        for (const BoundaryFace& f : faces_)
            total_measure_ += f.measure;
    }

    Vec interior() {
        const int d = domain_.dim();
        for (std::size_t draw = 0; draw < kMaxDraws; ++draw) {
            Vec x(d);
            for (int j = 0; j < d; ++j)
                x[j] = uniform(rng_, domain_.bounds[j].lo, domain_.bounds[j].hi);
            if (domain_.is_interior(x) && domain_.distance_to_slit(x) >= kSlitExclusion)
                return x;
        }
        throw std::runtime_error("interior rejection sampling failed after 10^6 draws");
    }

    Vec boundary() {
        const int d = domain_.dim();
        for (std::size_t draw = 0; draw < kMaxDraws; ++draw) {
            double pick = uniform(rng_, 0.0, total_measure_);
            std::size_t f = 0;
            while (f + 1 < faces_.size() && pick >= faces_[f].measure) {
                pick -= faces_[f].measure;
                ++f;
            }
            const BoundaryFace& face = faces_[f];
            Vec x(d);
            for (int j = 0; j < d; ++j)
                x[j] = j == face.axis ? face.value
                                      : uniform(rng_, face.extent[j].lo, face.extent[j].hi);
            if (domain_.is_boundary(x))
                return x;
        }
        throw std::runtime_error("boundary rejection sampling failed after 10^6 draws");
    }

private:
    const DomainSpec& domain_;
    std::mt19937_64& rng_;
    std::vector<BoundaryFace> faces_;
    double total_measure_ = 0.0;
};

template <class Draw>
std::vector<Vec> draw_distinct(std::size_t count, const std::vector<Vec>& avoid, Draw&& draw) {
    std::vector<Vec> pts;
    pts.reserve(count);
    std::size_t rejected = 0;
    while (pts.size() < count) {
        Vec x = draw();
        if (collides(x, avoid)) {
            if (++rejected > kMaxDraws)
                throw std::runtime_error("could not draw test points disjoint from training points");
            continue;
        }
        pts.push_back(std::move(x));
    }
    return pts;
}

} // namespace

SampleCounts SampleCounts::with_default_tests(std::size_t m, std::size_t m_boundary) {
    return {m, m_boundary, (m + 3) / 4, (m_boundary + 3) / 4};
}

std::size_t default_boundary_samples(const DomainSpec& domain) {
    // Static: 32 per side of the square. Spacetime: 64 on the initial line
    // plus 32 per spatial end.
    return domain.kind == DomainKind::spacetime_strip ? 64 + 2 * 32 : 4 * 32;
}

SampleSet generate_samples(const DomainSpec& domain, const SampleCounts& counts,
                           std::uint64_t seed) {
    domain.validate();
    if (counts.interior_train == 0 || counts.boundary_train == 0 || counts.interior_test == 0 ||
        counts.boundary_test == 0)
        throw ValidationError("all sample counts must be at least 1");

    std::mt19937_64 rng = make_engine(seed, Stream::samples);
    PointDrawer drawer(domain, rng);
    SampleSet set;
    set.seed = seed;
    set.interior_train = draw_distinct(counts.interior_train, {}, [&] { return drawer.interior(); });
    set.boundary_train = draw_distinct(counts.boundary_train, {}, [&] { return drawer.boundary(); });
    set.interior_test = draw_distinct(counts.interior_test, set.interior_train,
                                      [&] { return drawer.interior(); });
    set.boundary_test = draw_distinct(counts.boundary_test, set.boundary_train,
                                      [&] { return drawer.boundary(); });
    return set;
}

double initial_spacing(const DomainSpec& domain, std::span<const int> counts) {
    double sum = 0.0;
    for (int j = 0; j < domain.dim(); ++j)
        sum += domain.bounds[j].length() / counts[j];
    return sum / domain.dim();
}

std::vector<Node> init_nodes(const DomainSpec& domain, std::span<const int> counts, double s,
                             std::uint64_t seed) {
    domain.validate();
    const int d = domain.dim();
    if (static_cast<int>(counts.size()) != d)
        throw ValidationError("node grid needs " + std::to_string(d) + " counts");
    for (int c : counts)
        if (c < 1)
            throw ValidationError("node counts must be at least 1 per dimension");

    const double h0 = initial_spacing(domain, counts);
    const LogCholeskyFactor factor = LogCholeskyFactor::isotropic(d, h0, s);
    std::mt19937_64 rng = make_engine(seed, Stream::weights);

    std::size_t total = 1;
    for (int c : counts)
        total *= static_cast<std::size_t>(c);

    std::vector<Node> nodes;
    nodes.reserve(total);
    std::vector<int> idx(d, 0);
    for (std::size_t n = 0; n < total; ++n) {
        // First coordinate varies fastest.
        std::size_t rem = n;
        for (int j = 0; j < d; ++j) {
            idx[j] = static_cast<int>(rem % counts[j]);
            rem /= counts[j];
        }
        Node node;
        node.center.resize(d);
        for (int j = 0; j < d; ++j) {
            const Interval& iv = domain.bounds[j];
            node.center[j] = iv.lo + (idx[j] + 0.5) * iv.length() / counts[j];
        }
        if (domain.on_slit(node.center))
            node.center[1] += 1e-2;
        node.factor = factor;
        node.weight = uniform(rng, -0.1, 0.1);
        nodes.push_back(std::move(node));
    }
    return nodes;
}

BatchPlan BatchPlan::from_fraction(double fraction, std::size_t m, std::uint64_t seed) {
    if (!(fraction > 0.0) || fraction > 1.0)
        throw ValidationError("batch fraction must lie in (0, 1]");
    const auto size = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(m) - 1e-9));
    return {std::max<std::size_t>(size, 1), seed};
}

std::vector<std::vector<std::size_t>> batches(std::size_t m, const BatchPlan& plan,
                                              std::uint64_t epoch) {
    if (plan.batch_size == 0 || plan.batch_size > m)
        throw ValidationError("batch size must lie in [1, M]");
    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 rng = make_engine(plan.seed, Stream::batches, epoch);
    std::shuffle(perm.begin(), perm.end(), rng);

    std::vector<std::vector<std::size_t>> out;
    for (std::size_t start = 0; start < m; start += plan.batch_size) {
        const std::size_t stop = std::min(m, start + plan.batch_size);
        out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                         perm.begin() + static_cast<std::ptrdiff_t>(stop));
    }
    return out;
}

std::vector<std::vector<std::size_t>> batches(const SampleSet& set, const BatchPlan& plan,
                                              std::uint64_t epoch) {
    return batches(set.interior_train.size(), plan, epoch);
}

} // namespace aspinn
