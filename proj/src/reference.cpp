#include "aspinn/reference.hpp"

#include "aspinn/format.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace aspinn {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string describe(const Vec& p) {
    std::string s = "(";
    for (int j = 0; j < p.size(); ++j)
        s += (j ? ", " : "") + format_double(p[j]);
    return s + ")";
}

} // namespace

std::vector<double> uniform_axis(double lo, double hi, std::size_t n) {
    if (n < 2)
        throw ValidationError("uniform axis needs at least two points");
    std::vector<double> a(n);
    for (std::size_t i = 0; i < n; ++i)
        a[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    a.back() = hi;
    return a;
}

void GridSolution::validate() const {
    if (axes.empty() || axes.size() > static_cast<std::size_t>(kMaxDim))
        throw ValidationError("grid dimension out of range");
    std::size_t total = 1;
    for (const auto& ax : axes) {
        if (ax.size() < 2)
            throw ValidationError("grid axes need at least two points");
        const double h = (ax.back() - ax.front()) / static_cast<double>(ax.size() - 1);
        for (std::size_t i = 1; i < ax.size(); ++i) {
            const double step = ax[i] - ax[i - 1];
            if (!(step > 0.0) || std::abs(step - h) > 1e-9 * (1.0 + std::abs(h)))
                throw ValidationError("grid axes must be strictly increasing and uniform");
        }
        total *= ax.size();
    }
    if (values.size() != total || valid.size() != total)
        throw ValidationError("grid value count does not match axes");
    for (std::size_t k = 0; k < total; ++k)
        if (valid[k] && !std::isfinite(values[k]))
            throw ValidationError("grid has a non-finite value at a valid node");
}

// ---------------------------------------------------------------------------
// Finite-difference Poisson

GridSolution fd_poisson(int n, const std::function<double(double, double)>& source,
                        const std::function<double(double, double)>& boundary, bool with_slit,
                        FdSolveInfo* info) {
    if (n < 3)
        throw ValidationError("finite-difference grid needs at least 3 points per side");
    if (with_slit && n % 2 == 0)
        throw ValidationError("slit grid needs an odd point count so y = 0 is a grid line");

    const auto N = static_cast<std::size_t>(n);
    const double h = 2.0 / (n - 1);
    const std::vector<double> axis = uniform_axis(-1.0, 1.0, N);
    const int mid = (n - 1) / 2;

    auto idx = [N](int i, int j) { return static_cast<std::size_t>(i) + N * static_cast<std::size_t>(j); };
    auto on_slit = [&](int i, int j) { return with_slit && j == mid && axis[i] >= 0.0; };
    auto is_unknown = [&](int i, int j) {
        return i > 0 && j > 0 && i < n - 1 && j < n - 1 && !on_slit(i, j);
    };

    // Known Dirichlet values and the h^2-scaled right-hand side.
    std::vector<double> u(N * N, 0.0), rhs(N * N, 0.0);
    std::vector<std::uint8_t> unknown(N * N, 0);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            if (is_unknown(i, j))
                unknown[idx(i, j)] = 1;
            else if (!on_slit(i, j))
                u[idx(i, j)] = boundary(axis[i], axis[j]);
        }
    for (int j = 1; j < n - 1; ++j)
        for (int i = 1; i < n - 1; ++i) {
            if (!unknown[idx(i, j)])
                continue;
            double b = h * h * source(axis[i], axis[j]);
            const int ni[4] = {i - 1, i + 1, i, i};
            const int nj[4] = {j, j, j - 1, j + 1};
            for (int k = 0; k < 4; ++k)
                if (!unknown[idx(ni[k], nj[k])])
                    b += u[idx(ni[k], nj[k])];
            rhs[idx(i, j)] = b;
        }

    // A v = 4 v - sum of unknown neighbours, restricted to unknowns.
    auto apply = [&](const std::vector<double>& v, std::vector<double>& out) {
        for (int j = 1; j < n - 1; ++j)
            for (int i = 1; i < n - 1; ++i) {
                const std::size_t c = idx(i, j);
                if (!unknown[c])
                    continue;
                double acc = 4.0 * v[c];
                if (unknown[c - 1]) acc -= v[c - 1];
                if (unknown[c + 1]) acc -= v[c + 1];
                if (unknown[c - N]) acc -= v[c - N];
                if (unknown[c + N]) acc -= v[c + N];
                out[c] = acc;
            }
    };
    auto dot = [&](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t c = 0; c < a.size(); ++c)
            if (unknown[c])
                s += a[c] * b[c];
        return s;
    };
    auto max_unscaled = [&](const std::vector<double>& r) {
        double m = 0.0;
        for (std::size_t c = 0; c < r.size(); ++c)
            if (unknown[c])
                m = std::max(m, std::abs(r[c]));
        return m / (h * h);
    };

    constexpr double kTol = 1e-10;
    constexpr int kMaxIter = 100000;
    std::vector<double> x(N * N, 0.0), r = rhs, p = rhs, Ap(N * N, 0.0);
    double rr = dot(r, r);
    int iter = 0;
    while (max_unscaled(r) >= 0.1 * kTol) {
        if (iter >= kMaxIter)
            throw std::runtime_error("finite-difference CG did not converge in 10^5 iterations");
        apply(p, Ap);
        const double alpha = rr / dot(p, Ap);
        for (std::size_t c = 0; c < x.size(); ++c)
            if (unknown[c]) {
                x[c] += alpha * p[c];
                r[c] -= alpha * Ap[c];
            }
        const double rr_new = dot(r, r);
        const double beta = rr_new / rr;
        rr = rr_new;
        for (std::size_t c = 0; c < p.size(); ++c)
            if (unknown[c])
                p[c] = r[c] + beta * p[c];
        ++iter;
    }

    // True residual of the final iterate.
    apply(x, Ap);
    for (std::size_t c = 0; c < r.size(); ++c)
        if (unknown[c])
            r[c] = rhs[c] - Ap[c];
    const double residual = max_unscaled(r);
    if (residual >= kTol)
        throw std::runtime_error("finite-difference CG stalled above the residual tolerance");
    if (info)
        *info = {iter, residual};

    GridSolution g;
    g.axes = {axis, axis};
    g.values.assign(N * N, 0.0);
    g.valid.assign(N * N, 1);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const std::size_t c = idx(i, j);
            if (unknown[c])
                g.values[c] = x[c];
            else if (on_slit(i, j) && axis[i] < 1.0) {
                g.values[c] = kNaN;
                g.valid[c] = 0;
            } else
                g.values[c] = u[c];
        }
    return g;
}

GridSolution fd_poisson_slit(int n, FdSolveInfo* info) {
    if (n < 17 || n % 2 == 0)
        throw ValidationError("slit reference needs an odd n >= 17");
    return fd_poisson(n, [](double, double) { return 1.0; }, [](double, double) { return 0.0; },
                      true, info);
}

// ---------------------------------------------------------------------------
// Godunov Burgers

BurgersGodunov::BurgersGodunov(int nx, double cfl, const std::function<double(double)>& u0,
                               double lo, double hi)
    : lo_(lo), hi_(hi), dx_((hi - lo) / nx), cfl_(cfl) {
    if (nx < 100)
        throw ValidationError("Godunov solver needs nx >= 100");
    if (!(cfl > 0.0) || cfl > 0.9)
        throw ValidationError("CFL number must lie in (0, 0.9]");
    if (!(hi > lo))
        throw ValidationError("Godunov interval must be non-degenerate");
    cells_.resize(static_cast<std::size_t>(nx));
    for (std::size_t i = 0; i < cells_.size(); ++i)
        cells_[i] = u0(cell_center(i));
}

double BurgersGodunov::godunov_flux(double left, double right) {
    auto f = [](double u) { return 0.5 * u * u; };
    if (left > right) // shock
        return 0.5 * (left + right) > 0.0 ? f(left) : f(right);
    if (left > 0.0)
        return f(left);
    if (right < 0.0)
        return f(right);
    return 0.0; // transonic rarefaction
}

BurgersGodunov::StepInfo BurgersGodunov::step(double t_max) {
    StepInfo info;
    const double remaining = t_max - time_;
    if (!(remaining > 0.0))
        return info;
    double umax = 0.0;
    for (double u : cells_)
        umax = std::max(umax, std::abs(u));
    info.dt = umax > 0.0 ? std::min(cfl_ * dx_ / umax, remaining) : remaining;

    const std::size_t n = cells_.size();
    std::vector<double> flux(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
        const double left = k == 0 ? 0.0 : cells_[k - 1];
        const double right = k == n ? 0.0 : cells_[k];
        flux[k] = godunov_flux(left, right);
    }
    const double ratio = info.dt / dx_;
    for (std::size_t i = 0; i < n; ++i)
        cells_[i] -= ratio * (flux[i + 1] - flux[i]);
    info.flux_left = flux.front();
    info.flux_right = flux.back();
    time_ += info.dt;
    if (remaining - info.dt <= 0.0)
        time_ = t_max;
    return info;
}

double BurgersGodunov::mass() const {
    double m = 0.0;
    for (double u : cells_)
        m += u * dx_;
    return m;
}

std::vector<double> BurgersGodunov::interface_values() const {
    const std::size_t n = cells_.size();
    std::vector<double> v(n + 1);
    v[0] = 0.5 * cells_.front();
    v[n] = 0.5 * cells_.back();
    for (std::size_t k = 1; k < n; ++k)
        v[k] = 0.5 * (cells_[k - 1] + cells_[k]);
    return v;
}

GridSolution godunov_burgers(int nx, double cfl, double horizon,
                             const std::function<double(double)>& u0,
                             std::span<const double> times) {
    if (!(horizon > 0.0))
        throw ValidationError("Burgers horizon must be positive");
    if (times.size() < 2)
        throw ValidationError("Burgers reference needs at least two snapshot times");
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (times[k] < 0.0 || times[k] > horizon || (k && times[k] < times[k - 1]))
            throw ValidationError("snapshot times must be sorted within [0, T]");
    }

    BurgersGodunov solver(nx, cfl, u0);
    GridSolution g;
    g.axes = {uniform_axis(-1.0, 1.0, static_cast<std::size_t>(nx) + 1),
              std::vector<double>(times.begin(), times.end())};
    g.time_horizon = horizon;
    const std::size_t nxi = g.axes[0].size();
    g.values.resize(nxi * times.size());
    g.valid.assign(nxi * times.size(), 1);

    std::vector<double> prev = solver.interface_values();
    std::vector<double> cur = prev;
    double t_prev = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
        const double tau = times[k];
        while (solver.time() < tau) {
            prev = cur;
            t_prev = solver.time();
            solver.step(horizon);
            cur = solver.interface_values();
        }
        const double span = solver.time() - t_prev;
        const double theta = span > 0.0 ? std::clamp((tau - t_prev) / span, 0.0, 1.0) : 1.0;
        for (std::size_t i = 0; i < nxi; ++i)
            g.values[g.index(i, k)] = prev[i] + theta * (cur[i] - prev[i]);
    }
    return g;
}

// ---------------------------------------------------------------------------
// Interpolation

double resample(const GridSolution& ref, const Vec& point) {
    const int d = ref.dim();
    if (point.size() != d)
        throw ValidationError("resample point " + describe(point) + " has wrong dimension");
    std::size_t base[kMaxDim];
    double frac[kMaxDim];
    for (int j = 0; j < d; ++j) {
        const auto& ax = ref.axes[j];
        const double lo = ax.front(), hi = ax.back();
        const double tol = 1e-12 * (1.0 + hi - lo);
        if (point[j] < lo - tol || point[j] > hi + tol)
            throw ValidationError("resample point " + describe(point) + " is outside the grid");
        const double h = (hi - lo) / static_cast<double>(ax.size() - 1);
        double pos = std::clamp((point[j] - lo) / h, 0.0, static_cast<double>(ax.size() - 1));
        if (std::abs(pos - std::round(pos)) <= 1e-12 * (1.0 + pos))
            pos = std::round(pos);
        std::size_t i = static_cast<std::size_t>(std::floor(pos));
        i = std::min(i, ax.size() - 2);
        base[j] = i;
        frac[j] = std::clamp(pos - static_cast<double>(i), 0.0, 1.0);
    }

    constexpr double kWeightTol = 1e-12;
    double value = 0.0;
    for (int corner = 0; corner < (1 << d); ++corner) {
        double weight = 1.0;
        std::size_t flat = 0, stride = 1;
        for (int j = 0; j < d; ++j) {
            const bool upper = (corner >> j) & 1;
            weight *= upper ? frac[j] : 1.0 - frac[j];
            flat += (base[j] + (upper ? 1 : 0)) * stride;
            stride *= ref.axes[j].size();
        }
        if (weight <= kWeightTol)
            continue;
        if (!ref.valid[flat])
            throw ValidationError("resample point " + describe(point) + " touches a masked node");
        value += weight * ref.values[flat];
    }
    return value;
}

std::vector<double> resample(const GridSolution& ref, std::span<const Vec> points) {
    std::vector<double> out;
    out.reserve(points.size());
    for (const Vec& p : points)
        out.push_back(resample(ref, p));
    return out;
}

// ---------------------------------------------------------------------------
// CSV

void write_reference_csv(std::ostream& os, const GridSolution& ref) {
    ref.validate();
    if (ref.dim() > 2)
        throw ValidationError("reference CSV supports d = 1 or 2");
    os << "# ref d=" << ref.dim() << " nx=" << ref.axes[0].size();
    if (ref.dim() == 2)
        os << " ny=" << ref.axes[1].size();
    os << " T=" << format_double(ref.time_horizon) << '\n';
    const std::size_t ny = ref.dim() == 2 ? ref.axes[1].size() : 1;
    for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t i = 0; i < ref.axes[0].size(); ++i) {
            const std::size_t k = ref.index(i, j);
            os << format_double(ref.axes[0][i]);
            if (ref.dim() == 2)
                os << ',' << format_double(ref.axes[1][j]);
            os << ',' << (ref.valid[k] ? format_double(ref.values[k]) : std::string("nan")) << '\n';
        }
}

GridSolution read_reference_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("# ref", 0) != 0)
        throw ValidationError("reference CSV must start with '# ref d=... nx=... T=...'");
    int d = 0;
    std::size_t nx = 0, ny = 1;
    double horizon = 0.0;
    bool have_t = false;
    std::istringstream header(line.substr(5));
    std::string tok;
    while (header >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos)
            throw ValidationError("malformed reference header token '" + tok + "'");
        const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        try {
            if (key == "d") d = std::stoi(val);
            else if (key == "nx") nx = std::stoul(val);
            else if (key == "ny") ny = std::stoul(val);
            else if (key == "T") { horizon = std::stod(val); have_t = true; }
            else throw ValidationError("unknown reference header key '" + key + "'");
        } catch (const std::logic_error& e) {
            if (dynamic_cast<const ValidationError*>(&e))
                throw;
            throw ValidationError("bad value for reference header key '" + key + "'");
        }
    }
    if ((d != 1 && d != 2) || nx < 2 || (d == 2 && ny < 2) || !have_t)
        throw ValidationError("reference header needs d in {1,2}, nx, ny (d=2) and T");
    if (d == 1)
        ny = 1;

    GridSolution g;
    g.time_horizon = horizon;
    g.axes.assign(static_cast<std::size_t>(d), {});
    g.axes[0].resize(nx);
    if (d == 2)
        g.axes[1].resize(ny);
    g.values.resize(nx * ny);
    g.valid.resize(nx * ny);

    for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t i = 0; i < nx; ++i) {
            if (!std::getline(is, line))
                throw ValidationError("reference CSV ends early");
            std::istringstream row(line);
            std::string cell;
            std::vector<double> fields;
            while (std::getline(row, cell, ',')) {
                try {
                    fields.push_back(std::stod(cell));
                } catch (const std::logic_error&) {
                    throw ValidationError("unparsable reference value '" + cell + "'");
                }
            }
            if (fields.size() != static_cast<std::size_t>(d) + 1)
                throw ValidationError("reference row has wrong column count: '" + line + "'");
            if (j == 0)
                g.axes[0][i] = fields[0];
            if (d == 2 && i == 0)
                g.axes[1][j] = fields[1];
            const std::size_t k = g.index(i, j);
            g.values[k] = fields.back();
            g.valid[k] = std::isnan(fields.back()) ? 0 : 1;
        }
    g.validate();
    return g;
}

} // namespace aspinn
