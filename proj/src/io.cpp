#include "aspinn/io.hpp"

#include <Eigen/Core>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace aspinn {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

double parse_double(std::string_view key, std::string_view value) {
    const std::string v = trim(value);
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used == v.size())
            return d;
    } catch (const std::logic_error&) {
    }
    throw ValidationError("invalid number '" + v + "' for " + std::string(key));
}

long parse_long(std::string_view key, std::string_view value) {
    const std::string v = trim(value);
    long out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw ValidationError("invalid integer '" + v + "' for " + std::string(key));
    return out;
}

std::size_t parse_count(std::string_view key, std::string_view value) {
    const long n = parse_long(key, value);
    if (n < 1)
        throw ValidationError(std::string(key) + " must be at least 1");
    return static_cast<std::size_t>(n);
}

bool parse_bool(std::string_view key, std::string_view value) {
    const std::string v = trim(value);
    if (v == "true" || v == "1" || v == "yes" || v == "on")
        return true;
    if (v == "false" || v == "0" || v == "no" || v == "off")
        return false;
    throw ValidationError("invalid boolean '" + v + "' for " + std::string(key));
}

json vec_to_json(const Vec& v) {
    json a = json::array();
    for (int j = 0; j < v.size(); ++j)
        a.push_back(v[j]);
    return a;
}

Vec vec_from_json(const json& a) {
    if (!a.is_array() || a.empty() || a.size() > static_cast<std::size_t>(kMaxDim))
        throw ValidationError("expected a coordinate array of length 1..3");
    Vec v(static_cast<int>(a.size()));
    for (std::size_t j = 0; j < a.size(); ++j)
        v[static_cast<int>(j)] = a[j].get<double>();
    return v;
}

// nlohmann has no NaN; absent metrics are stored as null.
json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

} // namespace

// ---------------------------------------------------------------------------
// Config

std::vector<int> parse_node_grid(std::string_view text) {
    std::vector<int> counts;
    std::string t = trim(text);
    std::size_t start = 0;
    while (true) {
        const auto x = t.find_first_of("xX", start);
        const std::string part = t.substr(start, x == std::string::npos ? std::string::npos : x - start);
        const long n = parse_long("--nodes", part);
        if (n < 1)
            throw ValidationError("--nodes counts must be at least 1");
        counts.push_back(static_cast<int>(n));
        if (x == std::string::npos)
            break;
        start = x + 1;
    }
    if (counts.size() > static_cast<std::size_t>(kMaxDim))
        throw ValidationError("--nodes supports at most 3 dimensions");
    return counts;
}

std::string format_node_grid(const std::vector<int>& counts) {
    std::string s;
    for (std::size_t j = 0; j < counts.size(); ++j)
        s += (j ? "x" : "") + std::to_string(counts[j]);
    return s;
}

BatchSpec parse_batch(std::string_view text) {
    const std::string t = trim(text);
    BatchSpec spec;
    long n = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), n);
    if (ec == std::errc() && ptr == t.data() + t.size()) {
        if (n < 1)
            throw ValidationError("--batch count must be at least 1");
        spec.count = static_cast<std::size_t>(n);
        return spec;
    }
    spec.fraction = parse_double("--batch", t);
    if (!(spec.fraction > 0.0) || spec.fraction > 1.0)
        throw ValidationError("--batch fraction must lie in (0, 1]");
    return spec;
}

void apply_config_key(RunConfig& cfg, std::string_view key_in, std::string_view value) {
    std::string key = trim(key_in);
    for (char& c : key)
        if (c == '-')
            c = '_';
    TrainConfig& t = cfg.train;
    auto positive = [&](double v) {
        if (!(v > 0.0))
            throw ValidationError(key + " must be positive");
        return v;
    };
    auto unit_open = [&](double v) {
        if (!(v > 0.0 && v < 1.0))
            throw ValidationError(key + " must lie in (0, 1)");
        return v;
    };

    if (key == "problem") {
        t.problem = trim(value);
        make_problem(t.problem);
    } else if (key == "nodes") t.nodes = parse_node_grid(value);
    else if (key == "samples") t.samples = parse_count(key, value);
    else if (key == "boundary_samples") t.boundary_samples = parse_count(key, value);
    else if (key == "test_samples") t.test_samples = parse_count(key, value);
    else if (key == "boundary_test_samples") t.boundary_test_samples = parse_count(key, value);
    else if (key == "batch") t.batch = parse_batch(value);
    else if (key == "batch_boundary") t.batch_boundary = parse_bool(key, value);
    else if (key == "alpha") t.alpha = positive(parse_double(key, value));
    else if (key == "lr") t.lr = positive(parse_double(key, value));
    else if (key == "beta1") t.beta1 = unit_open(parse_double(key, value));
    else if (key == "beta2") t.beta2 = unit_open(parse_double(key, value));
    else if (key == "eps") t.eps = positive(parse_double(key, value));
    else if (key == "iters" || key == "iterations") {
        t.iterations = parse_long(key, value);
        if (t.iterations < 1)
            throw ValidationError("iters must be at least 1");
    } else if (key == "seed") {
        const long s = parse_long(key, value);
        if (s < 0)
            throw ValidationError("seed must be non-negative");
        t.seed = static_cast<std::uint64_t>(s);
    } else if (key == "scale_s") t.scale = positive(parse_double(key, value));
    else if (key == "eval_every") t.eval_every = static_cast<long>(parse_count(key, value));
    else if (key == "isotropic") t.isotropic = parse_bool(key, value);
    else if (key == "tip_mask_radius") {
        t.tip_mask_radius = parse_double(key, value);
        if (t.tip_mask_radius < 0.0)
            throw ValidationError("tip_mask_radius must be non-negative");
    } else if (key == "reference_resolution") {
        const long n = parse_long(key, value);
        if (n < 17 || n % 2 == 0)
            throw ValidationError("reference_resolution must be odd and >= 17");
        t.reference_resolution = static_cast<int>(n);
    } else if (key == "out") cfg.out_dir = trim(value);
    else if (key == "reference") cfg.reference = trim(value);
    else if (key == "export_solution") cfg.export_solution = parse_bool(key, value);
    else if (key == "export_centers") cfg.export_centers = parse_bool(key, value);
    else if (key == "export_params") cfg.export_params = parse_bool(key, value);
    else
        throw ValidationError("unknown config key '" + std::string(trim(key_in)) + "'");
}

RunConfig parse_run_config(std::string_view text) {
    RunConfig cfg;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        if (trim(line).empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config line " + std::to_string(lineno) + " is not 'key = value'");
        apply_config_key(cfg, line.substr(0, eq), line.substr(eq + 1));
    }
    return cfg;
}

RunConfig load_run_config(const fs::path& path) { return parse_run_config(read_file(path)); }

// ---------------------------------------------------------------------------
// Files

void write_file_atomic(const fs::path& path, std::string_view contents) {
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out)
            throw std::runtime_error("failed writing " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ValidationError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------
// JSON

json params_to_json(const ModelParams& params) {
    const int d = params.dim();
    json nodes = json::array();
    for (const Node& n : params.nodes) {
        json f = json::array();
        for (double e : n.factor.entries())
            f.push_back(e);
        nodes.push_back({{"weight", n.weight}, {"center", vec_to_json(n.center)}, {"factor", f}});
    }
    std::vector<std::string> layout{"weight"};
    for (int j = 0; j < d; ++j)
        layout.push_back("center[" + std::to_string(j) + "]");
    for (int j = 0; j < d; ++j)
        for (int k = 0; k <= j; ++k)
            layout.push_back("factor[" + std::to_string(j) + "][" + std::to_string(k) + "]");
    return {{"format", "aspinn-params"},
            {"version", kVersion},
            {"dim", d},
            {"node_count", params.nodes.size()},
            {"scale_s", params.scale},
            {"kernel", "gaussian"},
            {"ordering", "per node in index order; factor entries are the lower triangle, row-major"},
            {"per_node_layout", layout},
            {"nodes", nodes},
            {"flat", flatten(params)}};
}

ModelParams params_from_json(const json& j) {
    try {
        if (j.value("kernel", "gaussian") != "gaussian")
            throw ValidationError("unsupported kernel '" + j.value("kernel", "") + "'");
        ModelParams p;
        p.scale = j.at("scale_s").get<double>();
        const int d = j.at("dim").get<int>();
        for (const json& n : j.at("nodes")) {
            Node node;
            node.weight = n.at("weight").get<double>();
            node.center = vec_from_json(n.at("center"));
            const auto f = n.at("factor").get<std::vector<double>>();
            node.factor = LogCholeskyFactor(d, f);
            p.nodes.push_back(std::move(node));
        }
        p.validate();
        if (p.dim() != d)
            throw ValidationError("params.json dim does not match node centers");
        if (j.contains("flat")) {
            const auto flat = j.at("flat").get<std::vector<double>>();
            if (flat != flatten(p))
                throw ValidationError("params.json 'flat' disagrees with 'nodes'");
        }
        return p;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed params.json: ") + e.what());
    }
}

json ellipse_to_json(const Ellipse& e, double weight) {
    json axes = json::array();
    for (int c = 0; c < e.axes.cols(); ++c)
        axes.push_back(vec_to_json(e.axes.col(c)));
    return {{"center", vec_to_json(e.center)},
            {"weight", weight},
            {"semi_axes", vec_to_json(e.semi_axes)},
            {"axes", axes}};
}

json centers_to_json(const ModelParams& params) {
    json out = json::array();
    for (const Node& n : params.nodes)
        out.push_back(ellipse_to_json(zone_of_influence(n, params.scale), n.weight));
    return out;
}

std::vector<Ellipse> ellipses_from_json(const json& j) {
    try {
        std::vector<Ellipse> out;
        for (const json& item : j) {
            Ellipse e;
            e.center = vec_from_json(item.at("center"));
            e.semi_axes = vec_from_json(item.at("semi_axes"));
            const json& axes = item.at("axes");
            const int d = static_cast<int>(e.center.size());
            if (e.semi_axes.size() != d || axes.size() != static_cast<std::size_t>(d))
                throw ValidationError("centers.json entry has inconsistent dimensions");
            e.axes.resize(d, d);
            for (int c = 0; c < d; ++c)
                e.axes.col(c) = vec_from_json(axes[static_cast<std::size_t>(c)]);
            out.push_back(std::move(e));
        }
        return out;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed centers.json: ") + e.what());
    }
}

json config_to_json(const RunConfig& cfg) {
    const TrainConfig& t = cfg.train;
    json batch = t.batch.count ? json(*t.batch.count) : json(t.batch.fraction);
    json j = {{"problem", t.problem},
              {"nodes", format_node_grid(t.nodes)},
              {"samples", t.samples},
              {"boundary_samples", t.resolved_boundary_samples()},
              {"test_samples", t.resolved_counts().interior_test},
              {"boundary_test_samples", t.resolved_counts().boundary_test},
              {"batch", batch},
              {"batch_size", t.batch.resolve(t.samples)},
              {"batch_boundary", t.batch_boundary},
              {"alpha", t.resolved_alpha()},
              {"lr", t.lr},
              {"beta1", t.beta1},
              {"beta2", t.beta2},
              {"eps", t.eps},
              {"iters", t.iterations},
              {"seed", t.seed},
              {"scale_s", t.scale},
              {"eval_every", t.eval_every},
              {"isotropic", t.isotropic},
              {"tip_mask_radius", t.tip_mask_radius},
              {"reference_resolution", t.reference_resolution},
              {"out", cfg.out_dir},
              {"export_solution", cfg.export_solution},
              {"export_centers", cfg.export_centers},
              {"export_params", cfg.export_params}};
    j["reference"] = cfg.reference ? json(*cfg.reference) : json(nullptr);
    return j;
}

RunConfig config_from_json(const json& j) {
    RunConfig cfg;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "batch_size" || value.is_null())
                continue;
            if (value.is_string())
                apply_config_key(cfg, key, value.get<std::string>());
            else if (value.is_number_float()) {
                std::string text = format_double(value.get<double>());
                if (text.find_first_of(".en") == std::string::npos)
                    text += ".0"; // keep fractions such as batch = 1.0 distinct from counts
                apply_config_key(cfg, key, text);
            }
            else
                apply_config_key(cfg, key, value.dump());
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed run config: ") + e.what());
    }
    return cfg;
}

json run_to_json(const RunConfig& cfg, const TrainReport& report) {
    json final_metrics = json::object();
    if (!report.loss_history.empty())
        final_metrics["train_loss"] = number_or_null(report.loss_history.back());
    if (!report.evals.empty()) {
        final_metrics["iteration"] = report.evals.back().iteration;
        final_metrics["test_loss"] = number_or_null(report.evals.back().test_loss);
        final_metrics["l2_error"] = number_or_null(report.evals.back().l2);
    }
    return {{"tool", "aspinn"},
            {"version", kVersion},
            {"eigen_version", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                  std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                  std::to_string(EIGEN_MINOR_VERSION)},
            {"config", config_to_json(cfg)},
            {"seed", cfg.train.seed},
            {"l2_kind", report.l2_absolute ? "absolute-rms" : "relative"},
            {"status", report.failed ? "numerical-failure" : "ok"},
            {"failure", report.failure},
            {"clamp_reported", report.clamp_reported},
            {"warnings", report.warnings},
            {"wall_seconds", report.wall_seconds},
            {"final", final_metrics}};
}

// ---------------------------------------------------------------------------
// CSV

std::string loss_history_csv(const TrainReport& report) {
    std::string out = "iter,train_loss,test_loss,l2_error\n";
    std::size_t e = 0;
    for (std::size_t k = 0; k < report.loss_history.size(); ++k) {
        const long iter = static_cast<long>(k) + 1;
        double test = std::nan(""), l2 = std::nan("");
        if (e < report.evals.size() && report.evals[e].iteration == iter) {
            test = report.evals[e].test_loss;
            l2 = report.evals[e].l2;
            ++e;
        }
        out += std::to_string(iter) + ',' + format_double(report.loss_history[k]) + ',' +
               format_double(test) + ',' + format_double(l2) + '\n';
    }
    return out;
}

std::vector<LossHistoryRow> parse_loss_history_csv(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line) || trim(line) != "iter,train_loss,test_loss,l2_error")
        throw ValidationError("loss_history.csv has an unexpected header");
    std::vector<LossHistoryRow> rows;
    while (std::getline(in, line)) {
        if (trim(line).empty())
            continue;
        std::istringstream row(line);
        std::string cells[4];
        for (auto& c : cells)
            if (!std::getline(row, c, ','))
                throw ValidationError("loss_history.csv row has too few columns");
        rows.push_back({parse_long("iter", cells[0]), parse_double("train_loss", cells[1]),
                        parse_double("test_loss", cells[2]), parse_double("l2_error", cells[3])});
    }
    return rows;
}

std::string solution_csv(const ModelParams& params, const PdeProblem& problem, int n) {
    const DomainSpec& dom = problem.domain;
    if (dom.dim() != 2)
        throw ValidationError("solution export supports two-dimensional domains");
    const bool spacetime = dom.kind == DomainKind::spacetime_strip;
    std::string out = spacetime ? "x,t,u\n" : "x,y,u\n";
    const auto xs = uniform_axis(dom.bounds[0].lo, dom.bounds[0].hi, static_cast<std::size_t>(n));
    const auto ys = uniform_axis(dom.bounds[1].lo, dom.bounds[1].hi, static_cast<std::size_t>(n));
    for (double y : ys)
        for (double x : xs) {
            Vec p(2);
            p << x, y;
            const double u = dom.on_slit(p) ? std::nan("") : eval(params, p);
            out += format_double(x) + ',' + format_double(y) + ',' + format_double(u) + '\n';
        }
    return out;
}

void write_run_artifacts(const fs::path& dir, const RunConfig& cfg, const TrainReport& report) {
    fs::create_directories(dir);
    const PdeProblem problem = make_problem(cfg.train.problem);
    write_file_atomic(dir / "loss_history.csv", loss_history_csv(report));
    if (cfg.export_solution)
        write_file_atomic(dir / "solution.csv", solution_csv(report.final_params, problem));
    if (cfg.export_centers)
        write_file_atomic(dir / "centers.json", centers_to_json(report.final_params).dump(2) + "\n");
    if (cfg.export_params)
        write_file_atomic(dir / "params.json", params_to_json(report.final_params).dump(2) + "\n");
    write_file_atomic(dir / "run.json", run_to_json(cfg, report).dump(2) + "\n");
}

L2Result reproduce_l2(const fs::path& run_dir) {
    const json run = json::parse(read_file(run_dir / "run.json"));
    const RunConfig cfg = config_from_json(run.at("config"));
    const ModelParams params = params_from_json(json::parse(read_file(run_dir / "params.json")));
    const PdeProblem problem = make_problem(cfg.train.problem);
    std::shared_ptr<const GridSolution> ref;
    if (cfg.reference) {
        std::istringstream in(read_file(*cfg.reference));
        ref = std::make_shared<GridSolution>(read_reference_csv(in));
    }
    return l2_error(params, problem_eval_grid(problem, cfg.train, ref.get()));
}

} // namespace aspinn
