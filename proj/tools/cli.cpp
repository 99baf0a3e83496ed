#include "cli.hpp"

#include "aspinn/io.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <utility>

namespace aspinn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<double> parse_slices(const std::string& text) {
    std::vector<double> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            std::size_t used = 0;
            const double t = std::stod(item, &used);
            if (used != item.size() || !std::isfinite(t))
                throw std::invalid_argument(item);
            out.push_back(t);
        } catch (const std::exception&) {
            throw ValidationError("--slices expects comma-separated times, got '" + item + "'");
        }
    }
    if (out.empty())
        throw ValidationError("--slices is empty");
    return out;
}

std::shared_ptr<const GridSolution> load_reference(const std::string& path) {
    std::istringstream in(read_file(path));
    return std::make_shared<GridSolution>(read_reference_csv(in));
}

struct LoadedRun {
    RunConfig config;
    ModelParams params;
};

LoadedRun load_run(const fs::path& dir) {
    if (!fs::is_directory(dir))
        throw ValidationError("run directory '" + dir.string() + "' does not exist");
    LoadedRun run;
    try {
        const json meta = json::parse(read_file(dir / "run.json"));
        run.config = config_from_json(meta.at("config"));
        run.params = params_from_json(json::parse(read_file(dir / "params.json")));
    } catch (const json::exception& e) {
        throw ValidationError("cannot read run in '" + dir.string() + "': " + e.what());
    }
    return run;
}

// ---------------------------------------------------------------------------

struct SolveFlags {
    std::optional<std::string> config;
    std::vector<std::pair<std::string, std::string>> keys; // in command-line order
    bool isotropic = false;
    long progress = 0;
};

int cmd_solve(const SolveFlags& flags) {
    RunConfig cfg;
    if (flags.config)
        cfg = load_run_config(*flags.config);
    for (const auto& [key, value] : flags.keys)
        apply_config_key(cfg, key, value);
    if (flags.isotropic)
        cfg.train.isotropic = true;
    fill_problem_defaults(cfg.train);
    const std::vector<std::string> warnings = cfg.train.validate();
    for (const std::string& w : warnings)
        std::cerr << "warning: " << w << "\n";

    TrainOptions options;
    options.progress_every = flags.progress;
    if (cfg.reference) {
        cfg.reference = fs::absolute(*cfg.reference).string();
        options.reference = load_reference(*cfg.reference);
    }
    const fs::path out = cfg.out_dir;
    fs::create_directories(out);

    const TrainReport report = train(cfg.train, options);
    write_run_artifacts(out, cfg, report);
    if (report.failed) {
        std::cerr << "error: " << report.failure << "\n";
        return kExitNumerical;
    }
    if (!report.evals.empty())
        std::cout << "final l2_error " << format_double(report.evals.back().l2) << "\n";
    return kExitOk;
}

int cmd_export_centers(const std::string& params_path, const std::string& out) {
    ModelParams params;
    try {
        params = params_from_json(json::parse(read_file(params_path)));
    } catch (const json::exception& e) {
        throw ValidationError("cannot read parameters: " + std::string(e.what()));
    }
    fs::path target = out;
    if (fs::is_directory(target))
        target /= "centers.json";
    write_file_atomic(target, centers_to_json(params).dump(2) + "\n");
    return kExitOk;
}

struct CompareFlags {
    std::string run;
    std::optional<std::string> against;
    std::optional<std::string> reference;
    std::optional<std::string> slices;
    std::string out = ".";
};

int cmd_compare(const CompareFlags& flags) {
    if (flags.against && flags.reference)
        throw ValidationError("--against and --reference are mutually exclusive");
    const LoadedRun a = load_run(flags.run);
    const PdeProblem problem = make_problem(a.config.train.problem);
    const DomainSpec& domain = problem.domain;
    std::optional<std::vector<double>> slices;
    if (flags.slices)
        slices = parse_slices(*flags.slices);

    std::optional<LoadedRun> b;
    std::shared_ptr<const GridSolution> ref;
    double tip = 0.0;
    if (flags.against) {
        b = load_run(*flags.against);
        if (b->params.dim() != a.params.dim())
            throw ValidationError("runs have different dimensions (" +
                                  std::to_string(a.params.dim()) + " vs " +
                                  std::to_string(b->params.dim()) + ")");
        if (b->config.train.problem != a.config.train.problem)
            throw ValidationError("runs solve different problems (" + a.config.train.problem +
                                  " vs " + b->config.train.problem + ")");
    } else {
        tip = a.config.train.tip_mask_radius;
        if (flags.reference)
            ref = load_reference(*flags.reference);
        else if (!problem.exact)
            ref = builtin_reference(problem, a.config.train.reference_resolution);
        if (ref && ref->dim() != a.params.dim())
            throw ValidationError("reference has dimension " + std::to_string(ref->dim()) +
                                  ", run has " + std::to_string(a.params.dim()));
    }

    ScalarField truth;
    if (b)
        truth = [&](const Vec& p) { return eval(b->params, p); };
    else if (!ref)
        truth = problem.exact;

    auto grid = [&] {
        return truth ? make_eval_grid(domain, truth, 101, tip) : make_eval_grid(domain, *ref, 101, tip);
    };
    auto slice = [&](double t) {
        return truth ? make_slice_grid(domain, t, truth) : make_slice_grid(domain, t, *ref);
    };

    std::ostringstream csv;
    csv << "kind,t,l2_error\n";
    csv << "grid,nan," << format_double(l2_error(a.params, grid()).value) << "\n";
    if (slices) {
        for (double t : *slices)
            csv << "slice," << format_double(t) << ","
                << format_double(l2_error(a.params, slice(t)).value) << "\n";
    }
    fs::path target = flags.out;
    fs::create_directories(target);
    write_file_atomic(target / "comparison.csv", csv.str());
    std::cout << csv.str();
    return kExitOk;
}

} // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"Anisotropic sparse kernel networks for PDEs"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    SolveFlags solve;
    CLI::App* solve_cmd = app.add_subcommand("solve", "Train a model and write run artifacts");
    solve_cmd->add_option("--config", solve.config, "key = value configuration file");
    const std::vector<std::pair<std::string, std::string>> keyed = {
        {"--problem", "problem name"},
        {"--nodes", "node grid such as 4x2"},
        {"--samples", "interior training samples M"},
        {"--boundary-samples", "boundary training samples"},
        {"--test-samples", "interior test samples"},
        {"--boundary-test-samples", "boundary test samples"},
        {"--batch", "batch size (count) or fraction of M"},
        {"--alpha", "boundary loss weight"},
        {"--lr", "Adam learning rate"},
        {"--iters", "optimizer steps"},
        {"--seed", "random seed"},
        {"--scale-s", "log-Cholesky diagonal scale"},
        {"--eval-every", "steps between test evaluations"},
        {"--out", "output directory"},
        {"--reference", "reference grid CSV for the L2 error"},
    };
    for (const auto& [flag, help] : keyed) {
        const std::string key = flag.substr(2);
        solve_cmd->add_option_function<std::string>(
            flag, [&solve, key](const std::string& v) { solve.keys.emplace_back(key, v); }, help);
    }
    solve_cmd->add_flag("--isotropic", solve.isotropic, "tie zones of influence to h I");
    solve_cmd->add_option("--progress", solve.progress, "print progress every N steps");

    std::string params_path, centers_out = "centers.json";
    CLI::App* export_cmd =
        app.add_subcommand("export-centers", "Write node ellipses from a params.json");
    export_cmd->add_option("params", params_path, "params.json")->required();
    export_cmd->add_option("--out", centers_out, "output file or directory");

    CompareFlags compare;
    CLI::App* compare_cmd = app.add_subcommand("compare", "Relative L2 between runs or vs a reference");
    compare_cmd->add_option("--run", compare.run, "run directory")->required();
    compare_cmd->add_option("--against", compare.against, "second run directory");
    compare_cmd->add_option("--reference", compare.reference, "reference grid CSV");
    compare_cmd->add_option("--slices", compare.slices, "comma-separated times t1,t2,...");
    compare_cmd->add_option("--out", compare.out, "output directory");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (*solve_cmd)
            return cmd_solve(solve);
        if (*export_cmd)
            return cmd_export_centers(params_path, centers_out);
        return cmd_compare(compare);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace aspinn::cli
