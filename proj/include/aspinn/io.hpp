#pragma once

#include "aspinn/core_model.hpp"
#include "aspinn/format.hpp"
#include "aspinn/problems.hpp"
#include "aspinn/trainer.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace aspinn {

inline constexpr std::string_view kVersion = "0.1.0";

/// Effective run configuration: training knobs plus output handling.
struct RunConfig {
    TrainConfig train;
    std::string out_dir = ".";
    std::optional<std::string> reference; // reference-grid CSV for L2
    bool export_solution = true;
    bool export_centers = true;
    bool export_params = true;
};

/// Parses a `key = value` document (`#` starts a comment). Each value is
/// checked as it is read; unknown keys are rejected by name.
RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Applies one key/value pair; shared by the config file and CLI flags.
void apply_config_key(RunConfig& cfg, std::string_view key, std::string_view value);

/// "4x2" -> {4, 2}.
std::vector<int> parse_node_grid(std::string_view text);
std::string format_node_grid(const std::vector<int>& counts);

/// "0.25" -> fraction, "50" -> count.
BatchSpec parse_batch(std::string_view text);

/// Writes via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

nlohmann::json params_to_json(const ModelParams& params);
ModelParams params_from_json(const nlohmann::json& j);

nlohmann::json ellipse_to_json(const Ellipse& e, double weight);
nlohmann::json centers_to_json(const ModelParams& params);
/// Ellipses back from a centers.json document.
std::vector<Ellipse> ellipses_from_json(const nlohmann::json& j);

nlohmann::json config_to_json(const RunConfig& cfg);
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json run_to_json(const RunConfig& cfg, const TrainReport& report);

/// `iter,train_loss,test_loss,l2_error`; columns without a value hold nan.
std::string loss_history_csv(const TrainReport& report);

struct LossHistoryRow {
    long iter = 0;
    double train_loss = 0.0;
    double test_loss = 0.0;
    double l2_error = 0.0;
};
std::vector<LossHistoryRow> parse_loss_history_csv(std::string_view text);

/// Model dump on the 101 x 101 evaluation grid: `x,y,u` or `x,t,u`.
std::string solution_csv(const ModelParams& params, const PdeProblem& problem, int n = 101);

/// Writes loss_history.csv, solution.csv, centers.json, params.json, run.json.
void write_run_artifacts(const std::filesystem::path& dir, const RunConfig& cfg,
                         const TrainReport& report);

/// Recomputes the final L2 error from run.json and params.json alone.
L2Result reproduce_l2(const std::filesystem::path& run_dir);

} // namespace aspinn
