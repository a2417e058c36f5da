// commands.hpp — the batch entry points behind the CLI subcommands. Each one
// validates its configuration, runs the computation, and emits CSV data files
// plus a JSON manifest into the output directory.

#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <vector>

#include "sbm/run_config.hpp"

namespace sbm::cli {

struct CommandOptions {
    std::optional<std::filesystem::path> out_dir;  // overrides outputs.directory
    int threads = 1;
    std::optional<std::uint64_t> seed_override;
};

struct CommandResult {
    std::filesystem::path directory;
    std::vector<std::filesystem::path> files;  // data files, manifest last
    nlohmann::json manifest;
};

// System-environment QFI series (two-sided master equation) -> fisher_se.csv
CommandResult cmd_qfi(const RunConfig& config, const CommandOptions& options);

// Trajectory ensemble + estimators + condition-II diagnostics ->
// fisher_trajectories.csv, condition2.csv, optional per-trajectory records
CommandResult cmd_trajectories(const RunConfig& config, const CommandOptions& options);

// Exact enumeration over all counting records (tiny systems) -> oracle.json
CommandResult cmd_oracle(const RunConfig& config, const CommandOptions& options);

// Mean-field branch table over a lambda sweep + one flow -> branches.csv, flow.csv
CommandResult cmd_meanfield(const RunConfig& config, const CommandOptions& options);

// Saturating-class closure probe -> class_closure.json
CommandResult cmd_check_class(const RunConfig& config, const CommandOptions& options);

}  // namespace sbm::cli
