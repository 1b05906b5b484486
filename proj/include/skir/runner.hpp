#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "skir/config.hpp"

namespace skir {

/// Process exit codes of the experiment runner.
enum ExitCode : int { exit_success = 0, exit_failure = 1, exit_config_error = 2, exit_not_converged = 3 };

struct RunReport {
    std::string json;                                // contents of report.json
    std::vector<std::filesystem::path> manifest;     // every file written, report included
    int exit_code = exit_success;
    bool mc_ran = false;
    double mc_sup_gap = 0.0;
};

/// Runs one experiment and writes its CSVs, the resolved config and report.json
/// into config.output_dir. Solver failures are recorded in the report and
/// reflected in the exit code instead of being thrown.
RunReport run(const ExperimentConfig& config);

}  // namespace skir
