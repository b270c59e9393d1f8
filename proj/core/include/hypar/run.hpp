#pragma once

#include <exception>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "hypar/scenario.hpp"

namespace hypar {

/// Process exit codes of a scenario run.
enum ExitCode : int {
    exit_ok = 0,
    exit_usage = 1,
    exit_config = 2,
    exit_domain = 3,
    exit_divergence = 4,
    exit_no_convergence = 5,  ///< Newton failure or bifurcation proximity
    exit_analysis = 6,        ///< resolution or comb-detection failure
    exit_internal = 7,        ///< I/O or unexpected error
};

[[nodiscard]] int exit_code_for(const std::exception& e) noexcept;

struct RunOptions {
    std::filesystem::path out_dir;  ///< empty: use the scenario's output key
    int threads = 0;
    std::function<void(std::string_view)> log;  ///< progress messages, may be empty
};

struct RunResult {
    int exit_code = exit_ok;
    std::string message;
    std::filesystem::path out_dir;
    std::vector<std::string> files;  ///< data files written, relative to out_dir
};

/// Runs the scenario and writes its data files, `scenario.yaml` (canonical
/// form) and `manifest.json` into the output directory. Errors are reported
/// through the exit code; a failed run still writes a manifest with status
/// "partial" listing what was written.
[[nodiscard]] RunResult run_scenario(const Scenario& scenario, const RunOptions& opts = {});

/// Scenario embedded in a manifest written by run_scenario.
[[nodiscard]] Scenario scenario_from_manifest(const std::filesystem::path& manifest);

/// SHA-256 of the canonical scenario text: equal hashes mean equal inputs.
[[nodiscard]] std::string scenario_hash(const Scenario& scenario);

[[nodiscard]] std::string_view library_version() noexcept;

}  // namespace hypar
