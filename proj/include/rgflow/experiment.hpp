#pragma once

#include "rgflow/config.hpp"
#include "rgflow/report.hpp"

#include <optional>
#include <string>

namespace rgflow {

inline constexpr const char* kVersion = "rgflow 0.1.0";

/// Runs the configured checks in dependency order (schedules and spectra
/// before the margins that use them). A module error is recorded on the
/// owning check, as a fail row or, for non-convergence, an unconverged row,
/// and the remaining checks still run. Output depends only on the config.
RunReport run_experiment(const ExperimentConfig& config);

/// Loads a config file, applying an optional seed override to both the
/// parsed config and its echo.
ExperimentConfig load_config_with_seed(const std::string& path, std::optional<long> seed);

}  // namespace rgflow
