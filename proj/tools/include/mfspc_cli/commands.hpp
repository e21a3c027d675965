#pragma once

#include "mfspc_cli/config.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mfspc::cli {

enum ExitCode : int {
  kOk = 0,
  kValidation = 2,
  kIo = 3,
  kIllPosed = 4,
  kRuntime = 5,
};

/// Maps the exception in flight to an exit code and prints it to stderr.
int report_current_exception();

/// Writes Phase I observations to `out`, Phase II to `phase2` when
/// n_monitor > 0, and metadata to `out` + ".json".
void cmd_generate(const RunConfig& config, const std::filesystem::path& out,
                  const std::optional<std::filesystem::path>& phase2);

/// Runs the configured pipeline; writes trace.csv and summary.json into `out_dir`.
MonitorRun cmd_monitor(const RunConfig& config, const std::filesystem::path& phase1,
                       const std::filesystem::path& phase2, const std::filesystem::path& out_dir);

/// Monte Carlo ARL table: CSV at `out`, long-form JSON at `out` + ".json".
std::vector<StudyCell> cmd_arl(const RunConfig& config, const std::filesystem::path& out);

/// Renders a trace CSV as an SVG control chart.
void cmd_plot(const std::filesystem::path& trace, const std::filesystem::path& out);

/// Entry point shared by the executable and the tests.
int run(int argc, const char* const* argv);

}  // namespace mfspc::cli
