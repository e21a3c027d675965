#pragma once

#include "mfspc/embedding.hpp"
#include "mfspc/errors.hpp"
#include "mfspc/manifold_fit.hpp"
#include "mfspc/pipelines.hpp"
#include "mfspc/processes.hpp"
#include "mfspc/rankcharts.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mfspc::cli {

/// Schema violation in a run configuration. The message names the field.
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// A file could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

struct ShiftConfig {
  Index dim = 1;             ///< 1-based coordinate
  double delta_sigma = 0.0;  ///< shift size in units of process.sigma
  Index tau = 1;             ///< 1-based Phase II index of the first shifted observation
};

/// Everything a command needs, parsed from one JSON document. Every section
/// and field is optional; unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 1;

  SphereConfig process{.d = 2, .D = 6};  ///< `n` and `seed` are set per command
  std::optional<Index> n_phase1;  ///< defaults to split total
  Index n_monitor = 0;

  std::optional<ShiftConfig> shift;
  SplitPlan split;
  PipelineMethod method = PipelineMethod::MF;

  FitConfig fit;
  std::optional<double> sigma;  ///< known noise level; empty estimates it

  EmbeddingConfig embedding;
  ArConfig ar;
  ChartConfig chart;  ///< `seed` derived from the top-level seed
  Index horizon = 1000;

  Index replications = 100;
  int threads = 0;  ///< 0: MFSPC_THREADS or hardware concurrency
  std::vector<PipelineMethod> arl_methods{PipelineMethod::MF, PipelineMethod::NPE,
                                          PipelineMethod::LPP, PipelineMethod::PCA};
  std::vector<Scenario> scenarios;

  Index phase1_length() const { return n_phase1.value_or(split.total()); }
  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// The scenarios of the sphere comparison table: in control, then shifts of
/// 3 and 10 sigma on coordinates 1 and 4.
std::vector<Scenario> default_scenarios();

RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);
/// Fully resolved configuration, suitable for echoing into outputs.
nlohmann::json to_json(const RunConfig& config);

}  // namespace mfspc::cli
