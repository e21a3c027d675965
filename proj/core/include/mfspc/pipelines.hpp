#pragma once

#include "mfspc/embedding.hpp"
#include "mfspc/manifold_fit.hpp"
#include "mfspc/point_cloud.hpp"
#include "mfspc/prewhiten.hpp"
#include "mfspc/processes.hpp"
#include "mfspc/rankcharts.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace mfspc {

/// Consecutive, disjoint Phase I segments: manifold fit/learn, AR fit, chart
/// reference.
struct SplitPlan {
  Index m_fit = 700;
  Index m_ar = 400;
  Index m_chart = 100;

  Index total() const noexcept { return m_fit + m_ar + m_chart; }
  /// Throws InvalidArgument unless every part is positive and the parts add
  /// up to `phase1_length`.
  void validate(Index phase1_length) const;
};

struct ArConfig {
  std::optional<int> order;  ///< fixed order; empty selects by AIC
  int max_order = 10;        ///< AIC search cap
  bool prewhiten = true;     ///< false feeds raw values to the chart

  void validate() const;
};

/// Stable 64-bit seed for stream `a`, sub-stream `b` of a base seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

/// Produces Phase II observations on demand; empty when exhausted.
using ObservationSource = std::function<std::optional<Vector>()>;
ObservationSource rows_source(RowMatrix rows);

struct MonitorRun {
  Index run_length = 0;   ///< step of the first alarm, or the number of steps seen
  bool censored = false;  ///< no alarm before the horizon or the end of the stream
  std::vector<ChartPoint> trace;
};

/// Streaming Phase II state: maps one observation to a chart step.
class Monitor {
 public:
  virtual ~Monitor() = default;
  virtual ChartPoint observe(const Vector& y) = 0;
};

/// Runs until the first alarm, the horizon, or the end of the source.
MonitorRun run_monitor(Monitor& monitor, const ObservationSource& source, Index horizon);

/// Frozen Phase I state of the manifold-fitting pipeline. Immutable; any
/// number of monitors can be started from one instance.
class MfPhaseOne {
 public:
  /// `phase1` must hold exactly split.total() rows.
  static MfPhaseOne fit(const RowMatrix& phase1, const SplitPlan& split, const FitConfig& fit,
                        const ArConfig& ar, std::optional<double> sigma = std::nullopt);

  std::unique_ptr<Monitor> start(const ChartConfig& chart) const;

  const FittedManifold& manifold() const noexcept { return fit_->manifold; }
  const std::optional<NoiseEstimate>& noise() const noexcept { return fit_->noise; }
  const ARModel& ar_model() const noexcept { return filter_.model(); }
  /// Filtered deviations of the chart segment.
  const std::vector<double>& reference() const noexcept { return reference_; }
  bool prewhitened() const noexcept { return prewhiten_; }

 private:
  MfPhaseOne(std::shared_ptr<const ManifoldFit> fit, ARFilter filter, std::vector<double> ref,
             bool prewhiten)
      : fit_(std::move(fit)), filter_(std::move(filter)), reference_(std::move(ref)),
        prewhiten_(prewhiten) {}

  std::shared_ptr<const ManifoldFit> fit_;
  ARFilter filter_;  // state after the chart segment
  std::vector<double> reference_;
  bool prewhiten_;
};

/// Frozen Phase I state of the manifold-learning pipeline.
class MlPhaseOne {
 public:
  static MlPhaseOne fit(const RowMatrix& phase1, const SplitPlan& split,
                        const EmbeddingConfig& embedding, const ArConfig& ar);

  std::unique_ptr<Monitor> start(const ChartConfig& chart) const;

  const EmbeddingMap& map() const noexcept { return *map_; }
  const std::vector<ARFilter>& filters() const noexcept { return filters_; }
  const RowMatrix& reference() const noexcept { return reference_; }
  bool prewhitened() const noexcept { return prewhiten_; }

 private:
  MlPhaseOne(std::shared_ptr<const EmbeddingMap> map, std::vector<ARFilter> filters,
             RowMatrix ref, bool prewhiten)
      : map_(std::move(map)), filters_(std::move(filters)), reference_(std::move(ref)),
        prewhiten_(prewhiten) {}

  std::shared_ptr<const EmbeddingMap> map_;
  std::vector<ARFilter> filters_;
  RowMatrix reference_;
  bool prewhiten_;
};

MonitorRun run_mf_pipeline(const RowMatrix& phase1, const ObservationSource& phase2,
                           const SplitPlan& split, const FitConfig& fit, const ArConfig& ar,
                           const ChartConfig& chart, Index horizon,
                           std::optional<double> sigma = std::nullopt);

/// Throws IllPosed when split.m_fit does not exceed the dimension.
MonitorRun run_ml_pipeline(const RowMatrix& phase1, const ObservationSource& phase2,
                           const SplitPlan& split, const EmbeddingConfig& embedding,
                           const ArConfig& ar, const ChartConfig& chart, Index horizon);

struct ArlSummary {
  double arl = 0.0;
  double sdrl = 0.0;  ///< sample standard deviation; 0 for a single replication
  Index censored = 0;
  std::vector<Index> run_lengths;  ///< censored runs count at their horizon
};

ArlSummary summarize_run_lengths(const std::vector<MonitorRun>& runs);

/// Runs `replications` independent replications; replication r receives seed
/// base_seed + r. Results do not depend on `threads`.
using RunFactory = std::function<MonitorRun(std::uint64_t seed)>;
ArlSummary estimate_arl(const RunFactory& factory, Index replications, std::uint64_t base_seed,
                        int threads = 1);

/// Applies `fn(r)` for r in [0, count) on up to `threads` workers.
void parallel_for(Index count, int threads, const std::function<void(Index)>& fn);

/// Default worker count: MFSPC_THREADS when set, else hardware concurrency.
int default_threads();

enum class PipelineMethod { MF, PCA, LPP, NPE };
std::string_view pipeline_method_name(PipelineMethod method);
/// Accepts "mf", "pca", "lpp", "npe" (any case).
std::optional<PipelineMethod> parse_pipeline_method(std::string_view name);

/// A Phase II regime: a shift of `delta_sigma * sigma` along the 1-based
/// coordinate `dim` from the first Phase II observation on (dim 0: in control).
struct Scenario {
  std::string name;
  Index dim = 0;
  double delta_sigma = 0.0;
};

/// Monte Carlo comparison on the sphere process. Each replication simulates
/// one Phase I sample shared by every method and one Phase II noise path
/// shared by every scenario.
struct SphereStudy {
  SphereConfig process;  ///< `n` and `seed` are ignored
  SplitPlan split;
  FitConfig fit;
  std::optional<double> sigma;  ///< known noise level for MF; empty estimates it
  EmbeddingConfig embedding;
  ArConfig ar;
  ChartConfig chart;  ///< `seed` is replaced per replication
  Index horizon = 1000;
  std::vector<Scenario> scenarios;
  std::vector<PipelineMethod> methods;
  Index replications = 100;
  std::uint64_t seed = 1;
  int threads = 1;

  void validate() const;
};

struct StudyCell {
  std::string scenario;
  PipelineMethod method;
  ArlSummary summary;
};

/// One cell per (scenario, method), scenario-major.
std::vector<StudyCell> run_sphere_study(const SphereStudy& study);

}  // namespace mfspc
