#include "mfspc/pipelines.hpp"

#include "mfspc/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <random>
#include <thread>

namespace mfspc {

void SplitPlan::validate(Index phase1_length) const {
  if (m_fit < 1) throw InvalidArgument("SplitPlan.m_fit: must be positive");
  if (m_ar < 1) throw InvalidArgument("SplitPlan.m_ar: must be positive");
  if (m_chart < 1) throw InvalidArgument("SplitPlan.m_chart: must be positive");
  if (total() != phase1_length) {
    throw InvalidArgument("SplitPlan: m_fit + m_ar + m_chart = " + std::to_string(total()) +
                          " but Phase I has " + std::to_string(phase1_length) + " observations");
  }
}

void ArConfig::validate() const {
  if (order && *order < 0) throw InvalidArgument("ArConfig.order: must be >= 0");
  if (max_order < 0) throw InvalidArgument("ArConfig.max_order: must be >= 0");
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
  auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  std::seed_seq seq{lo(base), hi(base), lo(a), hi(a), lo(b), hi(b)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

ObservationSource rows_source(RowMatrix rows) {
  auto data = std::make_shared<const RowMatrix>(std::move(rows));
  auto next = std::make_shared<Index>(0);
  return [data, next]() -> std::optional<Vector> {
    if (*next >= data->rows()) return std::nullopt;
    return Vector(data->row((*next)++).transpose());
  };
}

MonitorRun run_monitor(Monitor& monitor, const ObservationSource& source, Index horizon) {
  if (horizon < 1) throw InvalidArgument("run_monitor: horizon must be >= 1");
  MonitorRun run;
  run.censored = true;
  while (static_cast<Index>(run.trace.size()) < horizon) {
    std::optional<Vector> y = source();
    if (!y) break;
    run.trace.push_back(monitor.observe(*y));
    if (run.trace.back().alarm) {
      run.censored = false;
      break;
    }
  }
  run.run_length = static_cast<Index>(run.trace.size());
  return run;
}

namespace {

std::vector<double> column(const RowMatrix& m, Index c) {
  std::vector<double> out(static_cast<std::size_t>(m.rows()));
  for (Index i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(i)] = m(i, c);
  return out;
}

// Fits the AR model on `train`, primes it with the tail of `train`.
ARFilter make_filter(const std::vector<double>& train, const ArConfig& ar) {
  if (!ar.prewhiten) return ARFilter(ARModel{{}, 0.0, 1.0});
  const int p = ar.order ? *ar.order : select_order_aic(train, ar.max_order);
  ARFilter filter(fit_ar(train, p));
  filter.prime(train);
  return filter;
}

class MfMonitor final : public Monitor {
 public:
  MfMonitor(std::shared_ptr<const ManifoldFit> fit, ARFilter filter,
            const std::vector<double>& reference, const ChartConfig& chart)
      : fit_(std::move(fit)), filter_(std::move(filter)), chart_(reference, chart) {}

  ChartPoint observe(const Vector& y) override {
    return chart_.update(filter_.push(deviation(fit_->manifold, y)));
  }

 private:
  std::shared_ptr<const ManifoldFit> fit_;
  ARFilter filter_;
  UdfmChart chart_;
};

class MlMonitor final : public Monitor {
 public:
  MlMonitor(std::shared_ptr<const EmbeddingMap> map, std::vector<ARFilter> filters,
            const RowMatrix& reference, const ChartConfig& chart)
      : map_(std::move(map)), filters_(std::move(filters)), chart_(reference, chart) {}

  ChartPoint observe(const Vector& y) override {
    Vector v = map_->embed(y);
    for (Index j = 0; j < v.size(); ++j) v(j) = filters_[static_cast<std::size_t>(j)].push(v(j));
    return chart_.update(v);
  }

 private:
  std::shared_ptr<const EmbeddingMap> map_;
  std::vector<ARFilter> filters_;
  DfewmaChart chart_;
};

}  // namespace

MfPhaseOne MfPhaseOne::fit(const RowMatrix& phase1, const SplitPlan& split, const FitConfig& fit,
                           const ArConfig& ar, std::optional<double> sigma) {
  split.validate(phase1.rows());
  ar.validate();
  auto fitted = std::make_shared<const ManifoldFit>(
      fit_manifold(PointCloud(phase1.topRows(split.m_fit)), fit, sigma));
  const FittedManifold& mf = fitted->manifold;

  std::vector<double> train(static_cast<std::size_t>(split.m_ar));
  for (Index i = 0; i < split.m_ar; ++i) {
    train[static_cast<std::size_t>(i)] = deviation(mf, phase1.row(split.m_fit + i).transpose());
  }
  ARFilter filter = make_filter(train, ar);
  std::vector<double> reference(static_cast<std::size_t>(split.m_chart));
  const Index first = split.m_fit + split.m_ar;
  for (Index i = 0; i < split.m_chart; ++i) {
    reference[static_cast<std::size_t>(i)] =
        filter.push(deviation(mf, phase1.row(first + i).transpose()));
  }
  return MfPhaseOne(std::move(fitted), std::move(filter), std::move(reference), ar.prewhiten);
}

std::unique_ptr<Monitor> MfPhaseOne::start(const ChartConfig& chart) const {
  return std::make_unique<MfMonitor>(fit_, filter_, reference_, chart);
}

MlPhaseOne MlPhaseOne::fit(const RowMatrix& phase1, const SplitPlan& split,
                           const EmbeddingConfig& embedding, const ArConfig& ar) {
  split.validate(phase1.rows());
  ar.validate();
  auto map = std::make_shared<const EmbeddingMap>(
      learn_embedding(PointCloud(phase1.topRows(split.m_fit)), embedding));
  const RowMatrix train = map->embed_rows(phase1.middleRows(split.m_fit, split.m_ar));
  const RowMatrix chart_rows = map->embed_rows(phase1.bottomRows(split.m_chart));
  std::vector<ARFilter> filters;
  RowMatrix reference(chart_rows.rows(), chart_rows.cols());
  for (Index j = 0; j < train.cols(); ++j) {
    filters.push_back(make_filter(column(train, j), ar));
    for (Index i = 0; i < chart_rows.rows(); ++i) reference(i, j) = filters.back().push(chart_rows(i, j));
  }
  return MlPhaseOne(std::move(map), std::move(filters), std::move(reference), ar.prewhiten);
}

std::unique_ptr<Monitor> MlPhaseOne::start(const ChartConfig& chart) const {
  return std::make_unique<MlMonitor>(map_, filters_, reference_, chart);
}

MonitorRun run_mf_pipeline(const RowMatrix& phase1, const ObservationSource& phase2,
                           const SplitPlan& split, const FitConfig& fit, const ArConfig& ar,
                           const ChartConfig& chart, Index horizon, std::optional<double> sigma) {
  const MfPhaseOne model = MfPhaseOne::fit(phase1, split, fit, ar, sigma);
  auto monitor = model.start(chart);
  return run_monitor(*monitor, phase2, horizon);
}

MonitorRun run_ml_pipeline(const RowMatrix& phase1, const ObservationSource& phase2,
                           const SplitPlan& split, const EmbeddingConfig& embedding,
                           const ArConfig& ar, const ChartConfig& chart, Index horizon) {
  const MlPhaseOne model = MlPhaseOne::fit(phase1, split, embedding, ar);
  auto monitor = model.start(chart);
  return run_monitor(*monitor, phase2, horizon);
}

ArlSummary summarize_run_lengths(const std::vector<MonitorRun>& runs) {
  if (runs.empty()) throw InvalidArgument("summarize_run_lengths: no runs");
  ArlSummary s;
  double sum = 0.0;
  for (const MonitorRun& r : runs) {
    s.run_lengths.push_back(r.run_length);
    s.censored += r.censored ? 1 : 0;
    sum += static_cast<double>(r.run_length);
  }
  const double n = static_cast<double>(runs.size());
  s.arl = sum / n;
  if (runs.size() > 1) {
    double ss = 0.0;
    for (Index rl : s.run_lengths) ss += (static_cast<double>(rl) - s.arl) * (static_cast<double>(rl) - s.arl);
    s.sdrl = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

void parallel_for(Index count, int threads, const std::function<void(Index)>& fn) {
  if (count <= 0) return;
  const Index workers = std::min<Index>(std::max(threads, 1), count);
  if (workers == 1) {
    for (Index i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<Index> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&]() {
    for (;;) {
      const Index i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(count);
      }
    }
  };
  std::vector<std::thread> pool;
  for (Index t = 0; t < workers; ++t) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

int default_threads() {
  if (const char* env = std::getenv("MFSPC_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

ArlSummary estimate_arl(const RunFactory& factory, Index replications, std::uint64_t base_seed,
                        int threads) {
  if (replications < 1) throw InvalidArgument("estimate_arl: replications must be >= 1");
  std::vector<MonitorRun> runs(static_cast<std::size_t>(replications));
  parallel_for(replications, threads, [&](Index r) {
    MonitorRun run = factory(base_seed + static_cast<std::uint64_t>(r));
    run.trace.clear();
    runs[static_cast<std::size_t>(r)] = std::move(run);
  });
  return summarize_run_lengths(runs);
}

std::string_view pipeline_method_name(PipelineMethod method) {
  switch (method) {
    case PipelineMethod::MF: return "mf";
    case PipelineMethod::PCA: return "pca";
    case PipelineMethod::LPP: return "lpp";
    case PipelineMethod::NPE: return "npe";
  }
  return "unknown";
}

std::optional<PipelineMethod> parse_pipeline_method(std::string_view name) {
  std::string lower(name);
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "mf") return PipelineMethod::MF;
  if (lower == "pca") return PipelineMethod::PCA;
  if (lower == "lpp") return PipelineMethod::LPP;
  if (lower == "npe") return PipelineMethod::NPE;
  return std::nullopt;
}

void SphereStudy::validate() const {
  process.validate();
  split.validate(split.total());
  fit.validate();
  if (sigma && !(*sigma > 0.0)) throw InvalidArgument("SphereStudy.sigma: must be positive");
  ar.validate();
  chart.validate();
  if (horizon < 1) throw InvalidArgument("SphereStudy.horizon: must be >= 1");
  if (scenarios.empty()) throw InvalidArgument("SphereStudy.scenarios: at least one required");
  for (const Scenario& s : scenarios) {
    if (s.dim < 0 || s.dim > process.D) {
      throw InvalidArgument("SphereStudy.scenarios: dim " + std::to_string(s.dim) +
                            " outside [0, " + std::to_string(process.D) + "]");
    }
  }
  if (methods.empty()) throw InvalidArgument("SphereStudy.methods: at least one required");
  if (replications < 1) throw InvalidArgument("SphereStudy.replications: must be >= 1");
  if (threads < 1) throw InvalidArgument("SphereStudy.threads: must be >= 1");
}

std::vector<StudyCell> run_sphere_study(const SphereStudy& study) {
  study.validate();
  const std::size_t n_scen = study.scenarios.size();
  const std::size_t n_meth = study.methods.size();
  const Index D = study.process.D;
  std::vector<Vector> shifts;
  for (const Scenario& s : study.scenarios) {
    shifts.push_back(s.dim == 0 ? Vector(Vector::Zero(D))
                                : coordinate_shift(D, s.dim, s.delta_sigma, study.process.sigma));
  }

  // runs[cell][replication]
  std::vector<std::vector<MonitorRun>> runs(
      n_scen * n_meth, std::vector<MonitorRun>(static_cast<std::size_t>(study.replications)));

  parallel_for(study.replications, study.threads, [&](Index r) {
    const std::uint64_t seed = study.seed + static_cast<std::uint64_t>(r);
    SphereConfig pc = study.process;
    pc.seed = derive_seed(seed, 0);
    SphereProcess process(pc);
    RowMatrix phase1(study.split.total(), D);
    for (Index t = 0; t < phase1.rows(); ++t) phase1.row(t) = process.next().observed.transpose();

    std::vector<std::unique_ptr<MfPhaseOne>> mf(n_meth);
    std::vector<std::unique_ptr<MlPhaseOne>> ml(n_meth);
    for (std::size_t k = 0; k < n_meth; ++k) {
      const PipelineMethod method = study.methods[k];
      if (method == PipelineMethod::MF) {
        mf[k] = std::make_unique<MfPhaseOne>(
            MfPhaseOne::fit(phase1, study.split, study.fit, study.ar, study.sigma));
      } else {
        EmbeddingConfig ec = study.embedding;
        ec.method = method == PipelineMethod::PCA   ? EmbeddingMethod::PCA
                    : method == PipelineMethod::LPP ? EmbeddingMethod::LPP
                                                    : EmbeddingMethod::NPE;
        ml[k] = std::make_unique<MlPhaseOne>(MlPhaseOne::fit(phase1, study.split, ec, study.ar));
      }
    }

    // Phase II noise path, extended lazily and shared by every scenario.
    std::vector<Vector> path;
    for (std::size_t s = 0; s < n_scen; ++s) {
      for (std::size_t k = 0; k < n_meth; ++k) {
        ChartConfig cc = study.chart;
        cc.seed = derive_seed(seed, 1, k);
        std::unique_ptr<Monitor> monitor = mf[k] ? mf[k]->start(cc) : ml[k]->start(cc);
        std::size_t t = 0;
        ObservationSource source = [&]() -> std::optional<Vector> {
          while (path.size() <= t) path.push_back(process.next().observed);
          return Vector(path[t++] + shifts[s]);
        };
        MonitorRun run = run_monitor(*monitor, source, study.horizon);
        run.trace.clear();
        runs[s * n_meth + k][static_cast<std::size_t>(r)] = std::move(run);
      }
    }
  });

  std::vector<StudyCell> cells;
  for (std::size_t s = 0; s < n_scen; ++s) {
    for (std::size_t k = 0; k < n_meth; ++k) {
      cells.push_back({study.scenarios[s].name, study.methods[k],
                       summarize_run_lengths(runs[s * n_meth + k])});
    }
  }
  return cells;
}

}  // namespace mfspc
