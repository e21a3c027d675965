#include "mfspc/errors.hpp"
#include "mfspc/pipelines.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace mfspc;

namespace {

SplitPlan small_split() { return {200, 150, 50}; }

ChartConfig quick_chart(std::uint64_t seed = 3) {
  ChartConfig c;
  c.permutations = 300;
  c.seed = seed;
  return c;
}

Series sphere(Index n, std::uint64_t seed, Index D = 6) {
  SphereConfig pc;
  pc.D = D;
  pc.n = n;
  pc.seed = seed;
  return generate_sphere_process(pc);
}

FitConfig mf_fit() {
  FitConfig f;
  f.d_hint = 2;
  return f;
}

}  // namespace

TEST(SplitPlan, RejectsMismatchedLength) {
  EXPECT_NO_THROW(small_split().validate(400));
  EXPECT_THROW(small_split().validate(401), InvalidArgument);
  EXPECT_THROW((SplitPlan{0, 10, 10}.validate(20)), InvalidArgument);
}

TEST(DeriveSeed, StableAndDistinct) {
  EXPECT_EQ(derive_seed(5, 1, 2), derive_seed(5, 1, 2));
  EXPECT_NE(derive_seed(5, 1, 2), derive_seed(5, 2, 1));
  EXPECT_NE(derive_seed(5, 1), derive_seed(6, 1));
}

TEST(MfPipeline, DeterministicForFixedSeeds) {
  const Series s = sphere(500, 11);
  const RowMatrix p1 = s.observations.topRows(400);
  const RowMatrix p2 = s.observations.bottomRows(100);
  const MonitorRun a = run_mf_pipeline(p1, rows_source(p2), small_split(), mf_fit(), {},
                                       quick_chart(), 100, 0.1);
  const MonitorRun b = run_mf_pipeline(p1, rows_source(p2), small_split(), mf_fit(), {},
                                       quick_chart(), 100, 0.1);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  EXPECT_EQ(a.run_length, b.run_length);
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    EXPECT_EQ(a.trace[i].statistic, b.trace[i].statistic);
    EXPECT_EQ(a.trace[i].limit, b.trace[i].limit);
  }
}

TEST(MfPipeline, HorizonOneCensorsOrAlarmsAtOne) {
  const Series s = sphere(420, 12);
  const MonitorRun r =
      run_mf_pipeline(s.observations.topRows(400), rows_source(s.observations.bottomRows(20)),
                      small_split(), mf_fit(), {}, quick_chart(), 1, 0.1);
  EXPECT_EQ(r.run_length, 1);
  EXPECT_EQ(r.trace.size(), 1u);
  EXPECT_EQ(r.censored, !r.trace[0].alarm);
}

TEST(MfPipeline, LargeShiftAlarmsQuickly) {
  Series s = sphere(600, 13);
  s = inject_mean_shift(std::move(s), 401, coordinate_shift(6, 4, 10.0, 0.1));
  const MonitorRun r =
      run_mf_pipeline(s.observations.topRows(400), rows_source(s.observations.bottomRows(200)),
                      small_split(), mf_fit(), {}, quick_chart(), 200, 0.1);
  EXPECT_FALSE(r.censored);
  EXPECT_LE(r.run_length, 10);
}

TEST(MfPipeline, PrewhitenOffUsesRawDeviations) {
  const Series s = sphere(400, 14);
  ArConfig ar;
  ar.prewhiten = false;
  const MfPhaseOne p = MfPhaseOne::fit(s.observations, small_split(), mf_fit(), ar, 0.1);
  EXPECT_FALSE(p.prewhitened());
  EXPECT_EQ(p.ar_model().order(), 0);
  const Index first = 350;
  for (Index i = 0; i < 5; ++i) {
    EXPECT_NEAR(p.reference()[static_cast<std::size_t>(i)],
                deviation(p.manifold(), s.observations.row(first + i).transpose()), 1e-12);
  }
}

TEST(MlPipeline, IllPosedWhenFitSegmentTooShort) {
  const Series s = sphere(30, 15, 10);
  EmbeddingConfig e;
  e.method = EmbeddingMethod::LPP;
  e.k_neighbors = 3;
  const SplitPlan split{8, 12, 10};
  EXPECT_THROW(run_ml_pipeline(s.observations, rows_source(s.observations.topRows(5)), split, e,
                               {}, quick_chart(), 5),
               IllPosed);
}

TEST(MlPipeline, RunsAndIsDeterministic) {
  const Series s = sphere(450, 16);
  EmbeddingConfig e;
  e.method = EmbeddingMethod::PCA;
  const RowMatrix p1 = s.observations.topRows(400);
  const RowMatrix p2 = s.observations.bottomRows(50);
  const MonitorRun a = run_ml_pipeline(p1, rows_source(p2), small_split(), e, {}, quick_chart(), 50);
  const MonitorRun b = run_ml_pipeline(p1, rows_source(p2), small_split(), e, {}, quick_chart(), 50);
  EXPECT_EQ(a.run_length, b.run_length);
  EXPECT_GE(a.run_length, 1);
  EXPECT_LE(a.run_length, 50);
}

TEST(ArlSummary, DeterministicRunLengthHasZeroSpread) {
  const ArlSummary s = estimate_arl([](std::uint64_t) { return MonitorRun{3, false, {}}; }, 20, 1);
  EXPECT_DOUBLE_EQ(s.arl, 3.0);
  EXPECT_DOUBLE_EQ(s.sdrl, 0.0);
  EXPECT_EQ(s.censored, 0);
}

TEST(ArlSummary, SingleReplicationSdrlIsZero) {
  const ArlSummary s = estimate_arl([](std::uint64_t) { return MonitorRun{7, false, {}}; }, 1, 1);
  EXPECT_DOUBLE_EQ(s.arl, 7.0);
  EXPECT_DOUBLE_EQ(s.sdrl, 0.0);
}

TEST(ArlSummary, CountsCensoredRuns) {
  std::vector<MonitorRun> runs{{5, false, {}}, {100, true, {}}, {1, false, {}}};
  const ArlSummary s = summarize_run_lengths(runs);
  EXPECT_EQ(s.censored, 1);
  EXPECT_DOUBLE_EQ(s.arl, 106.0 / 3.0);
}

TEST(ArlSummary, GeometricRunLengthsRecoverMean) {
  const RunFactory geometric = [](std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::geometric_distribution<Index> g(0.05);
    return MonitorRun{g(rng) + 1, false, {}};
  };
  const ArlSummary s = estimate_arl(geometric, 4000, 77);
  EXPECT_NEAR(s.arl, 20.0, 4.0 * std::sqrt(0.95) / 0.05 / std::sqrt(4000.0));
  EXPECT_NEAR(s.sdrl, std::sqrt(0.95) / 0.05, 1.5);
  EXPECT_GT(oracle::geometric_fit_p(s.run_lengths, 0.05), 0.001);
}

TEST(ArlSummary, ThreadCountDoesNotChangeResults) {
  const RunFactory f = [](std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return MonitorRun{static_cast<Index>(rng() % 50) + 1, false, {}};
  };
  const ArlSummary a = estimate_arl(f, 64, 9, 1);
  const ArlSummary b = estimate_arl(f, 64, 9, 4);
  EXPECT_EQ(a.run_lengths, b.run_lengths);
}

TEST(ParallelFor, PropagatesExceptions) {
  EXPECT_THROW(parallel_for(10, 3,
                            [](Index i) {
                              if (i == 7) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
}

TEST(PipelineMethod, ParsesNames) {
  EXPECT_EQ(parse_pipeline_method("MF"), PipelineMethod::MF);
  EXPECT_EQ(parse_pipeline_method("npe"), PipelineMethod::NPE);
  EXPECT_FALSE(parse_pipeline_method("isomap").has_value());
  EXPECT_EQ(pipeline_method_name(PipelineMethod::LPP), "lpp");
}

TEST(SphereStudy, SmallStudyIsThreadInvariant) {
  SphereStudy st;
  st.split = small_split();
  st.fit = mf_fit();
  st.sigma = 0.1;
  st.chart = quick_chart();
  st.horizon = 30;
  st.scenarios = {{"in-control", 0, 0.0}, {"dim4-delta10", 4, 10.0}};
  st.methods = {PipelineMethod::MF, PipelineMethod::PCA};
  st.replications = 3;
  st.seed = 21;
  st.process.D = 6;
  st.threads = 1;
  const auto a = run_sphere_study(st);
  st.threads = 3;
  const auto b = run_sphere_study(st);
  ASSERT_EQ(a.size(), 4u);
  EXPECT_EQ(a[0].scenario, "in-control");
  EXPECT_EQ(a[1].method, PipelineMethod::PCA);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].summary.run_lengths, b[i].summary.run_lengths);
  }
  EXPECT_LE(a[2].summary.arl, 3.0);
}
