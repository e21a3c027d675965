#include "mfspc_cli/commands.hpp"

#include "mfspc/errors.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace mfspc::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void write_json(const fs::path& path, const json& doc) {
  std::ofstream out = open_out(path);
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

void write_csv(const fs::path& path, const RowMatrix& rows) {
  try {
    write_series_csv(path, rows);
  } catch (const Error& e) {
    throw IoError(e.what());
  }
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

fs::path sidecar(const fs::path& p) { return fs::path(p.string() + ".json"); }

json delta_json(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

ChartConfig chart_for(const RunConfig& c) {
  ChartConfig chart = c.chart;
  chart.seed = derive_seed(c.seed, 2);
  return chart;
}

}  // namespace

int report_current_exception() {
  try {
    throw;
  } catch (const IllPosed& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIllPosed;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  } catch (...) {
    std::cerr << "error: unknown failure\n";
    return kRuntime;
  }
}

void cmd_generate(const RunConfig& config, const fs::path& out,
                  const std::optional<fs::path>& phase2) {
  config.validate();
  if (config.n_monitor > 0 && !phase2) {
    throw ConfigError("process.n_monitor > 0 requires --phase2 for the Phase II file");
  }
  SphereConfig pc = config.process;
  pc.seed = config.seed;
  pc.n = config.phase1_length() + config.n_monitor;
  Series all = generate_sphere_process(pc);

  json meta;
  meta["seed"] = config.seed;
  meta["process"] = to_json(config)["process"];
  meta["phase1_rows"] = config.phase1_length();
  meta["phase2_rows"] = config.n_monitor;
  meta["tau"] = nullptr;
  meta["delta"] = nullptr;
  if (config.shift && config.n_monitor > 0) {
    if (config.shift->tau > config.n_monitor) {
      throw ConfigError("config field 'shift.tau': beyond the " + std::to_string(config.n_monitor) +
                        " Phase II observations");
    }
    const Vector delta =
        coordinate_shift(pc.D, config.shift->dim, config.shift->delta_sigma, pc.sigma);
    const Index tau_global = config.phase1_length() + config.shift->tau;
    all = inject_mean_shift(std::move(all), tau_global, delta);
    meta["tau"] = config.shift->tau;
    meta["tau_global"] = tau_global;
    meta["delta"] = delta_json(delta);
  }
  write_csv(out, all.observations.topRows(config.phase1_length()));
  if (config.n_monitor > 0) {
    write_csv(*phase2, all.observations.bottomRows(config.n_monitor));
    meta["phase2_path"] = phase2->filename().string();
  }
  write_json(sidecar(out), meta);
}

MonitorRun cmd_monitor(const RunConfig& config, const fs::path& phase1_path,
                       const fs::path& phase2_path, const fs::path& out_dir) {
  config.validate();
  const Series phase1 = load_series_csv(phase1_path);
  const Series phase2 = load_series_csv(phase2_path);
  if (phase1.dim() != phase2.dim()) {
    throw DimensionMismatch("Phase I has " + std::to_string(phase1.dim()) +
                            " columns but Phase II has " + std::to_string(phase2.dim()));
  }
  if (phase1.length() != config.split.total()) {
    throw ConfigError("config section 'split': m_fit + m_ar + m_chart = " +
                      std::to_string(config.split.total()) + " but " + phase1_path.string() +
                      " has " + std::to_string(phase1.length()) + " rows");
  }
  const ChartConfig chart = chart_for(config);
  json summary;
  std::unique_ptr<Monitor> monitor;
  std::optional<MfPhaseOne> mf;
  std::optional<MlPhaseOne> ml;
  if (config.method == PipelineMethod::MF) {
    mf.emplace(MfPhaseOne::fit(phase1.observations, config.split, config.fit, config.ar, config.sigma));
    monitor = mf->start(chart);
    summary["sigma_hat"] = mf->manifold().sigma_hat();
    summary["ar_orders"] = json::array({mf->ar_model().order()});
  } else {
    ml.emplace(MlPhaseOne::fit(phase1.observations, config.split, config.embedding, config.ar));
    monitor = ml->start(chart);
    json orders = json::array();
    for (const ARFilter& f : ml->filters()) orders.push_back(f.model().order());
    summary["ar_orders"] = orders;
  }
  MonitorRun run = run_monitor(*monitor, rows_source(phase2.observations), config.horizon);

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  {
    std::ofstream out = open_out(out_dir / "trace.csv");
    out << "n,statistic,limit,alarm\n";
    for (const ChartPoint& p : run.trace) {
      out << p.n << ',' << fmt(p.statistic) << ',' << fmt(p.limit) << ',' << (p.alarm ? 1 : 0) << '\n';
    }
    if (!out) throw IoError("failed writing trace.csv");
  }
  summary["method"] = std::string(pipeline_method_name(config.method));
  summary["run_length"] = run.run_length;
  summary["censored"] = run.censored;
  summary["steps"] = run.trace.size();
  summary["unconditional_steps"] =
      std::count_if(run.trace.begin(), run.trace.end(), [](const ChartPoint& p) { return p.unconditional; });
  summary["config"] = to_json(config);
  write_json(out_dir / "summary.json", summary);
  return run;
}

std::vector<StudyCell> cmd_arl(const RunConfig& config, const fs::path& out) {
  config.validate();
  SphereStudy study;
  study.process = config.process;
  study.split = config.split;
  study.fit = config.fit;
  study.sigma = config.sigma;
  study.embedding = config.embedding;
  study.ar = config.ar;
  study.chart = config.chart;
  study.horizon = config.horizon;
  study.scenarios = config.scenarios;
  study.methods = config.arl_methods;
  study.replications = config.replications;
  study.seed = config.seed;
  study.threads = config.threads > 0 ? config.threads : default_threads();
  const std::vector<StudyCell> cells = run_sphere_study(study);

  std::ofstream csv = open_out(out);
  csv << "scenario,dim,delta_sigma";
  for (PipelineMethod m : study.methods) {
    const std::string n(pipeline_method_name(m));
    csv << ',' << n << "_arl," << n << "_sdrl," << n << "_censored";
  }
  csv << '\n';
  json rows = json::array();
  const std::size_t nm = study.methods.size();
  for (std::size_t s = 0; s < study.scenarios.size(); ++s) {
    const Scenario& sc = study.scenarios[s];
    csv << sc.name << ',' << sc.dim << ',' << fmt(sc.delta_sigma);
    for (std::size_t k = 0; k < nm; ++k) {
      const StudyCell& cell = cells[s * nm + k];
      csv << ',' << fmt(cell.summary.arl) << ',' << fmt(cell.summary.sdrl) << ',' << cell.summary.censored;
      rows.push_back({{"scenario", sc.name},
                      {"dim", sc.dim},
                      {"delta_sigma", sc.delta_sigma},
                      {"method", std::string(pipeline_method_name(cell.method))},
                      {"arl", cell.summary.arl},
                      {"sdrl", cell.summary.sdrl},
                      {"censored", cell.summary.censored},
                      {"replications", config.replications}});
    }
    csv << '\n';
  }
  if (!csv) throw IoError("failed writing " + out.string());
  write_json(sidecar(out), {{"cells", rows}, {"config", to_json(config)}});
  return cells;
}

void cmd_plot(const fs::path& trace_path, const fs::path& out) {
  const Series trace = load_series_csv(trace_path);
  if (trace.dim() != 4) {
    throw ParseError(trace_path.string() + ": expected columns n,statistic,limit,alarm", 1, 0);
  }
  const RowMatrix& t = trace.observations;
  const Index n = t.rows();
  const double x_lo = t(0, 0);
  const double x_hi = std::max(t(n - 1, 0), x_lo + 1.0);
  double y_lo = std::min(t.col(1).minCoeff(), t.col(2).minCoeff());
  double y_hi = std::max(t.col(1).maxCoeff(), t.col(2).maxCoeff());
  if (!(y_hi > y_lo)) {
    y_lo -= 1.0;
    y_hi += 1.0;
  }
  const double W = 800, H = 400, L = 60, R = 20, T = 20, B = 40;
  auto px = [&](double x) { return L + (x - x_lo) / (x_hi - x_lo) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y_lo) / (y_hi - y_lo) * (H - T - B); };
  auto polyline = [&](Index col, const char* cls, const char* color) {
    std::ostringstream s;
    s << "<polyline class=\"" << cls << "\" fill=\"none\" stroke=\"" << color
      << "\" stroke-width=\"1.5\" points=\"";
    for (Index i = 0; i < n; ++i) s << (i ? " " : "") << px(t(i, 0)) << ',' << py(t(i, col));
    s << "\"/>\n";
    return s.str();
  };

  std::ofstream svg = open_out(out);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << W / 2 << "\" y=\"" << H - 8 << "\" text-anchor=\"middle\" font-size=\"12\">step</text>\n";
  svg << "<text x=\"" << L - 6 << "\" y=\"" << py(y_hi) + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
      << fmt(y_hi) << "</text>\n";
  svg << "<text x=\"" << L - 6 << "\" y=\"" << py(y_lo) + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
      << fmt(y_lo) << "</text>\n";
  svg << polyline(1, "statistic", "#1f77b4");
  svg << polyline(2, "limit", "#d62728");
  for (Index i = 0; i < n; ++i) {
    if (t(i, 3) != 0.0) {
      svg << "<circle class=\"alarm\" cx=\"" << px(t(i, 0)) << "\" cy=\"" << py(t(i, 1))
          << "\" r=\"4\" fill=\"#d62728\"/>\n";
    }
  }
  svg << "</svg>\n";
  if (!svg) throw IoError("failed writing " + out.string());
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Phase II monitoring of high-dimensional serially correlated streams"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "mfspc 0.1.0");

  std::string config_path, out, phase1, phase2, trace, method;
  std::optional<std::uint64_t> seed;
  std::optional<long> replications;
  std::optional<int> threads;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override the configured seed");
  };

  CLI::App* gen = app.add_subcommand("generate", "simulate a sphere process to CSV");
  add_common(gen);
  gen->add_option("--out", out, "Phase I CSV path")->required();
  gen->add_option("--phase2", phase2, "Phase II CSV path (when process.n_monitor > 0)");

  CLI::App* mon = app.add_subcommand("monitor", "fit Phase I and monitor a Phase II stream");
  add_common(mon);
  mon->add_option("--phase1", phase1, "Phase I CSV")->required()->check(CLI::ExistingFile);
  mon->add_option("--phase2", phase2, "Phase II CSV")->required()->check(CLI::ExistingFile);
  mon->add_option("--out", out, "output directory")->required();
  mon->add_option("--method", method, "mf, pca, lpp or npe");

  CLI::App* arl = app.add_subcommand("arl", "Monte Carlo run-length study on the sphere process");
  add_common(arl);
  arl->add_option("--out", out, "CSV table path")->required();
  arl->add_option("--method", method, "restrict the study to one method");
  arl->add_option("--replications", replications, "number of replications");
  arl->add_option("--threads", threads, "worker threads (default MFSPC_THREADS or all cores)");

  CLI::App* plot = app.add_subcommand("plot", "render a monitor trace as SVG");
  plot->add_option("--trace", trace, "trace.csv from monitor")->required();
  plot->add_option("--out", out, "SVG path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    auto load = [&]() {
      nlohmann::json doc = nlohmann::json::object();
      if (!config_path.empty()) {
        RunConfig c = load_run_config(config_path);
        doc = to_json(c);
      }
      if (seed) doc["seed"] = *seed;
      if (!method.empty()) doc["method"] = method;
      if (replications) doc["arl"]["replications"] = *replications;
      if (threads) doc["arl"]["threads"] = *threads;
      RunConfig c = parse_run_config(doc);
      if (!method.empty() && arl->parsed()) c.arl_methods = {c.method};
      return c;
    };
    if (gen->parsed()) {
      cmd_generate(load(), out, phase2.empty() ? std::nullopt : std::optional<fs::path>(phase2));
    } else if (mon->parsed()) {
      const MonitorRun r = cmd_monitor(load(), phase1, phase2, out);
      std::cout << "run_length " << r.run_length << (r.censored ? " (censored)" : "") << '\n';
    } else if (arl->parsed()) {
      const std::vector<StudyCell> cells = cmd_arl(load(), out);
      for (const StudyCell& c : cells) {
        std::cout << c.scenario << ' ' << pipeline_method_name(c.method) << ' ' << fmt(c.summary.arl)
                  << " (" << fmt(c.summary.sdrl) << ")\n";
      }
    } else if (plot->parsed()) {
      cmd_plot(trace, out);
    }
  } catch (...) {
    return report_current_exception();
  }
  return kOk;
}

}  // namespace mfspc::cli
