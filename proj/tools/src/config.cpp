#include "mfspc_cli/config.hpp"

#include <fstream>
#include <set>

namespace mfspc::cli {

using nlohmann::json;

namespace {

// Strict view of one JSON object: reads typed fields, then rejects leftovers.
class Section {
 public:
  Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) fail(path_, "must be an object");
  }

  /// Rejects keys that were never read.
  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) fail(field(it.key()), "unknown key");
    }
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return obj_.contains(key) && !obj_.at(key).is_null();
  }

  const json& raw(const std::string& key) { return obj_.at(key); }

  void number(const std::string& key, double& out) {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_number()) fail(field(key), "must be a number");
    out = v.get<double>();
  }

  void optional_number(const std::string& key, std::optional<double>& out) {
    if (!has(key)) return;
    double v = 0.0;
    number(key, v);
    out = v;
  }

  template <class Int>
  void integer(const std::string& key, Int& out) {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_number_integer()) fail(field(key), "must be an integer");
    if constexpr (std::is_unsigned_v<Int>) {
      if (v.is_number_unsigned() || v.get<long long>() >= 0) {
        out = v.get<Int>();
        return;
      }
      fail(field(key), "must be non-negative");
    } else {
      out = static_cast<Int>(v.get<long long>());
    }
  }

  template <class Int>
  void optional_integer(const std::string& key, std::optional<Int>& out) {
    if (!has(key)) return;
    Int v{};
    integer(key, v);
    out = v;
  }

  void boolean(const std::string& key, bool& out) {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_boolean()) fail(field(key), "must be true or false");
    out = v.get<bool>();
  }

  void optional_boolean(const std::string& key, std::optional<bool>& out) {
    if (!has(key)) return;
    bool v = false;
    boolean(key, v);
    out = v;
  }

  std::optional<std::string> string(const std::string& key) {
    if (!has(key)) return std::nullopt;
    const json& v = obj_.at(key);
    if (!v.is_string()) fail(field(key), "must be a string");
    return v.get<std::string>();
  }

  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  [[noreturn]] static void fail(const std::string& where, const std::string& why) {
    throw ConfigError("config field '" + where + "': " + why);
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

PipelineMethod parse_pipeline(const std::string& text, const std::string& where) {
  const auto m = parse_pipeline_method(text);
  if (!m) Section::fail(where, "unknown method '" + text + "' (expected mf, pca, lpp or npe)");
  return *m;
}

EmbeddingMethod to_embedding(PipelineMethod m) {
  switch (m) {
    case PipelineMethod::PCA: return EmbeddingMethod::PCA;
    case PipelineMethod::LPP: return EmbeddingMethod::LPP;
    default: return EmbeddingMethod::NPE;
  }
}

// Re-raises library validation errors as ConfigError under a section name.
template <class F>
void check(const std::string& section, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidArgument& e) {
    throw ConfigError("config section '" + section + "': " + e.what());
  }
}

}  // namespace

std::vector<Scenario> default_scenarios() {
  return {{"in-control", 0, 0.0},
          {"dim1-delta3", 1, 3.0},
          {"dim1-delta10", 1, 10.0},
          {"dim4-delta3", 4, 3.0},
          {"dim4-delta10", 4, 10.0}};
}

void RunConfig::validate() const {
  check("process", [&] { SphereConfig p = process; p.n = 1; p.validate(); });
  if (n_phase1 && *n_phase1 < 1) Section::fail("process.n_phase1", "must be >= 1");
  if (n_monitor < 0) Section::fail("process.n_monitor", "must be >= 0");
  if (shift) {
    if (shift->dim < 1 || shift->dim > process.D) {
      Section::fail("shift.dim", "must lie in [1, process.D]");
    }
    if (shift->tau < 1) Section::fail("shift.tau", "must be >= 1");
  }
  check("split", [&] { split.validate(split.total()); });
  check("fit", [&] { fit.validate(); });
  if (sigma && !(*sigma > 0.0)) Section::fail("fit.sigma", "must be positive");
  check("embedding", [&] { embedding.validate(); });
  check("ar", [&] { ar.validate(); });
  check("chart", [&] { chart.validate(); });
  if (horizon < 1) Section::fail("monitor.horizon", "must be >= 1");
  if (replications < 1) Section::fail("arl.replications", "must be >= 1");
  if (threads < 0) Section::fail("arl.threads", "must be >= 0");
  if (arl_methods.empty()) Section::fail("arl.methods", "must not be empty");
  for (const Scenario& s : scenarios) {
    if (s.dim < 0 || s.dim > process.D) Section::fail("arl.scenarios", "dim outside [0, process.D]");
  }
}

RunConfig parse_run_config(const json& doc) {
  RunConfig c;
  c.scenarios = default_scenarios();
  Section top(doc, "");
  top.integer("seed", c.seed);
  if (auto m = top.string("method")) c.method = parse_pipeline(*m, "method");

  if (top.has("process")) {
    Section s(top.raw("process"), "process");
    if (auto type = s.string("type"); type && *type != "sphere") {
      Section::fail("process.type", "only 'sphere' is supported");
    }
    s.integer("d", c.process.d);
    s.integer("D", c.process.D);
    s.number("sigma_x", c.process.sigma_x);
    s.number("sigma", c.process.sigma);
    s.optional_integer("n_phase1", c.n_phase1);
    s.integer("n_monitor", c.n_monitor);
    s.finish();
  }
  if (top.has("shift")) {
    Section s(top.raw("shift"), "shift");
    ShiftConfig sh;
    s.integer("dim", sh.dim);
    s.number("delta_sigma", sh.delta_sigma);
    s.integer("tau", sh.tau);
    s.finish();
    c.shift = sh;
  }
  if (top.has("split")) {
    Section s(top.raw("split"), "split");
    s.integer("m_fit", c.split.m_fit);
    s.integer("m_ar", c.split.m_ar);
    s.integer("m_chart", c.split.m_chart);
    s.finish();
  }
  if (top.has("fit")) {
    Section s(top.raw("fit"), "fit");
    s.number("C0", c.fit.C0);
    s.number("C1", c.fit.C1);
    s.number("C2", c.fit.C2);
    s.integer("k", c.fit.k);
    s.optional_integer("d_hint", c.fit.d_hint);
    s.integer("min_ball_points", c.fit.min_ball_points);
    s.number("radius_growth", c.fit.radius_growth);
    s.integer("max_radius_growths", c.fit.max_radius_growths);
    s.number("sigma0", c.fit.sigma0);
    s.number("tolerance", c.fit.tolerance);
    s.integer("max_iterations", c.fit.max_iterations);
    s.optional_number("sigma", c.sigma);
    s.finish();
  }
  if (top.has("embedding")) {
    Section s(top.raw("embedding"), "embedding");
    s.integer("d", c.embedding.d);
    s.integer("k_neighbors", c.embedding.k_neighbors);
    s.optional_boolean("heat_kernel", c.embedding.heat_kernel);
    s.optional_number("heat_t0", c.embedding.heat_t0);
    s.number("npe_ridge", c.embedding.npe_ridge);
    s.finish();
  }
  if (top.has("ar")) {
    Section s(top.raw("ar"), "ar");
    s.optional_integer("order", c.ar.order);
    s.integer("max_order", c.ar.max_order);
    s.boolean("prewhiten", c.ar.prewhiten);
    s.finish();
  }
  if (top.has("chart")) {
    Section s(top.raw("chart"), "chart");
    s.integer("window", c.chart.window);
    s.number("lambda", c.chart.lambda);
    s.number("alpha", c.chart.alpha);
    s.integer("permutations", c.chart.permutations);
    s.integer("min_survivors", c.chart.min_survivors);
    s.integer("max_permutation_factor", c.chart.max_permutation_factor);
    s.integer("conditioning_window", c.chart.conditioning_window);
    s.finish();
  }
  if (top.has("monitor")) {
    Section s(top.raw("monitor"), "monitor");
    s.integer("horizon", c.horizon);
    s.finish();
  }
  if (top.has("arl")) {
    Section s(top.raw("arl"), "arl");
    s.integer("replications", c.replications);
    s.integer("threads", c.threads);
    if (s.has("methods")) {
      const json& arr = s.raw("methods");
      if (!arr.is_array()) Section::fail("arl.methods", "must be an array of strings");
      c.arl_methods.clear();
      for (const json& m : arr) {
        if (!m.is_string()) Section::fail("arl.methods", "must be an array of strings");
        c.arl_methods.push_back(parse_pipeline(m.get<std::string>(), "arl.methods"));
      }
    }
    if (s.has("scenarios")) {
      const json& arr = s.raw("scenarios");
      if (!arr.is_array()) Section::fail("arl.scenarios", "must be an array of objects");
      c.scenarios.clear();
      for (std::size_t i = 0; i < arr.size(); ++i) {
        Section e(arr[i], "arl.scenarios[" + std::to_string(i) + "]");
        Scenario sc;
        if (auto n = e.string("name")) sc.name = *n;
        e.integer("dim", sc.dim);
        e.number("delta_sigma", sc.delta_sigma);
        e.finish();
        if (sc.name.empty()) {
          sc.name = sc.dim == 0 ? "in-control"
                                : "dim" + std::to_string(sc.dim) + "-delta" + json(sc.delta_sigma).dump();
        }
        c.scenarios.push_back(sc);
      }
      if (c.scenarios.empty()) Section::fail("arl.scenarios", "must not be empty");
    }
    s.finish();
  }
  top.finish();
  c.embedding.method = to_embedding(c.method);
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("config " + path.string() + " is not valid JSON: " + e.what(), 0, 0);
  }
  return parse_run_config(doc);
}

json to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["method"] = std::string(pipeline_method_name(c.method));
  j["process"] = {{"type", "sphere"},
                  {"d", c.process.d},
                  {"D", c.process.D},
                  {"sigma_x", c.process.sigma_x},
                  {"sigma", c.process.sigma},
                  {"n_phase1", c.phase1_length()},
                  {"n_monitor", c.n_monitor}};
  if (c.shift) {
    j["shift"] = {{"dim", c.shift->dim}, {"delta_sigma", c.shift->delta_sigma}, {"tau", c.shift->tau}};
  }
  j["split"] = {{"m_fit", c.split.m_fit}, {"m_ar", c.split.m_ar}, {"m_chart", c.split.m_chart}};
  j["fit"] = {{"C0", c.fit.C0},
              {"C1", c.fit.C1},
              {"C2", c.fit.C2},
              {"k", c.fit.k},
              {"d_hint", c.fit.d_hint ? json(*c.fit.d_hint) : json(nullptr)},
              {"min_ball_points", c.fit.min_ball_points},
              {"radius_growth", c.fit.radius_growth},
              {"max_radius_growths", c.fit.max_radius_growths},
              {"sigma0", c.fit.sigma0},
              {"tolerance", c.fit.tolerance},
              {"max_iterations", c.fit.max_iterations},
              {"sigma", c.sigma ? json(*c.sigma) : json(nullptr)}};
  j["embedding"] = {{"d", c.embedding.d},
                    {"k_neighbors", c.embedding.k_neighbors},
                    {"heat_kernel", c.embedding.heat_kernel ? json(*c.embedding.heat_kernel) : json(nullptr)},
                    {"heat_t0", c.embedding.heat_t0 ? json(*c.embedding.heat_t0) : json(nullptr)},
                    {"npe_ridge", c.embedding.npe_ridge}};
  j["ar"] = {{"order", c.ar.order ? json(*c.ar.order) : json(nullptr)},
             {"max_order", c.ar.max_order},
             {"prewhiten", c.ar.prewhiten}};
  j["chart"] = {{"window", c.chart.window},
                {"lambda", c.chart.lambda},
                {"alpha", c.chart.alpha},
                {"permutations", c.chart.permutations},
                {"min_survivors", c.chart.min_survivors},
                {"max_permutation_factor", c.chart.max_permutation_factor},
                {"conditioning_window", c.chart.conditioning_window}};
  j["monitor"] = {{"horizon", c.horizon}};
  json methods = json::array();
  for (PipelineMethod m : c.arl_methods) methods.push_back(std::string(pipeline_method_name(m)));
  json scenarios = json::array();
  for (const Scenario& s : c.scenarios) {
    scenarios.push_back({{"name", s.name}, {"dim", s.dim}, {"delta_sigma", s.delta_sigma}});
  }
  j["arl"] = {{"replications", c.replications},
              {"threads", c.threads},
              {"methods", methods},
              {"scenarios", scenarios}};
  return j;
}

}  // namespace mfspc::cli
