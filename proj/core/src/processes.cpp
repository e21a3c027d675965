#include "mfspc/processes.hpp"

#include "mfspc/errors.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

namespace mfspc {

PointCloud Series::rows(Index first, Index count) const {
  if (first < 0 || count < 1 || first + count > length()) {
    throw IndexOutOfRange("Series::rows: [" + std::to_string(first) + ", " +
                          std::to_string(first + count) + ") outside series of length " +
                          std::to_string(length()));
  }
  return PointCloud(observations.middleRows(first, count));
}

void SphereConfig::validate() const {
  if (d < 1) throw InvalidArgument("SphereConfig.d: must be >= 1");
  if (D < d + 1) throw InvalidArgument("SphereConfig.D: must be >= d + 1");
  if (!(sigma_x > 0.0)) throw InvalidArgument("SphereConfig.sigma_x: must be positive");
  if (!(sigma > 0.0)) throw InvalidArgument("SphereConfig.sigma: must be positive");
  if (n < 1) throw InvalidArgument("SphereConfig.n: must be >= 1");
}

Vector sphere_project(const Vector& y, Index d) {
  if (d < 0 || y.size() < d + 1) {
    throw InvalidArgument("sphere_project: need at least d + 1 coordinates");
  }
  const double norm = y.head(d + 1).norm();
  if (!(norm > 0.0)) {
    throw KernelPoint("sphere_project: leading d + 1 coordinates are all zero");
  }
  Vector out = Vector::Zero(y.size());
  out.head(d + 1) = y.head(d + 1) / norm;
  return out;
}

SphereProcess::SphereProcess(const SphereConfig& config)
    : config_(config), rng_(config.seed) {
  config_.validate();
  // Uniform start: normalized Gaussian on the leading d+1 coordinates.
  Vector g = Vector::Zero(config_.D);
  do {
    for (Index j = 0; j <= config_.d; ++j) g[j] = normal_(rng_);
  } while (!(g.head(config_.d + 1).norm() > 0.0));
  state_ = sphere_project(g, config_.d);
}

SphereProcess::Step SphereProcess::next() {
  const Index D = config_.D;
  Vector proposal(D);
  for (;;) {
    for (Index j = 0; j < D; ++j) proposal[j] = state_[j] + config_.sigma_x * normal_(rng_);
    if (proposal.head(config_.d + 1).norm() > 0.0) break;  // measure-zero retry
  }
  state_ = sphere_project(proposal, config_.d);
  Vector observed(D);
  for (Index j = 0; j < D; ++j) observed[j] = state_[j] + config_.sigma * normal_(rng_);
  return {state_, std::move(observed)};
}

Series generate_sphere_process(const SphereConfig& config) {
  SphereProcess process(config);
  Series series;
  series.observations.resize(config.n, config.D);
  series.latent.resize(config.n, config.D);
  for (Index t = 0; t < config.n; ++t) {
    SphereProcess::Step step = process.next();
    series.latent.row(t) = step.latent.transpose();
    series.observations.row(t) = step.observed.transpose();
  }
  return series;
}

Series inject_mean_shift(Series series, Index tau, const Vector& delta) {
  if (tau < 1 || tau > series.length()) {
    throw IndexOutOfRange("inject_mean_shift: tau " + std::to_string(tau) +
                          " outside [1, " + std::to_string(series.length()) + "]");
  }
  if (delta.size() != series.dim()) {
    throw DimensionMismatch("inject_mean_shift: delta dimension mismatch");
  }
  for (Index t = tau - 1; t < series.length(); ++t) {
    series.observations.row(t) += delta.transpose();
  }
  series.tau = tau;
  series.delta = delta;
  return series;
}

Vector coordinate_shift(Index D, Index dim, double delta_sigma, double sigma) {
  if (dim < 1 || dim > D) {
    throw IndexOutOfRange("coordinate_shift: dimension " + std::to_string(dim) +
                          " outside [1, " + std::to_string(D) + "]");
  }
  Vector delta = Vector::Zero(D);
  delta[dim - 1] = delta_sigma * sigma;
  return delta;
}

SubspaceOracle linear_subspace_oracle(const SubspaceOracleConfig& config) {
  if (config.d < 0 || config.d >= config.D) {
    throw InvalidArgument("linear_subspace_oracle: need 0 <= d < D");
  }
  if (config.n < 1) throw InvalidArgument("linear_subspace_oracle: n must be >= 1");
  if (!(config.sigma > 0.0)) throw InvalidArgument("linear_subspace_oracle: sigma must be positive");
  const bool shifted = config.delta.size() > 0;
  if (shifted && config.delta.size() != config.D) {
    throw DimensionMismatch("linear_subspace_oracle: delta dimension mismatch");
  }
  const Index tau = config.tau.value_or(config.n / 2 + 1);
  if (shifted && (tau < 1 || tau > config.n)) {
    throw IndexOutOfRange("linear_subspace_oracle: tau outside the series");
  }

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> box(-config.box_half_width, config.box_half_width);
  std::normal_distribution<double> noise(0.0, config.sigma);

  SubspaceOracle out;
  out.series.observations.resize(config.n, config.D);
  out.series.latent = RowMatrix::Zero(config.n, config.D);
  out.squared_deviations.resize(static_cast<std::size_t>(config.n));
  for (Index t = 0; t < config.n; ++t) {
    for (Index j = 0; j < config.d; ++j) out.series.latent(t, j) = box(rng);
    for (Index j = 0; j < config.D; ++j) {
      double y = out.series.latent(t, j) + noise(rng);
      if (shifted && t + 1 >= tau) y += config.delta[j];
      out.series.observations(t, j) = y;
    }
    // Q keeps the coordinates orthogonal to the span of the first d axes.
    out.squared_deviations[static_cast<std::size_t>(t)] =
        out.series.observations.row(t).tail(config.D - config.d).squaredNorm();
  }
  if (shifted) {
    out.series.tau = tau;
    out.series.delta = config.delta;
  }
  return out;
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& text, double& value) {
  const std::string s = trim(text);
  if (s.empty()) return false;
  errno = 0;
  char* end = nullptr;
  value = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && errno != ERANGE && std::isfinite(value);
}

}  // namespace

Series load_series_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string(), 0, 0);

  std::vector<std::vector<double>> rows;
  std::size_t columns = 0;
  std::string line;
  std::size_t line_no = 0;
  bool header_allowed = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_fields(line);
    std::vector<double> values(fields.size());
    std::size_t bad_column = 0;
    std::size_t numeric = 0;
    for (std::size_t j = 0; j < fields.size(); ++j) {
      if (parse_double(fields[j], values[j])) {
        ++numeric;
      } else if (bad_column == 0) {
        bad_column = j + 1;
      }
    }
    if (bad_column != 0) {
      if (header_allowed && numeric == 0) {  // a leading row of names only
        header_allowed = false;
        columns = fields.size();
        continue;
      }
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": column " +
                           std::to_string(bad_column) + " is not a finite number",
                       line_no, bad_column);
    }
    header_allowed = false;
    if (columns == 0) columns = fields.size();
    if (fields.size() != columns) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                           std::to_string(columns) + " columns, found " +
                           std::to_string(fields.size()),
                       line_no, 0);
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw ParseError(path.string() + ": no data rows", line_no, 0);

  Series series;
  series.observations.resize(static_cast<Index>(rows.size()), static_cast<Index>(columns));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < columns; ++j) {
      series.observations(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    }
  }
  return series;
}

void write_series_csv(const std::filesystem::path& path, const RowMatrix& observations,
                      const std::vector<std::string>& header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  if (!header.empty()) {
    for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
    out << '\n';
  }
  char buf[40];
  for (Index i = 0; i < observations.rows(); ++i) {
    for (Index j = 0; j < observations.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.16e", observations(i, j));
      if (j) out << ',';
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace mfspc
