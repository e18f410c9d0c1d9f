#include "mbf/harness/io.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace mbf::harness {

namespace {

std::ofstream openForWrite(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::ConfigError, "cannot write '" + path + "'");
  return out;
}

std::vector<std::string> splitCsvLine(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parseCell(const std::string& cell, const std::string& path, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used == cell.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::ConfigError,
              path + ":" + std::to_string(line) + ": cannot parse '" + cell + "' as a number");
}

}  // namespace

std::string formatNumber(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void writeTrajectoryCsv(const std::string& path, const Trajectory& t) {
  auto out = openForWrite(path);
  out << "step";
  for (const auto& s : t.stateNames) out << ',' << s;
  for (Eigen::Index j = 0; j < t.outputDim; ++j) out << ",y" << j;
  out << '\n';
  for (std::size_t k = 0; k < t.states.size(); ++k) {
    out << k;
    for (Eigen::Index i = 0; i < t.states[k].size(); ++i) out << ',' << formatNumber(t.states[k](i));
    for (Eigen::Index j = 0; j < t.outputDim; ++j) {
      out << ',';
      if (t.measurements[k]) out << formatNumber((*t.measurements[k])(j));
    }
    out << '\n';
  }
}

Trajectory readTrajectoryCsv(const std::string& path, const std::vector<std::string>& stateNames,
                             Eigen::Index outputDim) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot read trajectory '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ConfigError, path + ": empty file");
  std::vector<std::string> expected{"step"};
  expected.insert(expected.end(), stateNames.begin(), stateNames.end());
  for (Eigen::Index j = 0; j < outputDim; ++j) expected.push_back("y" + std::to_string(j));
  if (splitCsvLine(line) != expected) {
    throw Error(ErrorCode::ConfigError, path + ": header does not match the scenario's states and outputs");
  }
  Trajectory t;
  t.stateNames = stateNames;
  t.outputDim = outputDim;
  const auto n = static_cast<Eigen::Index>(stateNames.size());
  std::size_t lineNo = 1;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.empty()) continue;
    const auto cells = splitCsvLine(line);
    if (cells.size() != expected.size()) {
      throw Error(ErrorCode::ConfigError, path + ":" + std::to_string(lineNo) + ": wrong number of columns");
    }
    if (parseCell(cells[0], path, lineNo) != static_cast<double>(t.states.size())) {
      throw Error(ErrorCode::ConfigError, path + ":" + std::to_string(lineNo) + ": steps must be 0, 1, 2, ...");
    }
    Vector x(n);
    for (Eigen::Index i = 0; i < n; ++i) x(i) = parseCell(cells[static_cast<std::size_t>(1 + i)], path, lineNo);
    std::size_t empty = 0;
    Vector y(outputDim);
    for (Eigen::Index j = 0; j < outputDim; ++j) {
      const auto& c = cells[static_cast<std::size_t>(1 + n + j)];
      if (c.empty()) ++empty;
      else y(j) = parseCell(c, path, lineNo);
    }
    if (empty != 0 && empty != static_cast<std::size_t>(outputDim)) {
      throw Error(ErrorCode::ConfigError, path + ":" + std::to_string(lineNo) + ": partially missing measurement");
    }
    t.states.push_back(x);
    if (empty == 0 && !t.measurements.empty()) t.measurements.emplace_back(y);
    else t.measurements.emplace_back(std::nullopt);
  }
  if (t.states.size() < 2) throw Error(ErrorCode::ConfigError, path + ": needs at least two steps");
  return t;
}

void writeEstimatesCsv(const std::string& path, const std::vector<std::string>& stateNames,
                       const VariantRun& run) {
  auto out = openForWrite(path);
  out << "step";
  for (const auto& s : stateNames) out << ",mean_" << s;
  for (const auto& s : stateNames) out << ",var_" << s;
  out << ",jitter,mc_fallback,bandwidth_floored,degenerate_skipped\n";
  for (std::size_t k = 0; k < run.estimates.size(); ++k) {
    const auto& b = run.estimates[k];
    out << k;
    for (Eigen::Index i = 0; i < b.dim(); ++i) out << ',' << formatNumber(b.mean()(i));
    for (Eigen::Index i = 0; i < b.dim(); ++i) out << ',' << formatNumber(b.cov()(i, i));
    const auto& f = run.flags[k];
    out << ',' << int(f.jitterApplied) << ',' << int(f.mcFallback) << ',' << int(f.bandwidthFloored)
        << ',' << int(f.degenerateSkipped) << '\n';
  }
}

void writeMetricsJson(const std::string& path, const MetricsReport& report) {
  using nlohmann::ordered_json;
  ordered_json root;
  root["schema"] = 1;
  root["states"] = report.stateNames;
  root["steps"] = report.steps;
  root["reference"] = report.reference ? ordered_json(*report.reference) : ordered_json(nullptr);
  ordered_json variants = ordered_json::array();
  for (const auto& m : report.variants) {
    ordered_json v;
    v["name"] = m.name;
    ordered_json rmse;
    for (std::size_t i = 0; i < m.rmse.size(); ++i) rmse[report.stateNames[i]] = m.rmse[i];
    v["rmse"] = rmse;
    v["abs_error_per_step"] = m.absError;
    v["nees_per_step"] = m.neesPerStep;
    v["nees_mean"] = m.neesMean;
    v["nees_interval_95"] = {m.neesBounds.low, m.neesBounds.high};
    v["nees_consistent"] = m.neesConsistent;
    v["flags"] = {{"jitter", m.flags.jitter},
                  {"mc_fallback", m.flags.mcFallback},
                  {"bandwidth_floored", m.flags.bandwidthFloored},
                  {"degenerate_skipped", m.flags.degenerateSkipped}};
    if (m.maxMeanDiff) {
      v["max_diff_vs_reference"] = {{"mean", *m.maxMeanDiff}, {"cov", *m.maxCovDiff}};
    }
    variants.push_back(std::move(v));
  }
  root["variants"] = std::move(variants);
  auto out = openForWrite(path);
  out << root.dump(2) << '\n';
}

void writeTimingJson(const std::string& path, const std::vector<VariantRun>& runs) {
  nlohmann::ordered_json root;
  for (const auto& r : runs) root[r.name] = {{"wall_seconds", r.wallSeconds}};
  auto out = openForWrite(path);
  out << root.dump(2) << '\n';
}

}  // namespace mbf::harness
