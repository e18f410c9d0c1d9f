#pragma once

#include <string>
#include <vector>

#include "mbf/harness/metrics.hpp"
#include "mbf/harness/runner.hpp"

namespace mbf::harness {

/// Shortest round-trip-safe text: 17 significant digits.
std::string formatNumber(double value);

/// step, one column per state, then y0..y{m-1}. Unmeasured steps leave the
/// y cells empty.
void writeTrajectoryCsv(const std::string& path, const Trajectory& trajectory);

/// Reads a file written by writeTrajectoryCsv; columns must match the
/// expected state names and output dimension (ConfigError otherwise).
Trajectory readTrajectoryCsv(const std::string& path, const std::vector<std::string>& stateNames,
                             Eigen::Index outputDim);

/// step, mean_<state>..., var_<state>..., then the four step flags as 0/1.
void writeEstimatesCsv(const std::string& path, const std::vector<std::string>& stateNames,
                       const VariantRun& run);

void writeMetricsJson(const std::string& path, const MetricsReport& report);

/// Wall-clock seconds per variant; kept apart from metrics so metrics stay
/// byte-identical across runs.
void writeTimingJson(const std::string& path, const std::vector<VariantRun>& runs);

}  // namespace mbf::harness
