#include "mbf/harness/metrics.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>

namespace mbf::harness {

NeesInterval neesInterval(std::size_t dim, std::size_t steps, double confidence) {
  if (dim == 0 || steps == 0 || !(confidence > 0.0 && confidence < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "NEES interval needs positive dimension, steps and confidence");
  }
  const double dof = static_cast<double>(dim * steps);
  const boost::math::chi_squared_distribution<double> chi(dof);
  const double tail = 0.5 * (1.0 - confidence);
  return {boost::math::quantile(chi, tail) / static_cast<double>(steps),
          boost::math::quantile(chi, 1.0 - tail) / static_cast<double>(steps)};
}

double nees(const Vector& truth, const GaussianBelief& estimate) {
  const Eigen::LLT<Matrix> llt(estimate.cov());
  if (llt.info() != Eigen::Success) return std::numeric_limits<double>::quiet_NaN();
  const Vector e = truth - estimate.mean();
  return e.dot(llt.solve(e));
}

MetricsReport computeMetrics(const Trajectory& trajectory, const std::vector<VariantRun>& runs,
                             const std::optional<std::string>& reference) {
  MetricsReport report;
  report.stateNames = trajectory.stateNames;
  report.steps = trajectory.steps();
  report.reference = reference;
  const std::size_t n = trajectory.stateNames.size();
  const std::size_t N = trajectory.steps();

  const VariantRun* ref = nullptr;
  if (reference) {
    for (const auto& r : runs) {
      if (r.name == *reference) ref = &r;
    }
  }

  for (const auto& run : runs) {
    VariantMetrics m;
    m.name = run.name;
    m.rmse.assign(n, 0.0);
    double neesSum = 0.0;
    std::size_t neesCount = 0;
    for (std::size_t k = 1; k <= N; ++k) {
      const Vector err = trajectory.states[k] - run.estimates[k].mean();
      std::vector<double> abs(n);
      for (std::size_t i = 0; i < n; ++i) {
        abs[i] = std::abs(err(static_cast<Eigen::Index>(i)));
        m.rmse[i] += abs[i] * abs[i];
      }
      m.absError.push_back(std::move(abs));
      const double e = nees(trajectory.states[k], run.estimates[k]);
      m.neesPerStep.push_back(e);
      if (std::isfinite(e)) {
        neesSum += e;
        ++neesCount;
      }
    }
    for (auto& r : m.rmse) r = std::sqrt(r / static_cast<double>(N));
    m.neesMean = neesCount > 0 ? neesSum / static_cast<double>(neesCount)
                               : std::numeric_limits<double>::quiet_NaN();
    if (neesCount > 0) {
      m.neesBounds = neesInterval(n, neesCount);
      m.neesConsistent = neesCount == N && m.neesMean >= m.neesBounds.low && m.neesMean <= m.neesBounds.high;
    }
    for (const auto& f : run.flags) {
      m.flags.jitter += f.jitterApplied;
      m.flags.mcFallback += f.mcFallback;
      m.flags.bandwidthFloored += f.bandwidthFloored;
      m.flags.degenerateSkipped += f.degenerateSkipped;
    }
    if (ref != nullptr) {
      double dm = 0.0, dc = 0.0;
      for (std::size_t k = 0; k < run.estimates.size() && k < ref->estimates.size(); ++k) {
        dm = std::max(dm, maxAbsDiff(run.estimates[k].mean(), ref->estimates[k].mean()));
        dc = std::max(dc, maxAbsDiff(run.estimates[k].cov(), ref->estimates[k].cov()));
      }
      m.maxMeanDiff = dm;
      m.maxCovDiff = dc;
    }
    report.variants.push_back(std::move(m));
  }
  return report;
}

}  // namespace mbf::harness
