#include "mbf/composition.hpp"

#include <Eigen/QR>

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

namespace mbf {

std::optional<int> StateLayout::indexOf(const std::string& name) const {
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i].name == name) return static_cast<int>(i);
  }
  return std::nullopt;
}

void StateLayout::validate() const {
  std::set<std::string> seen;
  std::ostringstream problems;
  for (const auto& s : states) {
    if (s.name.empty()) problems << "state with an empty name; ";
    else if (!seen.insert(s.name).second) problems << "duplicate state '" << s.name << "'; ";
  }
  const std::string msg = problems.str();
  if (!msg.empty()) throw Error(ErrorCode::BindingErrors, msg.substr(0, msg.size() - 2));
}

UnitTable UnitTable::siDefaults() {
  UnitTable t;
  t.add("rad", "deg", 180.0 / std::numbers::pi);
  t.add("s", "ms", 1000.0);
  t.add("m", "mm", 1000.0);
  t.add("rad/s", "deg/s", 180.0 / std::numbers::pi);
  t.add("m/s", "mm/s", 1000.0);
  return t;
}

void UnitTable::add(const std::string& from, const std::string& to, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw Error(ErrorCode::InvalidArgument, "unit scale must be positive and finite");
  }
  table_[{from, to}] = scale;
  table_[{to, from}] = 1.0 / scale;
}

std::optional<double> UnitTable::factor(const std::string& from, const std::string& to) const {
  if (from == to) return 1.0;
  const auto it = table_.find({from, to});
  if (it == table_.end()) return std::nullopt;
  return it->second;
}

Matrix buildProjection(const StateLayout& layout, const SubmodelBinding& binding,
                       const UnitTable& units) {
  Matrix rows = Matrix::Zero(static_cast<Eigen::Index>(binding.states.size()), layout.size());
  auto addTerm = [&](Eigen::Index row, const BindingEntry& entry, const std::string& name, double coef) {
    const auto idx = layout.indexOf(name);
    if (!idx) throw Error(ErrorCode::UnknownState, "binding '" + entry.name + "' references unknown state '" + name + "'");
    const auto& sys = layout.states[static_cast<std::size_t>(*idx)];
    const auto f = units.factor(sys.unit, entry.unit);
    if (!f) {
      throw Error(ErrorCode::IncompatibleUnits, "cannot convert state '" + name + "' from '" + sys.unit +
                                                    "' to '" + entry.unit + "'");
    }
    rows(row, *idx) += coef * *f;
  };
  for (std::size_t i = 0; i < binding.states.size(); ++i) {
    const auto& entry = binding.states[i];
    const auto row = static_cast<Eigen::Index>(i);
    if (entry.combination.empty()) {
      addTerm(row, entry, entry.name, 1.0);
    } else {
      for (const auto& term : entry.combination) addTerm(row, entry, term.name, term.coefficient);
    }
  }
  return rows;
}

Matrix complementBasis(const Matrix& active) {
  const Eigen::Index a = active.rows();
  const Eigen::Index n = active.cols();
  if (a > n) throw Error(ErrorCode::RankDeficientActive, "more active rows than states");
  if (a == 0) return Matrix::Identity(n, n);
  const Eigen::ColPivHouseholderQR<Matrix> qr(active);
  if (qr.rank() < a) throw Error(ErrorCode::RankDeficientActive, "active rows are linearly dependent");
  std::vector<bool> pivot(static_cast<std::size_t>(n), false);
  const auto& perm = qr.colsPermutation().indices();
  for (Eigen::Index k = 0; k < a; ++k) pivot[static_cast<std::size_t>(perm(k))] = true;
  Matrix out = Matrix::Zero(n - a, n);
  Eigen::Index r = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (!pivot[static_cast<std::size_t>(j)]) out(r++, j) = 1.0;
  }
  return out;
}

ComposedSystem::Plan ComposedSystem::stepPlan(std::size_t k) const {
  Plan p;
  if (!transitions_.empty()) {
    const std::size_t i = k % transitions_.size();
    p.transition = &transitions_[i];
    p.transitionName = &transitionNames_[i];
  }
  if (!outputs_.empty()) {
    const std::size_t i = k % outputs_.size();
    p.output = &outputs_[i];
    p.outputName = &outputNames_[i];
  }
  return p;
}

namespace {

template <class Model>
std::optional<SubspaceSplit> bindSplit(const StateLayout& layout, const std::string& name,
                                       const SubmodelBinding& binding, const Model& model,
                                       const UnitTable& units, std::vector<Error>& errors) {
  try {
    const Matrix SA = buildProjection(layout, binding, units);
    if (SA.rows() != activeDim(model)) {
      std::ostringstream os;
      os << "binds " << SA.rows() << " states but the model expects " << activeDim(model);
      throw Error(ErrorCode::DimensionMismatch, os.str());
    }
    return makeSplit(SA, complementBasis(SA));
  } catch (const Error& e) {
    errors.emplace_back(e.code(), "submodel '" + name + "': " + e.detail());
  }
  return std::nullopt;
}

}  // namespace

ComposedSystem composeSystem(const StateLayout& layout,
                             const std::vector<TransitionComponent>& transitions,
                             const std::vector<OutputComponent>& outputs, const UnitTable& units) {
  std::vector<Error> errors;
  try {
    layout.validate();
  } catch (const Error& e) {
    errors.push_back(e);
  }
  ComposedSystem sys;
  sys.stateDim_ = layout.size();
  for (const auto& c : transitions) {
    if (auto split = bindSplit(layout, c.name, c.binding, c.model, units, errors)) {
      sys.transitions_.push_back({std::move(*split), c.model});
      sys.transitionNames_.push_back(c.name);
    }
  }
  for (const auto& c : outputs) {
    if (auto split = bindSplit(layout, c.name, c.binding, c.model, units, errors)) {
      sys.outputs_.push_back({std::move(*split), c.model});
      sys.outputNames_.push_back(c.name);
    }
  }
  if (errors.size() == 1) throw errors.front();
  if (!errors.empty()) {
    std::ostringstream os;
    os << errors.size() << " binding problems:";
    for (const auto& e : errors) os << "\n  " << e.what();
    throw Error(ErrorCode::BindingErrors, os.str());
  }
  return sys;
}

}  // namespace mbf
