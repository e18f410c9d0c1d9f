#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mbf/filter.hpp"

// Building projection rows from named, unit-annotated submodel states and
// assembling per-step splits for a system made of several submodels.
namespace mbf {

struct StateEntry {
  std::string name;
  std::string unit;
};

struct StateLayout {
  std::vector<StateEntry> states;

  Eigen::Index size() const noexcept { return static_cast<Eigen::Index>(states.size()); }
  std::optional<int> indexOf(const std::string& name) const;
  /// Throws BindingErrors on empty or duplicate names.
  void validate() const;
};

struct BindingTerm {
  std::string name;
  double coefficient = 1.0;
};

/// A submodel state. With an empty `combination` it selects the system
/// state of the same name; otherwise it is sum_k coefficient_k * state_k,
/// each term converted to `unit` first.
struct BindingEntry {
  std::string name;
  std::string unit;
  std::vector<BindingTerm> combination;
};

struct SubmodelBinding {
  std::vector<BindingEntry> states;
};

/// Multiplicative conversions: value_in_to = factor(from, to) * value_in_from.
/// Adding a pair also adds its inverse.
class UnitTable {
public:
  /// rad/deg, s/ms, m/mm.
  static UnitTable siDefaults();

  void add(const std::string& from, const std::string& to, double scale);
  /// 1 for identical units; nullopt when no conversion is known.
  std::optional<double> factor(const std::string& from, const std::string& to) const;

private:
  std::map<std::pair<std::string, std::string>, double> table_;
};

/// Rows R with (binding state i) = R.row(i) * x in the binding's units.
/// Throws UnknownState or IncompatibleUnits.
Matrix buildProjection(const StateLayout& layout, const SubmodelBinding& binding,
                       const UnitTable& units);

/// Coordinate rows e_j for the columns not chosen as pivots by a
/// column-pivoted QR of `active`, in ascending j. Throws RankDeficientActive.
Matrix complementBasis(const Matrix& active);

struct TransitionComponent {
  std::string name;
  SubmodelBinding binding;
  TransitionModel model;
};

struct OutputComponent {
  std::string name;
  SubmodelBinding binding;
  OutputModel model;
};

/// Splits and models ready for the filter. System states a submodel does
/// not reference land in its inactive block.
class ComposedSystem {
public:
  struct Plan {
    const TransitionStage* transition = nullptr;
    const OutputStage* output = nullptr;
    const std::string* transitionName = nullptr;
    const std::string* outputName = nullptr;
  };

  Eigen::Index stateDim() const noexcept { return stateDim_; }
  const std::vector<TransitionStage>& transitions() const noexcept { return transitions_; }
  const std::vector<OutputStage>& outputs() const noexcept { return outputs_; }

  /// Transition k mod |transitions| and output k mod |outputs|; null when
  /// the corresponding list is empty.
  Plan stepPlan(std::size_t k) const;

private:
  friend ComposedSystem composeSystem(const StateLayout&, const std::vector<TransitionComponent>&,
                                      const std::vector<OutputComponent>&, const UnitTable&);
  Eigen::Index stateDim_ = 0;
  std::vector<TransitionStage> transitions_;
  std::vector<OutputStage> outputs_;
  std::vector<std::string> transitionNames_, outputNames_;
};

/// Every problem found in the layout and bindings is collected and raised
/// together as BindingErrors.
ComposedSystem composeSystem(const StateLayout& layout,
                             const std::vector<TransitionComponent>& transitions,
                             const std::vector<OutputComponent>& outputs, const UnitTable& units);

}  // namespace mbf
