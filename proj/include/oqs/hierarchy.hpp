#ifndef OQS_HIERARCHY_HPP
#define OQS_HIERARCHY_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "oqs/criteria.hpp"

namespace oqs {

struct RunSettings {
  std::optional<TimeTriple> triple;
  std::optional<std::vector<double>> grid;
  std::optional<double> tol;
  std::uint64_t seed = 7;
  int jobs = 1;
};

// Joint-model presets plus the map-only "eternal" model.
std::vector<std::string> model_names();
bool is_model(const std::string& name);
std::vector<std::string> criterion_names();
bool is_criterion(const std::string& name);
std::vector<std::string> applicable_criteria(const std::string& model);

// Throws std::invalid_argument for unknown model or criterion names; criteria that
// do not apply to the model come back inconclusive with a reason.
CriterionReport run_criterion(const std::string& model, const std::string& criterion, const RunSettings& s = {});

struct HierarchyReport {
  std::string model;
  std::vector<CriterionReport> reports;
  std::vector<std::string> violations;
};

HierarchyReport hierarchy_report(const std::string& model, const RunSettings& s = {});

}  // namespace oqs

#endif  // OQS_HIERARCHY_HPP
