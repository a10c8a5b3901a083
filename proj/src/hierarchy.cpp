#include "oqs/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>

#include "oqs/models.hpp"
#include "oqs/unravel.hpp"

namespace oqs {

namespace {

const std::vector<std::string>& joint_criteria() {
  static const std::vector<std::string> names{"fa",  "qrf",       "gqrf",      "composability",     "nib",
                                              "nqib", "divisibility", "semigroup", "distinguishability", "fdd"};
  return names;
}

const std::vector<std::string>& map_criteria() {
  static const std::vector<std::string> names{"divisibility", "semigroup", "distinguishability"};
  return names;
}

Mat plus_state() { return bloch_state(1.0, 0.0, 0.0); }

std::vector<double> uniform_grid(double step, int n) {
  std::vector<double> g;
  for (int k = 0; k <= n; ++k) g.push_back(k * step);
  return g;
}

std::vector<std::pair<double, double>> ordered_pairs(const std::vector<double>& t) {
  std::vector<std::pair<double, double>> out;
  for (size_t i = 0; i < t.size(); ++i)
    for (size_t j = i; j < t.size(); ++j) out.emplace_back(t[i], t[j]);
  return out;
}

// Three-time AFL correlation: projector pair at t0, then single coherence flips.
OpSet afl_three_time_set() {
  const Vec k0 = basis_ket(2, 0), k1 = basis_ket(2, 1);
  const Mat e01 = k0 * k1.adjoint(), e10 = k1 * k0.adjoint();
  const Mat id = Mat::Identity(2, 2);
  return {{sandwich(2.0 * projector(k0), projector(k1)), sandwich(id, e10), sandwich(e10, id), sandwich(e01, id)},
          {0.0, 0.5, 1.0, 1.5},
          "three-time coherence chain"};
}

struct Preset {
  std::shared_ptr<const JointModel> model;
  double tol = 1e-9;
  std::vector<Mat> states;
  std::vector<double> fa_times;
  std::vector<std::pair<double, double>> qrf_pairs;
  std::vector<double> gqrf_times;
  std::vector<OpSet> extra_sets;
  TimeTriple triple{};
  std::vector<double> grid;
  std::vector<std::pair<double, double>> semigroup_pairs{{0.5, 0.5}, {0.5, 1.0}, {1.0, 1.0}};
  std::function<std::vector<PulseSequence>(std::uint64_t)> pulses;
  std::optional<BreakingChannel> channel;
  std::string channel_note;
};

std::shared_ptr<const JointModel> cached_model(const std::string& name) {
  static std::map<std::string, std::shared_ptr<const JointModel>> cache;
  auto it = cache.find(name);
  if (it == cache.end()) it = cache.emplace(name, make_joint_preset(name)).first;
  return it->second;
}

Preset make_preset(const std::string& name) {
  Preset p;
  p.model = cached_model(name);
  p.states = default_initial_states(2);
  p.fa_times = {1.0, 2.0};
  p.qrf_pairs = ordered_pairs({0.2, 0.5, 1.0});
  p.gqrf_times = {0.2, 0.5, 1.0, 1.5};
  p.triple = {0.0, 1.0, 2.0};
  p.grid = uniform_grid(0.5, 6);
  p.pulses = [](std::uint64_t) { return std::vector<PulseSequence>{spin_echo(1.0)}; };
  if (name == "afl") {
    p.tol = 1e-5;
    p.states = {plus_state(), bloch_state(0.0, 0.6, 0.8)};
    p.fa_times = {0.5, 1.0};
    p.triple = {0.0, 0.5, 1.0};
    p.extra_sets = {afl_three_time_set()};
    p.channel_note = "environment has no dense representation; no breaking channel applied";
  } else if (name == "nqib") {
    p.fa_times = {M_PI, 2 * M_PI};
    p.triple = {0.0, M_PI, 2 * M_PI};
    p.grid = uniform_grid(M_PI / 3, 6);
  } else if (name == "collision") {
    p.fa_times = {2.0, 4.0};
    p.qrf_pairs = {{1.0, 2.0}, {1.0, 3.0}, {2.0, 5.0}};
    p.gqrf_times = {1.0, 2.0, 3.0, 5.0};
    p.triple = {0.0, 2.0, 4.0};
    p.grid = uniform_grid(1.0, 6);
    p.semigroup_pairs = {{1.0, 1.0}, {1.0, 2.0}, {2.0, 3.0}};
    p.pulses = [](std::uint64_t seed) { return random_pulse_sequences({1.0, 2.0, 3.0}, 4.0, 5, 2, seed); };
  } else if (name == "static-dephasing") {
    p.pulses = [](std::uint64_t) { return std::vector<PulseSequence>{spin_echo(2.0)}; };
  }
  if (!p.channel_note.size()) p.channel = computational_measure_prepare(p.model->dim_e());
  return p;
}

CriterionReport not_applicable(const std::string& criterion, const std::string& why) {
  CriterionReport r;
  r.criterion = criterion;
  r.verdict = Verdict::inconclusive;
  r.reason = why;
  return r;
}

std::vector<std::pair<Mat, Mat>> disting_pairs(std::uint64_t seed) {
  auto pairs = haar_pairs(2, 25, seed);
  pairs.emplace_back(projector(basis_ket(2, 0)), projector(basis_ket(2, 1)));
  pairs.emplace_back(plus_state(), bloch_state(-1.0, 0.0, 0.0));
  return pairs;
}

CriterionReport run_map_criterion(const std::string& criterion, const MapFamily& family, double t0,
                                  const std::vector<double>& grid, const std::vector<std::pair<double, double>>& sg,
                                  double tol, std::uint64_t seed) {
  if (criterion == "divisibility") return check_divisibility(family, grid, tol);
  if (criterion == "semigroup") return check_semigroup(family, t0, sg, tol);
  return check_distinguishability(family, disting_pairs(seed), default_w_grid(), grid, tol);
}

std::vector<Ensemble> collision_ensembles(const CollisionModel& m) {
  const Vec psi0 = 0.6 * basis_ket(2, 0) + 0.8 * basis_ket(2, 1);
  Mat h(2, 2);
  h << 1, 1, 1, -1;
  h /= std::sqrt(2.0);
  return {collision_unravel(m, psi0, [](int) { return Mat(Mat::Identity(2, 2)); }),
          collision_unravel(m, psi0, [h](int) { return h; })};
}

std::vector<Mat> reference_states(const JointModel& m, const Mat& rho0, const std::vector<double>& times) {
  std::vector<Mat> out;
  for (double t : times) out.push_back(dynamical_map(m, m.t0(), t).apply(rho0));
  return out;
}

CriterionReport run_special(const std::string& model, const std::string& criterion, const Preset& p, double tol) {
  if (model == "collision") {
    const auto& m = dynamic_cast<const CollisionModel&>(*p.model);
    const auto ensembles = collision_ensembles(m);
    if (criterion == "mpu") return check_mpu(ensembles, tol);
    const Mat rho0 = ensembles[0].trajectories[0].states[0];
    CriterionReport r = check_pu(ensembles[0], reference_states(m, rho0, ensembles[0].times), tol);
    r.witnesses["basis"] = std::string("computational basis on every ancilla");
    return r;
  }
  const auto& m = dynamic_cast<const StaticDephasingModel&>(*p.model);
  if (criterion == "pu") {
    const Vec psi0 = (basis_ket(2, 0) + basis_ket(2, 1)) / std::sqrt(2.0);
    const Ensemble e = static_unravel(m, psi0, p.grid, Mat::Identity(m.dim_e(), m.dim_e()));
    CriterionReport r = check_pu(e, reference_states(m, projector(psi0), p.grid), tol);
    r.witnesses["basis"] = std::string("register basis (the unique pure unravelling)");
    return r;
  }
  const PulseSequence echo = spin_echo(2.0);
  const DdEffect dd = dd_effectiveness(m, echo, plus_state());
  CriterionReport r;
  r.criterion = "dd_echo";
  r.tolerance = 1e-10;
  r.grid = echo.label + ", t_end = 2";
  r.witnesses["purity_free"] = dd.purity_free;
  r.witnesses["purity_dd"] = dd.purity_dd;
  r.witnesses["purity_gain"] = dd.gain;
  r.witnesses["fidelity_dd"] = dd.fidelity_dd;
  r.verdict = (1.0 - dd.purity_dd) <= 1e-10 ? Verdict::pass : Verdict::fail;
  return r;
}

}  // namespace

std::vector<std::string> model_names() { return preset_names(); }

bool is_model(const std::string& name) {
  const auto names = model_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

std::vector<std::string> criterion_names() {
  auto names = joint_criteria();
  for (const char* extra : {"pu", "mpu", "dd_echo"}) names.push_back(extra);
  return names;
}

bool is_criterion(const std::string& name) {
  const auto names = criterion_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

std::vector<std::string> applicable_criteria(const std::string& model) {
  if (!is_model(model)) throw std::invalid_argument("unknown model '" + model + "'");
  if (model == "eternal") return map_criteria();
  auto names = joint_criteria();
  if (model == "collision") names.insert(names.end(), {"pu", "mpu"});
  if (model == "static-dephasing") names.insert(names.end(), {"pu", "dd_echo"});
  return names;
}

CriterionReport run_criterion(const std::string& model, const std::string& criterion, const RunSettings& s) {
  if (!is_model(model)) throw std::invalid_argument("unknown model '" + model + "'");
  if (!is_criterion(criterion)) throw std::invalid_argument("unknown criterion '" + criterion + "'");
  const auto applicable = applicable_criteria(model);
  if (std::find(applicable.begin(), applicable.end(), criterion) == applicable.end())
    return not_applicable(criterion, "criterion does not apply to model '" + model + "'");

  if (model == "eternal") {
    const MapFamilyModel e = eternal_me();
    const MapFamily family = [e](double t) { return e.map(0.0, t); };
    const std::vector<double> grid = s.grid.value_or(uniform_grid(0.5, 6));
    return run_map_criterion(criterion, family, 0.0, grid, {{0.5, 0.5}, {0.5, 1.0}, {1.0, 1.0}}, s.tol.value_or(1e-9),
                             s.seed);
  }

  const Preset p = make_preset(model);
  const JointModel& m = *p.model;
  const double tol = s.tol.value_or(p.tol);
  const TimeTriple triple = s.triple.value_or(p.triple);
  const std::vector<double> grid = s.grid.value_or(p.grid);

  if (criterion == "fa") return check_fa(m, p.states, s.grid.value_or(p.fa_times), tol);
  if (criterion == "qrf") return check_qrf(m, pauli_pairs(), p.qrf_pairs, tol, p.states);
  if (criterion == "gqrf") {
    auto sets = random_pauli_sets(p.gqrf_times, 48, s.seed);
    sets.insert(sets.end(), p.extra_sets.begin(), p.extra_sets.end());
    return check_gqrf(m, sets, tol, p.states);
  }
  if (criterion == "composability") return check_composability(m, {triple}, tol);
  if (criterion == "nib") {
    NibSearch search;
    search.seed = s.seed;
    search.jobs = s.jobs;
    return check_nib(m, {triple}, search, tol);
  }
  if (criterion == "nqib") {
    CriterionReport r = check_nqib(m, triple, p.channel ? &*p.channel : nullptr, tol);
    if (!p.channel) r.reason = p.channel_note;
    return r;
  }
  if (criterion == "fdd") return check_fdd(m, p.pulses(s.seed), tol);
  if (criterion == "pu" || criterion == "mpu" || criterion == "dd_echo") return run_special(model, criterion, p, tol);
  const auto model_ptr = p.model;
  const MapFamily family = [model_ptr](double t) { return dynamical_map(*model_ptr, model_ptr->t0(), t); };
  return run_map_criterion(criterion, family, m.t0(), grid, p.semigroup_pairs, tol, s.seed);
}

HierarchyReport hierarchy_report(const std::string& model, const RunSettings& s) {
  HierarchyReport h;
  h.model = model;
  for (const auto& c : applicable_criteria(model)) h.reports.push_back(run_criterion(model, c, s));
  h.violations = implication_violations(h.reports);
  return h;
}

}  // namespace oqs
