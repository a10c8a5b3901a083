#include <cmath>
#include <sstream>

#include "doctest.h"
#include "oqs/unravel.hpp"

using namespace oqs;

namespace {

double max_abs(const Mat& m) { return m.cwiseAbs().maxCoeff(); }

LindbladSpec decay_spec() { return constant_lindblad(Mat::Zero(2, 2), {{sigma_minus(), 2.0}}); }

Mat hadamard() {
  Mat h(2, 2);
  h << 1, 1, 1, -1;
  return h / std::sqrt(2.0);
}

std::shared_ptr<CollisionModel> collision_preset() {
  return std::dynamic_pointer_cast<CollisionModel>(make_joint_preset("collision"));
}

std::shared_ptr<StaticDephasingModel> static_preset() {
  return std::dynamic_pointer_cast<StaticDephasingModel>(make_joint_preset("static-dephasing"));
}

bool identical(const Ensemble& a, const Ensemble& b) {
  if (a.trajectories.size() != b.trajectories.size()) return false;
  for (size_t i = 0; i < a.trajectories.size(); ++i) {
    const auto& x = a.trajectories[i];
    const auto& y = b.trajectories[i];
    if (x.record != y.record || x.weight != y.weight) return false;
    for (size_t k = 0; k < x.states.size(); ++k)
      if (x.states[k] != y.states[k]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("jump unravelling of spontaneous decay") {
  const std::vector<double> grid{0.0, 0.25, 0.5, 1.0};
  const Vec excited = basis_ket(2, 1);
  const Mat pe = projector(basis_ket(2, 1));
  for (bool diffusive : {false, true}) {
    const Ensemble e = diffusive ? mcwf_diffusive(decay_spec(), excited, grid, 5000, 11)
                                 : mcwf_jump(decay_spec(), excited, grid, 5000, 11);
    CHECK(e.trajectories.size() == 5000);
    for (double t : {0.25, 0.5, 1.0}) {
      const Estimate est = ensemble_expectation(e, time_index_of(e, t), pe);
      CHECK(std::abs(est.mean - std::exp(-2 * t)) < 3 * est.std_error);
    }
    CHECK(max_impurity(e) < 1e-12);
  }
}

TEST_CASE("jump and diffusive ensembles share the mean but not the second moment") {
  const std::vector<double> grid{0.0, 0.25};
  const Vec plus = (basis_ket(2, 0) + basis_ket(2, 1)) / std::sqrt(2.0);
  const Ensemble j = mcwf_jump(decay_spec(), plus, grid, 4000, 3);
  const Ensemble d = mcwf_diffusive(decay_spec(), plus, grid, 4000, 3);
  CHECK(max_abs(ensemble_mean(j, 1) - ensemble_mean(d, 1)) < 0.05);
  CHECK(max_abs(ensemble_second_moment(j, 1) - ensemble_second_moment(d, 1)) > 0.015);
}

TEST_CASE("zero rates give deterministic unitary trajectories") {
  const LindbladSpec spec = constant_lindblad(pauli('X'), {{sigma_minus(), 0.0}});
  const Vec g = basis_ket(2, 0);
  const std::vector<double> grid{0.0, 0.3, 0.7};
  const Mat exact = unitary_exp<double>(pauli('X'), 0.7) * projector(g) * unitary_exp<double>(pauli('X'), 0.7).adjoint();
  for (bool diffusive : {false, true}) {
    const Ensemble e = diffusive ? mcwf_diffusive(spec, g, grid, 20, 5) : mcwf_jump(spec, g, grid, 20, 5);
    const Estimate est = ensemble_expectation(e, 2, pauli('Z'));
    CHECK(est.sample_variance < 1e-20);
    CHECK(max_abs(ensemble_mean(e, 2) - exact) < (diffusive ? 1e-3 : 1e-9));
  }
}

TEST_CASE("negative rates and oversized steps are rejected") {
  const MapFamilyModel eternal = eternal_me();
  REQUIRE(eternal.spec.has_value());
  const Vec psi = basis_ket(2, 1);
  try {
    mcwf_jump(*eternal.spec, psi, {0.0, 0.5}, 4, 1);
    FAIL("expected negative_rate_error");
  } catch (const negative_rate_error& err) {
    const std::string msg = err.what();
    CHECK(msg.find("gamma_2") != std::string::npos);
    CHECK(msg.find("t = 0.001") != std::string::npos);
  }
  CHECK_THROWS_AS(mcwf_diffusive(*eternal.spec, psi, {0.0, 0.5}, 4, 1), negative_rate_error);
  CHECK_THROWS_AS(mcwf_jump(decay_spec(), psi, {0.0, 0.5}, 4, 1, McwfOptions{0.1, 1}), step_size_error);
  CHECK_THROWS_AS(mcwf_jump(decay_spec(), psi, {0.0, 0.5005}, 4, 1, McwfOptions{1e-3, 1}), step_size_error);
}

TEST_CASE("trajectory generation is independent of worker count") {
  const std::vector<double> grid{0.0, 0.5};
  const Vec psi = basis_ket(2, 1);
  for (bool diffusive : {false, true}) {
    auto run = [&](int jobs) {
      const McwfOptions opt{1e-3, jobs};
      return diffusive ? mcwf_diffusive(decay_spec(), psi, grid, 64, 99, opt)
                       : mcwf_jump(decay_spec(), psi, grid, 64, 99, opt);
    };
    const Ensemble serial = run(1);
    CHECK(identical(serial, run(4)));
    CHECK(identical(serial, run(1)));
  }
  CHECK_FALSE(identical(mcwf_jump(decay_spec(), psi, grid, 64, 1), mcwf_jump(decay_spec(), psi, grid, 64, 2)));
}

TEST_CASE("variance of the mean estimator scales as 1/M") {
  const std::vector<double> grid{0.0, 0.5};
  const Vec psi = basis_ket(2, 1);
  const Mat pe = projector(psi);
  const McwfOptions opt{1e-2, 1};
  auto mean_var = [&](int m) {
    double acc = 0;
    for (int rep = 0; rep < 10; ++rep) {
      const Ensemble e = mcwf_jump(decay_spec(), psi, grid, m, 1000 + rep + 17 * m, opt);
      acc += std::pow(ensemble_expectation(e, 1, pe).std_error, 2);
    }
    return acc / 10;
  };
  const double ratio = mean_var(500) / mean_var(2000);
  CHECK(std::abs(ratio / 4.0 - 1.0) < 0.2);
}

TEST_CASE("collision unravellings") {
  const auto m = collision_preset();
  const Vec psi0 = (0.6 * basis_ket(2, 0) + 0.8 * basis_ket(2, 1));
  const Ensemble comp = collision_unravel(*m, psi0, [](int) { return Mat(Mat::Identity(2, 2)); });
  const Ensemble conj = collision_unravel(*m, psi0, [](int) { return hadamard(); });
  CHECK(comp.exact);
  CHECK(conj.trajectories.size() == 64);
  std::vector<Mat> reference;
  for (double t : comp.times) reference.push_back(dynamical_map(*m, 0.0, t).apply(projector(psi0)));
  for (const Ensemble* e : {&comp, &conj}) {
    const CriterionReport pu = check_pu(*e, reference, 1e-10);
    CHECK(pu.verdict == Verdict::pass);
    CHECK(pu.number("max_impurity") < 1e-12);
    CHECK(pu.number("weight_sum_error") < 1e-12);
  }
  double moment_gap = 0;
  for (size_t k = 0; k < comp.times.size(); ++k)
    moment_gap = std::max(moment_gap, max_abs(ensemble_second_moment(comp, k) - ensemble_second_moment(conj, k)));
  CHECK(moment_gap >= 0.05);
  const CriterionReport mpu = check_mpu({comp, conj}, 1e-10);
  CHECK(mpu.verdict == Verdict::pass);
  CHECK(check_mpu({comp}, 1e-10).verdict == Verdict::inconclusive);
  CHECK(check_mpu({comp, comp}, 1e-10).verdict == Verdict::fail);
}

TEST_CASE("collision unravelling with a trivial slot unitary") {
  Mat anc = Mat::Zero(2, 2);
  anc(0, 0) = 1;
  const CollisionModel m = collision(4, Mat::Identity(4, 4), anc);
  const Vec psi0 = (basis_ket(2, 0) + cplx(0, 1) * basis_ket(2, 1)) / std::sqrt(2.0);
  const Ensemble e = collision_unravel(m, psi0, [](int) { return hadamard(); });
  for (const auto& tr : e.trajectories)
    for (const Mat& s : tr.states) CHECK(max_abs(s - projector(psi0)) < 1e-14);
}

TEST_CASE("collision unravelling switches to sampling beyond the branch budget") {
  const auto m = collision_preset();
  const Vec psi0 = basis_ket(2, 1);
  const Ensemble e = collision_unravel(*m, psi0, [](int) { return Mat(Mat::Identity(2, 2)); },
                                       UnravelOptions{16, 4000, 5});
  CHECK_FALSE(e.exact);
  CHECK(e.trajectories.size() == 4000);
  const Mat exact = dynamical_map(*m, 0.0, 6.0).apply(projector(psi0));
  const Estimate est = ensemble_expectation(e, 6, projector(psi0));
  CHECK(std::abs(est.mean - exact(1, 1).real()) < 4 * est.std_error);
  CHECK(check_pu(e, std::vector<Mat>(7, exact), 1e-10).verdict == Verdict::inconclusive);
}

TEST_CASE("static dephasing unravellings") {
  const auto m = static_preset();
  const Vec psi0 = (basis_ket(2, 0) + basis_ket(2, 1)) / std::sqrt(2.0);
  const std::vector<double> times{0.0, 0.4, 1.3, 2.0};
  std::vector<Mat> reference;
  for (double t : times) reference.push_back(dynamical_map(*m, 0.0, t).apply(projector(psi0)));
  const Ensemble reg = static_unravel(*m, psi0, times, Mat::Identity(4, 4));
  CHECK(reg.trajectories.size() == 4);
  const CriterionReport pu = check_pu(reg, reference, 1e-12);
  CHECK(pu.verdict == Verdict::pass);

  std::mt19937_64 rng(4);
  const Ensemble other = static_unravel(*m, psi0, times, haar_unitary(4, rng));
  for (size_t k = 0; k < times.size(); ++k) CHECK(max_abs(ensemble_mean(other, k) - reference[k]) < 1e-12);
  CHECK(max_impurity(other) > 1e-3);
  CHECK(check_pu(other, reference, 1e-10).verdict == Verdict::fail);

  const StaticDephasingModel single = static_dephasing({1.0}, {pauli('Z')});
  const Ensemble one = static_unravel(single, psi0, times, Mat::Identity(1, 1));
  REQUIRE(one.trajectories.size() == 1);
  const Mat u = unitary_exp<double>(pauli('Z'), 2.0);
  CHECK(max_abs(one.trajectories[0].states[3] - u * projector(psi0) * u.adjoint()) < 1e-12);
}

TEST_CASE("ensemble helpers") {
  Ensemble e;
  CHECK_THROWS(ensemble_mean(e, 0));
  e.times = {0.0};
  e.dim = 2;
  Trajectory tr;
  tr.states.push_back(projector(basis_ket(2, 0)));
  e.trajectories.push_back(tr);
  CHECK(max_abs(ensemble_mean(e, 0) - projector(basis_ket(2, 0))) == 0.0);
  CHECK(std::isnan(ensemble_expectation(e, 0, pauli('Z')).std_error));
  CHECK_THROWS_AS(ensemble_mean(e, 3), std::out_of_range);
  CHECK_THROWS_AS(time_index_of(e, 0.5), std::out_of_range);

  std::ostringstream os;
  write_ensemble_csv(os, e);
  CHECK(os.str() == "time,trajectory,weight,x,y,z,purity\n0,0,1,0,0,1,1\n");
}
