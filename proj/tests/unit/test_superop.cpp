#include <random>

#include "doctest.h"
#include "oqs/superop.hpp"

using namespace oqs;

namespace {

Mat random_matrix(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Mat g(d, d);
  for (int i = 0; i < d * d; ++i) g.data()[i] = cplx(n(rng), n(rng));
  return g;
}

double max_abs(const Mat& m) { return m.cwiseAbs().maxCoeff(); }

// Amplitude damping with decay probability p, Kraus form.
SuperOperator amplitude_damping(double p) {
  Mat k0 = Mat::Zero(2, 2), k1 = Mat::Zero(2, 2);
  k0(0, 0) = 1;
  k0(1, 1) = std::sqrt(1 - p);
  k1(0, 1) = std::sqrt(p);
  return sandwich(k0, k0.adjoint()) + sandwich(k1, k1.adjoint());
}

SuperOperator transpose_map(int d) {
  Mat s = Mat::Zero(d * d, d * d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) s(i * d + j, j * d + i) = 1;
  return SuperOperator(s);
}

}  // namespace

TEST_CASE("vectorization convention") {
  std::mt19937_64 rng(1);
  const Mat a = random_matrix(3, rng), b = random_matrix(3, rng), x = random_matrix(3, rng);
  CHECK(max_abs(sandwich(a, b).apply(x) - a * x * b) < 1e-12);
  CHECK(max_abs(unvec(vec(x), 3) - x) == 0.0);
}

TEST_CASE("dissipator") {
  CHECK(dissipator(Mat::Zero(2, 2)).mat().norm() == 0.0);
  const Mat rho = bloch_state(0.3, -0.2, 0.5);
  const Mat dz = dissipator(pauli('Z')).apply(rho);
  CHECK(std::abs(dz(0, 1) + 2.0 * rho(0, 1)) < 1e-15);
  CHECK(std::abs(dz(0, 0)) < 1e-15);
  CHECK(std::abs(dz(1, 1)) < 1e-15);

  Mat excited = Mat::Zero(2, 2);
  excited(1, 1) = 1;
  const Mat dm = dissipator(sigma_minus()).apply(excited);
  CHECK(std::abs(dm(1, 1) + 1.0) < 1e-15);
  CHECK(std::abs(dm(0, 0) - 1.0) < 1e-15);

  std::mt19937_64 rng(4);
  for (int k = 0; k < 10; ++k) {
    const Mat c = random_matrix(3, rng);
    CHECK(std::abs(dissipator(c).apply(random_density(3, rng)).trace()) < 1e-12);
  }
}

TEST_CASE("choi round trip and examples") {
  std::mt19937_64 rng(2);
  for (int d = 1; d <= 8; ++d) {
    SuperOperator s(random_matrix(d * d, rng));
    CHECK(max_abs(superop_of(choi_of(s)).mat() - s.mat()) < 1e-12);
  }
  const Mat j_id = choi_of(identity_map(3)).mat();
  const Vec omega = vec(Mat::Identity(3, 3));
  CHECK(max_abs(j_id - omega * omega.adjoint()) < 1e-15);

  Mat dep = Mat::Zero(4, 4);
  const Vec v = vec(Mat::Identity(2, 2));
  dep = v * v.adjoint() / 2.0;
  CHECK(max_abs(choi_of(SuperOperator(dep)).mat() - Mat::Identity(4, 4) / 2.0) < 1e-15);

  const Mat u = haar_unitary(3, rng);
  Eigen::SelfAdjointEigenSolver<Mat> es(choi_of(unitary_map(u)).mat());
  CHECK(es.eigenvalues()(8) == doctest::Approx(3.0));
  CHECK(std::abs(es.eigenvalues()(7)) < 1e-12);
}

TEST_CASE("is_cptp diagnostics") {
  auto id = is_cptp(identity_map(2));
  CHECK(id.pass);
  CHECK(std::abs(id.min_choi_eig) < 1e-12);
  auto tr = is_cptp(transpose_map(2));
  CHECK_FALSE(tr.pass);
  CHECK(tr.min_choi_eig == doctest::Approx(-1.0));
  CHECK(is_cptp(amplitude_damping(0.3)).pass);
  CHECK_FALSE(is_cptp(2.0 * identity_map(2)).pass);
}

TEST_CASE("pinv and composition") {
  std::mt19937_64 rng(6);
  const SuperOperator ad = amplitude_damping(0.4);
  CHECK(max_abs(compose(ad, identity_map(2)).mat() - ad.mat()) == 0.0);

  const Mat u = haar_unitary(2, rng);
  CHECK(max_abs(pinv(unitary_map(u)).mat() - unitary_map(u.adjoint()).mat()) < 1e-12);

  Mat proj = Mat::Zero(4, 4);
  proj(0, 0) = proj(3, 3) = 1;
  CHECK(max_abs(pinv(SuperOperator(proj)).mat() - proj) < 1e-14);

  Mat a = random_matrix(4, rng);
  a.col(3) = a.col(0) + a.col(1);
  const Mat ap = pinv(a);
  CHECK(max_abs(a * ap * a - a) < 1e-10);
  CHECK(max_abs(ap * a * ap - ap) < 1e-10);
  CHECK(max_abs((a * ap).adjoint() - a * ap) < 1e-10);
  CHECK(max_abs((ap * a).adjoint() - ap * a) < 1e-10);
  const auto diag = pinv_diagnostic(SuperOperator(a));
  CHECK(diag.rank == 3);
}

TEST_CASE("intermediate maps") {
  const SuperOperator e = amplitude_damping(0.3);
  CHECK(max_abs(intermediate_map(e, e).q.mat() - Mat::Identity(4, 4)) < 1e-12);

  const SuperOperator l = 0.7 * dissipator(sigma_minus()) + hamiltonian_part(pauli('X'));
  auto semigroup = [&](double t) { return SuperOperator(matrix_exp<double>((t * l.mat()).eval())); };
  const auto q = intermediate_map(semigroup(1.7), semigroup(0.6));
  CHECK(q.consistent);
  CHECK(max_abs(q.q.mat() - semigroup(1.1).mat()) < 1e-10);

  Mat proj = Mat::Zero(4, 4);
  proj(0, 0) = 1;
  const auto bad = intermediate_map(identity_map(2), SuperOperator(proj));
  CHECK_FALSE(bad.consistent);
  CHECK(bad.consistency_residual > 0.5);
}

TEST_CASE("master equation integration") {
  const Mat rho0 = bloch_state(0.4, 0.1, -0.6);
  auto zero = me_integrate([](double) { return SuperOperator(Mat::Zero(4, 4)); }, 2, rho0, {0.0, 1.0});
  CHECK(max_abs(zero.states.back() - rho0) == 0.0);

  auto decay = me_integrate(constant_lindblad(Mat::Zero(2, 2), {{sigma_minus(), 2.0}}), rho0, {0.0, 0.5, 1.0, 2.0});
  for (size_t k = 0; k < decay.times.size(); ++k) {
    const double t = decay.times[k];
    CHECK(std::abs(decay.states[k](1, 1) - std::exp(-2 * t) * rho0(1, 1)) < 1e-10);
    CHECK(std::abs(decay.states[k](1, 0) - std::exp(-t) * rho0(1, 0)) < 1e-10);
    CHECK(is_cptp(decay.maps[k], 1e-7).pass);
  }
  CHECK(decay.max_trace_drift < 1e-12);
  CHECK_THROWS(me_integrate(constant_lindblad(Mat::Zero(2, 2), {}), rho0, {0.0, 1.0}, -1e-3));
  CHECK_THROWS(me_integrate(constant_lindblad(Mat::Zero(2, 2), {}), rho0, {0.0, 1.0}, 0.3));
}

TEST_CASE("generator recovery") {
  const SuperOperator l = 2.0 * dissipator(sigma_minus()) + hamiltonian_part(0.3 * pauli('Z'));
  auto family = [&](double t) { return SuperOperator(matrix_exp<double>((t * l.mat()).eval())); };
  const auto est = generator_from_maps(family, 0.8, 1e-3);
  CHECK_FALSE(est.inconclusive);
  CHECK(max_abs(est.l.mat() - l.mat()) < 1e-5);
  const auto edge = generator_from_maps(family, 0.0, 1e-3, 0.0);
  CHECK(max_abs(edge.l.mat() - l.mat()) < 1e-5);

  auto singular = [](double) {
    Mat p = Mat::Zero(4, 4);
    p(0, 0) = 1;
    return SuperOperator(p);
  };
  CHECK(generator_from_maps(singular, 1.0, 1e-3).inconclusive);
}

TEST_CASE("canonical decomposition") {
  const auto amp = canonical_decompose(2.0 * dissipator(sigma_minus()));
  CHECK(amp.rates[0] == doctest::Approx(2.0));
  for (size_t k = 1; k < amp.rates.size(); ++k) CHECK(std::abs(amp.rates[k]) < 1e-10);
  const Mat c = amp.c[0];
  CHECK(std::abs(std::abs(c(0, 1)) - 1.0) < 1e-10);
  CHECK(max_abs(amp.h) < 1e-10);
  CHECK(amp.reconstruction_residual < 1e-10);

  const auto ham = canonical_decompose(hamiltonian_part(pauli('Y') + 0.5 * pauli('Z')));
  for (double r : ham.rates) CHECK(std::abs(r) < 1e-10);
  CHECK(max_abs(ham.h - (pauli('Y') + 0.5 * pauli('Z'))) < 1e-10);

  const double t = 0.7;
  const double s = 1 / std::sqrt(2.0);
  const SuperOperator eternal = 1.0 * dissipator(s * pauli('X')) + 1.0 * dissipator(s * pauli('Y')) +
                                (-std::tanh(t)) * dissipator(s * pauli('Z'));
  const auto et = canonical_decompose(eternal);
  REQUIRE(et.rates.size() == 3);
  CHECK(et.rates[0] == doctest::Approx(1.0));
  CHECK(et.rates[1] == doctest::Approx(1.0));
  CHECK(et.rates[2] == doctest::Approx(-std::tanh(t)));
  for (const Mat& ck : et.c) {
    CHECK(std::abs(ck.trace()) < 1e-12);
    CHECK(std::abs((ck.adjoint() * ck).trace() - 1.0) < 1e-12);
  }

  CHECK_THROWS(canonical_decompose(identity_map(2)));
}

TEST_CASE("canonical rates are invariant under unitary gauge") {
  std::mt19937_64 rng(12);
  const SuperOperator l = 1.3 * dissipator(sigma_minus()) + 0.4 * dissipator(pauli('Z'));
  const auto ref = canonical_decompose(l);
  for (int k = 0; k < 5; ++k) {
    const SuperOperator u = unitary_map(haar_unitary(2, rng));
    const auto g = canonical_decompose(compose(compose(u, l), pinv(u)));
    for (size_t j = 0; j < ref.rates.size(); ++j) CHECK(std::abs(g.rates[j] - ref.rates[j]) < 1e-8);
  }
}

TEST_CASE("probe residual") {
  const auto probes = probe_states(3);
  CHECK(probes.size() == 9);
  const auto r = map_residual(identity_map(2), amplitude_damping(0.5));
  CHECK(r.max_entry == doctest::Approx(0.5));
  CHECK(r.probe_trace_distance == doctest::Approx(0.5));
}
