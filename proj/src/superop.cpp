#include "oqs/superop.hpp"

#include <cmath>
#include <numeric>

namespace oqs {

namespace {

int side_of(const Mat& m) {
  const auto n = m.rows();
  const int d = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
  if (m.cols() != n || static_cast<Eigen::Index>(d) * d != n)
    throw dimension_error("superoperator matrix must be d^2 x d^2");
  return d;
}

}  // namespace

SuperOperator::SuperOperator(Mat m) : m_(std::move(m)), d_(side_of(m_)) {
  if (!m_.allFinite()) throw invalid_state("superoperator has non-finite entries");
}

Mat SuperOperator::apply(const Mat& x) const {
  if (x.rows() != d_ || x.cols() != d_) throw dimension_error("superoperator applied to wrong dimension");
  return unvec(m_ * vec(x), d_);
}

ChoiMatrix::ChoiMatrix(Mat m, int d) : m_(std::move(m)), d_(d) {
  if (m_.rows() != d * d || m_.cols() != d * d) throw dimension_error("Choi matrix must be d^2 x d^2");
}

Vec vec(const Mat& x) { return Eigen::Map<const Vec>(x.data(), x.size()); }

Mat unvec(const Vec& v, int d) { return Eigen::Map<const Mat>(v.data(), d, d); }

SuperOperator identity_map(int d) { return SuperOperator(Mat::Identity(d * d, d * d)); }

SuperOperator sandwich(const Mat& a, const Mat& b) { return SuperOperator(kron<double>(b.transpose(), a)); }

SuperOperator unitary_map(const Mat& u) { return sandwich(u, u.adjoint()); }

SuperOperator hamiltonian_part(const Mat& h) {
  const auto d = h.rows();
  const Mat id = Mat::Identity(d, d);
  return SuperOperator(cplx(0, -1) * (kron<double>(id, h) - kron<double>(h.transpose(), id)));
}

SuperOperator dissipator(const Mat& c) {
  const auto d = c.rows();
  if (c.cols() != d) throw dimension_error("dissipator operator must be square");
  const Mat id = Mat::Identity(d, d);
  const Mat cdc = c.adjoint() * c;
  return SuperOperator(kron<double>(c.conjugate(), c) - 0.5 * kron<double>(id, cdc) -
                       0.5 * kron<double>(cdc.transpose(), id));
}

SuperOperator compose(const SuperOperator& s2, const SuperOperator& s1) {
  if (s2.dim() != s1.dim()) throw dimension_error("compose dimension mismatch");
  return SuperOperator(s2.mat() * s1.mat());
}

SuperOperator operator+(const SuperOperator& a, const SuperOperator& b) { return SuperOperator(a.mat() + b.mat()); }
SuperOperator operator-(const SuperOperator& a, const SuperOperator& b) { return SuperOperator(a.mat() - b.mat()); }
SuperOperator operator*(double s, const SuperOperator& a) { return SuperOperator(s * a.mat()); }

// J[a*d+i, b*d+j] = E(|i><j|)[a,b] = S[b*d+a, j*d+i].
ChoiMatrix choi_of(const SuperOperator& s) {
  const int d = s.dim();
  Mat out(d * d, d * d);
  for (int a = 0; a < d; ++a)
    for (int i = 0; i < d; ++i)
      for (int b = 0; b < d; ++b)
        for (int j = 0; j < d; ++j) out(a * d + i, b * d + j) = s.mat()(b * d + a, j * d + i);
  return ChoiMatrix(std::move(out), d);
}

SuperOperator superop_of(const ChoiMatrix& c) {
  const int d = c.dim();
  Mat out(d * d, d * d);
  for (int a = 0; a < d; ++a)
    for (int i = 0; i < d; ++i)
      for (int b = 0; b < d; ++b)
        for (int j = 0; j < d; ++j) out(b * d + a, j * d + i) = c.mat()(a * d + i, b * d + j);
  return SuperOperator(std::move(out));
}

CptpDiagnostic is_cptp(const SuperOperator& s, double tol) {
  const int d = s.dim();
  const ChoiMatrix j = choi_of(s);
  CptpDiagnostic out;
  out.tol = tol;
  out.min_choi_eig = hermitian_eigenvalues(j.mat()).minCoeff();
  Mat tr_out = Mat::Zero(d, d);
  for (int a = 0; a < d; ++a) tr_out += j.mat().block(a * d, a * d, d, d);
  out.tp_residual = (tr_out - Mat::Identity(d, d)).cwiseAbs().maxCoeff();
  const double herm = hermiticity_residual(j.mat());
  out.pass = out.min_choi_eig >= -tol * d && out.tp_residual <= tol && herm <= tol * d;
  return out;
}

Mat pinv(const Mat& m, double rel_cutoff, double* cutoff_out, int* rank_out, double* condition_out) {
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() ? sv(0) : 0.0;
  const double cutoff = rel_cutoff * smax;
  int rank = 0;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
  for (Eigen::Index k = 0; k < sv.size(); ++k)
    if (sv(k) > cutoff) {
      inv(k) = 1.0 / sv(k);
      ++rank;
    }
  if (cutoff_out) *cutoff_out = cutoff;
  if (rank_out) *rank_out = rank;
  if (condition_out) {
    const double smin = sv.size() ? sv(sv.size() - 1) : 0.0;
    *condition_out = smin > 0 ? smax / smin : INFINITY;
  }
  return svd.matrixV() * inv.cast<cplx>().asDiagonal() * svd.matrixU().adjoint();
}

SuperOperator pinv(const SuperOperator& s) { return SuperOperator(pinv(s.mat())); }

PinvResult pinv_diagnostic(const SuperOperator& s) {
  PinvResult r;
  r.inverse = SuperOperator(pinv(s.mat(), 1e-12, &r.cutoff, &r.rank, &r.condition));
  return r;
}

IntermediateMap intermediate_map(const SuperOperator& e_late, const SuperOperator& e_early, double tol) {
  if (e_late.dim() != e_early.dim()) throw dimension_error("intermediate map dimension mismatch");
  const PinvResult p = pinv_diagnostic(e_early);
  IntermediateMap out;
  out.q = compose(e_late, p.inverse);
  out.condition = p.condition;
  out.consistency_residual = (out.q.mat() * e_early.mat() - e_late.mat()).cwiseAbs().maxCoeff();
  out.consistent = out.consistency_residual <= tol;
  return out;
}

Mat LindbladSpec::h(double t) const {
  if (hamiltonian) return hamiltonian(t);
  return Mat::Zero(dim, dim);
}

LindbladSpec constant_lindblad(const Mat& h, const std::vector<std::pair<Mat, double>>& channels) {
  LindbladSpec spec;
  spec.dim = static_cast<int>(h.rows());
  spec.hamiltonian = [h](double) { return h; };
  for (const auto& [c, g] : channels) spec.channels.push_back({c, [g](double) { return g; }});
  return spec;
}

SuperOperator generator_at(const LindbladSpec& spec, double t) {
  const Mat h = spec.h(t);
  if (hermiticity_residual(h) > 1e-10) throw invalid_state("Lindblad Hamiltonian is not Hermitian at t = " + std::to_string(t));
  Mat l = hamiltonian_part(h).mat();
  for (const auto& ch : spec.channels) l += ch.rate(t) * dissipator(ch.c).mat();
  return SuperOperator(std::move(l));
}

MeResult me_integrate(const Generator& gen, int dim, const Mat& rho0, const std::vector<double>& t_grid,
                      double step) {
  if (!(step > 0)) throw std::invalid_argument("integration step must be positive");
  if (t_grid.empty()) throw std::invalid_argument("empty time grid");
  if (rho0.rows() != dim) throw dimension_error("initial state dimension mismatch");
  const int n = dim * dim;
  MeResult out;
  Mat phi = Mat::Identity(n, n);
  Vec x = vec(rho0);
  double t = t_grid.front();
  auto record = [&](double tt) {
    out.times.push_back(tt);
    Mat rho = unvec(x, dim);
    out.max_trace_drift = std::max(out.max_trace_drift, std::abs(rho.trace() - rho0.trace()));
    out.states.push_back(std::move(rho));
    out.maps.emplace_back(phi);
  };
  record(t);
  for (size_t k = 1; k < t_grid.size(); ++k) {
    const double span = t_grid[k] - t;
    if (span < 0) throw std::invalid_argument("time grid must be increasing");
    const long steps = std::lround(span / step);
    if (steps > 0 && std::abs(steps * step - span) > 1e-9 * std::max(1.0, span))
      throw std::invalid_argument("step does not divide the grid interval");
    const double h = steps > 0 ? span / steps : 0.0;
    for (long s = 0; s < steps; ++s) {
      const Mat l1 = gen(t).mat();
      const Mat l2 = gen(t + h / 2).mat();
      const Mat l4 = gen(t + h).mat();
      if (!l1.allFinite() || !l2.allFinite() || !l4.allFinite())
        throw invalid_state("generator is not finite at t = " + std::to_string(t));
      // The same stages propagate the state and the full basis.
      const Mat k1 = l1 * phi;
      const Mat k2 = l2 * (phi + (h / 2) * k1);
      const Mat k3 = l2 * (phi + (h / 2) * k2);
      const Mat k4 = l4 * (phi + h * k3);
      const Vec y1 = l1 * x;
      const Vec y2 = l2 * (x + (h / 2) * y1);
      const Vec y3 = l2 * (x + (h / 2) * y2);
      const Vec y4 = l4 * (x + h * y3);
      phi += (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
      x += (h / 6) * (y1 + 2 * y2 + 2 * y3 + y4);
      t += h;
    }
    t = t_grid[k];
    record(t);
  }
  return out;
}

MeResult me_integrate(const LindbladSpec& spec, const Mat& rho0, const std::vector<double>& t_grid, double step) {
  return me_integrate([&spec](double t) { return generator_at(spec, t); }, spec.dim, rho0, t_grid, step);
}

GeneratorEstimate generator_from_maps(const MapFamily& family, double t, double dt, double t_min,
                                      double max_condition) {
  GeneratorEstimate out;
  const SuperOperator e = family(t);
  Mat deriv;
  if (t - dt >= t_min) {
    deriv = (family(t + dt).mat() - family(t - dt).mat()) / (2 * dt);
  } else {
    deriv = (-3.0 * e.mat() + 4.0 * family(t + dt).mat() - family(t + 2 * dt).mat()) / (2 * dt);
  }
  const PinvResult p = pinv_diagnostic(e);
  out.condition = p.condition;
  out.l = SuperOperator(deriv * p.inverse.mat());
  if (!(p.condition <= max_condition)) {
    out.inconclusive = true;
    out.reason = "E(t) is ill-conditioned (condition number " + std::to_string(p.condition) + ")";
  }
  return out;
}

std::vector<Mat> gell_mann_basis(int d) {
  std::vector<Mat> basis;
  basis.push_back(Mat::Identity(d, d) / std::sqrt(static_cast<double>(d)));
  const double r2 = std::sqrt(2.0);
  for (int j = 0; j < d; ++j)
    for (int k = j + 1; k < d; ++k) {
      Mat s = Mat::Zero(d, d);
      s(j, k) = s(k, j) = 1.0 / r2;
      basis.push_back(s);
      Mat a = Mat::Zero(d, d);
      a(j, k) = cplx(0, -1.0 / r2);
      a(k, j) = cplx(0, 1.0 / r2);
      basis.push_back(a);
    }
  for (int l = 1; l < d; ++l) {
    Mat z = Mat::Zero(d, d);
    const double norm = 1.0 / std::sqrt(static_cast<double>(l * (l + 1)));
    for (int m = 0; m < l; ++m) z(m, m) = norm;
    z(l, l) = -l * norm;
    basis.push_back(z);
  }
  return basis;
}

SuperOperator lindblad_generator(const Mat& h, const std::vector<Mat>& c, const std::vector<double>& rates) {
  Mat l = hamiltonian_part(h).mat();
  for (size_t k = 0; k < c.size(); ++k) l += rates[k] * dissipator(c[k]).mat();
  return SuperOperator(std::move(l));
}

CanonicalGenerator canonical_decompose(const SuperOperator& l, double tol) {
  const int d = l.dim();
  const int n = d * d;
  const Vec id_vec = vec(Mat::Identity(d, d));
  const double trace_leak = (id_vec.adjoint() * l.mat()).cwiseAbs().maxCoeff();
  if (trace_leak > tol) throw std::invalid_argument("generator is not trace-annihilating (residual " + std::to_string(trace_leak) + ")");
  const auto f = gell_mann_basis(d);
  // L = sum_jk c_jk F_j . F_k^dag; the superoperators conj(F_k) kron F_j are orthonormal.
  Mat c(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      const Mat basis = kron<double>(f[k].conjugate(), f[j]);
      c(j, k) = (basis.adjoint() * l.mat()).trace();
    }
  const Mat kos = c.bottomRightCorner(n - 1, n - 1);
  if (hermiticity_residual(kos) > std::max(tol, 1e-12) * std::max(1.0, kos.cwiseAbs().maxCoeff()) * 10)
    throw std::invalid_argument("generator is not Hermiticity-preserving");
  Mat fop = Mat::Zero(d, d);
  for (int j = 1; j < n; ++j) fop += c(j, 0) * f[j];
  fop /= std::sqrt(static_cast<double>(d));
  CanonicalGenerator out;
  Mat h = cplx(0, 0.5) * (fop - fop.adjoint());
  h -= (h.trace() / static_cast<double>(d)) * Mat::Identity(d, d);
  out.h = (h + h.adjoint()) / 2.0;
  Eigen::SelfAdjointEigenSolver<Mat> es((kos + kos.adjoint()) / 2.0);
  const auto& vals = es.eigenvalues();
  const auto& vecs = es.eigenvectors();
  std::vector<int> order(n - 1);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return vals(a) > vals(b); });
  for (int m : order) {
    Mat cm = Mat::Zero(d, d);
    for (int j = 1; j < n; ++j) cm += vecs(j - 1, m) * f[j];
    out.c.push_back(cm);
    out.rates.push_back(vals(m));
  }
  out.reconstruction_residual =
      (lindblad_generator(out.h, out.c, out.rates).mat() - l.mat()).cwiseAbs().maxCoeff();
  return out;
}

std::vector<Mat> probe_states(int d) {
  std::vector<Mat> out;
  for (int i = 0; i < d; ++i) out.push_back(projector<double>(basis_ket<double>(d, i)));
  const double r = 1.0 / std::sqrt(2.0);
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      Vec a = r * (basis_ket<double>(d, i) + basis_ket<double>(d, j));
      Vec b = r * (basis_ket<double>(d, i) + cplx(0, 1) * basis_ket<double>(d, j));
      out.push_back(projector<double>(a));
      out.push_back(projector<double>(b));
    }
  return out;
}

MapResidual map_residual(const SuperOperator& a, const SuperOperator& b) {
  if (a.dim() != b.dim()) throw dimension_error("map residual dimension mismatch");
  MapResidual r;
  const Mat diff = a.mat() - b.mat();
  r.max_entry = diff.cwiseAbs().maxCoeff();
  const SuperOperator ds(diff);
  for (const Mat& p : probe_states(a.dim())) r.probe_trace_distance = std::max(r.probe_trace_distance, trace_norm(ds.apply(p)) / 2);
  return r;
}

}  // namespace oqs
