#ifndef OQS_CORE_HPP
#define OQS_CORE_HPP

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace oqs {

template <typename Real>
using CMatrix = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Real>
using CVector = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, 1>;

using cplx = std::complex<double>;
using Mat = CMatrix<double>;
using Vec = CVector<double>;
using RVec = Eigen::VectorXd;
using Dims = std::vector<int>;

constexpr cplx I_UNIT{0.0, 1.0};

struct Tolerances {
  double herm = 1e-10;
  double trace = 1e-10;
  double psd = 1e-9;
};

class dimension_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class invalid_state : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline int dims_product(const Dims& dims) {
  return std::accumulate(dims.begin(), dims.end(), 1, std::multiplies<int>());
}

template <typename Real>
class BasicOperator {
 public:
  using Matrix = CMatrix<Real>;

  BasicOperator() : m_(Matrix::Zero(1, 1)), dims_{1} {}
  explicit BasicOperator(Matrix m) : m_(std::move(m)), dims_{static_cast<int>(m_.rows())} { check(); }
  BasicOperator(Matrix m, Dims dims) : m_(std::move(m)), dims_(std::move(dims)) { check(); }

  const Matrix& mat() const { return m_; }
  const Dims& dims() const { return dims_; }
  Eigen::Index dim() const { return m_.rows(); }
  operator const Matrix&() const { return m_; }

 private:
  void check() const {
    if (m_.rows() != m_.cols()) throw dimension_error("operator must be square");
    if (dims_.empty() || dims_product(dims_) != m_.rows())
      throw dimension_error("subsystem dims do not match matrix side " + std::to_string(m_.rows()));
    if (!m_.allFinite()) throw invalid_state("operator has non-finite entries");
  }

  Matrix m_;
  Dims dims_;
};

using Operator = BasicOperator<double>;

template <typename Derived>
typename Derived::RealScalar hermiticity_residual(const Eigen::MatrixBase<Derived>& a) {
  return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

template <typename Derived>
Eigen::Matrix<typename Derived::RealScalar, Eigen::Dynamic, 1> hermitian_eigenvalues(
    const Eigen::MatrixBase<Derived>& a) {
  using M = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  M h = (a + a.adjoint()) / typename Derived::RealScalar(2);
  Eigen::SelfAdjointEigenSolver<M> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

template <typename Real>
class BasicDensityOperator {
 public:
  BasicDensityOperator(const BasicOperator<Real>& op, const Tolerances& tol = {}) : op_(op) {
    const auto& m = op.mat();
    if (hermiticity_residual(m) > tol.herm) throw invalid_state("density operator is not Hermitian");
    if (std::abs(m.trace() - std::complex<Real>(1)) > tol.trace)
      throw invalid_state("density operator trace differs from 1");
    if (hermitian_eigenvalues(m).minCoeff() < -tol.psd)
      throw invalid_state("density operator has a negative eigenvalue");
  }
  explicit BasicDensityOperator(CMatrix<Real> m, const Tolerances& tol = {})
      : BasicDensityOperator(BasicOperator<Real>(std::move(m)), tol) {}
  BasicDensityOperator(CMatrix<Real> m, Dims dims, const Tolerances& tol = {})
      : BasicDensityOperator(BasicOperator<Real>(std::move(m), std::move(dims)), tol) {}

  const BasicOperator<Real>& op() const { return op_; }
  const CMatrix<Real>& mat() const { return op_.mat(); }
  const Dims& dims() const { return op_.dims(); }
  Eigen::Index dim() const { return op_.dim(); }
  operator const CMatrix<Real>&() const { return op_.mat(); }

 private:
  BasicOperator<Real> op_;
};

using DensityOperator = BasicDensityOperator<double>;

template <typename Real>
class BasicPureState {
 public:
  explicit BasicPureState(CVector<Real> amp, const Tolerances& tol = {})
      : BasicPureState(amp, Dims{static_cast<int>(amp.size())}, tol) {}
  BasicPureState(CVector<Real> amp, Dims dims, const Tolerances& tol = {})
      : amp_(std::move(amp)), dims_(std::move(dims)) {
    if (dims_product(dims_) != amp_.size()) throw dimension_error("pure state dims mismatch");
    if (std::abs(amp_.norm() - Real(1)) > tol.trace) throw invalid_state("pure state is not normalized");
  }

  const CVector<Real>& amplitudes() const { return amp_; }
  const Dims& dims() const { return dims_; }
  BasicOperator<Real> projector() const { return BasicOperator<Real>(amp_ * amp_.adjoint(), dims_); }

 private:
  CVector<Real> amp_;
  Dims dims_;
};

using PureState = BasicPureState<double>;

template <typename Real>
CMatrix<Real> kron(const CMatrix<Real>& a, const CMatrix<Real>& b) {
  return Eigen::kroneckerProduct(a, b).eval();
}

template <typename Real>
BasicOperator<Real> kron(const BasicOperator<Real>& a, const BasicOperator<Real>& b) {
  Dims dims = a.dims();
  dims.insert(dims.end(), b.dims().begin(), b.dims().end());
  return BasicOperator<Real>(kron<Real>(a.mat(), b.mat()), std::move(dims));
}

namespace detail {

inline std::vector<int> strides_of(const Dims& dims) {
  std::vector<int> s(dims.size(), 1);
  for (int k = static_cast<int>(dims.size()) - 2; k >= 0; --k) s[k] = s[k + 1] * dims[k + 1];
  return s;
}

// Splits every flat index into (index on kept subsystems, index on the rest).
inline std::pair<std::vector<int>, std::vector<int>> split_indices(const Dims& dims, const std::vector<int>& keep) {
  const int n = static_cast<int>(dims.size());
  std::vector<bool> kept(n, false);
  for (int k : keep) kept[k] = true;
  Dims kd, rd;
  for (int k = 0; k < n; ++k) (kept[k] ? kd : rd).push_back(dims[k]);
  const auto full = strides_of(dims);
  const auto ks = strides_of(kd);
  const auto rs = strides_of(rd);
  const int total = dims_product(dims);
  std::vector<int> ki(total), ri(total);
  for (int i = 0; i < total; ++i) {
    int a = 0, b = 0, ka = 0, rb = 0;
    for (int k = 0; k < n; ++k) {
      const int digit = (i / full[k]) % dims[k];
      if (kept[k]) a += digit * ks[ka++];
      else b += digit * rs[rb++];
    }
    ki[i] = a;
    ri[i] = b;
  }
  return {ki, ri};
}

inline void validate_subset(const Dims& dims, const std::vector<int>& idx, bool allow_empty) {
  std::vector<bool> seen(dims.size(), false);
  if (!allow_empty && idx.empty()) throw dimension_error("empty subsystem set");
  for (int k : idx) {
    if (k < 0 || k >= static_cast<int>(dims.size()) || seen[k])
      throw dimension_error("invalid subsystem index " + std::to_string(k));
    seen[k] = true;
  }
}

}  // namespace detail

template <typename Real>
BasicOperator<Real> partial_trace(const BasicOperator<Real>& a, std::vector<int> keep) {
  const Dims& dims = a.dims();
  detail::validate_subset(dims, keep, true);
  std::sort(keep.begin(), keep.end());
  Dims kd;
  for (int k : keep) kd.push_back(dims[k]);
  if (kd.empty()) kd.push_back(1);
  const int dk = dims_product(kd);
  auto [ki, ri] = detail::split_indices(dims, keep);
  CMatrix<Real> out = CMatrix<Real>::Zero(dk, dk);
  const auto& m = a.mat();
  const Eigen::Index d = m.rows();
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < d; ++i)
      if (ri[i] == ri[j]) out(ki[i], ki[j]) += m(i, j);
  return BasicOperator<Real>(std::move(out), std::move(kd));
}

template <typename Real>
BasicOperator<Real> partial_transpose(const BasicOperator<Real>& a, std::vector<int> part) {
  const Dims& dims = a.dims();
  detail::validate_subset(dims, part, false);
  std::sort(part.begin(), part.end());
  auto [pi, ri] = detail::split_indices(dims, part);
  const int d = static_cast<int>(a.dim());
  int dp = 1;
  for (int k : part) dp *= dims[k];
  const int dr = d / dp;
  std::vector<int> flat(d);
  for (int i = 0; i < d; ++i) flat[pi[i] * dr + ri[i]] = i;
  CMatrix<Real> out(d, d);
  const auto& m = a.mat();
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) out(flat[pi[j] * dr + ri[i]], flat[pi[i] * dr + ri[j]]) = m(i, j);
  return BasicOperator<Real>(std::move(out), dims);
}

template <typename Derived>
typename Derived::RealScalar trace_norm(const Eigen::MatrixBase<Derived>& a) {
  using Real = typename Derived::RealScalar;
  if (hermiticity_residual(a) <= Real(1e-12) * std::max(Real(1), a.cwiseAbs().maxCoeff()))
    return hermitian_eigenvalues(a).cwiseAbs().sum();
  using M = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Eigen::JacobiSVD<M> svd(a.eval());
  return svd.singularValues().sum();
}

template <typename Real>
Real helstrom_norm(Real w, const CMatrix<Real>& rho, const CMatrix<Real>& sigma) {
  if (!(w > Real(0) && w < Real(1))) throw std::invalid_argument("helstrom weight must lie in (0,1)");
  if (rho.rows() != sigma.rows() || rho.cols() != sigma.cols()) throw dimension_error("helstrom dims mismatch");
  CMatrix<Real> diff = w * rho - (Real(1) - w) * sigma;
  return trace_norm(diff);
}

template <typename Real>
Real trace_distance(const CMatrix<Real>& rho, const CMatrix<Real>& sigma) {
  if (rho.rows() != sigma.rows() || rho.cols() != sigma.cols()) throw dimension_error("trace distance dims mismatch");
  return trace_norm((rho - sigma).eval()) / Real(2);
}

template <typename Real>
Real negativity(const BasicOperator<Real>& rho, const std::vector<int>& part) {
  if (part.size() >= rho.dims().size()) throw dimension_error("bipartition must leave a nonempty complement");
  const auto pt = partial_transpose(rho, part);
  const auto ev = hermitian_eigenvalues(pt.mat());
  Real s = 0;
  for (Eigen::Index k = 0; k < ev.size(); ++k)
    if (ev(k) < 0) s -= ev(k);
  return s;
}

template <typename Real>
Real negativity(const BasicOperator<Real>& rho) {
  if (rho.dims().size() != 2) throw dimension_error("default bipartition needs exactly two subsystems");
  return negativity(rho, std::vector<int>{1});
}

template <typename Real>
Real von_neumann_entropy(const CMatrix<Real>& rho) {
  const auto ev = hermitian_eigenvalues(rho);
  Real s = 0;
  for (Eigen::Index k = 0; k < ev.size(); ++k)
    if (ev(k) > Real(1e-15)) s -= ev(k) * std::log(ev(k));
  return s;
}

template <typename Real>
Real mutual_information(const BasicOperator<Real>& rho, const std::vector<int>& part_a) {
  std::vector<int> part_b;
  for (int k = 0; k < static_cast<int>(rho.dims().size()); ++k)
    if (std::find(part_a.begin(), part_a.end(), k) == part_a.end()) part_b.push_back(k);
  const Real sa = von_neumann_entropy(partial_trace(rho, part_a).mat());
  const Real sb = von_neumann_entropy(partial_trace(rho, part_b).mat());
  return std::max(Real(0), sa + sb - von_neumann_entropy(rho.mat()));
}

template <typename Real>
Real purity(const CMatrix<Real>& rho) {
  return (rho * rho).trace().real();
}

template <typename Real>
CMatrix<Real> matrix_exp(const CMatrix<Real>& a) {
  if (!a.allFinite()) throw invalid_state("matrix_exp argument has non-finite entries");
  const Real scale = std::max(Real(1), a.cwiseAbs().maxCoeff());
  const Real eps = Real(1e-13) * scale;
  using C = std::complex<Real>;
  if (hermiticity_residual(a) <= eps) {
    Eigen::SelfAdjointEigenSolver<CMatrix<Real>> es((a + a.adjoint()) / Real(2));
    const auto& v = es.eigenvectors();
    return v * es.eigenvalues().array().exp().matrix().template cast<C>().asDiagonal() * v.adjoint();
  }
  if ((a + a.adjoint()).cwiseAbs().maxCoeff() <= eps) {
    CMatrix<Real> h = C(0, -1) * a;
    Eigen::SelfAdjointEigenSolver<CMatrix<Real>> es((h + h.adjoint()) / Real(2));
    const auto& v = es.eigenvectors();
    CVector<Real> ph = es.eigenvalues().unaryExpr([](Real x) { return std::polar(Real(1), x); });
    return v * ph.asDiagonal() * v.adjoint();
  }
  return a.exp();
}

// exp(-i h t) for Hermitian h.
template <typename Real>
CMatrix<Real> unitary_exp(const CMatrix<Real>& h, Real t) {
  return matrix_exp<Real>((std::complex<Real>(0, -t) * h).eval());
}

template <typename Real = double>
CMatrix<Real> pauli(char which) {
  using C = std::complex<Real>;
  CMatrix<Real> m = CMatrix<Real>::Zero(2, 2);
  switch (which) {
    case 'I': m(0, 0) = m(1, 1) = 1; break;
    case 'X': m(0, 1) = m(1, 0) = 1; break;
    case 'Y': m(0, 1) = C(0, -1); m(1, 0) = C(0, 1); break;
    case 'Z': m(0, 0) = 1; m(1, 1) = -1; break;
    default: throw std::invalid_argument(std::string("unknown Pauli label ") + which);
  }
  return m;
}

// sigma_minus = |0><1| with |0> the ground level.
template <typename Real = double>
CMatrix<Real> sigma_minus() {
  CMatrix<Real> m = CMatrix<Real>::Zero(2, 2);
  m(0, 1) = 1;
  return m;
}

template <typename Real = double>
CMatrix<Real> sigma_plus() {
  return sigma_minus<Real>().adjoint();
}

template <typename Real = double>
CVector<Real> basis_ket(int d, int i) {
  CVector<Real> v = CVector<Real>::Zero(d);
  v(i) = 1;
  return v;
}

template <typename Real = double>
CMatrix<Real> projector(const CVector<Real>& v) {
  return v * v.adjoint();
}

template <typename Real = double>
CMatrix<Real> bloch_state(Real x, Real y, Real z) {
  return (pauli<Real>('I') + x * pauli<Real>('X') + y * pauli<Real>('Y') + z * pauli<Real>('Z')) / Real(2);
}

template <typename Real = double, typename Rng>
CVector<Real> haar_state(int d, Rng& rng) {
  std::normal_distribution<Real> n(0, 1);
  CVector<Real> v(d);
  for (int k = 0; k < d; ++k) v(k) = std::complex<Real>(n(rng), n(rng));
  return v / v.norm();
}

template <typename Real = double, typename Rng>
CMatrix<Real> haar_unitary(int d, Rng& rng) {
  std::normal_distribution<Real> n(0, 1);
  CMatrix<Real> g(d, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) g(i, j) = std::complex<Real>(n(rng), n(rng));
  Eigen::HouseholderQR<CMatrix<Real>> qr(g);
  CMatrix<Real> q = qr.householderQ();
  CMatrix<Real> r = qr.matrixQR().template triangularView<Eigen::Upper>();
  for (int k = 0; k < d; ++k) {
    const auto rk = r(k, k);
    if (std::abs(rk) > 0) q.col(k) *= rk / std::abs(rk);
  }
  return q;
}

template <typename Real = double, typename Rng>
CMatrix<Real> random_density(int d, Rng& rng) {
  std::normal_distribution<Real> n(0, 1);
  CMatrix<Real> g(d, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) g(i, j) = std::complex<Real>(n(rng), n(rng));
  CMatrix<Real> rho = g * g.adjoint();
  return rho / rho.trace().real();
}

// Embeds an operator acting on the listed subsystems into the full space.
template <typename Real>
CMatrix<Real> embed(const CMatrix<Real>& op, const std::vector<int>& on, const Dims& dims) {
  detail::validate_subset(dims, on, false);
  Dims od;
  for (int k : on) od.push_back(dims[k]);
  if (dims_product(od) != op.rows()) throw dimension_error("embedded operator size mismatch");
  // split_indices orders kept digits by subsystem position, so reorder op accordingly.
  std::vector<int> sorted = on;
  std::sort(sorted.begin(), sorted.end());
  CMatrix<Real> local = op;
  if (sorted != on) {
    Dims sd;
    for (int k : sorted) sd.push_back(dims[k]);
    const auto src = detail::strides_of(od);
    const auto dst = detail::strides_of(sd);
    const int n = dims_product(od);
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) {
      int target = 0;
      for (size_t a = 0; a < on.size(); ++a) {
        const int digit = (i / src[a]) % od[a];
        const size_t pos = std::find(sorted.begin(), sorted.end(), on[a]) - sorted.begin();
        target += digit * dst[pos];
      }
      perm[i] = target;
    }
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) local(perm[i], perm[j]) = op(i, j);
  }
  auto [ki, ri] = detail::split_indices(dims, sorted);
  const int d = dims_product(dims);
  CMatrix<Real> out = CMatrix<Real>::Zero(d, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i)
      if (ri[i] == ri[j]) out(i, j) = local(ki[i], ki[j]);
  return out;
}

}  // namespace oqs

#endif  // OQS_CORE_HPP
