#include <cmath>
#include <stdexcept>

#include "oqs/models.hpp"

namespace oqs {

namespace {

double bump_edge(double s) { return s > 0 ? std::exp(-1.0 / s) : 0.0; }

// 1 for s <= 0, 0 for s >= 1, infinitely differentiable in between.
double smooth_window(double s) {
  if (s <= 0) return 1.0;
  if (s >= 1) return 0.0;
  const double a = bump_edge(1 - s), b = bump_edge(s);
  return a / (a + b);
}

double sigma_z_eig(int k) { return k == 0 ? 1.0 : -1.0; }

Mat afl_block(double half_g, double x, double dt) {
  Mat u = Mat::Zero(2, 2);
  u(0, 0) = std::polar(1.0, -half_g * x * dt);
  u(1, 1) = std::polar(1.0, half_g * x * dt);
  return u;
}

}  // namespace

AflModel::Discretization AflModel::discretize(double gamma, const AflGrid& grid) {
  if (!(gamma > 0)) throw std::invalid_argument("afl requires gamma > 0");
  if (grid.points < 3 || grid.points % 2 == 0) throw std::invalid_argument("afl grid needs an odd point count >= 3");
  if (!(grid.taper_start > 0 && grid.taper_start < grid.cutoff))
    throw std::invalid_argument("afl taper must start inside the cutoff");
  const int n = grid.points;
  const double h = 2 * grid.cutoff / (n - 1);
  Discretization d;
  d.x.resize(n);
  RVec base(n), bump(n);
  for (int k = 0; k < n; ++k) {
    const double u = -grid.cutoff + k * h;
    d.x(k) = gamma * u;
    const double phi = smooth_window((std::abs(u) - grid.taper_start) / (grid.cutoff - grid.taper_start));
    base(k) = h * (1.0 / M_PI) / (u * u + 1.0) * phi;
    bump(k) = phi * (1.0 - phi);
  }
  // Lorentzian mass outside the taper is moved onto a smooth bump inside it.
  bump /= bump.sum();
  d.w = base + (1.0 - base.sum()) * bump;
  d.w /= d.w.sum();
  return d;
}

AflModel::AflModel(double gamma, double g, const AflGrid& grid) : AflModel(gamma, g, discretize(gamma, grid)) {}

AflModel::AflModel(double gamma, double g, Discretization disc)
    : RegisterJointModel(
          "afl", 2, disc.w,
          [x = disc.x, half_g = g / 2](int j, double t1, double t2) { return afl_block(half_g, x(j), t2 - t1); },
          Capabilities{true, true, false}, false),
      gamma_(gamma),
      g_(g),
      x_(std::move(disc.x)) {
  if (!(g > 0)) throw std::invalid_argument("afl requires g > 0");
  for (double b = 0.2; b <= 8.0 + 1e-12; b += 0.05)
    quad_err_ = std::max(quad_err_, std::abs(chi_grid(b / gamma_) - chi_exact(b / gamma_)));
  if (quad_err_ > 1e-4)
    throw std::invalid_argument("afl grid too coarse: quadrature error " + std::to_string(quad_err_));
}

cplx AflModel::chi_grid(double a) const {
  const RVec w = register_weights();
  cplx s = 0;
  for (int k = 0; k < x_.size(); ++k) s += w(k) * std::polar(1.0, -a * x_(k));
  return s;
}

double AflModel::chi_exact(double a) const { return std::exp(-gamma_ * std::abs(a)); }

SuperOperator AflModel::analytic_map(double t1, double t2) const {
  const double c = chi_exact(g_ * (t2 - t1));
  Mat s = Mat::Identity(4, 4);
  s(1, 1) = c;
  s(2, 2) = c;
  return SuperOperator(s);
}

Vec AflModel::joint_pure_state(const Vec& psi_s, double t) const {
  if (psi_s.size() != 2) throw dimension_error("afl system state must be a qubit");
  const RVec w = register_weights();
  const int n = static_cast<int>(x_.size());
  Vec out(2 * n);
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < n; ++k)
      out(i * n + k) = psi_s(i) * std::sqrt(w(k)) * std::polar(1.0, -(g_ / 2) * sigma_z_eig(i) * x_(k) * t);
  return out;
}

AflModel afl(double gamma, double g, const AflGrid& grid) { return AflModel(gamma, g, grid); }

namespace {

struct PathTerm {
  cplx amp;
  int k;
  int j;
  double phase;
  double regression;
};

std::pair<cplx, cplx> afl_paths(double gamma, double g, const std::vector<SuperOperator>& ops,
                                const std::vector<double>& times, const Mat& rho_s0) {
  if (ops.empty() || ops.size() != times.size()) throw std::invalid_argument("one operation per time required");
  if (rho_s0.rows() != 2) throw dimension_error("afl correlations act on a qubit");
  for (size_t k = 1; k < times.size(); ++k)
    if (times[k] < times[k - 1]) throw std::invalid_argument("times must be nondecreasing");
  std::vector<PathTerm> terms;
  const Mat x0 = ops[0].apply(rho_s0);
  for (int j = 0; j < 2; ++j)
    for (int k = 0; k < 2; ++k)
      if (x0(k, j) != cplx(0)) terms.push_back({x0(k, j), k, j, 0.0, 1.0});
  for (size_t idx = 1; idx < ops.size(); ++idx) {
    const double dt = times[idx] - times[idx - 1];
    const Mat& l = ops[idx].mat();
    std::vector<PathTerm> next;
    for (const auto& term : terms) {
      const double a = (sigma_z_eig(term.k) - sigma_z_eig(term.j)) * (g / 2) * dt;
      const double phase = term.phase + a;
      const double reg = term.regression * std::exp(-gamma * std::abs(a));
      const int col = term.j * 2 + term.k;
      for (int jp = 0; jp < 2; ++jp)
        for (int kp = 0; kp < 2; ++kp) {
          const cplx c = l(jp * 2 + kp, col);
          if (c != cplx(0)) next.push_back({term.amp * c, kp, jp, phase, reg});
        }
    }
    terms = std::move(next);
  }
  cplx exact = 0, regression = 0;
  for (const auto& term : terms)
    if (term.k == term.j) {
      exact += term.amp * std::exp(-gamma * std::abs(term.phase));
      regression += term.amp * term.regression;
    }
  return {exact, regression};
}

}  // namespace

cplx afl_correlation_exact(double gamma, double g, const std::vector<SuperOperator>& ops,
                           const std::vector<double>& times, const Mat& rho_s0) {
  return afl_paths(gamma, g, ops, times, rho_s0).first;
}

cplx afl_regression_prediction(double gamma, double g, const std::vector<SuperOperator>& ops,
                               const std::vector<double>& times, const Mat& rho_s0) {
  return afl_paths(gamma, g, ops, times, rho_s0).second;
}

double tam_theta(double t) {
  if (t < 0) throw std::invalid_argument("tam: negative time");
  return std::acos(std::exp(-t));
}

double tam_coupling(double t) {
  if (!(t > 0)) throw std::invalid_argument("tam coupling diverges at t = 0");
  return 1.0 / std::sqrt(std::expm1(2 * t));
}

DenseJointModel tam() {
  const Mat h = kron<double>(sigma_minus(), sigma_plus()) + kron<double>(sigma_plus(), sigma_minus());
  Mat env = Mat::Zero(2, 2);
  env(0, 0) = 1;
  return DenseJointModel(
      "tam", 2, {2}, env,
      [h](double t1, double t2) { return unitary_exp<double>(h, tam_theta(t2) - tam_theta(t1)); },
      Capabilities{true, true, false});
}

double tam_post_replacement_rate(double t1, double t) {
  const double g = tam_coupling(t), g1 = tam_coupling(t1);
  return (g * g1 - g * g) / (g * g1 - 1.0);
}

double tam_post_replacement_rate_exact(double t1, double t) {
  const double g = tam_coupling(t), g1 = tam_coupling(t1);
  return (g * g1 - g * g) / (g * g1 + 1.0);
}

DenseJointModel nqib_qubit() {
  Mat p0 = Mat::Zero(2, 2), p1 = Mat::Zero(2, 2);
  p0(0, 0) = 1;
  p1(1, 1) = 1;
  const Mat z = pauli('Z');
  return DenseJointModel(
      "nqib", 2, {2}, Mat::Identity(2, 2) / 2.0,
      [=](double t1, double t2) {
        return (kron<double>(Mat::Identity(2, 2), p0) + kron<double>(unitary_exp<double>(z, (t2 - t1) / 2), p1)).eval();
      },
      Capabilities{true, false, false});
}

Mat partial_swap(double theta, int d) {
  Mat swap = Mat::Zero(d * d, d * d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) swap(b * d + a, a * d + b) = 1;
  return unitary_exp<double>(swap, theta);
}

namespace detail {

struct CollisionData {
  int n_slots;
  int ds;
  int da;
  Dims dims;
  std::vector<double> slot_times;
  Mat z;
  Vec log_eigs;
};

}  // namespace detail

namespace {

using detail::CollisionData;

std::shared_ptr<const CollisionData> collision_data(int n_slots, const Mat& pair, const Mat& ancilla,
                                              std::vector<double> slot_times) {
  if (n_slots < 1) throw std::invalid_argument("collision model needs at least one slot");
  auto d = std::make_shared<CollisionData>();
  d->n_slots = n_slots;
  d->da = static_cast<int>(ancilla.rows());
  if (pair.rows() % d->da != 0) throw dimension_error("pair unitary does not factor as system x ancilla");
  d->ds = static_cast<int>(pair.rows()) / d->da;
  if ((pair.adjoint() * pair - Mat::Identity(pair.rows(), pair.cols())).cwiseAbs().maxCoeff() > 1e-10)
    throw std::invalid_argument("pair unitary is not unitary");
  if (slot_times.empty())
    for (int k = 0; k <= n_slots; ++k) slot_times.push_back(k);
  if (static_cast<int>(slot_times.size()) != n_slots + 1) throw std::invalid_argument("need n_slots + 1 slot boundaries");
  for (size_t k = 1; k < slot_times.size(); ++k)
    if (!(slot_times[k] > slot_times[k - 1])) throw std::invalid_argument("slot times must be strictly increasing");
  d->slot_times = std::move(slot_times);
  d->dims = Dims{d->ds};
  for (int k = 0; k < n_slots; ++k) d->dims.push_back(d->da);
  Eigen::ComplexSchur<Mat> schur(pair);
  d->z = schur.matrixU();
  d->log_eigs = schur.matrixT().diagonal().unaryExpr([](cplx v) { return std::log(v); });
  return d;
}

Mat pair_pow(const CollisionData& d, double f) {
  const Vec e = (f * d.log_eigs).array().exp();
  return d.z * e.asDiagonal() * d.z.adjoint();
}

int slot_index(const CollisionData& d, double t) {
  const auto& s = d.slot_times;
  if (t < s.front() - 1e-12 || t > s.back() + 1e-12) throw std::invalid_argument("collision: time outside the slots");
  for (int k = 0; k < d.n_slots; ++k)
    if (t < s[k + 1]) return k;
  return d.n_slots - 1;
}

double slot_fraction(const CollisionData& d, int k, double t) {
  const auto& s = d.slot_times;
  return std::clamp((t - s[k]) / (s[k + 1] - s[k]), 0.0, 1.0);
}

Mat collision_propagator(const CollisionData& d, double t1, double t2) {
  if (t2 < t1) throw std::invalid_argument("collision propagator needs t2 >= t1");
  const int k1 = slot_index(d, t1), k2 = slot_index(d, t2);
  const double f1 = slot_fraction(d, k1, t1), f2 = slot_fraction(d, k2, t2);
  auto on_slot = [&](int k, double f) { return embed<double>(pair_pow(d, f), {0, k + 1}, d.dims); };
  if (k1 == k2) return on_slot(k1, f2 - f1);
  Mat u = on_slot(k1, 1.0 - f1);
  for (int k = k1 + 1; k < k2; ++k) u = on_slot(k, 1.0) * u;
  return on_slot(k2, f2) * u;
}

Mat env_product(const Mat& ancilla, int n) {
  Mat r = Mat::Ones(1, 1);
  for (int k = 0; k < n; ++k) r = kron<double>(r, ancilla);
  return r;
}

}  // namespace

CollisionModel::CollisionModel(int n_slots, const Mat& pair_unitary, const Mat& ancilla_state,
                               std::vector<double> slot_times)
    : CollisionModel(collision_data(n_slots, pair_unitary, ancilla_state, std::move(slot_times)), pair_unitary,
                     ancilla_state) {}

CollisionModel::CollisionModel(std::shared_ptr<const detail::CollisionData> data, const Mat& pair_unitary,
                               const Mat& ancilla_state)
    : DenseJointModel(
          "collision", data->ds, Dims(static_cast<size_t>(data->n_slots), data->da),
          env_product(ancilla_state, data->n_slots),
          [data](double t1, double t2) { return collision_propagator(*data, t1, t2); }, Capabilities{false, true, true},
          data->slot_times.back()),
      data_(data),
      n_slots_(data->n_slots),
      pair_(pair_unitary),
      ancilla_(ancilla_state),
      slot_times_(data->slot_times) {}

Mat CollisionModel::pair_power(double f) const { return pair_pow(*data_, f); }

int CollisionModel::slot_of(double t) const { return slot_index(*data_, t); }

Mat CollisionModel::coupled_env_operator(const Mat& a, double t) const {
  if (a.rows() == dim_e()) return JointModel::coupled_env_operator(a, t);
  if (a.rows() != ancilla_.rows()) throw dimension_error("operator matches neither one ancilla nor the environment");
  return embed<double>(a, {slot_of(t)}, env_dims());
}

CollisionModel collision(int n_slots, const Mat& pair_unitary, const Mat& ancilla_state,
                         std::vector<double> slot_times) {
  return CollisionModel(n_slots, pair_unitary, ancilla_state, std::move(slot_times));
}

StaticDephasingModel::StaticDephasingModel(std::vector<double> p, std::vector<Mat> h)
    : RegisterJointModel(
          "static-dephasing", h.empty() ? 0 : static_cast<int>(h.front().rows()),
          Eigen::Map<const RVec>(p.data(), static_cast<Eigen::Index>(p.size())),
          [h](int j, double t1, double t2) { return unitary_exp<double>(h[j], t2 - t1); },
          Capabilities{true, true, true}, p.size() <= 64),
      p_(std::move(p)),
      h_(std::move(h)) {
  if (p_.size() != h_.size() || h_.empty()) throw std::invalid_argument("one Hamiltonian per register level required");
  for (const Mat& hj : h_)
    if (hj.rows() != h_.front().rows() || hermiticity_residual(hj) > 1e-10)
      throw std::invalid_argument("register Hamiltonians must be Hermitian and of equal size");
}

StaticDephasingModel static_dephasing(std::vector<double> p, std::vector<Mat> h) {
  return StaticDephasingModel(std::move(p), std::move(h));
}

SuperOperator pauli_channel(double lx, double ly, double lz) {
  Mat s = vec(Mat::Identity(2, 2)) * vec(Mat::Identity(2, 2)).adjoint();
  const double l[3] = {lx, ly, lz};
  const char names[3] = {'X', 'Y', 'Z'};
  for (int a = 0; a < 3; ++a) {
    const Vec v = vec(pauli(names[a]));
    s += l[a] * v * v.adjoint();
  }
  return SuperOperator(s / 2.0);
}

MapFamilyModel eternal_me() {
  MapFamilyModel m;
  m.name = "eternal";
  m.dim = 2;
  auto lam = [](double t) { return (1.0 + std::exp(-2 * t)) / 2; };
  m.map = [lam](double t0, double t) {
    if (t0 < 0 || t < 0) throw std::invalid_argument("eternal: negative time");
    const double l = lam(t) / lam(t0);
    return pauli_channel(l, l, std::exp(-2 * (t - t0)));
  };
  LindbladSpec spec;
  spec.dim = 2;
  spec.hamiltonian = [](double) { return Mat::Zero(2, 2).eval(); };
  const double r = 1.0 / std::sqrt(2.0);
  spec.channels.push_back({r * pauli('X'), [](double) { return 1.0; }});
  spec.channels.push_back({r * pauli('Y'), [](double) { return 1.0; }});
  spec.channels.push_back({r * pauli('Z'), [](double t) { return -std::tanh(t); }});
  m.generator = [spec](double t) { return generator_at(spec, t); };
  m.spec = spec;
  return m;
}

MapFamilyModel map_family_of(std::shared_ptr<const JointModel> model) {
  MapFamilyModel m;
  m.name = model->name();
  m.dim = model->dim_s();
  m.map = [model](double ta, double tb) {
    const double t0 = model->t0();
    if (std::abs(ta - t0) < 1e-15) return dynamical_map(*model, t0, tb);
    return intermediate_map(dynamical_map(*model, t0, tb), dynamical_map(*model, t0, ta)).q;
  };
  return m;
}

BathCorrelation bath_correlation(const JointModel& model, const Mat& a_e, const Mat& b_e, double t, double tp) {
  if (!model.dense_available()) throw std::logic_error(model.name() + ": environment too large for correlation functions");
  BathCorrelation out;
  out.lab_frame = !model.has_env_frame();
  const Mat a = out.lab_frame ? a_e : model.coupled_env_operator(a_e, t);
  const Mat b = out.lab_frame ? b_e : model.coupled_env_operator(b_e, tp);
  const Mat rho = model.rho_e0();
  const cplx ab = (a * b * rho).trace();
  const cplx ba = (b * a * rho).trace();
  out.plus = (ab + ba) / 2.0;
  out.minus = (ab - ba) / 2.0;
  return out;
}

std::vector<std::string> preset_names() {
  return {"afl", "tam", "nqib", "collision", "static-dephasing", "eternal"};
}

bool is_joint_preset(const std::string& name) {
  const auto names = preset_names();
  return name != "eternal" && std::find(names.begin(), names.end(), name) != names.end();
}

std::shared_ptr<JointModel> make_joint_preset(const std::string& name) {
  if (name == "afl") return std::make_shared<AflModel>(afl());
  if (name == "tam") return std::make_shared<DenseJointModel>(tam());
  if (name == "nqib") return std::make_shared<DenseJointModel>(nqib_qubit());
  if (name == "collision") {
    Mat ancilla = Mat::Zero(2, 2);
    ancilla(0, 0) = 1;
    return std::make_shared<CollisionModel>(collision(6, partial_swap(M_PI / 4), ancilla));
  }
  if (name == "static-dephasing") {
    std::vector<Mat> h;
    for (double k : {-1.0, -0.5, 0.5, 1.0}) h.push_back(k * pauli('Z'));
    return std::make_shared<StaticDephasingModel>(static_dephasing({0.25, 0.25, 0.25, 0.25}, h));
  }
  throw std::invalid_argument("unknown joint model preset '" + name + "'");
}

}  // namespace oqs
