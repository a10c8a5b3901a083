#include <cmath>
#include <stdexcept>

#include "oqs/models.hpp"

namespace oqs {

Mat JointModel::env_frame(double, double) const { return Mat::Identity(dim_e(), dim_e()); }

RVec JointModel::register_weights() const { throw std::logic_error(name() + " has no register form"); }

std::vector<Mat> JointModel::register_blocks(double, double) const {
  throw std::logic_error(name() + " has no register form");
}

Mat JointModel::coupled_env_operator(const Mat& a, double t) const {
  if (a.rows() != dim_e()) throw dimension_error("environment operator has wrong dimension");
  const Mat w = env_frame(t0(), t);
  return w.adjoint() * a * w;
}

Dims JointModel::joint_dims() const {
  Dims d{dim_s()};
  const Dims e = env_dims();
  d.insert(d.end(), e.begin(), e.end());
  return d;
}

void JointModel::check_times(double t1, double t2) const {
  if (t1 < t0() - 1e-12 || t2 < t0() - 1e-12) throw std::invalid_argument(name() + ": time before t0");
  if (t1 > t_max() + 1e-12 || t2 > t_max() + 1e-12) throw std::invalid_argument(name() + ": time beyond model horizon");
}

DenseJointModel::DenseJointModel(std::string name, int ds, Dims env_dims, Mat rho_e0, PropagatorFn prop,
                                 Capabilities caps, double t_max)
    : name_(std::move(name)),
      ds_(ds),
      env_dims_(std::move(env_dims)),
      rho_e0_(std::move(rho_e0)),
      prop_(std::move(prop)),
      caps_(caps),
      t_max_(t_max) {
  DensityOperator check(rho_e0_, env_dims_);
  (void)check;
}

Mat DenseJointModel::propagator(double t1, double t2) const {
  check_times(t1, t2);
  return prop_(t1, t2);
}

RegisterJointModel::RegisterJointModel(std::string name, int ds, RVec weights, BlockFn block, Capabilities caps,
                                       bool dense_ok)
    : name_(std::move(name)), ds_(ds), weights_(std::move(weights)), block_(std::move(block)), caps_(caps),
      dense_ok_(dense_ok) {
  if (weights_.size() == 0 || weights_.minCoeff() < 0 || std::abs(weights_.sum() - 1.0) > 1e-12)
    throw invalid_state("register weights must be a probability vector");
}

Mat RegisterJointModel::rho_e0() const {
  if (!dense_ok_) throw std::logic_error(name_ + ": environment too large for dense storage");
  return weights_.cast<cplx>().asDiagonal();
}

Mat RegisterJointModel::propagator(double t1, double t2) const {
  if (!dense_ok_) throw std::logic_error(name_ + ": environment too large for dense storage");
  check_times(t1, t2);
  const int de = dim_e();
  Mat u = Mat::Zero(ds_ * de, ds_ * de);
  for (int j = 0; j < de; ++j) {
    const Mat b = block_(j, t1, t2);
    for (int c = 0; c < ds_; ++c)
      for (int r = 0; r < ds_; ++r) u(r * de + j, c * de + j) = b(r, c);
  }
  return u;
}

std::vector<Mat> RegisterJointModel::register_blocks(double t1, double t2) const {
  check_times(t1, t2);
  std::vector<Mat> out;
  out.reserve(weights_.size());
  for (int j = 0; j < weights_.size(); ++j) out.push_back(block_(j, t1, t2));
  return out;
}

JointOperator lift(const JointModel& m, const Mat& x_s) {
  if (m.register_form()) return lift_register(m, x_s, m.register_weights());
  return lift(m, x_s, m.rho_e0());
}

JointOperator lift(const JointModel& m, const Mat& x_s, const Mat& sigma_e) {
  if (x_s.rows() != m.dim_s()) throw dimension_error("system operator has wrong dimension");
  if (sigma_e.rows() != m.dim_e()) throw dimension_error("environment state has wrong dimension");
  if (m.register_form()) return lift_register(m, x_s, sigma_e.diagonal().real());
  JointOperator j;
  j.ds = m.dim_s();
  j.de = m.dim_e();
  j.dense = kron<double>(x_s, sigma_e);
  return j;
}

JointOperator lift_register(const JointModel& m, const Mat& x_s, const RVec& weights) {
  if (x_s.rows() != m.dim_s()) throw dimension_error("system operator has wrong dimension");
  if (weights.size() != m.dim_e()) throw dimension_error("register weights have wrong dimension");
  JointOperator j;
  j.ds = m.dim_s();
  j.de = m.dim_e();
  j.blocks_form = true;
  j.blocks.reserve(weights.size());
  for (int k = 0; k < weights.size(); ++k) j.blocks.push_back(weights(k) * x_s);
  return j;
}

void evolve(const JointModel& m, JointOperator& j, double t1, double t2) {
  if (t2 == t1) return;
  if (j.blocks_form) {
    const auto u = m.register_blocks(t1, t2);
    for (size_t k = 0; k < u.size(); ++k) j.blocks[k] = u[k] * j.blocks[k] * u[k].adjoint();
    return;
  }
  const Mat u = m.propagator(t1, t2);
  j.dense = u * j.dense * u.adjoint();
}

void apply_system(JointOperator& j, const Mat& a, const Mat& b) {
  if (j.blocks_form) {
    for (auto& blk : j.blocks) blk = a * blk * b;
    return;
  }
  const Mat id = Mat::Identity(j.de, j.de);
  j.dense = kron<double>(a, id) * j.dense * kron<double>(b, id);
}

void apply_system(JointOperator& j, const SuperOperator& c) {
  if (c.dim() != j.ds) throw dimension_error("system map has wrong dimension");
  if (j.blocks_form) {
    for (auto& blk : j.blocks) blk = c.apply(blk);
    return;
  }
  const int ds = j.ds, de = j.de;
  for (int k = 0; k < de; ++k)
    for (int l = 0; l < de; ++l) {
      auto view = j.dense(Eigen::seqN(k, ds, de), Eigen::seqN(l, ds, de));
      const Mat y = view;
      view = c.apply(y);
    }
}

Mat trace_env(const JointOperator& j) {
  Mat out = Mat::Zero(j.ds, j.ds);
  if (j.blocks_form) {
    for (const auto& blk : j.blocks) out += blk;
    return out;
  }
  for (int k = 0; k < j.de; ++k) out += j.dense(Eigen::seqN(k, j.ds, j.de), Eigen::seqN(k, j.ds, j.de));
  return out;
}

Operator to_operator(const JointModel& m, const JointOperator& j) {
  if (j.blocks_form) {
    if (!m.dense_available()) throw std::logic_error(m.name() + ": joint state too large for dense storage");
    const int ds = j.ds, de = j.de;
    Mat out = Mat::Zero(ds * de, ds * de);
    for (int k = 0; k < de; ++k)
      for (int c = 0; c < ds; ++c)
        for (int r = 0; r < ds; ++r) out(r * de + k, c * de + k) = j.blocks[k](r, c);
    return Operator(out, m.joint_dims());
  }
  return Operator(j.dense, m.joint_dims());
}

SuperOperator tomograph_with(const JointModel& m, const std::function<JointOperator(const Mat&)>& lift_fn,
                             const std::function<void(JointOperator&)>& ops) {
  const int d = m.dim_s();
  Mat s(d * d, d * d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) {
      Mat unit = Mat::Zero(d, d);
      unit(i, j) = 1;
      JointOperator jo = lift_fn(unit);
      ops(jo);
      s.col(j * d + i) = vec(trace_env(jo));
    }
  return SuperOperator(std::move(s));
}

SuperOperator dynamical_map(const JointModel& m, double t0, double t) {
  return tomograph_with(
      m, [&m](const Mat& x) { return lift(m, x); }, [&](JointOperator& j) { evolve(m, j, t0, t); });
}

Mat env_frame_state(const JointModel& m, double t1) {
  if (!m.has_env_frame()) throw std::logic_error(m.name() + " has no environment frame");
  if (m.register_form() || m.env_frame_is_identity()) {
    if (m.register_form()) return m.register_weights().cast<cplx>().asDiagonal();
    return m.rho_e0();
  }
  const Mat w = m.env_frame(m.t0(), t1);
  return w * m.rho_e0() * w.adjoint();
}

SuperOperator generalized_map(const JointModel& m, double t1, double t2) {
  if (!m.has_env_frame()) throw std::logic_error(m.name() + " has no environment frame");
  if (m.register_form()) {
    if (!m.env_frame_is_identity()) throw std::logic_error("register models require an identity frame");
    return replacement_map_register(m, m.register_weights(), t1, t2);
  }
  return replacement_map(m, env_frame_state(m, t1), t1, t2);
}

SuperOperator replacement_map(const JointModel& m, const Mat& sigma_e, double t1, double t2) {
  return tomograph_with(
      m, [&](const Mat& x) { return lift(m, x, sigma_e); }, [&](JointOperator& j) { evolve(m, j, t1, t2); });
}

SuperOperator replacement_map_register(const JointModel& m, const RVec& weights, double t1, double t2) {
  return tomograph_with(
      m, [&](const Mat& x) { return lift_register(m, x, weights); },
      [&](JointOperator& j) { evolve(m, j, t1, t2); });
}

SuperOperator dd_apply(const JointModel& m, const std::vector<Mat>& pulses, const std::vector<double>& times,
                       std::optional<double> t_end) {
  if (pulses.size() != times.size()) throw std::invalid_argument("one pulse time per pulse required");
  for (const Mat& p : pulses) {
    if (p.rows() != m.dim_s() || (p.adjoint() * p - Mat::Identity(p.rows(), p.cols())).cwiseAbs().maxCoeff() > 1e-10)
      throw std::invalid_argument("pulse is not a unitary on the system");
  }
  const double end = t_end ? *t_end : (times.empty() ? m.t0() : times.back());
  return tomograph_with(
      m, [&m](const Mat& x) { return lift(m, x); },
      [&](JointOperator& j) {
        double t = m.t0();
        for (size_t k = 0; k < pulses.size(); ++k) {
          if (times[k] < t) throw std::invalid_argument("pulse times must be nondecreasing");
          evolve(m, j, t, times[k]);
          apply_system(j, pulses[k], pulses[k].adjoint());
          t = times[k];
        }
        if (end < t) throw std::invalid_argument("final time precedes the last pulse");
        evolve(m, j, t, end);
      });
}

}  // namespace oqs
