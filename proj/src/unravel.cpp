#include "oqs/unravel.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "oqs/parallel.hpp"

namespace oqs {

std::mt19937_64 trajectory_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

namespace {

std::string num(double x) {
  std::ostringstream os;
  os << std::setprecision(6) << x;
  return os.str();
}

std::vector<int> steps_per_interval(const std::vector<double>& grid, double dt) {
  if (!(dt > 0)) throw step_size_error("time step must be positive");
  if (grid.empty()) throw std::invalid_argument("empty time grid");
  std::vector<int> out;
  for (size_t k = 0; k + 1 < grid.size(); ++k) {
    const double span = grid[k + 1] - grid[k];
    if (span < 0) throw std::invalid_argument("time grid must be nondecreasing");
    const double n = std::round(span / dt);
    if (std::abs(n * dt - span) > 1e-9 * std::max(1.0, span))
      throw step_size_error("step " + num(dt) + " does not divide the grid interval " + num(span));
    out.push_back(static_cast<int>(n));
  }
  return out;
}

struct StepData {
  Mat h;
  std::vector<double> rates;
};

StepData step_data(const LindbladSpec& spec, double t) {
  StepData s;
  s.h = spec.h(t);
  for (size_t k = 0; k < spec.channels.size(); ++k) {
    const double g = spec.channels[k].rate(t);
    if (!std::isfinite(g)) throw std::invalid_argument("rate of channel " + std::to_string(k) + " is not finite");
    if (g < 0)
      throw negative_rate_error("rate gamma_" + std::to_string(k) + " = " + num(g) + " is negative at t = " + num(t) +
                                "; trajectory unravelling needs nonnegative rates");
    s.rates.push_back(g);
  }
  return s;
}

void check_jump_budget(double total, double t, double dt) {
  if (total >= 0.1)
    throw step_size_error("total jump probability " + num(total) + " per step at t = " + num(t) +
                          " exceeds 0.1; reduce dt below " + num(dt * 0.1 / total));
}

Vec no_jump_rk4(const Mat& h_eff, const Vec& psi, double dt) {
  const cplx mi(0, -1);
  const Vec k1 = mi * (h_eff * psi);
  const Vec k2 = mi * (h_eff * (psi + 0.5 * dt * k1));
  const Vec k3 = mi * (h_eff * (psi + 0.5 * dt * k2));
  const Vec k4 = mi * (h_eff * (psi + dt * k3));
  return psi + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

void validate_psi(const Vec& psi0, int d) {
  if (psi0.size() != d) throw dimension_error("initial state has wrong dimension");
  if (std::abs(psi0.norm() - 1.0) > 1e-10) throw invalid_state("initial state is not normalized");
}

template <typename Stepper>
Ensemble run_trajectories(const LindbladSpec& spec, const Vec& psi0, const std::vector<double>& grid, int m,
                          std::uint64_t seed, const McwfOptions& opt, const std::string& label, Stepper step) {
  if (m < 1) throw std::invalid_argument("ensemble size must be positive");
  validate_psi(psi0, spec.dim);
  const auto steps = steps_per_interval(grid, opt.dt);
  Ensemble e;
  e.times = grid;
  e.dim = spec.dim;
  e.description = label + ", M = " + std::to_string(m) + ", dt = " + num(opt.dt) + ", seed = " + std::to_string(seed);
  e.trajectories.resize(m);
  parallel_for(m, opt.jobs, [&](int i) {
    auto rng = trajectory_rng(seed, static_cast<std::uint64_t>(i));
    Trajectory& tr = e.trajectories[i];
    tr.weight = 1.0 / m;
    Vec psi = psi0;
    tr.states.push_back(psi * psi.adjoint());
    for (size_t k = 0; k < steps.size(); ++k) {
      for (int s = 0; s < steps[k]; ++s) {
        const double t = grid[k] + s * opt.dt;
        step(psi, t, rng, tr.record);
      }
      tr.states.push_back(psi * psi.adjoint());
    }
  });
  return e;
}

}  // namespace

Ensemble mcwf_jump(const LindbladSpec& spec, const Vec& psi0, const std::vector<double>& grid, int m,
                   std::uint64_t seed, const McwfOptions& opt) {
  std::vector<Mat> cdc;
  for (const auto& ch : spec.channels) cdc.push_back(ch.c.adjoint() * ch.c);
  const double dt = opt.dt;
  auto step = [&](Vec& psi, double t, std::mt19937_64& rng, std::vector<int>& record) {
    const StepData sd = step_data(spec, t);
    std::vector<double> p(sd.rates.size());
    double total = 0;
    for (size_t k = 0; k < p.size(); ++k) {
      p[k] = sd.rates[k] * (psi.adjoint() * cdc[k] * psi)(0, 0).real() * dt;
      total += p[k];
    }
    check_jump_budget(total, t, dt);
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    if (u < total) {
      double acc = 0;
      for (size_t k = 0; k < p.size(); ++k) {
        acc += p[k];
        if (u < acc || k + 1 == p.size()) {
          psi = spec.channels[k].c * psi;
          psi.normalize();
          record.push_back(static_cast<int>(k));
          return;
        }
      }
    }
    Mat h_eff = sd.h;
    for (size_t k = 0; k < cdc.size(); ++k) h_eff -= cplx(0, 0.5 * sd.rates[k]) * cdc[k];
    psi = no_jump_rk4(h_eff, psi, dt);
    psi.normalize();
  };
  return run_trajectories(spec, psi0, grid, m, seed, opt, "mcwf jump", step);
}

Ensemble mcwf_diffusive(const LindbladSpec& spec, const Vec& psi0, const std::vector<double>& grid, int m,
                        std::uint64_t seed, const McwfOptions& opt) {
  std::vector<Mat> cdc;
  for (const auto& ch : spec.channels) cdc.push_back(ch.c.adjoint() * ch.c);
  const double dt = opt.dt, sdt = std::sqrt(opt.dt);
  auto step = [&](Vec& psi, double t, std::mt19937_64& rng, std::vector<int>&) {
    const StepData sd = step_data(spec, t);
    std::normal_distribution<double> normal(0.0, 1.0);
    double total = 0;
    Vec dpsi = cplx(0, -1) * (sd.h * psi) * dt;
    for (size_t k = 0; k < cdc.size(); ++k) {
      const double g = sd.rates[k];
      total += g * (psi.adjoint() * cdc[k] * psi)(0, 0).real() * dt;
      const Vec cpsi = std::sqrt(g) * (spec.channels[k].c * psi);
      const double r = psi.dot(cpsi).real();
      const double dw = normal(rng) * sdt;
      dpsi += (-0.5 * g * (cdc[k] * psi) + r * cpsi - 0.5 * r * r * psi) * dt + (cpsi - r * psi) * dw;
    }
    check_jump_budget(total, t, dt);
    psi += dpsi;
    psi.normalize();
  };
  return run_trajectories(spec, psi0, grid, m, seed, opt, "mcwf diffusive", step);
}

Ensemble collision_unravel(const CollisionModel& model, const Vec& psi0, const BasisChooser& basis,
                           const UnravelOptions& opt) {
  const int ds = model.dim_s();
  const int da = static_cast<int>(model.ancilla_state().rows());
  validate_psi(psi0, ds);
  Eigen::SelfAdjointEigenSolver<Mat> es(model.ancilla_state());
  std::vector<std::pair<double, Vec>> components;
  for (int k = 0; k < da; ++k)
    if (es.eigenvalues()(k) > 1e-14) components.emplace_back(es.eigenvalues()(k), es.eigenvectors().col(k));
  const int n = model.n_slots();
  std::vector<Mat> bases;
  for (int k = 0; k < n; ++k) {
    Mat b = basis(k);
    if (b.rows() != da || (b.adjoint() * b - Mat::Identity(da, da)).cwiseAbs().maxCoeff() > 1e-10)
      throw std::invalid_argument("measurement basis for slot " + std::to_string(k) + " is not a unitary on the ancilla");
    bases.push_back(std::move(b));
  }
  const Mat& u = model.pair_unitary();

  // Outcomes for one slot: (label, conditional unnormalized state) for each ancilla component and basis vector.
  auto outcomes = [&](const Vec& psi, int slot) {
    std::vector<std::tuple<int, double, Vec>> out;
    for (size_t a = 0; a < components.size(); ++a) {
      const Vec phi = u * Vec(Eigen::kroneckerProduct(psi, components[a].second));
      for (int mm = 0; mm < da; ++mm) {
        Vec cond(ds);
        for (int i = 0; i < ds; ++i) cond(i) = bases[slot].col(mm).dot(phi.segment(i * da, da));
        out.emplace_back(static_cast<int>(a) * da + mm, components[a].first, cond);
      }
    }
    return out;
  };

  Ensemble e;
  e.times = model.slot_times();
  e.dim = ds;
  const double branches = std::pow(static_cast<double>(components.size() * da), n);
  if (branches <= opt.max_branches) {
    e.exact = true;
    e.description = "collision unravelling, exact branch enumeration";
    Trajectory root;
    root.states.push_back(psi0 * psi0.adjoint());
    std::vector<std::pair<Trajectory, Vec>> live{{root, psi0}};
    for (int k = 0; k < n; ++k) {
      std::vector<std::pair<Trajectory, Vec>> next;
      for (auto& [tr, psi] : live)
        for (auto& [label, p_comp, cond] : outcomes(psi, k)) {
          const double pm = cond.squaredNorm();
          const double w = tr.weight * p_comp * pm;
          if (w < 1e-300) continue;
          Trajectory child = tr;
          child.weight = w;
          child.record.push_back(label);
          Vec next_psi = cond / std::sqrt(pm);
          child.states.push_back(next_psi * next_psi.adjoint());
          next.emplace_back(std::move(child), std::move(next_psi));
        }
      live = std::move(next);
    }
    for (auto& [tr, psi] : live) e.trajectories.push_back(std::move(tr));
    return e;
  }

  e.description = "collision unravelling, " + std::to_string(opt.samples) + " sampled records";
  e.trajectories.resize(opt.samples);
  for (int i = 0; i < opt.samples; ++i) {
    auto rng = trajectory_rng(opt.seed, static_cast<std::uint64_t>(i));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Trajectory& tr = e.trajectories[i];
    tr.weight = 1.0 / opt.samples;
    Vec psi = psi0;
    tr.states.push_back(psi * psi.adjoint());
    for (int k = 0; k < n; ++k) {
      const auto outs = outcomes(psi, k);
      const double r = unif(rng);
      double acc = 0;
      for (size_t j = 0; j < outs.size(); ++j) {
        const auto& [label, p_comp, cond] = outs[j];
        acc += p_comp * cond.squaredNorm();
        if (r < acc || j + 1 == outs.size()) {
          psi = cond / cond.norm();
          tr.record.push_back(label);
          break;
        }
      }
      tr.states.push_back(psi * psi.adjoint());
    }
  }
  return e;
}

Ensemble static_unravel(const StaticDephasingModel& model, const Vec& psi0, const std::vector<double>& times,
                        const Mat& basis) {
  const int ds = model.dim_s();
  const int de = model.dim_e();
  validate_psi(psi0, ds);
  if (basis.rows() != de || (basis.adjoint() * basis - Mat::Identity(de, de)).cwiseAbs().maxCoeff() > 1e-10)
    throw std::invalid_argument("register measurement basis must be a unitary on the register");
  const RVec p = model.register_weights();
  Ensemble e;
  e.times = times;
  e.dim = ds;
  e.exact = true;
  e.description = "static register unravelling, exact branch sum";
  const Mat rho0 = psi0 * psi0.adjoint();
  std::vector<std::vector<Mat>> evolved(times.size());
  for (size_t k = 0; k < times.size(); ++k) {
    const auto blocks = model.register_blocks(model.t0(), times[k]);
    for (int j = 0; j < de; ++j) evolved[k].push_back(blocks[j] * rho0 * blocks[j].adjoint());
  }
  for (int mm = 0; mm < de; ++mm) {
    double q = 0;
    for (int j = 0; j < de; ++j) q += p(j) * std::norm(basis(j, mm));
    if (q < 1e-300) continue;
    Trajectory tr;
    tr.weight = q;
    tr.record.push_back(mm);
    for (size_t k = 0; k < times.size(); ++k) {
      Mat s = Mat::Zero(ds, ds);
      for (int j = 0; j < de; ++j) s += p(j) * std::norm(basis(j, mm)) * evolved[k][j];
      tr.states.push_back(s / q);
    }
    e.trajectories.push_back(std::move(tr));
  }
  return e;
}

Mat ensemble_mean(const Ensemble& e, size_t k) {
  if (e.trajectories.empty()) throw std::invalid_argument("empty ensemble");
  if (k >= e.times.size()) throw std::out_of_range("time index outside the ensemble grid");
  Mat out = Mat::Zero(e.dim, e.dim);
  for (const auto& tr : e.trajectories) out += tr.weight * tr.states[k];
  return out;
}

Mat ensemble_second_moment(const Ensemble& e, size_t k) {
  if (e.trajectories.empty()) throw std::invalid_argument("empty ensemble");
  if (k >= e.times.size()) throw std::out_of_range("time index outside the ensemble grid");
  Mat out = Mat::Zero(e.dim * e.dim, e.dim * e.dim);
  for (const auto& tr : e.trajectories) out += tr.weight * kron<double>(tr.states[k], tr.states[k]);
  return out;
}

size_t time_index_of(const Ensemble& e, double t) {
  for (size_t k = 0; k < e.times.size(); ++k)
    if (std::abs(e.times[k] - t) < 1e-12) return k;
  throw std::out_of_range("time " + num(t) + " is not on the ensemble grid");
}

Estimate ensemble_expectation(const Ensemble& e, size_t k, const Mat& o) {
  if (e.trajectories.empty()) throw std::invalid_argument("empty ensemble");
  Estimate est;
  std::vector<double> x;
  for (const auto& tr : e.trajectories) {
    x.push_back((o * tr.states[k]).trace().real());
    est.mean += tr.weight * x.back();
  }
  if (e.exact) return est;
  const size_t m = x.size();
  if (m < 2) {
    est.std_error = est.sample_variance = std::numeric_limits<double>::quiet_NaN();
    return est;
  }
  double ss = 0;
  for (double v : x) ss += (v - est.mean) * (v - est.mean);
  est.sample_variance = ss / (m - 1);
  est.std_error = std::sqrt(est.sample_variance / m);
  return est;
}

double max_impurity(const Ensemble& e) {
  double worst = 0;
  for (const auto& tr : e.trajectories)
    for (const Mat& s : tr.states) worst = std::max(worst, 1.0 - purity(s));
  return worst;
}

CriterionReport check_pu(const Ensemble& e, const std::vector<Mat>& reference, double tol) {
  CriterionReport r;
  r.criterion = "pu";
  r.tolerance = tol;
  r.grid = e.description + ", " + std::to_string(e.times.size()) + " times";
  if (reference.size() != e.times.size()) throw std::invalid_argument("one reference state per ensemble time required");
  double weight_sum = 0;
  for (const auto& tr : e.trajectories) weight_sum += tr.weight;
  double mean_dev = 0;
  for (size_t k = 0; k < e.times.size(); ++k)
    mean_dev = std::max(mean_dev, (ensemble_mean(e, k) - reference[k]).cwiseAbs().maxCoeff());
  const double impurity = max_impurity(e);
  r.witnesses["max_mean_deviation"] = mean_dev;
  r.witnesses["max_impurity"] = impurity;
  r.witnesses["weight_sum_error"] = std::abs(weight_sum - 1.0);
  r.witnesses["branches"] = static_cast<double>(e.trajectories.size());
  if (!e.exact) {
    r.verdict = Verdict::inconclusive;
    r.reason = "sampled ensemble; mean agreement is statistical";
    return r;
  }
  r.verdict = (mean_dev <= tol && impurity <= tol && std::abs(weight_sum - 1.0) <= tol) ? Verdict::pass : Verdict::fail;
  return r;
}

CriterionReport check_mpu(const std::vector<Ensemble>& ensembles, double tol, double delta_ens) {
  CriterionReport r;
  r.criterion = "mpu";
  r.tolerance = tol;
  r.grid = std::to_string(ensembles.size()) + " unravellings";
  r.witnesses["delta_ens"] = delta_ens;
  r.witnesses["scope"] = std::string("evidence from finitely many distinct unravellings (at least two required)");
  if (ensembles.size() < 2) {
    r.verdict = Verdict::inconclusive;
    r.reason = "need at least two unravellings";
    return r;
  }
  double mean_diff = 0, moment_diff = 0, impurity = 0;
  for (const auto& e : ensembles) {
    impurity = std::max(impurity, max_impurity(e));
    if (e.times != ensembles.front().times) throw std::invalid_argument("unravellings must share the time grid");
  }
  for (size_t a = 0; a < ensembles.size(); ++a)
    for (size_t b = a + 1; b < ensembles.size(); ++b)
      for (size_t k = 0; k < ensembles[a].times.size(); ++k) {
        mean_diff = std::max(mean_diff, (ensemble_mean(ensembles[a], k) - ensemble_mean(ensembles[b], k)).cwiseAbs().maxCoeff());
        moment_diff = std::max(moment_diff, (ensemble_second_moment(ensembles[a], k) -
                                             ensemble_second_moment(ensembles[b], k)).cwiseAbs().maxCoeff());
      }
  r.witnesses["max_mean_difference"] = mean_diff;
  r.witnesses["max_second_moment_difference"] = moment_diff;
  r.witnesses["max_impurity"] = impurity;
  r.verdict = (mean_diff <= tol && impurity <= tol && moment_diff >= delta_ens) ? Verdict::pass : Verdict::fail;
  return r;
}

void write_ensemble_csv(std::ostream& os, const Ensemble& e) {
  os << std::setprecision(17);
  os << "time,trajectory,weight";
  if (e.dim == 2) {
    os << ",x,y,z,purity\n";
  } else {
    for (int i = 0; i < e.dim; ++i)
      for (int j = 0; j < e.dim; ++j) os << ",re_" << i << j << ",im_" << i << j;
    os << "\n";
  }
  for (size_t n = 0; n < e.trajectories.size(); ++n) {
    const auto& tr = e.trajectories[n];
    for (size_t k = 0; k < e.times.size(); ++k) {
      const Mat& s = tr.states[k];
      os << e.times[k] << "," << n << "," << tr.weight;
      if (e.dim == 2) {
        os << "," << 2 * s(1, 0).real() << "," << 2 * s(1, 0).imag() << "," << (s(0, 0) - s(1, 1)).real() << ","
           << purity(s) << "\n";
      } else {
        for (int i = 0; i < e.dim; ++i)
          for (int j = 0; j < e.dim; ++j) os << "," << s(i, j).real() << "," << s(i, j).imag();
        os << "\n";
      }
    }
  }
}

}  // namespace oqs
