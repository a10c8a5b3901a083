#include "oqs/criteria.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>
#include <stdexcept>

#include "oqs/parallel.hpp"

namespace oqs {

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    default: return "inconclusive";
  }
}

double CriterionReport::number(const std::string& key) const {
  auto it = witnesses.find(key);
  if (it == witnesses.end()) throw std::out_of_range("no witness '" + key + "' in " + criterion);
  if (auto d = std::get_if<double>(&it->second)) return *d;
  if (auto c = std::get_if<cplx>(&it->second)) return std::abs(*c);
  throw std::invalid_argument("witness '" + key + "' is not numeric");
}

namespace {

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(6) << x;
  return os.str();
}

std::string fmt_list(const std::vector<double>& xs) {
  std::string s = "{";
  for (size_t k = 0; k < xs.size(); ++k) s += (k ? ", " : "") + fmt(xs[k]);
  return s + "}";
}

std::string fmt_triple(const TimeTriple& t) { return "(" + fmt(t[0]) + ", " + fmt(t[1]) + ", " + fmt(t[2]) + ")"; }

CriterionReport make_report(const std::string& name, double tol) {
  CriterionReport r;
  r.criterion = name;
  r.tolerance = tol;
  return r;
}

CriterionReport inconclusive(CriterionReport r, const std::string& reason) {
  r.verdict = Verdict::inconclusive;
  r.reason = reason;
  return r;
}

void require_initial_time(const JointModel& m, double t) {
  if (std::abs(t - m.t0()) > 1e-12)
    throw std::invalid_argument("time triples must start at the model's initial time " + fmt(m.t0()));
}

// Generalized maps are reused across correlation functions sharing time intervals.
class GeneralizedMaps {
 public:
  explicit GeneralizedMaps(const JointModel& m) : m_(m) {}
  const SuperOperator& get(double t1, double t2) {
    const auto key = std::make_pair(t1, t2);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    return cache_.emplace(key, generalized_map(m_, t1, t2)).first->second;
  }

 private:
  const JointModel& m_;
  std::map<std::pair<double, double>, SuperOperator> cache_;
};

void check_times_increasing(const JointModel& m, const std::vector<SuperOperator>& ops, const std::vector<double>& times) {
  if (ops.empty() || ops.size() != times.size()) throw std::invalid_argument("one operation per time required");
  if (times.front() < m.t0() - 1e-12) throw std::invalid_argument("correlation times precede t0");
  for (size_t k = 1; k < times.size(); ++k)
    if (times[k] < times[k - 1]) throw std::invalid_argument("correlation times must be nondecreasing");
}

Mat evolved_state(const JointModel& m, const Mat& rho, double t) {
  JointOperator j = lift(m, rho);
  evolve(m, j, m.t0(), t);
  return trace_env(j);
}

cplx regression_with(const JointModel& m, const Mat& rho_s0, const std::vector<SuperOperator>& ops,
                     const std::vector<double>& times, GeneralizedMaps& maps) {
  check_times_increasing(m, ops, times);
  Mat x = evolved_state(m, rho_s0, times.front());
  for (size_t k = 0; k < ops.size(); ++k) {
    x = ops[k].apply(x);
    if (k + 1 < ops.size()) x = maps.get(times[k], times[k + 1]).apply(x);
  }
  return x.trace();
}

Mat pure_vector_of(const Mat& rho, Vec& psi) {
  Eigen::SelfAdjointEigenSolver<Mat> es(rho);
  psi = es.eigenvectors().col(rho.rows() - 1);
  return psi * psi.adjoint();
}

}  // namespace

SuperOperator tomograph(const JointModel& m, double t0, double t) { return dynamical_map(m, t0, t); }

std::vector<Mat> default_initial_states(int d) {
  Vec psi(d);
  for (int k = 0; k < d; ++k) psi(k) = std::polar(1.0 / (1.0 + 0.4 * k), 0.7 * k);
  psi.normalize();
  std::mt19937_64 rng(1234);
  return {projector(psi), random_density(d, rng)};
}

CriterionReport check_fa(const JointModel& m, const std::vector<Mat>& initial_states, const std::vector<double>& times,
                         double tol) {
  CriterionReport r = make_report("fa", tol);
  r.grid = "t in " + fmt_list(times) + ", " + std::to_string(initial_states.size()) + " initial states";
  double max_neg = 0, max_mi = 0, max_env = 0;
  double worst_t = times.empty() ? m.t0() : times.front();
  auto note = [&](double neg, double mi, double env, double t) {
    if (std::max({neg, mi, env}) > std::max({max_neg, max_mi, max_env})) worst_t = t;
    max_neg = std::max(max_neg, neg);
    max_mi = std::max(max_mi, mi);
    max_env = std::max(max_env, env);
  };

  if (!m.dense_available()) {
    const auto* afl_model = dynamic_cast<const AflModel*>(&m);
    if (!afl_model) return inconclusive(r, m.name() + ": joint state too large for FA witnesses");
    std::vector<Vec> psis;
    for (const Mat& rho : initial_states) {
      if (std::abs(purity(rho) - 1.0) > 1e-12)
        return inconclusive(r, "mixed inputs to the AFL model need the dense joint state");
      Vec psi;
      pure_vector_of(rho, psi);
      psis.push_back(psi);
    }
    const int n = static_cast<int>(afl_model->grid().size());
    for (double t : times) {
      std::vector<Mat> env_factors;
      for (const Vec& psi : psis) {
        const Vec v = afl_model->joint_pure_state(psi, t);
        Mat e(n, 2);
        for (int i = 0; i < 2; ++i) e.col(i) = v.segment(i * n, n);
        const Mat rho_s = (e.adjoint() * e).transpose();
        const auto ev = hermitian_eigenvalues(rho_s);
        double sqrt_sum = 0;
        for (int k = 0; k < ev.size(); ++k) sqrt_sum += std::sqrt(std::max(0.0, ev(k)));
        note((sqrt_sum * sqrt_sum - 1) / 2, 2 * von_neumann_entropy(rho_s), 0.0, t);
        env_factors.push_back(e);
      }
      Mat stacked(n, 2 * static_cast<int>(env_factors.size()));
      for (size_t s = 0; s < env_factors.size(); ++s) stacked.middleCols(2 * s, 2) = env_factors[s];
      Eigen::HouseholderQR<Mat> qr(stacked);
      const Mat q = qr.householderQ() * Mat::Identity(n, stacked.cols());
      std::vector<Mat> env_states;
      for (const Mat& e : env_factors) {
        const Mat c = q.adjoint() * e;
        env_states.push_back(c * c.adjoint());
      }
      for (size_t a = 0; a < env_states.size(); ++a)
        for (size_t b = a + 1; b < env_states.size(); ++b) note(0, 0, trace_distance(env_states[a], env_states[b]), t);
    }
    r.witnesses["representation"] = std::string("pure joint state (Schmidt spectrum)");
  } else {
    std::vector<int> env_part;
    for (int k = 1; k < static_cast<int>(m.joint_dims().size()); ++k) env_part.push_back(k);
    for (double t : times) {
      std::vector<Mat> env_states;
      for (const Mat& rho : initial_states) {
        JointOperator j = lift(m, rho);
        evolve(m, j, m.t0(), t);
        const Operator joint = to_operator(m, j);
        note(negativity(joint, {0}), mutual_information(joint, {0}), 0.0, t);
        env_states.push_back(partial_trace(joint, env_part).mat());
      }
      for (size_t a = 0; a < env_states.size(); ++a)
        for (size_t b = a + 1; b < env_states.size(); ++b) note(0, 0, trace_distance(env_states[a], env_states[b]), t);
    }
  }
  r.witnesses["max_negativity"] = max_neg;
  r.witnesses["max_mutual_information"] = max_mi;
  r.witnesses["max_env_marginal_distance"] = max_env;
  r.witnesses["worst_time"] = worst_t;
  const bool product_fails = max_neg > tol || max_mi > tol;
  if (product_fails || max_env > tol) {
    r.verdict = Verdict::fail;
    return r;
  }
  if (initial_states.size() < 2)
    return inconclusive(r, "fewer than two initial states: environment-marginal independence not tested");
  r.verdict = Verdict::pass;
  return r;
}

cplx multitime_correlation(const JointModel& m, const Mat& rho_s0, const std::vector<SuperOperator>& ops,
                           const std::vector<double>& times) {
  check_times_increasing(m, ops, times);
  JointOperator j = lift(m, rho_s0);
  double t = m.t0();
  for (size_t k = 0; k < ops.size(); ++k) {
    evolve(m, j, t, times[k]);
    apply_system(j, ops[k]);
    t = times[k];
  }
  return trace_env(j).trace();
}

cplx regression_prediction(const JointModel& m, const Mat& rho_s0, const std::vector<SuperOperator>& ops,
                           const std::vector<double>& times) {
  GeneralizedMaps maps(m);
  return regression_with(m, rho_s0, ops, times, maps);
}

SuperOperator left_mult(const Mat& a) { return sandwich(a, Mat::Identity(a.rows(), a.cols())); }

SuperOperator right_mult(const Mat& a) { return sandwich(Mat::Identity(a.rows(), a.cols()), a); }

std::vector<OpPair> pauli_pairs() {
  std::vector<OpPair> out;
  for (char a : {'I', 'X', 'Y', 'Z'})
    for (char b : {'I', 'X', 'Y', 'Z'}) out.push_back({pauli(a), pauli(b), std::string{a, b}});
  return out;
}

std::vector<OpSet> random_pauli_sets(const std::vector<double>& times, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, 3);
  const char names[4] = {'I', 'X', 'Y', 'Z'};
  std::vector<OpSet> out;
  for (int s = 0; s < count; ++s) {
    OpSet set;
    set.times = times;
    for (size_t k = 0; k < times.size(); ++k) {
      const char a = names[pick(rng)], b = names[pick(rng)];
      set.ops.push_back(sandwich(pauli(a), pauli(b)));
      set.label += (k ? "|" : "") + std::string{a, '.', b};
    }
    out.push_back(std::move(set));
  }
  return out;
}

CriterionReport check_qrf(const JointModel& m, const std::vector<OpPair>& pairs,
                          const std::vector<std::pair<double, double>>& time_pairs, double tol,
                          const std::vector<Mat>& initial_states) {
  CriterionReport r = make_report("qrf", tol);
  std::vector<double> flat;
  for (const auto& [a, b] : time_pairs) {
    flat.push_back(a);
    flat.push_back(b);
  }
  r.grid = std::to_string(pairs.size()) + " operator pairs, both orderings, time pairs " + fmt_list(flat);
  if (!m.has_env_frame()) return inconclusive(r, m.name() + " has no environment frame for the regression side");
  const auto states = initial_states.empty() ? default_initial_states(m.dim_s()) : initial_states;
  GeneralizedMaps maps(m);
  double worst = 0;
  std::string worst_label = "none";
  for (const Mat& rho : states)
    for (const auto& p : pairs)
      for (const auto& [t1, t2] : time_pairs) {
        if (t2 < t1) throw std::invalid_argument("qrf time pairs need t1 <= t2");
        const std::vector<double> times{t1, t2};
        const std::vector<std::vector<SuperOperator>> orderings{{left_mult(p.a), left_mult(p.b)},
                                                                {right_mult(p.a), left_mult(p.b)}};
        for (size_t o = 0; o < orderings.size(); ++o) {
          const double res = std::abs(multitime_correlation(m, rho, orderings[o], times) -
                                      regression_with(m, rho, orderings[o], times, maps));
          if (res > worst) {
            worst = res;
            worst_label = (o == 0 ? "<B(t2)A(t1)> " : "<A(t1)B(t2)> ") + p.label + " at (" + fmt(t1) + ", " +
                          fmt(t2) + ")";
          }
        }
      }
  r.witnesses["max_residual"] = worst;
  r.witnesses["worst_case"] = worst_label;
  r.verdict = worst <= tol ? Verdict::pass : Verdict::fail;
  return r;
}

CriterionReport check_gqrf(const JointModel& m, const std::vector<OpSet>& sets, double tol,
                           const std::vector<Mat>& initial_states) {
  CriterionReport r = make_report("gqrf", tol);
  r.grid = std::to_string(sets.size()) + " operator sets";
  if (!sets.empty()) r.grid += ", first at t = " + fmt_list(sets.front().times);
  if (!m.has_env_frame()) return inconclusive(r, m.name() + " has no environment frame for the regression side");
  const auto states = initial_states.empty() ? default_initial_states(m.dim_s()) : initial_states;
  GeneralizedMaps maps(m);
  double worst = 0;
  std::string worst_label = "none";
  cplx worst_exact = 0, worst_reg = 0;
  for (const Mat& rho : states)
    for (const auto& s : sets) {
      const cplx exact = multitime_correlation(m, rho, s.ops, s.times);
      const cplx reg = regression_with(m, rho, s.ops, s.times, maps);
      if (std::abs(exact - reg) > worst) {
        worst = std::abs(exact - reg);
        worst_label = s.label + " at t = " + fmt_list(s.times);
        worst_exact = exact;
        worst_reg = reg;
      }
    }
  r.witnesses["max_residual"] = worst;
  r.witnesses["worst_case"] = worst_label;
  r.witnesses["worst_exact"] = worst_exact;
  r.witnesses["worst_regression"] = worst_reg;
  r.verdict = worst <= tol ? Verdict::pass : Verdict::fail;
  return r;
}

CriterionReport check_composability(const JointModel& m, const std::vector<TimeTriple>& triples, double tol) {
  CriterionReport r = make_report("composability", tol);
  r.grid = std::to_string(triples.size()) + " time triples";
  if (!m.has_env_frame()) return inconclusive(r, m.name() + " has no environment frame");
  double worst = 0;
  TimeTriple worst_t{};
  MapResidual worst_res;
  for (const auto& t : triples) {
    require_initial_time(m, t[0]);
    const SuperOperator e02 = dynamical_map(m, t[0], t[2]);
    const SuperOperator e01 = dynamical_map(m, t[0], t[1]);
    const MapResidual res = map_residual(e02, compose(generalized_map(m, t[1], t[2]), e01));
    if (res.value() >= worst) {
      worst = res.value();
      worst_t = t;
      worst_res = res;
    }
  }
  r.witnesses["max_residual"] = worst;
  r.witnesses["max_entry_residual"] = worst_res.max_entry;
  r.witnesses["probe_trace_distance"] = worst_res.probe_trace_distance;
  r.witnesses["worst_triple"] = fmt_triple(worst_t);
  r.verdict = worst <= tol ? Verdict::pass : Verdict::fail;
  return r;
}

namespace {

struct NmResult {
  std::vector<double> x;
  double f;
};

NmResult nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x0, double step,
                     int iterations) {
  const size_t n = x0.size();
  std::vector<std::vector<double>> simplex{x0};
  for (size_t k = 0; k < n; ++k) {
    auto v = x0;
    v[k] += step;
    simplex.push_back(v);
  }
  std::vector<double> fv;
  for (const auto& v : simplex) fv.push_back(f(v));
  auto lerp = [](const std::vector<double>& a, const std::vector<double>& b, double s) {
    std::vector<double> out(a.size());
    for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] + s * (b[i] - a[i]);
    return out;
  };
  for (int it = 0; it < iterations; ++it) {
    std::vector<size_t> order(simplex.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return fv[a] < fv[b]; });
    decltype(simplex) s2;
    std::vector<double> f2;
    for (size_t i : order) {
      s2.push_back(simplex[i]);
      f2.push_back(fv[i]);
    }
    simplex = std::move(s2);
    fv = std::move(f2);
    if (fv.back() - fv.front() < 1e-14) break;
    std::vector<double> centroid(n, 0.0);
    for (size_t i = 0; i < n; ++i)
      for (size_t k = 0; k < n; ++k) centroid[k] += simplex[i][k] / n;
    const auto reflected = lerp(centroid, simplex.back(), -1.0);
    const double fr = f(reflected);
    if (fr < fv.front()) {
      const auto expanded = lerp(centroid, simplex.back(), -2.0);
      const double fe = f(expanded);
      if (fe < fr) {
        simplex.back() = expanded;
        fv.back() = fe;
      } else {
        simplex.back() = reflected;
        fv.back() = fr;
      }
    } else if (fr < fv[n - 1]) {
      simplex.back() = reflected;
      fv.back() = fr;
    } else {
      const auto contracted = lerp(centroid, simplex.back(), 0.5);
      const double fc = f(contracted);
      if (fc < fv.back()) {
        simplex.back() = contracted;
        fv.back() = fc;
      } else {
        for (size_t i = 1; i < simplex.size(); ++i) {
          simplex[i] = lerp(simplex[0], simplex[i], 0.5);
          fv[i] = f(simplex[i]);
        }
      }
    }
  }
  const size_t best = std::min_element(fv.begin(), fv.end()) - fv.begin();
  return {simplex[best], fv[best]};
}

std::vector<double> to_ball(std::vector<double> v) {
  const double r = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  if (r > 1)
    for (double& x : v) x /= r;
  return v;
}

std::vector<double> to_simplex(const std::vector<double>& v) {
  std::vector<double> u = v;
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cum = 0, theta = 0;
  for (size_t k = 0; k < u.size(); ++k) {
    cum += u[k];
    const double t = (cum - 1) / (k + 1);
    if (u[k] - t > 0) theta = t;
  }
  std::vector<double> out(v.size());
  for (size_t k = 0; k < v.size(); ++k) out[k] = std::max(0.0, v[k] - theta);
  return out;
}

void simplex_points(int parts, int steps, std::vector<int>& cur, std::vector<std::vector<double>>& out) {
  if (static_cast<int>(cur.size()) == parts - 1) {
    int used = 0;
    for (int c : cur) used += c;
    std::vector<double> p;
    for (int c : cur) p.push_back(static_cast<double>(c) / steps);
    p.push_back(static_cast<double>(steps - used) / steps);
    out.push_back(p);
    return;
  }
  int used = 0;
  for (int c : cur) used += c;
  for (int c = 0; c <= steps - used; ++c) {
    cur.push_back(c);
    simplex_points(parts, steps, cur, out);
    cur.pop_back();
  }
}

std::string describe(const std::vector<double>& v) {
  std::string s = "(";
  for (size_t k = 0; k < v.size(); ++k) s += (k ? ", " : "") + fmt(v[k]);
  return s + ")";
}

struct TripleSearch {
  Verdict verdict = Verdict::inconclusive;
  MapResidual best;
  std::string best_sigma;
  std::string method;
  double lower_bound = 0;
  bool certified = false;
};

TripleSearch search_triple(const JointModel& m, const TimeTriple& t, const NibSearch& cfg, double tol) {
  const SuperOperator e02 = dynamical_map(m, t[0], t[2]);
  const SuperOperator e01 = dynamical_map(m, t[0], t[1]);
  const int de = m.dim_e();
  TripleSearch out;
  out.best.max_entry = out.best.probe_trace_distance = std::numeric_limits<double>::infinity();
  auto consider = [&](const MapResidual& res, const std::string& label) {
    if (res.value() < out.best.value()) {
      out.best = res;
      out.best_sigma = label;
    }
  };
  auto residual_dense = [&](const Mat& sigma) { return map_residual(e02, compose(replacement_map(m, sigma, t[1], t[2]), e01)); };
  auto residual_register = [&](const std::vector<double>& w) {
    const RVec weights = Eigen::Map<const RVec>(w.data(), static_cast<Eigen::Index>(w.size()));
    return map_residual(e02, compose(replacement_map_register(m, weights, t[1], t[2]), e01));
  };

  if (m.register_form()) {
    const RVec w0 = m.register_weights();
    consider(residual_register(std::vector<double>(w0.data(), w0.data() + w0.size())), "initial environment state");
  } else {
    consider(residual_dense(m.rho_e0()), "initial environment state");
    if (m.has_env_frame() && !m.env_frame_is_identity())
      consider(residual_dense(env_frame_state(m, t[1])), "frame-evolved environment state");
  }
  out.method = "candidates";
  if (out.best.value() <= tol) {
    out.verdict = Verdict::pass;
    return out;
  }

  if (m.register_form() && de <= 6) {
    std::vector<std::vector<double>> pts;
    std::vector<int> cur;
    simplex_points(de, cfg.simplex_steps, cur, pts);
    std::vector<MapResidual> res(pts.size());
    parallel_for(static_cast<int>(pts.size()), cfg.jobs, [&](int i) { res[i] = residual_register(pts[i]); });
    double min_probe = std::numeric_limits<double>::infinity();
    std::vector<size_t> order(pts.size());
    for (size_t i = 0; i < pts.size(); ++i) {
      order[i] = i;
      consider(res[i], "register weights " + describe(pts[i]));
      min_probe = std::min(min_probe, res[i].probe_trace_distance);
    }
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return res[a].value() < res[b].value(); });
    for (size_t k = 0; k < std::min<size_t>(3, order.size()); ++k) {
      const auto nm = nelder_mead([&](const std::vector<double>& v) { return residual_register(to_simplex(v)).value(); },
                                  pts[order[k]], 0.5 / cfg.simplex_steps, cfg.nelder_mead_iterations);
      const auto p = to_simplex(nm.x);
      consider(residual_register(p), "register weights " + describe(p));
    }
    out.method = "simplex grid (step 1/" + std::to_string(cfg.simplex_steps) + ") + Nelder-Mead";
    // Rounding to the grid moves each weight by less than one step.
    out.lower_bound = std::max(0.0, min_probe - de * 0.5 / cfg.simplex_steps);
    out.certified = true;
  } else if (!m.register_form() && de == 2) {
    const int n = cfg.bloch_points;
    std::vector<std::vector<double>> pts;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          auto c = [&](int a) { return -1.0 + 2.0 * a / (n - 1); };
          pts.push_back(to_ball({c(i), c(j), c(k)}));
        }
    auto res_of = [&](const std::vector<double>& v) {
      const auto b = to_ball(v);
      return residual_dense(bloch_state(b[0], b[1], b[2]));
    };
    std::vector<MapResidual> res(pts.size());
    parallel_for(static_cast<int>(pts.size()), cfg.jobs, [&](int i) { res[i] = res_of(pts[i]); });
    double min_probe = std::numeric_limits<double>::infinity();
    std::vector<size_t> order(pts.size());
    for (size_t i = 0; i < pts.size(); ++i) {
      order[i] = i;
      consider(res[i], "Bloch vector " + describe(pts[i]));
      min_probe = std::min(min_probe, res[i].probe_trace_distance);
    }
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return res[a].value() < res[b].value(); });
    for (size_t k = 0; k < std::min<size_t>(3, order.size()); ++k) {
      const auto nm = nelder_mead([&](const std::vector<double>& v) { return res_of(v).value(); }, pts[order[k]],
                                  1.0 / (n - 1), cfg.nelder_mead_iterations);
      const auto b = to_ball(nm.x);
      consider(res_of(b), "Bloch vector " + describe(b));
    }
    // Projected cube grid covers the ball within half a cell diagonal; trace distance is half the Bloch distance.
    const double covering = std::sqrt(3.0) / (n - 1);
    out.method = std::to_string(n) + "^3 Bloch grid + Nelder-Mead";
    out.lower_bound = std::max(0.0, min_probe - covering / 2);
    out.certified = true;
  } else {
    std::mt19937_64 rng(cfg.seed);
    std::vector<Mat> samples;
    for (int k = 0; k < cfg.random_samples; ++k) samples.push_back(random_density(de, rng));
    std::vector<MapResidual> res(samples.size());
    if (m.register_form()) {
      parallel_for(static_cast<int>(samples.size()), cfg.jobs, [&](int i) {
        const RVec d = samples[i].diagonal().real();
        res[i] = residual_register(std::vector<double>(d.data(), d.data() + d.size()));
      });
    } else {
      parallel_for(static_cast<int>(samples.size()), cfg.jobs, [&](int i) { res[i] = residual_dense(samples[i]); });
    }
    for (size_t i = 0; i < res.size(); ++i) consider(res[i], "random sample " + std::to_string(i));
    out.method = "random search (" + std::to_string(cfg.random_samples) + " states)";
  }
  if (out.best.value() <= tol)
    out.verdict = Verdict::pass;
  else
    out.verdict = out.certified ? Verdict::fail : Verdict::inconclusive;
  return out;
}

}  // namespace

CriterionReport check_nib(const JointModel& m, const std::vector<TimeTriple>& triples, const NibSearch& search,
                          double tol) {
  CriterionReport r = make_report("nib", tol);
  r.grid = std::to_string(triples.size()) + " time triples";
  if (!m.dense_available() && !m.register_form())
    return inconclusive(r, m.name() + ": environment too large to search");
  std::vector<TripleSearch> results;
  for (const auto& t : triples) {
    require_initial_time(m, t[0]);
    if (!m.dense_available()) {
      TripleSearch ts;
      const RVec w = m.register_weights();
      const MapResidual res = map_residual(dynamical_map(m, t[0], t[2]),
                                           compose(replacement_map_register(m, w, t[1], t[2]), dynamical_map(m, t[0], t[1])));
      ts.best = res;
      ts.best_sigma = "initial environment state";
      ts.method = "candidates";
      ts.verdict = res.value() <= tol ? Verdict::pass : Verdict::inconclusive;
      results.push_back(ts);
      continue;
    }
    results.push_back(search_triple(m, t, search, tol));
  }
  size_t pick = 0;
  bool any_fail = false, any_inconclusive = false;
  for (size_t k = 0; k < results.size(); ++k) {
    if (results[k].verdict == Verdict::fail) any_fail = true;
    if (results[k].verdict == Verdict::inconclusive) any_inconclusive = true;
    if (results[k].best.value() > results[pick].best.value()) pick = k;
  }
  if (results.empty()) return inconclusive(r, "no time triples supplied");
  const auto& w = results[pick];
  r.witnesses["min_residual"] = w.best.value();
  r.witnesses["min_probe_trace_distance"] = w.best.probe_trace_distance;
  r.witnesses["best_sigma_e"] = w.best_sigma;
  r.witnesses["triple"] = fmt_triple(triples[pick]);
  r.witnesses["search"] = w.method;
  if (w.certified) {
    r.witnesses["certified_lower_bound"] = w.lower_bound;
    r.witnesses["certification"] =
        std::string("lower bound on the probe trace-distance residual from grid resolution; qualitative beyond that");
  }
  if (any_fail) {
    r.verdict = Verdict::fail;
  } else if (any_inconclusive) {
    r.verdict = Verdict::inconclusive;
    r.reason = "no replacement state within tolerance found and the environment is too large for a certified search";
  } else {
    r.verdict = Verdict::pass;
  }
  return r;
}

BreakingChannel computational_measure_prepare(int de) {
  BreakingChannel ch;
  ch.label = "computational-basis measure and prepare";
  for (int k = 0; k < de; ++k) {
    ch.povm.push_back(projector(basis_ket(de, k)));
    ch.states.push_back(projector(basis_ket(de, k)));
  }
  return ch;
}

namespace {

void validate_channel(const BreakingChannel& ch, int de) {
  if (ch.povm.empty() || ch.povm.size() != ch.states.size())
    throw std::invalid_argument("breaking channel needs one re-prepared state per POVM element");
  Mat sum = Mat::Zero(de, de);
  for (const Mat& f : ch.povm) {
    if (f.rows() != de) throw dimension_error("POVM element has wrong dimension");
    if (hermiticity_residual(f) > 1e-10 || hermitian_eigenvalues(f).minCoeff() < -1e-10)
      throw std::invalid_argument("POVM element is not positive semidefinite");
    sum += f;
  }
  if ((sum - Mat::Identity(de, de)).cwiseAbs().maxCoeff() > 1e-10)
    throw std::invalid_argument("POVM elements do not sum to the identity");
  for (const Mat& s : ch.states) DensityOperator check(s);
}

void apply_env_channel(JointOperator& j, const BreakingChannel& ch) {
  const int ds = j.ds, de = j.de;
  if (j.blocks_form) {
    for (const Mat& s : ch.states)
      if ((s - Mat(s.diagonal().asDiagonal())).cwiseAbs().maxCoeff() > 1e-14)
        throw std::logic_error("register models accept only diagonal re-prepared states");
    std::vector<Mat> out(de, Mat::Zero(ds, ds));
    for (size_t k = 0; k < ch.povm.size(); ++k) {
      Mat x = Mat::Zero(ds, ds);
      for (int l = 0; l < de; ++l) x += ch.povm[k](l, l) * j.blocks[l];
      for (int l = 0; l < de; ++l) out[l] += ch.states[k](l, l) * x;
    }
    j.blocks = std::move(out);
    return;
  }
  Mat out = Mat::Zero(ds * de, ds * de);
  for (size_t k = 0; k < ch.povm.size(); ++k) {
    const Mat ft = ch.povm[k].transpose();
    Mat x(ds, ds);
    for (int r = 0; r < ds; ++r)
      for (int c = 0; c < ds; ++c) x(r, c) = ft.cwiseProduct(j.dense.block(r * de, c * de, de, de)).sum();
    out += kron<double>(x, ch.states[k]);
  }
  j.dense = std::move(out);
}

}  // namespace

CriterionReport check_nqib(const JointModel& m, const TimeTriple& t, const BreakingChannel* channel, double tol) {
  CriterionReport r = make_report("nqib", tol);
  r.grid = "triple " + fmt_triple(t);
  if (!channel) return inconclusive(r, "no entanglement-breaking channel supplied");
  require_initial_time(m, t[0]);
  validate_channel(*channel, m.dim_e());
  r.witnesses["channel"] = channel->label;
  SuperOperator broken;
  try {
    broken = tomograph_with(
        m, [&m](const Mat& x) { return lift(m, x); },
        [&](JointOperator& j) {
          evolve(m, j, t[0], t[1]);
          apply_env_channel(j, *channel);
          evolve(m, j, t[1], t[2]);
        });
  } catch (const std::logic_error& e) {
    return inconclusive(r, e.what());
  }
  const MapResidual res = map_residual(dynamical_map(m, t[0], t[2]), broken);
  r.witnesses["residual"] = res.value();
  r.witnesses["probe_trace_distance"] = res.probe_trace_distance;
  r.verdict = res.value() <= tol ? Verdict::pass : Verdict::fail;
  return r;
}

CriterionReport check_divisibility(const MapFamily& family, const std::vector<double>& grid, double tol) {
  CriterionReport r = make_report("divisibility", tol);
  r.grid = "t in " + fmt_list(grid);
  if (grid.size() < 2) return inconclusive(r, "grid needs at least two times");
  double min_eig = std::numeric_limits<double>::infinity(), max_tp = 0, max_cond = 0, max_inconsistency = 0;
  std::string worst = "none", nonlinear = "", singular = "";
  bool fail = false;
  SuperOperator early = family(grid[0]);
  for (size_t k = 0; k + 1 < grid.size(); ++k) {
    const SuperOperator late = family(grid[k + 1]);
    const auto q = intermediate_map(late, early);
    const std::string interval = "(" + fmt(grid[k]) + " -> " + fmt(grid[k + 1]) + ")";
    max_cond = std::max(max_cond, q.condition);
    if (!q.consistent) {
      fail = true;
      if (q.consistency_residual > max_inconsistency) {
        max_inconsistency = q.consistency_residual;
        nonlinear = interval;
      }
    } else {
      const auto diag = is_cptp(q.q, tol);
      if (diag.min_choi_eig < min_eig) {
        min_eig = diag.min_choi_eig;
        worst = interval;
      }
      max_tp = std::max(max_tp, diag.tp_residual);
      if (!diag.pass) {
        if (q.condition > 1e10)
          singular += (singular.empty() ? "" : ", ") + interval;
        else
          fail = true;
      }
    }
    early = late;
  }
  if (std::isfinite(min_eig)) r.witnesses["min_choi_eig"] = min_eig;
  r.witnesses["worst_interval"] = worst;
  r.witnesses["max_tp_residual"] = max_tp;
  r.witnesses["max_condition"] = max_cond;
  if (!nonlinear.empty()) {
    r.witnesses["no_linear_intermediate_map"] = nonlinear;
    r.witnesses["max_consistency_residual"] = max_inconsistency;
  }
  if (fail) {
    r.verdict = Verdict::fail;
  } else if (!singular.empty()) {
    r.verdict = Verdict::inconclusive;
    r.reason = "singular early map; pseudo-inverse intermediate map is not CPTP on " + singular;
  } else {
    r.verdict = Verdict::pass;
  }
  return r;
}

CriterionReport check_semigroup(const MapFamily& family, double t0, const std::vector<std::pair<double, double>>& pairs,
                                double tol) {
  CriterionReport r = make_report("semigroup", tol);
  std::vector<double> flat;
  for (const auto& [a, b] : pairs) {
    flat.push_back(a);
    flat.push_back(b);
  }
  r.grid = "(r, s) pairs " + fmt_list(flat);
  double worst = 0;
  std::string where = "none";
  for (const auto& [a, b] : pairs) {
    const double res = map_residual(family(t0 + a + b), compose(family(t0 + a), family(t0 + b))).value();
    if (res >= worst) {
      worst = res;
      where = "(" + fmt(a) + ", " + fmt(b) + ")";
    }
  }
  r.witnesses["max_residual"] = worst;
  r.witnesses["worst_pair"] = where;
  r.verdict = worst <= tol ? Verdict::pass : Verdict::fail;
  return r;
}

std::vector<double> default_w_grid() { return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}; }

std::vector<std::pair<Mat, Mat>> haar_pairs(int d, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::pair<Mat, Mat>> out;
  for (int k = 0; k < count; ++k) {
    const Mat a = projector(haar_state(d, rng));
    const Mat b = projector(haar_state(d, rng));
    out.emplace_back(a, b);
  }
  return out;
}

CriterionReport check_distinguishability(const MapFamily& family, const std::vector<std::pair<Mat, Mat>>& pairs,
                                         const std::vector<double>& w_grid, const std::vector<double>& grid,
                                         double tol) {
  CriterionReport r = make_report("distinguishability", tol);
  r.grid = std::to_string(pairs.size()) + " state pairs, w in " + fmt_list(w_grid) + ", t in " + fmt_list(grid);
  if (grid.size() < 2) return inconclusive(r, "grid needs at least two times");
  std::vector<SuperOperator> maps;
  for (double t : grid) maps.push_back(family(t));
  double worst = -std::numeric_limits<double>::infinity();
  std::string where = "none";
  for (size_t p = 0; p < pairs.size(); ++p)
    for (double w : w_grid) {
      double prev = helstrom_norm(w, maps[0].apply(pairs[p].first), maps[0].apply(pairs[p].second));
      for (size_t k = 1; k < maps.size(); ++k) {
        const double cur = helstrom_norm(w, maps[k].apply(pairs[p].first), maps[k].apply(pairs[p].second));
        if (cur - prev > worst) {
          worst = cur - prev;
          where = "pair " + std::to_string(p) + ", w = " + fmt(w) + ", t = " + fmt(grid[k - 1]) + " -> " + fmt(grid[k]);
        }
        prev = cur;
      }
    }
  r.witnesses["max_increase"] = worst;
  r.witnesses["worst_case"] = where;
  r.verdict = worst <= tol ? Verdict::pass : Verdict::fail;
  return r;
}

PulseSequence spin_echo(double t, int d) {
  if (d != 2) throw dimension_error("spin echo uses qubit pulses");
  return {{pauli('X'), pauli('X')}, {t / 2, t}, t, "spin echo X(t/2) X(t)"};
}

std::vector<PulseSequence> random_pulse_sequences(const std::vector<double>& times, double t_end, int count, int d,
                                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<PulseSequence> out;
  for (int k = 0; k < count; ++k) {
    PulseSequence s;
    s.times = times;
    s.t_end = t_end;
    s.label = "random sequence " + std::to_string(k);
    for (size_t j = 0; j < times.size(); ++j) s.pulses.push_back(haar_unitary(d, rng));
    out.push_back(std::move(s));
  }
  return out;
}

CriterionReport check_fdd(const JointModel& m, const std::vector<PulseSequence>& sequences, double tol) {
  CriterionReport r = make_report("fdd", tol);
  r.grid = std::to_string(sequences.size()) + " pulse sequences";
  if (!m.has_env_frame()) return inconclusive(r, m.name() + " has no environment frame for the Q-chain");
  GeneralizedMaps maps(m);
  double worst = 0;
  std::string where = "none";
  for (const auto& s : sequences) {
    const SuperOperator hahn = dd_apply(m, s.pulses, s.times, s.t_end);
    double t = m.t0();
    SuperOperator chain = identity_map(m.dim_s());
    for (size_t k = 0; k < s.pulses.size(); ++k) {
      const SuperOperator step = (k == 0) ? dynamical_map(m, t, s.times[k]) : maps.get(t, s.times[k]);
      chain = compose(unitary_map(s.pulses[k]), compose(step, chain));
      t = s.times[k];
    }
    chain = compose(s.pulses.empty() ? dynamical_map(m, t, s.t_end) : maps.get(t, s.t_end), chain);
    const double res = map_residual(hahn, chain).value();
    if (res >= worst) {
      worst = res;
      where = s.label;
    }
  }
  r.witnesses["max_residual"] = worst;
  r.witnesses["worst_sequence"] = where;
  r.verdict = worst <= tol ? Verdict::pass : Verdict::fail;
  return r;
}

DdEffect dd_effectiveness(const JointModel& m, const PulseSequence& seq, const Mat& rho0) {
  DdEffect out;
  const Mat free_out = dynamical_map(m, m.t0(), seq.t_end).apply(rho0);
  const Mat dd_out = dd_apply(m, seq.pulses, seq.times, seq.t_end).apply(rho0);
  out.purity_free = purity(free_out);
  out.purity_dd = purity(dd_out);
  out.gain = out.purity_dd - out.purity_free;
  out.fidelity_dd = (rho0 * dd_out).trace().real();
  return out;
}

const std::vector<std::pair<std::string, std::string>>& implication_edges() {
  static const std::vector<std::pair<std::string, std::string>> edges{
      {"fa", "qrf"},          {"fa", "gqrf"}, {"gqrf", "qrf"},         {"qrf", "composability"},
      {"composability", "nib"}, {"nib", "nqib"}, {"nib", "divisibility"}, {"divisibility", "distinguishability"},
      {"gqrf", "fdd"}};
  return edges;
}

std::vector<std::string> implication_violations(const std::vector<CriterionReport>& reports) {
  std::map<std::string, Verdict> v;
  for (const auto& r : reports) v[r.criterion] = r.verdict;
  std::vector<std::string> out;
  for (const auto& [a, b] : implication_edges()) {
    auto ia = v.find(a), ib = v.find(b);
    if (ia == v.end() || ib == v.end()) continue;
    if (ia->second == Verdict::pass && ib->second == Verdict::fail) out.push_back(a + " pass but " + b + " fail");
  }
  return out;
}

}  // namespace oqs
