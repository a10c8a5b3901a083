#include "oqs/classical.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "oqs/parallel.hpp"
#include "oqs/unravel.hpp"

namespace oqs {

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

std::string num(double x) {
  std::ostringstream os;
  os << std::setprecision(6) << x;
  return os.str();
}

std::string tuple_string(const std::vector<double>& times, const std::vector<int>& idx) {
  std::ostringstream os;
  os << "(";
  for (size_t k = 0; k < idx.size(); ++k) os << (k ? ", " : "") << times[idx[k]];
  os << ")";
  return os.str();
}

void validate_distribution(const Eigen::VectorXd& q, int k, const std::string& what) {
  if (q.size() != k) throw std::invalid_argument(what + " has wrong length");
  if (q.minCoeff() < 0 || std::abs(q.sum() - 1.0) > 1e-12) throw std::invalid_argument(what + " is not a distribution");
}

// All increasing n-subsets of {lo, ..., hi - 1}.
void for_each_subset(int lo, int hi, int n, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> s(n);
  std::function<void(int, int)> rec = [&](int pos, int start) {
    if (pos == n) {
      fn(s);
      return;
    }
    for (int v = start; v <= hi - (n - pos); ++v) {
      s[pos] = v;
      rec(pos + 1, v + 1);
    }
  };
  rec(0, lo);
}

Eigen::MatrixXd nan_to_zero(Eigen::MatrixXd m) {
  for (Eigen::Index i = 0; i < m.size(); ++i)
    if (std::isnan(m.data()[i])) m.data()[i] = 0;
  return m;
}

struct RealPinv {
  Eigen::MatrixXd inverse;
  int rank = 0;
};

RealPinv real_pinv(const Eigen::MatrixXd& a) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double cutoff = 1e-12 * (s.size() ? s(0) : 0.0);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
  RealPinv out;
  for (Eigen::Index k = 0; k < s.size(); ++k)
    if (s(k) > cutoff) {
      inv(k) = 1.0 / s(k);
      ++out.rank;
    }
  out.inverse = svd.matrixV().leftCols(s.size()) * inv.asDiagonal() * svd.matrixU().leftCols(s.size()).transpose();
  return out;
}

CriterionReport make_report(const std::string& name, double tol) {
  CriterionReport r;
  r.criterion = name;
  r.tolerance = tol;
  return r;
}

}  // namespace

bool is_stochastic(const Eigen::MatrixXd& m, double tol) {
  if (m.rows() != m.cols() || m.size() == 0 || !m.allFinite()) return false;
  if (m.minCoeff() < -tol) return false;
  return (m.colwise().sum().array() - 1.0).abs().maxCoeff() <= tol;
}

StochasticMatrix::StochasticMatrix(Eigen::MatrixXd m, double tol) : m_(std::move(m)) {
  if (!is_stochastic(m_, tol)) throw std::invalid_argument("matrix is not column-stochastic");
}

FiniteProcess::FiniteProcess(std::vector<double> times, std::vector<std::vector<double>> values, Eigen::VectorXd joint)
    : times_(std::move(times)), values_(std::move(values)), joint_(std::move(joint)) {
  if (times_.empty() || times_.size() != values_.size())
    throw std::invalid_argument("one value list per time label required");
  for (size_t k = 1; k < times_.size(); ++k)
    if (!(times_[k] > times_[k - 1])) throw std::invalid_argument("time labels must increase");
  long size = 1;
  for (const auto& v : values_) {
    if (v.empty()) throw std::invalid_argument("empty state space");
    size *= static_cast<long>(v.size());
    if (size > max_entries) throw std::length_error("joint table exceeds 2^20 entries");
  }
  if (joint_.size() != size) throw std::invalid_argument("joint table size does not match the state spaces");
  if (!joint_.allFinite() || joint_.minCoeff() < -1e-15) throw std::invalid_argument("joint table has negative entries");
  if (std::abs(joint_.sum() - 1.0) > 1e-12) throw std::invalid_argument("joint table does not sum to 1");
  joint_ = joint_.cwiseMax(0.0);
}

Eigen::VectorXd FiniteProcess::initial() const { return marginal({0}); }

Eigen::VectorXd FiniteProcess::marginal(const std::vector<int>& indices) const {
  std::vector<long> stride(n_times());
  long s = 1;
  for (int k = 0; k < n_times(); ++k) {
    stride[k] = s;
    s *= levels(k);
  }
  std::vector<long> out_stride(indices.size());
  long out_size = 1;
  std::set<int> seen;
  for (size_t r = 0; r < indices.size(); ++r) {
    const int k = indices[r];
    if (k < 0 || k >= n_times() || !seen.insert(k).second) throw std::invalid_argument("invalid time index list");
    out_stride[r] = out_size;
    out_size *= levels(k);
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(out_size);
  for (long i = 0; i < joint_.size(); ++i) {
    long o = 0;
    for (size_t r = 0; r < indices.size(); ++r) o += ((i / stride[indices[r]]) % levels(indices[r])) * out_stride[r];
    out(o) += joint_(i);
  }
  return out;
}

FiniteProcess FiniteProcess::with_initial(const Eigen::VectorXd& q2) const {
  validate_distribution(q2, levels(0), "initial distribution");
  const Eigen::VectorXd q = initial();
  Eigen::VectorXd j(joint_.size());
  for (long i = 0; i < joint_.size(); ++i) {
    const int x0 = static_cast<int>(i % levels(0));
    if (q(x0) > 0) {
      j(i) = joint_(i) / q(x0) * q2(x0);
    } else {
      if (q2(x0) > 0) throw std::invalid_argument("kernel undefined for an initial state of probability zero");
      j(i) = 0;
    }
  }
  return FiniteProcess(times_, values_, j);
}

ConditionalTable conditional(const FiniteProcess& p, const std::vector<int>& target, const std::vector<int>& given) {
  ConditionalTable c{target, given, {}, 0};
  std::vector<int> all = target;
  all.insert(all.end(), given.begin(), given.end());
  const Eigen::VectorXd num_t = p.marginal(all);
  const Eigen::VectorXd den = p.marginal(given);
  const long tsize = num_t.size() / den.size();
  c.values.resize(num_t.size());
  for (long o = 0; o < num_t.size(); ++o) {
    const double d = den(o / tsize);
    if (d > 0) {
      c.values(o) = num_t(o) / d;
    } else {
      c.values(o) = nan;
      ++c.undefined_entries;
    }
  }
  return c;
}

Eigen::MatrixXd two_time_conditional(const FiniteProcess& p, int j, int i) {
  if (i == j) {
    const Eigen::VectorXd q = p.marginal({i});
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(q.size(), q.size());
    for (Eigen::Index k = 0; k < q.size(); ++k)
      if (!(q(k) > 0)) m.col(k).setConstant(nan);
    return m;
  }
  const ConditionalTable c = conditional(p, {j}, {i});
  return Eigen::Map<const Eigen::MatrixXd>(c.values.data(), p.levels(j), p.levels(i));
}

FiniteProcess markov_chain(const StochasticMatrix& s, const Eigen::VectorXd& q, int n_steps) {
  const int k = s.size();
  validate_distribution(q, k, "initial distribution");
  if (n_steps < 0) throw std::invalid_argument("negative number of steps");
  std::vector<double> times(n_steps + 1);
  std::iota(times.begin(), times.end(), 0.0);
  std::vector<double> labels(k);
  std::iota(labels.begin(), labels.end(), 0.0);
  long size = 1;
  for (int t = 0; t <= n_steps; ++t) {
    size *= k;
    if (size > FiniteProcess::max_entries) throw std::length_error("joint table exceeds 2^20 entries");
  }
  Eigen::VectorXd joint(size);
  for (long i = 0; i < size; ++i) {
    long rest = i;
    int prev = static_cast<int>(rest % k);
    rest /= k;
    double pr = q(prev);
    for (int t = 1; t <= n_steps; ++t) {
      const int x = static_cast<int>(rest % k);
      rest /= k;
      pr *= s.mat()(x, prev);
      prev = x;
    }
    joint(i) = pr;
  }
  return FiniteProcess(times, std::vector<std::vector<double>>(n_steps + 1, labels), joint);
}

FiniteProcess iid_process(const Eigen::VectorXd& p, const Eigen::VectorXd& q, int n_steps) {
  validate_distribution(p, static_cast<int>(p.size()), "step distribution");
  Eigen::MatrixXd s = p.replicate(1, p.size());
  return markov_chain(StochasticMatrix(s), q, n_steps);
}

namespace {

double binomial(int m, int n) {
  double c = 1;
  for (int k = 1; k <= n; ++k) c = c * (m - n + k) / k;
  return c;
}

}  // namespace

FiniteProcess blockwise_counterexample(int m, int n, const std::vector<double>& alphas, int n_blocks,
                                       const Eigen::VectorXd& q) {
  if (n < 2 || m < n) throw std::invalid_argument("block sizes must satisfy M >= N >= 2");
  if (n_blocks < 1) throw std::invalid_argument("at least one block required");
  validate_distribution(q, 2, "initial distribution");
  std::vector<std::vector<int>> subsets;
  for_each_subset(0, m, n, [&](const std::vector<int>& s) { subsets.push_back(s); });
  std::vector<double> a = alphas;
  if (a.size() == 1) a.assign(subsets.size(), a.front());
  if (a.size() != subsets.size()) throw std::invalid_argument("one alpha per N-subset required");
  for (double x : a)
    if (!(std::abs(x) > 0 && std::abs(x) <= 1)) throw std::invalid_argument("alpha must satisfy 0 < |alpha| <= 1");

  const double norm = std::pow(2.0, -m) / binomial(m, n);
  Eigen::VectorXd block(1L << m);
  for (long b = 0; b < block.size(); ++b) {
    double acc = 0;
    for (size_t s = 0; s < subsets.size(); ++s) {
      double prod = 1;
      for (int j : subsets[s]) prod *= ((b >> j) & 1) ? 1.0 : -1.0;
      acc += 1 + a[s] * prod;
    }
    block(b) = norm * acc;
  }
  const int total = 1 + m * n_blocks;
  if (total > 20) throw std::length_error("joint table exceeds 2^20 entries");
  std::vector<double> times(total);
  std::iota(times.begin(), times.end(), 0.0);
  Eigen::VectorXd joint(1L << total);
  for (long i = 0; i < joint.size(); ++i) {
    double pr = q(i & 1);
    for (int bl = 0; bl < n_blocks; ++bl) pr *= block((i >> (1 + bl * m)) & ((1L << m) - 1));
    joint(i) = pr;
  }
  return FiniteProcess(times, std::vector<std::vector<double>>(total, {-1.0, 1.0}), joint);
}

double block_marginal_formula(int m, int n, double alpha, const std::vector<int>& signs) {
  double prod = 1;
  for (int s : signs) prod *= s;
  return std::pow(2.0, -n) * (1 + alpha / binomial(m, n) * prod);
}

CriterionReport check_cm(const FiniteProcess& p, double tol) {
  CriterionReport r = make_report("cm", tol);
  const int t = p.n_times();
  double worst = 0;
  std::string where = "none";
  long checked = 0;
  for (int size = 3; size <= t; ++size)
    for_each_subset(0, t, size, [&](const std::vector<int>& s) {
      const int last = s.back(), prev = s[s.size() - 2];
      const std::vector<int> past(s.begin(), s.end() - 1);
      const ConditionalTable full = conditional(p, {last}, past);
      const Eigen::MatrixXd two = two_time_conditional(p, last, prev);
      const int kl = p.levels(last);
      long inner = 1;
      for (size_t r2 = 0; r2 + 1 < past.size(); ++r2) inner *= p.levels(past[r2]);
      for (long o = 0; o < full.values.size(); ++o) {
        if (std::isnan(full.values(o))) continue;
        const long g = o / kl;
        const double d = std::abs(full.values(o) - two(o % kl, g / inner));
        if (d > worst) {
          worst = d;
          where = tuple_string(p.times(), s);
        }
      }
      ++checked;
    });
  r.witnesses["max_residual"] = worst;
  r.witnesses["worst_times"] = where;
  r.witnesses["subsets_checked"] = static_cast<double>(checked);
  r.grid = "all increasing time subsets of length >= 3";
  r.verdict = worst <= tol ? Verdict::pass : Verdict::fail;
  return r;
}

CriterionReport check_crf(const FiniteProcess& p, int n, double tol) {
  if (n < 1) throw std::invalid_argument("regression order must be positive");
  if (n > p.n_times() - 1) throw std::invalid_argument("regression order exceeds the table's horizon");
  CriterionReport r = make_report("crf" + std::to_string(n), tol);
  const Eigen::VectorXd q = p.initial();
  double worst = 0;
  std::string where = "none";
  for_each_subset(1, p.n_times(), n, [&](const std::vector<int>& s) {
    const ConditionalTable lhs = conditional(p, s, {0});
    std::vector<int> chain{0};
    chain.insert(chain.end(), s.begin(), s.end());
    std::vector<Eigen::MatrixXd> factors;
    for (size_t k = 1; k < chain.size(); ++k)
      factors.push_back(nan_to_zero(two_time_conditional(p, chain[k], chain[k - 1])));
    for (long o = 0; o < lhs.values.size(); ++o) {
      std::vector<int> x(chain.size());
      long rest = o;
      for (size_t k = 1; k < chain.size(); ++k) {
        x[k] = static_cast<int>(rest % p.levels(chain[k]));
        rest /= p.levels(chain[k]);
      }
      x[0] = static_cast<int>(rest);
      if (!(q(x[0]) > 0)) continue;
      double rhs = 1;
      for (size_t k = 1; k < chain.size(); ++k) rhs *= factors[k - 1](x[k], x[k - 1]);
      const double d = std::abs(lhs.values(o) - rhs);
      if (d > worst) {
        worst = d;
        where = tuple_string(p.times(), chain);
      }
    }
  });
  r.witnesses["max_violation"] = worst;
  r.witnesses["worst_times"] = where;
  r.grid = "t0 = " + num(p.times()[0]) + " with all increasing " + std::to_string(n) + "-tuples after it";
  r.verdict = worst <= tol ? Verdict::pass : Verdict::fail;
  return r;
}

CriterionReport check_cke(const FiniteProcess& p, double tol) {
  CriterionReport r = make_report("cke", tol);
  double worst = 0;
  std::string where = "none";
  for_each_subset(0, p.n_times(), 3, [&](const std::vector<int>& s) {
    const Eigen::MatrixXd direct = two_time_conditional(p, s[2], s[0]);
    const Eigen::MatrixXd composed = nan_to_zero(two_time_conditional(p, s[2], s[1])) *
                                     nan_to_zero(two_time_conditional(p, s[1], s[0]));
    for (Eigen::Index c = 0; c < direct.cols(); ++c) {
      if (std::isnan(direct(0, c))) continue;
      const double d = (direct.col(c) - composed.col(c)).cwiseAbs().maxCoeff();
      if (d > worst) {
        worst = d;
        where = tuple_string(p.times(), s);
      }
    }
  });
  r.witnesses["max_residual"] = worst;
  r.witnesses["worst_times"] = where;
  r.grid = "all time triples";
  r.verdict = worst <= tol ? Verdict::pass : Verdict::fail;
  return r;
}

TransitionFamily transition_family(const FiniteProcess& p) {
  TransitionFamily f;
  f.times = p.times();
  for (int k = 0; k < p.n_times(); ++k) {
    Eigen::MatrixXd t = two_time_conditional(p, k, 0);
    if (!t.allFinite())
      throw std::invalid_argument("transition matrix undefined: the initial distribution has zero entries");
    f.t.push_back(std::move(t));
  }
  return f;
}

TransitionFamily markov_family(const StochasticMatrix& s, int n_steps) {
  TransitionFamily f;
  Eigen::MatrixXd t = Eigen::MatrixXd::Identity(s.size(), s.size());
  for (int k = 0; k <= n_steps; ++k) {
    f.times.push_back(k);
    f.t.push_back(t);
    t = s.mat() * t;
  }
  return f;
}

namespace {

void validate_family(const TransitionFamily& f) {
  if (f.t.empty() || f.t.size() != f.times.size()) throw std::invalid_argument("one transition matrix per time required");
  for (const auto& t : f.t)
    if (t.rows() != f.t[0].rows() || t.cols() != f.t[0].rows()) throw std::invalid_argument("transition matrices must be square and equal-sized");
}

}  // namespace

CriterionReport check_cdiv(const TransitionFamily& f, double tol) {
  validate_family(f);
  CriterionReport r = make_report("cdiv", tol);
  double min_entry = std::numeric_limits<double>::infinity(), col_err = 0, consistency = 0;
  int singular = 0, undecided = 0, failed = 0;
  std::string where = "none";
  for (size_t i = 0; i < f.t.size(); ++i) {
    const RealPinv inv = real_pinv(f.t[i]);
    const bool is_singular = inv.rank < f.t[i].rows();
    if (is_singular) ++singular;
    for (size_t j = i + 1; j < f.t.size(); ++j) {
      const Eigen::MatrixXd s = f.t[j] * inv.inverse;
      const double res = (s * f.t[i] - f.t[j]).cwiseAbs().maxCoeff();
      consistency = std::max(consistency, res);
      const double me = s.minCoeff();
      const double ce = (s.colwise().sum().array() - 1.0).abs().maxCoeff();
      min_entry = std::min(min_entry, me);
      col_err = std::max(col_err, ce);
      const std::string pair = "(" + num(f.times[i]) + ", " + num(f.times[j]) + ")";
      if (res > tol) {
        ++failed;
        where = pair + " no linear intermediate map";
      } else if (me < -tol || ce > tol) {
        if (is_singular) {
          ++undecided;
        } else {
          ++failed;
          where = pair;
        }
      }
    }
  }
  r.witnesses["min_entry"] = min_entry;
  r.witnesses["max_column_sum_error"] = col_err;
  r.witnesses["max_consistency_residual"] = consistency;
  r.witnesses["singular_transition_matrices"] = static_cast<double>(singular);
  r.witnesses["worst_pair"] = where;
  r.grid = std::to_string(f.t.size()) + " times, all ordered pairs";
  if (failed) {
    r.verdict = Verdict::fail;
  } else if (undecided) {
    r.verdict = Verdict::inconclusive;
    r.reason = "singular T(t1,t0): the minimum-norm intermediate matrix is not stochastic and other solutions were not searched";
  } else {
    r.verdict = Verdict::pass;
  }
  return r;
}

CriterionReport check_stochastic_semigroup(const TransitionFamily& f, double tol) {
  validate_family(f);
  CriterionReport r = make_report("stochastic_semigroup", tol);
  double worst = 0;
  int triples = 0;
  std::string where = "none";
  for (size_t i = 1; i < f.t.size(); ++i)
    for (size_t j = 1; j < f.t.size(); ++j) {
      const double target = (f.times[i] - f.times[0]) + (f.times[j] - f.times[0]);
      for (size_t k = 0; k < f.t.size(); ++k) {
        if (std::abs(f.times[k] - f.times[0] - target) > 1e-9 * std::max(1.0, target)) continue;
        ++triples;
        const double d = (f.t[k] - f.t[i] * f.t[j]).cwiseAbs().maxCoeff();
        if (d > worst) {
          worst = d;
          where = "r = " + num(f.times[i] - f.times[0]) + ", s = " + num(f.times[j] - f.times[0]);
        }
      }
    }
  r.witnesses["max_residual"] = worst;
  r.witnesses["worst_displacements"] = where;
  r.witnesses["checked"] = static_cast<double>(triples);
  r.grid = std::to_string(triples) + " displacement pairs";
  if (!triples) {
    r.verdict = Verdict::inconclusive;
    r.reason = "no displacement pair r, s with r + s on the grid";
  } else {
    r.verdict = worst <= tol ? Verdict::pass : Verdict::fail;
  }
  return r;
}

std::vector<DistributionPair> distribution_pairs(int k, int random_count, std::uint64_t seed) {
  std::vector<DistributionPair> out;
  for (int a = 0; a < k; ++a)
    for (int b = a + 1; b < k; ++b) out.emplace_back(Eigen::VectorXd::Unit(k, a), Eigen::VectorXd::Unit(k, b));
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> e(1.0);
  auto draw = [&] {
    Eigen::VectorXd v(k);
    for (int i = 0; i < k; ++i) v(i) = e(rng);
    return Eigen::VectorXd(v / v.sum());
  };
  for (int c = 0; c < random_count; ++c) {
    Eigen::VectorXd p = draw();
    out.emplace_back(p, draw());
  }
  return out;
}

CriterionReport check_classical_disting(const TransitionFamily& f, const std::vector<DistributionPair>& pairs,
                                        const std::vector<double>& w_grid, double tol) {
  validate_family(f);
  CriterionReport r = make_report("classical_distinguishability", tol);
  double worst = 0;
  std::string where = "none";
  for (const auto& [p, pp] : pairs)
    for (double w : w_grid) {
      const Eigen::VectorXd v = w * p - (1 - w) * pp;
      std::vector<double> norms;
      for (const auto& t : f.t) norms.push_back((t * v).lpNorm<1>());
      for (size_t i = 0; i < norms.size(); ++i)
        for (size_t j = i + 1; j < norms.size(); ++j)
          if (norms[j] - norms[i] > worst) {
            worst = norms[j] - norms[i];
            where = "w = " + num(w) + ", t1 = " + num(f.times[i]) + ", t2 = " + num(f.times[j]);
          }
    }
  r.witnesses["max_increase"] = worst;
  r.witnesses["worst_case"] = where;
  r.grid = std::to_string(pairs.size()) + " distribution pairs x " + std::to_string(w_grid.size()) + " weights";
  r.verdict = worst <= tol ? Verdict::pass : Verdict::fail;
  return r;
}

std::vector<std::string> classical_implication_violations(const std::vector<CriterionReport>& reports) {
  std::map<std::string, Verdict> v;
  for (const auto& r : reports) v[r.criterion] = r.verdict;
  std::vector<std::pair<std::string, std::string>> edges{{"cke", "cdiv"},
                                                         {"stochastic_semigroup", "cdiv"},
                                                         {"cdiv", "classical_distinguishability"},
                                                         {"classical_distinguishability", "cdiv"}};
  for (const auto& [name, verdict] : v) {
    if (name.rfind("crf", 0) != 0) continue;
    const int n = std::stoi(name.substr(3));
    edges.emplace_back("cm", name);
    if (n >= 2) edges.emplace_back(name, "cke");
    if (n >= 2) edges.emplace_back(name, "crf" + std::to_string(n - 1));
  }
  std::vector<std::string> out;
  for (const auto& [a, b] : edges) {
    auto ia = v.find(a), ib = v.find(b);
    if (ia != v.end() && ib != v.end() && ia->second == Verdict::pass && ib->second == Verdict::fail)
      out.push_back(a + " passes but " + b + " fails");
  }
  return out;
}

SdeSpec ou_spec(double k, double sigma) {
  SdeSpec s;
  s.dim = 1;
  s.drift = [k](const Eigen::VectorXd& x, double) { return Eigen::VectorXd(-k * x); };
  s.diffusion = [sigma](const Eigen::VectorXd&, double) { return Eigen::MatrixXd::Constant(1, 1, sigma); };
  return s;
}

SdeSpec poisson_spec(double lambda) {
  SdeSpec s;
  s.dim = 1;
  s.rates = [lambda](const Eigen::VectorXd&, double) { return Eigen::VectorXd::Constant(1, lambda); };
  s.jump = [](int, const Eigen::VectorXd&) { return Eigen::VectorXd::Ones(1); };
  return s;
}

McsmResult mcsm(const SdeSpec& spec, const Eigen::VectorXd& x0, const std::vector<double>& grid, int m,
                std::uint64_t seed, const McsmOptions& opt) {
  if (x0.size() != spec.dim) throw std::invalid_argument("initial point has wrong dimension");
  if (m < 1) throw std::invalid_argument("number of paths must be positive");
  if (!(opt.dt > 0)) throw step_size_error("time step must be positive");
  if (grid.empty()) throw std::invalid_argument("empty time grid");
  std::vector<int> steps;
  for (size_t k = 0; k + 1 < grid.size(); ++k) {
    const double span = grid[k + 1] - grid[k];
    const double n = std::round(span / opt.dt);
    if (span < 0 || std::abs(n * opt.dt - span) > 1e-9 * std::max(1.0, span))
      throw step_size_error("step " + num(opt.dt) + " does not divide the grid interval " + num(span));
    steps.push_back(static_cast<int>(n));
  }
  McsmResult res;
  res.times = grid;
  res.dim = spec.dim;
  res.paths.resize(m);
  const double dt = opt.dt, sdt = std::sqrt(opt.dt);
  parallel_for(m, opt.jobs, [&](int i) {
    auto rng = trajectory_rng(seed, static_cast<std::uint64_t>(i));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Eigen::VectorXd x = x0;
    auto& path = res.paths[i];
    path.push_back(x);
    for (size_t k = 0; k < steps.size(); ++k) {
      for (int s = 0; s < steps[k]; ++s) {
        const double t = grid[k] + s * dt;
        Eigen::VectorXd dx = Eigen::VectorXd::Zero(spec.dim);
        if (spec.drift) dx += spec.drift(x, t) * dt;
        if (spec.diffusion) {
          const Eigen::MatrixXd b = spec.diffusion(x, t);
          Eigen::VectorXd dw(b.cols());
          for (Eigen::Index c = 0; c < dw.size(); ++c) dw(c) = normal(rng) * sdt;
          dx += b * dw;
        }
        if (spec.rates) {
          const Eigen::VectorXd lam = spec.rates(x, t);
          for (Eigen::Index j = 0; j < lam.size(); ++j)
            if (lam(j) < 0)
              throw negative_rate_error("jump rate lambda_" + std::to_string(j) + " = " + num(lam(j)) +
                                        " is negative at t = " + num(t));
          if (lam.sum() * dt >= 0.1)
            throw step_size_error("total jump probability " + num(lam.sum() * dt) + " per step at t = " + num(t) +
                                  " exceeds 0.1; reduce dt");
          for (Eigen::Index j = 0; j < lam.size(); ++j)
            if (unif(rng) < lam(j) * dt) dx += spec.jump(static_cast<int>(j), x);
        }
        x += dx;
      }
      path.push_back(x);
    }
  });
  for (size_t k = 0; k < grid.size(); ++k) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(spec.dim), var = Eigen::VectorXd::Zero(spec.dim);
    for (const auto& path : res.paths) mean += path[k];
    mean /= m;
    for (const auto& path : res.paths) var += (path[k] - mean).cwiseAbs2();
    if (m > 1) {
      var /= (m - 1);
      res.std_error.push_back((var / m).cwiseSqrt());
    } else {
      var.setConstant(nan);
      res.std_error.push_back(Eigen::VectorXd::Constant(spec.dim, nan));
    }
    res.mean.push_back(mean);
    res.variance.push_back(var);
  }
  return res;
}

void write_paths_csv(std::ostream& os, const McsmResult& r) {
  os << std::setprecision(17) << "time,path";
  for (int d = 0; d < r.dim; ++d) os << ",x_" << d;
  os << "\n";
  for (size_t i = 0; i < r.paths.size(); ++i)
    for (size_t k = 0; k < r.times.size(); ++k) {
      os << r.times[k] << "," << i;
      for (int d = 0; d < r.dim; ++d) os << "," << r.paths[i][k](d);
      os << "\n";
    }
}

}  // namespace oqs
