#ifndef OQS_CLASSICAL_HPP
#define OQS_CLASSICAL_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "oqs/criteria.hpp"

namespace oqs {

// Column-stochastic: columns are indexed by the source state.
class StochasticMatrix {
 public:
  explicit StochasticMatrix(Eigen::MatrixXd m, double tol = 1e-12);
  const Eigen::MatrixXd& mat() const { return m_; }
  int size() const { return static_cast<int>(m_.rows()); }

 private:
  Eigen::MatrixXd m_;
};

bool is_stochastic(const Eigen::MatrixXd& m, double tol);

// Dense joint table P(x_{t_n}, ..., x_{t_0}); the digit of time 0 varies fastest.
class FiniteProcess {
 public:
  static constexpr long max_entries = 1L << 20;

  FiniteProcess(std::vector<double> times, std::vector<std::vector<double>> values, Eigen::VectorXd joint);

  int n_times() const { return static_cast<int>(times_.size()); }
  const std::vector<double>& times() const { return times_; }
  const std::vector<std::vector<double>>& values() const { return values_; }
  int levels(int k) const { return static_cast<int>(values_[k].size()); }
  const Eigen::VectorXd& joint() const { return joint_; }
  Eigen::VectorXd initial() const;

  // Marginal over the listed time indices; the first listed index varies fastest.
  Eigen::VectorXd marginal(const std::vector<int>& indices) const;
  // Same process with the initial distribution replaced; the kernel P(rest | x_0) is kept.
  FiniteProcess with_initial(const Eigen::VectorXd& q) const;

 private:
  std::vector<double> times_;
  std::vector<std::vector<double>> values_;
  Eigen::VectorXd joint_;
};

struct ConditionalTable {
  std::vector<int> target;
  std::vector<int> given;
  // Indexed with the target digits first, then the given digits; NaN where the given event has probability 0.
  Eigen::VectorXd values;
  int undefined_entries = 0;
};

ConditionalTable conditional(const FiniteProcess& p, const std::vector<int>& target, const std::vector<int>& given);
// P(x_j | x_i) as a matrix [x_j, x_i]; undefined columns are NaN.
Eigen::MatrixXd two_time_conditional(const FiniteProcess& p, int j, int i);

FiniteProcess markov_chain(const StochasticMatrix& s, const Eigen::VectorXd& q, int n_steps);
FiniteProcess iid_process(const Eigen::VectorXd& p, const Eigen::VectorXd& q, int n_steps);
// alphas holds one coefficient per N-subset in lexicographic order, or a single shared value.
FiniteProcess blockwise_counterexample(int m, int n, const std::vector<double>& alphas, int n_blocks,
                                       const Eigen::VectorXd& q);
double block_marginal_formula(int m, int n, double alpha, const std::vector<int>& signs);

CriterionReport check_cm(const FiniteProcess& p, double tol = 1e-12);
CriterionReport check_crf(const FiniteProcess& p, int n, double tol = 1e-12);
CriterionReport check_cke(const FiniteProcess& p, double tol = 1e-12);

struct TransitionFamily {
  std::vector<double> times;
  std::vector<Eigen::MatrixXd> t;  // T(times[k], times[0])
};

TransitionFamily transition_family(const FiniteProcess& p);
TransitionFamily markov_family(const StochasticMatrix& s, int n_steps);

CriterionReport check_cdiv(const TransitionFamily& f, double tol = 1e-12);
CriterionReport check_stochastic_semigroup(const TransitionFamily& f, double tol = 1e-12);
using DistributionPair = std::pair<Eigen::VectorXd, Eigen::VectorXd>;
std::vector<DistributionPair> distribution_pairs(int k, int random_count, std::uint64_t seed);
CriterionReport check_classical_disting(const TransitionFamily& f, const std::vector<DistributionPair>& pairs,
                                        const std::vector<double>& w_grid, double tol = 1e-12);

// CM => CRF_n => CKE => CD, semigroup => CD, CD <=> distinguishability.
std::vector<std::string> classical_implication_violations(const std::vector<CriterionReport>& reports);

struct SdeSpec {
  int dim = 1;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)> drift;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&, double)> diffusion;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)> rates;
  std::function<Eigen::VectorXd(int, const Eigen::VectorXd&)> jump;
};

SdeSpec ou_spec(double k, double sigma);
SdeSpec poisson_spec(double lambda);

struct McsmOptions {
  double dt = 1e-3;
  int jobs = 1;
};

struct McsmResult {
  std::vector<double> times;
  int dim = 0;
  std::vector<std::vector<Eigen::VectorXd>> paths;  // [path][time]
  std::vector<Eigen::VectorXd> mean;
  std::vector<Eigen::VectorXd> variance;
  std::vector<Eigen::VectorXd> std_error;
};

McsmResult mcsm(const SdeSpec& spec, const Eigen::VectorXd& x0, const std::vector<double>& grid, int m,
                std::uint64_t seed, const McsmOptions& opt = {});

void write_paths_csv(std::ostream& os, const McsmResult& r);

}  // namespace oqs

#endif  // OQS_CLASSICAL_HPP
