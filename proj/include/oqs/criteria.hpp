#ifndef OQS_CRITERIA_HPP
#define OQS_CRITERIA_HPP

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "oqs/models.hpp"
#include "oqs/superop.hpp"

namespace oqs {

enum class Verdict { pass, fail, inconclusive };

std::string to_string(Verdict v);

using Witness = std::variant<double, cplx, std::string>;

struct CriterionReport {
  std::string criterion;
  Verdict verdict = Verdict::inconclusive;
  std::map<std::string, Witness> witnesses;
  double tolerance = 0;
  std::string grid;
  std::string reason;

  double number(const std::string& key) const;
};

SuperOperator tomograph(const JointModel& m, double t0, double t);

// Default test inputs: a generic pure state and a generic mixed state.
std::vector<Mat> default_initial_states(int d);

CriterionReport check_fa(const JointModel& m, const std::vector<Mat>& initial_states, const std::vector<double>& times,
                         double tol = 1e-9);

// ops[k] acts at times[k]; the joint state starts as rho_s0 (x) rho_e(t0) at t0.
cplx multitime_correlation(const JointModel& m, const Mat& rho_s0, const std::vector<SuperOperator>& ops,
                           const std::vector<double>& times);
cplx regression_prediction(const JointModel& m, const Mat& rho_s0, const std::vector<SuperOperator>& ops,
                           const std::vector<double>& times);

struct OpPair {
  Mat a;
  Mat b;
  std::string label;
};

struct OpSet {
  std::vector<SuperOperator> ops;
  std::vector<double> times;
  std::string label;
};

std::vector<OpPair> pauli_pairs();
SuperOperator left_mult(const Mat& a);
SuperOperator right_mult(const Mat& a);
// Random insertions X -> A X B with single-qubit Paulis A, B.
std::vector<OpSet> random_pauli_sets(const std::vector<double>& times, int count, std::uint64_t seed);

CriterionReport check_qrf(const JointModel& m, const std::vector<OpPair>& pairs,
                          const std::vector<std::pair<double, double>>& time_pairs, double tol,
                          const std::vector<Mat>& initial_states = {});
CriterionReport check_gqrf(const JointModel& m, const std::vector<OpSet>& sets, double tol,
                           const std::vector<Mat>& initial_states = {});

using TimeTriple = std::array<double, 3>;

CriterionReport check_composability(const JointModel& m, const std::vector<TimeTriple>& triples, double tol);

struct NibSearch {
  int bloch_points = 17;
  int simplex_steps = 10;
  int random_samples = 200;
  int nelder_mead_iterations = 300;
  std::uint64_t seed = 7;
  int jobs = 1;
};

CriterionReport check_nib(const JointModel& m, const std::vector<TimeTriple>& triples, const NibSearch& search,
                          double tol);

struct BreakingChannel {
  std::vector<Mat> povm;
  std::vector<Mat> states;
  std::string label;
};

// All environment factors measured in the computational basis and re-prepared in the observed basis state.
BreakingChannel computational_measure_prepare(int de);

CriterionReport check_nqib(const JointModel& m, const TimeTriple& triple, const BreakingChannel* channel, double tol);

CriterionReport check_divisibility(const MapFamily& family, const std::vector<double>& grid, double tol);
CriterionReport check_semigroup(const MapFamily& family, double t0, const std::vector<std::pair<double, double>>& pairs,
                                double tol);
CriterionReport check_distinguishability(const MapFamily& family, const std::vector<std::pair<Mat, Mat>>& pairs,
                                         const std::vector<double>& w_grid, const std::vector<double>& grid,
                                         double tol);
std::vector<std::pair<Mat, Mat>> haar_pairs(int d, int count, std::uint64_t seed);
std::vector<double> default_w_grid();

struct PulseSequence {
  std::vector<Mat> pulses;
  std::vector<double> times;
  double t_end = 0;
  std::string label;
};

PulseSequence spin_echo(double t, int d = 2);
std::vector<PulseSequence> random_pulse_sequences(const std::vector<double>& times, double t_end, int count, int d,
                                                  std::uint64_t seed);

CriterionReport check_fdd(const JointModel& m, const std::vector<PulseSequence>& sequences, double tol);

struct DdEffect {
  double purity_free = 0;
  double purity_dd = 0;
  double gain = 0;
  double fidelity_dd = 0;
};

DdEffect dd_effectiveness(const JointModel& m, const PulseSequence& seq, const Mat& psi0);

// Markovianity implication edges: (stronger, weaker).
const std::vector<std::pair<std::string, std::string>>& implication_edges();
std::vector<std::string> implication_violations(const std::vector<CriterionReport>& reports);

}  // namespace oqs

#endif  // OQS_CRITERIA_HPP
