#ifndef OQS_UNRAVEL_HPP
#define OQS_UNRAVEL_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "oqs/criteria.hpp"
#include "oqs/models.hpp"
#include "oqs/superop.hpp"

namespace oqs {

// Conditional system states are stored as density matrices so that non-pure
// conditional states (e.g. a wrong measurement basis) can be represented too.
struct Trajectory {
  std::vector<Mat> states;
  std::vector<int> record;
  double weight = 1.0;
};

struct Ensemble {
  std::vector<double> times;
  std::vector<Trajectory> trajectories;
  int dim = 0;
  bool exact = false;
  std::string description;
};

class negative_rate_error : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class step_size_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::mt19937_64 trajectory_rng(std::uint64_t seed, std::uint64_t index);

struct McwfOptions {
  double dt = 1e-3;
  int jobs = 1;
};

Ensemble mcwf_jump(const LindbladSpec& spec, const Vec& psi0, const std::vector<double>& grid, int m,
                   std::uint64_t seed, const McwfOptions& opt = {});
Ensemble mcwf_diffusive(const LindbladSpec& spec, const Vec& psi0, const std::vector<double>& grid, int m,
                        std::uint64_t seed, const McwfOptions& opt = {});

// basis(k) returns a unitary whose columns are the measurement basis for the ancilla of slot k.
using BasisChooser = std::function<Mat(int)>;

struct UnravelOptions {
  int max_branches = 4096;
  int samples = 4096;
  std::uint64_t seed = 1;
};

Ensemble collision_unravel(const CollisionModel& model, const Vec& psi0, const BasisChooser& basis,
                           const UnravelOptions& opt = {});
Ensemble static_unravel(const StaticDephasingModel& model, const Vec& psi0, const std::vector<double>& times,
                        const Mat& basis);

Mat ensemble_mean(const Ensemble& e, size_t time_index);
Mat ensemble_second_moment(const Ensemble& e, size_t time_index);
size_t time_index_of(const Ensemble& e, double t);

struct Estimate {
  double mean = 0;
  double std_error = 0;
  double sample_variance = 0;
};

// Statistics of Tr[O pi] over an equally weighted ensemble; std_error is NaN for M = 1.
Estimate ensemble_expectation(const Ensemble& e, size_t time_index, const Mat& observable);

double max_impurity(const Ensemble& e);

CriterionReport check_pu(const Ensemble& e, const std::vector<Mat>& reference_means, double tol);
CriterionReport check_mpu(const std::vector<Ensemble>& ensembles, double tol, double delta_ens = 1e-3);

void write_ensemble_csv(std::ostream& os, const Ensemble& e);

}  // namespace oqs

#endif  // OQS_UNRAVEL_HPP
