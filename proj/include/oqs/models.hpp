#ifndef OQS_MODELS_HPP
#define OQS_MODELS_HPP

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "oqs/core.hpp"
#include "oqs/superop.hpp"

namespace oqs {

struct Capabilities {
  bool analytic_map = false;
  bool supports_dd = false;
  bool supports_unravelling = false;
};

// System-environment dynamics {U, rho_e(t0)}. Two storage forms are supported:
// dense joint matrices, and a register form where rho_e is diagonal in a fixed
// environment basis and U is block diagonal in it (one system unitary per level).
class JointModel {
 public:
  virtual ~JointModel() = default;

  virtual std::string name() const = 0;
  virtual int dim_s() const = 0;
  virtual int dim_e() const = 0;
  virtual Capabilities capabilities() const = 0;
  virtual double t0() const { return 0.0; }
  virtual double t_max() const { return std::numeric_limits<double>::infinity(); }
  virtual Dims env_dims() const { return {dim_e()}; }

  virtual bool dense_available() const { return true; }
  virtual Mat rho_e0() const = 0;
  virtual Mat propagator(double t1, double t2) const = 0;

  virtual bool has_env_frame() const { return true; }
  virtual bool env_frame_is_identity() const { return true; }
  virtual Mat env_frame(double t0, double t) const;

  virtual bool register_form() const { return false; }
  virtual RVec register_weights() const;
  virtual std::vector<Mat> register_blocks(double t1, double t2) const;

  // Environment operator coupled at time t, in the interaction frame of env_frame.
  virtual Mat coupled_env_operator(const Mat& a, double t) const;

  Dims joint_dims() const;
  void check_times(double t1, double t2) const;
};

class DenseJointModel : public JointModel {
 public:
  using PropagatorFn = std::function<Mat(double, double)>;

  DenseJointModel(std::string name, int ds, Dims env_dims, Mat rho_e0, PropagatorFn prop, Capabilities caps,
                  double t_max = std::numeric_limits<double>::infinity());

  std::string name() const override { return name_; }
  int dim_s() const override { return ds_; }
  int dim_e() const override { return dims_product(env_dims_); }
  Dims env_dims() const override { return env_dims_; }
  Capabilities capabilities() const override { return caps_; }
  double t_max() const override { return t_max_; }
  Mat rho_e0() const override { return rho_e0_; }
  Mat propagator(double t1, double t2) const override;

 private:
  std::string name_;
  int ds_;
  Dims env_dims_;
  Mat rho_e0_;
  PropagatorFn prop_;
  Capabilities caps_;
  double t_max_;
};

class RegisterJointModel : public JointModel {
 public:
  using BlockFn = std::function<Mat(int, double, double)>;

  RegisterJointModel(std::string name, int ds, RVec weights, BlockFn block, Capabilities caps, bool dense_ok);

  std::string name() const override { return name_; }
  int dim_s() const override { return ds_; }
  int dim_e() const override { return static_cast<int>(weights_.size()); }
  Capabilities capabilities() const override { return caps_; }
  bool dense_available() const override { return dense_ok_; }
  Mat rho_e0() const override;
  Mat propagator(double t1, double t2) const override;
  bool register_form() const override { return true; }
  RVec register_weights() const override { return weights_; }
  std::vector<Mat> register_blocks(double t1, double t2) const override;

 private:
  std::string name_;
  int ds_;
  RVec weights_;
  BlockFn block_;
  Capabilities caps_;
  bool dense_ok_;
};

struct AflGrid {
  int points = 4001;
  double cutoff = 200.0;
  double taper_start = 10.0;
};

class AflModel : public RegisterJointModel {
 public:
  AflModel(double gamma, double g, const AflGrid& grid);

  double gamma() const { return gamma_; }
  double coupling() const { return g_; }
  const RVec& grid() const { return x_; }
  double quadrature_error() const { return quad_err_; }
  cplx chi_grid(double a) const;
  double chi_exact(double a) const;
  SuperOperator analytic_map(double t1, double t2) const;
  // Joint pure state (system index major) for a pure system input.
  Vec joint_pure_state(const Vec& psi_s, double t) const;

 private:
  struct Discretization {
    RVec x;
    RVec w;
  };
  AflModel(double gamma, double g, Discretization disc);
  static Discretization discretize(double gamma, const AflGrid& grid);

  double gamma_;
  double g_;
  RVec x_;
  double quad_err_ = 0;
};

AflModel afl(double gamma = 1.0, double g = 2.0, const AflGrid& grid = {});

// Correlation Tr[C_n E ... C_1 E C_0 rho] for the analytic AFL model; ops[k] acts at times[k].
cplx afl_correlation_exact(double gamma, double g, const std::vector<SuperOperator>& ops,
                           const std::vector<double>& times, const Mat& rho_s0);
cplx afl_regression_prediction(double gamma, double g, const std::vector<SuperOperator>& ops,
                               const std::vector<double>& times, const Mat& rho_s0);

double tam_theta(double t);
double tam_coupling(double t);
DenseJointModel tam();
double tam_post_replacement_rate(double t1, double t);
double tam_post_replacement_rate_exact(double t1, double t);

DenseJointModel nqib_qubit();

namespace detail {
struct CollisionData;
}

class CollisionModel : public DenseJointModel {
 public:
  CollisionModel(int n_slots, const Mat& pair_unitary, const Mat& ancilla_state, std::vector<double> slot_times);

  int n_slots() const { return n_slots_; }
  const Mat& pair_unitary() const { return pair_; }
  const Mat& ancilla_state() const { return ancilla_; }
  const std::vector<double>& slot_times() const { return slot_times_; }
  Mat pair_power(double f) const;
  int slot_of(double t) const;
  Mat coupled_env_operator(const Mat& a, double t) const override;

 private:
  CollisionModel(std::shared_ptr<const detail::CollisionData> data, const Mat& pair_unitary, const Mat& ancilla_state);

  std::shared_ptr<const detail::CollisionData> data_;
  int n_slots_;
  Mat pair_;
  Mat ancilla_;
  std::vector<double> slot_times_;
};

CollisionModel collision(int n_slots, const Mat& pair_unitary, const Mat& ancilla_state,
                         std::vector<double> slot_times = {});
Mat partial_swap(double theta, int d = 2);

class StaticDephasingModel : public RegisterJointModel {
 public:
  StaticDephasingModel(std::vector<double> p, std::vector<Mat> h);
  const std::vector<double>& probabilities() const { return p_; }
  const std::vector<Mat>& hamiltonians() const { return h_; }

 private:
  std::vector<double> p_;
  std::vector<Mat> h_;
};

StaticDephasingModel static_dephasing(std::vector<double> p, std::vector<Mat> h);

struct MapFamilyModel {
  std::string name;
  int dim = 0;
  std::function<SuperOperator(double, double)> map;
  std::function<SuperOperator(double)> generator;
  std::optional<LindbladSpec> spec;
};

MapFamilyModel eternal_me();
SuperOperator pauli_channel(double lx, double ly, double lz);
MapFamilyModel map_family_of(std::shared_ptr<const JointModel> model);

struct BathCorrelation {
  cplx plus;
  cplx minus;
  bool lab_frame = false;
};

BathCorrelation bath_correlation(const JointModel& model, const Mat& a_e, const Mat& b_e, double t, double tp);

// Joint operator on s (x) e in the model's storage form.
struct JointOperator {
  int ds = 0;
  int de = 0;
  bool blocks_form = false;
  Mat dense;
  std::vector<Mat> blocks;
};

JointOperator lift(const JointModel& m, const Mat& x_s);
JointOperator lift(const JointModel& m, const Mat& x_s, const Mat& sigma_e);
JointOperator lift_register(const JointModel& m, const Mat& x_s, const RVec& weights);
void evolve(const JointModel& m, JointOperator& j, double t1, double t2);
void apply_system(JointOperator& j, const SuperOperator& c);
void apply_system(JointOperator& j, const Mat& a, const Mat& b);
Mat trace_env(const JointOperator& j);
Operator to_operator(const JointModel& m, const JointOperator& j);

// X -> Tr_e[ops(lift(X))] tomographed on the matrix-unit basis.
SuperOperator tomograph_with(const JointModel& m, const std::function<JointOperator(const Mat&)>& lift_fn,
                             const std::function<void(JointOperator&)>& ops);
SuperOperator dynamical_map(const JointModel& m, double t0, double t);
Mat env_frame_state(const JointModel& m, double t1);
SuperOperator generalized_map(const JointModel& m, double t1, double t2);
SuperOperator replacement_map(const JointModel& m, const Mat& sigma_e, double t1, double t2);
SuperOperator replacement_map_register(const JointModel& m, const RVec& weights, double t1, double t2);

SuperOperator dd_apply(const JointModel& m, const std::vector<Mat>& pulses, const std::vector<double>& times,
                       std::optional<double> t_end = std::nullopt);

std::vector<std::string> preset_names();
std::shared_ptr<JointModel> make_joint_preset(const std::string& name);
bool is_joint_preset(const std::string& name);

}  // namespace oqs

#endif  // OQS_MODELS_HPP
