#ifndef OQS_SUPEROP_HPP
#define OQS_SUPEROP_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "oqs/core.hpp"

namespace oqs {

// Liouville representation in the column-stacking convention vec(AXB) = (B^T kron A) vec(X).
class SuperOperator {
 public:
  SuperOperator() = default;
  explicit SuperOperator(Mat m);

  const Mat& mat() const { return m_; }
  int dim() const { return d_; }
  Mat apply(const Mat& x) const;

 private:
  Mat m_;
  int d_ = 0;
};

// Choi matrix J = (E kron id)(|Omega><Omega|), |Omega> = sum_i |i>|i>; output factor first.
class ChoiMatrix {
 public:
  ChoiMatrix() = default;
  ChoiMatrix(Mat m, int d);

  const Mat& mat() const { return m_; }
  int dim() const { return d_; }

 private:
  Mat m_;
  int d_ = 0;
};

Vec vec(const Mat& x);
Mat unvec(const Vec& v, int d);

SuperOperator identity_map(int d);
SuperOperator sandwich(const Mat& a, const Mat& b);
SuperOperator unitary_map(const Mat& u);
SuperOperator hamiltonian_part(const Mat& h);
SuperOperator dissipator(const Mat& c);
SuperOperator compose(const SuperOperator& s2, const SuperOperator& s1);
SuperOperator operator+(const SuperOperator& a, const SuperOperator& b);
SuperOperator operator-(const SuperOperator& a, const SuperOperator& b);
SuperOperator operator*(double s, const SuperOperator& a);

ChoiMatrix choi_of(const SuperOperator& s);
SuperOperator superop_of(const ChoiMatrix& j);

struct CptpDiagnostic {
  double min_choi_eig = 0;
  double tp_residual = 0;
  double tol = 0;
  bool pass = false;
};

CptpDiagnostic is_cptp(const SuperOperator& s, double tol = 1e-9);

struct PinvResult {
  SuperOperator inverse;
  double cutoff = 0;
  double condition = 0;
  int rank = 0;
};

Mat pinv(const Mat& m, double rel_cutoff = 1e-12, double* cutoff_out = nullptr, int* rank_out = nullptr,
         double* condition_out = nullptr);
SuperOperator pinv(const SuperOperator& s);
PinvResult pinv_diagnostic(const SuperOperator& s);

struct IntermediateMap {
  SuperOperator q;
  double consistency_residual = 0;
  double condition = 0;
  bool consistent = true;
};

IntermediateMap intermediate_map(const SuperOperator& e_late, const SuperOperator& e_early, double tol = 1e-9);

struct LindbladChannel {
  Mat c;
  std::function<double(double)> rate;
};

struct LindbladSpec {
  int dim = 0;
  std::function<Mat(double)> hamiltonian;
  std::vector<LindbladChannel> channels;

  Mat h(double t) const;
};

LindbladSpec constant_lindblad(const Mat& h, const std::vector<std::pair<Mat, double>>& channels);
SuperOperator generator_at(const LindbladSpec& spec, double t);

using Generator = std::function<SuperOperator(double)>;
using MapFamily = std::function<SuperOperator(double)>;

struct MeResult {
  std::vector<double> times;
  std::vector<Mat> states;
  std::vector<SuperOperator> maps;
  double max_trace_drift = 0;
};

MeResult me_integrate(const Generator& gen, int dim, const Mat& rho0, const std::vector<double>& t_grid,
                      double step = 1e-3);
MeResult me_integrate(const LindbladSpec& spec, const Mat& rho0, const std::vector<double>& t_grid,
                      double step = 1e-3);

struct GeneratorEstimate {
  SuperOperator l;
  double condition = 0;
  bool inconclusive = false;
  std::string reason;
};

// Central difference, falling back to a one-sided second-order stencil when t - dt < t_min.
GeneratorEstimate generator_from_maps(const MapFamily& family, double t, double dt, double t_min = -1e300,
                                      double max_condition = 1e10);

struct CanonicalGenerator {
  Mat h;
  std::vector<Mat> c;
  std::vector<double> rates;
  double reconstruction_residual = 0;
};

std::vector<Mat> gell_mann_basis(int d);
CanonicalGenerator canonical_decompose(const SuperOperator& l, double tol = 1e-8);
SuperOperator lindblad_generator(const Mat& h, const std::vector<Mat>& c, const std::vector<double>& rates);

// Informationally complete probe states: |i>, (|i>+|j>)/sqrt2, (|i>+i|j>)/sqrt2.
std::vector<Mat> probe_states(int d);

struct MapResidual {
  double max_entry = 0;
  double probe_trace_distance = 0;
  double value() const { return std::max(max_entry, probe_trace_distance); }
};

MapResidual map_residual(const SuperOperator& a, const SuperOperator& b);

}  // namespace oqs

#endif  // OQS_SUPEROP_HPP
