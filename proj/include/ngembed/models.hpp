#pragma once
// Benchmark PDEs, conserved-quantity kernels and their sample estimators.
//
// All sampled estimates treat the measure as the uniform probability measure
// on the domain, i.e. integrals become plain sample means.

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "ngembed/params.hpp"

namespace ngembed {

/// Axis-aligned periodic box [lo, hi).
struct Box {
  Vec lo;
  Vec hi;
  int dim() const { return static_cast<int>(lo.size()); }
  Vec periods() const { return hi - lo; }
};

enum class SampleRole { Galerkin, Quantity, Test, Fit };
enum class Spacing { Equidistant, Random };

struct SampleSet {
  Mat points;  // n x d, one point per row
  SampleRole role = SampleRole::Galerkin;
  Spacing spacing = Spacing::Equidistant;

  Eigen::Index size() const { return points.rows(); }
  int dim() const { return static_cast<int>(points.cols()); }
  auto point(Eigen::Index s) const { return points.row(s).transpose(); }
};

/// Tensor grid with `per_axis` points per axis, x = lo + (i + offset) * h.
SampleSet equidistant_grid(const Box& box, int per_axis, double offset_fraction,
                           SampleRole role);
SampleSet random_uniform(const Box& box, Eigen::Index n, std::uint64_t seed, SampleRole role);

/// Smallest distance between any point of `a` and any point of `b`.
double min_separation(const SampleSet& a, const SampleSet& b);

/// Partial derivatives of a quantity kernel w.r.t. the jet entries it reads.
struct KernelGrad {
  Vec d_u;   // m
  Mat d_du;  // m x d, empty when the kernel reads no derivatives
};

/// q(u) = integral of kernel(u)(x) dnu(x); target is frozen at t = 0.
struct Quantity {
  std::string name;
  int order = 0;  // spatial derivative order the kernel reads
  std::function<double(const Jet&)> kernel;
  std::function<KernelGrad(const Jet&)> kernel_grad;
  double target = std::numeric_limits<double>::quiet_NaN();
};

/// Pointwise Hamiltonian structure f = J(u) Q(u) u with H = integral h(u).
class HamiltonianStructure {
 public:
  virtual ~HamiltonianStructure() = default;
  /// J(v) q at one point from the values and first derivatives of v and q.
  virtual Vec j_apply(const Vec& v, const Mat& dv, const Vec& q, const Mat& dq) const = 0;
  virtual Mat q_matrix(const Vec& u) const = 0;
  /// Q does not depend on the state; the weighted assembly relies on it.
  virtual bool q_is_constant() const { return true; }
  virtual double density(const Vec& u) const = 0;
  /// Gradient of h, equal to Q(u) u for factorizable Hamiltonians.
  virtual Vec density_grad(const Vec& u) const = 0;

  Quantity hamiltonian_quantity() const;
};

class PdeModel {
 public:
  virtual ~PdeModel() = default;
  virtual std::string name() const = 0;
  virtual int spatial_dim() const = 0;
  virtual int output_dim() const = 0;
  /// Highest spatial derivative order read by rhs().
  virtual int rhs_order() const = 0;
  virtual Vec rhs(const Jet& jet, const Eigen::Ref<const Vec>& x) const = 0;
  /// Conserved quantities used by the constrained/embedded schemes.
  virtual std::vector<Quantity> quantities() const = 0;
  virtual const HamiltonianStructure* hamiltonian() const { return nullptr; }
  virtual Box domain() const = 0;
  virtual Vec initial_condition(const Eigen::Ref<const Vec>& x) const = 0;
};

// Right-hand sides.
double rhs_burgers(const Jet& jet);
Vec rhs_wave(const Jet& jet, double c, double rho_bar);
Vec rhs_swe(const Jet& jet);

/// Inviscid Burgers on [-1, 1), u_t = -u u_x, conserved mass.
class BurgersModel final : public PdeModel, public HamiltonianStructure {
 public:
  using InitialCondition = std::function<double(double)>;
  BurgersModel();
  explicit BurgersModel(InitialCondition u0);

  std::string name() const override { return "burgers"; }
  int spatial_dim() const override { return 1; }
  int output_dim() const override { return 1; }
  int rhs_order() const override { return 1; }
  Vec rhs(const Jet& jet, const Eigen::Ref<const Vec>& x) const override;
  std::vector<Quantity> quantities() const override;
  const HamiltonianStructure* hamiltonian() const override { return this; }
  Box domain() const override;
  Vec initial_condition(const Eigen::Ref<const Vec>& x) const override;

  Vec j_apply(const Vec& v, const Mat& dv, const Vec& q, const Mat& dq) const override;
  Mat q_matrix(const Vec& u) const override;
  double density(const Vec& u) const override;
  Vec density_grad(const Vec& u) const override;

  /// Default initial condition, a smooth periodic bump exp(cos(pi x) - 1).
  static double default_initial(double x);
  /// Periodic images of exp(-25 x^2); steepens into a shock near t = 0.233.
  static double gaussian_initial(double x);

 private:
  InitialCondition u0_;
};

/// Linear acoustic wave on [-1, 1), state (rho, v), conserved Hamiltonian.
class WaveModel final : public PdeModel, public HamiltonianStructure {
 public:
  explicit WaveModel(double c = 1.0, double rho_bar = 1.0);

  std::string name() const override { return "wave"; }
  int spatial_dim() const override { return 1; }
  int output_dim() const override { return 2; }
  int rhs_order() const override { return 1; }
  Vec rhs(const Jet& jet, const Eigen::Ref<const Vec>& x) const override;
  std::vector<Quantity> quantities() const override;
  const HamiltonianStructure* hamiltonian() const override { return this; }
  Box domain() const override;
  Vec initial_condition(const Eigen::Ref<const Vec>& x) const override;

  Vec j_apply(const Vec& v, const Mat& dv, const Vec& q, const Mat& dq) const override;
  Mat q_matrix(const Vec& u) const override;
  double density(const Vec& u) const override;
  Vec density_grad(const Vec& u) const override;

  double c() const { return c_; }
  double rho_bar() const { return rho_bar_; }

 private:
  double c_;
  double rho_bar_;
};

/// Scaled 2D shallow water on [-4, 4)^2, state (h~, phi~), conserved energy
///   E = 1/2 integral (h~ + 1) |grad phi~|^2 + (h~ + 1)^2.
class ShallowWaterModel final : public PdeModel {
 public:
  std::string name() const override { return "swe"; }
  int spatial_dim() const override { return 2; }
  int output_dim() const override { return 2; }
  int rhs_order() const override { return 2; }
  Vec rhs(const Jet& jet, const Eigen::Ref<const Vec>& x) const override;
  std::vector<Quantity> quantities() const override;
  Box domain() const override;
  Vec initial_condition(const Eigen::Ref<const Vec>& x) const override;

  static double energy_density(double h, const Eigen::Ref<const Vec>& grad_phi);
};

Quantity mass_quantity(int component = 0);

/// Pointwise J(v) q; throws when the model has no Hamiltonian structure.
Vec j_apply(const PdeModel& model, const Vec& v, const Mat& dv, const Vec& q, const Mat& dq);
Mat q_eval(const PdeModel& model, const Vec& u);

/// Jet request that covers what a set of quantities reads.
JetRequest quantity_request(const std::vector<Quantity>& qs, bool with_grads);

/// Sample mean of the kernel over S.
double estimate_quantity(const Quantity& q, const Parametrization& net, const ParamVector& theta,
                         const SampleSet& S);
/// Gradient of estimate_quantity w.r.t. theta (chain rule through the jet).
Vec quantity_param_grad(const Quantity& q, const Parametrization& net, const ParamVector& theta,
                        const SampleSet& S);

struct QuantityEval {
  Vec values;    // n_cq sample means
  Mat jacobian;  // n_cq x p, empty unless requested
};

/// All quantities at once with one jet per sample point.
QuantityEval evaluate_quantities(const std::vector<Quantity>& qs, const Parametrization& net,
                                 const ParamVector& theta, const SampleSet& S,
                                 bool with_jacobian);

/// Sets each target to the sampled value at theta0.
void freeze_targets(std::vector<Quantity>& qs, const Parametrization& net, const ParamVector& theta0,
                    const SampleSet& S);

}  // namespace ngembed
