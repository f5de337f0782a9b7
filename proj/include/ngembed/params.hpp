#pragma once
// Nonlinear parametrizations u(theta, x) and their derivative jets.
//
// A Network is a feed-forward MLP with an optional periodic input layer and a
// linear output layer. Jets carry the field value, spatial derivatives up to
// second order, the parameter gradient of the value and (on request) the
// parameter gradient of the first spatial derivatives. All derivatives are
// propagated analytically layer by layer.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ngembed/errors.hpp"

namespace ngembed {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using ParamVector = Eigen::VectorXd;

enum class Activation { Sine, Identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

/// Periodic input layer. Unit j computes
///   s_j(x) = c_j + sum_k A_jk cos(2 pi x_k / L_k + phi_jk)
/// followed by the network activation. Every unit is exactly L_k-periodic
/// along axis k for any value of its trainable (A, phi, c).
struct PeriodicLayerSpec {
  std::vector<double> periods;  // one per input axis
  int width = 0;
};

struct Architecture {
  int input_dim = 1;
  int output_dim = 1;
  std::optional<PeriodicLayerSpec> periodic;
  std::vector<int> hidden;  // widths of dense hidden layers after the periodic layer
  Activation activation = Activation::Sine;
  bool output_bias = false;

  /// Separable means u(theta, x) = V(x, alpha) beta, i.e. no output bias.
  bool separable() const { return !output_bias; }
};

enum class BlockKind { Amplitude, Phase, Offset, Weight, Bias };

/// One contiguous slice of the flat parameter vector.
struct ParamBlock {
  int layer = 0;  // 0 = first layer (periodic or dense), last = output layer
  BlockKind kind = BlockKind::Weight;
  Eigen::Index offset = 0;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  Eigen::Index size() const { return rows * cols; }
};

struct JetRequest {
  int order = 1;                 // highest spatial derivative order, 0..2
  bool param_grads = false;      // d u / d theta
  bool du_param_grads = false;   // d (d u / d x_i) / d theta, needs order >= 1
};

/// Pointwise derivative bundle of u(theta, .) at one x. Fields that were not
/// requested are empty optionals.
struct Jet {
  Vec u;                                 // m
  std::optional<Mat> du;                 // m x d
  std::optional<std::vector<Mat>> d2u;   // m entries, each d x d
  std::optional<Mat> grad_theta;         // m x p
  std::optional<Mat> grad_theta_du;      // (m*d) x p, row c*d + i

  const Mat& first() const;
  const std::vector<Mat>& second() const;
  const Mat& param_grad() const;
  const Mat& param_grad_du() const;
};

/// u(theta, x) with derivative jets. Separable parametrizations are linear in
/// the trailing beta block: u = V(x, alpha) beta with V = [phi_1 .. phi_n] (x) I_m.
class Parametrization {
 public:
  virtual ~Parametrization() = default;

  virtual int input_dim() const = 0;
  virtual int output_dim() const = 0;
  virtual Eigen::Index num_params() const = 0;

  virtual Jet eval(const ParamVector& theta, const Eigen::Ref<const Vec>& x,
                   const JetRequest& req) const = 0;
  /// Reverse sweep with caller-chosen seeds. `seeds` sees the jet (spatial
  /// derivatives up to `order`) and fills seed_u (m x S) and optionally
  /// seed_du (d entries, each m x S). Row s of grads (S x p) is the parameter
  /// gradient of sum_c seed_u(c,s) u_c + sum_{c,k} seed_du[k](c,s) d_k u_c,
  /// with the seeds held fixed.
  using SeedFn = std::function<void(const Jet&, Mat& seed_u, std::vector<Mat>& seed_du)>;
  virtual Jet eval_contracted(const ParamVector& theta, const Eigen::Ref<const Vec>& x, int order,
                              const SeedFn& seeds, Mat& grads) const;

  /// Value only, no derivative bookkeeping.
  virtual Vec value(const ParamVector& theta, const Eigen::Ref<const Vec>& x) const;

  virtual bool separable() const { return false; }
  /// Features phi(x) and their spatial gradient (n_phi x d); separable only.
  virtual void features(const ParamVector& theta, const Eigen::Ref<const Vec>& x, Vec& phi,
                        Mat& dphi) const;
  virtual int num_features() const;
  /// Number of nonlinear parameters alpha (everything before beta).
  virtual Eigen::Index alpha_dim() const;
  /// Number of linear coefficients beta = n_phi * m.
  Eigen::Index beta_dim() const { return static_cast<Eigen::Index>(num_features()) * output_dim(); }

  /// beta index of output component c of feature i.
  static Eigen::Index beta_index(int feature, int component, int m) {
    return static_cast<Eigen::Index>(feature) * m + component;
  }
};

class Network final : public Parametrization {
 public:
  explicit Network(Architecture arch);
  ~Network() override;
  Network(const Network&);
  Network(Network&&) noexcept;
  Network& operator=(const Network&);
  Network& operator=(Network&&) noexcept;

  const Architecture& architecture() const { return arch_; }
  int input_dim() const override { return arch_.input_dim; }
  int output_dim() const override { return arch_.output_dim; }
  Eigen::Index num_params() const override { return num_params_; }
  const std::vector<ParamBlock>& layout() const { return blocks_; }

  /// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)] from a seeded
  /// mt19937_64. Periodic amplitudes use fan_in = d, phases are uniform in
  /// [-pi, pi).
  ParamVector initialize(std::uint64_t seed) const;

  Jet eval(const ParamVector& theta, const Eigen::Ref<const Vec>& x,
           const JetRequest& req) const override;
  Jet eval_contracted(const ParamVector& theta, const Eigen::Ref<const Vec>& x, int order,
                      const SeedFn& seeds, Mat& grads) const override;
  Vec value(const ParamVector& theta, const Eigen::Ref<const Vec>& x) const override;

  bool separable() const override { return arch_.separable(); }
  /// Last hidden activations are the separable basis functions.
  void features(const ParamVector& theta, const Eigen::Ref<const Vec>& x,
                Vec& phi, Mat& dphi) const override;
  int num_features() const override;
  Eigen::Index alpha_dim() const override;

 private:
  struct Layer;
  struct Tape;

  void forward(const ParamVector& theta, const Eigen::Ref<const Vec>& x, int order,
               Tape& tape) const;
  void backward(const ParamVector& theta, const Tape& tape, const Mat& seed_u,
                const std::vector<Mat>& seed_du, Mat& grads) const;

  Architecture arch_;
  std::vector<Layer> layers_;
  std::vector<ParamBlock> blocks_;
  Eigen::Index num_params_ = 0;
};

/// Convenience: build the network and a seeded initial parameter vector.
std::pair<Network, ParamVector> build(const Architecture& arch, std::uint64_t seed);

/// Value, gradient and Hessian of one scalar basis function at x.
struct BasisJet {
  double value = 0.0;
  Vec grad;
  Mat hess;
};
using BasisFunction = std::function<BasisJet(const Eigen::Ref<const Vec>& x)>;

/// Linear expansion u_c(theta, x) = sum_i theta_{i*m+c} psi_i(x). Separable
/// with no alpha block; useful as an analytic reference parametrization.
class BasisExpansion final : public Parametrization {
 public:
  BasisExpansion(int input_dim, int output_dim, std::vector<BasisFunction> basis);

  int input_dim() const override { return d_; }
  int output_dim() const override { return m_; }
  Eigen::Index num_params() const override { return beta_dim(); }
  Jet eval(const ParamVector& theta, const Eigen::Ref<const Vec>& x,
           const JetRequest& req) const override;

  bool separable() const override { return true; }
  void features(const ParamVector& theta, const Eigen::Ref<const Vec>& x, Vec& phi,
                Mat& dphi) const override;
  int num_features() const override { return static_cast<int>(basis_.size()); }
  Eigen::Index alpha_dim() const override { return 0; }

 private:
  int d_, m_;
  std::vector<BasisFunction> basis_;
};

/// Views of a separable parametrization u(theta, x) = V(x, alpha) beta.
class SeparableView {
 public:
  SeparableView(const Parametrization& net, const ParamVector& theta);

  Eigen::Ref<const Vec> alpha() const { return theta_.head(alpha_dim_); }
  Eigen::Ref<const Vec> beta() const { return theta_.tail(beta_dim_); }

  /// V(x, alpha) = [phi_1, ..., phi_n] (x) I_m, shape m x (n*m).
  Mat V(const Eigen::Ref<const Vec>& x) const;
  /// Spatial derivative of V along axis i.
  Mat dV(const Eigen::Ref<const Vec>& x, int axis) const;
  /// Columns (d_alpha_i V) beta, i.e. the alpha part of grad_theta u. m x n_alpha.
  Mat dV_alpha_beta(const Eigen::Ref<const Vec>& x) const;

 private:
  const Parametrization& net_;
  ParamVector theta_;
  Eigen::Index alpha_dim_;
  Eigen::Index beta_dim_;
};

}  // namespace ngembed
