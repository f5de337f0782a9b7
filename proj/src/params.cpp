#include "ngembed/params.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace ngembed {

namespace {

using RowMajorMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ActivationDerivs {
  double s0, s1, s2;
};

inline ActivationDerivs activate(Activation a, double z) {
  if (a == Activation::Sine) {
    const double s = std::sin(z);
    const double c = std::cos(z);
    return {s, c, -s};
  }
  return {z, 1.0, 0.0};
}

void check_seeds(const Mat& su, const std::vector<Mat>& sdu, int m, int d, int order) {
  if (su.rows() != m) throw ConstructionError("contracted jet: value seeds need m rows");
  if (sdu.empty()) return;
  if (order < 1) throw Error("contracted jet: derivative seeds need order >= 1");
  if (static_cast<int>(sdu.size()) != d)
    throw ConstructionError("contracted jet: need one derivative seed per axis");
  for (const Mat& s : sdu)
    if (s.rows() != m || s.cols() != su.cols())
      throw ConstructionError("contracted jet: derivative seeds must be m x S");
}

}  // namespace

std::string to_string(Activation a) { return a == Activation::Sine ? "sin" : "identity"; }

Activation activation_from_string(const std::string& s) {
  if (s == "sin" || s == "sine") return Activation::Sine;
  if (s == "identity" || s == "linear") return Activation::Identity;
  throw ConstructionError("unknown activation '" + s + "'");
}

const Mat& Jet::first() const {
  if (!du) throw Error("jet: first spatial derivatives were not requested");
  return *du;
}
const std::vector<Mat>& Jet::second() const {
  if (!d2u) throw Error("jet: second spatial derivatives were not requested");
  return *d2u;
}
const Mat& Jet::param_grad() const {
  if (!grad_theta) throw Error("jet: parameter gradient was not requested");
  return *grad_theta;
}
const Mat& Jet::param_grad_du() const {
  if (!grad_theta_du) throw Error("jet: parameter gradient of du was not requested");
  return *grad_theta_du;
}

struct Network::Layer {
  enum class Type { Periodic, Dense, Output } type;
  int in = 0;
  int out = 0;
  Eigen::Index w_off = 0;   // weights, or amplitudes for periodic
  Eigen::Index ph_off = 0;  // phases (periodic only)
  Eigen::Index b_off = -1;  // bias / offset, -1 when absent
  std::vector<double> omega;
};

// Forward values for one point. acts[l] is the input of layer l.
struct Network::Tape {
  int d = 0;
  int order = 0;
  std::vector<Vec> acts;
  std::vector<Mat> acts_t;   // width x d
  std::vector<Mat> acts_tt;  // width x d*d
  std::vector<Vec> pre;      // pre-activation of layer l (hidden layers only)
  std::vector<Mat> pre_t;
  std::vector<Mat> pre_tt;
  std::vector<Vec> s1, s2;   // activation derivatives at pre[l]
  Mat pcos, psin;  // periodic layer cos/sin of the phase argument, width x d
  Vec u;
  Mat du;
  std::vector<Mat> d2u;
  Mat full;
};

Network::~Network() = default;
Network::Network(const Network&) = default;
Network::Network(Network&&) noexcept = default;
Network& Network::operator=(const Network&) = default;
Network& Network::operator=(Network&&) noexcept = default;

Network::Network(Architecture arch) : arch_(std::move(arch)) {
  const int d = arch_.input_dim;
  const int m = arch_.output_dim;
  if (d < 1 || m < 1) throw ConstructionError("network: input and output dims must be >= 1");
  for (int w : arch_.hidden)
    if (w < 1) throw ConstructionError("network: hidden widths must be >= 1");

  Eigen::Index off = 0;
  int in = d;
  int idx = 0;
  auto push_block = [&](int layer, BlockKind kind, Eigen::Index rows, Eigen::Index cols) {
    blocks_.push_back({layer, kind, off, rows, cols});
    const Eigen::Index at = off;
    off += rows * cols;
    return at;
  };

  if (arch_.periodic) {
    const auto& ps = *arch_.periodic;
    if (ps.width < 1) throw ConstructionError("network: periodic width must be >= 1");
    if (static_cast<int>(ps.periods.size()) != d)
      throw ConstructionError("network: periodic layer needs one period per input axis");
    Layer l;
    l.type = Layer::Type::Periodic;
    l.in = d;
    l.out = ps.width;
    for (double L : ps.periods) {
      if (!(L > 0.0)) throw ConstructionError("network: periods must be > 0");
      l.omega.push_back(2.0 * std::numbers::pi / L);
    }
    l.w_off = push_block(idx, BlockKind::Amplitude, ps.width, d);
    l.ph_off = push_block(idx, BlockKind::Phase, ps.width, d);
    l.b_off = push_block(idx, BlockKind::Offset, ps.width, 1);
    layers_.push_back(l);
    in = ps.width;
    ++idx;
  }
  for (int w : arch_.hidden) {
    Layer l;
    l.type = Layer::Type::Dense;
    l.in = in;
    l.out = w;
    l.w_off = push_block(idx, BlockKind::Weight, w, in);
    l.b_off = push_block(idx, BlockKind::Bias, w, 1);
    layers_.push_back(l);
    in = w;
    ++idx;
  }
  Layer o;
  o.type = Layer::Type::Output;
  o.in = in;
  o.out = m;
  // Output weights are stored feature-major (index i*m + c) so that they form
  // the beta block of a separable parametrization directly.
  o.w_off = push_block(idx, BlockKind::Weight, in, m);
  if (arch_.output_bias) o.b_off = push_block(idx, BlockKind::Bias, m, 1);
  layers_.push_back(o);
  num_params_ = off;
}

ParamVector Network::initialize(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  ParamVector theta(num_params_);
  auto fill = [&](Eigen::Index off, Eigen::Index n, double bound) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index k = 0; k < n; ++k) theta[off + k] = dist(rng);
  };
  for (const Layer& l : layers_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.in));
    switch (l.type) {
      case Layer::Type::Periodic: {
        fill(l.w_off, static_cast<Eigen::Index>(l.out) * l.in, bound);
        std::uniform_real_distribution<double> phase(-std::numbers::pi, std::numbers::pi);
        for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(l.out) * l.in; ++k)
          theta[l.ph_off + k] = phase(rng);
        fill(l.b_off, l.out, bound);
        break;
      }
      case Layer::Type::Dense:
        fill(l.w_off, static_cast<Eigen::Index>(l.out) * l.in, bound);
        fill(l.b_off, l.out, bound);
        break;
      case Layer::Type::Output:
        fill(l.w_off, static_cast<Eigen::Index>(l.out) * l.in, bound);
        if (l.b_off >= 0) fill(l.b_off, l.out, bound);
        break;
    }
  }
  return theta;
}

void Network::forward(const ParamVector& theta, const Eigen::Ref<const Vec>& x, int order,
                      Tape& t) const {
  const int d = arch_.input_dim;
  const int dd = d * d;
  const std::size_t nl = layers_.size();
  t.d = d;
  t.order = order;
  t.acts.resize(nl);
  t.acts_t.resize(nl);
  t.acts_tt.resize(nl);
  t.pre.resize(nl);
  t.pre_t.resize(nl);
  t.pre_tt.resize(nl);
  t.s1.resize(nl);
  t.s2.resize(nl);

  t.acts[0] = x;
  if (order >= 1) t.acts_t[0].setIdentity(d, d);
  if (order >= 2) t.acts_tt[0].setZero(d, dd);

  for (std::size_t li = 0; li < nl; ++li) {
    const Layer& l = layers_[li];
    const Vec& a = t.acts[li];
    const Mat& at = t.acts_t[li];
    const Mat& att = t.acts_tt[li];

    if (l.type == Layer::Type::Output) {
      // Column-major m x n map, element (c, i) at i*m + c.
      Eigen::Map<const Mat> W(theta.data() + l.w_off, l.out, l.in);
      t.u.noalias() = W * a;
      if (l.b_off >= 0) t.u += theta.segment(l.b_off, l.out);
      if (order >= 1) t.du.noalias() = W * at;
      if (order >= 2) {
        t.full.noalias() = W * att;  // m x d*d
        t.d2u.resize(l.out);
        for (int c = 0; c < l.out; ++c) {
          t.d2u[c].resize(d, d);
          for (int i = 0; i < d; ++i)
            for (int k = 0; k < d; ++k) t.d2u[c](i, k) = t.full(c, i * d + k);
        }
      }
      break;
    }

    Vec& z = t.pre[li];
    Mat& zt = t.pre_t[li];
    Mat& ztt = t.pre_tt[li];
    z.resize(l.out);
    if (order >= 1) zt.setZero(l.out, d);
    if (order >= 2) ztt.setZero(l.out, dd);

    if (l.type == Layer::Type::Periodic) {
      t.pcos.resize(l.out, d);
      t.psin.resize(l.out, d);
      for (int j = 0; j < l.out; ++j) {
        double s = theta[l.b_off + j];
        for (int k = 0; k < d; ++k) {
          const double amp = theta[l.w_off + j * d + k];
          const double arg = l.omega[k] * x[k] + theta[l.ph_off + j * d + k];
          const double c = std::cos(arg);
          const double sn = std::sin(arg);
          t.pcos(j, k) = c;
          t.psin(j, k) = sn;
          s += amp * c;
          if (order >= 1) zt(j, k) = -amp * l.omega[k] * sn;
          if (order >= 2) ztt(j, k * d + k) = -amp * l.omega[k] * l.omega[k] * c;
        }
        z[j] = s;
      }
    } else {
      Eigen::Map<const RowMajorMat> W(theta.data() + l.w_off, l.out, l.in);
      z.noalias() = W * a;
      z += theta.segment(l.b_off, l.out);
      if (order >= 1) zt.noalias() = W * at;
      if (order >= 2) ztt.noalias() = W * att;
    }

    Vec& an = t.acts[li + 1];
    Mat& ant = t.acts_t[li + 1];
    Mat& antt = t.acts_tt[li + 1];
    Vec& s1 = t.s1[li];
    Vec& s2 = t.s2[li];
    an.resize(l.out);
    s1.resize(l.out);
    s2.resize(l.out);
    if (order >= 1) ant.resize(l.out, d);
    if (order >= 2) antt.resize(l.out, dd);
    for (int j = 0; j < l.out; ++j) {
      const ActivationDerivs s = activate(arch_.activation, z[j]);
      an[j] = s.s0;
      s1[j] = s.s1;
      s2[j] = s.s2;
      if (order >= 1)
        for (int i = 0; i < d; ++i) ant(j, i) = s.s1 * zt(j, i);
      if (order >= 2)
        for (int i = 0; i < d; ++i)
          for (int k = 0; k < d; ++k)
            antt(j, i * d + k) = s.s2 * zt(j, i) * zt(j, k) + s.s1 * ztt(j, i * d + k);
    }
  }
}

// Reverse sweep for S seeds at once. seed_u is m x S (adjoint of u), seed_du
// holds one m x S adjoint per spatial axis (empty when only value gradients are
// wanted). grads receives S x p.
void Network::backward(const ParamVector& theta, const Tape& t, const Mat& seed_u,
                       const std::vector<Mat>& seed_du, Mat& grads) const {
  const int d = t.d;
  const bool tangents = !seed_du.empty();
  const Eigen::Index S = seed_u.cols();
  grads.setZero(S, num_params_);

  const Layer& o = layers_.back();
  const std::size_t lo = layers_.size() - 1;
  {
    const Vec& a = t.acts[lo];
    for (Eigen::Index s = 0; s < S; ++s) {
      for (int i = 0; i < o.in; ++i)
        for (int c = 0; c < o.out; ++c) {
          double g = seed_u(c, s) * a[i];
          if (tangents)
            for (int k = 0; k < d; ++k) g += seed_du[k](c, s) * t.acts_t[lo](i, k);
          grads(s, o.w_off + i * o.out + c) = g;
        }
      if (o.b_off >= 0)
        for (int c = 0; c < o.out; ++c) grads(s, o.b_off + c) = seed_u(c, s);
    }
  }
  Eigen::Map<const Mat> Wo(theta.data() + o.w_off, o.out, o.in);
  Mat abar = Wo.transpose() * seed_u;  // in x S
  std::vector<Mat> abar_t;
  if (tangents) {
    abar_t.resize(d);
    for (int k = 0; k < d; ++k) abar_t[k] = Wo.transpose() * seed_du[k];
  }

  for (std::size_t li = lo; li-- > 0;) {
    const Layer& l = layers_[li];
    Mat zbar(l.out, S);
    std::vector<Mat> zbar_t(tangents ? d : 0, Mat(l.out, S));
    for (int j = 0; j < l.out; ++j) {
      const double s1 = t.s1[li][j];
      const double s2 = t.s2[li][j];
      for (Eigen::Index s = 0; s < S; ++s) {
        double zb = abar(j, s) * s1;
        if (tangents)
          for (int k = 0; k < d; ++k) {
            zb += abar_t[k](j, s) * s2 * t.pre_t[li](j, k);
            zbar_t[k](j, s) = abar_t[k](j, s) * s1;
          }
        zbar(j, s) = zb;
      }
    }

    if (l.type == Layer::Type::Periodic) {
      for (Eigen::Index s = 0; s < S; ++s)
        for (int j = 0; j < l.out; ++j) {
          grads(s, l.b_off + j) = zbar(j, s);
          for (int k = 0; k < d; ++k) {
            const double amp = theta[l.w_off + j * d + k];
            const double c = t.pcos(j, k);
            const double sn = t.psin(j, k);
            double ga = zbar(j, s) * c;
            double gp = -zbar(j, s) * amp * sn;
            if (tangents) {
              ga += -zbar_t[k](j, s) * l.omega[k] * sn;
              gp += -zbar_t[k](j, s) * amp * l.omega[k] * c;
            }
            grads(s, l.w_off + j * d + k) = ga;
            grads(s, l.ph_off + j * d + k) = gp;
          }
        }
      break;  // periodic layer is always first
    }

    const Vec& ap = t.acts[li];
    for (Eigen::Index s = 0; s < S; ++s)
      for (int r = 0; r < l.out; ++r) {
        grads(s, l.b_off + r) = zbar(r, s);
        const double zr = zbar(r, s);
        double* g = &grads(s, l.w_off + static_cast<Eigen::Index>(r) * l.in);
        for (int c = 0; c < l.in; ++c) g[c * S] = zr * ap[c];
        if (tangents)
          for (int k = 0; k < d; ++k) {
            const double zt = zbar_t[k](r, s);
            for (int c = 0; c < l.in; ++c) g[c * S] += zt * t.acts_t[li](c, k);
          }
      }
    if (li == 0) break;
    Eigen::Map<const RowMajorMat> W(theta.data() + l.w_off, l.out, l.in);
    abar = W.transpose() * zbar;
    if (tangents)
      for (int k = 0; k < d; ++k) abar_t[k] = W.transpose() * zbar_t[k];
  }
}

Jet Network::eval(const ParamVector& theta, const Eigen::Ref<const Vec>& x,
                  const JetRequest& req) const {
  if (theta.size() != num_params_)
    throw ConstructionError("network: parameter vector has wrong length");
  if (x.size() != arch_.input_dim) throw ConstructionError("network: point has wrong dimension");
  if (req.order < 0 || req.order > 2) throw Error("network: jet order must be 0, 1 or 2");
  if (req.du_param_grads && req.order < 1)
    throw Error("network: du parameter gradients need order >= 1");

  thread_local Tape t;
  forward(theta, x, req.order, t);
  Jet jet;
  jet.u = t.u;
  if (req.order >= 1) jet.du = t.du;
  if (req.order >= 2) jet.d2u = t.d2u;

  const int m = arch_.output_dim;
  const int d = arch_.input_dim;
  if (req.param_grads || req.du_param_grads) {
    if (req.du_param_grads) {
      // Seeds: m value seeds followed by m*d tangent seeds (c*d + i).
      const int S = m + m * d;
      Mat su = Mat::Zero(m, S);
      std::vector<Mat> sdu(d, Mat::Zero(m, S));
      for (int c = 0; c < m; ++c) su(c, c) = 1.0;
      for (int c = 0; c < m; ++c)
        for (int i = 0; i < d; ++i) sdu[i](c, m + c * d + i) = 1.0;
      Mat g;
      backward(theta, t, su, sdu, g);
      if (req.param_grads) jet.grad_theta = g.topRows(m);
      jet.grad_theta_du = g.bottomRows(m * d);
    } else {
      Mat g;
      backward(theta, t, Mat::Identity(m, m), {}, g);
      jet.grad_theta = std::move(g);
    }
  }

  bool finite = jet.u.allFinite();
  if (jet.du) finite = finite && jet.du->allFinite();
  if (jet.d2u)
    for (const Mat& h : *jet.d2u) finite = finite && h.allFinite();
  if (jet.grad_theta) finite = finite && jet.grad_theta->allFinite();
  if (jet.grad_theta_du) finite = finite && jet.grad_theta_du->allFinite();
  if (!finite) {
    std::ostringstream os;
    os << "network: non-finite jet at x = " << x.transpose();
    throw NumericalError(os.str());
  }
  return jet;
}

Jet Network::eval_contracted(const ParamVector& theta, const Eigen::Ref<const Vec>& x, int order,
                             const SeedFn& seeds, Mat& grads) const {
  if (theta.size() != num_params_)
    throw ConstructionError("network: parameter vector has wrong length");
  if (x.size() != arch_.input_dim) throw ConstructionError("network: point has wrong dimension");
  if (order < 0 || order > 2) throw Error("network: jet order must be 0, 1 or 2");
  thread_local Tape t;
  forward(theta, x, order, t);
  Jet jet;
  jet.u = t.u;
  if (order >= 1) jet.du = t.du;
  if (order >= 2) jet.d2u = t.d2u;
  Mat su;
  std::vector<Mat> sdu;
  seeds(jet, su, sdu);
  check_seeds(su, sdu, arch_.output_dim, arch_.input_dim, order);
  backward(theta, t, su, sdu, grads);
  if (!jet.u.allFinite() || !grads.allFinite()) {
    std::ostringstream os;
    os << "network: non-finite jet at x = " << x.transpose();
    throw NumericalError(os.str());
  }
  return jet;
}

Vec Network::value(const ParamVector& theta, const Eigen::Ref<const Vec>& x) const {
  thread_local Tape t;
  forward(theta, x, 0, t);
  return t.u;
}

void Network::features(const ParamVector& theta, const Eigen::Ref<const Vec>& x, Vec& phi,
                       Mat& dphi) const {
  thread_local Tape t;
  forward(theta, x, 1, t);
  phi = t.acts.back();
  dphi = t.acts_t.back();
}

int Network::num_features() const { return layers_.back().in; }

Eigen::Index Network::alpha_dim() const { return layers_.back().w_off; }

std::pair<Network, ParamVector> build(const Architecture& arch, std::uint64_t seed) {
  Network net(arch);
  ParamVector theta = net.initialize(seed);
  return {std::move(net), std::move(theta)};
}

Vec Parametrization::value(const ParamVector& theta, const Eigen::Ref<const Vec>& x) const {
  return eval(theta, x, {0, false, false}).u;
}

Jet Parametrization::eval_contracted(const ParamVector& theta, const Eigen::Ref<const Vec>& x,
                                     int order, const SeedFn& seeds, Mat& grads) const {
  const int m = output_dim();
  const int d = input_dim();
  Jet jet = eval(theta, x, {order, true, order >= 1});
  Mat su;
  std::vector<Mat> sdu;
  seeds(jet, su, sdu);
  check_seeds(su, sdu, m, d, order);
  grads.noalias() = su.transpose() * jet.param_grad();
  for (int k = 0; k < static_cast<int>(sdu.size()); ++k)
    for (int c = 0; c < m; ++c)
      grads.noalias() += sdu[k].row(c).transpose() * jet.param_grad_du().row(c * d + k);
  return jet;
}

void Parametrization::features(const ParamVector&, const Eigen::Ref<const Vec>&, Vec&, Mat&) const {
  throw ConstructionError("parametrization is not separable");
}

int Parametrization::num_features() const {
  throw ConstructionError("parametrization is not separable");
}

Eigen::Index Parametrization::alpha_dim() const {
  throw ConstructionError("parametrization is not separable");
}

BasisExpansion::BasisExpansion(int input_dim, int output_dim, std::vector<BasisFunction> basis)
    : d_(input_dim), m_(output_dim), basis_(std::move(basis)) {
  if (d_ < 1 || m_ < 1 || basis_.empty())
    throw ConstructionError("basis expansion needs d, m >= 1 and at least one basis function");
}

Jet BasisExpansion::eval(const ParamVector& theta, const Eigen::Ref<const Vec>& x,
                         const JetRequest& req) const {
  if (theta.size() != num_params()) throw ConstructionError("basis expansion: wrong parameter count");
  if (x.size() != d_) throw ConstructionError("basis expansion: wrong point dimension");
  const int n = num_features();
  Jet j;
  j.u = Vec::Zero(m_);
  if (req.order >= 1) j.du = Mat::Zero(m_, d_);
  if (req.order >= 2) j.d2u = std::vector<Mat>(m_, Mat::Zero(d_, d_));
  if (req.param_grads) j.grad_theta = Mat::Zero(m_, num_params());
  if (req.du_param_grads) j.grad_theta_du = Mat::Zero(m_ * d_, num_params());
  for (int i = 0; i < n; ++i) {
    const BasisJet b = basis_[i](x);
    for (int c = 0; c < m_; ++c) {
      const Eigen::Index k = beta_index(i, c, m_);
      j.u[c] += theta[k] * b.value;
      if (j.du) j.du->row(c) += theta[k] * b.grad.transpose();
      if (j.d2u) (*j.d2u)[c] += theta[k] * b.hess;
      if (j.grad_theta) (*j.grad_theta)(c, k) = b.value;
      if (j.grad_theta_du)
        for (int a = 0; a < d_; ++a) (*j.grad_theta_du)(c * d_ + a, k) = b.grad[a];
    }
  }
  if (!j.u.allFinite()) throw NumericalError("basis expansion: non-finite value");
  return j;
}

void BasisExpansion::features(const ParamVector&, const Eigen::Ref<const Vec>& x, Vec& phi,
                              Mat& dphi) const {
  const int n = num_features();
  phi.resize(n);
  dphi.resize(n, d_);
  for (int i = 0; i < n; ++i) {
    const BasisJet b = basis_[i](x);
    phi[i] = b.value;
    dphi.row(i) = b.grad.transpose();
  }
}

SeparableView::SeparableView(const Parametrization& net, const ParamVector& theta)
    : net_(net), theta_(theta), alpha_dim_(net.alpha_dim()), beta_dim_(net.beta_dim()) {
  if (!net.separable())
    throw ConstructionError("separable view: output layer has a bias");
  if (theta.size() != net.num_params())
    throw ConstructionError("separable view: parameter vector has wrong length");
}

Mat SeparableView::V(const Eigen::Ref<const Vec>& x) const {
  Vec phi;
  Mat dphi;
  net_.features(theta_, x, phi, dphi);
  const int m = net_.output_dim();
  Mat out = Mat::Zero(m, beta_dim_);
  for (int i = 0; i < phi.size(); ++i)
    for (int c = 0; c < m; ++c) out(c, Network::beta_index(i, c, m)) = phi[i];
  return out;
}

Mat SeparableView::dV(const Eigen::Ref<const Vec>& x, int axis) const {
  Vec phi;
  Mat dphi;
  net_.features(theta_, x, phi, dphi);
  const int m = net_.output_dim();
  Mat out = Mat::Zero(m, beta_dim_);
  for (int i = 0; i < phi.size(); ++i)
    for (int c = 0; c < m; ++c) out(c, Network::beta_index(i, c, m)) = dphi(i, axis);
  return out;
}

Mat SeparableView::dV_alpha_beta(const Eigen::Ref<const Vec>& x) const {
  Jet j = net_.eval(theta_, x, {0, true, false});
  return j.grad_theta->leftCols(alpha_dim_);
}

}  // namespace ngembed
