#pragma once
// Shared helpers for the unit and property tests: a small seeded generator,
// analytic parametrizations, toy models and finite-difference utilities.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "ngembed/models.hpp"
#include "ngembed/params.hpp"

namespace ngtest {

using namespace ngembed;
constexpr double kPi = std::numbers::pi;

/// Hand-rolled generator for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double a = 0.0, double b = 1.0) {
    return std::uniform_real_distribution<double>(a, b)(rng_);
  }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  std::uint64_t seed() { return rng_(); }

  Vec vec(Eigen::Index n, double a = -1.0, double b = 1.0) {
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = uniform(a, b);
    return v;
  }
  Vec gaussian(Eigen::Index n) {
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
    return v;
  }
  Mat gaussian(Eigen::Index r, Eigen::Index c) {
    Mat A(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
      for (Eigen::Index i = 0; i < r; ++i) A(i, j) = normal();
    return A;
  }
  /// Random point inside a box.
  Vec point(const Box& box) {
    Vec x(box.dim());
    for (int k = 0; k < box.dim(); ++k) x[k] = uniform(box.lo[k], box.hi[k]);
    return x;
  }

  /// Random small architecture: optional periodic layer, 1..3 hidden layers.
  Architecture architecture(int d, int m, bool periodic, bool output_bias = false) {
    Architecture a;
    a.input_dim = d;
    a.output_dim = m;
    if (periodic) a.periodic = PeriodicLayerSpec{std::vector<double>(d, 2.0), integer(2, 6)};
    const int depth = integer(1, 3);
    for (int i = 0; i < depth; ++i) a.hidden.push_back(integer(2, 6));
    a.output_bias = output_bias;
    return a;
  }

 private:
  std::mt19937_64 rng_;
};

inline Box interval(double lo, double hi) { return {Vec::Constant(1, lo), Vec::Constant(1, hi)}; }

inline SampleSet points1d(const std::vector<double>& xs, SampleRole role = SampleRole::Galerkin) {
  SampleSet S;
  S.points.resize(static_cast<Eigen::Index>(xs.size()), 1);
  for (std::size_t i = 0; i < xs.size(); ++i) S.points(static_cast<Eigen::Index>(i), 0) = xs[i];
  S.role = role;
  return S;
}

// --- analytic 1D basis functions ---------------------------------------------

inline BasisFunction constant_basis() {
  return [](const Eigen::Ref<const Vec>& x) {
    return BasisJet{1.0, Vec::Zero(x.size()), Mat::Zero(x.size(), x.size())};
  };
}

/// sin(k pi x) in 1D.
inline BasisFunction sin_basis(double k, double scale = 1.0) {
  return [k, scale](const Eigen::Ref<const Vec>& x) {
    const double w = k * kPi;
    BasisJet b;
    b.value = scale * std::sin(w * x[0]);
    b.grad = Vec::Constant(1, scale * w * std::cos(w * x[0]));
    b.hess = Mat::Constant(1, 1, -scale * w * w * std::sin(w * x[0]));
    return b;
  };
}

inline BasisFunction cos_basis(double k, double scale = 1.0) {
  return [k, scale](const Eigen::Ref<const Vec>& x) {
    const double w = k * kPi;
    BasisJet b;
    b.value = scale * std::cos(w * x[0]);
    b.grad = Vec::Constant(1, -scale * w * std::sin(w * x[0]));
    b.hess = Mat::Constant(1, 1, -scale * w * w * std::cos(w * x[0]));
    return b;
  };
}

/// exp(sin(pi x)), smooth and periodic on [-1, 1).
inline BasisFunction exp_sin_basis() {
  return [](const Eigen::Ref<const Vec>& x) {
    const double s = std::sin(kPi * x[0]);
    const double c = std::cos(kPi * x[0]);
    const double e = std::exp(s);
    BasisJet b;
    b.value = e;
    b.grad = Vec::Constant(1, kPi * c * e);
    b.hess = Mat::Constant(1, 1, kPi * kPi * (c * c - s) * e);
    return b;
  };
}

/// u = theta_1 + theta_2 sin(pi x).
inline BasisExpansion affine_sine_net() {
  return BasisExpansion(1, 1, {constant_basis(), sin_basis(1.0)});
}

// --- toy models ----------------------------------------------------------------

/// u_t = a u on [-1, 1) with the mass as its only quantity.
class LinearModel final : public PdeModel {
 public:
  explicit LinearModel(double a = 1.0, int m = 1) : a_(a), m_(m) {}
  std::string name() const override { return "linear"; }
  int spatial_dim() const override { return 1; }
  int output_dim() const override { return m_; }
  int rhs_order() const override { return 0; }
  Vec rhs(const Jet& jet, const Eigen::Ref<const Vec>&) const override { return a_ * jet.u; }
  std::vector<Quantity> quantities() const override { return {mass_quantity(0)}; }
  Box domain() const override { return interval(-1.0, 1.0); }
  Vec initial_condition(const Eigen::Ref<const Vec>& x) const override {
    return Vec::Constant(m_, std::sin(kPi * x[0]));
  }

 private:
  double a_;
  int m_;
};

/// Returns NaN everywhere; exercises the non-finite checks.
class NanModel final : public PdeModel {
 public:
  std::string name() const override { return "nan"; }
  int spatial_dim() const override { return 1; }
  int output_dim() const override { return 1; }
  int rhs_order() const override { return 0; }
  Vec rhs(const Jet&, const Eigen::Ref<const Vec>&) const override {
    return Vec::Constant(1, std::nan(""));
  }
  std::vector<Quantity> quantities() const override { return {}; }
  Box domain() const override { return interval(-1.0, 1.0); }
  Vec initial_condition(const Eigen::Ref<const Vec>&) const override { return Vec::Zero(1); }
};

/// q = mean of |u|^2.
inline Quantity square_quantity() {
  Quantity q;
  q.name = "square";
  q.order = 0;
  q.kernel = [](const Jet& j) { return j.u.squaredNorm(); };
  q.kernel_grad = [](const Jet& j) { return KernelGrad{2.0 * j.u, Mat()}; };
  return q;
}

// --- numerics -------------------------------------------------------------------

/// max|a - b| / max(1, max|b|).
inline double rel_diff(const Mat& a, const Mat& b) {
  const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

/// Central difference of a vector-valued function of a vector.
template <class F>
Mat central_jacobian(F&& f, const Vec& x, double h) {
  const Vec f0 = f(x);
  Mat J(f0.size(), x.size());
  Vec xp = x, xm = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    xm[i] = x[i] - h;
    J.col(i) = (f(xp) - f(xm)) / (2.0 * h);
    xp[i] = xm[i] = x[i];
  }
  return J;
}

/// Dense KKT solve of min ||A d - b||^2 + reg ||d||^2 s.t. g^T d = 0.
inline Vec kkt_solve(const Mat& A, const Vec& b, const Mat& g, double reg) {
  const Eigen::Index p = A.cols(), k = g.cols();
  Mat K = Mat::Zero(p + k, p + k);
  K.topLeftCorner(p, p) = A.transpose() * A + reg * Mat::Identity(p, p);
  K.topRightCorner(p, k) = g;
  K.bottomLeftCorner(k, p) = g.transpose();
  Vec rhs = Vec::Zero(p + k);
  rhs.head(p) = A.transpose() * b;
  return K.fullPivLu().solve(rhs).head(p);
}

/// Stacks a matrix column-major into a vector.
inline Vec flatten(const Mat& A) { return Eigen::Map<const Vec>(A.data(), A.size()); }

}  // namespace ngtest
