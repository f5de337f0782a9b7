#include "ngembed/models.hpp"
#include "parallel.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace ngembed {

SampleSet equidistant_grid(const Box& box, int per_axis, double offset_fraction,
                           SampleRole role) {
  if (per_axis < 1) throw ConstructionError("equidistant grid needs at least one point per axis");
  const int d = box.dim();
  Eigen::Index n = 1;
  for (int k = 0; k < d; ++k) n *= per_axis;
  SampleSet S;
  S.role = role;
  S.spacing = Spacing::Equidistant;
  S.points.resize(n, d);
  const Vec h = box.periods() / per_axis;
  for (Eigen::Index s = 0; s < n; ++s) {
    Eigen::Index rem = s;
    // Last axis varies fastest.
    for (int k = d - 1; k >= 0; --k) {
      const Eigen::Index i = rem % per_axis;
      rem /= per_axis;
      S.points(s, k) = box.lo[k] + (static_cast<double>(i) + offset_fraction) * h[k];
    }
  }
  return S;
}

SampleSet random_uniform(const Box& box, Eigen::Index n, std::uint64_t seed, SampleRole role) {
  std::mt19937_64 rng(seed);
  SampleSet S;
  S.role = role;
  S.spacing = Spacing::Random;
  S.points.resize(n, box.dim());
  for (Eigen::Index s = 0; s < n; ++s)
    for (int k = 0; k < box.dim(); ++k) {
      std::uniform_real_distribution<double> dist(box.lo[k], box.hi[k]);
      S.points(s, k) = dist(rng);
    }
  return S;
}

double min_separation(const SampleSet& a, const SampleSet& b) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < a.size(); ++i)
    for (Eigen::Index j = 0; j < b.size(); ++j)
      best = std::min(best, (a.points.row(i) - b.points.row(j)).norm());
  return best;
}

Quantity HamiltonianStructure::hamiltonian_quantity() const {
  Quantity q;
  q.name = "hamiltonian";
  q.order = 0;
  q.kernel = [this](const Jet& j) { return density(j.u); };
  q.kernel_grad = [this](const Jet& j) { return KernelGrad{density_grad(j.u), Mat()}; };
  return q;
}

// --- right-hand sides ------------------------------------------------------

double rhs_burgers(const Jet& jet) { return -jet.u[0] * jet.first()(0, 0); }

Vec rhs_wave(const Jet& jet, double c, double rho_bar) {
  const Mat& du = jet.first();
  Vec f(2);
  f[0] = -rho_bar * du(1, 0);
  f[1] = -(c * c / rho_bar) * du(0, 0);
  return f;
}

Vec rhs_swe(const Jet& jet) {
  const Mat& du = jet.first();
  const auto& d2 = jet.second();
  const double h = jet.u[0];
  const Eigen::Vector2d gh(du(0, 0), du(0, 1));
  const Eigen::Vector2d gp(du(1, 0), du(1, 1));
  const double lap = d2[1](0, 0) + d2[1](1, 1);
  Vec f(2);
  f[0] = -gh.dot(gp) - (h + 1.0) * lap;
  f[1] = -0.5 * gp.squaredNorm() - h;
  return f;
}

Quantity mass_quantity(int component) {
  Quantity q;
  q.name = "mass";
  q.order = 0;
  q.kernel = [component](const Jet& j) { return j.u[component]; };
  q.kernel_grad = [component](const Jet& j) {
    Vec g = Vec::Zero(j.u.size());
    g[component] = 1.0;
    return KernelGrad{g, Mat()};
  };
  return q;
}

// --- Burgers ---------------------------------------------------------------

double BurgersModel::default_initial(double x) {
  return std::exp(std::cos(std::numbers::pi * x) - 1.0);
}

double BurgersModel::gaussian_initial(double x) {
  double u = 0.0;
  for (int j = -2; j <= 2; ++j) {
    const double y = x + 2.0 * j;
    u += std::exp(-25.0 * y * y);
  }
  return u;
}

BurgersModel::BurgersModel() : u0_(&BurgersModel::default_initial) {}
BurgersModel::BurgersModel(InitialCondition u0) : u0_(std::move(u0)) {}

Vec BurgersModel::rhs(const Jet& jet, const Eigen::Ref<const Vec>&) const {
  return Vec::Constant(1, rhs_burgers(jet));
}

std::vector<Quantity> BurgersModel::quantities() const { return {mass_quantity(0)}; }

Box BurgersModel::domain() const { return {Vec::Constant(1, -1.0), Vec::Constant(1, 1.0)}; }

Vec BurgersModel::initial_condition(const Eigen::Ref<const Vec>& x) const {
  return Vec::Constant(1, u0_(x[0]));
}

Vec BurgersModel::j_apply(const Vec& v, const Mat& dv, const Vec& q, const Mat& dq) const {
  // -(1/3) (d/dx (v q) + v dq/dx)
  return Vec::Constant(1, -(dv(0, 0) * q[0] + 2.0 * v[0] * dq(0, 0)) / 3.0);
}

Mat BurgersModel::q_matrix(const Vec&) const { return Mat::Identity(1, 1); }
double BurgersModel::density(const Vec& u) const { return 0.5 * u[0] * u[0]; }
Vec BurgersModel::density_grad(const Vec& u) const { return u; }

// --- wave ------------------------------------------------------------------

WaveModel::WaveModel(double c, double rho_bar) : c_(c), rho_bar_(rho_bar) {
  if (!(c > 0.0) || !(rho_bar > 0.0))
    throw ConstructionError("wave model: c and rho_bar must be positive");
}

Vec WaveModel::rhs(const Jet& jet, const Eigen::Ref<const Vec>&) const {
  return rhs_wave(jet, c_, rho_bar_);
}

std::vector<Quantity> WaveModel::quantities() const { return {hamiltonian_quantity()}; }

Box WaveModel::domain() const { return {Vec::Constant(1, -1.0), Vec::Constant(1, 1.0)}; }

Vec WaveModel::initial_condition(const Eigen::Ref<const Vec>& x) const {
  Vec u(2);
  // Sum of periodic images so the datum is smooth on the periodic domain.
  u[0] = 0.0;
  for (int j = -3; j <= 3; ++j) {
    const double y = x[0] + 2.0 * j;
    u[0] += std::exp(-9.0 * y * y);
  }
  u[1] = 0.0;
  return u;
}

Vec WaveModel::j_apply(const Vec&, const Mat&, const Vec&, const Mat& dq) const {
  // J = -[[0, d/dx], [d/dx, 0]]
  Vec out(2);
  out[0] = -dq(1, 0);
  out[1] = -dq(0, 0);
  return out;
}

Mat WaveModel::q_matrix(const Vec&) const {
  Mat Q = Mat::Zero(2, 2);
  Q(0, 0) = c_ * c_ / rho_bar_;
  Q(1, 1) = rho_bar_;
  return Q;
}

double WaveModel::density(const Vec& u) const {
  return 0.5 * (c_ * c_ / rho_bar_ * u[0] * u[0] + rho_bar_ * u[1] * u[1]);
}

Vec WaveModel::density_grad(const Vec& u) const { return q_matrix(u) * u; }

// --- shallow water ---------------------------------------------------------

Vec ShallowWaterModel::rhs(const Jet& jet, const Eigen::Ref<const Vec>&) const {
  return rhs_swe(jet);
}

double ShallowWaterModel::energy_density(double h, const Eigen::Ref<const Vec>& grad_phi) {
  const double H = h + 1.0;
  return 0.5 * (H * grad_phi.squaredNorm() + H * H);
}

std::vector<Quantity> ShallowWaterModel::quantities() const {
  Quantity q;
  q.name = "energy";
  q.order = 1;
  q.kernel = [](const Jet& j) {
    const Mat& du = j.first();
    return energy_density(j.u[0], du.row(1).transpose());
  };
  q.kernel_grad = [](const Jet& j) {
    const Mat& du = j.first();
    const double H = j.u[0] + 1.0;
    KernelGrad g;
    g.d_u = Vec::Zero(2);
    g.d_u[0] = 0.5 * du.row(1).squaredNorm() + H;
    g.d_du = Mat::Zero(2, 2);
    g.d_du.row(1) = H * du.row(1);
    return g;
  };
  return {q};
}

Box ShallowWaterModel::domain() const {
  return {Vec::Constant(2, -4.0), Vec::Constant(2, 4.0)};
}

Vec ShallowWaterModel::initial_condition(const Eigen::Ref<const Vec>& x) const {
  Vec u(2);
  u[0] = 0.33 * std::exp(-1.7 * x.squaredNorm());
  u[1] = 0.0;
  return u;
}

// --- structure helpers -----------------------------------------------------

Vec j_apply(const PdeModel& model, const Vec& v, const Mat& dv, const Vec& q, const Mat& dq) {
  const HamiltonianStructure* h = model.hamiltonian();
  if (!h) throw Error("model '" + model.name() + "' has no Hamiltonian structure");
  return h->j_apply(v, dv, q, dq);
}

Mat q_eval(const PdeModel& model, const Vec& u) {
  const HamiltonianStructure* h = model.hamiltonian();
  if (!h) throw Error("model '" + model.name() + "' has no Hamiltonian structure");
  return h->q_matrix(u);
}

// --- estimators ------------------------------------------------------------

JetRequest quantity_request(const std::vector<Quantity>& qs, bool with_grads) {
  JetRequest req;
  req.order = 0;
  for (const Quantity& q : qs) req.order = std::max(req.order, q.order);
  req.param_grads = with_grads;
  req.du_param_grads = with_grads && req.order >= 1;
  return req;
}

QuantityEval evaluate_quantities(const std::vector<Quantity>& qs, const Parametrization& net,
                                 const ParamVector& theta, const SampleSet& S,
                                 bool with_jacobian) {
  if (S.size() == 0) throw Error("quantity estimate needs a nonempty sample set");
  const auto nq = static_cast<Eigen::Index>(qs.size());
  const Eigen::Index n = S.size();
  const int m = net.output_dim();
  const int d = net.input_dim();
  const JetRequest req = quantity_request(qs, with_jacobian);

  // Fixed-size blocks are reduced in order, so results do not depend on the
  // thread count.
  constexpr Eigen::Index kBlock = 256;
  const Eigen::Index nblocks = (n + kBlock - 1) / kBlock;
  std::vector<Vec> block_vals(nblocks, Vec::Zero(nq));
  std::vector<Mat> block_jac(with_jacobian ? nblocks : 0);
  detail::parallel_for(nblocks, [&](Eigen::Index b) {
    Vec& bv = block_vals[b];
    Mat bj, g;
    if (with_jacobian) bj = Mat::Zero(nq, net.num_params());
    // One reverse seed per quantity: the kernel gradient at this point.
    const Parametrization::SeedFn seeds = [&](const Jet& jet, Mat& su, std::vector<Mat>& sdu) {
      su.setZero(m, nq);
      if (req.order >= 1) sdu.assign(d, Mat::Zero(m, nq));
      for (Eigen::Index i = 0; i < nq; ++i) {
        const KernelGrad kg = qs[i].kernel_grad(jet);
        su.col(i) = kg.d_u;
        if (kg.d_du.size() > 0)
          for (int k = 0; k < d; ++k) sdu[k].col(i) = kg.d_du.col(k);
      }
    };
    for (Eigen::Index s = b * kBlock; s < std::min(n, (b + 1) * kBlock); ++s) {
      if (!with_jacobian) {
        const Jet jet = net.eval(theta, S.point(s), req);
        for (Eigen::Index i = 0; i < nq; ++i) bv[i] += qs[i].kernel(jet);
        continue;
      }
      const Jet jet = net.eval_contracted(theta, S.point(s), req.order, seeds, g);
      for (Eigen::Index i = 0; i < nq; ++i) bv[i] += qs[i].kernel(jet);
      bj += g;
    }
    if (with_jacobian) block_jac[b] = std::move(bj);
  });

  QuantityEval out;
  out.values = Vec::Zero(nq);
  for (const Vec& bv : block_vals) out.values += bv;
  out.values /= static_cast<double>(n);
  if (with_jacobian) {
    out.jacobian = Mat::Zero(nq, net.num_params());
    for (const Mat& bj : block_jac) out.jacobian += bj;
    out.jacobian /= static_cast<double>(n);
  }
  return out;
}

double estimate_quantity(const Quantity& q, const Parametrization& net, const ParamVector& theta,
                         const SampleSet& S) {
  return evaluate_quantities({q}, net, theta, S, false).values[0];
}

Vec quantity_param_grad(const Quantity& q, const Parametrization& net, const ParamVector& theta,
                        const SampleSet& S) {
  return evaluate_quantities({q}, net, theta, S, true).jacobian.row(0).transpose();
}

void freeze_targets(std::vector<Quantity>& qs, const Parametrization& net, const ParamVector& theta0,
                    const SampleSet& S) {
  if (qs.empty()) return;
  const Vec v = evaluate_quantities(qs, net, theta0, S, false).values;
  for (std::size_t i = 0; i < qs.size(); ++i) qs[i].target = v[static_cast<Eigen::Index>(i)];
}

}  // namespace ngembed
