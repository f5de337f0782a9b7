#include "ngembed/weighted.hpp"

#include <limits>

namespace ngembed {

namespace {

const HamiltonianStructure& require_structure(const Parametrization& net, const PdeModel& model) {
  const HamiltonianStructure* h = model.hamiltonian();
  if (!h) throw Error("weighted: model '" + model.name() + "' has no factorizable Hamiltonian");
  if (!h->q_is_constant()) throw Error("weighted: state-dependent Q is not supported");
  if (!net.separable())
    throw ConstructionError("weighted: network output layer must be linear without bias");
  return *h;
}

}  // namespace

Vec WeightedSystem::select_beta(const ParamVector& theta) const {
  Vec Dt = Vec::Zero(theta.size());
  Dt.tail(n_beta) = theta.tail(n_beta);
  return Dt;
}

WeightedSystem assemble_weighted(const Parametrization& net, const ParamVector& theta,
                                 const PdeModel& model, const SampleSet& S) {
  const HamiltonianStructure& ham = require_structure(net, model);
  if (S.size() == 0) throw Error("weighted: sample set is empty");
  const int m = net.output_dim();
  const Eigen::Index p = net.num_params();
  const Eigen::Index na = net.alpha_dim();
  const Eigen::Index nb = net.beta_dim();
  const int nphi = net.num_features();

  WeightedSystem sys;
  sys.n_alpha = na;
  sys.n_beta = nb;
  sys.M = Mat::Zero(p, p);
  Mat J12 = Mat::Zero(na, nb);
  Mat raw22 = Mat::Zero(nb, nb);

  const JetRequest req{1, true, false};
  for (Eigen::Index s = 0; s < S.size(); ++s) {
    const Vec x = S.point(s);
    const Jet jet = net.eval(theta, x, req);
    const Mat& G = jet.param_grad();  // m x p; beta columns are V(x, alpha)
    Vec phi;
    Mat dphi;
    net.features(theta, x, phi, dphi);
    const Mat Q = ham.q_matrix(jet.u);

    // Columns of W: (J(u) Q V e_l)(x_s) for every beta index l.
    Mat W(m, nb);
    for (int i = 0; i < nphi; ++i)
      for (int c = 0; c < m; ++c) {
        const Vec q = Q.col(c) * phi[i];
        const Mat dq = Q.col(c) * dphi.row(i);
        W.col(Parametrization::beta_index(i, c, m)) = ham.j_apply(jet.u, jet.first(), q, dq);
      }
    const Mat QG = Q * G;
    sys.M.noalias() += G.transpose() * QG;
    const Mat QW = Q * W;
    J12.noalias() += G.leftCols(na).transpose() * QW;
    raw22.noalias() += G.rightCols(nb).transpose() * QW;
  }
  const double inv_n = 1.0 / static_cast<double>(S.size());
  sys.M *= inv_n;
  sys.M = 0.5 * (sys.M + sys.M.transpose()).eval();
  J12 *= inv_n;
  raw22 *= inv_n;

  sys.J = Mat::Zero(p, p);
  sys.J.topRightCorner(na, nb) = J12;
  sys.J.bottomLeftCorner(nb, na) = -J12.transpose();
  sys.J.bottomRightCorner(nb, nb) = 0.5 * (raw22 - raw22.transpose());
  return sys;
}

Vec weighted_rhs(const WeightedSystem& sys, const ParamVector& theta) {
  return sys.J * sys.select_beta(theta);
}

Vec weighted_rhs_unfactored(const Parametrization& net, const ParamVector& theta, const PdeModel& model,
                            const SampleSet& S) {
  const HamiltonianStructure& ham = require_structure(net, model);
  const JetRequest req{1, true, false};
  Vec F = Vec::Zero(net.num_params());
  for (Eigen::Index s = 0; s < S.size(); ++s) {
    const Jet jet = net.eval(theta, S.point(s), req);
    const Mat Q = ham.q_matrix(jet.u);
    const Vec q = Q * jet.u;
    const Mat dq = Q * jet.first();
    F.noalias() += jet.param_grad().transpose() * (Q * ham.j_apply(jet.u, jet.first(), q, dq));
  }
  return F / static_cast<double>(S.size());
}

namespace {

struct FilteredInverse {
  Mat V;
  Vec f;  // filter factors lam / (lam^2 + mu^2), zero below the cutoff

  Vec apply(const Vec& v) const { return V * f.cwiseProduct(V.transpose() * v); }
};

FilteredInverse filtered_inverse(const Mat& M, double reg) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(M);
  if (eig.info() != Eigen::Success) throw NumericalError("weighted: eigendecomposition failed");
  const Vec& lam = eig.eigenvalues();
  const double lam_max = lam.cwiseAbs().maxCoeff();
  const double mu = reg * M.diagonal().mean();
  const double cutoff =
      lam_max * static_cast<double>(lam.size()) * std::numeric_limits<double>::epsilon();
  FilteredInverse F{eig.eigenvectors(), Vec::Zero(lam.size())};
  for (Eigen::Index k = 0; k < lam.size(); ++k)
    if (lam[k] > cutoff) F.f[k] = lam[k] / (lam[k] * lam[k] + mu * mu);
  return F;
}

}  // namespace

WeightedSlope solve_weighted(const WeightedSystem& sys, const Vec& rhs, double reg) {
  WeightedSlope out;
  out.theta_dot = filtered_inverse(sys.M, reg).apply(rhs);
  out.residual = (sys.M * out.theta_dot - rhs).norm();
  return out;
}

WeightedSlope weighted_slope(const WeightedSystem& sys, const ParamVector& theta, double reg) {
  const FilteredInverse F = filtered_inverse(sys.M, reg);
  const Vec Dtheta = sys.select_beta(theta);
  const Vec y = F.apply(sys.M * Dtheta);
  WeightedSlope out;
  out.theta_dot = F.apply(sys.J * y);
  out.residual = (sys.M * out.theta_dot - sys.J * Dtheta).norm();
  return out;
}

double sampled_hamiltonian_gradient_check(const Parametrization& net, const ParamVector& theta,
                                          const PdeModel& model, const SampleSet& S_galerkin,
                                          const SampleSet& S_quantity) {
  if (S_galerkin.size() != S_quantity.size() || S_galerkin.points != S_quantity.points)
    throw Error("hamiltonian gradient check: Galerkin and quantity samples must coincide");
  const HamiltonianStructure& ham = require_structure(net, model);
  const Vec gradH = quantity_param_grad(ham.hamiltonian_quantity(), net, theta, S_quantity);
  const WeightedSystem sys = assemble_weighted(net, theta, model, S_galerkin);
  const Vec structured = sys.M.transpose() * sys.select_beta(theta);
  return (gradH - structured).norm() / std::max(1.0, gradH.norm());
}

}  // namespace ngembed
