#pragma once
// Weighted Neural Galerkin system for separable parametrizations and
// factorizable Hamiltonians:  M_Q theta_dot = J_Q D theta,
// with parameters ordered (alpha, beta) and D = blockdiag(0, I_beta).

#include "ngembed/galerkin.hpp"

namespace ngembed {

struct WeightedSystem {
  Mat M;  // symmetric, blocks (alpha alpha, alpha beta; beta alpha, beta beta)
  Mat J;  // skew: zero (1,1) block, J12, -J12^T, antisymmetrized J22
  Eigen::Index n_alpha = 0;
  Eigen::Index n_beta = 0;

  Vec select_beta(const ParamVector& theta) const;  // D theta
};

/// Sampled M_Q and J_Q. J22 is assembled as half the difference of the two
/// sampled sums, so J_Q + J_Q^T == 0 holds bitwise.
WeightedSystem assemble_weighted(const Parametrization& net, const ParamVector& theta,
                                 const PdeModel& model, const SampleSet& S);

/// J_Q D theta.
Vec weighted_rhs(const WeightedSystem& sys, const ParamVector& theta);

/// Unfactored sampled F_Q = mean grad^T Q (J(u) Q u); used as a cross-check.
Vec weighted_rhs_unfactored(const Parametrization& net, const ParamVector& theta, const PdeModel& model,
                            const SampleSet& S);

struct WeightedSlope {
  Vec theta_dot;
  double residual = 0.0;  // ||M theta_dot - J D theta||
};

/// Minimum-norm Tikhonov solve of M theta_dot = rhs via the eigendecomposition
/// of the symmetric M. reg is relative to the mean diagonal of M; reg == 0
/// gives the pseudo-inverse solution.
WeightedSlope solve_weighted(const WeightedSystem& sys, const Vec& rhs, double reg);

/// theta_dot = F J F (M D theta) with F the same filtered inverse of M used by
/// solve_weighted. F J F is skew, so grad H_hat^T theta_dot vanishes even when
/// M is singular; for invertible M and reg == 0 this equals M^{-1} J D theta.
WeightedSlope weighted_slope(const WeightedSystem& sys, const ParamVector& theta, double reg);

/// ||grad H_hat(theta) - M_Q^T D theta|| / max(1, ||grad H_hat||), with the
/// Hamiltonian estimated on S_quantity. Both sample sets must coincide.
double sampled_hamiltonian_gradient_check(const Parametrization& net, const ParamVector& theta,
                                          const PdeModel& model, const SampleSet& S_galerkin,
                                          const SampleSet& S_quantity);

}  // namespace ngembed
