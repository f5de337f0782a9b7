#include "doctest.h"
#include "ngembed/weighted.hpp"
#include "support.hpp"

using namespace ngtest;

namespace {

Network separable_net(Gen& gen, int m) {
  Architecture a = gen.architecture(1, m, true);
  return Network(a);
}

}  // namespace

TEST_CASE("sampled interconnection matrix is exactly skew") {
  Gen gen(1);
  BurgersModel burgers;
  WaveModel wave(1.4, 0.6);
  for (const PdeModel* model : {static_cast<const PdeModel*>(&burgers), static_cast<const PdeModel*>(&wave)}) {
    for (int trial = 0; trial < 10; ++trial) {
      Network net = separable_net(gen, model->output_dim());
      const ParamVector theta = net.initialize(gen.seed());
      const SampleSet S = random_uniform(model->domain(), 30, gen.seed(), SampleRole::Galerkin);
      const WeightedSystem sys = assemble_weighted(net, theta, *model, S);
      CHECK((sys.J + sys.J.transpose()).cwiseAbs().maxCoeff() == 0.0);
      CHECK(sys.J.topLeftCorner(sys.n_alpha, sys.n_alpha).cwiseAbs().maxCoeff() == 0.0);
      CHECK((sys.M - sys.M.transpose()).cwiseAbs().maxCoeff() == 0.0);
      CHECK(sys.n_alpha + sys.n_beta == net.num_params());
    }
  }
}

TEST_CASE("weighted mass matrix is positive semidefinite") {
  Gen gen(2);
  WaveModel wave(2.0, 0.5);
  for (int trial = 0; trial < 10; ++trial) {
    Network net = separable_net(gen, 2);
    const ParamVector theta = net.initialize(gen.seed());
    const SampleSet S = random_uniform(wave.domain(), 25, gen.seed(), SampleRole::Galerkin);
    const WeightedSystem sys = assemble_weighted(net, theta, wave, S);
    const Eigen::SelfAdjointEigenSolver<Mat> es(sys.M);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10 * sys.M.trace());
  }
}

TEST_CASE("with Q = 1 the beta block is the plain Gram block") {
  BurgersModel burgers;
  const SampleSet S = equidistant_grid(burgers.domain(), 20, 0.0, SampleRole::Galerkin);
  // single linear basis function
  const BasisExpansion single(1, 1, {exp_sin_basis()});
  const ParamVector t1 = ParamVector::Constant(1, 0.7);
  CHECK(std::abs(assemble_weighted(single, t1, burgers, S).M(0, 0) - assemble_mf(single, t1, burgers, S).M(0, 0)) <=
        1e-15);

  Gen gen(3);
  Network net = separable_net(gen, 1);
  const ParamVector theta = net.initialize(4);
  const WeightedSystem sys = assemble_weighted(net, theta, burgers, S);
  const MassSystem mf = assemble_mf(net, theta, burgers, S);
  const Eigen::Index nb = sys.n_beta;
  CHECK((sys.M.bottomRightCorner(nb, nb) - mf.M.bottomRightCorner(nb, nb)).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK((sys.M - mf.M).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("zero linear coefficients give a zero weighted rhs") {
  Gen gen(4);
  WaveModel wave;
  Network net = separable_net(gen, 2);
  ParamVector theta = net.initialize(1);
  theta.tail(net.beta_dim()).setZero();
  const SampleSet S = equidistant_grid(wave.domain(), 32, 0.0, SampleRole::Galerkin);
  const WeightedSystem sys = assemble_weighted(net, theta, wave, S);
  CHECK(weighted_rhs(sys, theta).norm() == 0.0);
}

TEST_CASE("weighted rhs on a hand-built 3x3 system") {
  WeightedSystem sys;
  sys.n_alpha = 1;
  sys.n_beta = 2;
  sys.M = Mat::Identity(3, 3);
  sys.J.resize(3, 3);
  sys.J << 0, 2, -1,
          -2, 0, 3,
           1, -3, 0;
  ParamVector theta(3);
  theta << 5.0, 1.0, 2.0;
  // J * (0, 1, 2) = (2 - 2, 0 + 6, -3 + 0)
  Vec expected(3);
  expected << 0.0, 6.0, -3.0;
  CHECK((weighted_rhs(sys, theta) - expected).norm() == 0.0);
  CHECK(sys.select_beta(theta) == Vec((Vec(3) << 0.0, 1.0, 2.0).finished()));
}

TEST_CASE("factored and unfactored weighted rhs agree") {
  Gen gen(5);
  BurgersModel burgers;
  WaveModel wave(1.3, 0.7);
  for (const PdeModel* model : {static_cast<const PdeModel*>(&burgers), static_cast<const PdeModel*>(&wave)}) {
    for (int trial = 0; trial < 5; ++trial) {
      Network net = separable_net(gen, model->output_dim());
      const ParamVector theta = net.initialize(gen.seed());
      const SampleSet S = equidistant_grid(model->domain(), 200, 0.0, SampleRole::Galerkin);
      const Vec factored = weighted_rhs(assemble_weighted(net, theta, *model, S), theta);
      const Vec unfactored = weighted_rhs_unfactored(net, theta, *model, S);
      CHECK((factored - unfactored).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, unfactored.norm()));
    }
  }
}

TEST_CASE("sampled Hamiltonian gradient identity on 50 random separable nets") {
  Gen gen(6);
  BurgersModel burgers;
  WaveModel wave(1.1, 0.9);
  double worst = 0.0;
  for (const PdeModel* model : {static_cast<const PdeModel*>(&burgers), static_cast<const PdeModel*>(&wave)}) {
    for (int trial = 0; trial < 50; ++trial) {
      Network net = separable_net(gen, model->output_dim());
      const ParamVector theta = net.initialize(gen.seed());
      const SampleSet S = random_uniform(model->domain(), 40, gen.seed(), SampleRole::Galerkin);
      worst = std::max(worst, sampled_hamiltonian_gradient_check(net, theta, *model, S, S));
    }
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("gradient identity requires identical sample sets") {
  Gen gen(7);
  WaveModel wave;
  Network net = separable_net(gen, 2);
  const SampleSet S = equidistant_grid(wave.domain(), 20, 0.0, SampleRole::Galerkin);
  const SampleSet T = equidistant_grid(wave.domain(), 20, 0.5, SampleRole::Quantity);
  CHECK_THROWS_AS(sampled_hamiltonian_gradient_check(net, net.initialize(1), wave, S, T), Error);
}

TEST_CASE("weighted solve conserves the sampled Hamiltonian in continuous time") {
  Gen gen(8);
  BurgersModel burgers;
  WaveModel wave(1.0, 1.0);
  for (const PdeModel* model : {static_cast<const PdeModel*>(&burgers), static_cast<const PdeModel*>(&wave)}) {
    for (int trial = 0; trial < 10; ++trial) {
      Network net = separable_net(gen, model->output_dim());
      const ParamVector theta = net.initialize(gen.seed());
      const SampleSet S = equidistant_grid(model->domain(), 64, 0.0, SampleRole::Galerkin);
      const WeightedSystem sys = assemble_weighted(net, theta, *model, S);
      const Vec gradH = quantity_param_grad(model->hamiltonian()->hamiltonian_quantity(), net, theta, S);
      for (double reg : {0.0, 1e-8}) {
        const WeightedSlope s = weighted_slope(sys, theta, reg);
        CHECK(std::abs(gradH.dot(s.theta_dot)) <= 1e-9 * (1.0 + s.theta_dot.norm()));
      }
    }
  }
}

TEST_CASE("weighted slope conserves the sampled Hamiltonian with a singular mass matrix") {
  Gen gen(10);
  WaveModel wave(1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    Network net = separable_net(gen, 2);
    const ParamVector theta = net.initialize(gen.seed());
    const SampleSet S = equidistant_grid(wave.domain(), 3, 0.0, SampleRole::Galerkin);
    const WeightedSystem sys = assemble_weighted(net, theta, wave, S);
    REQUIRE(sys.M.rows() > 6);
    const Vec gradH = quantity_param_grad(wave.hamiltonian()->hamiltonian_quantity(), net, theta, S);
    CHECK(std::abs(gradH.dot(weighted_slope(sys, theta, 0.0).theta_dot)) <= 1e-12 * (1.0 + gradH.norm()));
  }
}

TEST_CASE("weighted slope equals the direct solve when the mass matrix is invertible") {
  Gen gen(11);
  WeightedSystem sys;
  sys.n_alpha = 2;
  sys.n_beta = 3;
  const Mat B = gen.gaussian(5, 5);
  sys.M = B * B.transpose() + Mat::Identity(5, 5);
  const Mat C = gen.gaussian(5, 5);
  sys.J = C - C.transpose();
  const ParamVector theta = gen.gaussian(5);
  const Vec direct = sys.M.ldlt().solve(weighted_rhs(sys, theta));
  const WeightedSlope s = weighted_slope(sys, theta, 0.0);
  CHECK((s.theta_dot - direct).norm() <= 1e-12 * direct.norm());
  CHECK(s.residual <= 1e-11 * weighted_rhs(sys, theta).norm());
}

TEST_CASE("weighted solve of a well-conditioned system is exact") {
  Gen gen(9);
  WeightedSystem sys;
  sys.n_alpha = 2;
  sys.n_beta = 3;
  const Mat B = gen.gaussian(5, 5);
  sys.M = B * B.transpose() + Mat::Identity(5, 5);
  const Vec rhs = gen.gaussian(5);
  const WeightedSlope s = solve_weighted(sys, rhs, 0.0);
  CHECK((sys.M * s.theta_dot - rhs).norm() <= 1e-12 * rhs.norm());
  CHECK(s.residual <= 1e-12 * rhs.norm());
  // Tikhonov shrinks the solution
  CHECK(solve_weighted(sys, rhs, 1e-1).theta_dot.norm() < s.theta_dot.norm());
}

TEST_CASE("weighted assembly requires structure and separability") {
  Gen gen(10);
  ShallowWaterModel swe;
  Architecture a2 = gen.architecture(2, 2, true);
  a2.periodic->periods = {8.0, 8.0};
  Network net2(a2);
  const SampleSet S2 = equidistant_grid(swe.domain(), 4, 0.0, SampleRole::Galerkin);
  CHECK_THROWS_AS(assemble_weighted(net2, net2.initialize(1), swe, S2), Error);

  Architecture a = gen.architecture(1, 1, true, true);
  Network biased(a);
  BurgersModel burgers;
  const SampleSet S = equidistant_grid(burgers.domain(), 8, 0.0, SampleRole::Galerkin);
  CHECK_THROWS_AS(assemble_weighted(biased, biased.initialize(1), burgers, S), ConstructionError);
}
