#include "doctest.h"
#include "support.hpp"

using namespace ngtest;

namespace {

Architecture burgers_arch() {
  Architecture a;
  a.input_dim = 1;
  a.output_dim = 1;
  a.periodic = PeriodicLayerSpec{{2.0}, 10};
  a.hidden = {10, 10, 10};
  return a;
}

// All jet entries of `net` at (theta, x) against central differences.
void check_jet_fd(const Parametrization& net, const ParamVector& theta, const Vec& x) {
  const int m = net.output_dim();
  const int d = net.input_dim();
  const double h = 1e-5;
  const Jet jet = net.eval(theta, x, {2, true, true});

  auto value_x = [&](const Vec& y) { return net.eval(theta, y, {0, false, false}).u; };
  auto du_x = [&](const Vec& y) { return flatten(*net.eval(theta, y, {1, false, false}).du); };
  auto value_t = [&](const Vec& t) { return net.eval(t, x, {0, false, false}).u; };
  auto du_t = [&](const Vec& t) { return flatten(*net.eval(t, x, {1, false, false}).du); };

  CHECK(rel_diff(*jet.du, central_jacobian(value_x, x, h)) <= 1e-6);

  // Row c*d+i of the du-Jacobian is d(du(c,i))/dx; flatten is column-major.
  const Mat H = central_jacobian(du_x, x, h);
  for (int c = 0; c < m; ++c) {
    Mat hc(d, d);
    for (int i = 0; i < d; ++i) hc.row(i) = H.row(i * m + c);
    CHECK(rel_diff((*jet.d2u)[c], hc) <= 1e-6);
    CHECK(((*jet.d2u)[c] - (*jet.d2u)[c].transpose()).cwiseAbs().maxCoeff() <= 1e-12);
  }

  CHECK(rel_diff(*jet.grad_theta, central_jacobian(value_t, theta, h)) <= 1e-6);

  const Mat G = central_jacobian(du_t, theta, h);
  Mat expected(m * d, theta.size());
  for (int c = 0; c < m; ++c)
    for (int i = 0; i < d; ++i) expected.row(c * d + i) = G.row(i * m + c);
  CHECK(rel_diff(*jet.grad_theta_du, expected) <= 1e-6);
}

}  // namespace

TEST_CASE("parameter count without hidden layers is m times the input width") {
  Architecture a;
  a.input_dim = 2;
  a.output_dim = 3;
  Network net(a);
  CHECK(net.num_params() == 6);
  CHECK(net.num_features() == 2);

  a.periodic = PeriodicLayerSpec{{2.0, 2.0}, 4};
  Network pnet(a);
  // amplitudes + phases (4 x 2 each), offsets 4, output 3 x 4
  CHECK(pnet.num_params() == 8 + 8 + 4 + 12);
}

TEST_CASE("burgers architecture matches a hand count") {
  Network net(burgers_arch());
  // periodic: 10 amplitudes, 10 phases, 10 offsets; three 10x10 dense layers
  // with biases; output 10 weights, no bias.
  const Eigen::Index hand = 30 + 3 * (100 + 10) + 10;
  CHECK(net.num_params() == hand);
  CHECK(net.num_params() == 370);
  CHECK(net.alpha_dim() == 360);
  CHECK(net.beta_dim() == 10);
}

TEST_CASE("layout blocks tile the parameter vector") {
  Gen gen(11);
  for (int trial = 0; trial < 20; ++trial) {
    Network net(gen.architecture(gen.integer(1, 2), gen.integer(1, 3), trial % 2 == 0, trial % 3 == 0));
    Eigen::Index next = 0;
    for (const ParamBlock& b : net.layout()) {
      CHECK(b.offset == next);
      next += b.size();
    }
    CHECK(next == net.num_params());
  }
}

TEST_CASE("initialization is deterministic in the seed") {
  Network net(burgers_arch());
  const ParamVector a = net.initialize(7);
  const ParamVector b = net.initialize(7);
  CHECK(a.size() == net.num_params());
  CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0);
  CHECK((net.initialize(8) - a).norm() > 0.0);

  auto [built, theta] = build(burgers_arch(), 7);
  CHECK(theta == a);
  CHECK(built.num_params() == net.num_params());
}

TEST_CASE("initialization respects the fan-in bound") {
  Network net(burgers_arch());
  const ParamVector theta = net.initialize(3);
  for (const ParamBlock& b : net.layout()) {
    if (b.kind == BlockKind::Phase) {
      CHECK(theta.segment(b.offset, b.size()).cwiseAbs().maxCoeff() <= kPi);
      continue;
    }
    const double fan_in = b.layer == 0 ? 1.0 : 10.0;
    CHECK(theta.segment(b.offset, b.size()).cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(fan_in));
  }
}

TEST_CASE("invalid architectures are rejected") {
  Architecture a = burgers_arch();
  a.hidden = {10, 0};
  CHECK_THROWS_AS(Network{a}, ConstructionError);
  a = burgers_arch();
  a.periodic->periods = {-1.0};
  CHECK_THROWS_AS(Network{a}, ConstructionError);
  a = burgers_arch();
  a.periodic->periods = {2.0, 2.0};
  CHECK_THROWS_AS(Network{a}, ConstructionError);
  a = burgers_arch();
  a.output_dim = 0;
  CHECK_THROWS_AS(Network{a}, ConstructionError);
}

TEST_CASE("affine sine expansion has the analytic jet") {
  const BasisExpansion net = affine_sine_net();
  ParamVector theta(2);
  theta << 0.7, -1.3;
  for (double x : {-0.9, -0.25, 0.0, 0.4, 0.8}) {
    const Jet j = net.eval(theta, Vec::Constant(1, x), {2, true, true});
    CHECK(j.u[0] == doctest::Approx(0.7 - 1.3 * std::sin(kPi * x)).epsilon(1e-15));
    CHECK((*j.grad_theta)(0, 0) == 1.0);
    CHECK((*j.grad_theta)(0, 1) == doctest::Approx(std::sin(kPi * x)).epsilon(1e-15));
    CHECK((*j.du)(0, 0) == doctest::Approx(-1.3 * kPi * std::cos(kPi * x)).epsilon(1e-14));
    CHECK((*j.grad_theta_du)(0, 1) == doctest::Approx(kPi * std::cos(kPi * x)).epsilon(1e-14));
  }
}

TEST_CASE("zero parameters give a zero field") {
  Gen gen(5);
  for (int trial = 0; trial < 5; ++trial) {
    Network net(gen.architecture(gen.integer(1, 2), gen.integer(1, 2), true));
    const ParamVector zero = ParamVector::Zero(net.num_params());
    const Vec x = gen.vec(net.input_dim());
    const Jet j = net.eval(zero, x, {2, false, false});
    CHECK(j.u.cwiseAbs().maxCoeff() == 0.0);
    CHECK(j.du->cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("unrequested jet fields are absent") {
  Network net(burgers_arch());
  const ParamVector theta = net.initialize(1);
  const Jet j = net.eval(theta, Vec::Constant(1, 0.3), {0, false, false});
  CHECK_FALSE(j.du.has_value());
  CHECK_FALSE(j.d2u.has_value());
  CHECK_FALSE(j.grad_theta.has_value());
  CHECK_THROWS_AS(j.first(), Error);
  CHECK_THROWS_AS(j.param_grad(), Error);
  const Jet j1 = net.eval(theta, Vec::Constant(1, 0.3), {1, true, false});
  CHECK(j1.du.has_value());
  CHECK_FALSE(j1.d2u.has_value());
  CHECK(j1.grad_theta->cols() == net.num_params());
  CHECK_FALSE(j1.grad_theta_du.has_value());
}

TEST_CASE("jet requests and inputs are validated") {
  Network net(burgers_arch());
  const ParamVector theta = net.initialize(1);
  CHECK_THROWS_AS(net.eval(theta, Vec::Zero(2), {0, false, false}), ConstructionError);
  CHECK_THROWS_AS(net.eval(theta.head(5), Vec::Zero(1), {0, false, false}), ConstructionError);
  CHECK_THROWS_AS(net.eval(theta, Vec::Zero(1), {3, false, false}), Error);
  CHECK_THROWS_AS(net.eval(theta, Vec::Zero(1), {0, false, true}), Error);
  ParamVector bad = theta;
  bad[3] = std::nan("");
  CHECK_THROWS_AS(net.eval(bad, Vec::Zero(1), {1, true, false}), NumericalError);
}

TEST_CASE("network jets match central differences on random draws") {
  Gen gen(2024);
  for (int draw = 0; draw < 100; ++draw) {
    const int d = gen.integer(1, 2);
    const int m = gen.integer(1, 2);
    Network net(gen.architecture(d, m, draw % 4 != 0, draw % 5 == 0));
    const ParamVector theta = net.initialize(gen.seed());
    check_jet_fd(net, theta, gen.vec(d));
  }
}

TEST_CASE("identity activation network jets match central differences") {
  Gen gen(9);
  Architecture a = gen.architecture(2, 2, true);
  a.activation = Activation::Identity;
  Network net(a);
  check_jet_fd(net, net.initialize(4), gen.vec(2));
}

TEST_CASE("periodic layer makes the field periodic along every axis") {
  Gen gen(77);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = gen.integer(1, 2);
    Architecture a = gen.architecture(d, 2, true);
    a.periodic->periods.clear();
    for (int k = 0; k < d; ++k) a.periodic->periods.push_back(gen.uniform(1.0, 8.0));
    Network net(a);
    const ParamVector theta = net.initialize(gen.seed());
    const Vec x = gen.vec(d, -4.0, 4.0);
    const Vec u = net.value(theta, x);
    for (int k = 0; k < d; ++k) {
      Vec y = x;
      y[k] += a.periodic->periods[k];
      CHECK((net.value(theta, y) - u).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("value shortcut agrees with the full jet") {
  Gen gen(3);
  Network net(gen.architecture(2, 2, true));
  const ParamVector theta = net.initialize(1);
  for (int i = 0; i < 10; ++i) {
    const Vec x = gen.vec(2);
    CHECK((net.value(theta, x) - net.eval(theta, x, {2, true, true}).u).norm() == 0.0);
  }
}

TEST_CASE("contracted reverse sweep equals the explicit contraction") {
  Gen gen(31);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = gen.integer(1, 2);
    const int m = gen.integer(1, 2);
    const int S = gen.integer(1, 3);
    Network net(gen.architecture(d, m, true));
    const ParamVector theta = net.initialize(gen.seed());
    const Vec x = gen.vec(d);
    const Mat su = gen.gaussian(m, S);
    std::vector<Mat> sdu;
    for (int k = 0; k < d; ++k) sdu.push_back(gen.gaussian(m, S));
    Parametrization::SeedFn seeds = [&](const Jet&, Mat& a, std::vector<Mat>& b) {
      a = su;
      b = sdu;
    };
    Mat fast, slow;
    net.eval_contracted(theta, x, 1, seeds, fast);
    // Base-class route: full jet followed by a dense contraction.
    net.Parametrization::eval_contracted(theta, x, 1, seeds, slow);
    CHECK(rel_diff(fast, slow) <= 1e-12);
  }
}

TEST_CASE("separable view reconstructs the field") {
  Gen gen(13);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = gen.integer(1, 2);
    Network net(gen.architecture(d, gen.integer(1, 3), true));
    const ParamVector theta = net.initialize(gen.seed());
    const SeparableView view(net, theta);
    CHECK(view.alpha().size() + view.beta().size() == net.num_params());
    for (int i = 0; i < 5; ++i) {
      const Vec x = gen.vec(d);
      CHECK((net.value(theta, x) - view.V(x) * view.beta()).cwiseAbs().maxCoeff() <= 1e-13);
      for (int k = 0; k < d; ++k)
        CHECK((net.eval(theta, x, {1, false, false}).du->col(k) - view.dV(x, k) * view.beta())
                  .cwiseAbs()
                  .maxCoeff() <= 1e-13);
    }
  }
}

TEST_CASE("V has Kronecker identity blocks for two outputs") {
  Gen gen(17);
  Network net(gen.architecture(1, 2, true));
  const ParamVector theta = net.initialize(2);
  const SeparableView view(net, theta);
  const Vec x = Vec::Constant(1, 0.37);
  Vec phi;
  Mat dphi;
  net.features(theta, x, phi, dphi);
  const Mat V = view.V(x);
  REQUIRE(V.rows() == 2);
  REQUIRE(V.cols() == 2 * phi.size());
  Mat kron = Mat::Zero(2, 2 * phi.size());
  for (Eigen::Index i = 0; i < phi.size(); ++i) kron.block(0, 2 * i, 2, 2) = phi[i] * Mat::Identity(2, 2);
  CHECK((V - kron).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single sine feature has the analytic alpha derivative") {
  Architecture a;
  a.input_dim = 1;
  a.output_dim = 1;
  a.hidden = {1};
  Network net(a);
  // theta = (W, b, beta) with b = 0: u = beta sin(alpha x)
  ParamVector theta(3);
  theta << 1.7, 0.0, -0.6;
  const SeparableView view(net, theta);
  for (double x : {-0.8, 0.1, 0.55}) {
    const Vec xv = Vec::Constant(1, x);
    CHECK(view.V(xv)(0, 0) == doctest::Approx(std::sin(1.7 * x)).epsilon(1e-15));
    const Mat dab = view.dV_alpha_beta(xv);
    CHECK(dab(0, 0) == doctest::Approx(-0.6 * x * std::cos(1.7 * x)).epsilon(1e-14));
  }
}

TEST_CASE("separable view requires a bias-free output layer") {
  Architecture a = burgers_arch();
  a.output_bias = true;
  Network net(a);
  CHECK_FALSE(net.separable());
  CHECK_THROWS_AS(SeparableView(net, net.initialize(1)), ConstructionError);
}

TEST_CASE("basis expansion is separable with no alpha block") {
  const BasisExpansion net(1, 2, {constant_basis(), sin_basis(1.0), cos_basis(2.0)});
  CHECK(net.num_params() == 6);
  CHECK(net.alpha_dim() == 0);
  Gen gen(4);
  const ParamVector theta = gen.vec(6);
  const SeparableView view(net, theta);
  const Vec x = Vec::Constant(1, 0.2);
  CHECK((net.value(theta, x) - view.V(x) * view.beta()).norm() <= 1e-15);
  check_jet_fd(net, theta, x);
}
