#include "doctest.h"
#include "ngembed/reference.hpp"
#include "support.hpp"

using namespace ngtest;

namespace {

SpectralField field1d(int N, const std::function<Vec(double)>& f, int m) {
  SpectralField u;
  u.n = {N};
  u.box = interval(-1, 1);
  const Vec x = grid_axis(u.box, 0, N);
  u.values.resize(N, m);
  for (int j = 0; j < N; ++j) u.values.row(j) = f(x[j]).transpose();
  return u;
}

SpectralOptions horizon(double dt, double T) {
  SpectralOptions o;
  o.dt = dt;
  o.T = T;
  return o;
}

}  // namespace

TEST_CASE("grid axes exclude the right endpoint") {
  const Vec x = grid_axis(interval(-1, 1), 0, 8);
  CHECK(x.size() == 8);
  CHECK(x[0] == -1.0);
  CHECK(x[7] == doctest::Approx(0.75));
  const SpectralField u0 = grid_initial_condition(ShallowWaterModel(), 16);
  CHECK(u0.grid_size() == 256);
  CHECK(u0.values.cols() == 2);
}

TEST_CASE("spectral derivatives of trigonometric data are exact") {
  const int N = 64;
  const SpectralField u = field1d(N, [](double x) { return Vec::Constant(1, std::sin(3 * kPi * x) + std::cos(kPi * x)); }, 1);
  const Vec x = grid_axis(u.box, 0, N);
  Vec d1(N), d2(N);
  for (int j = 0; j < N; ++j) {
    d1[j] = 3 * kPi * std::cos(3 * kPi * x[j]) - kPi * std::sin(kPi * x[j]);
    d2[j] = -9 * kPi * kPi * std::sin(3 * kPi * x[j]) - kPi * kPi * std::cos(kPi * x[j]);
  }
  CHECK((spectral_derivative(u.values.col(0), u.n, u.box, 0, 1) - d1).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((spectral_derivative(u.values.col(0), u.n, u.box, 0, 2) - d2).cwiseAbs().maxCoeff() <= 1e-10);

  // 2D: d/dy of sin(pi x / 4) cos(pi y / 2) on [-4, 4)^2
  const Box box{Vec::Constant(2, -4.0), Vec::Constant(2, 4.0)};
  const int M = 32;
  const Vec ax = grid_axis(box, 0, M);
  Vec f(M * M), dy(M * M);
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < M; ++j) {
      f[i * M + j] = std::sin(kPi * ax[i] / 4) * std::cos(kPi * ax[j] / 2);
      dy[i * M + j] = -kPi / 2 * std::sin(kPi * ax[i] / 4) * std::sin(kPi * ax[j] / 2);
    }
  CHECK((spectral_derivative(f, {M, M}, box, 1, 1) - dy).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK_THROWS_AS(spectral_derivative(f, {M, M}, box, 2, 1), ConstructionError);
}

TEST_CASE("wave reference matches the d'Alembert solution") {
  const double c = 1.5, rho_bar = 0.8;
  WaveModel wave(c, rho_bar);
  auto rho0 = [](double x) { return std::sin(kPi * x) + 0.5 * std::cos(2 * kPi * x); };
  auto v0 = [](double x) { return 0.3 * std::sin(3 * kPi * x); };
  const SpectralField u0 = field1d(64, [&](double x) { return Vec((Vec(2) << rho0(x), v0(x)).finished()); }, 2);
  const double T = 1.0;
  const auto frames = spectral_solve(wave, u0, horizon(1e-3, T));
  REQUIRE(frames.size() == 2);
  // Riemann invariants rho +- (rho_bar / c) v move with speed +-c.
  const double z = rho_bar / c;
  const Vec x = grid_axis(u0.box, 0, 64);
  double err = 0.0;
  for (int j = 0; j < 64; ++j) {
    const double a = x[j] - c * T, b = x[j] + c * T;
    const double wp = rho0(a) + z * v0(a);
    const double wm = rho0(b) - z * v0(b);
    err = std::max(err, std::abs(frames[1].values(j, 0) - 0.5 * (wp + wm)));
    err = std::max(err, std::abs(frames[1].values(j, 1) - 0.5 * (wp - wm) / z));
  }
  CHECK(err <= 1e-6);
  CHECK(frames[1].t == T);
}

TEST_CASE("burgers reference conserves the grid mass") {
  BurgersModel burgers;
  const SpectralField u0 = grid_initial_condition(burgers, 256);
  SpectralOptions o = horizon(1e-3, 0.15);
  o.output_times = {0.0, 0.05, 0.1, 0.15};
  const auto frames = spectral_solve(burgers, u0, o);
  REQUIRE(frames.size() == 4);
  const double m0 = frames[0].values.sum();
  for (const auto& f : frames) CHECK(std::abs(f.values.sum() - m0) / 256.0 <= 1e-12);
}

TEST_CASE("burgers reference is converged under fourfold refinement") {
  BurgersModel burgers;
  const SampleSet S = equidistant_grid(burgers.domain(), 100, 1.0 / 3.0, SampleRole::Test);
  auto solve = [&](int N, double dt) {
    const SpectralOptions o = horizon(dt, 0.15);
    return ReferenceSolution(spectral_solve(burgers, grid_initial_condition(burgers, N), o), dt)
        .sample(0.15, S.points);
  };
  const Mat coarse = solve(128, 1e-3);
  const Mat fine = solve(512, 2.5e-4);
  CHECK((coarse - fine).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("shallow water reference self-converges") {
  ShallowWaterModel swe;
  const double T = 0.1;
  const SampleSet S = equidistant_grid(swe.domain(), 12, 1.0 / 3.0, SampleRole::Test);
  auto solve = [&](int N, double dt) {
    return ReferenceSolution(spectral_solve(swe, grid_initial_condition(swe, N), horizon(dt, T)), dt)
        .sample(T, S.points);
  };
  const Mat coarse = solve(64, 2e-3);
  const Mat fine = solve(128, 1e-3);
  CHECK((coarse - fine).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("trigonometric interpolation is exact on nodes and band-limited data") {
  const int N = 32;
  const SpectralField u = field1d(N, [](double x) { return Vec::Constant(1, std::sin(kPi * x) + 0.2 * std::cos(5 * kPi * x)); }, 1);
  const ReferenceSolution ref({u}, 1e-3);
  const Vec x = grid_axis(u.box, 0, N);
  for (int j = 0; j < N; j += 5) CHECK(std::abs(ref.sample_point(0.0, x.segment(j, 1))[0] - u.values(j, 0)) <= 1e-13);

  Gen gen(1);
  for (int i = 0; i < 50; ++i) {
    const double p = gen.uniform(-1, 1);
    const double exact = std::sin(kPi * p) + 0.2 * std::cos(5 * kPi * p);
    CHECK(std::abs(ref.sample_point(0.0, Vec::Constant(1, p))[0] - exact) <= 1e-13);
  }
  const Mat W = trig_interpolation_matrix(x, -1.0, 2.0, N);
  CHECK((W - Mat::Identity(N, N)).cwiseAbs().maxCoeff() <= 1e-13);
  CHECK((trig_interpolation_matrix(gen.vec(7), -1.0, 2.0, N).rowwise().sum().array() - 1.0).abs().maxCoeff() <=
        1e-13);
}

TEST_CASE("grid sampling agrees with pointwise sampling") {
  ShallowWaterModel swe;
  const SpectralField u0 = grid_initial_condition(swe, 32);
  const ReferenceSolution ref({u0}, 1e-3);
  Gen gen(2);
  const std::vector<Vec> axes = {gen.vec(3, -4, 4), gen.vec(4, -4, 4)};
  const Mat grid = ref.sample_grid(0.0, axes);
  REQUIRE(grid.rows() == 12);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) {
      const Vec p = (Vec(2) << axes[0][i], axes[1][j]).finished();
      CHECK((grid.row(i * 4 + j).transpose() - ref.sample_point(0.0, p)).cwiseAbs().maxCoeff() <= 1e-13);
    }
}

TEST_CASE("reference configuration errors") {
  BurgersModel burgers;
  const SpectralField u0 = grid_initial_condition(burgers, 64);
  CHECK_THROWS_AS(spectral_solve(burgers, u0, horizon(1.0, 2.0)), ConfigError);
  CHECK_THROWS_AS(spectral_solve(burgers, u0, horizon(0.3, 1.0)), ConfigError);
  SpectralOptions o = horizon(1e-3, 0.01);
  o.output_times = {0.0105};
  CHECK_THROWS_AS(spectral_solve(burgers, u0, o), ConfigError);
  CHECK_THROWS_AS(grid_initial_condition(burgers, 7), ConfigError);
  LinearModel linear;
  CHECK_THROWS_AS(spectral_solve(linear, u0, horizon(1e-3, 0.01)), ConfigError);

  o.output_times = {0.0, 0.01};
  const ReferenceSolution ref(spectral_solve(burgers, u0, o), 1e-3);
  CHECK(ref.frame(0.01).t == doctest::Approx(0.01));
  CHECK(ref.frame(0.0101).t == doctest::Approx(0.01));
  CHECK_THROWS_AS(ref.frame(0.005), Error);
  CHECK_THROWS_AS(ref.sample_point(0.5, Vec::Zero(1)), Error);
}
