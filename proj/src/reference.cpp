#include "ngembed/reference.hpp"

#include <cmath>
#include <complex>
#include <memory>
#include <numbers>
#include <sstream>

#include <fftw3.h>

namespace ngembed {

namespace {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Real <-> half-complex transforms on one periodic grid. Spectral arrays hold
// normalized coefficients, so backward(forward(u)) == u.
class SpectralGrid {
 public:
  SpectralGrid(std::vector<int> n, const Box& box) : n_(std::move(n)), box_(box) {
    if (n_.empty() || n_.size() > 2) throw ConfigError("spectral: only 1D and 2D grids are supported");
    if (static_cast<int>(n_.size()) != box.dim()) throw ConfigError("spectral: grid/box dimension mismatch");
    real_size_ = 1;
    for (int N : n_) {
      if (N < 4 || N % 2) throw ConfigError("spectral: grid sizes must be even and at least 4");
      real_size_ *= N;
    }
    half_ = n_.back() / 2 + 1;
    cplx_size_ = real_size_ / n_.back() * half_;
    rbuf_ = fftw_alloc_real(real_size_);
    cbuf_ = fftw_alloc_complex(cplx_size_);
    const int rank = static_cast<int>(n_.size());
    fwd_ = fftw_plan_dft_r2c(rank, n_.data(), rbuf_, cbuf_, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_c2r(rank, n_.data(), cbuf_, rbuf_, FFTW_ESTIMATE);

    for (int a = 0; a < rank; ++a) kappa_max_.push_back(2.0 * std::numbers::pi * (n_[a] / 2) / box.periods()[a]);
    wave_.assign(rank, std::vector<double>(cplx_size_));
    nyquist_.assign(rank, std::vector<char>(cplx_size_));
    keep_.assign(cplx_size_, 1);
    for (std::size_t idx = 0; idx < cplx_size_; ++idx) {
      int k[2];
      if (rank == 1) {
        k[0] = static_cast<int>(idx);
      } else {
        const int i = static_cast<int>(idx / half_);
        k[0] = i <= n_[0] / 2 ? i : i - n_[0];
        k[1] = static_cast<int>(idx % half_);
      }
      for (int a = 0; a < rank; ++a) {
        wave_[a][idx] = 2.0 * std::numbers::pi * k[a] / box.periods()[a];
        nyquist_[a][idx] = std::abs(k[a]) == n_[a] / 2;
        if (3 * std::abs(k[a]) >= n_[a]) keep_[idx] = 0;
      }
    }
  }
  ~SpectralGrid() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(rbuf_);
    fftw_free(cbuf_);
  }
  SpectralGrid(const SpectralGrid&) = delete;
  SpectralGrid& operator=(const SpectralGrid&) = delete;

  std::size_t real_size() const { return real_size_; }
  std::size_t cplx_size() const { return cplx_size_; }
  int rank() const { return static_cast<int>(n_.size()); }

  CVec forward(const double* u) {
    std::copy(u, u + real_size_, rbuf_);
    fftw_execute(fwd_);
    CVec out(cplx_size_);
    const double s = 1.0 / static_cast<double>(real_size_);
    for (std::size_t i = 0; i < cplx_size_; ++i) out[i] = cplx(cbuf_[i][0], cbuf_[i][1]) * s;
    return out;
  }
  Vec backward(const CVec& U) {
    for (std::size_t i = 0; i < cplx_size_; ++i) {
      cbuf_[i][0] = U[i].real();
      cbuf_[i][1] = U[i].imag();
    }
    fftw_execute(bwd_);
    return Eigen::Map<const Vec>(rbuf_, static_cast<Eigen::Index>(real_size_));
  }

  /// Multiply by (i kappa_axis)^order; odd orders drop the Nyquist mode.
  CVec derivative(const CVec& U, int axis, int order) const {
    CVec out(cplx_size_);
    const auto& kap = wave_[axis];
    for (std::size_t i = 0; i < cplx_size_; ++i) {
      if (order % 2 == 1 && nyquist_[axis][i]) {
        out[i] = 0.0;
        continue;
      }
      cplx f = 1.0;
      for (int o = 0; o < order; ++o) f *= cplx(0.0, kap[i]);
      out[i] = f * U[i];
    }
    return out;
  }

  void dealias(CVec& U) const {
    for (std::size_t i = 0; i < cplx_size_; ++i)
      if (!keep_[i]) U[i] = 0.0;
  }

  /// Largest |kappa| represented (or kept, when dealiasing).
  double kappa_norm(bool dealias) const {
    double s = 0.0;
    for (double k : kappa_max_) {
      const double kk = dealias ? k * 2.0 / 3.0 : k;
      s += kk * kk;
    }
    return std::sqrt(s);
  }

 private:
  std::vector<int> n_;
  Box box_;
  std::size_t real_size_ = 0, cplx_size_ = 0, half_ = 0;
  double* rbuf_ = nullptr;
  fftw_complex* cbuf_ = nullptr;
  fftw_plan fwd_ = nullptr, bwd_ = nullptr;
  std::vector<double> kappa_max_;
  std::vector<std::vector<double>> wave_;
  std::vector<std::vector<char>> nyquist_;
  std::vector<char> keep_;
};

using State = std::vector<CVec>;

void axpy(State& y, double a, const State& x) {
  for (std::size_t c = 0; c < y.size(); ++c)
    for (std::size_t i = 0; i < y[c].size(); ++i) y[c][i] += a * x[c][i];
}

enum class Kind { Burgers, Wave, Swe };

struct Rhs {
  Kind kind;
  SpectralGrid& grid;
  bool dealias;
  double c = 1.0, rho_bar = 1.0;
  double max_freq = 0.0;  // set on every call
  bool finite = true;

  State operator()(const State& U) {
    State out(U.size());
    switch (kind) {
      case Kind::Burgers: {
        // conservative form u_t = -(u^2 / 2)_x
        const Vec u = grid.backward(U[0]);
        finite = u.allFinite();
        max_freq = u.cwiseAbs().maxCoeff() * grid.kappa_norm(dealias);
        const Vec w = 0.5 * u.cwiseProduct(u);
        CVec W = grid.forward(w.data());
        out[0] = grid.derivative(W, 0, 1);
        for (auto& v : out[0]) v = -v;
        break;
      }
      case Kind::Wave: {
        out[0] = grid.derivative(U[1], 0, 1);
        out[1] = grid.derivative(U[0], 0, 1);
        for (auto& v : out[0]) v *= -rho_bar;
        for (auto& v : out[1]) v *= -(c * c / rho_bar);
        finite = true;
        for (const auto& v : U[0]) finite = finite && std::isfinite(std::abs(v));
        max_freq = c * grid.kappa_norm(false);
        break;
      }
      case Kind::Swe: {
        const Vec h = grid.backward(U[0]);
        const Vec px = grid.backward(grid.derivative(U[1], 0, 1));
        const Vec py = grid.backward(grid.derivative(U[1], 1, 1));
        finite = h.allFinite() && px.allFinite() && py.allFinite();
        const Vec H = h.array() + 1.0;
        const Vec speed = (px.cwiseProduct(px) + py.cwiseProduct(py)).cwiseSqrt();
        max_freq = (speed.maxCoeff() + std::sqrt(std::max(H.maxCoeff(), 0.0))) *
                   grid.kappa_norm(dealias);
        const Vec fx = H.cwiseProduct(px);
        const Vec fy = H.cwiseProduct(py);
        const Vec ke = 0.5 * (px.cwiseProduct(px) + py.cwiseProduct(py));
        const CVec Fx = grid.forward(fx.data());
        const CVec Fy = grid.forward(fy.data());
        const CVec KE = grid.forward(ke.data());
        const CVec dFx = grid.derivative(Fx, 0, 1);
        const CVec dFy = grid.derivative(Fy, 1, 1);
        out[0].resize(grid.cplx_size());
        out[1].resize(grid.cplx_size());
        for (std::size_t i = 0; i < grid.cplx_size(); ++i) {
          out[0][i] = -(dFx[i] + dFy[i]);
          out[1][i] = -KE[i] - U[0][i];
        }
        break;
      }
    }
    if (dealias && kind != Kind::Wave)
      for (auto& o : out) grid.dealias(o);
    return out;
  }
};

Kind kind_of(const PdeModel& model) {
  const std::string n = model.name();
  if (n == "burgers") return Kind::Burgers;
  if (n == "wave") return Kind::Wave;
  if (n == "swe") return Kind::Swe;
  throw ConfigError("spectral: no reference solver for model '" + n + "'");
}

// Periodic sinc weight of a node at signed cell offset r (even N).
double trig_weight(double r, int N) {
  r = std::remainder(r, static_cast<double>(N));
  const double ri = std::round(r);
  if (std::abs(r - ri) <= 1e-13 * std::max(1.0, std::abs(r))) return ri == 0.0 ? 1.0 : 0.0;
  const double pi = std::numbers::pi;
  return std::sin(pi * r) * std::cos(pi * r / N) / (N * std::sin(pi * r / N));
}

}  // namespace

Eigen::Index SpectralField::grid_size() const {
  Eigen::Index s = 1;
  for (int N : n) s *= N;
  return s;
}

Vec grid_axis(const Box& box, int axis, int N) {
  const double h = (box.hi[axis] - box.lo[axis]) / N;
  Vec x(N);
  for (int j = 0; j < N; ++j) x[j] = box.lo[axis] + j * h;
  return x;
}

SpectralField grid_initial_condition(const PdeModel& model, int N) {
  if (N < 4 || N % 2) throw ConfigError("spectral: grid sizes must be even and at least 4");
  SpectralField f;
  f.box = model.domain();
  const int d = f.box.dim();
  f.n.assign(d, N);
  f.t = 0.0;
  const Eigen::Index R = f.grid_size();
  f.values.resize(R, model.output_dim());
  std::vector<Vec> axes;
  for (int a = 0; a < d; ++a) axes.push_back(grid_axis(f.box, a, N));
  Vec x(d);
  for (Eigen::Index idx = 0; idx < R; ++idx) {
    Eigen::Index rem = idx;
    for (int a = d - 1; a >= 0; --a) {
      x[a] = axes[a][rem % N];
      rem /= N;
    }
    f.values.row(idx) = model.initial_condition(x).transpose();
  }
  return f;
}

Vec spectral_derivative(const Vec& values, const std::vector<int>& n, const Box& box, int axis,
                        int order) {
  SpectralGrid grid(n, box);
  if (values.size() != static_cast<Eigen::Index>(grid.real_size()))
    throw ConstructionError("spectral derivative: value count does not match the grid");
  if (axis < 0 || axis >= grid.rank() || order < 1 || order > 2)
    throw ConstructionError("spectral derivative: bad axis or order");
  return grid.backward(grid.derivative(grid.forward(values.data()), axis, order));
}

std::vector<SpectralField> spectral_solve(const PdeModel& model, const SpectralField& u0,
                                          const SpectralOptions& opts) {
  const Kind kind = kind_of(model);
  if (!(opts.dt > 0.0) || !(opts.T >= 0.0)) throw ConfigError("spectral: need dt > 0 and T >= 0");
  const double kf = std::round(opts.T / opts.dt);
  if (std::abs(kf * opts.dt - opts.T) > 1e-9 * opts.dt)
    throw ConfigError("spectral: T must be an integer multiple of dt");
  const long K = static_cast<long>(kf);
  if (u0.values.cols() != model.output_dim())
    throw ConstructionError("spectral: initial field has the wrong number of components");

  std::vector<long> out_steps;
  if (opts.output_times.empty()) {
    out_steps = {0, K};
  } else {
    for (double t : opts.output_times) {
      const double s = std::round(t / opts.dt);
      if (std::abs(s * opts.dt - t) > 1e-9 * opts.dt || s < 0 || s > K) {
        std::ostringstream os;
        os << "spectral: output time " << t << " is not a step time in [0, " << opts.T << "]";
        throw ConfigError(os.str());
      }
      out_steps.push_back(static_cast<long>(s));
    }
  }

  SpectralGrid grid(u0.n, u0.box);
  if (u0.values.rows() != static_cast<Eigen::Index>(grid.real_size()))
    throw ConstructionError("spectral: initial field does not match the grid");

  Rhs rhs{kind, grid, opts.dealias && kind != Kind::Wave};
  if (kind == Kind::Wave) {
    const auto* w = dynamic_cast<const WaveModel*>(&model);
    if (!w) throw ConfigError("spectral: wave model has unexpected type");
    rhs.c = w->c();
    rhs.rho_bar = w->rho_bar();
  }

  State U(u0.values.cols());
  for (Eigen::Index c = 0; c < u0.values.cols(); ++c) {
    const Vec col = u0.values.col(c);
    U[c] = grid.forward(col.data());
    if (rhs.dealias) grid.dealias(U[c]);
  }

  std::vector<SpectralField> frames;
  auto snapshot = [&](long k) {
    SpectralField f;
    f.n = u0.n;
    f.box = u0.box;
    f.t = static_cast<double>(k) * opts.dt;
    f.values.resize(u0.values.rows(), u0.values.cols());
    for (std::size_t c = 0; c < U.size(); ++c) f.values.col(c) = grid.backward(U[c]);
    return f;
  };
  auto emit = [&](long k) {
    for (long s : out_steps)
      if (s == k) {
        frames.push_back(snapshot(k));
        break;
      }
  };
  emit(0);

  const double dt = opts.dt;
  for (long k = 0; k < K; ++k) {
    const State k1 = rhs(U);
    const double t = k * dt;
    if (!rhs.finite) {
      std::ostringstream os;
      os << "spectral: non-finite solution at t = " << t;
      throw NumericalError(os.str());
    }
    if (dt * rhs.max_freq > opts.cfl_limit) {
      std::ostringstream os;
      os << "spectral: dt = " << dt << " exceeds the RK4 stability bound for this grid at t = "
         << t << " (dt * max frequency = " << dt * rhs.max_freq << ")";
      if (k == 0) throw ConfigError(os.str());
      throw NumericalError(os.str());
    }
    State tmp = U;
    axpy(tmp, 0.5 * dt, k1);
    const State k2 = rhs(tmp);
    tmp = U;
    axpy(tmp, 0.5 * dt, k2);
    const State k3 = rhs(tmp);
    tmp = U;
    axpy(tmp, dt, k3);
    const State k4 = rhs(tmp);
    axpy(U, dt / 6.0, k1);
    axpy(U, dt / 3.0, k2);
    axpy(U, dt / 3.0, k3);
    axpy(U, dt / 6.0, k4);
    emit(k + 1);
  }
  for (const auto& f : frames)
    if (!f.values.allFinite()) {
      std::ostringstream os;
      os << "spectral: non-finite solution at t = " << f.t;
      throw NumericalError(os.str());
    }
  return frames;
}

ReferenceSolution::ReferenceSolution(std::vector<SpectralField> frames, double dt)
    : frames_(std::move(frames)), dt_(dt) {
  if (frames_.empty()) throw ConstructionError("reference: no frames");
}

const SpectralField& ReferenceSolution::frame(double t) const {
  const SpectralField* best = nullptr;
  double best_dist = 0.0;
  for (const auto& f : frames_) {
    const double dist = std::abs(f.t - t);
    if (!best || dist < best_dist) {
      best = &f;
      best_dist = dist;
    }
  }
  if (!best || (best_dist > 0.5 * dt_ && best_dist > 1e-12 * std::max(1.0, std::abs(t)))) {
    std::ostringstream os;
    os << "reference: no stored frame at t = " << t;
    throw Error(os.str());
  }
  return *best;
}

Mat trig_interpolation_matrix(const Vec& x, double lo, double L, int N) {
  if (N % 2) throw ConstructionError("trig interpolation needs an even grid size");
  Mat C(x.size(), N);
  const double h = L / N;
  for (Eigen::Index s = 0; s < x.size(); ++s) {
    const double pos = (x[s] - lo) / h;
    for (int a = 0; a < N; ++a) C(s, a) = trig_weight(pos - a, N);
  }
  return C;
}

Mat ReferenceSolution::sample(double t, const Mat& points) const {
  const SpectralField& f = frame(t);
  const int d = f.box.dim();
  if (points.cols() != d) throw ConstructionError("reference: point dimension mismatch");
  const Eigen::Index m = f.values.cols();
  Mat out(points.rows(), m);
  std::vector<Mat> C;
  for (int a = 0; a < d; ++a)
    C.push_back(trig_interpolation_matrix(points.col(a), f.box.lo[a], f.box.periods()[a], f.n[a]));
  if (d == 1) {
    out = C[0] * f.values;
  } else {
    for (Eigen::Index c = 0; c < m; ++c) {
      Eigen::Map<const RowMat> U(f.values.col(c).data(), f.n[0], f.n[1]);
      const Mat T = U * C[1].transpose();  // n0 x npts
      out.col(c) = (C[0].array() * T.transpose().array()).rowwise().sum();
    }
  }
  return out;
}

Vec ReferenceSolution::sample_point(double t, const Eigen::Ref<const Vec>& x) const {
  return sample(t, Mat(x.transpose())).row(0).transpose();
}

Mat ReferenceSolution::sample_grid(double t, const std::vector<Vec>& axes) const {
  const SpectralField& f = frame(t);
  const int d = f.box.dim();
  if (static_cast<int>(axes.size()) != d) throw ConstructionError("reference: axis count mismatch");
  const Eigen::Index m = f.values.cols();
  if (d == 1) {
    return trig_interpolation_matrix(axes[0], f.box.lo[0], f.box.periods()[0], f.n[0]) * f.values;
  }
  const Mat Cx = trig_interpolation_matrix(axes[0], f.box.lo[0], f.box.periods()[0], f.n[0]);
  const Mat Cy = trig_interpolation_matrix(axes[1], f.box.lo[1], f.box.periods()[1], f.n[1]);
  Mat out(axes[0].size() * axes[1].size(), m);
  for (Eigen::Index c = 0; c < m; ++c) {
    Eigen::Map<const RowMat> U(f.values.col(c).data(), f.n[0], f.n[1]);
    const RowMat G = Cx * U * Cy.transpose();
    out.col(c) = Eigen::Map<const Vec>(G.data(), G.size());
  }
  return out;
}

}  // namespace ngembed
