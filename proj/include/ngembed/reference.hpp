#pragma once
// Fourier pseudo-spectral reference solvers on periodic boxes (1D and 2D),
// RK4 in time, 2/3-rule dealiasing of quadratic products.

#include <string>
#include <vector>

#include "ngembed/models.hpp"

namespace ngembed {

/// Values on the uniform periodic grid lo + j * L / N (right endpoint
/// excluded). Row index is the flat grid index with the last axis fastest;
/// columns are the m state components.
struct SpectralField {
  std::vector<int> n;
  Box box;
  double t = 0.0;
  Mat values;

  Eigen::Index grid_size() const;
};

/// Grid coordinates along one axis.
Vec grid_axis(const Box& box, int axis, int N);

/// Initial condition of `model` on the N^d grid.
SpectralField grid_initial_condition(const PdeModel& model, int N);

/// Spectral derivative of one real grid component along `axis` (order 1 or 2).
Vec spectral_derivative(const Vec& values, const std::vector<int>& n, const Box& box, int axis,
                        int order);

struct SpectralOptions {
  double dt = 1e-3;
  double T = 0.0;
  std::vector<double> output_times;  // frames to keep; empty keeps only t = 0 and T
  bool dealias = true;
  double cfl_limit = 2.5;  // RK4 stability bound on dt * (max frequency)
};

/// Integrates model from u0 (burgers, wave or swe). Throws ConfigError when dt
/// violates the stability guard and NumericalError (with the time) on blow-up.
std::vector<SpectralField> spectral_solve(const PdeModel& model, const SpectralField& u0,
                                          const SpectralOptions& opts);

/// Stored reference frames with trigonometric interpolation.
class ReferenceSolution {
 public:
  ReferenceSolution() = default;
  ReferenceSolution(std::vector<SpectralField> frames, double dt);

  const std::vector<SpectralField>& frames() const { return frames_; }
  /// Frame stored at t (exact or within dt/2); throws when none is.
  const SpectralField& frame(double t) const;

  /// Trigonometric interpolant at one point.
  Vec sample_point(double t, const Eigen::Ref<const Vec>& x) const;
  /// Rows of `points` are evaluation points; result is n x m.
  Mat sample(double t, const Mat& points) const;
  /// Tensor grid given by per-axis coordinates (last axis fastest), n x m.
  Mat sample_grid(double t, const std::vector<Vec>& axes) const;

 private:
  std::vector<SpectralField> frames_;
  double dt_ = 0.0;
};

/// Rows: trigonometric interpolation weights of grid nodes (N even) at each x.
Mat trig_interpolation_matrix(const Vec& x, double lo, double L, int N);

}  // namespace ngembed
