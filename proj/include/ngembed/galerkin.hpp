#pragma once
// Sampled Neural Galerkin systems and the per-step constrained least squares.

#include <string>
#include <vector>

#include "ngembed/models.hpp"

namespace ngembed {

/// Stacked tangent rows and right-hand side: row s*m + c of A is the
/// parameter gradient of output c at sample s, b holds f at the same rows.
struct SampledSystem {
  Mat A;
  Vec b;
};

SampledSystem assemble_lsq(const Parametrization& net, const ParamVector& theta, const PdeModel& model,
                           const SampleSet& S);

struct MassSystem {
  Mat M;  // (1/n) sum grad grad^T
  Vec F;  // (1/n) sum grad f
};

MassSystem assemble_mf(const Parametrization& net, const ParamVector& theta, const PdeModel& model,
                       const SampleSet& S);

enum class LsqMethod {
  QR,      // Householder QR of [A Z; sqrt(reg) I]
  Normal,  // Cholesky of Z^T (A^T A + reg I) Z, cheaper for tall A
};

LsqMethod lsq_method_from_string(const std::string& s);
std::string to_string(LsqMethod m);

struct LsqOptions {
  double reg = 0.0;  // absolute Tikhonov weight on ||delta||^2
  LsqMethod method = LsqMethod::QR;
  /// Relative pivot threshold for declaring constraint columns dependent.
  double rank_tol = 1e-12;
};

struct LsqSolution {
  Vec delta;
  double residual = 0.0;          // ||A delta - b||
  int active_constraints = 0;     // columns of g kept after rank detection
  std::vector<std::string> warnings;
};

/// min ||A delta - b||^2 + reg ||delta||^2  s.t.  g^T delta = 0.
/// The constraints are eliminated with a QR factorization of g; delta lives
/// in the orthogonal complement of range(g). g may have zero columns.
LsqSolution solve_constrained_lsq(const Mat& A, const Vec& b, const Mat& g,
                                  const LsqOptions& opts);

/// Tikhonov weight relative to the mean diagonal of A^T A.
double relative_reg(const Mat& A, double rel);

}  // namespace ngembed
