#include "ngembed/galerkin.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ngembed {

namespace {

JetRequest galerkin_request(const PdeModel& model) {
  JetRequest req;
  req.order = model.rhs_order();
  req.param_grads = true;
  return req;
}

void check_dims(const Parametrization& net, const PdeModel& model, const SampleSet& S) {
  if (S.size() == 0) throw Error("galerkin: sample set is empty");
  if (net.output_dim() != model.output_dim() || net.input_dim() != model.spatial_dim())
    throw ConstructionError("galerkin: network and model dimensions differ");
  if (S.dim() != model.spatial_dim()) throw ConstructionError("galerkin: sample dimension mismatch");
}

Vec checked_rhs(const PdeModel& model, const Jet& jet, const Eigen::Ref<const Vec>& x) {
  Vec f = model.rhs(jet, x);
  if (!f.allFinite()) {
    std::ostringstream os;
    os << "galerkin: non-finite right-hand side at x = " << x.transpose();
    throw NumericalError(os.str());
  }
  return f;
}

}  // namespace

SampledSystem assemble_lsq(const Parametrization& net, const ParamVector& theta, const PdeModel& model,
                           const SampleSet& S) {
  check_dims(net, model, S);
  const int m = net.output_dim();
  const Eigen::Index n = S.size();
  SampledSystem sys;
  sys.A.resize(n * m, net.num_params());
  sys.b.resize(n * m);
  const JetRequest req = galerkin_request(model);
  // Rows are gathered in small row-major blocks so the copy into the
  // column-major A stays cache-friendly.
  constexpr Eigen::Index kBlock = 32;
  const Eigen::Index nblocks = (n + kBlock - 1) / kBlock;
  detail::parallel_for(nblocks, [&](Eigen::Index blk) {
    const Eigen::Index s0 = blk * kBlock;
    const Eigen::Index cnt = std::min(kBlock, n - s0);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows(cnt * m,
                                                                                sys.A.cols());
    for (Eigen::Index s = s0; s < s0 + cnt; ++s) {
      const Vec x = S.point(s);
      const Jet jet = net.eval(theta, x, req);
      rows.middleRows((s - s0) * m, m) = jet.param_grad();
      sys.b.segment(s * m, m) = checked_rhs(model, jet, x);
    }
    sys.A.middleRows(s0 * m, cnt * m) = rows;
  });
  return sys;
}

MassSystem assemble_mf(const Parametrization& net, const ParamVector& theta, const PdeModel& model,
                       const SampleSet& S) {
  check_dims(net, model, S);
  const Eigen::Index p = net.num_params();
  const Eigen::Index n = S.size();
  const JetRequest req = galerkin_request(model);
  MassSystem out{Mat::Zero(p, p), Vec::Zero(p)};
  for (Eigen::Index s = 0; s < n; ++s) {
    const Vec x = S.point(s);
    const Jet jet = net.eval(theta, x, req);
    const Mat& G = jet.param_grad();
    out.M.noalias() += G.transpose() * G;
    out.F.noalias() += G.transpose() * checked_rhs(model, jet, x);
  }
  out.M /= static_cast<double>(n);
  out.F /= static_cast<double>(n);
  return out;
}

LsqMethod lsq_method_from_string(const std::string& s) {
  if (s == "qr") return LsqMethod::QR;
  if (s == "normal") return LsqMethod::Normal;
  throw ConfigError("unknown least-squares method '" + s + "' (expected qr|normal)");
}

std::string to_string(LsqMethod m) { return m == LsqMethod::QR ? "qr" : "normal"; }

double relative_reg(const Mat& A, double rel) {
  if (A.cols() == 0) return 0.0;
  return rel * A.colwise().squaredNorm().mean();
}

LsqSolution solve_constrained_lsq(const Mat& A, const Vec& b, const Mat& g,
                                  const LsqOptions& opts) {
  const Eigen::Index p = A.cols();
  if (b.size() != A.rows()) throw ConstructionError("lsq: A and b row counts differ");
  if (g.cols() > 0 && g.rows() != p) throw ConstructionError("lsq: g must have p rows");
  if (g.cols() > p) throw ConstructionError("lsq: more constraints than unknowns");
  if (opts.reg < 0.0) throw ConstructionError("lsq: regularization must be nonnegative");

  LsqSolution sol;

  // Null-space basis of g^T: trailing columns of the orthogonal factor of g.
  Eigen::ColPivHouseholderQR<Mat> gqr;
  Eigen::Index rank = 0;
  if (g.cols() > 0) {
    gqr.setThreshold(opts.rank_tol);
    gqr.compute(g);
    rank = gqr.rank();
    if (rank < g.cols()) {
      std::ostringstream os;
      os << "constraint gradients are rank deficient (" << rank << " of " << g.cols()
         << "); dropped " << (g.cols() - rank) << " dependent column(s)";
      sol.warnings.push_back(os.str());
    }
  }
  sol.active_constraints = static_cast<int>(rank);
  const Eigen::Index nz = p - rank;

  Vec z;
  if (nz == 0) {
    z.resize(0);
  } else if (opts.method == LsqMethod::QR) {
    Mat AQ = A;
    if (rank > 0) AQ.applyOnTheRight(gqr.householderQ());
    if (opts.reg > 0.0) {
      Mat aug(A.rows() + nz, nz);
      aug.topRows(A.rows()) = AQ.rightCols(nz);
      aug.bottomRows(nz) = std::sqrt(opts.reg) * Mat::Identity(nz, nz);
      Vec rhs = Vec::Zero(A.rows() + nz);
      rhs.head(A.rows()) = b;
      z = Eigen::HouseholderQR<Mat>(aug).solve(rhs);
    } else {
      Eigen::ColPivHouseholderQR<Mat> qr(AQ.rightCols(nz));
      if (qr.rank() < nz)
        throw NumericalError("lsq: A restricted to the constraint null space is rank deficient");
      z = qr.solve(b);
    }
  } else {
    Mat H = Mat::Zero(p, p);
    H.selfadjointView<Eigen::Lower>().rankUpdate(A.transpose());
    H.triangularView<Eigen::StrictlyUpper>() = H.transpose();
    Vec r = A.transpose() * b;
    if (rank > 0) {
      H.applyOnTheLeft(gqr.householderQ().transpose());
      H.applyOnTheRight(gqr.householderQ());
      r.applyOnTheLeft(gqr.householderQ().transpose());
    }
    Mat N = H.bottomRightCorner(nz, nz);
    N.diagonal().array() += opts.reg;
    Eigen::LLT<Mat> llt(N);
    if (llt.info() != Eigen::Success)
      throw NumericalError("lsq: normal matrix in the constraint null space is not positive definite");
    z = llt.solve(r.tail(nz));
  }

  sol.delta = Vec::Zero(p);
  sol.delta.tail(nz) = z;
  if (rank > 0) sol.delta.applyOnTheLeft(gqr.householderQ());
  if (!sol.delta.allFinite()) throw NumericalError("lsq: non-finite solution");
  sol.residual = (A * sol.delta - b).norm();
  return sol;
}

}  // namespace ngembed
