#include "aiga/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include "aiga/bspline.hpp"
#include "aiga/error.hpp"

namespace aiga {

namespace {

struct Rule {
  std::vector<double> x, w;
};

/// Gauss-Legendre rule on [0,1].
const Rule& gauss(int n) {
  static std::mutex mu;
  static std::map<int, Rule> cache;
  std::lock_guard lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  Rule r;
  for (int i = 0; i < n; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0;
    for (int it2 = 0; it2 < 100; ++it2) {
      double p0 = 1, p1 = 0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    r.x.push_back((1 - z) / 2);
    r.w.push_back(1.0 / ((1 - z * z) * dp * dp));
  }
  return cache.emplace(n, std::move(r)).first->second;
}

/// Values and derivatives (columns 0..2) of all B-splines of an open knot vector.
Eigen::MatrixXd basis_1d(const std::vector<double>& knots, int p, double x, int side) {
  const int n = static_cast<int>(knots.size()) - p - 1;
  Eigen::MatrixXd out(n, 3);
  std::vector<double> m(p + 2);
  for (int i = 0; i < n; ++i) {
    const std::span<const double> local(knots.data() + i, p + 2);
    // one-sided limits from outside the support vanish, except at the ends of the domain
    const bool outside = side > 0 ? (x >= local.back() && x < knots.back()) : (x <= local.front() && x > knots.front());
    if (outside) {
      out.row(i).setZero();
    } else if (side > 0) {
      for (int d = 0; d < 3; ++d) out(i, d) = bspline_eval(local, x, d);
    } else {
      for (int k = 0; k <= p + 1; ++k) m[k] = -local[p + 1 - k];
      for (int d = 0; d < 3; ++d) out(i, d) = (d % 2 ? -1.0 : 1.0) * bspline_eval(m, -x, d);
    }
  }
  return out;
}

Eigen::Vector2d outward(Side s) {
  switch (s) {
    case Side::Left: return {-1, 0};
    case Side::Right: return {1, 0};
    case Side::Bottom: return {0, -1};
    case Side::Top: return {0, 1};
  }
  return {0, 0};
}

/// Basis data of one cell at one point.
struct PointBasis {
  GeometryPoint geo;
  double det = 0;
  Eigen::Matrix2d jinv;
  Eigen::VectorXd N;
  Eigen::MatrixXd dN;   // n x 2, physical gradient
  Eigen::MatrixXd d2N;  // n x 3, physical xx, xy, yy
};

class CellEvaluator {
 public:
  CellEvaluator(const ProblemData& data, const SplineSpace& space) : data_(data), space_(space) {
    const int nb = (space.p + 1) * (space.q + 1);
    B_.resize(nb);
    Bu_.resize(nb);
    Bv_.resize(nb);
    Buu_.resize(nb);
    Buv_.resize(nb);
    Bvv_.resize(nb);
  }

  void eval(const BezierElement& c, double s, double t, bool second, PointBasis& out) {
    const int p = space_.p, q = space_.q;
    std::vector<double> bu(p + 1), dbu(p + 1), d2bu(p + 1), bv(q + 1), dbv(q + 1), d2bv(q + 1);
    bernstein_derivs(p, s, bu.data(), dbu.data(), d2bu.data());
    bernstein_derivs(q, t, bv.data(), dbv.data(), d2bv.data());
    const double du = c.param.du(), dv = c.param.dv();
    for (int i = 0; i <= p; ++i)
      for (int j = 0; j <= q; ++j) {
        const int k = i * (q + 1) + j;
        B_[k] = bu[i] * bv[j];
        Bu_[k] = dbu[i] * bv[j] / du;
        Bv_[k] = bu[i] * dbv[j] / dv;
        if (second) {
          Buu_[k] = d2bu[i] * bv[j] / (du * du);
          Buv_[k] = dbu[i] * dbv[j] / (du * dv);
          Bvv_[k] = bu[i] * d2bv[j] / (dv * dv);
        }
      }
    const double u = c.param.u0 + s * du, v = c.param.v0 + t * dv;
    out.geo = geometry_eval(data_.geometry, u, v, second, s >= 1.0 ? -1 : 1, t >= 1.0 ? -1 : 1);
    out.det = out.geo.jacobian.determinant();
    if (!(out.det > 0)) throw Error(ErrorCode::DegenerateJacobian, "non-positive Jacobian determinant");
    out.jinv = out.geo.jacobian.inverse();
    const auto& E = c.extraction;
    out.N = E * B_;
    Eigen::MatrixXd dxi(E.rows(), 2);
    dxi.col(0) = E * Bu_;
    dxi.col(1) = E * Bv_;
    out.dN = dxi * out.jinv;
    if (second) {
      const Eigen::VectorXd nuu = E * Buu_, nuv = E * Buv_, nvv = E * Bvv_;
      out.d2N.resize(E.rows(), 3);
      const auto& G = out.geo.hessian;
      for (Eigen::Index k = 0; k < E.rows(); ++k) {
        Eigen::Matrix2d h;
        h << nuu[k], nuv[k], nuv[k], nvv[k];
        h -= out.dN(k, 0) * G[0] + out.dN(k, 1) * G[1];
        const Eigen::Matrix2d hx = out.jinv.transpose() * h * out.jinv;
        out.d2N(k, 0) = hx(0, 0);
        out.d2N(k, 1) = hx(0, 1);
        out.d2N(k, 2) = hx(1, 1);
      }
    }
  }

 private:
  const ProblemData& data_;
  const SplineSpace& space_;
  Eigen::VectorXd B_, Bu_, Bv_, Buu_, Buv_, Bvv_;
};

/// Boundary sides covered by a cell side (at most one per side).
struct CellSide {
  Side side;
  // local coordinate fixed on this side: s or t equal to 0 or 1
  bool along_u;  // side is parallel to u
  double fixed;  // 0 or 1
};

std::vector<CellSide> boundary_sides(const SplineSpace& space, const BezierElement& c) {
  std::vector<CellSide> out;
  if (c.param.u0 == 0) out.push_back({Side::Left, false, 0});
  if (c.param.u1 == space.width) out.push_back({Side::Right, false, 1});
  if (c.param.v0 == 0) out.push_back({Side::Bottom, true, 0});
  if (c.param.v1 == space.height) out.push_back({Side::Top, true, 1});
  return out;
}

double side_coordinate_mid(const BezierElement& c, const CellSide& s) {
  return s.along_u ? 0.5 * (c.param.u0 + c.param.u1) : 0.5 * (c.param.v0 + c.param.v1);
}

/// Outward unit normal and line element factor at a side point.
std::pair<Eigen::Vector2d, double> side_frame(const PointBasis& pb, const BezierElement& c, const CellSide& s,
                                              Side normal_side) {
  Eigen::Vector2d n = pb.jinv.transpose() * outward(normal_side);
  n.normalize();
  const Eigen::Vector2d tangent = s.along_u ? Eigen::Vector2d(pb.geo.jacobian.col(0) * c.param.du())
                                            : Eigen::Vector2d(pb.geo.jacobian.col(1) * c.param.dv());
  return {n, tangent.norm()};
}

Eigen::Matrix2d stress(const Material& m, const Eigen::Matrix2d& grad) {
  const Eigen::Matrix2d eps = 0.5 * (grad + grad.transpose());
  return m.lambda() * eps.trace() * Eigen::Matrix2d::Identity() + 2 * m.mu() * eps;
}

}  // namespace

int components(ProblemKind kind) { return kind == ProblemKind::Elasticity ? 2 : 1; }

void GeometryMap::validate() const {
  if (p < 1 || q < 1 || nu() < 1 || nv() < 1) throw Error(ErrorCode::InvalidArgument, "bad geometry degrees");
  if (points.size() != static_cast<std::size_t>(nu() * nv()) || weights.size() != points.size())
    throw Error(ErrorCode::InvalidArgument, "control net size mismatch");
  for (double w : weights)
    if (!(w > 0)) throw Error(ErrorCode::InvalidArgument, "weights must be positive");
  for (const auto* k : {&knots_u, &knots_v})
    if (!std::is_sorted(k->begin(), k->end())) throw Error(ErrorCode::InvalidKnots, "knots not sorted");
  if (knots_u.front() != 0 || knots_v.front() != 0) throw Error(ErrorCode::InvalidKnots, "parametric domain must start at 0");
}

GeometryMap GeometryMap::identity(double w, double h) {
  GeometryMap g;
  g.knots_u = {0, 0, w, w};
  g.knots_v = {0, 0, h, h};
  g.points = {{0, 0}, {w, 0}, {0, h}, {w, h}};
  g.weights.assign(4, 1.0);
  return g;
}

GeometryPoint geometry_eval(const GeometryMap& g, double u, double v, bool second, int side_u, int side_v) {
  const Eigen::MatrixXd bu = basis_1d(g.knots_u, g.p, u, side_u);
  const Eigen::MatrixXd bv = basis_1d(g.knots_v, g.q, v, side_v);
  Eigen::Vector2d A = Eigen::Vector2d::Zero(), Au = A, Av = A, Auu = A, Auv = A, Avv = A;
  double W = 0, Wu = 0, Wv = 0, Wuu = 0, Wuv = 0, Wvv = 0;
  const int nu = g.nu();
  for (int j = 0; j < g.nv(); ++j)
    for (int i = 0; i < nu; ++i) {
      const double w = g.weights[i + nu * j];
      const Eigen::Vector2d& P = g.points[i + nu * j];
      const double n = bu(i, 0) * bv(j, 0), nu_ = bu(i, 1) * bv(j, 0), nv_ = bu(i, 0) * bv(j, 1);
      W += w * n;
      Wu += w * nu_;
      Wv += w * nv_;
      A += w * n * P;
      Au += w * nu_ * P;
      Av += w * nv_ * P;
      if (second) {
        const double nuu = bu(i, 2) * bv(j, 0), nuv = bu(i, 1) * bv(j, 1), nvv = bu(i, 0) * bv(j, 2);
        Wuu += w * nuu;
        Wuv += w * nuv;
        Wvv += w * nvv;
        Auu += w * nuu * P;
        Auv += w * nuv * P;
        Avv += w * nvv * P;
      }
    }
  GeometryPoint out;
  out.x = A / W;
  const Eigen::Vector2d xu = (Au - out.x * Wu) / W, xv = (Av - out.x * Wv) / W;
  out.jacobian.col(0) = xu;
  out.jacobian.col(1) = xv;
  out.hessian = {Eigen::Matrix2d::Zero(), Eigen::Matrix2d::Zero()};
  if (second) {
    const Eigen::Vector2d xuu = (Auu - 2 * xu * Wu - out.x * Wuu) / W;
    const Eigen::Vector2d xuv = (Auv - xu * Wv - xv * Wu - out.x * Wuv) / W;
    const Eigen::Vector2d xvv = (Avv - 2 * xv * Wv - out.x * Wvv) / W;
    for (int k = 0; k < 2; ++k) out.hessian[k] << xuu[k], xuv[k], xuv[k], xvv[k];
  }
  return out;
}

LinearSystem assemble(const ProblemData& data, const SplineSpace& space, int extra_quadrature, bool constrain) {
  const int nc = components(data.kind);
  LinearSystem sys;
  sys.components = nc;
  sys.num_dofs = space.num_functions * nc;

  std::vector<char> fixed(sys.num_dofs, 0);
  if (constrain && data.dirichlet) {
    for (const auto& c : space.cells)
      for (const auto& s : boundary_sides(space, c)) {
        const unsigned mask = data.dirichlet(s.side, side_coordinate_mid(c, s));
        if (!mask) continue;
        for (Eigen::Index r = 0; r < c.extraction.rows(); ++r) {
          bool touches = false;
          for (int i = 0; i <= space.p && !touches; ++i)
            for (int j = 0; j <= space.q && !touches; ++j) {
              const bool on = s.along_u ? (j == (s.fixed == 0 ? 0 : space.q)) : (i == (s.fixed == 0 ? 0 : space.p));
              touches = on && std::abs(c.extraction(r, i * (space.q + 1) + j)) > 1e-13;
            }
          if (!touches) continue;
          for (int comp = 0; comp < nc; ++comp)
            if (mask & (1u << comp)) fixed[c.active_ids[r] * nc + comp] = 1;
        }
      }
  }
  sys.free_index.assign(sys.num_dofs, -1);
  for (std::size_t d = 0; d < sys.num_dofs; ++d)
    if (!fixed[d]) {
      sys.free_index[d] = static_cast<std::ptrdiff_t>(sys.free_dofs.size());
      sys.free_dofs.push_back(d);
    }
  const auto n = static_cast<Eigen::Index>(sys.free_dofs.size());
  sys.b = Eigen::VectorXd::Zero(n);

  std::vector<Eigen::Triplet<double>> trip;
  CellEvaluator ev(data, space);
  PointBasis pb;
  const Rule& ru = gauss(space.p + 1 + extra_quadrature);
  const Rule& rv = gauss(space.q + 1 + extra_quadrature);
  const Material& mat = data.material;
  const double lam = mat.lambda(), mu = mat.mu();
  Eigen::MatrixXd K;
  Eigen::VectorXd F;
  std::vector<std::ptrdiff_t> map;
  for (const auto& c : space.cells) {
    const auto na = static_cast<Eigen::Index>(c.active_ids.size());
    K.setZero(na * nc, na * nc);
    F.setZero(na * nc);
    for (std::size_t a = 0; a < ru.x.size(); ++a)
      for (std::size_t b = 0; b < rv.x.size(); ++b) {
        ev.eval(c, ru.x[a], rv.x[b], false, pb);
        const double w = ru.w[a] * rv.w[b] * c.param.du() * c.param.dv() * pb.det;
        if (nc == 1) {
          K.noalias() += w * pb.dN * pb.dN.transpose();
        } else {
          const Eigen::VectorXd gx = pb.dN.col(0), gy = pb.dN.col(1);
          const Eigen::MatrixXd xx = gx * gx.transpose(), yy = gy * gy.transpose(), xy = gx * gy.transpose();
          for (Eigen::Index k = 0; k < na; ++k)
            for (Eigen::Index l = 0; l < na; ++l) {
              const double dot = xx(k, l) + yy(k, l);
              K(2 * k, 2 * l) += w * (lam * xx(k, l) + mu * (dot + xx(k, l)));
              K(2 * k + 1, 2 * l + 1) += w * (lam * yy(k, l) + mu * (dot + yy(k, l)));
              // (k,x)-(l,y): lam dxNk dyNl + mu dyNk dxNl
              K(2 * k, 2 * l + 1) += w * (lam * xy(k, l) + mu * xy(l, k));
              K(2 * k + 1, 2 * l) += w * (lam * xy(l, k) + mu * xy(k, l));
            }
        }
        if (data.kind != ProblemKind::MatrixOnly && data.source) {
          const Eigen::Vector2d f = data.source(pb.geo.x);
          for (Eigen::Index k = 0; k < na; ++k)
            for (int comp = 0; comp < nc; ++comp) F[k * nc + comp] += w * f[comp] * pb.N[k];
        }
      }
    if (data.kind != ProblemKind::MatrixOnly && data.neumann) {
      for (const auto& s : boundary_sides(space, c)) {
        const unsigned mask = data.dirichlet ? data.dirichlet(s.side, side_coordinate_mid(c, s)) : 0u;
        if (mask == (nc == 1 ? 1u : 3u)) continue;
        const Rule& r = s.along_u ? ru : rv;
        for (std::size_t a = 0; a < r.x.size(); ++a) {
          const double sl = s.along_u ? r.x[a] : s.fixed, tl = s.along_u ? s.fixed : r.x[a];
          ev.eval(c, sl, tl, false, pb);
          const auto [normal, ds] = side_frame(pb, c, s, s.side);
          const Eigen::Vector2d g = data.neumann(pb.geo.x, normal);
          for (Eigen::Index k = 0; k < na; ++k)
            for (int comp = 0; comp < nc; ++comp)
              if (!(mask & (1u << comp))) F[k * nc + comp] += r.w[a] * ds * g[comp] * pb.N[k];
        }
      }
    }
    map.resize(na * nc);
    for (Eigen::Index k = 0; k < na; ++k)
      for (int comp = 0; comp < nc; ++comp) map[k * nc + comp] = sys.free_index[c.active_ids[k] * nc + comp];
    for (Eigen::Index r = 0; r < na * nc; ++r) {
      if (map[r] < 0) continue;
      sys.b[map[r]] += F[r];
      for (Eigen::Index s = 0; s < na * nc; ++s)
        if (map[s] >= 0) trip.emplace_back(map[r], map[s], K(r, s));
    }
  }
  sys.A.resize(n, n);
  sys.A.setFromTriplets(trip.begin(), trip.end());
  sys.A.makeCompressed();
  return sys;
}

double relative_residual(const LinearSystem& sys, const Eigen::VectorXd& full) {
  Eigen::VectorXd x(sys.free_dofs.size());
  for (std::size_t k = 0; k < sys.free_dofs.size(); ++k) x[k] = full[sys.free_dofs[k]];
  const double nb = sys.b.norm();
  const double r = (sys.A * x - sys.b).norm();
  return nb > 0 ? r / nb : r;
}

namespace {

/// b - A x with long double accumulation.
Eigen::VectorXd residual(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& x, const Eigen::VectorXd& b) {
  std::vector<long double> r(b.data(), b.data() + b.size());
  for (Eigen::Index k = 0; k < A.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it)
      r[it.row()] -= static_cast<long double>(it.value()) * x[it.col()];
  Eigen::VectorXd out(b.size());
  for (Eigen::Index k = 0; k < b.size(); ++k) out[k] = static_cast<double>(r[k]);
  return out;
}

}  // namespace

Eigen::VectorXd solve(const LinearSystem& sys) {
  Eigen::VectorXd full = Eigen::VectorXd::Zero(sys.num_dofs);
  const auto n = sys.A.rows();
  if (n == 0 || sys.b.norm() == 0) return full;
  Eigen::VectorXd x;
  constexpr double tol = 1e-12;
  if (n < 20000) {
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(sys.A);
    if (ldlt.info() != Eigen::Success) throw Error(ErrorCode::SingularMatrix, "factorization failed");
    if ((ldlt.vectorD().array() <= 0).any()) throw Error(ErrorCode::SingularMatrix, "stiffness matrix is not positive definite");
    x = ldlt.solve(sys.b);
    for (int it = 0; it < 5; ++it) {
      const Eigen::VectorXd r = residual(sys.A, x, sys.b);
      if (r.norm() <= tol * sys.b.norm()) break;
      x += ldlt.solve(r);
    }
  } else {
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg(sys.A);
    cg.setTolerance(tol * 0.5);
    cg.setMaxIterations(static_cast<Eigen::Index>(20 * n));
    x = cg.solve(sys.b);
  }
  if (!x.allFinite()) throw Error(ErrorCode::SolverFailure, "non-finite solution");
  // Relative to ||b||, or to || |A| |x| || when rounding x itself leaves a larger residual.
  Eigen::VectorXd ax = Eigen::VectorXd::Zero(x.size());
  for (Eigen::Index k = 0; k < sys.A.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(sys.A, k); it; ++it)
      ax[it.row()] += std::abs(it.value() * x[it.col()]);
  const double r = residual(sys.A, x, sys.b).norm();
  if (r > tol * std::max(sys.b.norm(), ax.norm())) {
    std::ostringstream msg;
    msg << "relative residual " << r / sys.b.norm() << " above " << tol;
    throw Error(ErrorCode::SolverFailure, msg.str());
  }
  for (std::size_t k = 0; k < sys.free_dofs.size(); ++k) full[sys.free_dofs[k]] = x[k];
  return full;
}

namespace {

void field_at(const PointBasis& pb, const BezierElement& c, const Eigen::VectorXd& U, int nc, Eigen::Vector2d& val,
              Eigen::Matrix2d& grad) {
  val.setZero();
  grad.setZero();
  for (std::size_t k = 0; k < c.active_ids.size(); ++k)
    for (int comp = 0; comp < nc; ++comp) {
      const double coef = U[c.active_ids[k] * nc + comp];
      val[comp] += coef * pb.N[k];
      grad.row(comp) += coef * pb.dN.row(k);
    }
}

}  // namespace

H1Error h1_error(const ProblemData& data, const SplineSpace& space, const Eigen::VectorXd& U,
                 const ExactSolution& exact, int extra_quadrature) {
  const int nc = components(data.kind);
  CellEvaluator ev(data, space);
  PointBasis pb;
  const Rule& ru = gauss(space.p + 2 + extra_quadrature);
  const Rule& rv = gauss(space.q + 2 + extra_quadrature);
  double err = 0, norm = 0;
  Eigen::Vector2d val;
  Eigen::Matrix2d grad;
  for (const auto& c : space.cells)
    for (std::size_t a = 0; a < ru.x.size(); ++a)
      for (std::size_t b = 0; b < rv.x.size(); ++b) {
        ev.eval(c, ru.x[a], rv.x[b], false, pb);
        const double w = ru.w[a] * rv.w[b] * c.param.du() * c.param.dv() * pb.det;
        field_at(pb, c, U, nc, val, grad);
        const Eigen::Vector2d ev_ = exact.value(pb.geo.x);
        const Eigen::Matrix2d eg = exact.gradient(pb.geo.x);
        for (int comp = 0; comp < nc; ++comp) {
          err += w * (std::pow(val[comp] - ev_[comp], 2) + (grad.row(comp) - eg.row(comp)).squaredNorm());
          norm += w * (ev_[comp] * ev_[comp] + eg.row(comp).squaredNorm());
        }
      }
  return {std::sqrt(err), std::sqrt(norm)};
}

std::pair<Eigen::Vector2d, Eigen::Matrix2d> eval_field(const ProblemData& data, const SplineSpace& space,
                                                       const Eigen::VectorXd& U, double u, double v) {
  for (const auto& c : space.cells) {
    if (u < c.param.u0 || u > c.param.u1 || v < c.param.v0 || v > c.param.v1) continue;
    CellEvaluator ev(data, space);
    PointBasis pb;
    ev.eval(c, (u - c.param.u0) / c.param.du(), (v - c.param.v0) / c.param.dv(), false, pb);
    Eigen::Vector2d val;
    Eigen::Matrix2d grad;
    field_at(pb, c, U, components(data.kind), val, grad);
    return {val, grad};
  }
  throw Error(ErrorCode::InvalidArgument, "point outside the parametric domain");
}

Estimate estimate(const ProblemData& data, const SplineSpace& space, const Eigen::VectorXd& U) {
  const int nc = components(data.kind);
  const Material& mat = data.material;
  const double lam = mat.lambda(), mu = mat.mu();
  CellEvaluator ev(data, space);
  PointBasis pb;
  const Rule& ru = gauss(space.p + 1);
  const Rule& rv = gauss(space.q + 1);

  // element parametric boxes
  std::vector<ParamBox> ebox(space.num_elements, {1e300, -1e300, 1e300, -1e300});
  for (const auto& c : space.cells) {
    auto& b = ebox[c.element];
    b.u0 = std::min(b.u0, c.param.u0);
    b.u1 = std::max(b.u1, c.param.u1);
    b.v0 = std::min(b.v0, c.param.v0);
    b.v1 = std::max(b.v1, c.param.v1);
  }
  auto at = [&](double u, double v) { return geometry_eval(data.geometry, u, v).x; };
  auto side_length = [&](double u0, double v0, double u1, double v1) {
    const Rule& r = gauss(4);
    double len = 0;
    for (std::size_t a = 0; a < r.x.size(); ++a) {
      const double u = u0 + r.x[a] * (u1 - u0), v = v0 + r.x[a] * (v1 - v0);
      const auto g = geometry_eval(data.geometry, u, v);
      len += r.w[a] * (g.jacobian.col(0) * (u1 - u0) + g.jacobian.col(1) * (v1 - v0)).norm();
    }
    return len;
  };

  std::vector<double> vol(space.num_elements, 0.0), edge(space.num_elements, 0.0);

  auto residual_at = [&](const BezierElement& c, const PointBasis& p) {
    Eigen::Vector2d f = data.source ? data.source(p.geo.x) : Eigen::Vector2d::Zero();
    Eigen::Vector2d r = f;
    std::array<Eigen::Matrix2d, 2> H = {Eigen::Matrix2d::Zero(), Eigen::Matrix2d::Zero()};
    for (std::size_t k = 0; k < c.active_ids.size(); ++k)
      for (int comp = 0; comp < nc; ++comp) {
        const double coef = U[c.active_ids[k] * nc + comp];
        H[comp](0, 0) += coef * p.d2N(k, 0);
        H[comp](0, 1) += coef * p.d2N(k, 1);
        H[comp](1, 1) += coef * p.d2N(k, 2);
      }
    if (nc == 1) {
      r[0] += H[0](0, 0) + H[0](1, 1);
      r[1] = 0;
    } else {
      // div sigma = (lam+mu) grad div u + mu laplace u
      const double ddx = H[0](0, 0) + H[1](0, 1), ddy = H[0](0, 1) + H[1](1, 1);
      r[0] += (lam + mu) * ddx + mu * (H[0](0, 0) + H[0](1, 1));
      r[1] += (lam + mu) * ddy + mu * (H[1](0, 0) + H[1](1, 1));
    }
    return r;
  };
  auto flux = [&](const BezierElement& c, const PointBasis& p, const Eigen::Vector2d& n) {
    Eigen::Vector2d val;
    Eigen::Matrix2d grad;
    field_at(p, c, U, nc, val, grad);
    if (nc == 1) return Eigen::Vector2d(grad.row(0).dot(n), 0.0);
    return Eigen::Vector2d(stress(mat, grad) * n);
  };

  for (const auto& c : space.cells) {
    for (std::size_t a = 0; a < ru.x.size(); ++a)
      for (std::size_t b = 0; b < rv.x.size(); ++b) {
        ev.eval(c, ru.x[a], rv.x[b], true, pb);
        const double w = ru.w[a] * rv.w[b] * c.param.du() * c.param.dv() * pb.det;
        vol[c.element] += w * residual_at(c, pb).squaredNorm();
      }
    if (!data.neumann) continue;
    const auto& eb = ebox[c.element];
    for (const auto& s : boundary_sides(space, c)) {
      const unsigned mask = data.dirichlet ? data.dirichlet(s.side, side_coordinate_mid(c, s)) : 0u;
      if (mask == (nc == 1 ? 1u : 3u)) continue;
      double hE = 0;
      switch (s.side) {
        case Side::Left: hE = side_length(eb.u0, eb.v0, eb.u0, eb.v1); break;
        case Side::Right: hE = side_length(eb.u1, eb.v0, eb.u1, eb.v1); break;
        case Side::Bottom: hE = side_length(eb.u0, eb.v0, eb.u1, eb.v0); break;
        case Side::Top: hE = side_length(eb.u0, eb.v1, eb.u1, eb.v1); break;
      }
      const Rule& r = s.along_u ? ru : rv;
      for (std::size_t a = 0; a < r.x.size(); ++a) {
        const double sl = s.along_u ? r.x[a] : s.fixed, tl = s.along_u ? s.fixed : r.x[a];
        ev.eval(c, sl, tl, false, pb);
        const auto [normal, ds] = side_frame(pb, c, s, s.side);
        Eigen::Vector2d res = data.neumann(pb.geo.x, normal) - flux(c, pb, normal);
        for (int comp = 0; comp < 2; ++comp)
          if (comp >= nc || (mask & (1u << comp))) res[comp] = 0;
        edge[c.element] += hE * r.w[a] * ds * res.squaredNorm();
      }
    }
  }

  if (data.jump_terms) {
    // both directions: lines u = const (neighbours left/right) and v = const
    for (int dir = 0; dir < 2; ++dir) {
      const auto& lines = dir == 0 ? data.kink_u : data.kink_v;
      for (const double line : lines) {
        std::vector<const BezierElement*> lo, hi;
        for (const auto& c : space.cells) {
          if ((dir == 0 ? c.param.u1 : c.param.v1) == line) lo.push_back(&c);
          if ((dir == 0 ? c.param.u0 : c.param.v0) == line) hi.push_back(&c);
        }
        for (int sideflag = 0; sideflag < 2; ++sideflag) {
          const auto& mine = sideflag == 0 ? lo : hi;
          const auto& other = sideflag == 0 ? hi : lo;
          for (const auto* c : mine) {
            const double a0 = dir == 0 ? c->param.v0 : c->param.u0, a1 = dir == 0 ? c->param.v1 : c->param.u1;
            const auto& eb = ebox[c->element];
            const double hE = dir == 0 ? side_length(line, eb.v0, line, eb.v1) : side_length(eb.u0, line, eb.u1, line);
            for (const auto* o : other) {
              const double b0 = std::max(a0, dir == 0 ? o->param.v0 : o->param.u0);
              const double b1 = std::min(a1, dir == 0 ? o->param.v1 : o->param.u1);
              if (b1 <= b0) continue;
              const Rule& r = dir == 0 ? rv : ru;
              for (std::size_t k = 0; k < r.x.size(); ++k) {
                const double tpos = b0 + r.x[k] * (b1 - b0);
                auto local = [&](const BezierElement& e, bool low) {
                  double s, t;
                  if (dir == 0) {
                    s = low ? 1.0 : 0.0;
                    t = (tpos - e.param.v0) / e.param.dv();
                  } else {
                    s = (tpos - e.param.u0) / e.param.du();
                    t = low ? 1.0 : 0.0;
                  }
                  return std::make_pair(s, t);
                };
                const CellSide cs{Side::Right, dir == 1, 1.0};
                const auto [s1, t1] = local(*c, sideflag == 0);
                ev.eval(*c, s1, t1, false, pb);
                // normal from the low to the high side
                const auto [normal, ds_unit] = side_frame(pb, *c, cs, dir == 0 ? Side::Right : Side::Top);
                const double ds = ds_unit / (dir == 0 ? c->param.dv() : c->param.du()) * (b1 - b0);
                const Eigen::Vector2d mine_flux = flux(*c, pb, normal);
                const auto [s2, t2] = local(*o, sideflag != 0);
                PointBasis po;
                ev.eval(*o, s2, t2, false, po);
                const Eigen::Vector2d other_flux = flux(*o, po, normal);
                const Eigen::Vector2d jump = 0.5 * (mine_flux - other_flux);
                edge[c->element] += hE * r.w[k] * ds * jump.squaredNorm();
              }
            }
          }
        }
      }
    }
  }

  Estimate est;
  est.eta.assign(space.num_elements, 0.0);
  double sum = 0;
  for (std::size_t e = 0; e < space.num_elements; ++e) {
    if (ebox[e].u1 < ebox[e].u0) continue;
    const auto& b = ebox[e];
    const std::array<Eigen::Vector2d, 8> pts = {at(b.u0, b.v0), at(b.u1, b.v0), at(b.u1, b.v1), at(b.u0, b.v1),
                                                at(0.5 * (b.u0 + b.u1), b.v0), at(b.u1, 0.5 * (b.v0 + b.v1)),
                                                at(0.5 * (b.u0 + b.u1), b.v1), at(b.u0, 0.5 * (b.v0 + b.v1))};
    double h = 0;
    for (const auto& x : pts)
      for (const auto& y : pts) h = std::max(h, (x - y).norm());
    est.eta[e] = std::sqrt(h * h * vol[e] + edge[e]);
    sum += est.eta[e] * est.eta[e];
  }
  est.total = std::sqrt(sum);
  return est;
}

namespace {

/// Largest eigenvalue of a symmetric positive operator by Lanczos with full reorthogonalisation.
template <class Op>
double lanczos_max(const Op& apply, Eigen::Index n, double tol) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = 1.0 + 0.5 * std::sin(1.0 + 3.0 * static_cast<double>(i));
  v.normalize();
  std::vector<Eigen::VectorXd> V{v};
  std::vector<double> alpha, beta;
  double prev = 0;
  const Eigen::Index maxit = std::min<Eigen::Index>(n, 400);
  for (Eigen::Index k = 0; k < maxit; ++k) {
    Eigen::VectorXd w = apply(V.back());
    alpha.push_back(V.back().dot(w));
    for (const auto& q : V) w -= q.dot(w) * q;
    for (const auto& q : V) w -= q.dot(w) * q;
    const double b = w.norm();
    const auto m = static_cast<Eigen::Index>(alpha.size());
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      T(i, i) = alpha[i];
      if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    const double theta = es.eigenvalues()[m - 1];
    const double bound = b * std::abs(es.eigenvectors()(m - 1, m - 1));
    if (b < 1e-14 * std::abs(theta) || (k > 2 && bound < tol * theta && std::abs(theta - prev) < tol * theta))
      return theta;
    prev = theta;
    beta.push_back(b);
    V.push_back(w / b);
  }
  return prev;
}

}  // namespace

double condition_number(const Eigen::SparseMatrix<double>& A, std::size_t dense_threshold) {
  const auto n = A.rows();
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "empty matrix");
  if (static_cast<std::size_t>(n) <= dense_threshold) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(A), Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues()[0], hi = es.eigenvalues()[n - 1];
    if (!(lo > 0) || lo <= hi * 1e-15) throw Error(ErrorCode::SingularMatrix, "matrix is singular");
    return hi / lo;
  }
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
  if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= 0).any())
    throw Error(ErrorCode::SingularMatrix, "matrix is singular or indefinite");
  const double hi = lanczos_max([&](const Eigen::VectorXd& x) { return Eigen::VectorXd(A * x); }, n, 1e-8);
  const double inv = lanczos_max([&](const Eigen::VectorXd& x) { return Eigen::VectorXd(ldlt.solve(x)); }, n, 1e-8);
  return hi * inv;
}

SparsityStats sparsity_stats(const Eigen::SparseMatrix<double>& A) {
  SparsityStats s;
  s.n = static_cast<std::size_t>(A.rows());
  std::vector<std::size_t> row(s.n, 0);
  for (Eigen::Index k = 0; k < A.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it) {
      if (it.value() == 0.0) continue;
      ++s.nnz;
      ++row[it.row()];
      s.bandwidth = std::max<std::size_t>(s.bandwidth, static_cast<std::size_t>(std::abs(it.row() - it.col())));
    }
  for (auto r : row) s.max_row_nnz = std::max(s.max_row_nnz, r);
  return s;
}

void write_matrix_market(std::ostream& os, const Eigen::SparseMatrix<double>& A) {
  std::vector<std::tuple<Eigen::Index, Eigen::Index, double>> lower;
  for (Eigen::Index k = 0; k < A.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it)
      if (it.row() >= it.col() && it.value() != 0.0) lower.emplace_back(it.row(), it.col(), it.value());
  std::sort(lower.begin(), lower.end(), [](const auto& a, const auto& b) {
    return std::tie(std::get<1>(a), std::get<0>(a)) < std::tie(std::get<1>(b), std::get<0>(b));
  });
  os << "%%MatrixMarket matrix coordinate real symmetric\n";
  os << A.rows() << ' ' << A.cols() << ' ' << lower.size() << '\n';
  os << std::setprecision(17);
  for (const auto& [r, c, v] : lower) os << r + 1 << ' ' << c + 1 << ' ' << v << '\n';
}

}  // namespace aiga
