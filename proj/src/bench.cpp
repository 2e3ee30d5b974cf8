#include "aiga/bench.hpp"

#include <cmath>
#include <limits>

#include "aiga/error.hpp"

namespace aiga {

namespace {

constexpr double kPi = 3.14159265358979323846;

/// Polar coordinates with the angle shifted into [lo, lo + 2 pi).
std::pair<double, double> polar(const Eigen::Vector2d& x, double lo) {
  double phi = std::atan2(x[1], x[0]);
  while (phi < lo) phi += 2 * kPi;
  while (phi >= lo + 2 * kPi) phi -= 2 * kPi;
  return {x.norm(), phi};
}

/// r^a sin(b phi + c) with phi measured from `lo`.
ExactSolution corner_solution(double a, double b, double c, double lo) {
  ExactSolution s;
  s.value = [=](const Eigen::Vector2d& x) {
    const auto [r, phi] = polar(x, lo);
    return Eigen::Vector2d(std::pow(r, a) * std::sin(b * phi + c), 0.0);
  };
  s.gradient = [=](const Eigen::Vector2d& x) {
    const auto [r, phi] = polar(x, lo);
    if (r == 0) throw Error(ErrorCode::Singularity, "gradient requested at the singular point");
    const double dr = a * std::pow(r, a - 1) * std::sin(b * phi + c);
    const double dphi = b * std::pow(r, a - 1) * std::cos(b * phi + c);
    Eigen::Matrix2d g = Eigen::Matrix2d::Zero();
    g(0, 0) = dr * std::cos(phi) - dphi * std::sin(phi);
    g(0, 1) = dr * std::sin(phi) + dphi * std::cos(phi);
    return g;
  };
  return s;
}

ExactSolution plate_solution(const Material& m, double a, double s0) {
  const double mu = m.mu();
  const double kappa = (3 - m.nu) / (1 + m.nu);
  const double k = s0 / (4 * mu);
  auto polar_fields = [=](double r, double phi, double out[6]) {
    const double c2 = std::cos(2 * phi), s2 = std::sin(2 * phi);
    const double a2 = a * a, a4 = a2 * a2;
    // ur, ur_r, ur_phi, uphi, uphi_r, uphi_phi
    out[0] = k * (r * ((kappa - 1) / 2 + c2) + a2 / r * (1 + (1 + kappa) * c2) - a4 / (r * r * r) * c2);
    out[1] = k * (((kappa - 1) / 2 + c2) - a2 / (r * r) * (1 + (1 + kappa) * c2) + 3 * a4 / std::pow(r, 4) * c2);
    out[2] = k * (-2 * r * s2 - 2 * a2 / r * (1 + kappa) * s2 + 2 * a4 / (r * r * r) * s2);
    const double g = (1 - kappa) * a2 / r - r - a4 / (r * r * r);
    const double gr = -(1 - kappa) * a2 / (r * r) - 1 + 3 * a4 / std::pow(r, 4);
    out[3] = k * g * s2;
    out[4] = k * gr * s2;
    out[5] = 2 * k * g * c2;
  };
  ExactSolution s;
  s.value = [=](const Eigen::Vector2d& x) {
    const double r = x.norm(), phi = std::atan2(x[1], x[0]);
    double f[6];
    polar_fields(r, phi, f);
    const double c = std::cos(phi), sn = std::sin(phi);
    return Eigen::Vector2d(f[0] * c - f[3] * sn, f[0] * sn + f[3] * c);
  };
  s.gradient = [=](const Eigen::Vector2d& x) {
    const double r = x.norm(), phi = std::atan2(x[1], x[0]);
    double f[6];
    polar_fields(r, phi, f);
    const Eigen::Vector2d er(std::cos(phi), std::sin(phi)), ep(-std::sin(phi), std::cos(phi));
    const Eigen::Vector2d d_r = f[1] * er + f[4] * ep;
    const Eigen::Vector2d d_phi = (f[2] - f[3]) * er + (f[0] + f[5]) * ep;
    return Eigen::Matrix2d(d_r * er.transpose() + d_phi * ep.transpose() / r);
  };
  return s;
}

/// Cubic C1 patch (a degree-elevated biquadratic net). All first derivatives vanish at (2,0),
/// the preimage of the reentrant corner; the Jacobian is also singular at (2,4), the preimage of (-1,-1).
GeometryMap lshape_geometry() {
  constexpr double t = 1.0 / 3.0, n = 1.0 / 9.0;
  GeometryMap g;
  g.p = g.q = 3;
  g.knots_u = {0, 0, 0, 0, 2, 2, 4, 4, 4, 4};
  g.knots_v = {0, 0, 0, 0, 4, 4, 4, 4};
  g.points = {{1, 0},      {t, 0},          {0, 0},          {0, 0},          {0, t},          {0, 1},  //
              {1, -t},     {5 * n, -t},     {2 * n, -2 * n}, {-2 * n, 2 * n}, {-t, 5 * n},     {-t, 1},  //
              {1, -2 * t}, {t, -2 * t},     {-n, -5 * n},    {-5 * n, -n},    {-2 * t, t},     {-2 * t, 1},  //
              {1, -1},     {-t, -1},        {-1, -1},        {-1, -1},        {-1, -t},        {-1, 1}};
  g.weights.assign(24, 1.0);
  return g;
}

GeometryMap annulus_geometry(double ri, double ro) {
  GeometryMap g;
  g.p = 1;
  g.q = 2;
  g.knots_u = {0, 0, 4, 4};
  g.knots_v = {0, 0, 0, 4, 4, 4};
  g.points = {{ri, 0}, {ro, 0}, {ri, ri}, {ro, ro}, {0, ri}, {0, ro}};
  const double w = std::sqrt(0.5);
  g.weights = {1, 1, w, w, 1, 1};
  return g;
}

}  // namespace

std::vector<std::string> problem_names() { return {"worst_case", "lshape", "slit", "plate_hole"}; }

Eigen::Vector3d plate_stress(const Eigen::Vector2d& x, double a, double s0) {
  const double r = x.norm(), phi = std::atan2(x[1], x[0]);
  const double q2 = a * a / (r * r), q4 = q2 * q2;
  const double c2 = std::cos(2 * phi), s2 = std::sin(2 * phi);
  const double srr = s0 / 2 * (1 - q2) + s0 / 2 * (1 - 4 * q2 + 3 * q4) * c2;
  const double spp = s0 / 2 * (1 + q2) - s0 / 2 * (1 + 3 * q4) * c2;
  const double srp = -s0 / 2 * (1 + 2 * q2 - 3 * q4) * s2;
  const double c = std::cos(phi), s = std::sin(phi);
  return {srr * c * c + spp * s * s - 2 * srp * s * c, srr * s * s + spp * c * c + 2 * srp * s * c,
          (srr - spp) * s * c + srp * (c * c - s * s)};
}

ProblemDefinition build_problem(const std::string& name, int degree) {
  if (degree < 1 || degree % 2 == 0) throw Error(ErrorCode::InvalidArgument, "degree must be odd");
  ProblemDefinition pd;
  pd.name = name;
  pd.degree = degree;
  auto& d = pd.data;
  auto zero = [](const Eigen::Vector2d&) { return Eigen::Vector2d::Zero().eval(); };
  if (name == "worst_case") {
    pd.M = pd.N = 8;
    pd.corner_marking = true;
    d.kind = ProblemKind::MatrixOnly;
    d.geometry = GeometryMap::identity(8, 8);
    d.dirichlet = [](Side, double) { return 1u; };
  } else if (name == "lshape" || name == "slit") {
    const bool lshape = name == "lshape";
    d.kind = ProblemKind::Poisson;
    d.source = zero;
    if (lshape) {
      pd.M = pd.N = 4;
      d.geometry = lshape_geometry();
      d.dirichlet = [](Side s, double) { return s == Side::Bottom ? 1u : 0u; };
      pd.exact = corner_solution(2.0 / 3.0, 2.0 / 3.0, -kPi / 3, kPi / 4);
    } else {
      // upper half of (-1,1)^2 with the slit along the positive x-axis on the bottom edge
      pd.M = pd.N = 8;
      d.geometry = GeometryMap::identity(8, 8);
      d.geometry.points = {{-1, 0}, {1, 0}, {-1, 1}, {1, 1}};
      d.dirichlet = [](Side s, double t) { return s == Side::Bottom && t > 4 ? 1u : 0u; };
      pd.exact = corner_solution(0.5, 0.5, 0.0, -kPi / 2);
    }
    const auto exact = pd.exact;
    d.neumann = [exact](const Eigen::Vector2d& x, const Eigen::Vector2d& n) {
      return Eigen::Vector2d(exact.gradient(x).row(0).dot(n), 0.0);
    };
  } else if (name == "plate_hole") {
    pd.M = pd.N = 4;
    d.kind = ProblemKind::Elasticity;
    d.material = {1e5, 0.3};
    d.source = zero;
    d.geometry = annulus_geometry(1.0, 8.0);
    d.dirichlet = [](Side s, double) { return s == Side::Bottom ? 2u : s == Side::Top ? 1u : 0u; };
    d.neumann = [](const Eigen::Vector2d& x, const Eigen::Vector2d& n) {
      const auto s = plate_stress(x);
      Eigen::Matrix2d sig;
      sig << s[0], s[2], s[2], s[1];
      return Eigen::Vector2d(sig * n);
    };
    pd.exact = plate_solution(d.material, 1.0, 1.0);
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown problem: " + name);
  }
  d.geometry.validate();
  return pd;
}

double expected_rate(const std::string& name, bool adaptive, int degree) {
  if (name == "worst_case") throw Error(ErrorCode::InvalidArgument, "worst_case has no convergence rate");
  const double p = degree;
  if (adaptive || name == "plate_hole") return p / 2;
  if (name == "lshape") return 0.5 * std::min(p, kPi / (2 * kPi - kPi / 2));
  if (name == "slit") return 0.5 * std::min(p, kPi / (2 * kPi));
  throw Error(ErrorCode::InvalidArgument, "unknown problem: " + name);
}

}  // namespace aiga
