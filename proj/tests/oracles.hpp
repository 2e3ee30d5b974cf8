#pragma once
// Independent reference implementations used only by the tests.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

/// Textbook recursive Cox-de Boor definition; the last span is closed on the right.
inline double cox_de_boor(const std::vector<double>& t, int i, int k, double x) {
  if (k == 0) {
    const bool last = t[i + 1] == t.back() && t[i] < t[i + 1];
    if (t[i] <= x && (x < t[i + 1] || (last && x == t[i + 1]))) return 1.0;
    return 0.0;
  }
  double v = 0.0;
  if (t[i + k] > t[i]) v += (x - t[i]) / (t[i + k] - t[i]) * cox_de_boor(t, i, k - 1, x);
  if (t[i + k + 1] > t[i + 1]) v += (t[i + k + 1] - x) / (t[i + k + 1] - t[i + 1]) * cox_de_boor(t, i + 1, k - 1, x);
  return v;
}

inline double bspline(const std::vector<double>& t, double x) {
  return cox_de_boor(t, 0, static_cast<int>(t.size()) - 2, x);
}

/// Least-squares residual (max abs over samples) of fitting `target` by `basis` columns.
inline double span_residual(const Eigen::MatrixXd& basis, const Eigen::VectorXd& target) {
  Eigen::VectorXd c = basis.colPivHouseholderQr().solve(target);
  return (basis * c - target).cwiseAbs().maxCoeff();
}

/// Gauss-Legendre nodes and weights on [0,1] via Newton iteration on Legendre polynomials.
inline void gauss01(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p1 = z, p0 = 1.0;
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = 0.5 * (1.0 - z);
    w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
  }
}

}  // namespace oracle
