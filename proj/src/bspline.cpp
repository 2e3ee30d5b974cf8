#include "aiga/bspline.hpp"

#include <algorithm>
#include <cmath>

#include "aiga/error.hpp"

namespace aiga {

namespace {

constexpr int kMaxDegree = 15;

double binom(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Derivative of order d of N_{j,k} given the degree-0 indicator pattern.
double derivative(std::span<const double> t, const double table[kMaxDegree + 1][kMaxDegree + 2], int j, int k, int d) {
  if (d == 0) return table[k][j];
  if (k == 0) return 0.0;
  double r = 0.0;
  const double l = t[j + k] - t[j];
  if (l > 0.0) r += derivative(t, table, j, k - 1, d - 1) / l;
  const double rr = t[j + k + 1] - t[j + 1];
  if (rr > 0.0) r -= derivative(t, table, j + 1, k - 1, d - 1) / rr;
  return k * r;
}

}  // namespace

std::vector<double> LocalKnotVector::values() const {
  std::vector<double> v(knots.size());
  std::transform(knots.begin(), knots.end(), v.begin(), [](const Dyadic& d) { return d.to_double(); });
  return v;
}

void LocalKnotVector::validate() const {
  if (knots.size() < 2) throw Error(ErrorCode::InvalidKnots, "knot vector needs at least two entries");
  for (std::size_t i = 1; i < knots.size(); ++i)
    if (knots[i] < knots[i - 1]) throw Error(ErrorCode::InvalidKnots, "knot vector is decreasing");
  if (knots.front() == knots.back()) throw Error(ErrorCode::InvalidKnots, "knot vector has no distinct values");
}

double bspline_eval(std::span<const double> t, double x, int deriv_order) {
  const int n = static_cast<int>(t.size());
  const int p = n - 2;
  if (p < 0 || p > kMaxDegree) throw Error(ErrorCode::InvalidKnots, "unsupported knot vector length");
  for (int i = 1; i < n; ++i)
    if (t[i] < t[i - 1]) throw Error(ErrorCode::InvalidKnots, "knot vector is decreasing");
  if (deriv_order < 0 || deriv_order > std::max(p, 2)) throw Error(ErrorCode::InvalidArgument, "derivative order out of range");
  if (!std::isfinite(x)) throw Error(ErrorCode::InvalidArgument, "evaluation point is not finite");
  if (t[0] == t[n - 1] || x < t[0] || x > t[n - 1]) return 0.0;

  int span = -1;
  if (x == t[n - 1]) {
    for (int j = n - 2; j >= 0; --j)
      if (t[j] < t[j + 1]) {
        span = j;
        break;
      }
  } else {
    for (int j = 0; j < n - 1; ++j)
      if (t[j] <= x && x < t[j + 1]) {
        span = j;
        break;
      }
  }
  double table[kMaxDegree + 1][kMaxDegree + 2] = {};
  for (int j = 0; j <= p; ++j) table[0][j] = (j == span) ? 1.0 : 0.0;
  for (int k = 1; k <= p; ++k) {
    for (int j = 0; j + k <= p; ++j) {
      double v = 0.0;
      const double l = t[j + k] - t[j];
      if (l > 0.0) v += (x - t[j]) / l * table[k - 1][j];
      const double r = t[j + k + 1] - t[j + 1];
      if (r > 0.0) v += (t[j + k + 1] - x) / r * table[k - 1][j + 1];
      table[k][j] = v;
    }
  }
  return derivative(t, table, 0, p, deriv_order);
}

double bspline_eval(const LocalKnotVector& knots, double x, int deriv_order) {
  const auto v = knots.values();
  return bspline_eval(std::span<const double>(v), x, deriv_order);
}

std::vector<Dyadic> refined_knot_sequence(const LocalKnotVector& coarse, std::span<const Dyadic> grid) {
  coarse.validate();
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i - 1] < grid[i])) throw Error(ErrorCode::NotARefinement, "fine grid must be strictly increasing");
  for (const auto& k : coarse.knots)
    if (!std::binary_search(grid.begin(), grid.end(), k))
      throw Error(ErrorCode::NotARefinement, "fine grid does not contain coarse knot " + k.str());
  std::vector<Dyadic> seq = coarse.knots;
  for (const auto& g : grid)
    if (coarse.knots.front() < g && g < coarse.knots.back() &&
        !std::binary_search(coarse.knots.begin(), coarse.knots.end(), g))
      seq.insert(std::upper_bound(seq.begin(), seq.end(), g), g);
  return seq;
}

std::vector<double> knot_insertion_row(const LocalKnotVector& coarse, std::span<const Dyadic> grid) {
  const auto target = refined_knot_sequence(coarse, grid);
  const int p = coarse.degree();
  std::vector<double> tau = coarse.values();
  std::vector<double> c{1.0};
  for (const auto& z : target) {
    if (std::binary_search(coarse.knots.begin(), coarse.knots.end(), z)) continue;
    const double zd = z.to_double();
    int k = 0;
    while (!(tau[k] <= zd && zd < tau[k + 1])) ++k;
    const int n = static_cast<int>(c.size());
    std::vector<double> next(n + 1);
    for (int i = 0; i <= n; ++i) {
      if (i <= k - p) {
        next[i] = c[i];
      } else if (i >= k + 1) {
        next[i] = c[i - 1];
      } else {
        const double a = (zd - tau[i]) / (tau[i + p] - tau[i]);
        next[i] = a * (i < n ? c[i] : 0.0) + (1.0 - a) * (i >= 1 ? c[i - 1] : 0.0);
      }
    }
    tau.insert(tau.begin() + k + 1, zd);
    c = std::move(next);
  }
  return c;
}

std::vector<double> bernstein_row(int p, double t) {
  std::vector<double> b(p + 1);
  for (int i = 0; i <= p; ++i) b[i] = binom(p, i) * std::pow(t, i) * std::pow(1.0 - t, p - i);
  return b;
}

void bernstein_derivs(int p, double t, double* b, double* db, double* d2b) {
  // Lower-degree rows feed the derivative formulas.
  double low1[kMaxDegree + 1] = {}, low2[kMaxDegree + 1] = {};
  auto fill = [t](int q, double* out) {
    for (int i = 0; i <= q; ++i) out[i] = binom(q, i) * std::pow(t, i) * std::pow(1.0 - t, q - i);
  };
  fill(p, b);
  if (p >= 1) fill(p - 1, low1);
  if (p >= 2) fill(p - 2, low2);
  for (int i = 0; i <= p; ++i) {
    const double a = (i >= 1 && p >= 1) ? low1[i - 1] : 0.0;
    const double c = (i <= p - 1) ? low1[i] : 0.0;
    db[i] = p * (a - c);
    double s = 0.0;
    if (p >= 2) {
      if (i >= 2) s += low2[i - 2];
      if (i >= 1 && i - 1 <= p - 2) s -= 2.0 * low2[i - 1];
      if (i <= p - 2) s += low2[i];
    }
    d2b[i] = p * (p - 1) * s;
  }
}

std::vector<double> bezier_coefficients(std::span<const double> knots, double a, double b) {
  const int p = static_cast<int>(knots.size()) - 2;
  const double h = b - a;
  std::vector<double> derivs(p + 1);
  for (int i = 0; i <= p; ++i) derivs[i] = bspline_eval(knots, a, i);
  std::vector<double> c(p + 1, 0.0);
  double fact = 1.0;
  std::vector<double> scaled(p + 1);
  for (int i = 0; i <= p; ++i) {
    if (i > 0) fact *= i;
    scaled[i] = std::pow(h, i) * derivs[i] / fact;
  }
  for (int j = 0; j <= p; ++j)
    for (int i = 0; i <= j; ++i) c[j] += binom(j, i) / binom(p, i) * scaled[i];
  return c;
}

}  // namespace aiga
