#pragma once

#include <span>
#include <vector>

#include "aiga/dyadic.hpp"

namespace aiga {

/// Knot vector of a single univariate B-spline of degree size()-2.
struct LocalKnotVector {
  std::vector<Dyadic> knots;

  int degree() const { return static_cast<int>(knots.size()) - 2; }
  std::vector<double> values() const;
  void validate() const;
};

/// Value or derivative (order <= 2 in the public contract, <= degree internally)
/// of the B-spline on `knots`. Half-open spans, except that the right end of the
/// support is evaluated as a left limit, so clamped end functions equal 1 there.
double bspline_eval(std::span<const double> knots, double x, int deriv_order = 0);
double bspline_eval(const LocalKnotVector& knots, double x, int deriv_order = 0);

/// Coefficients of the coarse B-spline in the basis of the refined knot sequence
/// obtained by inserting every grid value lying strictly inside the coarse support.
/// Returned in order of the consecutive fine B-splines.
std::vector<double> knot_insertion_row(const LocalKnotVector& coarse, std::span<const Dyadic> fine_knot_grid);

/// The refined knot sequence used by knot_insertion_row.
std::vector<Dyadic> refined_knot_sequence(const LocalKnotVector& coarse, std::span<const Dyadic> fine_knot_grid);

/// Bernstein polynomials of degree p at t in [0,1].
std::vector<double> bernstein_row(int p, double t);

/// Bernstein values and first/second derivatives w.r.t. t, each of length p+1.
void bernstein_derivs(int p, double t, double* b, double* db, double* d2b);

/// Bernstein coefficients (length p+1) of the polynomial piece of the B-spline on [a,b].
/// [a,b] must not contain knots in its interior.
std::vector<double> bezier_coefficients(std::span<const double> knots, double a, double b);

}  // namespace aiga
