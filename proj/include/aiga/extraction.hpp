#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "aiga/dyadic.hpp"
#include "aiga/hiermesh.hpp"
#include "aiga/tmesh.hpp"

namespace aiga {

/// Parametric rectangle [u0,u1]x[v0,v1].
struct ParamBox {
  double u0 = 0, u1 = 0, v0 = 0, v1 = 0;
  double du() const { return u1 - u0; }
  double dv() const { return v1 - v0; }
};

/// One Bezier cell: active functions and their Bernstein coefficients.
/// Column c = i*(q+1)+j holds the coefficient of B_i(u) B_j(v).
struct BezierElement {
  DyadicBox box;
  ParamBox param;
  std::size_t element = 0;
  std::vector<std::size_t> active_ids;
  Eigen::MatrixXd extraction;
};

/// Bezier view of a spline space over the parametric rectangle [0,width]x[0,height].
struct SplineSpace {
  int p = 3, q = 3;
  double width = 0, height = 0;
  std::size_t num_functions = 0;
  /// Number of mesh elements; cells refer to them by index.
  std::size_t num_elements = 0;
  /// source[k] is the index in the input basis of space function k.
  std::vector<std::size_t> source;
  std::vector<BezierElement> cells;
};

SplineSpace extract(const HierMesh& mesh, const std::vector<ThbFunction>& basis);

/// T-spline variant. `frame` index columns/rows on every side lie outside the parametric
/// domain: u = clamp(x - frame, 0, M - 2 frame). Functions or cells without parametric
/// area are dropped; surviving functions keep their relative order.
SplineSpace extract(const TMesh& mesh, const std::vector<TSplineFunction>& basis, int frame = 0);

/// Tensor Bernstein values (length (p+1)(q+1)) at local coordinates (s,t) in [0,1]^2.
Eigen::VectorXd bernstein_tensor(int p, int q, double s, double t);

/// Evaluates the sum of coefficient-weighted functions at parametric (u,v) through the cell.
double eval_cell(const SplineSpace& space, const BezierElement& cell, const Eigen::VectorXd& coefficients, double u,
                 double v);

/// Largest number of distinct levels among the active THB functions of any cell.
int max_levels_per_cell(const SplineSpace& space, const std::vector<ThbFunction>& basis);

}  // namespace aiga
