#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "aiga/extraction.hpp"

namespace aiga {

/// Rational tensor-product spline map from the parametric rectangle to the plane.
struct GeometryMap {
  int p = 1, q = 1;
  std::vector<double> knots_u, knots_v;
  /// Control point (i,j) is stored at i + nu()*j.
  std::vector<Eigen::Vector2d> points;
  std::vector<double> weights;

  int nu() const { return static_cast<int>(knots_u.size()) - p - 1; }
  int nv() const { return static_cast<int>(knots_v.size()) - q - 1; }
  double width() const { return knots_u.back() - knots_u.front(); }
  double height() const { return knots_v.back() - knots_v.front(); }
  void validate() const;

  /// Bilinear map of [0,w]x[0,h] onto itself.
  static GeometryMap identity(double w, double h);
};

struct GeometryPoint {
  Eigen::Vector2d x;
  /// jacobian(k,a) = d x_k / d u_a.
  Eigen::Matrix2d jacobian;
  /// hessian[k](a,b) = d^2 x_k / d u_a d u_b; filled only on request.
  std::array<Eigen::Matrix2d, 2> hessian;
};

/// side_u/side_v select right (+1) or left (-1) limits on C0 parameter lines.
GeometryPoint geometry_eval(const GeometryMap& g, double u, double v, bool second = false, int side_u = 1,
                            int side_v = 1);

enum class ProblemKind { Poisson, Elasticity, MatrixOnly };
/// Sides of the parametric rectangle: u=0, u=width, v=0, v=height.
enum class Side { Left, Right, Bottom, Top };

int components(ProblemKind kind);

/// Plane stress isotropic material.
struct Material {
  double E = 1e5;
  double nu = 0.3;
  double lambda() const { return E * nu / (1 - nu * nu); }
  double mu() const { return E / (2 * (1 + nu)); }
};

struct ProblemData {
  ProblemKind kind = ProblemKind::Poisson;
  GeometryMap geometry;
  Material material;
  /// Volume source f; Poisson reads component 0.
  std::function<Eigen::Vector2d(const Eigen::Vector2d&)> source;
  /// Bitmask of constrained components on a side at the parametric coordinate t along it.
  std::function<unsigned(Side, double)> dirichlet;
  /// Flux or traction at a boundary point with outward unit normal n; Poisson reads component 0.
  std::function<Eigen::Vector2d(const Eigen::Vector2d& x, const Eigen::Vector2d& n)> neumann;
  /// Interior parametric lines u = c and v = c where the geometry is only C0.
  std::vector<double> kink_u, kink_v;
  bool jump_terms = true;
};

struct LinearSystem {
  /// Stiffness on free DOFs, both triangles stored.
  Eigen::SparseMatrix<double> A;
  Eigen::VectorXd b;
  int components = 1;
  std::size_t num_dofs = 0;
  /// free_index[dof] is the row in A, or -1 for constrained DOFs. dof = function*components + component.
  std::vector<std::ptrdiff_t> free_index;
  std::vector<std::size_t> free_dofs;
};

/// Assembles with (p+1+extra)^2 Gauss points per cell. Without `constrain`, every DOF is free.
LinearSystem assemble(const ProblemData& data, const SplineSpace& space, int extra_quadrature = 0,
                      bool constrain = true);

/// Full coefficient vector (constrained entries zero). Throws SolverFailure if the residual
/// exceeds 1e-12 times max(||b||, || |A| |x| ||).
Eigen::VectorXd solve(const LinearSystem& sys);
double relative_residual(const LinearSystem& sys, const Eigen::VectorXd& full);

struct ExactSolution {
  std::function<Eigen::Vector2d(const Eigen::Vector2d&)> value;
  /// gradient(c,k) = d u_c / d x_k.
  std::function<Eigen::Matrix2d(const Eigen::Vector2d&)> gradient;
};

struct H1Error {
  double error = 0;
  /// H1 norm of the exact solution, for relative errors.
  double norm = 0;
};
H1Error h1_error(const ProblemData& data, const SplineSpace& space, const Eigen::VectorXd& U,
                 const ExactSolution& exact, int extra_quadrature = 0);

/// Value and gradient (gradient(c,k)) of the discrete field at parametric (u,v).
std::pair<Eigen::Vector2d, Eigen::Matrix2d> eval_field(const ProblemData& data, const SplineSpace& space,
                                                       const Eigen::VectorXd& U, double u, double v);

struct Estimate {
  /// Indexed by mesh element.
  std::vector<double> eta;
  double total = 0;
};
Estimate estimate(const ProblemData& data, const SplineSpace& space, const Eigen::VectorXd& U);

/// lambda_max / lambda_min; dense eigenvalues up to `dense_threshold` rows, Lanczos beyond.
double condition_number(const Eigen::SparseMatrix<double>& A, std::size_t dense_threshold = 1000);

struct SparsityStats {
  std::size_t n = 0;
  std::size_t nnz = 0;
  std::size_t max_row_nnz = 0;
  std::size_t bandwidth = 0;
};
SparsityStats sparsity_stats(const Eigen::SparseMatrix<double>& A);

/// Coordinate real symmetric format, lower triangle.
void write_matrix_market(std::ostream& os, const Eigen::SparseMatrix<double>& A);

}  // namespace aiga
