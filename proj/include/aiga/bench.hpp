#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "aiga/assembly.hpp"

namespace aiga {

struct ProblemDefinition {
  std::string name;
  ProblemData data;
  /// Empty closures for worst_case.
  ExactSolution exact;
  /// Initial mesh in parametric cells.
  int M = 0, N = 0;
  int degree = 3;
  /// Ignore the estimator and mark the lower-left element.
  bool corner_marking = false;

  /// Index-domain frame width for T-spline meshes: (p-1)/2.
  int frame() const { return (degree - 1) / 2; }
};

/// One of worst_case, lshape, slit, plate_hole.
ProblemDefinition build_problem(const std::string& name, int degree = 3);
std::vector<std::string> problem_names();

/// Uniform or adaptive H1 convergence rate in terms of DOFs.
double expected_rate(const std::string& name, bool adaptive, int degree = 3);

/// Cartesian stress (xx, yy, xy) of the infinite plate with a hole under unit tension along x.
Eigen::Vector3d plate_stress(const Eigen::Vector2d& x, double hole_radius = 1.0, double sigma0 = 1.0);

}  // namespace aiga
