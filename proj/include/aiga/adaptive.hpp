#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "aiga/assembly.hpp"
#include "aiga/bench.hpp"
#include "aiga/hiermesh.hpp"
#include "aiga/tmesh.hpp"

namespace aiga {

enum class MarkingKind { Quantile, Doerfler, Maximum };

struct MarkingStrategy {
  MarkingKind kind = MarkingKind::Quantile;
  double theta = 0.5;
  /// Doerfler on squared estimates instead of the plain sums.
  bool squared = false;
};

/// Indices into `eta` of the marked elements, in descending eta order (ties by index).
std::vector<std::size_t> mark(const std::vector<double>& eta, const MarkingStrategy& strategy);

enum class Refiner { Uniform, ThbMinimal, ThbSafe, TsMinimal, TsSafe };

const char* to_string(Refiner r);
Refiner parse_refiner(const std::string& s);
MarkingKind parse_marking(const std::string& s);
std::vector<Refiner> all_refiners();

/// Benchmark default: quantile marking with a per-problem, per-refiner theta.
MarkingStrategy default_marking(const std::string& problem, Refiner refiner);

struct RunRecord {
  int step = 0;
  std::size_t dof = 0;
  double h1_error = 0;
  double eta_total = 0;
  double cond = 0;
  std::size_t nnz = 0;
  std::size_t max_row_nnz = 0;
  std::size_t elements = 0;
  double seconds = 0;
};

struct RunLimits {
  int steps = 10;
  std::size_t max_dof = 200000;
  bool condition = true;
  /// Skip the condition number above this many free DOFs (0 = no limit).
  std::size_t condition_max_dof = 0;
  std::size_t dense_threshold = 1000;
  bool timing = true;
};

/// Everything a step produced, handed to the observer before refinement.
struct StepView {
  int step = 0;
  Refiner refiner = Refiner::Uniform;
  const HierMesh* hier = nullptr;
  const TMesh* tmesh = nullptr;
  int frame = 0;
  const SplineSpace* space = nullptr;
  const LinearSystem* system = nullptr;
  const Eigen::VectorXd* solution = nullptr;
  const Estimate* estimate = nullptr;
  const RunRecord* record = nullptr;
};
using StepObserver = std::function<void(const StepView&)>;

std::vector<RunRecord> run(const ProblemDefinition& problem, Refiner refiner, const MarkingStrategy& marking,
                           const RunLimits& limits, const StepObserver& observer = {});

/// Least-squares slope of log(error) against log(DOF) over the last `window` records, negated.
double fit_rate(const std::vector<RunRecord>& records, std::size_t window);
double fit_rate(const std::vector<double>& dof, const std::vector<double>& value);

void write_csv(std::ostream& os, const std::vector<RunRecord>& records);

}  // namespace aiga
