#include "aiga/adaptive.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>

#include "aiga/error.hpp"
#include "aiga/extraction.hpp"

namespace aiga {

std::vector<std::size_t> mark(const std::vector<double>& eta, const MarkingStrategy& s) {
  if (eta.empty()) throw Error(ErrorCode::InvalidArgument, "cannot mark an empty mesh");
  if (!(s.theta >= 0 && s.theta <= 1)) throw Error(ErrorCode::InvalidArgument, "theta must lie in [0,1]");
  std::vector<std::size_t> order(eta.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return eta[a] > eta[b]; });
  std::size_t k = 0;
  switch (s.kind) {
    case MarkingKind::Quantile:
      k = static_cast<std::size_t>(std::ceil(s.theta * static_cast<double>(eta.size()) - 1e-9));
      break;
    case MarkingKind::Doerfler: {
      if (s.theta == 0) break;
      auto w = [&](double e) { return s.squared ? e * e : e; };
      double total = 0;
      for (double e : eta) total += w(e);
      const double target = s.theta * total;
      double prefix = 0;
      while (k < order.size()) {
        prefix += w(eta[order[k++]]);
        if (prefix >= target) break;
      }
      break;
    }
    case MarkingKind::Maximum: {
      const double bound = s.theta * eta[order.front()];
      while (k < order.size() && eta[order[k]] >= bound) ++k;
      break;
    }
  }
  order.resize(std::min(k, order.size()));
  return order;
}

const char* to_string(Refiner r) {
  switch (r) {
    case Refiner::Uniform: return "uniform";
    case Refiner::ThbMinimal: return "thb-min";
    case Refiner::ThbSafe: return "thb-safe";
    case Refiner::TsMinimal: return "ts-min";
    case Refiner::TsSafe: return "ts-safe";
  }
  return "?";
}

Refiner parse_refiner(const std::string& s) {
  for (auto r : all_refiners())
    if (s == to_string(r)) return r;
  throw Error(ErrorCode::InvalidArgument, "unknown refiner: " + s);
}

MarkingKind parse_marking(const std::string& s) {
  if (s == "quantile") return MarkingKind::Quantile;
  if (s == "doerfler" || s == "dorfler") return MarkingKind::Doerfler;
  if (s == "maximum") return MarkingKind::Maximum;
  throw Error(ErrorCode::InvalidArgument, "unknown marking: " + s);
}

std::vector<Refiner> all_refiners() {
  return {Refiner::Uniform, Refiner::ThbMinimal, Refiner::ThbSafe, Refiner::TsMinimal, Refiner::TsSafe};
}

MarkingStrategy default_marking(const std::string& problem, Refiner refiner) {
  struct Entry {
    const char* problem;
    double thb_min, thb_safe, ts_min, ts_safe;
  };
  static const Entry table[] = {
      {"lshape", 0.2, 0.2, 0.05, 0.4},
      {"slit", 0.08, 0.08, 0.01, 0.05},
      {"plate_hole", 0.5, 0.5, 0.5, 0.5},
  };
  MarkingStrategy s{MarkingKind::Quantile, 0.5};
  for (const auto& e : table) {
    if (problem != e.problem) continue;
    switch (refiner) {
      case Refiner::ThbMinimal: s.theta = e.thb_min; break;
      case Refiner::ThbSafe: s.theta = e.thb_safe; break;
      case Refiner::TsMinimal: s.theta = e.ts_min; break;
      case Refiner::TsSafe: s.theta = e.ts_safe; break;
      case Refiner::Uniform: break;
    }
  }
  return s;
}

namespace {

bool is_thb(Refiner r) { return r == Refiner::Uniform || r == Refiner::ThbMinimal || r == Refiner::ThbSafe; }

std::size_t corner_element(const HierMesh& m) {
  std::size_t best = 0;
  for (std::size_t k = 0; k < m.size(); ++k) {
    const auto& e = m.elements()[k];
    if (e.i == 0 && e.j == 0 && e.level >= m.elements()[best].level) best = k;
  }
  return best;
}

std::size_t corner_element(const TMesh& m, int frame) {
  std::size_t best = m.size();
  for (std::size_t k = 0; k < m.size(); ++k) {
    const auto& b = m.elements()[k].box;
    if (b.x_lo != Dyadic(frame) || b.y_lo != Dyadic(frame)) continue;
    if (best == m.size() || b.width() * b.height() < m.elements()[best].box.width() * m.elements()[best].box.height())
      best = k;
  }
  return best;
}

}  // namespace

std::vector<RunRecord> run(const ProblemDefinition& problem, Refiner refiner, const MarkingStrategy& marking,
                           const RunLimits& limits, const StepObserver& observer) {
  if (limits.steps < 1) throw Error(ErrorCode::InvalidArgument, "steps must be positive");
  const int p = problem.degree, f = problem.frame();
  const int nc = components(problem.data.kind);
  std::optional<HierMesh> hier;
  std::optional<TMesh> tmesh;
  if (is_thb(refiner))
    hier.emplace(problem.M, problem.N, p);
  else
    tmesh.emplace(problem.M + 2 * f, problem.N + 2 * f, p, p);

  std::vector<RunRecord> records;
  for (int step = 0; step < limits.steps; ++step) {
    const auto t0 = std::chrono::steady_clock::now();
    const SplineSpace space = hier ? extract(*hier, thb_basis(*hier)) : extract(*tmesh, tspline_basis(*tmesh), f);
    RunRecord rec;
    rec.step = step;
    rec.dof = space.num_functions * nc;
    if (rec.dof > limits.max_dof) break;

    std::vector<char> markable(space.num_elements, 0);
    for (const auto& c : space.cells) markable[c.element] = 1;
    rec.elements = static_cast<std::size_t>(std::count(markable.begin(), markable.end(), 1));

    const LinearSystem sys = assemble(problem.data, space);
    Eigen::VectorXd U = Eigen::VectorXd::Zero(sys.num_dofs);
    Estimate est;
    est.eta.assign(space.num_elements, 0.0);
    if (problem.data.kind != ProblemKind::MatrixOnly) {
      U = solve(sys);
      rec.h1_error = h1_error(problem.data, space, U, problem.exact).error;
      est = estimate(problem.data, space, U);
      rec.eta_total = est.total;
    }
    const auto stats = sparsity_stats(sys.A);
    rec.nnz = stats.nnz;
    rec.max_row_nnz = stats.max_row_nnz;
    if (limits.condition && (limits.condition_max_dof == 0 || stats.n <= limits.condition_max_dof))
      rec.cond = condition_number(sys.A, limits.dense_threshold);
    if (limits.timing)
      rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    records.push_back(rec);

    if (observer) {
      StepView view;
      view.step = step;
      view.refiner = refiner;
      view.hier = hier ? &*hier : nullptr;
      view.tmesh = tmesh ? &*tmesh : nullptr;
      view.frame = hier ? 0 : f;
      view.space = &space;
      view.system = &sys;
      view.solution = &U;
      view.estimate = &est;
      view.record = &records.back();
      observer(view);
    }
    if (step + 1 == limits.steps) break;

    std::vector<std::size_t> marked;
    if (refiner == Refiner::Uniform) {
      // marking has no effect on uniform refinement
    } else if (problem.corner_marking) {
      marked.push_back(hier ? corner_element(*hier) : corner_element(*tmesh, f));
    } else {
      std::vector<std::size_t> ids;
      std::vector<double> eta;
      for (std::size_t e = 0; e < space.num_elements; ++e)
        if (markable[e]) {
          ids.push_back(e);
          eta.push_back(est.eta[e]);
        }
      for (auto k : mark(eta, marking)) marked.push_back(ids[k]);
      std::sort(marked.begin(), marked.end());
    }

    switch (refiner) {
      case Refiner::Uniform: hier = uniform_refine(*hier); break;
      case Refiner::ThbMinimal:
      case Refiner::ThbSafe: {
        std::vector<HierElement> m;
        for (auto k : marked) m.push_back(hier->elements()[k]);
        hier = refine_mesh(*hier, m, refiner == Refiner::ThbMinimal ? ThbVariant::Minimal : ThbVariant::Safe);
        break;
      }
      case Refiner::TsMinimal:
      case Refiner::TsSafe: {
        std::vector<DyadicBox> m;
        for (auto k : marked) m.push_back(tmesh->elements()[k].box);
        tmesh = refiner == Refiner::TsMinimal ? refine_scott_mesh(*tmesh, m) : refine_safe_ts_mesh(*tmesh, m);
        break;
      }
    }
  }
  return records;
}

double fit_rate(const std::vector<double>& dof, const std::vector<double>& value) {
  if (dof.size() != value.size() || dof.size() < 2) throw Error(ErrorCode::InvalidArgument, "need at least two points");
  const auto n = static_cast<double>(dof.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < dof.size(); ++k) {
    if (!(dof[k] > 0) || !(value[k] > 0)) throw Error(ErrorCode::InvalidArgument, "rates need positive values");
    const double x = std::log(dof[k]), y = std::log(value[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double den = n * sxx - sx * sx;
  if (den == 0) throw Error(ErrorCode::InvalidArgument, "DOF values must differ");
  return -(n * sxy - sx * sy) / den;
}

double fit_rate(const std::vector<RunRecord>& records, std::size_t window) {
  if (window < 2 || records.size() < window) throw Error(ErrorCode::InvalidArgument, "not enough records for the window");
  std::vector<double> dof, err;
  for (auto it = records.end() - static_cast<std::ptrdiff_t>(window); it != records.end(); ++it) {
    dof.push_back(static_cast<double>(it->dof));
    err.push_back(it->h1_error);
  }
  return fit_rate(dof, err);
}

void write_csv(std::ostream& os, const std::vector<RunRecord>& records) {
  os << "step,dof,h1_error,eta_total,cond,nnz,max_row_nnz,elements,seconds\n";
  os << std::setprecision(12);
  for (const auto& r : records)
    os << r.step << ',' << r.dof << ',' << r.h1_error << ',' << r.eta_total << ',' << r.cond << ',' << r.nnz << ','
       << r.max_row_nnz << ',' << r.elements << ',' << r.seconds << '\n';
}

}  // namespace aiga
