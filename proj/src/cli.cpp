#include "aiga/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "aiga/adaptive.hpp"
#include "aiga/error.hpp"

namespace aiga {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct RunConfig {
  std::string problem = "lshape";
  std::string refiner = "thb-safe";
  std::string marking = "quantile";
  std::optional<double> theta;
  int degree = 3;
  int steps = 10;
  std::size_t dof_cap = 200000;
  std::string out = "out";
  bool no_svg = false;
  bool no_sparsity = false;
  bool no_condition = false;
  bool no_timing = false;
  std::size_t dense_threshold = 1000;
};

void add_common(CLI::App& app, RunConfig& c) {
  app.add_option("--problem", c.problem, "Benchmark problem")
      ->check(CLI::IsMember({"worst_case", "lshape", "slit", "plate_hole"}));
  app.add_option("--marking", c.marking, "Marking strategy")->check(CLI::IsMember({"quantile", "doerfler", "dorfler", "maximum"}));
  app.add_option("--theta", c.theta, "Marking parameter (default: per problem and refiner)")->check(CLI::Range(0.0, 1.0));
  app.add_option("--degree", c.degree, "Odd spline degree")->check(CLI::PositiveNumber);
  app.add_option("--steps", c.steps, "Number of steps (records)")->check(CLI::PositiveNumber);
  app.add_option("--dof-cap", c.dof_cap, "Stop before a step exceeding this many DOFs");
  app.add_option("--out", c.out, "Output directory");
  app.add_option("--dense-threshold", c.dense_threshold, "Largest matrix for dense condition numbers");
  app.add_flag("--no-svg", c.no_svg, "Skip mesh SVG files");
  app.add_flag("--no-sparsity", c.no_sparsity, "Skip MatrixMarket files");
  app.add_flag("--no-condition", c.no_condition, "Skip condition numbers");
  app.add_flag("--no-timing", c.no_timing, "Write zero wall times (byte-identical output)");
}

struct Rect {
  double x0, y0, x1, y1;
};

void write_svg(const fs::path& path, double width, double height, const std::vector<Rect>& elements,
               const std::vector<Rect>& extensions) {
  std::ofstream os(path);
  os << std::setprecision(17);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << width << ' ' << height
     << "\" width=\"600\" height=\"" << 600.0 * height / width << "\">\n";
  os << "<g transform=\"matrix(1 0 0 -1 0 " << height << ")\" fill=\"none\" stroke-width=\"1\" "
     << "vector-effect=\"non-scaling-stroke\">\n";
  for (const auto& r : elements)
    os << "<rect x=\"" << r.x0 << "\" y=\"" << r.y0 << "\" width=\"" << r.x1 - r.x0 << "\" height=\"" << r.y1 - r.y0
       << "\" stroke=\"black\" vector-effect=\"non-scaling-stroke\"/>\n";
  for (const auto& r : extensions)
    os << "<line x1=\"" << r.x0 << "\" y1=\"" << r.y0 << "\" x2=\"" << r.x1 << "\" y2=\"" << r.y1
       << "\" stroke=\"red\" vector-effect=\"non-scaling-stroke\"/>\n";
  os << "</g>\n</svg>\n";
}

Rect rect(const DyadicBox& b) { return {b.x_lo.to_double(), b.y_lo.to_double(), b.x_hi.to_double(), b.y_hi.to_double()}; }

double aspect(const DyadicBox& b) {
  const double w = b.width().to_double(), h = b.height().to_double();
  return std::max(w / h, h / w);
}

json rate_or_null(const std::vector<RunRecord>& recs) {
  const std::size_t w = std::min<std::size_t>(4, recs.size());
  if (w < 2) return nullptr;
  for (auto it = recs.end() - static_cast<std::ptrdiff_t>(w); it != recs.end(); ++it)
    if (!(it->h1_error > 0)) return nullptr;
  return fit_rate(recs, w);
}

json condition_slope(const std::vector<RunRecord>& recs) {
  std::vector<double> dof, cond;
  for (const auto& r : recs)
    if (r.cond > 0) {
      dof.push_back(static_cast<double>(r.dof));
      cond.push_back(r.cond);
    }
  if (dof.size() < 2 || dof.front() == dof.back()) return nullptr;
  return -fit_rate(dof, cond);
}

/// One run into `dir`; returns its summary entry.
json execute(const RunConfig& c, Refiner refiner, const fs::path& dir) {
  fs::create_directories(dir);
  const ProblemDefinition pd = build_problem(c.problem, c.degree);
  MarkingStrategy marking = default_marking(c.problem, refiner);
  marking.kind = parse_marking(c.marking);
  if (c.theta) marking.theta = *c.theta;

  RunLimits lim;
  lim.steps = c.steps;
  lim.max_dof = c.dof_cap;
  lim.condition = !c.no_condition;
  lim.dense_threshold = c.dense_threshold;
  lim.timing = !c.no_timing;

  double max_aspect = 1;
  auto observer = [&](const StepView& v) {
    std::vector<Rect> elems, ext;
    double w = 0, h = 0;
    if (v.hier) {
      for (const auto& e : v.hier->elements()) {
        elems.push_back(rect(e.box()));
        max_aspect = std::max(max_aspect, aspect(e.box()));
      }
      w = v.hier->M(), h = v.hier->N();
    } else {
      for (const auto& e : v.tmesh->elements()) {
        elems.push_back(rect(e.box));
        max_aspect = std::max(max_aspect, aspect(e.box));
      }
      for (const auto& j : t_junctions(*v.tmesh)) {
        const Segment s = extension(*v.tmesh, j).segment;
        ext.push_back({s.a.x.to_double(), s.a.y.to_double(), s.b.x.to_double(), s.b.y.to_double()});
      }
      w = v.tmesh->M(), h = v.tmesh->N();
    }
    const std::string n = std::to_string(v.step);
    if (!c.no_svg) write_svg(dir / ("mesh_step" + n + ".svg"), w, h, elems, ext);
    if (!c.no_sparsity) {
      std::ofstream os(dir / ("sparsity_step" + n + ".mtx"));
      write_matrix_market(os, v.system->A);
    }
  };
  const auto recs = run(pd, refiner, marking, lim, observer);
  {
    std::ofstream os(dir / "run.csv");
    write_csv(os, recs);
  }
  json s;
  s["problem"] = c.problem;
  s["refiner"] = to_string(refiner);
  s["marking"] = c.marking;
  s["theta"] = marking.theta;
  s["degree"] = c.degree;
  s["steps"] = recs.size();
  s["rate"] = rate_or_null(recs);
  s["expected_rate"] = pd.data.kind == ProblemKind::MatrixOnly ? json(nullptr)
                                                               : json(expected_rate(c.problem, refiner != Refiner::Uniform, c.degree));
  s["condition_slope"] = condition_slope(recs);
  s["max_aspect_ratio"] = max_aspect;
  s["final_dof"] = recs.empty() ? 0 : recs.back().dof;
  s["final_h1_error"] = recs.empty() ? 0.0 : recs.back().h1_error;
  s["final_max_row_nnz"] = recs.empty() ? 0 : recs.back().max_row_nnz;
  return s;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  os << j.dump(2) << '\n';
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Adaptive isogeometric refinement benchmarks"};
  app.require_subcommand(1);
  RunConfig rc, cc;
  auto* run_cmd = app.add_subcommand("run", "Run one refinement strategy");
  add_common(*run_cmd, rc);
  run_cmd->add_option("--refiner", rc.refiner, "Refinement strategy")
      ->check(CLI::IsMember({"uniform", "thb-min", "thb-safe", "ts-min", "ts-safe"}));
  auto* cmp_cmd = app.add_subcommand("compare", "Run all five strategies");
  add_common(*cmp_cmd, cc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run_cmd->parsed()) {
      const json s = execute(rc, parse_refiner(rc.refiner), rc.out);
      write_json(fs::path(rc.out) / "summary.json", s);
      std::cout << rc.out << "/run.csv: " << s["steps"] << " steps, final DOF " << s["final_dof"] << '\n';
    } else {
      json all = json::object();
      for (auto r : all_refiners()) {
        const std::string name = to_string(r);
        const fs::path dir = fs::path(cc.out) / name;
        all[name] = execute(cc, r, dir);
        fs::copy_file(dir / "run.csv", fs::path(cc.out) / (name + ".csv"), fs::copy_options::overwrite_existing);
        std::cout << name << ": " << all[name]["steps"] << " steps, final DOF " << all[name]["final_dof"] << '\n';
      }
      write_json(fs::path(cc.out) / "summary.json", all);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace aiga
