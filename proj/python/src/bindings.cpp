#include <pybind11/functional.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "aiga/adaptive.hpp"
#include "aiga/error.hpp"
#include "aiga/extraction.hpp"

namespace py = pybind11;
using namespace aiga;

namespace {

py::dict record_dict(const RunRecord& r) {
  py::dict d;
  d["step"] = r.step;
  d["dof"] = r.dof;
  d["h1_error"] = r.h1_error;
  d["eta_total"] = r.eta_total;
  d["cond"] = r.cond;
  d["nnz"] = r.nnz;
  d["max_row_nnz"] = r.max_row_nnz;
  d["elements"] = r.elements;
  d["seconds"] = r.seconds;
  return d;
}

MarkingKind marking_kind(const std::string& s) { return parse_marking(s); }

}  // namespace

PYBIND11_MODULE(_aiga, m) {
  m.doc() = "Adaptive hierarchical and T-spline refinement for isogeometric analysis";

  py::register_exception<Error>(m, "AigaError", PyExc_ValueError);

  py::class_<Dyadic>(m, "Dyadic")
      .def(py::init<std::int64_t>())
      .def(py::init<std::int64_t, unsigned>(), py::arg("numerator"), py::arg("scale"))
      .def_property_readonly("numerator", &Dyadic::numerator)
      .def_property_readonly("scale", &Dyadic::scale)
      .def("__float__", &Dyadic::to_double)
      .def("__str__", &Dyadic::str)
      .def("__repr__", [](const Dyadic& d) { return "Dyadic(" + d.str() + ")"; })
      .def(py::self + py::self)
      .def(py::self - py::self)
      .def(py::self * py::self)
      .def(py::self == py::self)
      .def(py::self < py::self)
      .def(py::self <= py::self)
      .def("__hash__", [](const Dyadic& d) { return std::hash<std::string>{}(d.str()); })
      .def("half", &Dyadic::half);

  py::class_<DyadicBox>(m, "DyadicBox")
      .def(py::init<Dyadic, Dyadic, Dyadic, Dyadic>(), py::arg("x_lo"), py::arg("x_hi"), py::arg("y_lo"), py::arg("y_hi"))
      .def_readonly("x_lo", &DyadicBox::x_lo)
      .def_readonly("x_hi", &DyadicBox::x_hi)
      .def_readonly("y_lo", &DyadicBox::y_lo)
      .def_readonly("y_hi", &DyadicBox::y_hi)
      .def("__eq__", [](const DyadicBox& a, const DyadicBox& b) { return a == b; })
      .def("__repr__", [](const DyadicBox& b) {
        std::ostringstream os;
        os << b;
        return os.str();
      });
  m.def("box_relation", [](const DyadicBox& a, const DyadicBox& b) { return std::string(to_string(box_relation(a, b))); });

  m.def("bspline_eval", [](const std::vector<double>& knots, double x, int d) { return bspline_eval(std::span<const double>(knots), x, d); },
        py::arg("knots"), py::arg("x"),
        py::arg("deriv_order") = 0);

  py::enum_<ThbVariant>(m, "ThbVariant").value("MINIMAL", ThbVariant::Minimal).value("SAFE", ThbVariant::Safe);

  py::class_<HierElement>(m, "HierElement")
      .def(py::init([](int level, std::int64_t i, std::int64_t j) { return HierElement{level, i, j}; }))
      .def_readonly("level", &HierElement::level)
      .def_readonly("i", &HierElement::i)
      .def_readonly("j", &HierElement::j)
      .def("box", &HierElement::box)
      .def("__eq__", [](const HierElement& a, const HierElement& b) { return a == b; })
      .def("__repr__", [](const HierElement& e) {
        return "HierElement(" + std::to_string(e.level) + ", " + std::to_string(e.i) + ", " + std::to_string(e.j) + ")";
      });

  py::class_<HierMesh>(m, "HierMesh")
      .def(py::init<int, int, int>(), py::arg("M"), py::arg("N"), py::arg("degree") = 3)
      .def_property_readonly("M", &HierMesh::M)
      .def_property_readonly("N", &HierMesh::N)
      .def_property_readonly("max_level", &HierMesh::max_level)
      .def_property_readonly("elements", &HierMesh::elements)
      .def("__len__", &HierMesh::size)
      .def("refine", [](const HierMesh& h, const std::vector<HierElement>& marked, ThbVariant v) { return refine_mesh(h, marked, v); })
      .def("num_functions", [](const HierMesh& h) { return thb_basis(h).size(); });
  m.def("overlay", py::overload_cast<const HierMesh&, const HierMesh&>(&overlay));

  py::class_<TMesh>(m, "TMesh")
      .def(py::init<int, int, int, int>(), py::arg("M"), py::arg("N"), py::arg("p") = 3, py::arg("q") = 3)
      .def_property_readonly("M", &TMesh::M)
      .def_property_readonly("N", &TMesh::N)
      .def_property_readonly("boxes", [](const TMesh& t) {
        std::vector<DyadicBox> out;
        for (const auto& e : t.elements()) out.push_back(e.box);
        return out;
      })
      .def("__len__", &TMesh::size)
      .def("refine_safe", [](const TMesh& t, const std::vector<DyadicBox>& marked) { return refine_safe_ts_mesh(t, marked); })
      .def("refine_scott", [](const TMesh& t, const std::vector<DyadicBox>& marked) { return refine_scott_mesh(t, marked); })
      .def("num_t_junctions", [](const TMesh& t) { return t_junctions(t).size(); })
      .def("is_analysis_suitable", [](const TMesh& t) { return is_analysis_suitable(t); })
      .def("num_functions", [](const TMesh& t) { return tspline_basis(t).size(); });
  m.def("overlay", py::overload_cast<const TMesh&, const TMesh&>(&overlay));

  m.def("mark", [](const std::vector<double>& eta, const std::string& kind, double theta, bool squared) {
    return mark(eta, {marking_kind(kind), theta, squared});
  }, py::arg("eta"), py::arg("kind") = "quantile", py::arg("theta") = 0.5, py::arg("squared") = false);

  m.def("problem_names", &problem_names);
  m.def("refiner_names", [] {
    std::vector<std::string> out;
    for (auto r : all_refiners()) out.emplace_back(to_string(r));
    return out;
  });
  m.def("expected_rate", &expected_rate, py::arg("problem"), py::arg("adaptive"), py::arg("degree") = 3);
  m.def("default_theta", [](const std::string& problem, const std::string& refiner) {
    return default_marking(problem, parse_refiner(refiner)).theta;
  });

  m.def(
      "run",
      [](const std::string& problem, const std::string& refiner, std::optional<double> theta, const std::string& marking,
         int steps, std::size_t max_dof, int degree, bool condition) {
        const auto pd = build_problem(problem, degree);
        const Refiner r = parse_refiner(refiner);
        MarkingStrategy ms = default_marking(problem, r);
        ms.kind = parse_marking(marking);
        if (theta) ms.theta = *theta;
        RunLimits lim;
        lim.steps = steps;
        lim.max_dof = max_dof;
        lim.condition = condition;
        lim.timing = true;
        std::vector<RunRecord> recs;
        {
          py::gil_scoped_release release;
          recs = run(pd, r, ms, lim);
        }
        py::list out;
        for (const auto& x : recs) out.append(record_dict(x));
        return out;
      },
      py::arg("problem"), py::arg("refiner"), py::arg("theta") = py::none(), py::arg("marking") = "quantile",
      py::arg("steps") = 10, py::arg("max_dof") = 200000, py::arg("degree") = 3, py::arg("condition") = false,
      "Adaptive loop; returns one dict per step with the run.csv columns.");

  m.def("fit_rate", py::overload_cast<const std::vector<double>&, const std::vector<double>&>(&fit_rate), py::arg("dof"),
        py::arg("error"));
}
