#include "doctest.h"

#include <aiga/extraction.hpp>

#include <algorithm>
#include <random>

#include <unsupported/Eigen/KroneckerProduct>

#include "oracles.hpp"

using namespace aiga;

namespace {

std::vector<double> clamped(const LocalKnotVector& k, double shift, double hi) {
  std::vector<double> out;
  for (const auto& x : k.knots) out.push_back(std::clamp(x.to_double() - shift, 0.0, hi));
  return out;
}

DyadicBox element_at(const TMesh& m, double x, double y) {
  for (const auto& e : m.elements())
    if (e.box.x_lo.to_double() <= x && x < e.box.x_hi.to_double() && e.box.y_lo.to_double() <= y &&
        y < e.box.y_hi.to_double())
      return e.box;
  FAIL("point outside mesh");
  return {};
}

double max_pou_defect(const SplineSpace& s) {
  double worst = 0.0;
  for (const auto& c : s.cells) {
    const Eigen::RowVectorXd sums = c.extraction.colwise().sum();
    worst = std::max(worst, (sums.array() - 1.0).abs().maxCoeff());
  }
  return worst;
}

// Mass matrix assembled from the extraction and the closed-form Bernstein mass matrix.
Eigen::MatrixXd gram(const SplineSpace& s) {
  auto binom = [](int n, int k) {
    double r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
  };
  auto mass1 = [&](int p) {
    Eigen::MatrixXd m(p + 1, p + 1);
    for (int i = 0; i <= p; ++i)
      for (int j = 0; j <= p; ++j) m(i, j) = binom(p, i) * binom(p, j) / binom(2 * p, i + j) / (2 * p + 1);
    return m;
  };
  const Eigen::MatrixXd mb = Eigen::kroneckerProduct(mass1(s.p), mass1(s.q)).eval();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(s.num_functions, s.num_functions);
  for (const auto& c : s.cells) {
    const Eigen::MatrixXd local = c.param.du() * c.param.dv() * c.extraction * mb * c.extraction.transpose();
    for (std::size_t a = 0; a < c.active_ids.size(); ++a)
      for (std::size_t b = 0; b < c.active_ids.size(); ++b) g(c.active_ids[a], c.active_ids[b]) += local(a, b);
  }
  return g;
}

bool full_rank(const Eigen::MatrixXd& g) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
  return es.eigenvalues().minCoeff() > 1e-10 * es.eigenvalues().maxCoeff();
}

void check_tspline_reproduction(const TMesh& m, const std::vector<TSplineFunction>& basis, const SplineSpace& s,
                                int frame, std::mt19937& rng) {
  std::uniform_real_distribution<double> u01(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto& c = s.cells[rng() % s.cells.size()];
    for (int k = 0; k < 5; ++k) {
      const double a = u01(rng), b = u01(rng);
      const Eigen::VectorXd bt = bernstein_tensor(s.p, s.q, a, b);
      const double u = c.param.u0 + a * c.param.du(), v = c.param.v0 + b * c.param.dv();
      for (std::size_t r = 0; r < c.active_ids.size(); ++r) {
        const auto& f = basis[s.source[c.active_ids[r]]];
        const double ref = oracle::bspline(clamped(f.knots_x, frame, s.width), u) *
                           oracle::bspline(clamped(f.knots_y, frame, s.height), v);
        CHECK(std::abs(c.extraction.row(r).dot(bt) - ref) < 1e-12);
      }
    }
  }
  (void)m;
}

}  // namespace

TEST_CASE("single element extraction is the identity") {
  SUBCASE("THB") {
    const HierMesh m(1, 1, 3);
    const auto s = extract(m, thb_basis(m));
    REQUIRE(s.cells.size() == 1);
    CHECK(s.cells[0].active_ids.size() == 16);
    CHECK((s.cells[0].extraction - Eigen::MatrixXd::Identity(16, 16)).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("framed T-spline") {
    const TMesh m(3, 3, 3, 3);
    const auto s = extract(m, tspline_basis(m), 1);
    REQUIRE(s.cells.size() == 1);
    CHECK(s.num_functions == 16);
    CHECK(s.cells[0].active_ids.size() == 16);
    CHECK((s.cells[0].extraction - Eigen::MatrixXd::Identity(16, 16)).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("uniform tensor mesh has 16 active functions per cell") {
  const HierMesh m(5, 4, 3);
  const auto s = extract(m, thb_basis(m));
  CHECK(s.num_functions == 8 * 7);
  for (const auto& c : s.cells) CHECK(c.active_ids.size() == 16);
  const TMesh t(5, 4, 3, 3);
  const auto st = extract(t, tspline_basis(t));
  for (const auto& c : st.cells)
    if (c.box.x_lo >= Dyadic(1) && c.box.x_hi <= Dyadic(4) && c.box.y_lo >= Dyadic(1) && c.box.y_hi <= Dyadic(3))
      CHECK(c.active_ids.size() == 16);
  for (std::size_t k = 1; k < s.cells.size(); ++k) {
    const auto& a = s.cells[k - 1].box;
    const auto& b = s.cells[k].box;
    CHECK(std::tie(a.y_lo, a.x_lo) < std::tie(b.y_lo, b.x_lo));
  }
}

TEST_CASE("THB extraction reproduces the truncated functions") {
  std::mt19937 rng(17);
  for (auto variant : {ThbVariant::Minimal, ThbVariant::Safe}) {
    HierMesh m(4, 4, 3);
    for (int step = 0; step < 4; ++step) {
      std::vector<HierElement> marked;
      for (const auto& e : m.elements())
        if (rng() % 6 == 0) marked.push_back(e);
      marked.push_back(m.elements()[m.index_of(m.elements().front())]);
      m = refine_mesh(m, marked, variant);
    }
    const auto basis = thb_basis(m);
    const auto s = extract(m, basis);
    CHECK(max_pou_defect(s) < 1e-12);
    std::uniform_real_distribution<double> u01(0.01, 0.99);
    for (int trial = 0; trial < 30; ++trial) {
      const auto& c = s.cells[rng() % s.cells.size()];
      const double a = u01(rng), b = u01(rng);
      const double x = c.param.u0 + a * c.param.du(), y = c.param.v0 + b * c.param.dv();
      const Eigen::VectorXd bt = bernstein_tensor(3, 3, a, b);
      for (std::size_t r = 0; r < c.active_ids.size(); ++r)
        CHECK(std::abs(c.extraction.row(r).dot(bt) - eval_thb(m, basis[c.active_ids[r]], x, y)) < 1e-12);
      // exactly the functions nonzero somewhere on the cell
      std::size_t nonzero = 0;
      for (const auto& f : basis) {
        double mx = 0;
        for (int i = 1; i < 6; ++i)
          for (int j = 1; j < 6; ++j)
            mx = std::max(mx, std::abs(eval_thb(m, f, c.param.u0 + i / 6.0 * c.param.du(),
                                                c.param.v0 + j / 6.0 * c.param.dv())));
        if (mx > 1e-12) ++nonzero;
      }
      CHECK(nonzero == c.active_ids.size());
    }
  }
}

TEST_CASE("worst-case corner mesh level interaction") {
  auto corner_run = [](ThbVariant v) {
    HierMesh m(8, 8, 3);
    for (int step = 0; step < 6; ++step) {
      HierElement best = m.elements().front();
      for (const auto& e : m.elements())
        if (e.i == 0 && e.j == 0 && e.level >= best.level) best = e;
      m = refine_mesh(m, {best}, v);
    }
    const auto basis = thb_basis(m);
    return max_levels_per_cell(extract(m, basis), basis);
  };
  CHECK(corner_run(ThbVariant::Minimal) > 2);
  CHECK(corner_run(ThbVariant::Safe) <= 2);
}

TEST_CASE("framed T-spline extraction after corner refinement") {
  std::mt19937 rng(5);
  SUBCASE("safe") {
    TMesh m(6, 6, 3, 3);
    for (int step = 0; step < 4; ++step) {
      const auto basis = tspline_basis(m);
      const auto s = extract(m, basis, 1);
      CHECK(max_pou_defect(s) < 1e-12);
      check_tspline_reproduction(m, basis, s, 1, rng);
      if (s.num_functions <= 400) CHECK(full_rank(gram(s)));
      m = refine_safe_ts_mesh(m, {element_at(m, 1.0001, 1.0001), element_at(m, 3.5, 1.0001)});
    }
  }
  SUBCASE("Scott") {
    TMesh m(6, 6, 3, 3);
    for (int step = 0; step < 5; ++step) {
      const auto basis = tspline_basis(m);
      const auto s = extract(m, basis, 1);
      CHECK(max_pou_defect(s) < 1e-12);
      check_tspline_reproduction(m, basis, s, 1, rng);
      if (s.num_functions <= 400) CHECK(full_rank(gram(s)));
      m = refine_scott_mesh(m, {element_at(m, 1.0001, 1.0001), element_at(m, 3.0001, 1.0001)});
    }
  }
}

TEST_CASE("T-spline extraction without frame matches the index-domain functions") {
  TMesh m(4, 4, 3, 3);
  m = refine_safe_ts_mesh(m, {element_at(m, 1.5, 1.5)});
  const auto basis = tspline_basis(m);
  const auto s = extract(m, basis);
  CHECK(s.num_functions == basis.size());
  std::mt19937 rng(2);
  check_tspline_reproduction(m, basis, s, 0, rng);
}
