#include "aiga/extraction.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>
#include <unordered_map>

#include "aiga/bspline.hpp"
#include "aiga/error.hpp"

namespace aiga {

namespace {

constexpr double kZeroRow = 1e-13;

using RowList = std::vector<std::pair<std::size_t, Eigen::VectorXd>>;

void accumulate(RowList& rows, std::size_t id, const std::vector<double>& bx, const std::vector<double>& by,
                double c) {
  const auto nq = static_cast<Eigen::Index>(by.size());
  if (rows.empty() || rows.back().first != id) rows.emplace_back(id, Eigen::VectorXd::Zero(bx.size() * by.size()));
  auto& row = rows.back().second;
  for (std::size_t i = 0; i < bx.size(); ++i)
    for (std::size_t j = 0; j < by.size(); ++j) row[static_cast<Eigen::Index>(i) * nq + static_cast<Eigen::Index>(j)] += c * bx[i] * by[j];
}

void finish_cell(BezierElement& cell, RowList& rows, Eigen::Index ncols) {
  std::size_t kept = 0;
  for (const auto& r : rows)
    if (r.second.cwiseAbs().maxCoeff() > kZeroRow) ++kept;
  cell.extraction.resize(static_cast<Eigen::Index>(kept), ncols);
  cell.active_ids.clear();
  Eigen::Index k = 0;
  for (const auto& [id, row] : rows) {
    if (row.cwiseAbs().maxCoeff() <= kZeroRow) continue;
    cell.active_ids.push_back(id);
    cell.extraction.row(k++) = row.transpose();
  }
}

bool lower_left_less(const BezierElement& a, const BezierElement& b) {
  return std::tie(a.box.y_lo, a.box.x_lo) < std::tie(b.box.y_lo, b.box.x_lo);
}

}  // namespace

Eigen::VectorXd bernstein_tensor(int p, int q, double s, double t) {
  const auto bu = bernstein_row(p, s);
  const auto bv = bernstein_row(q, t);
  Eigen::VectorXd out((p + 1) * (q + 1));
  for (int i = 0; i <= p; ++i)
    for (int j = 0; j <= q; ++j) out[i * (q + 1) + j] = bu[i] * bv[j];
  return out;
}

double eval_cell(const SplineSpace& space, const BezierElement& cell, const Eigen::VectorXd& coefficients, double u,
                 double v) {
  const Eigen::VectorXd b =
      bernstein_tensor(space.p, space.q, (u - cell.param.u0) / cell.param.du(), (v - cell.param.v0) / cell.param.dv());
  double s = 0.0;
  for (std::size_t k = 0; k < cell.active_ids.size(); ++k)
    s += coefficients[static_cast<Eigen::Index>(cell.active_ids[k])] * cell.extraction.row(static_cast<Eigen::Index>(k)).dot(b);
  return s;
}

SplineSpace extract(const HierMesh& mesh, const std::vector<ThbFunction>& basis) {
  const int p = mesh.degree();
  SplineSpace space;
  space.p = space.q = p;
  space.width = mesh.M();
  space.height = mesh.N();
  space.num_functions = basis.size();
  space.num_elements = mesh.size();
  space.source.resize(basis.size());
  for (std::size_t k = 0; k < basis.size(); ++k) space.source[k] = k;

  std::vector<RowList> rows(mesh.size());
  for (std::size_t id = 0; id < basis.size(); ++id) {
    const auto& f = basis[id];
    for (std::size_t r = 0; r < f.levels.size(); ++r) {
      const int level = f.base.level + static_cast<int>(r);
      const auto sx = level_spline(mesh.M(), p, level);
      const auto sy = level_spline(mesh.N(), p, level);
      for (const auto& g : f.levels[r]) {
        for (auto ci = sx->first_cell(g.a); ci <= sx->last_cell(g.a); ++ci)
          for (auto cj = sy->first_cell(g.b); cj <= sy->last_cell(g.b); ++cj) {
            const auto e = mesh.element_covering(level, ci, cj);
            if (e < 0 || mesh.elements()[e].level != level) continue;
            accumulate(rows[e], id, sx->bezier[g.a][ci - sx->first_cell(g.a)],
                       sy->bezier[g.b][cj - sy->first_cell(g.b)], g.c);
          }
      }
    }
  }

  space.cells.resize(mesh.size());
  for (std::size_t e = 0; e < mesh.size(); ++e) {
    auto& cell = space.cells[e];
    cell.box = mesh.elements()[e].box();
    cell.param = {cell.box.x_lo.to_double(), cell.box.x_hi.to_double(), cell.box.y_lo.to_double(),
                  cell.box.y_hi.to_double()};
    cell.element = e;
    finish_cell(cell, rows[e], (p + 1) * (p + 1));
  }
  std::stable_sort(space.cells.begin(), space.cells.end(), lower_left_less);
  return space;
}

SplineSpace extract(const TMesh& mesh, const std::vector<TSplineFunction>& basis, int frame) {
  if (2 * frame >= mesh.M() || 2 * frame >= mesh.N()) throw Error(ErrorCode::InvalidArgument, "frame leaves no parametric domain");
  const int p = mesh.p(), q = mesh.q();
  SplineSpace space;
  space.p = p;
  space.q = q;
  space.width = mesh.M() - 2 * frame;
  space.height = mesh.N() - 2 * frame;
  space.num_elements = mesh.size();
  const double w = space.width, h = space.height;
  auto clamp_u = [&](double x) { return std::clamp(x - frame, 0.0, w); };
  auto clamp_v = [&](double y) { return std::clamp(y - frame, 0.0, h); };

  const auto bcells = bezier_mesh(mesh);
  std::vector<BezierElement> cells;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
  auto bucket_key = [](std::int64_t i, std::int64_t j) {
    return (static_cast<std::uint64_t>(i + (1 << 20)) << 32) | static_cast<std::uint64_t>(j + (1 << 20));
  };
  for (const auto& bc : bcells) {
    BezierElement cell;
    cell.box = bc.box;
    cell.element = bc.element;
    cell.param = {clamp_u(bc.box.x_lo.to_double()), clamp_u(bc.box.x_hi.to_double()), clamp_v(bc.box.y_lo.to_double()),
                  clamp_v(bc.box.y_hi.to_double())};
    if (cell.param.du() <= 0 || cell.param.dv() <= 0) continue;
    const auto i = static_cast<std::int64_t>(std::floor(bc.box.x_lo.to_double()));
    const auto j = static_cast<std::int64_t>(std::floor(bc.box.y_lo.to_double()));
    buckets[bucket_key(i, j)].push_back(cells.size());
    cells.push_back(std::move(cell));
  }

  std::vector<RowList> rows(cells.size());
  std::vector<double> kx, ky;
  for (std::size_t src = 0; src < basis.size(); ++src) {
    const auto& f = basis[src];
    kx.clear();
    ky.clear();
    for (const auto& k : f.knots_x.knots) kx.push_back(clamp_u(k.to_double()));
    for (const auto& k : f.knots_y.knots) ky.push_back(clamp_v(k.to_double()));
    if (kx.front() == kx.back() || ky.front() == ky.back()) continue;
    const std::size_t id = space.source.size();
    space.source.push_back(src);

    const DyadicBox support(f.knots_x.knots.front(), f.knots_x.knots.back(), f.knots_y.knots.front(),
                            f.knots_y.knots.back());
    const auto i0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(support.x_lo.to_double())));
    const auto i1 = std::min<std::int64_t>(mesh.M(), static_cast<std::int64_t>(std::ceil(support.x_hi.to_double())));
    const auto j0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(support.y_lo.to_double())));
    const auto j1 = std::min<std::int64_t>(mesh.N(), static_cast<std::int64_t>(std::ceil(support.y_hi.to_double())));
    for (auto i = i0; i < i1; ++i)
      for (auto j = j0; j < j1; ++j) {
        const auto it = buckets.find(bucket_key(i, j));
        if (it == buckets.end()) continue;
        for (const auto c : it->second) {
          const auto& cell = cells[c];
          if (!cell.box.interiors_intersect(support)) continue;
          for (const double k : kx)
            if (k > cell.param.u0 && k < cell.param.u1) throw Error(ErrorCode::NotAnalysisSuitable, "knot inside a Bezier cell");
          for (const double k : ky)
            if (k > cell.param.v0 && k < cell.param.v1) throw Error(ErrorCode::NotAnalysisSuitable, "knot inside a Bezier cell");
          accumulate(rows[c], id, bezier_coefficients(kx, cell.param.u0, cell.param.u1),
                     bezier_coefficients(ky, cell.param.v0, cell.param.v1), 1.0);
        }
      }
  }
  space.num_functions = space.source.size();
  for (std::size_t c = 0; c < cells.size(); ++c) finish_cell(cells[c], rows[c], (p + 1) * (q + 1));
  std::stable_sort(cells.begin(), cells.end(), lower_left_less);
  space.cells = std::move(cells);
  return space;
}

int max_levels_per_cell(const SplineSpace& space, const std::vector<ThbFunction>& basis) {
  int best = 0;
  for (const auto& cell : space.cells) {
    std::set<int> levels;
    for (const auto id : cell.active_ids) levels.insert(basis[space.source[id]].base.level);
    best = std::max(best, static_cast<int>(levels.size()));
  }
  return best;
}

}  // namespace aiga
