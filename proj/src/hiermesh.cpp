#include "aiga/hiermesh.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <tuple>

#include "aiga/error.hpp"

namespace aiga {

namespace {

std::uint64_t cell_key(std::int64_t i, std::int64_t j) {
  return (static_cast<std::uint64_t>(i) << 32) | static_cast<std::uint32_t>(j);
}

std::uint64_t element_key(int level, std::int64_t i, std::int64_t j) {
  return (static_cast<std::uint64_t>(level) << 58) | (static_cast<std::uint64_t>(i) << 29) |
         static_cast<std::uint64_t>(j);
}

std::shared_ptr<LevelSpline1D> build_level_spline(std::int64_t extent, int p, int level) {
  auto s = std::make_shared<LevelSpline1D>();
  s->degree = p;
  s->level = level;
  s->cells = extent << level;
  for (int r = 0; r < p; ++r) s->knots.emplace_back(0);
  for (std::int64_t c = 0; c <= s->cells; ++c) s->knots.emplace_back(c, static_cast<unsigned>(level));
  for (int r = 0; r < p; ++r) s->knots.push_back(s->knots.back());

  const std::int64_t n = s->size();
  s->bezier.resize(n);
  const double h = std::ldexp(1.0, -level);
  for (std::int64_t a = 0; a < n; ++a) {
    const auto kv = s->local_knots(a).values();
    for (std::int64_t c = s->first_cell(a); c <= s->last_cell(a); ++c)
      s->bezier[a].push_back(bezier_coefficients(kv, c * h, (c + 1) * h));
  }

  // Refinement into the next level's basis.
  std::vector<Dyadic> fine_grid;
  const std::int64_t fine_cells = s->cells * 2;
  for (std::int64_t c = 0; c <= fine_cells; ++c) fine_grid.emplace_back(c, static_cast<unsigned>(level + 1));
  s->refinement.resize(n);
  for (std::int64_t a = 0; a < n; ++a) {
    const auto local = s->local_knots(a);
    // fine grid points under the support only
    const std::span<const Dyadic> window(fine_grid.data() + 2 * s->first_cell(a),
                                         static_cast<std::size_t>(2 * (s->last_cell(a) - s->first_cell(a) + 1) + 1));
    const auto seq = refined_knot_sequence(local, window);
    const auto row = knot_insertion_row(local, window);
    const std::int64_t first = seq.front().numerator_at(level + 1);
    std::int64_t start;
    if (first == 0) {
      const auto m = std::count(seq.begin(), seq.end(), seq.front());
      start = p + 1 - m;
    } else {
      start = p + first;
    }
    for (std::size_t r = 0; r < row.size(); ++r)
      if (row[r] != 0.0) s->refinement[a].emplace_back(start + static_cast<std::int64_t>(r), row[r]);
  }
  return s;
}

}  // namespace

DyadicBox HierElement::box() const {
  const auto s = static_cast<unsigned>(level);
  return DyadicBox(Dyadic(i, s), Dyadic(i + 1, s), Dyadic(j, s), Dyadic(j + 1, s));
}

std::array<HierElement, 4> subdivide(const HierElement& e) {
  const int l = e.level + 1;
  return {HierElement{l, 2 * e.i, 2 * e.j}, HierElement{l, 2 * e.i + 1, 2 * e.j},
          HierElement{l, 2 * e.i, 2 * e.j + 1}, HierElement{l, 2 * e.i + 1, 2 * e.j + 1}};
}

LocalKnotVector LevelSpline1D::local_knots(std::int64_t a) const {
  LocalKnotVector k;
  k.knots.assign(knots.begin() + a, knots.begin() + a + degree + 2);
  return k;
}

std::shared_ptr<const LevelSpline1D> level_spline(std::int64_t extent, int degree, int level) {
  static std::mutex mutex;
  static std::map<std::tuple<std::int64_t, int, int>, std::shared_ptr<LevelSpline1D>> cache;
  if (extent <= 0 || degree < 1 || level < 0 || level > 24)
    throw Error(ErrorCode::InvalidArgument, "unsupported level spline request");
  std::lock_guard lock(mutex);
  auto& slot = cache[{extent, degree, level}];
  if (!slot) slot = build_level_spline(extent, degree, level);
  return slot;
}

HierMesh::HierMesh(int M, int N, int degree) : M_(M), N_(N), degree_(degree) {
  if (M <= 0 || N <= 0) throw Error(ErrorCode::InvalidArgument, "mesh extents must be positive");
  if (degree < 1 || degree % 2 == 0) throw Error(ErrorCode::InvalidArgument, "degree must be odd and positive");
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < N; ++j) elements_.push_back({0, i, j});
  build_index();
}

HierMesh::HierMesh(int M, int N, int degree, std::vector<HierElement> elements)
    : M_(M), N_(N), degree_(degree), elements_(std::move(elements)) {
  if (M <= 0 || N <= 0) throw Error(ErrorCode::InvalidArgument, "mesh extents must be positive");
  if (degree < 1 || degree % 2 == 0) throw Error(ErrorCode::InvalidArgument, "degree must be odd and positive");
  std::sort(elements_.begin(), elements_.end());
  build_index();
  validate();
}

void HierMesh::build_index() {
  std::sort(elements_.begin(), elements_.end());
  index_.clear();
  index_.reserve(elements_.size() * 2);
  int maxl = 0;
  for (const auto& e : elements_) {
    if (e.level < 0 || e.level > 24) throw Error(ErrorCode::InvalidArgument, "element level out of range");
    maxl = std::max(maxl, e.level);
  }
  domain_.assign(maxl + 1, {});
  for (std::size_t k = 0; k < elements_.size(); ++k) {
    const auto& e = elements_[k];
    if (!index_.emplace(element_key(e.level, e.i, e.j), k).second)
      throw Error(ErrorCode::InvalidArgument, "duplicate element");
    for (int l = 0; l <= e.level; ++l) domain_[l].insert(cell_key(e.i >> (e.level - l), e.j >> (e.level - l)));
  }
}

bool HierMesh::contains(const HierElement& e) const { return index_of(e) >= 0; }

std::ptrdiff_t HierMesh::index_of(const HierElement& e) const {
  if (e.level < 0 || e.level > max_level()) return -1;
  auto it = index_.find(element_key(e.level, e.i, e.j));
  return it == index_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
}

std::ptrdiff_t HierMesh::element_covering(int level, std::int64_t i, std::int64_t j) const {
  for (int k = std::min(level, max_level()); k >= 0; --k) {
    auto it = index_.find(element_key(k, i >> (level - k), j >> (level - k)));
    if (it != index_.end()) return static_cast<std::ptrdiff_t>(it->second);
  }
  return -1;
}

bool HierMesh::in_domain(int k, std::int64_t i, std::int64_t j) const {
  if (k < 0) return true;
  if (k > max_level()) return false;
  return domain_[k].count(cell_key(i, j)) > 0;
}

bool HierMesh::is_uniform() const {
  return std::all_of(elements_.begin(), elements_.end(),
                     [&](const HierElement& e) { return e.level == elements_.front().level; });
}

void HierMesh::validate() const {
  const int L = max_level();
  __int128 area = 0;
  for (const auto& e : elements_) {
    if (e.i < 0 || e.j < 0 || e.i >= cells_x(e.level) || e.j >= cells_y(e.level))
      throw Error(ErrorCode::InvalidArgument, "element outside the index domain");
    for (int k = 0; k < e.level; ++k)
      if (index_.count(element_key(k, e.i >> (e.level - k), e.j >> (e.level - k))))
        throw Error(ErrorCode::InvalidArgument, "overlapping elements");
    area += static_cast<__int128>(1) << (2 * (L - e.level));
  }
  if (area != static_cast<__int128>(cells_x(L)) * cells_y(L))
    throw Error(ErrorCode::InvalidArgument, "elements do not cover the index domain");
}

HierMesh uniform_refine(const HierMesh& mesh) {
  if (!mesh.is_uniform()) throw Error(ErrorCode::NonUniformMesh, "uniform_refine needs a uniform mesh");
  std::vector<HierElement> out;
  out.reserve(mesh.size() * 4);
  for (const auto& e : mesh.elements())
    for (const auto& c : subdivide(e)) out.push_back(c);
  return HierMesh(mesh.M(), mesh.N(), mesh.degree(), std::move(out));
}

std::vector<HierElement> level_domain(const HierMesh& mesh, int k) {
  std::vector<HierElement> out;
  for (const auto& e : mesh.elements())
    if (e.level >= k) out.push_back(e);
  return out;
}

bool hb_active(const HierMesh& mesh, const LevelFunction& f) {
  const int p = mesh.degree();
  if (f.level < 0 || f.level > mesh.max_level()) return false;
  const std::int64_t nx = mesh.cells_x(f.level), ny = mesh.cells_y(f.level);
  if (f.a < 0 || f.b < 0 || f.a >= nx + p || f.b >= ny + p) return false;
  bool some_open = false;
  for (std::int64_t i = std::max<std::int64_t>(0, f.a - p); i <= std::min(nx - 1, f.a); ++i)
    for (std::int64_t j = std::max<std::int64_t>(0, f.b - p); j <= std::min(ny - 1, f.b); ++j) {
      if (!mesh.in_domain(f.level, i, j)) return false;
      if (!mesh.subdivided(f.level, i, j)) some_open = true;
    }
  return some_open;
}

std::vector<LevelFunction> hb_basis(const HierMesh& mesh) {
  const int p = mesh.degree();
  std::vector<LevelFunction> out;
  std::vector<LevelFunction> level_candidates;
  for (int k = 0; k <= mesh.max_level(); ++k) {
    level_candidates.clear();
    const std::int64_t nx = mesh.cells_x(k), ny = mesh.cells_y(k);
    for (const auto& e : mesh.elements()) {
      if (e.level != k) continue;
      for (std::int64_t a = e.i; a <= std::min(e.i + p, nx + p - 1); ++a)
        for (std::int64_t b = e.j; b <= std::min(e.j + p, ny + p - 1); ++b) level_candidates.push_back({k, a, b});
    }
    std::sort(level_candidates.begin(), level_candidates.end());
    level_candidates.erase(std::unique(level_candidates.begin(), level_candidates.end()), level_candidates.end());
    for (const auto& f : level_candidates)
      if (hb_active(mesh, f)) out.push_back(f);
  }
  return out;
}

ThbFunction truncate(const HierMesh& mesh, const LevelFunction& f) {
  if (!hb_active(mesh, f)) throw Error(ErrorCode::NotInBasis, "function is not in the HB basis");
  const int p = mesh.degree();
  ThbFunction out;
  out.base = f;
  out.levels.push_back({FineCoefficient{f.a, f.b, 1.0}});
  std::unordered_map<std::uint64_t, double> acc;
  for (int j = f.level; j < mesh.max_level(); ++j) {
    const auto sx = level_spline(mesh.M(), p, j);
    const auto sy = level_spline(mesh.N(), p, j);
    acc.clear();
    for (const auto& g : out.levels.back()) {
      bool touches = false;
      for (std::int64_t ci = sx->first_cell(g.a); ci <= sx->last_cell(g.a) && !touches; ++ci)
        for (std::int64_t cj = sy->first_cell(g.b); cj <= sy->last_cell(g.b) && !touches; ++cj)
          touches = mesh.subdivided(j, ci, cj);
      if (!touches) continue;
      for (const auto& [ca, wa] : sx->refinement[g.a])
        for (const auto& [cb, wb] : sy->refinement[g.b]) acc[cell_key(ca, cb)] += g.c * wa * wb;
    }
    const std::int64_t nx = mesh.cells_x(j + 1), ny = mesh.cells_y(j + 1);
    std::vector<FineCoefficient> next;
    for (const auto& [key, c] : acc) {
      const auto a = static_cast<std::int64_t>(key >> 32);
      const auto b = static_cast<std::int64_t>(key & 0xffffffffu);
      bool inside = true;
      for (std::int64_t ci = std::max<std::int64_t>(0, a - p); ci <= std::min(nx - 1, a) && inside; ++ci)
        for (std::int64_t cj = std::max<std::int64_t>(0, b - p); cj <= std::min(ny - 1, b) && inside; ++cj)
          inside = mesh.in_domain(j + 1, ci, cj);
      if (!inside) next.push_back({a, b, c});
    }
    if (next.empty()) break;
    std::sort(next.begin(), next.end(),
              [](const FineCoefficient& l, const FineCoefficient& r) { return std::tie(l.a, l.b) < std::tie(r.a, r.b); });
    out.levels.push_back(std::move(next));
  }
  return out;
}

std::vector<ThbFunction> thb_basis(const HierMesh& mesh) {
  std::vector<ThbFunction> out;
  for (const auto& f : hb_basis(mesh)) out.push_back(truncate(mesh, f));
  return out;
}

std::vector<HierElement> closure(const HierMesh& mesh, const std::vector<HierElement>& marked, ThbVariant variant) {
  std::vector<char> in(mesh.size(), 0);
  std::vector<std::size_t> work;
  for (const auto& e : marked) {
    const auto k = mesh.index_of(e);
    if (k < 0) throw Error(ErrorCode::NotInMesh, "marked element is not in the mesh");
    if (!in[k]) {
      in[k] = 1;
      work.push_back(static_cast<std::size_t>(k));
    }
  }
  const std::int64_t reach = variant == ThbVariant::Minimal ? 1 : mesh.degree();
  while (!work.empty()) {
    const HierElement q = mesh.elements()[work.back()];
    work.pop_back();
    if (q.level == 0) continue;
    const std::int64_t nx = mesh.cells_x(q.level), ny = mesh.cells_y(q.level);
    for (std::int64_t i = std::max<std::int64_t>(0, q.i - reach); i <= std::min(nx - 1, q.i + reach); ++i)
      for (std::int64_t j = std::max<std::int64_t>(0, q.j - reach); j <= std::min(ny - 1, q.j + reach); ++j) {
        const auto k = mesh.element_covering(q.level, i, j);
        if (k < 0 || in[k] || mesh.elements()[k].level >= q.level) continue;
        in[k] = 1;
        work.push_back(static_cast<std::size_t>(k));
      }
  }
  std::vector<HierElement> out;
  for (std::size_t k = 0; k < mesh.size(); ++k)
    if (in[k]) out.push_back(mesh.elements()[k]);
  return out;
}

HierMesh refine_mesh(const HierMesh& mesh, const std::vector<HierElement>& marked, ThbVariant variant) {
  const auto cl = closure(mesh, marked, variant);
  std::vector<char> drop(mesh.size(), 0);
  for (const auto& e : cl) drop[mesh.index_of(e)] = 1;
  std::vector<HierElement> out;
  out.reserve(mesh.size() + 3 * cl.size());
  for (std::size_t k = 0; k < mesh.size(); ++k)
    if (!drop[k]) out.push_back(mesh.elements()[k]);
  for (const auto& e : cl)
    for (const auto& c : subdivide(e)) out.push_back(c);
  return HierMesh(mesh.M(), mesh.N(), mesh.degree(), std::move(out));
}

ThbRefinement refine(const HierMesh& mesh, const std::vector<HierElement>& marked, ThbVariant variant) {
  auto next = refine_mesh(mesh, marked, variant);
  auto basis = thb_basis(next);
  return {std::move(next), std::move(basis)};
}

double eval_level_function(const HierMesh& mesh, const LevelFunction& f, double x, double y) {
  const auto sx = level_spline(mesh.M(), mesh.degree(), f.level);
  const auto sy = level_spline(mesh.N(), mesh.degree(), f.level);
  const auto kx = sx->local_knots(f.a).values();
  const auto ky = sy->local_knots(f.b).values();
  return bspline_eval(kx, x) * bspline_eval(ky, y);
}

std::ptrdiff_t locate(const HierMesh& mesh, double x, double y) {
  for (int k = 0; k <= mesh.max_level(); ++k) {
    const std::int64_t nx = mesh.cells_x(k), ny = mesh.cells_y(k);
    const auto i = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(std::ldexp(x, k))), 0, nx - 1);
    const auto j = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(std::ldexp(y, k))), 0, ny - 1);
    const auto idx = mesh.index_of({k, i, j});
    if (idx >= 0) return idx;
  }
  throw Error(ErrorCode::InvalidArgument, "point outside the mesh");
}

double eval_thb(const HierMesh& mesh, const ThbFunction& f, double x, double y) {
  const auto& e = mesh.elements()[locate(mesh, x, y)];
  const int rel = e.level - f.base.level;
  if (rel < 0 || rel >= static_cast<int>(f.levels.size())) return 0.0;
  double v = 0.0;
  for (const auto& g : f.levels[rel]) v += g.c * eval_level_function(mesh, {e.level, g.a, g.b}, x, y);
  return v;
}

void write_hiermesh(std::ostream& os, const HierMesh& mesh) {
  os << "HIERMESH " << mesh.M() << ' ' << mesh.N() << ' ' << mesh.degree() << '\n';
  for (const auto& e : mesh.elements()) {
    const auto b = e.box();
    os << e.level << ' ' << b.x_lo.numerator() << ' ' << b.x_lo.scale() << ' ' << b.y_lo.numerator() << ' '
       << b.y_lo.scale() << '\n';
  }
}

HierMesh read_hiermesh(std::istream& is) {
  std::string tag;
  int M = 0, N = 0, p = 0;
  if (!(is >> tag >> M >> N >> p) || tag != "HIERMESH") throw Error(ErrorCode::Parse, "missing HIERMESH header");
  std::vector<HierElement> elems;
  int level;
  std::int64_t xn, yn;
  unsigned xs, ys;
  while (is >> level) {
    if (!(is >> xn >> xs >> yn >> ys)) throw Error(ErrorCode::Parse, "truncated element line");
    if (level < 0 || xs > static_cast<unsigned>(level) || ys > static_cast<unsigned>(level))
      throw Error(ErrorCode::Parse, "corner not on the element level grid");
    elems.push_back({level, Dyadic(xn, xs).numerator_at(level), Dyadic(yn, ys).numerator_at(level)});
  }
  return HierMesh(M, N, p, std::move(elems));
}

HierMesh overlay(const HierMesh& a, const HierMesh& b) {
  if (a.M() != b.M() || a.N() != b.N() || a.degree() != b.degree())
    throw Error(ErrorCode::InvalidArgument, "overlay needs meshes over the same domain");
  std::vector<HierElement> out;
  for (const auto& e : a.elements())
    if (b.element_covering(e.level, e.i, e.j) >= 0) out.push_back(e);
  for (const auto& e : b.elements())
    if (a.element_covering(e.level, e.i, e.j) >= 0 && !a.contains(e)) out.push_back(e);
  return HierMesh(a.M(), a.N(), a.degree(), std::move(out));
}

}  // namespace aiga
