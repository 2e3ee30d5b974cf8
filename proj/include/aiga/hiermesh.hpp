#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "aiga/bspline.hpp"
#include "aiga/dyadic.hpp"

namespace aiga {

/// Square element [i,i+1]x[j,j+1] scaled by 2^-level.
struct HierElement {
  int level = 0;
  std::int64_t i = 0;
  std::int64_t j = 0;

  DyadicBox box() const;
  auto operator<=>(const HierElement&) const = default;
};

std::array<HierElement, 4> subdivide(const HierElement& e);

enum class ThbVariant { Minimal, Safe };

/// Tensor-product B-spline of level `level` with indices (a,b) in the clamped level basis.
struct LevelFunction {
  int level = 0;
  std::int64_t a = 0;
  std::int64_t b = 0;
  auto operator<=>(const LevelFunction&) const = default;
};

struct FineCoefficient {
  std::int64_t a;
  std::int64_t b;
  double c;
};

/// Truncated function: per level (starting at base.level) the coefficients against that level's B-splines.
struct ThbFunction {
  LevelFunction base;
  std::vector<std::vector<FineCoefficient>> levels;
};

/// Univariate clamped B-spline basis of one level along one direction.
struct LevelSpline1D {
  int degree = 0;
  int level = 0;
  std::int64_t cells = 0;
  std::vector<Dyadic> knots;
  /// refinement[a] lists (index, coefficient) in the next level's basis.
  std::vector<std::vector<std::pair<std::int64_t, double>>> refinement;
  /// bezier[a][c - first_cell(a)] holds the Bernstein coefficients on cell c.
  std::vector<std::vector<std::vector<double>>> bezier;

  std::int64_t size() const { return cells + degree; }
  std::int64_t first_cell(std::int64_t a) const { return std::max<std::int64_t>(0, a - degree); }
  std::int64_t last_cell(std::int64_t a) const { return std::min<std::int64_t>(cells - 1, a); }
  LocalKnotVector local_knots(std::int64_t a) const;
};

/// Shared, lazily built level data for extent (in level-0 cells) and degree.
std::shared_ptr<const LevelSpline1D> level_spline(std::int64_t extent, int degree, int level);

class HierMesh {
 public:
  HierMesh(int M, int N, int degree);
  HierMesh(int M, int N, int degree, std::vector<HierElement> elements);

  int M() const { return M_; }
  int N() const { return N_; }
  int degree() const { return degree_; }
  const std::vector<HierElement>& elements() const { return elements_; }
  std::size_t size() const { return elements_.size(); }
  int max_level() const { return static_cast<int>(domain_.size()) - 1; }

  bool contains(const HierElement& e) const;
  std::ptrdiff_t index_of(const HierElement& e) const;
  /// Index of the element covering the level-`level` cell (i,j), or -1 if that cell is subdivided.
  std::ptrdiff_t element_covering(int level, std::int64_t i, std::int64_t j) const;
  /// True if the level-k cell lies in the level-k domain (covered by elements of level >= k).
  bool in_domain(int k, std::int64_t i, std::int64_t j) const;
  /// True if the level-k cell is the union of finer elements.
  bool subdivided(int k, std::int64_t i, std::int64_t j) const { return in_domain(k + 1, 2 * i, 2 * j); }
  bool is_uniform() const;

  std::int64_t cells_x(int level) const { return static_cast<std::int64_t>(M_) << level; }
  std::int64_t cells_y(int level) const { return static_cast<std::int64_t>(N_) << level; }

  /// Checks interior disjointness and full cover.
  void validate() const;

 private:
  void build_index();

  int M_, N_, degree_;
  std::vector<HierElement> elements_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
  std::vector<std::unordered_set<std::uint64_t>> domain_;
};

HierMesh uniform_refine(const HierMesh& mesh);

/// Elements of level >= k.
std::vector<HierElement> level_domain(const HierMesh& mesh, int k);

bool hb_active(const HierMesh& mesh, const LevelFunction& f);
/// HB basis in id order (level-major, then a, then b).
std::vector<LevelFunction> hb_basis(const HierMesh& mesh);
ThbFunction truncate(const HierMesh& mesh, const LevelFunction& f);
std::vector<ThbFunction> thb_basis(const HierMesh& mesh);

std::vector<HierElement> closure(const HierMesh& mesh, const std::vector<HierElement>& marked, ThbVariant variant);

struct ThbRefinement {
  HierMesh mesh;
  std::vector<ThbFunction> basis;
};
HierMesh refine_mesh(const HierMesh& mesh, const std::vector<HierElement>& marked, ThbVariant variant);
ThbRefinement refine(const HierMesh& mesh, const std::vector<HierElement>& marked, ThbVariant variant);

/// Coarsest common refinement of two meshes over the same domain.
HierMesh overlay(const HierMesh& a, const HierMesh& b);

/// Value of an untruncated level function at index-domain point (x,y).
double eval_level_function(const HierMesh& mesh, const LevelFunction& f, double x, double y);
/// Value of a truncated function at (x,y), using the representation of the element containing the point.
double eval_thb(const HierMesh& mesh, const ThbFunction& f, double x, double y);
/// Element index containing (x,y) (closed, first match in level order).
std::ptrdiff_t locate(const HierMesh& mesh, double x, double y);

void write_hiermesh(std::ostream& os, const HierMesh& mesh);
HierMesh read_hiermesh(std::istream& is);

}  // namespace aiga
