#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "aiga/bspline.hpp"
#include "aiga/dyadic.hpp"

namespace aiga {

/// Element of a T-mesh; sublevel k >= 0 means half-level k/2, -1 means no half-level provenance.
struct TElement {
  DyadicBox box;
  int sublevel = -1;
  friend bool operator==(const TElement&, const TElement&) = default;
};

enum class Orientation { Horizontal, Vertical };

struct TJunction {
  DyadicPoint vertex;
  DyadicBox host;
  Orientation orientation;
};

/// Closed axis-aligned segment from a to b (a <= b componentwise, one coordinate shared).
struct Segment {
  DyadicPoint a, b;
  bool horizontal() const { return a.y == b.y; }
  bool intersects(const Segment& o) const {
    return a.x <= o.b.x && o.a.x <= b.x && a.y <= o.b.y && o.a.y <= b.y;
  }
  bool contains(const Segment& o) const {
    return a.x <= o.a.x && o.b.x <= b.x && a.y <= o.a.y && o.b.y <= b.y;
  }
  friend bool operator==(const Segment&, const Segment&) = default;
};

struct Extension {
  TJunction junction;
  Segment segment;
};

struct TSplineFunction {
  DyadicPoint anchor;
  LocalKnotVector knots_x;
  LocalKnotVector knots_y;
};

/// Mutable spatial index of a rectangular partition: skeleton lines, vertices and element lookup.
class TopologyIndex {
 public:
  TopologyIndex(int M, int N, int p, int q) : M_(M), N_(N), p_(p), q_(q) {}

  std::size_t add(const DyadicBox& box);
  void remove(std::size_t id);
  const DyadicBox& box(std::size_t id) const { return boxes_[id]; }
  bool alive(std::size_t id) const { return alive_[id]; }

  bool is_vertex(const DyadicPoint& v) const;
  /// Edge presence at v towards +x, -x, +y, -y.
  std::array<bool, 4> edges(const DyadicPoint& v) const;
  std::optional<TJunction> junction(const DyadicPoint& v) const;
  /// Element whose interior touches v from the given side (dir as in edges()).
  std::ptrdiff_t element_beside(const DyadicPoint& v, int quadrant) const;

  /// `count` points of X(y) strictly beyond `from` (towards +x if up), ghost points included.
  std::vector<Dyadic> x_points(const Dyadic& y, const Dyadic& from, int count, bool up) const;
  std::vector<Dyadic> y_points(const Dyadic& x, const Dyadic& from, int count, bool up) const;
  /// Full X(y) / Y(x) including ghost points, sorted.
  std::vector<Dyadic> x_line(const Dyadic& y) const;
  std::vector<Dyadic> y_line(const Dyadic& x) const;
  bool on_vertical_skeleton(const Dyadic& x, const Dyadic& y) const;
  bool on_horizontal_skeleton(const Dyadic& x, const Dyadic& y) const;

  Segment extension(const TJunction& j) const;
  std::vector<DyadicPoint> vertices() const;
  std::vector<std::size_t> live_ids() const;

  int M() const { return M_; }
  int N() const { return N_; }
  int p() const { return p_; }
  int q() const { return q_; }

 private:
  using Sides = std::map<Dyadic, Dyadic>;
  struct Line {
    Sides lower;  // sides of elements on the lower-coordinate side of the line
    Sides upper;
  };
  static bool covers(const Line& line, const Dyadic& t, int mode);
  static void insert_side(Sides& s, const Dyadic& lo, const Dyadic& hi) { s.emplace(lo, hi); }
  static void erase_side(Sides& s, const Dyadic& lo) { s.erase(lo); }
  std::uint64_t bucket_of(const Dyadic& x, const Dyadic& y) const;

  int M_, N_, p_, q_;
  std::vector<DyadicBox> boxes_;
  std::vector<char> alive_;
  std::map<Dyadic, Line> vlines_, hlines_;
  std::unordered_map<DyadicPoint, int> corners_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets_;
};

class TMesh {
 public:
  /// Tensor mesh Q_0 with all elements at sublevel 0.
  TMesh(int M, int N, int p, int q);
  TMesh(int M, int N, int p, int q, std::vector<TElement> elements);

  int M() const { return M_; }
  int N() const { return N_; }
  int p() const { return p_; }
  int q() const { return q_; }
  const std::vector<TElement>& elements() const { return elements_; }
  std::size_t size() const { return elements_.size(); }
  bool has_half_levels() const;
  std::ptrdiff_t index_of(const DyadicBox& box) const;
  const TopologyIndex& topology() const { return *topo_; }
  void validate() const;

 private:
  int M_, N_, p_, q_;
  std::vector<TElement> elements_;
  std::shared_ptr<TopologyIndex> topo_;
  std::map<DyadicBox, std::size_t> lookup_;
};

/// direction 1 splits the x-extent, 2 the y-extent; ratio is the relative split position.
std::array<DyadicBox, 2> bisect(const DyadicBox& box, int direction, const Dyadic& ratio);

std::vector<TJunction> t_junctions(const TMesh& mesh);
std::vector<Dyadic> global_line(const TMesh& mesh, const DyadicPoint& v, int direction);
Extension extension(const TMesh& mesh, const TJunction& j);
std::vector<std::pair<TJunction, TJunction>> crossings(const TMesh& mesh);
std::vector<TJunction> incompatibilities(const TMesh& old_mesh, const TMesh& new_mesh);
bool is_analysis_suitable(const TMesh& mesh);
TMesh ref_tj(const TMesh& mesh, const TJunction& j);

struct ScottStats {
  std::size_t repairs = 0;
};
TMesh refine_scott_mesh(const TMesh& mesh, const std::vector<DyadicBox>& marked, ScottStats* stats = nullptr);

std::array<DyadicBox, 2> half_children(const DyadicBox& box, int sublevel);
/// D(k) as (dx, dy).
std::array<Dyadic, 2> safe_distance(int sublevel, int p, int q);
std::vector<DyadicBox> closure_safe_ts(const TMesh& mesh, const std::vector<DyadicBox>& marked);
TMesh refine_safe_ts_mesh(const TMesh& mesh, const std::vector<DyadicBox>& marked);

/// One function per vertex, ordered lexicographically by anchor (x, then y).
std::vector<TSplineFunction> tspline_basis(const TMesh& mesh);

struct TSplineRefinement {
  TMesh mesh;
  std::vector<TSplineFunction> basis;
};
TSplineRefinement refine_scott(const TMesh& mesh, const std::vector<DyadicBox>& marked, ScottStats* stats = nullptr);
TSplineRefinement refine_safe_ts(const TMesh& mesh, const std::vector<DyadicBox>& marked);

/// Cells of the Bezier mesh, each tagged with the index of the mesh element containing it.
struct BezierCell {
  DyadicBox box;
  std::size_t element;
};
std::vector<BezierCell> bezier_mesh(const TMesh& mesh);

/// Coarsest common refinement of two meshes whose elements are pairwise nested or disjoint
/// (e.g. two safe refinements of the same tensor mesh). Sublevels are kept from the source elements.
TMesh overlay(const TMesh& a, const TMesh& b);

double eval_tspline(const TSplineFunction& f, double x, double y);

void write_tmesh(std::ostream& os, const TMesh& mesh);
TMesh read_tmesh(std::istream& is);
void write_bezier(std::ostream& os, const TMesh& mesh, const std::vector<BezierCell>& cells);

}  // namespace aiga
