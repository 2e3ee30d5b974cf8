#include "aiga/tmesh.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>

#include "aiga/error.hpp"

namespace aiga {

namespace {

std::int64_t floor_int(const Dyadic& d) { return d.numerator() >> d.scale(); }
std::int64_t ceil_int(const Dyadic& d) { return -floor_int(-d); }

std::uint64_t pack(std::int64_t i, std::int64_t j) {
  return (static_cast<std::uint64_t>(i + (1 << 20)) << 32) | static_cast<std::uint32_t>(j + (1 << 20));
}

// Ordering used for deterministic junction iteration: y first, then x.
struct YX {
  bool operator()(const DyadicPoint& a, const DyadicPoint& b) const {
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  }
};

std::array<DyadicBox, 2> split_at(const DyadicBox& b, int direction, const Dyadic& c) {
  if (direction == 1) {
    if (!(b.x_lo < c && c < b.x_hi)) throw Error(ErrorCode::InvalidArgument, "split outside the box");
    return {DyadicBox(b.x_lo, c, b.y_lo, b.y_hi), DyadicBox(c, b.x_hi, b.y_lo, b.y_hi)};
  }
  if (!(b.y_lo < c && c < b.y_hi)) throw Error(ErrorCode::InvalidArgument, "split outside the box");
  return {DyadicBox(b.x_lo, b.x_hi, b.y_lo, c), DyadicBox(b.x_lo, b.x_hi, c, b.y_hi)};
}

}  // namespace

// ---------------------------------------------------------------- TopologyIndex

std::uint64_t TopologyIndex::bucket_of(const Dyadic& x, const Dyadic& y) const {
  return pack(floor_int(x), floor_int(y));
}

std::size_t TopologyIndex::add(const DyadicBox& b) {
  const std::size_t id = boxes_.size();
  boxes_.push_back(b);
  alive_.push_back(1);
  for (const auto& c : {DyadicPoint{b.x_lo, b.y_lo}, DyadicPoint{b.x_hi, b.y_lo}, DyadicPoint{b.x_lo, b.y_hi},
                        DyadicPoint{b.x_hi, b.y_hi}})
    ++corners_[c];
  insert_side(vlines_[b.x_lo].upper, b.y_lo, b.y_hi);
  insert_side(vlines_[b.x_hi].lower, b.y_lo, b.y_hi);
  insert_side(hlines_[b.y_lo].upper, b.x_lo, b.x_hi);
  insert_side(hlines_[b.y_hi].lower, b.x_lo, b.x_hi);
  buckets_[bucket_of(b.x_lo, b.y_lo)].push_back(id);
  return id;
}

void TopologyIndex::remove(std::size_t id) {
  if (id >= boxes_.size() || !alive_[id]) throw Error(ErrorCode::NotInMesh, "element is not alive");
  alive_[id] = 0;
  const auto& b = boxes_[id];
  for (const auto& c : {DyadicPoint{b.x_lo, b.y_lo}, DyadicPoint{b.x_hi, b.y_lo}, DyadicPoint{b.x_lo, b.y_hi},
                        DyadicPoint{b.x_hi, b.y_hi}}) {
    auto it = corners_.find(c);
    if (--it->second == 0) corners_.erase(it);
  }
  auto drop = [](std::map<Dyadic, Line>& lines, const Dyadic& key, bool upper, const Dyadic& lo) {
    auto it = lines.find(key);
    erase_side(upper ? it->second.upper : it->second.lower, lo);
    if (it->second.upper.empty() && it->second.lower.empty()) lines.erase(it);
  };
  drop(vlines_, b.x_lo, true, b.y_lo);
  drop(vlines_, b.x_hi, false, b.y_lo);
  drop(hlines_, b.y_lo, true, b.x_lo);
  drop(hlines_, b.y_hi, false, b.x_lo);
  auto& bucket = buckets_[bucket_of(b.x_lo, b.y_lo)];
  bucket.erase(std::find(bucket.begin(), bucket.end(), id));
}

bool TopologyIndex::covers(const Line& line, const Dyadic& t, int mode) {
  for (const Sides* s : {&line.lower, &line.upper}) {
    auto it = mode == 2 ? s->lower_bound(t) : s->upper_bound(t);
    if (it == s->begin()) continue;
    --it;
    if (mode == 0 && it->second >= t) return true;
    if (mode == 1 && it->second > t) return true;
    if (mode == 2 && it->second >= t) return true;
  }
  return false;
}

bool TopologyIndex::is_vertex(const DyadicPoint& v) const { return corners_.count(v) > 0; }

std::array<bool, 4> TopologyIndex::edges(const DyadicPoint& v) const {
  std::array<bool, 4> e{false, false, false, false};
  if (auto it = hlines_.find(v.y); it != hlines_.end()) {
    e[0] = covers(it->second, v.x, 1);
    e[1] = covers(it->second, v.x, 2);
  }
  if (auto it = vlines_.find(v.x); it != vlines_.end()) {
    e[2] = covers(it->second, v.y, 1);
    e[3] = covers(it->second, v.y, 2);
  }
  return e;
}

std::ptrdiff_t TopologyIndex::element_beside(const DyadicPoint& v, int quadrant) const {
  const bool right = quadrant == 0 || quadrant == 3;
  const bool up = quadrant == 0 || quadrant == 1;
  const std::int64_t bi = right ? floor_int(v.x) : ceil_int(v.x) - 1;
  const std::int64_t bj = up ? floor_int(v.y) : ceil_int(v.y) - 1;
  auto it = buckets_.find(pack(bi, bj));
  if (it == buckets_.end()) return -1;
  for (auto id : it->second) {
    const auto& b = boxes_[id];
    const bool inx = right ? (b.x_lo <= v.x && v.x < b.x_hi) : (b.x_lo < v.x && v.x <= b.x_hi);
    const bool iny = up ? (b.y_lo <= v.y && v.y < b.y_hi) : (b.y_lo < v.y && v.y <= b.y_hi);
    if (inx && iny) return static_cast<std::ptrdiff_t>(id);
  }
  return -1;
}

std::optional<TJunction> TopologyIndex::junction(const DyadicPoint& v) const {
  if (!is_vertex(v)) return std::nullopt;
  if (v.x <= Dyadic(0) || v.x >= Dyadic(M_) || v.y <= Dyadic(0) || v.y >= Dyadic(N_)) return std::nullopt;
  const auto e = edges(v);
  const int count = e[0] + e[1] + e[2] + e[3];
  if (count != 3) return std::nullopt;
  TJunction j;
  j.vertex = v;
  int quadrant;
  if (!e[0] || !e[1]) {
    j.orientation = Orientation::Horizontal;
    quadrant = !e[0] ? 0 : 1;
  } else {
    j.orientation = Orientation::Vertical;
    quadrant = !e[2] ? 0 : 3;
  }
  const auto id = element_beside(v, quadrant);
  if (id < 0) throw Error(ErrorCode::InvalidArgument, "T-junction without host");
  j.host = boxes_[id];
  return j;
}

bool TopologyIndex::on_vertical_skeleton(const Dyadic& x, const Dyadic& y) const {
  auto it = vlines_.find(x);
  return it != vlines_.end() && covers(it->second, y, 0);
}

bool TopologyIndex::on_horizontal_skeleton(const Dyadic& x, const Dyadic& y) const {
  auto it = hlines_.find(y);
  return it != hlines_.end() && covers(it->second, x, 0);
}

namespace {

template <class Lines, class Covers>
std::vector<Dyadic> walk_points(const Lines& lines, const Dyadic& from, int count, bool up, int extent, int degree,
                                Covers covers) {
  std::vector<Dyadic> out;
  if (count <= 0) return out;
  if (up) {
    for (auto it = lines.upper_bound(from); it != lines.end() && static_cast<int>(out.size()) < count; ++it)
      if (covers(it->second)) out.push_back(it->first);
    const int ghosts = (degree + 1) / 2;
    for (int g = 1; g <= ghosts && static_cast<int>(out.size()) < count; ++g)
      if (from < Dyadic(extent + g)) out.emplace_back(extent + g);
  } else {
    auto it = lines.lower_bound(from);
    while (it != lines.begin() && static_cast<int>(out.size()) < count) {
      --it;
      if (covers(it->second)) out.push_back(it->first);
    }
    const int ghosts = (degree + 1) / 2;
    for (int g = 1; g <= ghosts && static_cast<int>(out.size()) < count; ++g)
      if (Dyadic(-g) < from) out.emplace_back(-g);
  }
  if (static_cast<int>(out.size()) < count) throw Error(ErrorCode::InvalidArgument, "global line too short");
  return out;
}

}  // namespace

std::vector<Dyadic> TopologyIndex::x_points(const Dyadic& y, const Dyadic& from, int count, bool up) const {
  return walk_points(vlines_, from, count, up, M_, p_, [&](const Line& l) { return covers(l, y, 0); });
}

std::vector<Dyadic> TopologyIndex::y_points(const Dyadic& x, const Dyadic& from, int count, bool up) const {
  return walk_points(hlines_, from, count, up, N_, q_, [&](const Line& l) { return covers(l, x, 0); });
}

Segment TopologyIndex::extension(const TJunction& j) const {
  const auto& h = j.host;
  if (j.orientation == Orientation::Horizontal) {
    const int n = (p_ - 1) / 2;
    const auto lo = x_points(j.vertex.y, h.x_lo, n, false);
    const auto hi = x_points(j.vertex.y, h.x_hi, n, true);
    return {{lo.empty() ? h.x_lo : lo.back(), j.vertex.y}, {hi.empty() ? h.x_hi : hi.back(), j.vertex.y}};
  }
  const int n = (q_ - 1) / 2;
  const auto lo = y_points(j.vertex.x, h.y_lo, n, false);
  const auto hi = y_points(j.vertex.x, h.y_hi, n, true);
  return {{j.vertex.x, lo.empty() ? h.y_lo : lo.back()}, {j.vertex.x, hi.empty() ? h.y_hi : hi.back()}};
}

std::vector<DyadicPoint> TopologyIndex::vertices() const {
  std::vector<DyadicPoint> v;
  v.reserve(corners_.size());
  for (const auto& [pt, c] : corners_) v.push_back(pt);
  std::sort(v.begin(), v.end());
  return v;
}

std::vector<std::size_t> TopologyIndex::live_ids() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < boxes_.size(); ++i)
    if (alive_[i]) out.push_back(i);
  return out;
}

// ---------------------------------------------------------------- TMesh

TMesh::TMesh(int M, int N, int p, int q) : TMesh(M, N, p, q, [&] {
  std::vector<TElement> e;
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < N; ++j) e.push_back({DyadicBox(i, i + 1, j, j + 1), 0});
  return e;
}()) {}

TMesh::TMesh(int M, int N, int p, int q, std::vector<TElement> elements)
    : M_(M), N_(N), p_(p), q_(q), elements_(std::move(elements)) {
  if (M <= 0 || N <= 0) throw Error(ErrorCode::InvalidArgument, "mesh extents must be positive");
  if (p < 1 || q < 1 || p % 2 == 0 || q % 2 == 0)
    throw Error(ErrorCode::InvalidArgument, "T-spline degrees must be odd and positive");
  std::sort(elements_.begin(), elements_.end(),
            [](const TElement& a, const TElement& b) { return a.box < b.box; });
  topo_ = std::make_shared<TopologyIndex>(M, N, p, q);
  for (std::size_t k = 0; k < elements_.size(); ++k) {
    topo_->add(elements_[k].box);
    if (!lookup_.emplace(elements_[k].box, k).second) throw Error(ErrorCode::InvalidArgument, "duplicate element");
  }
  validate();
}

bool TMesh::has_half_levels() const {
  return std::all_of(elements_.begin(), elements_.end(), [](const TElement& e) { return e.sublevel >= 0; });
}

std::ptrdiff_t TMesh::index_of(const DyadicBox& box) const {
  auto it = lookup_.find(box);
  return it == lookup_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
}

void TMesh::validate() const {
  // Area in units of the finest scale present.
  unsigned s = 0;
  for (const auto& e : elements_)
    s = std::max({s, e.box.x_lo.scale(), e.box.x_hi.scale(), e.box.y_lo.scale(), e.box.y_hi.scale()});
  if (s > 28) throw Error(ErrorCode::Overflow, "mesh too fine for validation");
  __int128 area = 0;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
  for (std::size_t k = 0; k < elements_.size(); ++k) {
    const auto& b = elements_[k].box;
    if (b.x_lo < Dyadic(0) || b.y_lo < Dyadic(0) || b.x_hi > Dyadic(M_) || b.y_hi > Dyadic(N_))
      throw Error(ErrorCode::InvalidArgument, "element outside the index domain");
    const auto bi = floor_int(b.x_lo), bj = floor_int(b.y_lo);
    if (b.x_hi > Dyadic(bi + 1) || b.y_hi > Dyadic(bj + 1))
      throw Error(ErrorCode::InvalidArgument, "element crosses an integer grid line");
    area += static_cast<__int128>(b.width().numerator_at(s)) * b.height().numerator_at(s);
    buckets[pack(bi, bj)].push_back(k);
  }
  if (area != (static_cast<__int128>(M_) * N_) << (2 * s))
    throw Error(ErrorCode::InvalidArgument, "elements do not cover the index domain");
  for (const auto& [key, ids] : buckets)
    for (std::size_t a = 0; a < ids.size(); ++a)
      for (std::size_t b = a + 1; b < ids.size(); ++b)
        if (elements_[ids[a]].box.interiors_intersect(elements_[ids[b]].box))
          throw Error(ErrorCode::InvalidArgument, "overlapping elements");
}

// ---------------------------------------------------------------- basic operations

std::array<DyadicBox, 2> bisect(const DyadicBox& box, int direction, const Dyadic& ratio) {
  if (!(Dyadic(0) < ratio && ratio < Dyadic(1))) throw Error(ErrorCode::InvalidArgument, "ratio must lie in (0,1)");
  if (direction == 1) return split_at(box, 1, box.x_lo + ratio * box.width());
  if (direction == 2) return split_at(box, 2, box.y_lo + ratio * box.height());
  throw Error(ErrorCode::InvalidArgument, "direction must be 1 or 2");
}

std::vector<TJunction> t_junctions(const TMesh& mesh) {
  std::vector<TJunction> out;
  for (const auto& v : mesh.topology().vertices())
    if (auto j = mesh.topology().junction(v)) out.push_back(*j);
  return out;
}

std::vector<Dyadic> global_line(const TMesh& mesh, const DyadicPoint& v, int direction) {
  if (direction == 1) return mesh.topology().x_line(v.y);
  if (direction == 2) return mesh.topology().y_line(v.x);
  throw Error(ErrorCode::InvalidArgument, "direction must be 1 or 2");
}

std::vector<Dyadic> TopologyIndex::x_line(const Dyadic& y) const {
  std::vector<Dyadic> out;
  const int g = (p_ + 1) / 2;
  for (int k = g; k >= 1; --k) out.emplace_back(-k);
  for (const auto& [x, line] : vlines_)
    if (covers(line, y, 0)) out.push_back(x);
  for (int k = 1; k <= g; ++k) out.emplace_back(M_ + k);
  return out;
}

std::vector<Dyadic> TopologyIndex::y_line(const Dyadic& x) const {
  std::vector<Dyadic> out;
  const int g = (q_ + 1) / 2;
  for (int k = g; k >= 1; --k) out.emplace_back(-k);
  for (const auto& [y, line] : hlines_)
    if (covers(line, x, 0)) out.push_back(y);
  for (int k = 1; k <= g; ++k) out.emplace_back(N_ + k);
  return out;
}

Extension extension(const TMesh& mesh, const TJunction& j) {
  const auto actual = mesh.topology().junction(j.vertex);
  if (!actual) throw Error(ErrorCode::InvalidArgument, "not a T-junction of the mesh");
  return {*actual, mesh.topology().extension(*actual)};
}

namespace {

struct Classified {
  std::vector<Extension> horizontal, vertical;
};

Classified classify(const TMesh& mesh) {
  Classified c;
  for (const auto& j : t_junctions(mesh)) {
    Extension e{j, mesh.topology().extension(j)};
    (j.orientation == Orientation::Horizontal ? c.horizontal : c.vertical).push_back(e);
  }
  return c;
}

}  // namespace

std::vector<std::pair<TJunction, TJunction>> crossings(const TMesh& mesh) {
  const auto c = classify(mesh);
  std::vector<std::pair<TJunction, TJunction>> out;
  for (const auto& h : c.horizontal)
    for (const auto& v : c.vertical)
      if (h.segment.intersects(v.segment)) out.emplace_back(h.junction, v.junction);
  return out;
}

bool is_analysis_suitable(const TMesh& mesh) { return crossings(mesh).empty(); }

std::vector<TJunction> incompatibilities(const TMesh& old_mesh, const TMesh& new_mesh) {
  if (old_mesh.M() != new_mesh.M() || old_mesh.N() != new_mesh.N())
    throw Error(ErrorCode::NotARefinement, "meshes have different index domains");
  for (const auto& e : new_mesh.elements()) {
    const auto id = old_mesh.topology().element_beside({e.box.x_lo, e.box.y_lo}, 0);
    if (id < 0 || !old_mesh.topology().box(id).contains(e.box))
      throw Error(ErrorCode::NotARefinement, "new mesh does not refine the old mesh");
  }
  std::vector<TJunction> out;
  for (const auto& j : t_junctions(old_mesh)) {
    const auto nj = new_mesh.topology().junction(j.vertex);
    if (!nj) continue;
    const auto so = old_mesh.topology().extension(j);
    const auto sn = new_mesh.topology().extension(*nj);
    if (so.contains(sn) && !(so == sn)) out.push_back(*nj);
  }
  return out;
}

TMesh ref_tj(const TMesh& mesh, const TJunction& j) {
  const auto actual = mesh.topology().junction(j.vertex);
  if (!actual) throw Error(ErrorCode::InvalidArgument, "not a T-junction of the mesh");
  const auto idx = mesh.index_of(actual->host);
  auto elems = mesh.elements();
  const auto kids = actual->orientation == Orientation::Horizontal ? split_at(actual->host, 2, j.vertex.y)
                                                                   : split_at(actual->host, 1, j.vertex.x);
  elems.erase(elems.begin() + idx);
  elems.push_back({kids[0], -1});
  elems.push_back({kids[1], -1});
  return TMesh(mesh.M(), mesh.N(), mesh.p(), mesh.q(), std::move(elems));
}

// ---------------------------------------------------------------- Scott repair loop

namespace {

struct JInfo {
  Orientation orientation;
  DyadicBox host;
  Segment ext;
};

class ScottRepair {
 public:
  ScottRepair(const TMesh& original, const std::vector<DyadicBox>& boxes) : topo_(original.M(), original.N(), original.p(), original.q()) {
    for (const auto& j : t_junctions(original)) original_ext_.emplace(j.vertex, original.topology().extension(j));
    for (const auto& b : boxes) topo_.add(b);
    for (const auto& v : topo_.vertices())
      if (auto j = topo_.junction(v)) insert(v, JInfo{j->orientation, j->host, topo_.extension(*j)});
    for (const auto& [v, info] : junctions_)
      if (info.orientation == Orientation::Horizontal) ecount_ += count_cross(info, {});
    for (const auto& [v, info] : junctions_)
      if (in_c(v, info)) cset_.insert(v);
  }

  std::size_t run() {
    std::size_t repairs = 0;
    while (ecount_ > 0 || !cset_.empty()) {
      long best = -1;
      Dyadic best_area;
      DyadicPoint best_v{};
      std::vector<DyadicPoint> order;
      order.reserve(junctions_.size());
      for (const auto& [v, info] : junctions_) order.push_back(v);
      for (const auto& v : order) {
        const long s = apply(v, false);
        const Dyadic area = host_area(v);
        if (best < 0 || s < best || (s == best && area < best_area)) {
          best = s;
          best_area = area;
          best_v = v;
        }
      }
      apply(best_v, true);
      if (++repairs > 1000000) throw Error(ErrorCode::SolverFailure, "T-spline repair loop does not terminate");
    }
    return repairs;
  }

  std::vector<DyadicBox> boxes() const {
    std::vector<DyadicBox> out;
    for (auto id : topo_.live_ids()) out.push_back(topo_.box(id));
    return out;
  }

 private:
  using Set = std::unordered_set<DyadicPoint>;

  bool in_c(const DyadicPoint& v, const JInfo& info) const {
    auto it = original_ext_.find(v);
    return it != original_ext_.end() && it->second.contains(info.ext) && !(it->second == info.ext);
  }

  void insert(const DyadicPoint& v, const JInfo& info) {
    junctions_.emplace(v, info);
    if (info.orientation == Orientation::Horizontal)
      hext_.emplace(v.y, v);
    else
      vext_.emplace(v.x, v);
  }

  void erase(const DyadicPoint& v) {
    auto it = junctions_.find(v);
    auto& idx = it->second.orientation == Orientation::Horizontal ? hext_ : vext_;
    const Dyadic key = it->second.orientation == Orientation::Horizontal ? v.y : v.x;
    auto range = idx.equal_range(key);
    for (auto r = range.first; r != range.second; ++r)
      if (r->second == v) {
        idx.erase(r);
        break;
      }
    junctions_.erase(it);
  }

  // Crossings of `info` with stored perpendicular extensions whose vertex is not in `skip`.
  long count_cross(const JInfo& info, const Set& skip) const {
    long n = 0;
    const auto& s = info.ext;
    if (info.orientation == Orientation::Horizontal) {
      for (auto it = vext_.lower_bound(s.a.x); it != vext_.end() && it->first <= s.b.x; ++it) {
        if (skip.count(it->second)) continue;
        if (s.intersects(junctions_.at(it->second).ext)) ++n;
      }
    } else {
      for (auto it = hext_.lower_bound(s.a.y); it != hext_.end() && it->first <= s.b.y; ++it) {
        if (skip.count(it->second)) continue;
        if (s.intersects(junctions_.at(it->second).ext)) ++n;
      }
    }
    return n;
  }

  void touching(const DyadicBox& b, Set& out) const {
    for (auto it = hext_.lower_bound(b.y_lo); it != hext_.end() && it->first <= b.y_hi; ++it) {
      const auto& e = junctions_.at(it->second).ext;
      if (e.a.x <= b.x_hi && b.x_lo <= e.b.x) out.insert(it->second);
    }
    for (auto it = vext_.lower_bound(b.x_lo); it != vext_.end() && it->first <= b.x_hi; ++it) {
      const auto& e = junctions_.at(it->second).ext;
      if (e.a.y <= b.y_hi && b.y_lo <= e.b.y) out.insert(it->second);
    }
  }

  static long internal_crossings(const std::vector<std::pair<DyadicPoint, JInfo>>& list) {
    long n = 0;
    for (std::size_t a = 0; a < list.size(); ++a)
      for (std::size_t b = 0; b < list.size(); ++b)
        if (list[a].second.orientation == Orientation::Horizontal &&
            list[b].second.orientation == Orientation::Vertical && list[a].second.ext.intersects(list[b].second.ext))
          ++n;
    return n;
  }

  // Area of the element that a repair at v would split.
  Dyadic host_area(const DyadicPoint& v) const {
    const JInfo& info = junctions_.at(v);
    const int quadrant = info.orientation == Orientation::Horizontal ? (info.host.x_lo == v.x ? 0 : 1)
                                                                      : (info.host.y_lo == v.y ? 0 : 3);
    const DyadicBox& b = topo_.box(static_cast<std::size_t>(topo_.element_beside(v, quadrant)));
    return b.width() * b.height();
  }

  long apply(const DyadicPoint& v, bool commit) {
    const JInfo vinfo = junctions_.at(v);
    const int quadrant = vinfo.orientation == Orientation::Horizontal
                             ? (vinfo.host.x_lo == v.x ? 0 : 1)
                             : (vinfo.host.y_lo == v.y ? 0 : 3);
    const auto host_id = static_cast<std::size_t>(topo_.element_beside(v, quadrant));
    const DyadicBox host = topo_.box(host_id);
    DyadicPoint w;
    std::array<DyadicBox, 2> kids;
    if (vinfo.orientation == Orientation::Horizontal) {
      kids = split_at(host, 2, v.y);
      w = {host.x_lo == v.x ? host.x_hi : host.x_lo, v.y};
    } else {
      kids = split_at(host, 1, v.x);
      w = {v.x, host.y_lo == v.y ? host.y_hi : host.y_lo};
    }
    Set affected_old;
    affected_old.insert(v);
    touching(host, affected_old);

    std::vector<std::pair<DyadicPoint, JInfo>> old_list;
    for (const auto& a : affected_old) old_list.emplace_back(a, junctions_.at(a));
    long old_e = internal_crossings(old_list);
    for (const auto& [a, info] : old_list) old_e += count_cross(info, affected_old);

    topo_.remove(host_id);
    const auto k0 = topo_.add(kids[0]);
    const auto k1 = topo_.add(kids[1]);

    Set affected = affected_old;
    affected.insert(w);
    std::vector<std::pair<DyadicPoint, JInfo>> new_list;
    for (const auto& a : affected)
      if (auto j = topo_.junction(a)) new_list.emplace_back(a, JInfo{j->orientation, j->host, topo_.extension(*j)});
    long new_e = internal_crossings(new_list);
    for (const auto& [a, info] : new_list) new_e += count_cross(info, affected);

    long dc = 0;
    for (const auto& a : affected) dc -= static_cast<long>(cset_.count(a));
    for (const auto& [a, info] : new_list) dc += in_c(a, info) ? 1 : 0;

    const long score = ecount_ + new_e - old_e + static_cast<long>(cset_.size()) + dc;
    if (commit) {
      for (const auto& a : affected_old) erase(a);
      for (const auto& a : affected) cset_.erase(a);
      for (const auto& [a, info] : new_list) {
        insert(a, info);
        if (in_c(a, info)) cset_.insert(a);
      }
      ecount_ += new_e - old_e;
    } else {
      topo_.remove(k0);
      topo_.remove(k1);
      topo_.add(host);
    }
    return score;
  }

  TopologyIndex topo_;
  std::map<DyadicPoint, JInfo, YX> junctions_;
  std::multimap<Dyadic, DyadicPoint> hext_, vext_;
  std::unordered_map<DyadicPoint, Segment> original_ext_;
  Set cset_;
  long ecount_ = 0;
};

}  // namespace

TMesh refine_scott_mesh(const TMesh& mesh, const std::vector<DyadicBox>& marked, ScottStats* stats) {
  std::vector<char> hit(mesh.size(), 0);
  for (const auto& b : marked) {
    const auto k = mesh.index_of(b);
    if (k < 0) throw Error(ErrorCode::NotInMesh, "marked element is not in the mesh");
    hit[k] = 1;
  }
  std::vector<DyadicBox> boxes;
  for (std::size_t k = 0; k < mesh.size(); ++k) {
    const auto& b = mesh.elements()[k].box;
    if (!hit[k]) {
      boxes.push_back(b);
      continue;
    }
    const auto mid = b.mid();
    for (const auto& half : split_at(b, 1, mid.x))
      for (const auto& quarter : split_at(half, 2, mid.y)) boxes.push_back(quarter);
  }
  ScottRepair repair(mesh, boxes);
  const auto n = repair.run();
  if (stats) stats->repairs = n;
  std::vector<TElement> elems;
  for (const auto& b : repair.boxes()) elems.push_back({b, -1});
  return TMesh(mesh.M(), mesh.N(), mesh.p(), mesh.q(), std::move(elems));
}

// ---------------------------------------------------------------- safe refinement

namespace {

std::array<Dyadic, 2> half_level_shape(int k) {
  if (k < 0) throw Error(ErrorCode::NotHalfLevelMesh, "element has no half-level");
  if (k % 2 == 0) return {Dyadic::pow2_neg(k / 2), Dyadic::pow2_neg(k / 2)};
  return {Dyadic::pow2_neg((k + 1) / 2), Dyadic::pow2_neg((k - 1) / 2)};
}

bool aligned(const Dyadic& v, const Dyadic& unit) {
  // v is an integer multiple of the power of two `unit`.
  return v.scale() <= unit.scale();
}

}  // namespace

std::array<DyadicBox, 2> half_children(const DyadicBox& box, int sublevel) {
  const auto shape = half_level_shape(sublevel);
  if (box.width() != shape[0] || box.height() != shape[1] || !aligned(box.x_lo, shape[0]) ||
      !aligned(box.y_lo, shape[1]))
    throw Error(ErrorCode::NotHalfLevelMesh, "box does not match its half-level shape");
  const auto mid = box.mid();
  return sublevel % 2 == 0 ? split_at(box, 1, mid.x) : split_at(box, 2, mid.y);
}

std::array<Dyadic, 2> safe_distance(int k, int p, int q) {
  if (k % 2 == 0) {
    const unsigned s = static_cast<unsigned>(k / 2 + 1);
    return {Dyadic(2 * (p / 2) + 1, s), Dyadic(2 * ((q + 1) / 2) + 1, s)};
  }
  const unsigned s = static_cast<unsigned>((k + 1) / 2);
  return {Dyadic(2 * ((p + 1) / 2) + 1, s + 1), Dyadic(2 * (q / 2) + 1, s)};
}

std::vector<DyadicBox> closure_safe_ts(const TMesh& mesh, const std::vector<DyadicBox>& marked) {
  if (!mesh.has_half_levels()) throw Error(ErrorCode::NotHalfLevelMesh, "mesh lacks half-level provenance");
  std::unordered_map<std::uint64_t, std::size_t> grid;  // (sublevel, i, j) -> element
  auto key = [](int k, std::int64_t i, std::int64_t j) {
    return (static_cast<std::uint64_t>(k) << 56) | (static_cast<std::uint64_t>(i) << 28) | static_cast<std::uint64_t>(j);
  };
  for (std::size_t n = 0; n < mesh.size(); ++n) {
    const auto& e = mesh.elements()[n];
    const auto shape = half_level_shape(e.sublevel);
    grid.emplace(key(e.sublevel, e.box.x_lo.numerator_at(shape[0].scale()), e.box.y_lo.numerator_at(shape[1].scale())), n);
  }
  std::vector<char> in(mesh.size(), 0);
  std::vector<std::size_t> work;
  for (const auto& b : marked) {
    const auto k = mesh.index_of(b);
    if (k < 0) throw Error(ErrorCode::NotInMesh, "marked element is not in the mesh");
    if (!in[k]) {
      in[k] = 1;
      work.push_back(static_cast<std::size_t>(k));
    }
  }
  while (!work.empty()) {
    const auto& e = mesh.elements()[work.back()];
    work.pop_back();
    if (e.sublevel == 0) continue;
    const int k = e.sublevel - 1;
    const auto shape = half_level_shape(k);
    const auto D = safe_distance(e.sublevel, mesh.p(), mesh.q());
    const auto mid = e.box.mid();
    // Candidate index ranges, padded and then checked exactly.
    const double w = shape[0].to_double(), h = shape[1].to_double();
    const auto i0 = static_cast<std::int64_t>(std::floor((mid.x - D[0]).to_double() / w)) - 1;
    const auto i1 = static_cast<std::int64_t>(std::ceil((mid.x + D[0]).to_double() / w)) + 1;
    const auto j0 = static_cast<std::int64_t>(std::floor((mid.y - D[1]).to_double() / h)) - 1;
    const auto j1 = static_cast<std::int64_t>(std::ceil((mid.y + D[1]).to_double() / h)) + 1;
    for (auto i = std::max<std::int64_t>(i0, 0); i <= i1; ++i)
      for (auto j = std::max<std::int64_t>(j0, 0); j <= j1; ++j) {
        auto it = grid.find(key(k, i, j));
        if (it == grid.end() || in[it->second]) continue;
        const auto m2 = mesh.elements()[it->second].box.mid();
        const Dyadic dx = mid.x < m2.x ? m2.x - mid.x : mid.x - m2.x;
        const Dyadic dy = mid.y < m2.y ? m2.y - mid.y : mid.y - m2.y;
        if (dx <= D[0] && dy <= D[1]) {
          in[it->second] = 1;
          work.push_back(it->second);
        }
      }
  }
  std::vector<DyadicBox> out;
  for (std::size_t n = 0; n < mesh.size(); ++n)
    if (in[n]) out.push_back(mesh.elements()[n].box);
  return out;
}

TMesh refine_safe_ts_mesh(const TMesh& mesh, const std::vector<DyadicBox>& marked) {
  const auto cl = closure_safe_ts(mesh, marked);
  std::vector<char> drop(mesh.size(), 0);
  for (const auto& b : cl) drop[mesh.index_of(b)] = 1;
  std::vector<TElement> elems;
  for (std::size_t n = 0; n < mesh.size(); ++n) {
    const auto& e = mesh.elements()[n];
    if (!drop[n]) {
      elems.push_back(e);
      continue;
    }
    for (const auto& c : half_children(e.box, e.sublevel)) elems.push_back({c, e.sublevel + 1});
  }
  return TMesh(mesh.M(), mesh.N(), mesh.p(), mesh.q(), std::move(elems));
}

// ---------------------------------------------------------------- basis and Bezier mesh

std::vector<TSplineFunction> tspline_basis(const TMesh& mesh) {
  if (!is_analysis_suitable(mesh)) throw Error(ErrorCode::NotAnalysisSuitable, "T-mesh is not analysis-suitable");
  const auto& t = mesh.topology();
  std::vector<TSplineFunction> out;
  const int hx = (mesh.p() + 1) / 2, hy = (mesh.q() + 1) / 2;
  for (const auto& v : t.vertices()) {
    TSplineFunction f;
    f.anchor = v;
    auto lo = t.x_points(v.y, v.x, hx, false);
    auto hi = t.x_points(v.y, v.x, hx, true);
    std::reverse(lo.begin(), lo.end());
    f.knots_x.knots = lo;
    f.knots_x.knots.push_back(v.x);
    f.knots_x.knots.insert(f.knots_x.knots.end(), hi.begin(), hi.end());
    lo = t.y_points(v.x, v.y, hy, false);
    hi = t.y_points(v.x, v.y, hy, true);
    std::reverse(lo.begin(), lo.end());
    f.knots_y.knots = lo;
    f.knots_y.knots.push_back(v.y);
    f.knots_y.knots.insert(f.knots_y.knots.end(), hi.begin(), hi.end());
    out.push_back(std::move(f));
  }
  return out;
}

TSplineRefinement refine_scott(const TMesh& mesh, const std::vector<DyadicBox>& marked, ScottStats* stats) {
  auto m = refine_scott_mesh(mesh, marked, stats);
  auto b = tspline_basis(m);
  return {std::move(m), std::move(b)};
}

TSplineRefinement refine_safe_ts(const TMesh& mesh, const std::vector<DyadicBox>& marked) {
  auto m = refine_safe_ts_mesh(mesh, marked);
  auto b = tspline_basis(m);
  return {std::move(m), std::move(b)};
}

std::vector<BezierCell> bezier_mesh(const TMesh& mesh) {
  const auto c = classify(mesh);
  std::multimap<Dyadic, Segment> hs, vs;
  for (const auto& e : c.horizontal) hs.emplace(e.segment.a.y, e.segment);
  for (const auto& e : c.vertical) vs.emplace(e.segment.a.x, e.segment);
  std::vector<BezierCell> out;
  for (std::size_t n = 0; n < mesh.size(); ++n) {
    const auto& b = mesh.elements()[n].box;
    std::set<Dyadic> xs{b.x_lo, b.x_hi}, ys{b.y_lo, b.y_hi};
    for (auto it = hs.upper_bound(b.y_lo); it != hs.end() && it->first < b.y_hi; ++it)
      if (it->second.a.x < b.x_hi && b.x_lo < it->second.b.x) ys.insert(it->first);
    for (auto it = vs.upper_bound(b.x_lo); it != vs.end() && it->first < b.x_hi; ++it)
      if (it->second.a.y < b.y_hi && b.y_lo < it->second.b.y) xs.insert(it->first);
    for (auto xi = xs.begin(); std::next(xi) != xs.end(); ++xi)
      for (auto yi = ys.begin(); std::next(yi) != ys.end(); ++yi)
        out.push_back({DyadicBox(*xi, *std::next(xi), *yi, *std::next(yi)), n});
  }
  std::sort(out.begin(), out.end(), [](const BezierCell& a, const BezierCell& b) {
    if (a.box.y_lo != b.box.y_lo) return a.box.y_lo < b.box.y_lo;
    return a.box.x_lo < b.box.x_lo;
  });
  return out;
}

double eval_tspline(const TSplineFunction& f, double x, double y) {
  return bspline_eval(f.knots_x, x) * bspline_eval(f.knots_y, y);
}

// ---------------------------------------------------------------- text formats

namespace {

void write_box(std::ostream& os, const DyadicBox& b) {
  for (const auto* d : {&b.x_lo, &b.x_hi, &b.y_lo, &b.y_hi}) os << d->numerator() << ' ' << d->scale() << ' ';
}

}  // namespace

void write_tmesh(std::ostream& os, const TMesh& mesh) {
  os << "TMESH " << mesh.M() << ' ' << mesh.N() << ' ' << mesh.p() << ' ' << mesh.q() << '\n';
  for (const auto& e : mesh.elements()) {
    write_box(os, e.box);
    os << e.sublevel << '\n';
  }
}

void write_bezier(std::ostream& os, const TMesh& mesh, const std::vector<BezierCell>& cells) {
  os << "BEZIER " << mesh.M() << ' ' << mesh.N() << ' ' << mesh.p() << ' ' << mesh.q() << '\n';
  for (const auto& c : cells) {
    write_box(os, c.box);
    os << c.element << '\n';
  }
}

TMesh read_tmesh(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorCode::Parse, "missing TMESH header");
  std::istringstream head(line);
  std::string tag;
  int M, N, p, q;
  if (!(head >> tag >> M >> N >> p >> q) || tag != "TMESH") throw Error(ErrorCode::Parse, "bad TMESH header");
  std::vector<TElement> elems;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    std::int64_t n[4];
    unsigned s[4];
    for (int k = 0; k < 4; ++k)
      if (!(ls >> n[k] >> s[k])) throw Error(ErrorCode::Parse, "bad element line: " + line);
    int sub = -1;
    ls >> sub;
    elems.push_back({DyadicBox(Dyadic(n[0], s[0]), Dyadic(n[1], s[1]), Dyadic(n[2], s[2]), Dyadic(n[3], s[3])), sub});
  }
  return TMesh(M, N, p, q, std::move(elems));
}

TMesh overlay(const TMesh& a, const TMesh& b) {
  if (a.M() != b.M() || a.N() != b.N() || a.p() != b.p() || a.q() != b.q())
    throw Error(ErrorCode::InvalidArgument, "overlay needs meshes over the same domain");
  auto buckets = [](const TMesh& m) {
    std::map<std::pair<std::int64_t, std::int64_t>, std::vector<const TElement*>> out;
    for (const auto& e : m.elements()) out[{floor_int(e.box.x_lo), floor_int(e.box.y_lo)}].push_back(&e);
    return out;
  };
  const auto ba = buckets(a), bb = buckets(b);
  std::vector<TElement> out;
  for (const auto& [cell, mine] : ba) {
    const auto& theirs = bb.at(cell);
    for (const auto* e : mine)
      for (const auto* o : theirs)
        if (o->box.contains(e->box)) {
          out.push_back(*e);
          break;
        }
    for (const auto* o : theirs)
      for (const auto* e : mine)
        if (e->box.contains(o->box) && e->box != o->box) {
          out.push_back(*o);
          break;
        }
  }
  return TMesh(a.M(), a.N(), a.p(), a.q(), std::move(out));
}

}  // namespace aiga
