#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>

namespace aiga {

/// Exact binary rational numerator / 2^scale, kept in canonical form
/// (numerator odd, or scale == 0).
class Dyadic {
public:
  constexpr Dyadic() = default;
  constexpr Dyadic(std::int64_t integer) : num_(integer), scale_(0) {}  // NOLINT(implicit)
  Dyadic(std::int64_t numerator, unsigned scale);

  std::int64_t numerator() const noexcept { return num_; }
  unsigned scale() const noexcept { return scale_; }

  double to_double() const noexcept;
  std::string str() const;

  /// Numerator when expressed with denominator 2^s; throws if s < scale() or on overflow.
  std::int64_t numerator_at(unsigned s) const;

  Dyadic operator-() const;
  friend Dyadic operator+(const Dyadic& a, const Dyadic& b);
  friend Dyadic operator-(const Dyadic& a, const Dyadic& b);
  friend Dyadic operator*(const Dyadic& a, const Dyadic& b);
  Dyadic half() const { return Dyadic(num_, scale_ + 1); }
  static Dyadic midpoint(const Dyadic& a, const Dyadic& b) { return (a + b).half(); }
  /// 2^-k for k >= 0.
  static Dyadic pow2_neg(unsigned k) { return Dyadic(1, k); }

  friend std::strong_ordering operator<=>(const Dyadic& a, const Dyadic& b) noexcept;
  friend bool operator==(const Dyadic& a, const Dyadic& b) noexcept {
    return a.num_ == b.num_ && a.scale_ == b.scale_;
  }

private:
  std::int64_t num_ = 0;
  unsigned scale_ = 0;
};

inline std::strong_ordering operator<=>(const Dyadic& a, const Dyadic& b) noexcept {
  if (a.scale_ == b.scale_) return a.num_ <=> b.num_;
  // 128-bit lift avoids overflow for any scales below 64.
  const unsigned s = a.scale_ > b.scale_ ? a.scale_ : b.scale_;
  const __int128 la = static_cast<__int128>(a.num_) << (s - a.scale_);
  const __int128 lb = static_cast<__int128>(b.num_) << (s - b.scale_);
  if (la < lb) return std::strong_ordering::less;
  if (la > lb) return std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

std::ostream& operator<<(std::ostream& os, const Dyadic& d);

/// Exact comparison; spelled out for callers that want a named function.
inline std::strong_ordering cmp(const Dyadic& a, const Dyadic& b) noexcept { return a <=> b; }

struct DyadicPoint {
  Dyadic x, y;
  friend auto operator<=>(const DyadicPoint&, const DyadicPoint&) = default;
  friend bool operator==(const DyadicPoint&, const DyadicPoint&) = default;
};

enum class BoxRelation { Disjoint, Touching, Overlapping, AContainsB, BContainsA, Equal };

const char* to_string(BoxRelation r);

/// Closed axis-aligned rectangle with dyadic corners and nonempty interior.
struct DyadicBox {
  Dyadic x_lo, x_hi, y_lo, y_hi;

  DyadicBox() = default;
  DyadicBox(Dyadic xl, Dyadic xh, Dyadic yl, Dyadic yh);

  Dyadic width() const { return x_hi - x_lo; }
  Dyadic height() const { return y_hi - y_lo; }
  DyadicPoint mid() const { return {Dyadic::midpoint(x_lo, x_hi), Dyadic::midpoint(y_lo, y_hi)}; }
  bool contains(const DyadicPoint& p) const {
    return x_lo <= p.x && p.x <= x_hi && y_lo <= p.y && p.y <= y_hi;
  }
  bool is_corner(const DyadicPoint& p) const {
    return (p.x == x_lo || p.x == x_hi) && (p.y == y_lo || p.y == y_hi);
  }
  bool interiors_intersect(const DyadicBox& o) const {
    return x_lo < o.x_hi && o.x_lo < x_hi && y_lo < o.y_hi && o.y_lo < y_hi;
  }
  bool intersects(const DyadicBox& o) const {
    return x_lo <= o.x_hi && o.x_lo <= x_hi && y_lo <= o.y_hi && o.y_lo <= y_hi;
  }
  bool contains(const DyadicBox& o) const {
    return x_lo <= o.x_lo && o.x_hi <= x_hi && y_lo <= o.y_lo && o.y_hi <= y_hi;
  }

  friend auto operator<=>(const DyadicBox&, const DyadicBox&) = default;
  friend bool operator==(const DyadicBox&, const DyadicBox&) = default;
};

BoxRelation box_relation(const DyadicBox& a, const DyadicBox& b);

std::ostream& operator<<(std::ostream& os, const DyadicBox& b);

}  // namespace aiga

template <>
struct std::hash<aiga::Dyadic> {
  std::size_t operator()(const aiga::Dyadic& d) const noexcept {
    return std::hash<std::int64_t>{}(d.numerator()) * 31u + d.scale();
  }
};

template <>
struct std::hash<aiga::DyadicPoint> {
  std::size_t operator()(const aiga::DyadicPoint& p) const noexcept {
    const std::hash<aiga::Dyadic> h;
    return h(p.x) * 1000003u ^ h(p.y);
  }
};
