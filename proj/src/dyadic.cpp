#include "aiga/dyadic.hpp"

#include <bit>
#include <cmath>
#include <sstream>

#include "aiga/error.hpp"

namespace aiga {

namespace {

std::int64_t shift_checked(std::int64_t v, unsigned by) {
  if (by == 0 || v == 0) return v;
  if (by >= 63) throw Error(ErrorCode::Overflow, "dyadic overflow while aligning scales");
  const std::int64_t limit = std::int64_t{1} << (62 - by);
  if (v >= limit || v <= -limit) throw Error(ErrorCode::Overflow, "dyadic overflow while aligning scales");
  return v * (std::int64_t{1} << by);
}

}  // namespace

Dyadic::Dyadic(std::int64_t numerator, unsigned scale) : num_(numerator), scale_(scale) {
  if (num_ == 0) {
    scale_ = 0;
    return;
  }
  const auto tz = static_cast<unsigned>(std::countr_zero(static_cast<std::uint64_t>(num_)));
  const unsigned drop = tz < scale_ ? tz : scale_;
  num_ >>= drop;  // arithmetic shift; exact because the low bits are zero
  scale_ -= drop;
}

std::int64_t Dyadic::numerator_at(unsigned s) const {
  if (s < scale_) throw Error(ErrorCode::InvalidArgument, "cannot lower dyadic scale");
  return shift_checked(num_, s - scale_);
}

double Dyadic::to_double() const noexcept { return std::ldexp(static_cast<double>(num_), -static_cast<int>(scale_)); }

std::string Dyadic::str() const {
  std::ostringstream os;
  os << *this;
  return os.str();
}

Dyadic Dyadic::operator-() const { return Dyadic(-num_, scale_); }

Dyadic operator+(const Dyadic& a, const Dyadic& b) {
  const unsigned s = a.scale_ > b.scale_ ? a.scale_ : b.scale_;
  std::int64_t r = 0;
  if (__builtin_add_overflow(a.numerator_at(s), b.numerator_at(s), &r))
    throw Error(ErrorCode::Overflow, "dyadic addition overflow");
  return Dyadic(r, s);
}

Dyadic operator-(const Dyadic& a, const Dyadic& b) { return a + (-b); }

Dyadic operator*(const Dyadic& a, const Dyadic& b) {
  std::int64_t r = 0;
  if (__builtin_mul_overflow(a.num_, b.num_, &r)) throw Error(ErrorCode::Overflow, "dyadic product overflow");
  return Dyadic(r, a.scale_ + b.scale_);
}

std::ostream& operator<<(std::ostream& os, const Dyadic& d) {
  os << d.numerator();
  if (d.scale() != 0) os << "/2^" << d.scale();
  return os;
}

DyadicBox::DyadicBox(Dyadic xl, Dyadic xh, Dyadic yl, Dyadic yh) : x_lo(xl), x_hi(xh), y_lo(yl), y_hi(yh) {
  if (!(x_lo < x_hi) || !(y_lo < y_hi)) throw Error(ErrorCode::InvalidArgument, "box with empty interior");
}

const char* to_string(BoxRelation r) {
  switch (r) {
    case BoxRelation::Disjoint: return "disjoint";
    case BoxRelation::Touching: return "touching";
    case BoxRelation::Overlapping: return "overlapping-interiors";
    case BoxRelation::AContainsB: return "a-contains-b";
    case BoxRelation::BContainsA: return "b-contains-a";
    case BoxRelation::Equal: return "equal";
  }
  return "?";
}

BoxRelation box_relation(const DyadicBox& a, const DyadicBox& b) {
  if (a == b) return BoxRelation::Equal;
  if (!a.intersects(b)) return BoxRelation::Disjoint;
  if (!a.interiors_intersect(b)) return BoxRelation::Touching;
  if (a.contains(b)) return BoxRelation::AContainsB;
  if (b.contains(a)) return BoxRelation::BContainsA;
  return BoxRelation::Overlapping;
}

std::ostream& operator<<(std::ostream& os, const DyadicBox& b) {
  return os << "[" << b.x_lo << "," << b.x_hi << "]x[" << b.y_lo << "," << b.y_hi << "]";
}

}  // namespace aiga
