#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

namespace cfforge {

/// A confidence in [-1, +1]: +1 certainly true, -1 certainly false, 0 unknown.
class CertaintyFactor {
 public:
  constexpr CertaintyFactor() = default;

  /// Throws std::out_of_range for values outside [-1, 1] (and NaN).
  explicit CertaintyFactor(double value) : value_(value) {
    if (!(value >= -1.0 && value <= 1.0)) {
      throw std::out_of_range("certainty factor out of range: " + std::to_string(value));
    }
  }

  /// Clamps into [-1, 1] instead of rejecting. NaN is still rejected.
  static CertaintyFactor clamped(double value) {
    if (std::isnan(value)) throw std::out_of_range("certainty factor is NaN");
    return CertaintyFactor(value < -1.0 ? -1.0 : (value > 1.0 ? 1.0 : value));
  }

  constexpr double value() const noexcept { return value_; }
  constexpr explicit operator double() const noexcept { return value_; }

  friend constexpr bool operator==(CertaintyFactor a, CertaintyFactor b) noexcept {
    return a.value_ == b.value_;
  }

 private:
  double value_ = 0.0;
};

// Raw double versions, used on the engine's hot paths. Inputs must already be
// in [-1, 1]; the result is clamped to absorb rounding drift.
double combine_parallel(double x, double y) noexcept;
double combine_all(std::span<const double> contributions) noexcept;

/// Parallel combination of two pieces of evidence for the same proposition.
///
///   x, y >= 0     x + y - xy
///   x, y <= 0     x + y + xy
///   mixed signs   (x + y) / (1 - min(|x|, |y|))
///
/// The mixed-sign form is undefined for (1, -1); that pair combines to 0.
inline CertaintyFactor combine_parallel(CertaintyFactor x, CertaintyFactor y) noexcept {
  return CertaintyFactor::clamped(combine_parallel(x.value(), y.value()));
}

/// Left fold of combine_parallel starting from 0. Empty input gives 0.
CertaintyFactor combine_all(std::span<const CertaintyFactor> contributions) noexcept;

}  // namespace cfforge
