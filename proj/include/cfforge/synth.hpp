#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "cfforge/rulebase.hpp"

namespace cfforge {

enum class Shape { Flat, Chain, Tree };
std::string_view to_string(Shape s);
Shape parse_shape(std::string_view s);  // throws SpecInvalid

struct SynthSpec {
  int features = 10;
  int classes = 5;
  int objects = 100;
  int irrelevant_features = 3;
  double noise = 0.0;
  std::uint64_t seed = 0;
  Shape shape = Shape::Flat;

  /// Throws SpecInvalid.
  void check() const;
};

/// Feature/class rule bases plus a labelled dataset.
///
/// Every relevant feature belongs to exactly one class (round-robin), so the
/// classes own disjoint, non-empty feature subsets. There is one rule per
/// (feature, class) pair.
struct SynthResult {
  RuleBase zero;     // all weights 0
  RuleBase expert;   // +0.7 own feature, -0.3 other relevant feature, 0 irrelevant
  RuleBase refined;  // expert nudged toward the ideal sign pattern
  std::vector<TrainingObject> data;
  std::map<std::string, std::vector<std::string>> class_features;
  std::vector<std::string> irrelevant;
};

/// Flat generator. An object of class c draws its own features from
/// U[0.6, 1], other relevant features from U[-0.2, 0.2] and irrelevant ones
/// from U[-1, 1]; with probability `noise` every feature then gets an extra
/// U[-0.4, 0.4] offset, clamped. The expert base is checked to classify
/// every noise-free object correctly. Throws SpecInvalid for non-flat specs.
SynthResult generate(const SynthSpec& spec);

struct ShapedResult {
  RuleBase rules;
  std::vector<TrainingObject> data;  // one object, every input at CF 1
};

/// Rule bases with a given inference shape, weights drawn from U[0.2, 0.8].
///
///   flat   R independent feature rules split across two classes
///   chain  f -> p1 -> ... -> class, R rules in one line
///   tree   balanced binary tree of R = 2^k - 1 rules; each rule reads one
///          proposition that its two child rules conclude, leaves read
///          inputs, the root concludes the class
ShapedResult generate_shaped(int rules, Shape shape, std::uint64_t seed);

}  // namespace cfforge
