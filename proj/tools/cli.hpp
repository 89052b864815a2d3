#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfforge/synth.hpp"

namespace cfforge::cli {

enum ExitCode : int { kOk = 0, kAuditFailed = 1, kInputError = 2, kOptimizationFailure = 3 };

/// Runs one command line (without the program name). Results go to `out`,
/// diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Firing counts for one gradient, with and without incremental probing,
/// over a doubling ladder of shaped rule bases starting at `start` rules.
/// Tree ladders step R -> 2R + 1 so every size is 2^k - 1.
nlohmann::json bench(Shape shape, int start, int sizes, std::uint64_t seed, unsigned threads);

}  // namespace cfforge::cli
