#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cfforge/optimizer.hpp"
#include "cfforge/rulebase.hpp"

namespace cfforge {

// Rule-base documents:
//
//   { "propositions": [ {"id": ..., "kind": "input"|"derived", "output_class": bool} ],
//     "rules": [ {"id": ..., "if": EXPR, "then": ..., "weight": number,
//                 "bounds": [lo, hi], "bound_kind": "hard"|"soft", "trainable": bool} ] }
//
//   EXPR ::= "<prop-id>" | {"and": [EXPR...]} | {"or": [EXPR...]} | {"not": EXPR}
//
// Doubles are written in shortest round-trip form, so weights survive
// serialize/parse bit for bit.

nlohmann::json to_json(const RuleBase& rb);
nlohmann::json to_json(const Expr& e);

/// Throws ParseError (with a field path) on malformed structure, then
/// ValidationError if the parsed base violates an invariant.
RuleBase rulebase_from_json(const nlohmann::json& doc);

std::string serialize(const RuleBase& rb);
RuleBase parse_rulebase(std::string_view text);

RuleBase load_rulebase(const std::filesystem::path& path);
void save_rulebase(const std::filesystem::path& path, const RuleBase& rb);

// Datasets are JSON Lines, one {"id", "facts": {...}, "label"} per line.
// Blank lines are skipped. Parse errors carry "line N".

std::vector<TrainingObject> parse_dataset(std::string_view text);
std::string serialize_dataset(std::span<const TrainingObject> objs);
std::vector<TrainingObject> load_dataset(const std::filesystem::path& path);
void save_dataset(const std::filesystem::path& path, std::span<const TrainingObject> objs);

nlohmann::json to_json(const OptimizerConfig& cfg);
nlohmann::json to_json(const TrainingTrace& trace);
/// Reads back what to_json(TrainingTrace) writes. Throws ParseError.
TrainingTrace trace_from_json(const nlohmann::json& doc);

std::string read_file(const std::filesystem::path& path);  // throws ParseError if unreadable
void write_file(const std::filesystem::path& path, std::string_view text);

}  // namespace cfforge
