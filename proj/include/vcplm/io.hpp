#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "vcplm/inference.hpp"
#include "vcplm/profile.hpp"
#include "vcplm/simulation.hpp"

namespace vcplm {

using Json = nlohmann::ordered_json;

/// Reads a dataset from CSV.  The header names the columns
///   Y, eta_1..eta_p1, V, W_1..W_p2, X_1..X_q, U [, xi_1..xi_p1]
/// in any order.  Schema problems raise ValidationError naming the
/// offending row and column.
Dataset read_dataset_csv(std::istream& in);
Dataset read_dataset_csv(const std::string& path);

/// Writes a dataset in the same layout (xi columns only when present).
void write_dataset_csv(std::ostream& out, const Dataset& data);

Json fit_to_json(const ProfileFit& fit);
Json test_to_json(const TestResult& result);
Json scenario_to_json(const ScenarioSpec& spec);

/// Starts from the named preset (key "preset") or defaults, then applies
/// any other keys present.
ScenarioSpec scenario_from_json(const Json& j);

/// alpha_curve.csv: u, alpha_1..alpha_q.
void write_alpha_curve(std::ostream& out, const ProfileFit& fit);

/// Canonical text rendering used for every JSON artifact.
std::string dump_json(const Json& j);

std::string_view version() noexcept;

}  // namespace vcplm
