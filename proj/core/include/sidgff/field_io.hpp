#pragma once

// Profile configs and field dumps. Text output uses shortest round-trip
// formatting so repeated runs are byte-identical.

#include <iosfwd>
#include <nlohmann/json.hpp>
#include <string>

#include "sidgff/profile.hpp"
#include "sidgff/samplers.hpp"

namespace sidgff {

/// Library version (project version plus git describe when available).
const char* library_version();

/// Shortest decimal string that parses back to the same double.
std::string format_double(double x);

/// {"sigmas": [...], "lambdas": [...]} with the normalized values.
nlohmann::json profile_to_json(const StepProfile& p);
/// Accepts {"sigmas", "lambdas"} or {"variances", "lambdas"}, plus an
/// optional "normalization": "rescale" | "strict", or a string naming a
/// built-in profile. Throws ValidationError with the offending key.
StepProfile profile_from_json(const nlohmann::json& j);
/// Reads a JSON profile file.
StepProfile load_profile_file(const std::string& path);

/// kind, n, seed, k0, profile (when present) and the format version.
nlohmann::json field_header(const FieldSample& s);

/// "# <header json>" followed by N rows of N comma-separated values (row y).
/// Keys of `extra` (an object) are merged into the header.
void write_field_csv(std::ostream& os, const FieldSample& s,
                     const nlohmann::json& extra = nlohmann::json::object());
FieldSample read_field_csv(std::istream& is);

/// "SIDGFF1\n", the header length as a little-endian uint64, the header JSON
/// and N^2 little-endian doubles in row-major order.
void write_field_binary(std::ostream& os, const FieldSample& s,
                        const nlohmann::json& extra = nlohmann::json::object());
FieldSample read_field_binary(std::istream& is);

}  // namespace sidgff
