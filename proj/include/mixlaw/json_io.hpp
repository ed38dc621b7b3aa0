#pragma once

// Deterministic JSON text: sorted keys, doubles with 17 significant digits,
// non-finite numbers as null. Two equal documents always produce the same
// bytes, which is what checksums and byte-identical outputs rely on.

#include <string>
#include <string_view>

#include "json.hpp"

namespace mixlaw {

// "%.17g"; "nan" / "inf" / "-inf" for non-finite values.
std::string format_number(double v);
// Four significant digits for human-facing tables.
std::string format_short(double v);

// indent < 0 gives the compact form.
std::string canonical_dump(const nlohmann::json& value, int indent = -1);

// Finite doubles pass through; NaN and infinities become null.
nlohmann::json number_or_null(double v);
double number_from(const nlohmann::json& v);  // null -> NaN

std::string sha256_hex(std::string_view data);

}  // namespace mixlaw
