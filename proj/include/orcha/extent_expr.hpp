#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace orcha {

/// Values an extent expression may refer to by name.
struct MeshParams {
    std::int64_t nxb = 16;
    std::int64_t nyb = 16;
    std::int64_t nguard = 2;
    std::int64_t nvars = 9;

    bool operator==(const MeshParams&) const = default;
};

// Extent/lbound micro-language: integer literals, the identifiers of
// MeshParams, binary + - *, unary minus and parentheses.

/// Throws ExpressionError on malformed input or unknown identifiers.
void check_extent_expression(std::string_view expr);

std::int64_t evaluate_extent(std::string_view expr, const MeshParams& params);

/// Whitespace-free form used to compare expressions for equality.
std::string normalize_extent(std::string_view expr);

}  // namespace orcha
