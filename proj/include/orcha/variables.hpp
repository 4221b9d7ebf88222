#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace orcha {

/// Cell-centered variables every block carries, in storage order.
enum Var : std::size_t { kDens, kVelx, kVely, kEner, kPres, kTemp, kS1, kS2, kS3 };

inline constexpr std::size_t kNumVars = 9;

inline constexpr std::array<std::string_view, kNumVars> kVarNames = {
    "dens", "velx", "vely", "ener", "pres", "temp", "s1", "s2", "s3"};

inline std::optional<std::size_t> var_index(std::string_view name) {
    for (std::size_t v = 0; v < kNumVars; ++v)
        if (kVarNames[v] == name) return v;
    return std::nullopt;
}

}  // namespace orcha
