#pragma once

#include "orcha/recipe_graph.hpp"

#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace orcha {

enum class Structure { Center, FluxX, FluxY };
enum class ScalarKind { Real, Integer };
enum class MetaKind { Lo, Hi, Deltas, Dt, BlockId };

std::string_view to_string(Structure s);
std::string_view to_string(ScalarKind k);
std::string_view to_string(MetaKind k);

struct GridData {
    Structure structure = Structure::Center;
    std::set<std::string> variables_in;
    std::set<std::string> variables_out;
    bool operator==(const GridData&) const = default;
};

struct Scratch {
    std::vector<std::string> extents;
    std::vector<std::string> lbound;
    bool operator==(const Scratch&) const = default;
};

struct External {
    ScalarKind kind = ScalarKind::Real;
    bool operator==(const External&) const = default;
};

struct TileMetadata {
    MetaKind kind = MetaKind::Lo;
    bool operator==(const TileMetadata&) const = default;
};

using ArgumentSource = std::variant<GridData, Scratch, External, TileMetadata>;

struct ArgumentSpec {
    std::string name;
    ArgumentSource source;
    bool operator==(const ArgumentSpec&) const = default;
};

/// Data requirements of one annotated kernel routine.
struct RoutineSpec {
    std::string name;
    std::vector<ArgumentSpec> arguments;  // declaration order
    std::string source_file;
    std::set<Device> device_variants;

    bool operator==(const RoutineSpec&) const = default;
    const ArgumentSpec* find(std::string_view arg) const;
};

/// Extracts every `<sentinel> milhoja begin` ... `<sentinel> milhoja end`
/// block. Lines that do not start with the sentinel are never inspected.
///
/// Block grammar (after the sentinel):
///
///     routine: NAME
///     devices: CPU, GPU
///     argument: NAME
///       source: grid_data | scratch | external | tile_metadata
///       structure: center | flux_x | flux_y      (grid_data)
///       in: var, var, ...                        (grid_data)
///       out: var, ...                            (grid_data)
///       extents: expr, expr, ...                 (scratch)
///       lbound: expr, ...                        (scratch)
///       type: real | integer                     (external)
///       kind: lo | hi | deltas | dt | block_id   (tile_metadata)
///
/// Indented entries belong to the preceding `argument`.
std::vector<RoutineSpec> parse_annotations(std::string_view source_text, std::string_view comment_sentinel,
                                           std::string_view source_file = "");

/// Canonical JSON form: keys sorted, two-space indent, arguments keyed by name
/// plus an explicit `argument_order`.
std::string export_spec(const RoutineSpec& spec);
RoutineSpec import_spec(std::string_view document);

/// Sentinel conventionally used for a file extension ("!!" for Fortran,
/// "//!" for C-family sources).
std::string_view default_sentinel_for(std::string_view path);

}  // namespace orcha
