#pragma once

#include "orcha/mesh.hpp"
#include "orcha/planner.hpp"

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace orcha {

enum class Section { CopyIn, CopyInOut, CopyOut, ScratchDevice };
std::string_view to_string(Section s);

inline constexpr std::size_t kPacketAlignment = 64;

struct LayoutEntry {
    enum class Source { External, Metadata, Grid, Scratch };

    std::string id;       // "dt", "tile_lo", "grid_center:in_out", "scratch_flx"
    std::string entry;    // consolidated entry name it realizes
    Source source = Source::External;
    Section section = Section::CopyIn;
    bool per_block = false;
    std::size_t offset = 0;  // bytes
    std::size_t size = 0;    // bytes per copy
    std::size_t stride = 0;  // bytes between per-block copies
    std::vector<std::size_t> vars;  // grid entries, registry order
    MetaKind meta = MetaKind::Lo;
    ScalarKind scalar = ScalarKind::Real;

    std::size_t copies(std::size_t n_blocks) const { return per_block ? n_blocks : 1; }
    std::size_t offset_of(std::size_t k) const { return offset + (per_block ? k * stride : 0); }
};

/// Flattened multi-block buffer layout. Sections appear in the order
/// copy_in, copy_in_out, copy_out, scratch_device; every entry is 64-byte
/// aligned and per-block entries repeat n_blocks times back to back.
struct PacketLayout {
    std::vector<LayoutEntry> entries;
    std::size_t n_blocks = 0;
    std::size_t total = 0;
    std::size_t transfer_in = 0;
    std::size_t transfer_out = 0;
    MeshParams mesh;

    const LayoutEntry* find(std::string_view id) const;
    bool operator==(const PacketLayout& o) const;
};

/// Throws ZeroVariables for a grid entry without variables, BlockOutOfRange
/// for n_blocks == 0 and ExpressionError / Unsupported for bad scratch extents.
PacketLayout layout(const ConsolidatedArgSpec& spec, std::size_t n_blocks, const MeshParams& mesh);

std::string render_layout(const PacketLayout& layout);

using Externals = std::map<std::string, double, std::less<>>;

struct DataPacket {
    PacketLayout layout;
    std::vector<double> storage;  // total / 8 doubles; keeps the base 8-byte aligned
    std::vector<int> block_ids;

    std::byte* bytes() { return reinterpret_cast<std::byte*>(storage.data()); }
    const std::byte* bytes() const { return reinterpret_cast<const std::byte*>(storage.data()); }
    double* at(const LayoutEntry& e, std::size_t k) { return reinterpret_cast<double*>(bytes() + e.offset_of(k)); }
    const double* at(const LayoutEntry& e, std::size_t k) const {
        return reinterpret_cast<const double*>(bytes() + e.offset_of(k));
    }
};

/// Fills copy_in and copy_in_out regions from the mesh and externals; the
/// rest of the buffer is zero. Throws BlockOutOfRange when block_ids does not
/// match the layout or names a block the mesh lacks.
DataPacket pack(const PacketLayout& layout, const BlockMesh& mesh, const std::vector<int>& block_ids,
                const Externals& externals);

/// Writes copy_in_out regions (halo included) and the interior of copy_out
/// regions back to the mesh.
void unpack(const DataPacket& packet, BlockMesh& mesh);

/// In-place view of one block of the mesh for host execution.
struct TileWrapper {
    BlockMesh* mesh = nullptr;
    int block = 0;
    std::array<int, 2> lo{}, hi{};  // interior subrange, block-local
    std::array<double, 2> deltas{};
    double dt = 0.0;
};

TileWrapper wrap_tile(BlockMesh& mesh, int block, double dt);

}  // namespace orcha
