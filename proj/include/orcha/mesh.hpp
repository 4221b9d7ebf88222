#pragma once

#include "orcha/extent_expr.hpp"
#include "orcha/variables.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace orcha {

struct MeshShape {
    int nbx = 4, nby = 4;   // blocks per direction
    int nxb = 16, nyb = 16; // interior cells per block
    int h = 2;              // halo width
    double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;

    bool operator==(const MeshShape&) const = default;
};

/// Uniform block-structured mesh with periodic boundaries. Each block stores
/// every variable over its interior plus halo, variable-major:
/// value(v, i, j) lives at ((v * ny) + j + h) * nx + i + h with nx = nxb + 2h.
class BlockMesh {
public:
    BlockMesh() = default;
    explicit BlockMesh(const MeshShape& shape);

    const MeshShape& shape() const { return shape_; }
    int nblocks() const { return shape_.nbx * shape_.nby; }
    int nx() const { return shape_.nxb + 2 * shape_.h; }
    int ny() const { return shape_.nyb + 2 * shape_.h; }
    std::size_t var_stride() const { return static_cast<std::size_t>(nx()) * ny(); }
    std::size_t block_stride() const { return var_stride() * kNumVars; }
    MeshParams params() const { return {shape_.nxb, shape_.nyb, shape_.h, static_cast<std::int64_t>(kNumVars)}; }

    double* block(int b) { return data_.data() + static_cast<std::size_t>(b) * block_stride(); }
    const double* block(int b) const { return data_.data() + static_cast<std::size_t>(b) * block_stride(); }
    double* var(int b, std::size_t v) { return block(b) + v * var_stride(); }
    const double* var(int b, std::size_t v) const { return block(b) + v * var_stride(); }

    /// i, j are interior indices; halo cells are i < 0 or i >= nxb.
    double& at(int b, std::size_t v, int i, int j) {
        return var(b, v)[static_cast<std::size_t>(j + shape_.h) * nx() + i + shape_.h];
    }
    double at(int b, std::size_t v, int i, int j) const {
        return var(b, v)[static_cast<std::size_t>(j + shape_.h) * nx() + i + shape_.h];
    }

    std::array<int, 2> block_coords(int b) const { return {b % shape_.nbx, b / shape_.nbx}; }
    /// Global index of the first and last interior cell (0-based, inclusive).
    std::array<int, 2> lo(int b) const;
    std::array<int, 2> hi(int b) const;
    std::array<double, 2> deltas() const;
    /// Cell-center coordinate of global cell (gi, gj).
    std::array<double, 2> center(int gi, int gj) const;

    /// Copies neighbor interiors into every halo cell, corners included.
    void fill_halos();

    /// Per-variable FNV-1a (64-bit, hex) over the interior bytes of every
    /// block in block order.
    std::vector<std::string> checksums() const;

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool operator==(const BlockMesh&) const = default;

private:
    MeshShape shape_;
    std::vector<double> data_;
};

std::uint64_t fnv1a(const void* bytes, std::size_t n, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

/// Writes `<prefix>.bin` (raw little-endian doubles, block-major as stored)
/// and `<prefix>.json` (shape, variable order, checksums).
void dump_mesh(const BlockMesh& mesh, const std::filesystem::path& prefix);
BlockMesh load_mesh(const std::filesystem::path& prefix);

}  // namespace orcha
