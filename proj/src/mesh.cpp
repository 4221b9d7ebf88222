#include "orcha/mesh.hpp"

#include "orcha/error.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>

namespace orcha {

using nlohmann::json;

BlockMesh::BlockMesh(const MeshShape& shape) : shape_(shape) {
    if (shape.nbx < 1 || shape.nby < 1 || shape.nxb < 1 || shape.nyb < 1 || shape.h < 0)
        throw Error(Errc::InvalidConfig, "mesh extents must be positive");
    if (shape.h > shape.nxb || shape.h > shape.nyb)
        throw Error(Errc::InvalidConfig, "halo wider than a block");
    if (!(shape.xmax > shape.xmin) || !(shape.ymax > shape.ymin))
        throw Error(Errc::InvalidConfig, "empty mesh domain");
    data_.assign(block_stride() * static_cast<std::size_t>(nblocks()), 0.0);
}

std::array<int, 2> BlockMesh::lo(int b) const {
    auto [bi, bj] = block_coords(b);
    return {bi * shape_.nxb, bj * shape_.nyb};
}

std::array<int, 2> BlockMesh::hi(int b) const {
    auto [x, y] = lo(b);
    return {x + shape_.nxb - 1, y + shape_.nyb - 1};
}

std::array<double, 2> BlockMesh::deltas() const {
    return {(shape_.xmax - shape_.xmin) / (shape_.nbx * shape_.nxb),
            (shape_.ymax - shape_.ymin) / (shape_.nby * shape_.nyb)};
}

std::array<double, 2> BlockMesh::center(int gi, int gj) const {
    auto [dx, dy] = deltas();
    return {shape_.xmin + (gi + 0.5) * dx, shape_.ymin + (gj + 0.5) * dy};
}

void BlockMesh::fill_halos() {
    const int h = shape_.h;
    if (h == 0) return;
    const int gnx = shape_.nbx * shape_.nxb, gny = shape_.nby * shape_.nyb;
    for (int b = 0; b < nblocks(); ++b) {
        auto [x0, y0] = lo(b);
        for (int j = -h; j < shape_.nyb + h; ++j) {
            for (int i = -h; i < shape_.nxb + h; ++i) {
                if (i >= 0 && i < shape_.nxb && j >= 0 && j < shape_.nyb) continue;
                const int gi = ((x0 + i) % gnx + gnx) % gnx;
                const int gj = ((y0 + j) % gny + gny) % gny;
                const int src = (gj / shape_.nyb) * shape_.nbx + gi / shape_.nxb;
                const int si = gi % shape_.nxb, sj = gj % shape_.nyb;
                for (std::size_t v = 0; v < kNumVars; ++v) at(b, v, i, j) = at(src, v, si, sj);
            }
        }
    }
}

std::uint64_t fnv1a(const void* bytes, std::size_t n, std::uint64_t seed) {
    auto p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
        seed ^= p[i];
        seed *= 0x100000001b3ULL;
    }
    return seed;
}

std::string hex64(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    return out;
}

std::vector<std::string> BlockMesh::checksums() const {
    std::vector<std::string> out;
    for (std::size_t v = 0; v < kNumVars; ++v) {
        std::uint64_t hash = 0xcbf29ce484222325ULL;
        for (int b = 0; b < nblocks(); ++b)
            for (int j = 0; j < shape_.nyb; ++j) {
                const double* row = var(b, v) + static_cast<std::size_t>(j + shape_.h) * nx() + shape_.h;
                hash = fnv1a(row, sizeof(double) * static_cast<std::size_t>(shape_.nxb), hash);
            }
        out.push_back(hex64(hash));
    }
    return out;
}

void dump_mesh(const BlockMesh& mesh, const std::filesystem::path& prefix) {
    static_assert(std::endian::native == std::endian::little, "dump format is little-endian");
    auto bin = prefix;
    bin += ".bin";
    auto meta = prefix;
    meta += ".json";
    std::error_code ec;
    if (prefix.has_parent_path()) std::filesystem::create_directories(prefix.parent_path(), ec);
    std::ofstream out(bin, std::ios::binary);
    if (!out) throw Error(Errc::IoError, "cannot write '" + bin.string() + "'");
    out.write(reinterpret_cast<const char*>(mesh.data().data()),
              static_cast<std::streamsize>(mesh.data().size() * sizeof(double)));

    const auto& s = mesh.shape();
    json doc;
    doc["nbx"] = s.nbx;
    doc["nby"] = s.nby;
    doc["nxb"] = s.nxb;
    doc["nyb"] = s.nyb;
    doc["h"] = s.h;
    doc["domain"] = {s.xmin, s.xmax, s.ymin, s.ymax};
    doc["variables"] = std::vector<std::string>(kVarNames.begin(), kVarNames.end());
    doc["order"] = "block, variable, j, i (halo included)";
    doc["checksums"] = mesh.checksums();
    std::ofstream(meta) << doc.dump(2) << "\n";
}

BlockMesh load_mesh(const std::filesystem::path& prefix) {
    auto bin = prefix;
    bin += ".bin";
    auto meta = prefix;
    meta += ".json";
    std::ifstream meta_in(meta);
    if (!meta_in) throw Error(Errc::IoError, "cannot read '" + meta.string() + "'");
    json doc;
    try {
        doc = json::parse(meta_in);
    } catch (const json::exception& e) {
        throw Error(Errc::ParseError, meta.string() + ": " + e.what());
    }
    MeshShape s;
    s.nbx = doc.at("nbx");
    s.nby = doc.at("nby");
    s.nxb = doc.at("nxb");
    s.nyb = doc.at("nyb");
    s.h = doc.at("h");
    auto d = doc.at("domain").get<std::vector<double>>();
    s.xmin = d.at(0), s.xmax = d.at(1), s.ymin = d.at(2), s.ymax = d.at(3);
    BlockMesh mesh(s);
    std::ifstream in(bin, std::ios::binary);
    if (!in) throw Error(Errc::IoError, "cannot read '" + bin.string() + "'");
    in.read(reinterpret_cast<char*>(mesh.data().data()),
            static_cast<std::streamsize>(mesh.data().size() * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(mesh.data().size() * sizeof(double)))
        throw Error(Errc::IoError, "'" + bin.string() + "' is shorter than its sidecar says");
    return mesh;
}

}  // namespace orcha
