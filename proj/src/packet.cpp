#include "orcha/packet.hpp"

#include "orcha/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstring>

namespace orcha {

using nlohmann::json;

std::string_view to_string(Section s) {
    switch (s) {
    case Section::CopyIn: return "copy_in";
    case Section::CopyInOut: return "copy_in_out";
    case Section::CopyOut: return "copy_out";
    case Section::ScratchDevice: return "scratch_device";
    }
    return "?";
}

namespace {

std::size_t align_up(std::size_t n) { return (n + kPacketAlignment - 1) / kPacketAlignment * kPacketAlignment; }

std::size_t meta_size(MetaKind k) {
    return (k == MetaKind::Lo || k == MetaKind::Hi || k == MetaKind::Deltas) ? 16 : 8;
}

std::vector<std::size_t> registry_order(const std::set<std::string>& names) {
    std::vector<std::size_t> out;
    for (const auto& n : names) {
        auto v = var_index(n);
        if (!v) throw Error(Errc::UnknownVariable, "variable '" + n + "' is not in the mesh registry");
        out.push_back(*v);
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

const LayoutEntry* PacketLayout::find(std::string_view id) const {
    for (const auto& e : entries)
        if (e.id == id) return &e;
    return nullptr;
}

bool PacketLayout::operator==(const PacketLayout& o) const {
    return render_layout(*this) == render_layout(o);
}

PacketLayout layout(const ConsolidatedArgSpec& spec, std::size_t n_blocks, const MeshParams& mesh) {
    if (n_blocks == 0) throw Error(Errc::BlockOutOfRange, "a packet holds at least one block");
    PacketLayout out;
    out.n_blocks = n_blocks;
    out.mesh = mesh;
    std::vector<LayoutEntry> by_section[4];
    auto put = [&](LayoutEntry e) { by_section[static_cast<int>(e.section)].push_back(std::move(e)); };

    for (const auto& x : spec.externals) {
        LayoutEntry e;
        e.id = e.entry = entry_name(x);
        e.source = LayoutEntry::Source::External;
        e.scalar = x.kind;
        e.size = 8;
        put(std::move(e));
    }
    for (auto k : spec.tile_metadata) {
        LayoutEntry e;
        e.id = e.entry = entry_name(k);
        e.source = LayoutEntry::Source::Metadata;
        e.meta = k;
        e.per_block = true;
        e.size = meta_size(k);
        put(std::move(e));
    }
    const auto cells = static_cast<std::size_t>((mesh.nxb + 2 * mesh.nguard) * (mesh.nyb + 2 * mesh.nguard));
    for (const auto& g : spec.grid_data) {
        if (g.variables_in.empty() && g.variables_out.empty())
            throw Error(Errc::ZeroVariables, entry_name(g) + " names no variables");
        if (g.structure != Structure::Center)
            throw Error(Errc::Unsupported, entry_name(g) + ": only cell-centered grid data can be packed");
        std::set<std::string> in_only, both, out_only;
        for (const auto& v : g.variables_in) (g.variables_out.count(v) ? both : in_only).insert(v);
        for (const auto& v : g.variables_out)
            if (!g.variables_in.count(v)) out_only.insert(v);
        const std::pair<const std::set<std::string>*, Section> parts[] = {
            {&in_only, Section::CopyIn}, {&both, Section::CopyInOut}, {&out_only, Section::CopyOut}};
        for (const auto& [vars, section] : parts) {
            if (vars->empty()) continue;
            LayoutEntry e;
            e.entry = entry_name(g);
            e.id = e.entry + ":" + std::string(section == Section::CopyIn      ? "in"
                                               : section == Section::CopyInOut ? "in_out"
                                                                               : "out");
            e.source = LayoutEntry::Source::Grid;
            e.section = section;
            e.per_block = true;
            e.vars = registry_order(*vars);
            e.size = cells * e.vars.size() * sizeof(double);
            put(std::move(e));
        }
    }
    for (const auto& s : spec.scratch) {
        LayoutEntry e;
        e.id = e.entry = entry_name(s);
        e.source = LayoutEntry::Source::Scratch;
        e.section = Section::ScratchDevice;
        e.per_block = true;
        std::size_t count = 1;
        for (const auto& ext : s.shape.extents) {
            auto n = evaluate_extent(ext, mesh);
            if (n <= 0) throw Error(Errc::ExpressionError, e.id + ": extent '" + ext + "' is not positive");
            count *= static_cast<std::size_t>(n);
        }
        e.size = count * sizeof(double);
        put(std::move(e));
    }

    std::size_t offset = 0;
    for (auto& section : by_section) {
        for (auto& e : section) {
            e.offset = offset;
            e.stride = align_up(e.size);
            offset = align_up(e.offset + e.stride * (e.copies(n_blocks) - 1) + e.size);
            const auto bytes = e.size * e.copies(n_blocks);
            if (e.section == Section::CopyIn || e.section == Section::CopyInOut) out.transfer_in += bytes;
            if (e.section == Section::CopyInOut || e.section == Section::CopyOut) out.transfer_out += bytes;
            out.entries.push_back(std::move(e));
        }
    }
    out.total = offset;
    return out;
}

std::string render_layout(const PacketLayout& l) {
    json doc;
    doc["n_blocks"] = l.n_blocks;
    doc["total_bytes"] = l.total;
    doc["transfer_in_bytes"] = l.transfer_in;
    doc["transfer_out_bytes"] = l.transfer_out;
    doc["mesh"] = {{"nxb", l.mesh.nxb}, {"nyb", l.mesh.nyb}, {"nguard", l.mesh.nguard}, {"nvars", l.mesh.nvars}};
    doc["entries"] = json::array();
    for (const auto& e : l.entries) {
        json j{{"id", e.id},
               {"section", std::string(to_string(e.section))},
               {"per_block", e.per_block},
               {"offset", e.offset},
               {"size", e.size},
               {"stride", e.stride}};
        if (!e.vars.empty()) {
            std::vector<std::string> names;
            for (auto v : e.vars) names.emplace_back(kVarNames[v]);
            j["variables"] = names;
        }
        doc["entries"].push_back(std::move(j));
    }
    return doc.dump(2) + "\n";
}

DataPacket pack(const PacketLayout& layout, const BlockMesh& mesh, const std::vector<int>& block_ids,
                const Externals& externals) {
    if (block_ids.size() != layout.n_blocks)
        throw Error(Errc::BlockOutOfRange, std::to_string(block_ids.size()) + " blocks for a layout of " +
                                               std::to_string(layout.n_blocks));
    for (int b : block_ids)
        if (b < 0 || b >= mesh.nblocks()) throw Error(Errc::BlockOutOfRange, "block " + std::to_string(b) + " not in mesh");
    const auto p = mesh.params();
    if (p.nxb != layout.mesh.nxb || p.nyb != layout.mesh.nyb || p.nguard != layout.mesh.nguard)
        throw Error(Errc::BlockOutOfRange, "layout was computed for a different block shape");

    DataPacket packet;
    packet.layout = layout;
    packet.block_ids = block_ids;
    packet.storage.assign(layout.total / sizeof(double), 0.0);
    auto external = [&](const std::string& name) {
        auto it = externals.find(name);
        if (it == externals.end()) throw Error(Errc::InvalidConfig, "no value for external '" + name + "'");
        return it->second;
    };

    for (const auto& e : layout.entries) {
        if (e.section == Section::CopyOut || e.section == Section::ScratchDevice) continue;
        for (std::size_t k = 0; k < e.copies(layout.n_blocks); ++k) {
            double* dst = packet.at(e, k);
            const int b = e.per_block ? block_ids[k] : -1;
            switch (e.source) {
            case LayoutEntry::Source::External: {
                const double v = external(e.entry);
                if (e.scalar == ScalarKind::Integer) {
                    const auto i = static_cast<std::int64_t>(v);
                    std::memcpy(dst, &i, 8);
                } else {
                    *dst = v;
                }
                break;
            }
            case LayoutEntry::Source::Metadata: {
                std::int64_t ints[2] = {0, 0};
                switch (e.meta) {
                case MetaKind::Lo: ints[0] = mesh.lo(b)[0], ints[1] = mesh.lo(b)[1]; break;
                case MetaKind::Hi: ints[0] = mesh.hi(b)[0], ints[1] = mesh.hi(b)[1]; break;
                case MetaKind::BlockId: ints[0] = b; break;
                case MetaKind::Deltas: dst[0] = mesh.deltas()[0], dst[1] = mesh.deltas()[1]; break;
                case MetaKind::Dt: dst[0] = external("dt"); break;
                }
                if (e.meta == MetaKind::Lo || e.meta == MetaKind::Hi) std::memcpy(dst, ints, 16);
                if (e.meta == MetaKind::BlockId) std::memcpy(dst, ints, 8);
                break;
            }
            case LayoutEntry::Source::Grid:
                for (std::size_t n = 0; n < e.vars.size(); ++n)
                    std::memcpy(dst + n * mesh.var_stride(), mesh.var(b, e.vars[n]), mesh.var_stride() * sizeof(double));
                break;
            case LayoutEntry::Source::Scratch: break;
            }
        }
    }
    return packet;
}

void unpack(const DataPacket& packet, BlockMesh& mesh) {
    const auto& l = packet.layout;
    for (const auto& e : l.entries) {
        if (e.source != LayoutEntry::Source::Grid) continue;
        if (e.section != Section::CopyInOut && e.section != Section::CopyOut) continue;
        for (std::size_t k = 0; k < l.n_blocks; ++k) {
            const int b = packet.block_ids.at(k);
            if (b < 0 || b >= mesh.nblocks()) throw Error(Errc::BlockOutOfRange, "block " + std::to_string(b) + " not in mesh");
            const double* src = packet.at(e, k);
            for (std::size_t n = 0; n < e.vars.size(); ++n) {
                const double* s = src + n * mesh.var_stride();
                double* d = mesh.var(b, e.vars[n]);
                if (e.section == Section::CopyInOut) {
                    std::memcpy(d, s, mesh.var_stride() * sizeof(double));
                    continue;
                }
                const int h = mesh.shape().h;
                for (int j = h; j < h + mesh.shape().nyb; ++j) {
                    const auto row = static_cast<std::size_t>(j) * mesh.nx() + h;
                    std::memcpy(d + row, s + row, static_cast<std::size_t>(mesh.shape().nxb) * sizeof(double));
                }
            }
        }
    }
}

TileWrapper wrap_tile(BlockMesh& mesh, int block, double dt) {
    if (block < 0 || block >= mesh.nblocks()) throw Error(Errc::BlockOutOfRange, "block " + std::to_string(block) + " not in mesh");
    return TileWrapper{&mesh, block, {0, 0}, {mesh.shape().nxb - 1, mesh.shape().nyb - 1}, mesh.deltas(), dt};
}

}  // namespace orcha
