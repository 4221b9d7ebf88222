#include "orcha/kernels.hpp"

#include "orcha/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace orcha {

namespace embedded {
std::string_view physics_annotations();
}

double* TileView::need(std::size_t v) const {
    if (!vars[v])
        throw Error(Errc::KernelPanic, "block " + std::to_string(block_id) + ": variable '" +
                                           std::string(kVarNames[v]) + "' not in data item");
    return vars[v];
}

double* TileView::need_scratch(std::string_view name, std::size_t min_size) const {
    for (std::size_t i = 0; i < n_scratch; ++i) {
        if (scratch[i].name != name) continue;
        if (scratch[i].size < min_size)
            throw Error(Errc::KernelPanic, "block " + std::to_string(block_id) + ": scratch '" + std::string(name) +
                                               "' holds " + std::to_string(scratch[i].size) + " values, needs " +
                                               std::to_string(min_size));
        return scratch[i].data;
    }
    throw Error(Errc::KernelPanic, "block " + std::to_string(block_id) + ": scratch '" + std::string(name) + "' missing");
}

void KernelRegistry::add(std::string name, Kernel kernel) { kernels_[std::move(name)] = std::move(kernel); }
void KernelRegistry::add_merge(std::string name, MergeFn fn) { merges_[std::move(name)] = fn; }

const Kernel& KernelRegistry::get(std::string_view name) const {
    auto it = kernels_.find(name);
    if (it == kernels_.end()) throw Error(Errc::MissingKernel, "no kernel registered as '" + std::string(name) + "'");
    return it->second;
}

MergeFn KernelRegistry::merge(std::string_view name) const {
    auto it = merges_.find(name);
    if (it == merges_.end()) throw Error(Errc::MissingKernel, "no merge kernel registered as '" + std::string(name) + "'");
    return it->second;
}

std::vector<RoutineSpec> builtin_specs() {
    return parse_annotations(embedded::physics_annotations(), "!!", "physics.F90");
}

namespace {

template <KernelFn F, int Variant>
void variant(const TileView& t, const PhysicsParams& p) {
    F(t, p);
}

}  // namespace

const KernelRegistry& KernelRegistry::builtin() {
    static const KernelRegistry registry = [] {
        KernelRegistry r;
        SpecTable specs;
        for (auto& s : builtin_specs()) specs.emplace(s.name, std::move(s));
        r.add("Hydro_advance", {variant<hydro_advance, 0>, variant<hydro_advance, 1>, specs.at("Hydro_advance")});
        r.add("Eos_gamma", {variant<eos_gamma, 0>, variant<eos_gamma, 1>, specs.at("Eos_gamma")});
        r.add("Eos_expensive", {variant<eos_expensive, 0>, variant<eos_expensive, 1>, specs.at("Eos_expensive")});
        r.add("Burn_advance", {burn_advance, nullptr, specs.at("Burn_advance")});
        r.add_merge("merge_hydro_burn", merge_hydro_burn);
        return r;
    }();
    return registry;
}

void ScratchArena::prepare(const ConsolidatedArgSpec& spec, const MeshParams& mesh) {
    std::vector<std::string> names;
    std::vector<std::size_t> sizes;
    for (const auto& s : spec.scratch) {
        std::size_t n = 1;
        for (const auto& e : s.shape.extents) n *= static_cast<std::size_t>(std::max<std::int64_t>(evaluate_extent(e, mesh), 0));
        names.push_back(s.name);
        sizes.push_back(n);
    }
    if (names.size() > TileView{}.scratch.size()) throw Error(Errc::Unsupported, "too many scratch entries");
    bool same = names == names_;
    for (std::size_t i = 0; same && i < sizes.size(); ++i) same = buffers_[i].size() == sizes[i];
    if (same) return;
    names_ = std::move(names);
    buffers_.clear();
    for (auto n : sizes) buffers_.emplace_back(n, 0.0);
}

TileView view_of(BlockMesh& mesh, int block, double dt, ScratchArena& arena) {
    TileView t;
    for (std::size_t v = 0; v < kNumVars; ++v) t.vars[v] = mesh.var(block, v);
    t.nxb = mesh.shape().nxb;
    t.nyb = mesh.shape().nyb;
    t.h = mesh.shape().h;
    t.lo = mesh.lo(block);
    t.hi = mesh.hi(block);
    t.deltas = mesh.deltas();
    t.dt = dt;
    t.block_id = block;
    for (std::size_t i = 0; i < arena.buffers_.size(); ++i)
        t.scratch[i] = {arena.names_[i], arena.buffers_[i].data(), arena.buffers_[i].size()};
    t.n_scratch = arena.buffers_.size();
    return t;
}

TileView view_of(DataPacket& packet, std::size_t k) {
    const auto& l = packet.layout;
    TileView t;
    t.nxb = static_cast<int>(l.mesh.nxb);
    t.nyb = static_cast<int>(l.mesh.nyb);
    t.h = static_cast<int>(l.mesh.nguard);
    t.block_id = packet.block_ids.at(k);
    for (const auto& e : l.entries) {
        double* p = packet.at(e, k);
        switch (e.source) {
        case LayoutEntry::Source::Grid:
            for (std::size_t n = 0; n < e.vars.size(); ++n) t.vars[e.vars[n]] = p + n * t.plane();
            break;
        case LayoutEntry::Source::Scratch:
            if (t.n_scratch == t.scratch.size()) throw Error(Errc::Unsupported, "too many scratch entries");
            t.scratch[t.n_scratch++] = {std::string_view(e.entry).substr(8), p, e.size / sizeof(double)};
            break;
        case LayoutEntry::Source::External:
            if (e.entry == "dt") t.dt = *p;
            break;
        case LayoutEntry::Source::Metadata: {
            std::int64_t ints[2];
            std::memcpy(ints, p, 16 <= e.size ? 16 : 8);
            switch (e.meta) {
            case MetaKind::Lo: t.lo = {static_cast<int>(ints[0]), static_cast<int>(ints[1])}; break;
            case MetaKind::Hi: t.hi = {static_cast<int>(ints[0]), static_cast<int>(ints[1])}; break;
            case MetaKind::Deltas: t.deltas = {p[0], p[1]}; break;
            case MetaKind::Dt: t.dt = p[0]; break;
            case MetaKind::BlockId: break;
            }
            break;
        }
        }
    }
    return t;
}

namespace {

constexpr std::size_t kAdvected[5] = {kDens, kEner, kS1, kS2, kS3};

double face_flux(double ql, double qr, double ul, double ur, double diffusion, double dx) {
    const double uf = 0.5 * (ul + ur);
    const double adv = uf >= 0.0 ? uf * ql : uf * qr;
    return adv - diffusion * (qr - ql) / dx;
}

/// One explicit stage over cells [-ext, n + ext) of every advected variable.
/// q[k], q0[k], out[k] are planes laid out like `g`.
void stage_region(const TileView& g, const std::array<const double*, 5>& q, const double* u, const double* v,
                  const std::array<const double*, 5>* q0, const std::array<double*, 5>& out, int ext, double* flx,
                  double* fly, const PhysicsParams& p) {
    const int i0 = -ext, i1 = g.nxb + ext, j0 = -ext, j1 = g.nyb + ext;
    const auto cw = static_cast<std::size_t>(i1 - i0), ch = static_cast<std::size_t>(j1 - j0);
    const double dx = g.deltas[0], dy = g.deltas[1], dt = g.dt;
    for (std::size_t k = 0; k < 5; ++k) {
        double* fx = flx + k * (cw + 1) * ch;
        double* fy = fly + k * cw * (ch + 1);
        for (int j = j0; j < j1; ++j)
            for (int i = i0; i <= i1; ++i) {
                const auto l = g.index(i - 1, j), r = g.index(i, j);
                fx[static_cast<std::size_t>(j - j0) * (cw + 1) + static_cast<std::size_t>(i - i0)] =
                    face_flux(q[k][l], q[k][r], u[l], u[r], p.diffusion, dx);
            }
        for (int j = j0; j <= j1; ++j)
            for (int i = i0; i < i1; ++i) {
                const auto b = g.index(i, j - 1), t = g.index(i, j);
                fy[static_cast<std::size_t>(j - j0) * cw + static_cast<std::size_t>(i - i0)] =
                    face_flux(q[k][b], q[k][t], v[b], v[t], p.diffusion, dy);
            }
        for (int j = j0; j < j1; ++j)
            for (int i = i0; i < i1; ++i) {
                const auto c = g.index(i, j);
                const auto xi = static_cast<std::size_t>(j - j0) * (cw + 1) + static_cast<std::size_t>(i - i0);
                const auto yi = static_cast<std::size_t>(j - j0) * cw + static_cast<std::size_t>(i - i0);
                const double w = q[k][c] - dt / dx * (fx[xi + 1] - fx[xi]) - dt / dy * (fy[yi + cw] - fy[yi]);
                out[k][c] = q0 ? 0.5 * (*q0)[k][c] + 0.5 * w : w;
            }
    }
}

std::size_t flux_x_size(const TileView& t, int ext) {
    return static_cast<std::size_t>(t.nxb + 2 * ext + 1) * static_cast<std::size_t>(t.nyb + 2 * ext) * 5;
}
std::size_t flux_y_size(const TileView& t, int ext) {
    return static_cast<std::size_t>(t.nxb + 2 * ext) * static_cast<std::size_t>(t.nyb + 2 * ext + 1) * 5;
}

std::array<const double*, 5> advected(const TileView& t) {
    std::array<const double*, 5> q{};
    for (std::size_t k = 0; k < 5; ++k) q[k] = t.need(kAdvected[k]);
    return q;
}

std::array<double*, 5> advected_out(const TileView& t) {
    std::array<double*, 5> q{};
    for (std::size_t k = 0; k < 5; ++k) q[k] = t.need(kAdvected[k]);
    return q;
}

void check_state(const TileView& t, double dens, double ener, int i, int j) {
    if (!(dens > 0.0) || !(ener > 0.0))
        throw Error(Errc::NonPositiveState, "block " + std::to_string(t.block_id) + " cell (" + std::to_string(i) +
                                                "," + std::to_string(j) + "): dens=" + std::to_string(dens) +
                                                " ener=" + std::to_string(ener));
}

}  // namespace

void hydro_advance(const TileView& t, const PhysicsParams& p) {
    if (t.h < 2)
        throw Error(Errc::HaloTooThin, "block " + std::to_string(t.block_id) + ": Hydro_advance needs a halo of 2, got " +
                                           std::to_string(t.h));
    double* flx = t.need_scratch("flx", flux_x_size(t, 1));
    double* fly = t.need_scratch("fly", flux_y_size(t, 1));
    double* stage = t.need_scratch("ustage", 5 * t.plane());
    const double* u = t.need(kVelx);
    const double* v = t.need(kVely);

    const auto q = advected(t);
    std::array<double*, 5> q1{};
    for (std::size_t k = 0; k < 5; ++k) q1[k] = stage + k * t.plane();
    // stage one over the interior plus one ring, so stage two needs no refill
    stage_region(t, q, u, v, nullptr, q1, 1, flx, fly, p);
    const std::array<const double*, 5> q1c{q1[0], q1[1], q1[2], q1[3], q1[4]};
    stage_region(t, q1c, u, v, &q, advected_out(t), 0, flx, fly, p);
}

void hydro_stage(const TileView& q, const TileView* q0, const TileView& out, double* flx, double* fly,
                 const PhysicsParams& p) {
    const auto q0_planes = q0 ? advected(*q0) : std::array<const double*, 5>{};
    stage_region(q, advected(q), q.need(kVelx), q.need(kVely), q0 ? &q0_planes : nullptr, advected_out(out), 0, flx,
                 fly, p);
}

void eos_gamma(const TileView& t, const PhysicsParams& p) {
    const double* dens = t.need(kDens);
    const double* ener = t.need(kEner);
    double* pres = t.need(kPres);
    double* temp = t.need(kTemp);
    for (int j = 0; j < t.nyb; ++j)
        for (int i = 0; i < t.nxb; ++i) {
            const auto c = t.index(i, j);
            check_state(t, dens[c], ener[c], i, j);
            pres[c] = (p.gamma - 1.0) * dens[c] * ener[c];
            temp[c] = ener[c] / p.cv;
        }
}

double solve_temperature(double dens, double eint, const PhysicsParams& p) {
    const double scale = eint * dens;
    // f is convex and increasing for T > 0 and f(eint / b) >= 0, so Newton
    // from that upper bound decreases monotonically onto the root.
    double temp = eint / p.eos_b;
    for (int it = 0; it < 50; ++it) {
        const double t3 = temp * temp * temp;
        const double f = p.eos_a * t3 * temp + p.eos_b * dens * temp - scale;
        if (std::abs(f) <= 1e-12 * scale) return temp;
        const double df = 4.0 * p.eos_a * t3 + p.eos_b * dens;
        const double next = temp - f / df;
        if (next == temp) return temp;
        temp = next;
    }
    throw Error(Errc::NewtonNoConvergence,
                "temperature solve did not converge for dens=" + std::to_string(dens) + " eint=" + std::to_string(eint));
}

void eos_expensive(const TileView& t, const PhysicsParams& p) {
    const double* dens = t.need(kDens);
    const double* ener = t.need(kEner);
    double* pres = t.need(kPres);
    double* temp = t.need(kTemp);
    for (int j = 0; j < t.nyb; ++j)
        for (int i = 0; i < t.nxb; ++i) {
            const auto c = t.index(i, j);
            check_state(t, dens[c], ener[c], i, j);
            double tk = 0.0;
            for (int w = 0; w < std::max(p.eos_work, 1); ++w) tk = solve_temperature(dens[c], ener[c], p);
            temp[c] = tk;
            pres[c] = (p.gamma - 1.0) * dens[c] * p.eos_b * tk + p.eos_a * tk * tk * tk * tk / 3.0;
        }
}

void burn_advance(const TileView& t, const PhysicsParams& p) {
    const double* temp = t.need(kTemp);
    double* ener = t.need(kEner);
    double* s1 = t.need(kS1);
    double* s2 = t.need(kS2);
    double* s3 = t.need(kS3);
    for (int j = 0; j < t.nyb; ++j)
        for (int i = 0; i < t.nxb; ++i) {
            const auto c = t.index(i, j);
            const double rate = temp[c] > 0.0 ? p.burn_a * std::exp(-p.burn_ta / temp[c]) : 0.0;
            const double kdt = rate * t.dt;
            if (kdt == 0.0) continue;
            // implicit Euler on s1 -> s2 -> s3, solved in closed form
            const double a = s1[c] / (1.0 + kdt);
            const double b = (s2[c] + kdt * a) / (1.0 + kdt);
            const double d = s3[c] + kdt * b;
            const double sum = a + b + d;
            const double n3 = d / sum;
            ener[c] += p.burn_q * (n3 - s3[c]);
            s1[c] = a / sum;
            s2[c] = b / sum;
            s3[c] = n3;
        }
}

void merge_hydro_burn(const TileView& hydro, const TileView& burn, const TileView& out, const PhysicsParams& p) {
    for (int j = 0; j < out.nyb; ++j)
        for (int i = 0; i < out.nxb; ++i) {
            const auto c = out.index(i, j);
            // additive splitting: hydro result plus the burn increment
            const double release = p.burn_q * (burn.need(kS3)[c] - out.need(kS3)[c]);
            std::array<double, 3> dspecies{};
            for (std::size_t k = 0; k < 3; ++k) dspecies[k] = burn.need(kS1 + k)[c] - out.need(kS1 + k)[c];
            for (std::size_t v = 0; v < kNumVars; ++v) out.need(v)[c] = hydro.need(v)[c];
            for (std::size_t k = 0; k < 3; ++k) out.need(kS1 + k)[c] += dspecies[k];
            out.need(kEner)[c] += release;
        }
}

void hydro_refill_step(BlockMesh& mesh, double dt, const PhysicsParams& p) {
    mesh.fill_halos();
    BlockMesh stage = mesh;
    ScratchArena none;
    const auto& s = mesh.shape();
    std::vector<double> flx(static_cast<std::size_t>(s.nxb + 1) * s.nyb * 5);
    std::vector<double> fly(static_cast<std::size_t>(s.nxb) * (s.nyb + 1) * 5);
    for (int b = 0; b < mesh.nblocks(); ++b)
        hydro_stage(view_of(mesh, b, dt, none), nullptr, view_of(stage, b, dt, none), flx.data(), fly.data(), p);
    stage.fill_halos();
    for (int b = 0; b < mesh.nblocks(); ++b) {
        const auto q0 = view_of(mesh, b, dt, none);
        hydro_stage(view_of(stage, b, dt, none), &q0, q0, flx.data(), fly.data(), p);
    }
}

void apply_host(BlockMesh& mesh, const std::vector<std::string>& routines, double dt, const PhysicsParams& p,
                const KernelRegistry& registry) {
    std::vector<RoutineSpec> specs;
    for (const auto& r : routines) specs.push_back(registry.get(r).spec);
    ScratchArena arena;
    if (!specs.empty()) arena.prepare(consolidate(specs), mesh.params());
    mesh.fill_halos();
    for (int b = 0; b < mesh.nblocks(); ++b) {
        const auto view = view_of(mesh, b, dt, arena);
        for (const auto& r : routines) registry.get(r).host(view, p);
    }
}

void init_sedov(BlockMesh& mesh, const SedovConfig& cfg, const PhysicsParams& p) {
    const auto& s = mesh.shape();
    const int gnx = s.nbx * s.nxb, gny = s.nby * s.nyb;
    for (int b = 0; b < mesh.nblocks(); ++b) {
        const auto lo = mesh.lo(b);
        for (int j = 0; j < s.nyb; ++j)
            for (int i = 0; i < s.nxb; ++i) {
                const int gi = lo[0] + i, gj = lo[1] + j;
                const bool center = (gi == (gnx - 1) / 2 || gi == gnx / 2) && (gj == (gny - 1) / 2 || gj == gny / 2);
                const double ener = center ? cfg.ener * cfg.spike_ratio : cfg.ener;
                mesh.at(b, kDens, i, j) = cfg.dens;
                mesh.at(b, kVelx, i, j) = cfg.velx;
                mesh.at(b, kVely, i, j) = cfg.vely;
                mesh.at(b, kEner, i, j) = ener;
                mesh.at(b, kPres, i, j) = (p.gamma - 1.0) * cfg.dens * ener;
                mesh.at(b, kTemp, i, j) = ener / p.cv;
                mesh.at(b, kS1, i, j) = 1.0;
                mesh.at(b, kS2, i, j) = 0.0;
                mesh.at(b, kS3, i, j) = 0.0;
            }
    }
    mesh.fill_halos();
}

void init_cellular(BlockMesh& mesh, const CellularConfig& cfg, const PhysicsParams& p) {
    const auto& s = mesh.shape();
    for (int b = 0; b < mesh.nblocks(); ++b) {
        const auto lo = mesh.lo(b);
        for (int j = 0; j < s.nyb; ++j)
            for (int i = 0; i < s.nxb; ++i) {
                const bool hot = lo[0] + i < cfg.strip_cells;
                const double dens = hot ? cfg.dens_hot : cfg.dens0;
                const double temp = hot ? cfg.temp_hot : cfg.temp0;
                const double t4 = temp * temp * temp * temp;
                mesh.at(b, kDens, i, j) = dens;
                mesh.at(b, kVelx, i, j) = hot ? cfg.velx_hot : 0.0;
                mesh.at(b, kVely, i, j) = 0.0;
                mesh.at(b, kEner, i, j) = p.eos_b * temp + p.eos_a * t4 / dens;
                mesh.at(b, kTemp, i, j) = temp;
                mesh.at(b, kPres, i, j) = (p.gamma - 1.0) * dens * p.eos_b * temp + p.eos_a * t4 / 3.0;
                mesh.at(b, kS1, i, j) = cfg.s1;
                mesh.at(b, kS2, i, j) = 0.0;
                mesh.at(b, kS3, i, j) = 0.0;
            }
    }
    mesh.fill_halos();
}

}  // namespace orcha
