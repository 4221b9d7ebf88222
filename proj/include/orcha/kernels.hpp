#pragma once

#include "orcha/annotation.hpp"
#include "orcha/mesh.hpp"
#include "orcha/packet.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace orcha {

struct PhysicsParams {
    double gamma = 1.4;
    double cv = 1.0;
    double eos_a = 1e-22;  // radiation-like T^4 coefficient
    double eos_b = 1.0;    // ideal-gas coefficient
    int eos_work = 1;      // repeats of the expensive solve
    double burn_a = 1e9;   // rate prefactor
    double burn_ta = 1e10; // activation temperature
    double burn_q = 1e9;   // energy released per unit s3 produced
    double diffusion = 1e-3;

    bool operator==(const PhysicsParams&) const = default;
};

/// What a kernel sees of one block: variable planes over interior + halo
/// (nullptr when the data item does not carry the variable), scratch
/// buffers and tile metadata. Views never own memory.
struct TileView {
    struct ScratchSlot {
        std::string_view name;
        double* data = nullptr;
        std::size_t size = 0;
    };

    std::array<double*, kNumVars> vars{};
    int nxb = 0, nyb = 0, h = 0;
    std::array<int, 2> lo{}, hi{};  // global interior index range
    std::array<double, 2> deltas{};
    double dt = 0.0;
    std::int64_t block_id = 0;
    std::array<ScratchSlot, 8> scratch{};
    std::size_t n_scratch = 0;

    int nx() const { return nxb + 2 * h; }
    int ny() const { return nyb + 2 * h; }
    std::size_t plane() const { return static_cast<std::size_t>(nx()) * ny(); }
    std::size_t index(int i, int j) const { return static_cast<std::size_t>(j + h) * nx() + i + h; }
    /// Throws KernelPanic when the data item lacks `v`.
    double* need(std::size_t v) const;
    /// Throws KernelPanic when absent or smaller than `min_size` doubles.
    double* need_scratch(std::string_view name, std::size_t min_size) const;
};

using KernelFn = void (*)(const TileView&, const PhysicsParams&);

struct Kernel {
    KernelFn host = nullptr;
    KernelFn device = nullptr;  // same arithmetic, run by device-proxy workers
    RoutineSpec spec;
};

/// Merge kernel for parallel branches. `out` holds the step-start state of
/// the block on entry and the merged state on return.
using MergeFn = void (*)(const TileView& hydro, const TileView& burn, const TileView& out, const PhysicsParams&);

class KernelRegistry {
public:
    void add(std::string name, Kernel kernel);
    void add_merge(std::string name, MergeFn fn);
    const Kernel& get(std::string_view name) const;  // MissingKernel
    MergeFn merge(std::string_view name) const;      // MissingKernel
    bool contains(std::string_view name) const { return kernels_.count(std::string(name)) != 0; }
    const std::map<std::string, Kernel, std::less<>>& kernels() const { return kernels_; }

    /// Hydro_advance, Eos_gamma, Eos_expensive, Burn_advance and the
    /// merge_hydro_burn merge kernel, with specs from the bundled annotations.
    static const KernelRegistry& builtin();

private:
    std::map<std::string, Kernel, std::less<>> kernels_;
    std::map<std::string, MergeFn, std::less<>> merges_;
};

/// Routine specs of the bundled physics annotations.
std::vector<RoutineSpec> builtin_specs();

/// Per-worker scratch storage, sized once per consolidated spec so that
/// kernels never allocate.
class ScratchArena {
public:
    void prepare(const ConsolidatedArgSpec& spec, const MeshParams& mesh);
    std::size_t size() const { return buffers_.size(); }

    friend TileView view_of(BlockMesh& mesh, int block, double dt, ScratchArena& arena);

private:
    std::vector<std::string> names_;
    std::vector<std::vector<double>> buffers_;
};

/// Host view of one mesh block; every variable is visible.
TileView view_of(BlockMesh& mesh, int block, double dt, ScratchArena& arena);
/// View of block `k` of a packet; only packed variables are visible.
TileView view_of(DataPacket& packet, std::size_t k);

// Surrogate physics. All update interior cells only.

/// RK2 (Heun) upwind advection plus diffusion of dens, ener, s1..s3 by the
/// fixed cell velocities. Stage one covers the interior and one halo ring, so
/// no halo refill is needed between stages; throws HaloTooThin for h < 2.
void hydro_advance(const TileView& t, const PhysicsParams& p);
/// Single stage over the interior: out = q + dt L(q) when `q0` is null, else
/// out = q0/2 + (q + dt L(q))/2. Reference pieces for the refill variant.
void hydro_stage(const TileView& q, const TileView* q0, const TileView& out, double* flx, double* fly,
                 const PhysicsParams& p);
void eos_gamma(const TileView& t, const PhysicsParams& p);
void eos_expensive(const TileView& t, const PhysicsParams& p);
void burn_advance(const TileView& t, const PhysicsParams& p);
/// Hydro branch state plus the species and energy increments of the burn
/// branch, both measured from the step-start state in `out`.
void merge_hydro_burn(const TileView& hydro, const TileView& burn, const TileView& out, const PhysicsParams& p);

/// Temperature solving a T^4 + b dens T = eint dens; throws
/// NewtonNoConvergence after 50 iterations.
double solve_temperature(double dens, double eint, const PhysicsParams& p);

/// Host-side driver for one step of the refill reference: stage one over
/// every block interior, halo refill, stage two.
void hydro_refill_step(BlockMesh& mesh, double dt, const PhysicsParams& p);

/// Runs `routines` back to back on every block with host kernels, single
/// threaded, after filling halos.
void apply_host(BlockMesh& mesh, const std::vector<std::string>& routines, double dt, const PhysicsParams& p,
                const KernelRegistry& registry = KernelRegistry::builtin());

struct SedovConfig {
    double dens = 1.0;
    double ener = 1.0;
    double spike_ratio = 1e4;
    double velx = 1.0, vely = 0.5;
};

struct CellularConfig {
    double dens0 = 1e7;
    double temp0 = 2e8;
    double s1 = 1.0;
    double dens_hot = 4.236e7;
    double temp_hot = 4.423e9;
    double velx_hot = 2.876e8;
    int strip_cells = 4;
};

/// Uniform density and energy with ener * spike_ratio in the (up to) 2x2
/// cells around the domain center; pres/temp from the gamma law.
void init_sedov(BlockMesh& mesh, const SedovConfig& cfg, const PhysicsParams& p);
/// Cold fuel with a hot, fast strip in the first `strip_cells` columns.
/// ener = b T + a T^4 / dens, consistent with the expensive EOS.
void init_cellular(BlockMesh& mesh, const CellularConfig& cfg, const PhysicsParams& p);

}  // namespace orcha
