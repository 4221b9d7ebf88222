#pragma once

#include "orcha/codegen.hpp"
#include "orcha/config_io.hpp"
#include "orcha/kernels.hpp"
#include "orcha/mesh.hpp"
#include "orcha/planner.hpp"
#include "orcha/recipe_graph.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

namespace orcha::test {

inline std::filesystem::path data_dir() { return ORCHA_DATA_DIR; }
inline std::filesystem::path test_data() { return ORCHA_TEST_DATA; }
inline std::filesystem::path golden_dir() { return ORCHA_GOLDEN; }

inline SpecTable table_of(const std::vector<RoutineSpec>& specs) {
    SpecTable t;
    for (const auto& s : specs) t.emplace(s.name, s);
    return t;
}

inline SpecTable action_specs() {
    const auto path = data_dir() / "specs" / "actions.F90";
    return table_of(parse_annotations(read_text_file(path), "!!", path.string()));
}

inline RecipeGraph recipe(const std::string& name) {
    return load_recipe(read_text_file(data_dir() / "recipes" / (name + ".json")));
}

inline ExecutablePlan plan_for(const std::string& name) {
    const auto specs = name == "actions" ? action_specs() : table_of(builtin_specs());
    return emit_plan(fuse(recipe(name), specs));
}

inline CostModel cost_profile(const std::string& name) {
    return parse_cost_model(read_text_file(data_dir() / "cost" / (name + ".json")));
}

inline ProblemConfig sedov_problem() {
    ProblemConfig cfg;
    cfg.shape = MeshShape{8, 8, 16, 16, 2, 0.0, 1.0, 0.0, 1.0};
    cfg.dt = 0.002;
    return cfg;
}

inline ProblemConfig cellular_problem() { return parse_run_file(read_text_file(data_dir() / "run" / "cellular.json")).problem; }

// Single-threaded reference: halos filled once per step, then every routine
// in order on every block, host kernels called directly.
using HostKernel = void (*)(const TileView&, const PhysicsParams&);

inline void reference_steps(BlockMesh& mesh, const std::vector<HostKernel>& routines, double dt, const PhysicsParams& p,
                            int steps) {
    for (int s = 0; s < steps; ++s) {
        mesh.fill_halos();
        for (int b = 0; b < mesh.nblocks(); ++b) {
            TileView v;
            const auto& sh = mesh.shape();
            v.nxb = sh.nxb;
            v.nyb = sh.nyb;
            v.h = sh.h;
            for (std::size_t k = 0; k < kNumVars; ++k) v.vars[k] = mesh.var(b, k);
            v.lo = mesh.lo(b);
            v.hi = mesh.hi(b);
            v.deltas = mesh.deltas();
            v.dt = dt;
            v.block_id = b;
            const std::size_t nx = sh.nxb + 2 * sh.h, ny = sh.nyb + 2 * sh.h;
            static std::vector<double> a, c, d;
            a.assign((nx + 1) * ny * 5, 0.0);
            c.assign(nx * (ny + 1) * 5, 0.0);
            d.assign(nx * ny * 5, 0.0);
            v.scratch[0] = {"flx", a.data(), a.size()};
            v.scratch[1] = {"fly", c.data(), c.size()};
            v.scratch[2] = {"ustage", d.data(), d.size()};
            v.n_scratch = 3;
            for (auto k : routines) k(v, p);
        }
    }
}

// Parallel-branch oracle: hydro routines and burn routines each run on their
// own copy of the step-start state, the merge rule combines them into the
// start state, then the tail routines run on the result.
inline void two_copy_steps(BlockMesh& mesh, const std::vector<HostKernel>& hydro_branch,
                           const std::vector<HostKernel>& burn_branch, const std::vector<HostKernel>& tail, double dt,
                           const PhysicsParams& p, int steps) {
    for (int s = 0; s < steps; ++s) {
        mesh.fill_halos();
        BlockMesh h = mesh, bm = mesh;
        reference_steps(h, hydro_branch, dt, p, 1);
        reference_steps(bm, burn_branch, dt, p, 1);
        for (int b = 0; b < mesh.nblocks(); ++b) {
            auto view = [&](BlockMesh& m) {
                TileView v;
                v.nxb = m.shape().nxb;
                v.nyb = m.shape().nyb;
                v.h = m.shape().h;
                for (std::size_t k = 0; k < kNumVars; ++k) v.vars[k] = m.var(b, k);
                v.dt = dt;
                return v;
            };
            merge_hydro_burn(view(h), view(bm), view(mesh), p);
        }
        // tail kernels read interior cells only, so no refill
        for (int b = 0; b < mesh.nblocks(); ++b) {
            TileView v;
            v.nxb = mesh.shape().nxb;
            v.nyb = mesh.shape().nyb;
            v.h = mesh.shape().h;
            for (std::size_t k = 0; k < kNumVars; ++k) v.vars[k] = mesh.var(b, k);
            v.dt = dt;
            for (auto k : tail) k(v, p);
        }
    }
}

inline double max_abs_diff(const BlockMesh& a, const BlockMesh& b, std::size_t var) {
    double m = 0.0;
    for (int blk = 0; blk < a.nblocks(); ++blk)
        for (int j = 0; j < a.shape().nyb; ++j)
            for (int i = 0; i < a.shape().nxb; ++i) m = std::max(m, std::abs(a.at(blk, var, i, j) - b.at(blk, var, i, j)));
    return m;
}

}  // namespace orcha::test
