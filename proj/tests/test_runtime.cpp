#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"

#include "orcha/error.hpp"
#include "orcha/runtime.hpp"

#include <chrono>
#include <random>
#include <thread>

using namespace orcha;

namespace {

PipelineConfig teams(int cpu, int gpu = 1, int mover = 1) {
    PipelineConfig cfg;
    cfg.teams = {{"cpu", cpu, TeamRole::HostCompute}};
    if (gpu) cfg.teams.push_back({"gpu", gpu, TeamRole::DeviceProxy});
    if (mover) cfg.teams.push_back({"mover", mover, TeamRole::Mover});
    return cfg;
}

BlockMesh sedov_mesh() {
    const auto prob = test::sedov_problem();
    BlockMesh m(prob.shape);
    init_sedov(m, SedovConfig{}, prob.physics);
    return m;
}

BlockMesh cellular_mesh(int nby = 2) {
    auto shape = test::cellular_problem().shape;
    shape.nby = nby;
    shape.ymax = 32.0 * nby;
    BlockMesh m(shape);
    init_cellular(m, CellularConfig{}, test::cellular_problem().physics);
    return m;
}

StepInputs sedov_inputs() { return {test::sedov_problem().dt, test::sedov_problem().physics}; }
StepInputs cellular_inputs() { return {test::cellular_problem().dt, test::cellular_problem().physics}; }

void boom(const TileView& t, const PhysicsParams&) {
    if (t.block_id == 5) throw std::runtime_error("bad cell");
}
void nap(const TileView&, const PhysicsParams&) { std::this_thread::sleep_for(std::chrono::milliseconds(600)); }

// One-routine CPU plan around `name` in `registry`.
ExecutablePlan single_plan(KernelRegistry& registry, const std::string& name, KernelFn fn) {
    RoutineSpec s;
    s.name = name;
    s.device_variants = {Device::CPU};
    s.arguments = {{"U", GridData{Structure::Center, {"dens"}, {"dens"}}}};
    registry.add(name, {fn, nullptr, s});
    const auto recipe = load_recipe(R"({"name": "one", "nodes": [{"id": "a", "action": ")" + name +
                                    R"(", "map_to": "CPU", "after": ["__begin__"]}]})");
    return emit_plan(fuse(recipe, test::table_of({s})));
}

}  // namespace

TEST_CASE("configuration validation") {
    auto expect_invalid = [](const PipelineConfig& c) {
        try {
            c.validate();
            FAIL("expected InvalidConfig");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::InvalidConfig);
        }
    };
    PipelineConfig c = teams(2);
    c.validate();
    c.donation_edges = {{"cpu", "gpu"}, {"gpu", "cpu"}};
    expect_invalid(c);
    c.donation_edges = {{"cpu", "cpu"}};
    expect_invalid(c);
    c.donation_edges = {{"cpu", "nobody"}};
    expect_invalid(c);
    c = teams(0);
    expect_invalid(c);
    c = teams(1);
    c.split_ratio = 1.5;
    expect_invalid(c);
    expect_invalid(PipelineConfig{});
    try {
        Runtime rt(PipelineConfig{});
        FAIL("expected InvalidConfig");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::InvalidConfig);
    }
}

TEST_CASE("teams persist across cycles") {
    auto cfg = teams(2);
    cfg.teams.push_back({"spare1", 1, TeamRole::HostCompute});
    cfg.teams.push_back({"spare2", 1, TeamRole::HostCompute});
    Runtime rt(cfg);
    CHECK(rt.team_count() == 5);
    CHECK(rt.idle_teams() == 5);
    const auto threads = rt.threads_created();
    CHECK(threads == 6);
    BlockMesh m = sedov_mesh();
    const auto report = run_steps(rt, test::plan_for("sedov_gpu"), m, sedov_inputs(), 10);
    CHECK(report.cycles == 10);
    CHECK(report.teams_created == 5);
    CHECK(rt.threads_created() == threads);
    CHECK(rt.idle_teams() == 5);
    CHECK(report.exactly_once);
}

TEST_CASE("empty plan leaves the mesh unchanged") {
    Runtime rt(teams(1, 0, 0));
    BlockMesh m = sedov_mesh();
    const auto before = m.checksums();
    const auto r = rt.run_cycle(ExecutablePlan{}, m, sedov_inputs());
    CHECK(r.checksums == before);
}

TEST_CASE("sequential cellular pipeline: packets, wrappers and reference") {
    BlockMesh m = cellular_mesh(8);
    REQUIRE(m.nblocks() == 64);
    BlockMesh ref = m;
    auto cfg = teams(2);
    cfg.n_blocks_per_packet = 16;
    Runtime rt(cfg);
    const auto plan = test::plan_for("cellular_sequential");
    const auto r = run_steps(rt, plan, m, cellular_inputs(), 2);
    CHECK(r.packets == 2 * 4);
    CHECK(r.stage_blocks.at("TF_A") == 2 * 64);
    CHECK(r.stage_blocks.at("TF_B") == 2 * 64);
    CHECK(r.team_items.at("mover") == 2 * 4);
    CHECK(r.exactly_once);
    CHECK(r.bytes_in > 0);
    CHECK(r.bytes_out > 0);
    test::reference_steps(ref, {hydro_advance, eos_expensive, burn_advance, eos_expensive}, cellular_inputs().dt,
                          cellular_inputs().physics, 2);
    CHECK(r.checksums == ref.checksums());
}

TEST_CASE("single block equals a direct call") {
    BlockMesh m(MeshShape{1, 1, 8, 8, 2});
    init_sedov(m, SedovConfig{}, PhysicsParams{});
    BlockMesh ref = m;
    Runtime rt(teams(1));
    const auto r = rt.run_cycle(test::plan_for("sedov_gpu"), m, sedov_inputs());
    test::reference_steps(ref, {hydro_advance, eos_gamma}, sedov_inputs().dt, sedov_inputs().physics, 1);
    CHECK(r.checksums == ref.checksums());
    CHECK(r.packets == 1);
}

TEST_CASE("parallel branches equal the two-copy oracle") {
    BlockMesh m = cellular_mesh(), ref = m;
    auto cfg = teams(2);
    cfg.n_blocks_per_packet = 4;
    Runtime rt(cfg);
    const auto r = run_steps(rt, test::plan_for("cellular_parallel"), m, cellular_inputs(), 3);
    test::two_copy_steps(ref, {hydro_advance, eos_expensive}, {burn_advance}, {eos_expensive}, cellular_inputs().dt,
                         cellular_inputs().physics, 3);
    CHECK(r.checksums == ref.checksums());
    CHECK(r.merges == 3 * static_cast<std::size_t>(m.nblocks()));
    CHECK(r.exactly_once);
}

TEST_CASE("results do not depend on workers, streams, packet size or split") {
    BlockMesh ref = sedov_mesh();
    test::reference_steps(ref, {hydro_advance, eos_gamma}, sedov_inputs().dt, sedov_inputs().physics, 2);
    std::mt19937 rng(12);
    for (int trial = 0; trial < 8; ++trial) {
        auto cfg = teams(1 + trial % 8, 1 + static_cast<int>(rng() % 2));
        cfg.streams = 1 + static_cast<int>(rng() % 3);
        cfg.n_blocks_per_packet = 1 + rng() % 64;
        cfg.split_ratio = (rng() % 5) / 4.0;
        Runtime rt(cfg);
        BlockMesh m = sedov_mesh();
        const auto r = run_steps(rt, test::plan_for(trial % 2 ? "sedov_gpu" : "sedov_cpu"), m, sedov_inputs(), 2);
        CHECK(r.checksums == ref.checksums());
        CHECK(r.exactly_once);
    }
}

TEST_CASE("split hands the requested share to the host twin") {
    auto cfg = teams(2);
    cfg.split_ratio = 0.25;
    cfg.n_blocks_per_packet = 8;
    Runtime rt(cfg);
    BlockMesh m = sedov_mesh();
    const auto r = rt.run_cycle(test::plan_for("sedov_gpu"), m, sedov_inputs());
    CHECK(r.stage_blocks.at("TF_A:host") == 16);
    CHECK(r.stage_blocks.at("TF_A") == 48);
    CHECK(r.packets == 6);
}

TEST_CASE("kernel failure names the block") {
    KernelRegistry reg;
    const auto plan = single_plan(reg, "Boom", boom);
    Runtime rt(teams(3, 0, 0), reg);
    BlockMesh m = sedov_mesh();
    try {
        rt.run_cycle(plan, m, sedov_inputs());
        FAIL("expected KernelPanic");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::KernelPanic);
        CHECK(std::string(e.what()).find("block 5") != std::string::npos);
        CHECK(std::string(e.what()).find("bad cell") != std::string::npos);
    }
    // the runtime stays usable; a single block never reaches id 5
    BlockMesh one(MeshShape{1, 1, 4, 4, 2});
    CHECK_NOTHROW(rt.run_cycle(plan, one, sedov_inputs()));
}

TEST_CASE("stalls trip the watchdog") {
    KernelRegistry reg;
    const auto plan = single_plan(reg, "Nap", nap);
    auto cfg = teams(1, 0, 0);
    cfg.watchdog_s = 0.1;
    Runtime rt(cfg, reg);
    BlockMesh m(MeshShape{1, 1, 4, 4, 2});
    try {
        rt.run_cycle(plan, m, sedov_inputs());
        FAIL("expected Deadlock");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::Deadlock);
    }
}

TEST_CASE("donation keeps exactly-once processing") {
    std::mt19937 rng(21);
    const auto plan = test::plan_for("cellular_sequential");
    BlockMesh ref = cellular_mesh();
    test::reference_steps(ref, {hydro_advance, eos_expensive, burn_advance, eos_expensive}, cellular_inputs().dt,
                          cellular_inputs().physics, 1);
    for (int trial = 0; trial < 6; ++trial) {
        auto cfg = teams(1 + static_cast<int>(rng() % 8));
        cfg.teams.push_back({"burn", 1 + static_cast<int>(rng() % 3), TeamRole::HostCompute});
        cfg.donation_edges = {{"gpu", "cpu"}, {"distributor", "cpu"}};
        cfg.n_blocks_per_packet = 1 + rng() % 8;
        Runtime rt(cfg);
        BlockMesh m = cellular_mesh();
        const auto r = rt.run_cycle(plan, m, cellular_inputs());
        CHECK(r.exactly_once);
        CHECK(r.checksums == ref.checksums());
        CHECK(r.team_items.at("distributor") == static_cast<std::size_t>(m.nblocks()));
    }
}
