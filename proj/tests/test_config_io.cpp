#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"

#include "orcha/error.hpp"

using namespace orcha;

namespace {

template <class F>
Errc code_of(F f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return Errc::IoError;
}

}  // namespace

TEST_CASE("pipeline config round trip") {
    PipelineConfig cfg;
    cfg.teams = {{"cpu", 3, TeamRole::HostCompute}, {"gpu", 1, TeamRole::DeviceProxy}, {"mover", 2, TeamRole::Mover}};
    cfg.n_blocks_per_packet = 20;
    cfg.streams = 4;
    cfg.donation_edges = {{"gpu", "cpu"}};
    cfg.split_ratio = 0.25;
    cfg.link = {12.5, 0.5};
    cfg.watchdog_s = 3.0;
    const auto doc = render_pipeline_config(cfg);
    CHECK(parse_pipeline_config(doc) == cfg);
    CHECK(render_pipeline_config(parse_pipeline_config(doc)) == doc);
}

TEST_CASE("pipeline config defaults and roles") {
    const auto cfg = parse_pipeline_config(R"({"teams": [{"name": "gpu0"}, {"name": "cpu", "workers": 4}, {"name": "mover"}]})");
    REQUIRE(cfg.teams.size() == 3);
    CHECK(cfg.teams[0].role == TeamRole::DeviceProxy);
    CHECK(cfg.teams[0].workers == 1);
    CHECK(cfg.teams[1].role == TeamRole::HostCompute);
    CHECK(cfg.teams[2].role == TeamRole::Mover);
    CHECK(cfg.n_blocks_per_packet == 1);
    CHECK(parse_pipeline_config(R"({"teams": [{"name": "x", "role": "mover"}]})").teams[0].role == TeamRole::Mover);
}

TEST_CASE("pipeline config errors") {
    CHECK(code_of([] { parse_pipeline_config("{"); }) == Errc::ParseError);
    CHECK(code_of([] { parse_pipeline_config("[]"); }) == Errc::ParseError);
    CHECK(code_of([] { parse_pipeline_config(R"({"stream": 2})"); }) == Errc::InvalidConfig);
    CHECK(code_of([] { parse_pipeline_config(R"({"streams": "two"})"); }) == Errc::ParseError);
    CHECK(code_of([] { parse_pipeline_config(R"({"teams": {}})"); }) == Errc::ParseError);
    CHECK(code_of([] { parse_pipeline_config(R"({"donation_edges": [["a"]]})"); }) == Errc::ParseError);
    CHECK(code_of([] { parse_pipeline_config(R"({"teams": [{"name": "a", "colour": 1}]})"); }) == Errc::InvalidConfig);
}

TEST_CASE("cost model round trip and shipped profiles") {
    for (const char* name : {"default", "burn_heavy", "cheap"}) {
        const auto cost = test::cost_profile(name);
        cost.validate();
        CHECK(cost.kernels.size() == 4);
        CHECK(parse_cost_model(render_cost_model(cost)) == cost);
    }
    CHECK(code_of([] { parse_cost_model(R"({"alpha": 1})"); }) == Errc::InvalidConfig);
    CHECK(code_of([] { parse_cost_model(R"({"kernels": {"K": 3}})"); }) == Errc::ParseError);
    CHECK(code_of([] { parse_cost_model(R"({"alpha_us": -2})"); }) == Errc::InvalidConfig);
}

TEST_CASE("run files") {
    const auto sedov = parse_run_file(read_text_file(test::data_dir() / "run" / "sedov.json"));
    CHECK(sedov.problem.problem == "sedov");
    CHECK(sedov.problem.shape.nbx == 8);
    CHECK(sedov.problem.shape.nxb == 16);
    const auto cell = parse_run_file(read_text_file(test::data_dir() / "run" / "cellular.json"));
    CHECK(cell.problem.problem == "cellular");
    CHECK(cell.problem.dt == 3e-9);
    CHECK(!cell.pipeline);

    for (const auto& p : {sedov.problem, cell.problem}) {
        const auto doc = "{\"problem\": " + render_problem_config(p) + "}";
        CHECK(parse_run_file(doc).problem == p);
    }
    const auto with = parse_run_file(R"({"pipeline": {"teams": [{"name": "cpu", "workers": 2}]}})");
    REQUIRE(with.pipeline);
    CHECK(with.pipeline->teams[0].workers == 2);
    CHECK(code_of([] { parse_run_file(R"({"problem": {"problem": "kelvin"}})"); }) == Errc::InvalidConfig);
    CHECK(code_of([] { parse_run_file(R"({"problem": {"dt": 0}})"); }) == Errc::InvalidConfig);
    CHECK(code_of([] { parse_run_file(R"({"extra": 1})"); }) == Errc::InvalidConfig);
}

TEST_CASE("problem meshes") {
    const auto cell = test::cellular_problem();
    BlockMesh a = make_problem_mesh(cell), b(cell.shape);
    init_cellular(b, CellularConfig{}, cell.physics);
    CHECK(a == b);
    BlockMesh s(test::sedov_problem().shape);
    init_sedov(s, SedovConfig{}, test::sedov_problem().physics);
    CHECK(make_problem_mesh(test::sedov_problem()) == s);
}

TEST_CASE("file helpers") {
    const auto dir = std::filesystem::temp_directory_path() / "orcha_io_test";
    std::filesystem::remove_all(dir);
    write_text_file(dir / "a" / "b.txt", "hello\n");
    CHECK(read_text_file(dir / "a" / "b.txt") == "hello\n");
    CHECK(code_of([&] { read_text_file(dir / "missing"); }) == Errc::IoError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("reports are JSON documents") {
    RunReport r;
    r.checksums = {"00", "11"};
    r.stage_busy_s["TF_A"] = 0.5;
    const auto text = render_run_report(r);
    CHECK(text.find("\"checksums\"") != std::string::npos);
    CHECK(text.find("TF_A") != std::string::npos);

    const auto sim = simulate(test::plan_for("sedov_gpu"), test::cost_profile("default"), 8, 4);
    CHECK(render_sim_report(sim).find("\"events\"") == std::string::npos);
    CHECK(render_sim_report(sim, true).find("\"events\"") != std::string::npos);
    CHECK(render_sim_report(sim).find("makespan_us") != std::string::npos);
}

TEST_CASE("mesh dump round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "orcha_dump_test";
    std::filesystem::remove_all(dir);
    const BlockMesh mesh = make_problem_mesh(test::cellular_problem());
    dump_mesh(mesh, dir / "nested" / "state");
    CHECK(std::filesystem::exists(dir / "nested" / "state.json"));
    const BlockMesh back = load_mesh(dir / "nested" / "state");
    CHECK(back == mesh);
    CHECK(back.checksums() == mesh.checksums());
    std::filesystem::remove_all(dir);
}
