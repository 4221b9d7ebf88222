#include "orcha/codegen.hpp"
#include "orcha/config_io.hpp"
#include "orcha/error.hpp"
#include "orcha/kernels.hpp"
#include "orcha/packet.hpp"
#include "orcha/perf_sim.hpp"
#include "orcha/runtime.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <random>

namespace fs = std::filesystem;
using namespace orcha;

namespace {

struct Options {
    std::string recipe, specs, templates, out, plan, config, cost, dump;
    std::string mode = "measured";
    std::string teams, donate, sweep;
    std::vector<std::string> inputs;
    std::size_t nblocks_per_packet = 0;
    int streams = 0;
    double split_ratio = -1.0;
    int steps = 1;
    std::size_t blocks = 160;
    std::uint64_t seed = 0;
    bool events = false;
};

SpecTable load_specs(const std::string& dir) {
    std::vector<RoutineSpec> all;
    if (dir.empty()) {
        all = builtin_specs();
    } else {
        if (!fs::is_directory(dir)) throw Error(Errc::IoError, "spec directory " + dir + " does not exist");
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(dir))
            if (e.is_regular_file()) files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            auto found = parse_annotations(read_text_file(f), default_sentinel_for(f.string()), f.string());
            all.insert(all.end(), found.begin(), found.end());
        }
    }
    SpecTable table;
    for (auto& s : all) {
        const std::string name = s.name;
        if (!table.emplace(name, std::move(s)).second)
            throw Error(Errc::DuplicateArgument, "routine '" + name + "' is annotated more than once");
    }
    return table;
}

ExecutablePlan obtain_plan(const Options& o) {
    if (!o.plan.empty()) return load_executable_plan(read_text_file(o.plan));
    if (o.recipe.empty()) throw Error(Errc::InvalidConfig, "either --plan or --recipe is required");
    return emit_plan(fuse(load_recipe(read_text_file(o.recipe)), load_specs(o.specs)));
}

std::vector<ThreadTeamConfig> parse_teams(const std::string& text) {
    std::vector<ThreadTeamConfig> teams;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto comma = text.find(',', start);
        auto item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) throw Error(Errc::InvalidConfig, "team '" + item + "' is not name=count");
        ThreadTeamConfig t;
        t.name = item.substr(0, eq);
        t.role = role_from_name(t.name);
        try {
            std::size_t used = 0;
            t.workers = std::stoi(item.substr(eq + 1), &used);
            if (used != item.size() - eq - 1) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw Error(Errc::InvalidConfig, "team '" + item + "' has a bad worker count");
        }
        teams.push_back(std::move(t));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return teams;
}

std::vector<std::pair<std::string, std::string>> parse_donations(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> edges;
    std::size_t start = 0;
    while (!text.empty()) {
        auto comma = text.find(',', start);
        auto item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        auto colon = item.find(':');
        if (colon == std::string::npos) throw Error(Errc::InvalidConfig, "donation '" + item + "' is not from:to");
        edges.emplace_back(item.substr(0, colon), item.substr(colon + 1));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return edges;
}

PipelineConfig pipeline_for(const Options& o, const ExecutablePlan& plan, const RunFile& rf) {
    PipelineConfig cfg = rf.pipeline.value_or(default_pipeline_config(plan));
    if (!o.teams.empty()) cfg.teams = parse_teams(o.teams);
    if (!o.donate.empty()) cfg.donation_edges = parse_donations(o.donate);
    if (o.nblocks_per_packet > 0) cfg.n_blocks_per_packet = o.nblocks_per_packet;
    if (o.streams > 0) cfg.streams = o.streams;
    if (o.split_ratio >= 0.0) cfg.split_ratio = o.split_ratio;
    cfg.validate();
    return cfg;
}

RunFile run_file_for(const Options& o) {
    return o.config.empty() ? RunFile{} : parse_run_file(read_text_file(o.config));
}

CostModel cost_for(const Options& o) {
    if (o.cost.empty()) throw Error(Errc::InvalidConfig, "--cost is required in modeled mode");
    return parse_cost_model(read_text_file(o.cost));
}

void perturb(BlockMesh& mesh, std::uint64_t seed) {
    if (seed == 0) return;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(-1e-6, 1e-6);
    for (int b = 0; b < mesh.nblocks(); ++b)
        for (int j = 0; j < mesh.shape().nyb; ++j)
            for (int i = 0; i < mesh.shape().nxb; ++i) mesh.at(b, kDens, i, j) *= 1.0 + jitter(rng);
}

int cmd_inspect(const Options& o) {
    nlohmann::json out = nlohmann::json::object();
    auto add = [&](const std::vector<RoutineSpec>& specs) {
        for (const auto& s : specs) out[s.name] = nlohmann::json::parse(export_spec(s));
    };
    if (o.inputs.empty() && o.specs.empty()) add(builtin_specs());
    for (const auto& [name, spec] : o.specs.empty() ? SpecTable{} : load_specs(o.specs)) add({spec});
    for (const auto& f : o.inputs) add(parse_annotations(read_text_file(f), default_sentinel_for(f), f));
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_plan(const Options& o) {
    if (o.recipe.empty()) throw Error(Errc::InvalidConfig, "--recipe is required");
    const auto plan = emit_plan(fuse(load_recipe(read_text_file(o.recipe)), load_specs(o.specs)));
    const fs::path out = o.out.empty() ? fs::path(".") : fs::path(o.out);
    write_text_file(out / "plan.json", render_executable_plan(plan));
    std::cout << "plan " << plan.name << ": " << plan.functions.size() << " task function(s)\n";
    for (const auto& fn : plan.functions) {
        std::cout << "  " << fn.tf.id << " " << to_string(fn.tf.device) << " " << to_string(fn.tf.data_item) << " [";
        for (std::size_t i = 0; i < fn.tf.routines.size(); ++i) std::cout << (i ? ", " : "") << fn.tf.routines[i];
        std::cout << "] " << fn.tf.spec.entry_count() << " entries\n";
    }
    for (const auto& e : plan.graph.edges) std::cout << "  " << e.from << " -> " << e.to << " (" << to_string(e.kind) << ")\n";
    for (const auto& m : plan.merges)
        std::cout << "  merge at " << m.at << " with " << (m.kernel.empty() ? "<none>" : m.kernel) << "\n";
    std::cout << "wrote " << (out / "plan.json").string() << "\n";
    return 0;
}

int cmd_generate(const Options& o) {
    const auto plan = obtain_plan(o);
    const auto templates = o.templates.empty() ? TemplateLibrary::defaults() : TemplateLibrary::from_directory(o.templates);
    const fs::path out = o.out.empty() ? fs::path("gen") : fs::path(o.out);
    write_generated(plan, templates, out);
    const std::size_t n = o.nblocks_per_packet > 0 ? o.nblocks_per_packet : 1;
    const auto mesh = BlockMesh(run_file_for(o).problem.shape).params();
    for (const auto& fn : plan.functions) {
        if (fn.tf.data_item != DataItemKind::DataPacket) continue;
        write_text_file(out / ("layout_" + fn.tf.id + ".json"), render_layout(layout(fn.tf.spec, n, mesh)));
    }
    std::cout << "wrote " << plan.functions.size() << " task function(s) to " << out.string() << "\n";
    return 0;
}

int cmd_run(const Options& o) {
    const auto plan = obtain_plan(o);
    auto rf = run_file_for(o);
    const auto cfg = pipeline_for(o, plan, rf);
    if (o.mode == "modeled") {
        const auto& shape = rf.problem.shape;
        const auto report = simulate(plan, cost_for(o), static_cast<std::size_t>(shape.nbx * shape.nby),
                                     cfg.n_blocks_per_packet, sim_options_from(cfg));
        std::cout << render_sim_report(report, o.events);
        return 0;
    }
    BlockMesh mesh = make_problem_mesh(rf.problem);
    perturb(mesh, o.seed);
    Runtime rt(cfg);
    const auto report = run_steps(rt, plan, mesh, StepInputs{rf.problem.dt, rf.problem.physics}, o.steps);
    std::cout << render_run_report(report);
    if (!o.dump.empty()) dump_mesh(mesh, o.dump);
    return 0;
}

int cmd_bench(const Options& o) {
    const auto plan = obtain_plan(o);
    auto rf = run_file_for(o);
    const auto cfg = pipeline_for(o, plan, rf);
    const auto spec = parse_sweep(o.sweep.empty() ? "nblocks=" + std::to_string(cfg.n_blocks_per_packet) : o.sweep);
    std::string csv;
    if (o.mode == "modeled") {
        csv = sweep(plan, cost_for(o), o.blocks, cfg.n_blocks_per_packet, spec, sim_options_from(cfg));
    } else {
        csv = "p,makespan_us,link_util,device_util,cpu_util\n";
        for (double v : spec.values) {
            auto c = cfg;
            if (spec.key == "nblocks")
                c.n_blocks_per_packet = static_cast<std::size_t>(v);
            else
                c.streams = static_cast<int>(v);
            BlockMesh mesh = make_problem_mesh(rf.problem);
            Runtime rt(c);
            const auto r = run_steps(rt, plan, mesh, StepInputs{rf.problem.dt, rf.problem.physics}, o.steps);
            char row[96];
            std::snprintf(row, sizeof row, "%ld,%.3f,,,\n", static_cast<long>(v), r.wall_s * 1e6);
            csv += row;
        }
    }
    if (!o.out.empty()) write_text_file(fs::path(o.out) / "bench.csv", csv);
    std::cout << csv;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"orcha: plan, generate and run orchestrated task pipelines", "orcha"};
    app.require_subcommand(1);
    Options o;

    auto* inspect = app.add_subcommand("inspect", "Parse annotations and print routine specs as JSON");
    inspect->add_option("files", o.inputs, "Annotated source files")->check(CLI::ExistingFile);
    inspect->add_option("-s,--specs", o.specs, "Directory of annotated sources")->check(CLI::ExistingDirectory);

    auto* plan = app.add_subcommand("plan", "Fuse a recipe into task functions and write plan.json");
    plan->add_option("-r,--recipe", o.recipe, "Recipe JSON")->required()->check(CLI::ExistingFile);
    plan->add_option("-s,--specs", o.specs, "Directory of annotated sources (default: built-in)")
        ->check(CLI::ExistingDirectory);
    plan->add_option("-o,--out", o.out, "Output directory (default: .)");

    auto plan_source = [&](CLI::App* sub) {
        sub->add_option("-p,--plan", o.plan, "Executable plan JSON")->check(CLI::ExistingFile);
        sub->add_option("-r,--recipe", o.recipe, "Recipe JSON, planned on the fly")->check(CLI::ExistingFile);
        sub->add_option("-s,--specs", o.specs, "Directory of annotated sources (default: built-in)")
            ->check(CLI::ExistingDirectory);
    };
    auto pipeline_flags = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "Run file with problem and pipeline settings")->check(CLI::ExistingFile);
        sub->add_option("--mode", o.mode, "measured or modeled")->check(CLI::IsMember({"measured", "modeled"}));
        sub->add_option("--nblocks-per-packet", o.nblocks_per_packet, "Blocks per data packet")->check(CLI::PositiveNumber);
        sub->add_option("--teams", o.teams, "Thread teams as name=count,...");
        sub->add_option("--donate", o.donate, "Donation edges as from:to,...");
        sub->add_option("--streams", o.streams, "Concurrent device streams")->check(CLI::PositiveNumber);
        sub->add_option("--split-ratio", o.split_ratio, "Fraction of GPU head blocks run on the host")
            ->check(CLI::Range(0.0, 1.0));
        sub->add_option("--steps", o.steps, "Cycles to run")->check(CLI::PositiveNumber);
        sub->add_option("--cost", o.cost, "Cost model JSON (modeled mode)")->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "Seed for the initial-state jitter (0: none)");
    };

    auto* generate = app.add_subcommand("generate", "Render glue code and packet layouts");
    plan_source(generate);
    generate->add_option("-t,--templates", o.templates, "Template directory (default: built-in)")
        ->check(CLI::ExistingDirectory);
    generate->add_option("-o,--out", o.out, "Output directory (default: gen)");
    generate->add_option("--nblocks-per-packet", o.nblocks_per_packet, "Blocks per packet in layouts")
        ->check(CLI::PositiveNumber);
    generate->add_option("--config", o.config, "Run file; its mesh sets layout sizes")->check(CLI::ExistingFile);

    auto* run = app.add_subcommand("run", "Execute a plan over the mesh and print a report");
    plan_source(run);
    pipeline_flags(run);
    run->add_option("--dump", o.dump, "Write the final mesh to PREFIX.bin and PREFIX.json");
    run->add_flag("--events", o.events, "Include the event log in modeled reports");

    auto* bench = app.add_subcommand("bench", "Sweep packet size or streams and write bench.csv");
    plan_source(bench);
    pipeline_flags(bench);
    bench->add_option("--sweep", o.sweep, "key=v1,v2,... with key nblocks or streams");
    bench->add_option("--blocks", o.blocks, "Total blocks in modeled mode")->check(CLI::PositiveNumber);
    bench->add_option("-o,--out", o.out, "Directory for bench.csv (default: stdout only)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*inspect) return cmd_inspect(o);
        if (*plan) return cmd_plan(o);
        if (*generate) return cmd_generate(o);
        if (*run) return cmd_run(o);
        if (*bench) return cmd_bench(o);
    } catch (const Error& e) {
        std::cerr << "orcha: " << e.what() << "\n";
        return is_runtime_failure(e.code()) ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "orcha: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
