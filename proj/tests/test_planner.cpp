#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"

#include "orcha/error.hpp"

#include <array>
#include <cmath>
#include <random>
#include <set>

using namespace orcha;

namespace {

RoutineSpec routine(std::string name, std::vector<ArgumentSpec> args, std::set<Device> devices = {Device::CPU, Device::GPU}) {
    RoutineSpec s;
    s.name = std::move(name);
    s.arguments = std::move(args);
    s.device_variants = std::move(devices);
    return s;
}

GridData center(std::set<std::string> in, std::set<std::string> out = {}) {
    return GridData{Structure::Center, std::move(in), std::move(out)};
}

// Reachability between groups after contraction, by transitive closure.
bool contracted_acyclic(const RecipeGraph& g, const std::vector<std::size_t>& group_of, std::size_t ngroups) {
    std::vector<std::vector<bool>> reach(ngroups, std::vector<bool>(ngroups, false));
    for (std::size_t v = 0; v < g.size(); ++v)
        for (auto s : g.successors(v))
            if (group_of[v] != group_of[s]) reach[group_of[v]][group_of[s]] = true;
    for (std::size_t k = 0; k < ngroups; ++k)
        for (std::size_t i = 0; i < ngroups; ++i)
            for (std::size_t j = 0; j < ngroups; ++j)
                if (reach[i][k] && reach[k][j]) reach[i][j] = true;
    for (std::size_t i = 0; i < ngroups; ++i)
        if (reach[i][i]) return false;
    return true;
}

// Restatement of the greedy rule with the closure check above.
Grouping oracle_grouping(const RecipeGraph& g) {
    Grouping groups;
    std::vector<std::size_t> group_of(g.size(), static_cast<std::size_t>(-1));
    for (auto v : topological_indices(g)) {
        const auto& preds = g.predecessors(v);
        bool joined = false;
        if (!g.from_begin(v) && !preds.empty()) {
            const auto target = group_of[preds[0]];
            bool all = true;
            for (auto p : preds) all = all && group_of[p] == target;
            if (all && g.nodes()[groups[target][0]].device == g.nodes()[v].device) {
                auto trial = group_of;
                trial[v] = target;
                std::size_t next = groups.size();
                for (auto& x : trial)
                    if (x == static_cast<std::size_t>(-1)) x = next++;
                if (contracted_acyclic(g, trial, next)) {
                    groups[target].push_back(v);
                    group_of[v] = target;
                    joined = true;
                }
            }
        }
        if (!joined) {
            group_of[v] = groups.size();
            groups.push_back({v});
        }
    }
    return groups;
}

RecipeGraph random_recipe(std::mt19937& rng, std::size_t n) {
    std::vector<RecipeNode> nodes;
    std::bernoulli_distribution edge(0.35), gpu(0.5);
    for (std::size_t i = 0; i < n; ++i) {
        RecipeNode node{"n" + std::to_string(i), "Act" + std::to_string(i), gpu(rng) ? Device::GPU : Device::CPU, {}};
        for (std::size_t j = 0; j < i; ++j)
            if (edge(rng)) node.after.push_back("n" + std::to_string(j));
        nodes.push_back(std::move(node));
    }
    std::shuffle(nodes.begin(), nodes.end(), rng);
    return RecipeGraph("random", nodes);
}

SpecTable act_specs(std::size_t n) {
    SpecTable t;
    for (std::size_t i = 0; i < n; ++i) {
        auto name = "Act" + std::to_string(i);
        t.emplace(name, routine(name, {{"U", center({std::string(kVarNames[i % kNumVars])})}}));
    }
    return t;
}

RoutineSpec random_routine(std::mt19937& rng, const std::string& name) {
    static const char* scratch_names[] = {"flx", "fly", "tmp"};
    static const char* externals[] = {"dt", "gamma", "time"};
    std::vector<ArgumentSpec> args;
    const int n = 1 + static_cast<int>(rng() % 5);
    for (int a = 0; a < n; ++a) {
        const std::string arg = "a" + std::to_string(a);
        switch (rng() % 4) {
        case 0: {
            GridData gd{static_cast<Structure>(rng() % 3), {}, {}};
            gd.variables_in.insert(std::string(kVarNames[rng() % kNumVars]));
            if (rng() % 2) gd.variables_out.insert(std::string(kVarNames[rng() % kNumVars]));
            args.push_back({arg, gd});
            break;
        }
        case 1: {
            const auto k = rng() % 3;
            args.push_back({scratch_names[k], Scratch{{"(nxb)+" + std::to_string(k), "nyb"}, {"1", "1"}}});
            break;
        }
        case 2: {
            const auto k = rng() % 3;
            args.push_back({externals[k], External{k == 2 ? ScalarKind::Integer : ScalarKind::Real}});
            break;
        }
        default:
            args.push_back({arg, TileMetadata{static_cast<MetaKind>(rng() % 5)}});
        }
    }
    // keep names unique within the routine
    std::set<std::string> seen;
    std::vector<ArgumentSpec> unique;
    for (auto& a : args)
        if (seen.insert(a.name).second) unique.push_back(std::move(a));
    return routine(name, std::move(unique));
}

}  // namespace

TEST_CASE("actions recipe fuses into three task functions") {
    const auto plan = fuse(test::recipe("actions"), test::action_specs());
    REQUIRE(plan.task_functions.size() == 3);
    const auto& a = plan.task_functions[0];
    CHECK(a.id == "TF_A");
    CHECK(a.routines == std::vector<std::string>{"Action_1", "Action_2"});
    CHECK(a.device == Device::GPU);
    CHECK(a.data_item == DataItemKind::DataPacket);
    CHECK(plan.task_functions[1].routines == std::vector<std::string>{"Action_3"});
    CHECK(plan.task_functions[2].routines == std::vector<std::string>{"Action_4"});
    for (std::size_t i = 1; i < 3; ++i) {
        CHECK(plan.task_functions[i].device == Device::CPU);
        CHECK(plan.task_functions[i].data_item == DataItemKind::TileWrapper);
    }
    CHECK(a.spec.entry_count() == 5);
    CHECK(a.spec.entry_names() == std::vector<std::string>{"dt", "tile_hi", "tile_lo", "grid_center", "scratch_flx"});
}

TEST_CASE("single CPU node and five-node chain") {
    const auto specs = act_specs(5);
    const auto one = fuse(RecipeGraph("one", {{"a", "Act0", Device::CPU, {}}}), specs);
    REQUIRE(one.task_functions.size() == 1);
    CHECK(one.task_functions[0].data_item == DataItemKind::TileWrapper);

    std::vector<RecipeNode> chain;
    for (int i = 0; i < 5; ++i)
        chain.push_back({"n" + std::to_string(i), "Act" + std::to_string(i), Device::GPU,
                         i ? std::vector<std::string>{"n" + std::to_string(i - 1)} : std::vector<std::string>{}});
    const RecipeGraph g("chain", chain);
    const auto plan = fuse(g, specs);
    REQUIRE(plan.task_functions.size() == 1);
    CHECK(plan.task_functions[0].routines.size() == 5);
    CHECK(oracle_grouping(g).size() == 1);
    CHECK(quotient_is_acyclic(g, GreedyFusion{}.group(g)));
}

TEST_CASE("missing specs and device variants") {
    auto specs = act_specs(1);
    try {
        fuse(RecipeGraph("x", {{"a", "Nope", Device::CPU, {}}}), specs);
        FAIL("expected MissingRoutineSpec");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::MissingRoutineSpec);
    }
    specs.at("Act0").device_variants = {Device::CPU};
    try {
        fuse(RecipeGraph("x", {{"a", "Act0", Device::GPU, {}}}), specs);
        FAIL("expected DeviceVariantUnavailable");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::DeviceVariantUnavailable);
    }
}

TEST_CASE("greedy grouping matches the restated rule and stays acyclic") {
    std::mt19937 rng(5);
    for (int trial = 0; trial < 300; ++trial) {
        const auto g = random_recipe(rng, 1 + trial % 8);
        const auto groups = GreedyFusion{}.group(g);
        CHECK(groups == oracle_grouping(g));
        std::vector<std::size_t> group_of(g.size());
        for (std::size_t k = 0; k < groups.size(); ++k)
            for (auto v : groups[k]) group_of[v] = k;
        CHECK(contracted_acyclic(g, group_of, groups.size()));
        const auto plan = fuse(g, act_specs(8));
        for (const auto& tf : plan.task_functions) CHECK(tf.data_item == data_item_for(tf.device));
    }
}

TEST_CASE("fused execution equals recipe execution") {
    // Action k overwrites variable k from the variables of its predecessors,
    // so any order respecting the recipe edges gives the same state.
    std::mt19937 rng(9);
    for (int trial = 0; trial < 200; ++trial) {
        const auto g = random_recipe(rng, 1 + trial % 8);
        auto act = [&](std::size_t v, std::array<double, 9>& s) {
            const auto k = std::stoul(g.nodes()[v].action.substr(3));
            double acc = std::sin(static_cast<double>(k) + s[k]);
            for (auto p : g.predecessors(v)) acc += 0.5 * s[std::stoul(g.nodes()[p].action.substr(3))];
            s[k] = acc;
        };
        std::array<double, 9> init{};
        for (auto& x : init) x = std::uniform_real_distribution<double>(-1, 1)(rng);

        // a random valid order
        std::array<double, 9> direct = init;
        std::vector<std::size_t> indeg(g.size());
        std::vector<std::size_t> ready;
        for (std::size_t v = 0; v < g.size(); ++v)
            if ((indeg[v] = g.predecessors(v).size()) == 0) ready.push_back(v);
        while (!ready.empty()) {
            std::swap(ready[rng() % ready.size()], ready.back());
            const auto v = ready.back();
            ready.pop_back();
            act(v, direct);
            for (auto s : g.successors(v))
                if (--indeg[s] == 0) ready.push_back(s);
        }

        // fused plan: task functions in edge order, routines in group order
        const auto plan = fuse(g, act_specs(8));
        std::map<std::string, std::size_t> tf_indeg;
        for (const auto& tf : plan.task_functions) tf_indeg[tf.id] = 0;
        for (const auto& e : plan.edges)
            if (tf_indeg.count(e.to) && tf_indeg.count(e.from)) ++tf_indeg[e.to];
        std::array<double, 9> fused = init;
        std::size_t done = 0;
        while (done < plan.task_functions.size()) {
            for (const auto& tf : plan.task_functions) {
                if (tf_indeg[tf.id] != 0) continue;
                tf_indeg[tf.id] = static_cast<std::size_t>(-1);
                for (const auto& id : tf.node_ids) act(*g.index_of(id), fused);
                for (const auto& e : plan.edges)
                    if (e.from == tf.id && tf_indeg.count(e.to)) --tf_indeg[e.to];
                ++done;
            }
        }
        CHECK(fused == direct);
    }
}

TEST_CASE("union of two routine specs") {
    const auto ps1 = routine("PS1", {{"U", center({"dens", "ener"})},
                                     {"flx", Scratch{{"(nxb)+1", "(nyb)", "5"}, {"1", "1", "1"}}},
                                     {"dt", External{ScalarKind::Real}}});
    const auto ps2 = routine("PS2", {{"U", center({"dens"})}, {"dt", External{ScalarKind::Real}},
                                     {"gamma", External{ScalarKind::Real}}});
    const auto c = consolidate({ps1, ps2});
    CHECK(c.externals == std::vector<ExternalEntry>{{"dt", ScalarKind::Real}, {"gamma", ScalarKind::Real}});
    REQUIRE(c.grid_data.size() == 1);
    CHECK(c.grid_data[0].variables_in == std::set<std::string>{"dens", "ener"});
    REQUIRE(c.scratch.size() == 1);
    CHECK(c.scratch[0].name == "flx");
    CHECK(c.tile_metadata.empty());
    CHECK(c.entry_count() == 4);
    CHECK(c.bindings == std::vector<std::vector<std::string>>{{"grid_center", "scratch_flx", "dt"},
                                                              {"grid_center", "dt", "gamma"}});
}

TEST_CASE("single routine consolidates to itself") {
    for (const auto& s : builtin_specs()) {
        const auto c = consolidate({s});
        std::size_t grids = 0, metas = 0, ext = 0, scr = 0;
        for (const auto& a : s.arguments) {
            grids += std::holds_alternative<GridData>(a.source);
            metas += std::holds_alternative<TileMetadata>(a.source);
            ext += std::holds_alternative<External>(a.source);
            scr += std::holds_alternative<Scratch>(a.source);
        }
        CHECK(c.grid_data.size() == grids);
        CHECK(c.tile_metadata.size() == metas);
        CHECK(c.externals.size() == ext);
        CHECK(c.scratch.size() == scr);
        CHECK(c.bindings.size() == 1);
        CHECK(c.bindings[0].size() == s.arguments.size());
        CHECK(consolidate({s, s}).same_entries(c));
    }
}

TEST_CASE("conflicts") {
    const auto a = routine("A", {{"flx", Scratch{{"17", "16"}, {"1", "1"}}}});
    const auto b = routine("B", {{"flx", Scratch{{"16", "16"}, {"1", "1"}}}});
    try {
        consolidate({a, b});
        FAIL("expected ConflictingScratchExtents");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::ConflictingScratchExtents);
    }
    const auto c = routine("C", {{"n", External{ScalarKind::Real}}});
    const auto d = routine("D", {{"n", External{ScalarKind::Integer}}});
    try {
        consolidate({c, d});
        FAIL("expected ConflictingExternalKind");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::ConflictingExternalKind);
    }
}

TEST_CASE("consolidation is order-insensitive and idempotent") {
    std::mt19937 rng(21);
    for (int i = 0; i < 200; ++i) {
        const auto a = random_routine(rng, "A");
        const auto b = random_routine(rng, "B");
        const auto ab = consolidate({a, b});
        const auto ba = consolidate({b, a});
        CHECK(ab.same_entries(ba));
        CHECK(consolidate({a, b, a, b}).same_entries(ab));
        auto names = ab.entry_names();
        CHECK(std::set<std::string>(names.begin(), names.end()).size() == names.size());
    }
}

TEST_CASE("plan documents round trip") {
    for (const char* name : {"actions", "cellular_parallel", "cellular_sequential", "sedov_cpu"}) {
        const auto plan = test::plan_for(name).graph;
        CHECK(load_plan(render_plan(plan)) == plan);
    }
}

TEST_CASE("topologies") {
    const auto seq = derive_topology(test::plan_for("cellular_sequential").graph);
    CHECK(seq.branches == std::vector<std::vector<std::size_t>>{{0, 1}});
    CHECK_FALSE(seq.duplicate);
    CHECK_FALSE(seq.merge.has_value());
    CHECK(seq.movers == std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}});

    const auto par = derive_topology(test::plan_for("cellular_parallel").graph);
    CHECK(par.branches == std::vector<std::vector<std::size_t>>{{0}, {1}});
    CHECK(par.duplicate);
    REQUIRE(par.merge.has_value());
    CHECK(par.merge->at == "TF_C");
    CHECK(par.merge->kernel == std::optional<std::string>("merge_hydro_burn"));
    CHECK(par.tail == std::vector<std::size_t>{2});

    const auto one = derive_topology(test::plan_for("sedov_cpu").graph);
    CHECK(one.branches == std::vector<std::vector<std::size_t>>{{0}});
    CHECK(one.movers.empty());
}

TEST_CASE("graphs beyond one fork and one merge are rejected") {
    auto specs = act_specs(3);
    // X feeds Y and Z directly while Y also feeds Z
    const RecipeGraph g("skew", {{"x", "Act0", Device::CPU, {}}, {"y", "Act1", Device::GPU, {"x"}},
                                 {"z", "Act2", Device::CPU, {"x", "y"}}});
    try {
        derive_topology(fuse(g, specs));
        FAIL("expected UnsupportedTopology");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::UnsupportedTopology);
    }
}
