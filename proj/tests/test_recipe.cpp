#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"

#include "orcha/error.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

using namespace orcha;

namespace {

using Edge = std::pair<std::string, std::string>;

std::set<Edge> edges_of(const RecipeGraph& g) {
    std::set<Edge> e;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (g.from_begin(i)) e.emplace("__begin__", g.nodes()[i].id);
        if (g.to_end(i)) e.emplace(g.nodes()[i].id, "__end__");
        for (auto p : g.predecessors(i)) e.emplace(g.nodes()[p].id, g.nodes()[i].id);
    }
    return e;
}

// Every permutation of the node indices that respects `after`, in
// lexicographic order of the permutation.
std::vector<std::vector<std::size_t>> valid_orders(const std::vector<RecipeNode>& nodes) {
    std::vector<std::size_t> perm(nodes.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<std::vector<std::size_t>> out;
    do {
        std::vector<std::size_t> pos(nodes.size());
        for (std::size_t k = 0; k < perm.size(); ++k) pos[perm[k]] = k;
        bool ok = true;
        for (std::size_t i = 0; i < nodes.size() && ok; ++i)
            for (const auto& dep : nodes[i].after) {
                if (dep == "__begin__") continue;
                std::size_t d = std::stoul(dep.substr(1));
                ok = ok && pos[d] < pos[i];
            }
        if (ok) out.push_back(perm);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return out;
}

std::vector<RecipeNode> random_nodes(std::mt19937& rng, std::size_t n, double density) {
    std::bernoulli_distribution edge(density);
    std::vector<RecipeNode> nodes;
    for (std::size_t i = 0; i < n; ++i) {
        RecipeNode node{"n" + std::to_string(i), "Act" + std::to_string(i), i % 2 ? Device::GPU : Device::CPU, {}};
        for (std::size_t j = 0; j < n; ++j)
            if (edge(rng)) node.after.push_back("n" + std::to_string(j));
        nodes.push_back(std::move(node));
    }
    return nodes;
}

}  // namespace

TEST_CASE("actions recipe has the documented edges") {
    const auto g = test::recipe("actions");
    const std::set<Edge> expected{{"__begin__", "action_1"}, {"action_1", "action_2"}, {"__begin__", "action_3"},
                                  {"action_3", "action_4"},  {"action_2", "action_4"}, {"action_4", "__end__"}};
    CHECK(edges_of(g) == expected);
}

TEST_CASE("empty node list is begin to end only") {
    const auto g = load_recipe(R"({"name": "empty", "nodes": []})");
    CHECK(g.size() == 0);
    CHECK(topological_order(g).empty());
}

TEST_CASE("self loop is a cycle") {
    auto doc = read_text_file(test::data_dir() / "recipes" / "actions.json");
    auto pos = doc.find(R"("after": ["action_3", "action_2"])");
    REQUIRE(pos != std::string::npos);
    doc.replace(pos, std::string(R"("after": ["action_3", "action_2"])").size(), R"("after": ["action_4"])");
    try {
        load_recipe(doc);
        FAIL("expected CycleError");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::CycleError);
    }
}

TEST_CASE("malformed documents") {
    auto code = [](std::string_view doc) {
        try {
            load_recipe(doc);
        } catch (const Error& e) {
            return e.code();
        }
        return Errc::IoError;
    };
    CHECK(code("{") == Errc::ParseError);
    CHECK(code(R"({"name": "x"})") == Errc::ParseError);
    CHECK(code(R"({"name": "x", "nodes": [{"id": "a", "action": "A", "map_to": "FPGA"}]})") == Errc::UnknownDevice);
    CHECK(code(R"({"name": "x", "nodes": [{"id": "a", "action": "A", "map_to": "CPU", "after": ["b"]}]})") ==
          Errc::DanglingReference);
    CHECK(code(R"({"name": "x", "nodes": [{"id": "a", "action": "A", "map_to": "CPU"},
                                           {"id": "a", "action": "B", "map_to": "CPU"}]})") == Errc::InvalidRecipe);
    CHECK(code(R"({"name": "x", "nodes": [], "orchestration2": {}})") == Errc::ParseError);
}

TEST_CASE("topological order is the first valid order by document index") {
    const auto g = test::recipe("actions");
    CHECK(topological_order(g) == std::vector<std::string>{"action_1", "action_2", "action_3", "action_4"});

    std::vector<RecipeNode> nodes;
    for (const auto& n : g.nodes()) {
        RecipeNode m = n;
        for (auto& dep : m.after)
            if (dep != "__begin__") dep = "n" + std::to_string(*g.index_of(dep));
        nodes.push_back(m);
    }
    CHECK(topological_indices(g) == valid_orders(nodes).front());
}

TEST_CASE("single node and chain") {
    RecipeGraph one("one", {{"a", "A", Device::CPU, {}}});
    CHECK(topological_order(one) == std::vector<std::string>{"a"});
    RecipeGraph chain("chain", {{"c", "C", Device::CPU, {"b"}}, {"a", "A", Device::CPU, {}}, {"b", "B", Device::CPU, {"a"}}});
    CHECK(topological_order(chain) == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("render then load is identity") {
    for (const char* name : {"actions", "cellular_parallel", "cellular_sequential", "sedov_gpu"}) {
        const auto g = test::recipe(name);
        CHECK(load_recipe(render_recipe(g)) == g);
    }
}

TEST_CASE("cycle rejection matches brute force on random graphs") {
    std::mt19937 rng(7);
    int cyclic = 0, acyclic = 0;
    for (int trial = 0; trial < 400; ++trial) {
        const std::size_t n = 1 + trial % 6;
        auto nodes = random_nodes(rng, n, 0.25);
        const auto orders = valid_orders(nodes);
        bool threw = false;
        try {
            RecipeGraph g("r", nodes);
            const auto order = topological_indices(g);
            REQUIRE(!orders.empty());
            CHECK(order == orders.front());
            CHECK(topological_indices(g) == order);
        } catch (const Error& e) {
            CHECK(e.code() == Errc::CycleError);
            threw = true;
        }
        CHECK(threw == orders.empty());
        (threw ? cyclic : acyclic)++;
    }
    CHECK(cyclic > 20);
    CHECK(acyclic > 20);
}
