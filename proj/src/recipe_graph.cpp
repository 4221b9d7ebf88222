#include "orcha/recipe_graph.hpp"

#include "orcha/error.hpp"

#include <json.hpp>

#include <queue>
#include <set>

namespace orcha {

using nlohmann::json;

std::string_view to_string(Device device) {
    return device == Device::GPU ? "GPU" : "CPU";
}

std::optional<Device> try_parse_device(std::string_view name) {
    if (name == "CPU") return Device::CPU;
    if (name == "GPU") return Device::GPU;
    return std::nullopt;
}

Device parse_device(std::string_view name) {
    if (auto d = try_parse_device(name)) return *d;
    throw Error(Errc::UnknownDevice, "unregistered device target '" + std::string(name) + "'");
}

RecipeGraph::RecipeGraph(std::string name, std::vector<RecipeNode> nodes,
                         std::map<std::string, std::string> merges)
    : name_(std::move(name)), nodes_(std::move(nodes)), merges_(std::move(merges)) {
    const std::size_t n = nodes_.size();
    std::map<std::string, std::size_t, std::less<>> ids;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& node = nodes_[i];
        if (node.id.empty()) throw Error(Errc::InvalidRecipe, "node with empty id");
        if (node.id.rfind("__", 0) == 0)
            throw Error(Errc::InvalidRecipe, "node id '" + node.id + "' uses the reserved '__' prefix");
        if (node.action.empty()) throw Error(Errc::InvalidRecipe, "node '" + node.id + "' has an empty action");
        if (!ids.emplace(node.id, i).second)
            throw Error(Errc::InvalidRecipe, "duplicate node id '" + node.id + "'");
    }

    preds_.assign(n, {});
    succs_.assign(n, {});
    from_begin_.assign(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& node = nodes_[i];
        if (node.after.empty()) from_begin_[i] = true;
        std::set<std::size_t> seen;
        for (const auto& dep : node.after) {
            if (dep == kBeginId) {
                from_begin_[i] = true;
                continue;
            }
            auto it = ids.find(dep);
            if (it == ids.end())
                throw Error(Errc::DanglingReference, "node '" + node.id + "' is after unknown node '" + dep + "'");
            if (seen.insert(it->second).second) preds_[i].push_back(it->second);
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        for (auto p : preds_[i]) succs_[p].push_back(i);

    // cycle check: every node must be emitted by Kahn's algorithm
    std::vector<std::size_t> indegree(n);
    for (std::size_t i = 0; i < n; ++i) indegree[i] = preds_[i].size();
    std::vector<std::size_t> stack;
    for (std::size_t i = 0; i < n; ++i)
        if (indegree[i] == 0) stack.push_back(i);
    std::size_t emitted = 0;
    while (!stack.empty()) {
        auto v = stack.back();
        stack.pop_back();
        ++emitted;
        for (auto s : succs_[v])
            if (--indegree[s] == 0) stack.push_back(s);
    }
    if (emitted != n) {
        std::string members;
        for (std::size_t i = 0; i < n; ++i)
            if (indegree[i] != 0) members += (members.empty() ? "" : ", ") + nodes_[i].id;
        throw Error(Errc::CycleError, "dependency cycle through {" + members + "}");
    }
    // a node with only cyclic predecessors would be unreachable from begin;
    // acyclicity plus the implicit begin edge rules that out.

    for (const auto& [at, kernel] : merges_) {
        if (kernel.empty()) throw Error(Errc::InvalidRecipe, "empty merge kernel for '" + at + "'");
        if (at != kEndId && !ids.count(at))
            throw Error(Errc::DanglingReference, "merge registered at unknown node '" + at + "'");
    }
}

std::optional<std::size_t> RecipeGraph::index_of(std::string_view id) const {
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (nodes_[i].id == id) return i;
    return std::nullopt;
}

namespace {

template <typename T>
T required(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key))
        throw Error(Errc::ParseError, where + ": missing key '" + key + "'");
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw Error(Errc::ParseError, where + ": bad value for '" + key + "': " + e.what());
    }
}

}  // namespace

RecipeGraph load_recipe(std::string_view document) {
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::parse_error& e) {
        throw Error(Errc::ParseError, e.what());
    }
    if (!doc.is_object()) throw Error(Errc::ParseError, "recipe document must be an object");
    for (const auto& [key, value] : doc.items()) {
        if (key != "name" && key != "nodes" && key != "merges")
            throw Error(Errc::ParseError, "unknown recipe key '" + key + "' (one orchestration block per recipe)");
    }
    auto name = required<std::string>(doc, "name", "recipe");
    if (!doc.contains("nodes") || !doc["nodes"].is_array())
        throw Error(Errc::ParseError, "recipe: 'nodes' must be an array");

    std::vector<RecipeNode> nodes;
    for (std::size_t i = 0; i < doc["nodes"].size(); ++i) {
        const auto& jn = doc["nodes"][i];
        const std::string where = "nodes[" + std::to_string(i) + "]";
        RecipeNode node;
        node.id = required<std::string>(jn, "id", where);
        node.action = required<std::string>(jn, "action", where);
        node.device = parse_device(required<std::string>(jn, "map_to", where));
        if (jn.contains("after")) {
            if (jn["after"].is_string())
                node.after.push_back(jn["after"].get<std::string>());
            else
                node.after = required<std::vector<std::string>>(jn, "after", where);
        }
        nodes.push_back(std::move(node));
    }
    std::map<std::string, std::string> merges;
    if (doc.contains("merges")) merges = required<std::map<std::string, std::string>>(doc, "merges", "recipe");
    return RecipeGraph(std::move(name), std::move(nodes), std::move(merges));
}

std::string render_recipe(const RecipeGraph& graph) {
    json doc;
    doc["name"] = graph.name();
    doc["nodes"] = json::array();
    for (const auto& node : graph.nodes()) {
        json jn;
        jn["id"] = node.id;
        jn["action"] = node.action;
        jn["map_to"] = std::string(to_string(node.device));
        jn["after"] = node.after;
        doc["nodes"].push_back(std::move(jn));
    }
    if (!graph.merges().empty()) doc["merges"] = graph.merges();
    return doc.dump(2) + "\n";
}

std::vector<std::size_t> topological_indices(const RecipeGraph& graph) {
    const std::size_t n = graph.size();
    std::vector<std::size_t> indegree(n);
    std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
    for (std::size_t i = 0; i < n; ++i) {
        indegree[i] = graph.predecessors(i).size();
        if (indegree[i] == 0) ready.push(i);
    }
    std::vector<std::size_t> order;
    order.reserve(n);
    while (!ready.empty()) {
        auto v = ready.top();
        ready.pop();
        order.push_back(v);
        for (auto s : graph.successors(v))
            if (--indegree[s] == 0) ready.push(s);
    }
    return order;
}

std::vector<std::string> topological_order(const RecipeGraph& graph) {
    std::vector<std::string> ids;
    for (auto i : topological_indices(graph)) ids.push_back(graph.nodes()[i].id);
    return ids;
}

}  // namespace orcha
