#include "orcha/planner.hpp"

#include "orcha/error.hpp"
#include "orcha/extent_expr.hpp"

#include <json.hpp>

#include <algorithm>

namespace orcha {

using nlohmann::json;

std::string entry_name(const ExternalEntry& e) { return e.name; }
std::string entry_name(MetaKind k) { return "tile_" + std::string(to_string(k)); }
std::string entry_name(const GridEntry& g) { return "grid_" + std::string(to_string(g.structure)); }
std::string entry_name(const ScratchEntry& s) { return "scratch_" + s.name; }

std::vector<std::string> ConsolidatedArgSpec::entry_names() const {
    std::vector<std::string> names;
    for (const auto& e : externals) names.push_back(entry_name(e));
    for (auto k : tile_metadata) names.push_back(entry_name(k));
    for (const auto& g : grid_data) names.push_back(entry_name(g));
    for (const auto& s : scratch) names.push_back(entry_name(s));
    return names;
}

const GridEntry* ConsolidatedArgSpec::grid(Structure s) const {
    for (const auto& g : grid_data)
        if (g.structure == s) return &g;
    return nullptr;
}

const ScratchEntry* ConsolidatedArgSpec::find_scratch(std::string_view name) const {
    for (const auto& s : scratch)
        if (s.name == name) return &s;
    return nullptr;
}

std::string_view to_string(DataItemKind kind) {
    return kind == DataItemKind::DataPacket ? "DataPacket" : "TileWrapper";
}

std::string_view to_string(EdgeKind kind) {
    switch (kind) {
        case EdgeKind::HandOff: return "hand_off";
        case EdgeKind::DeviceMover: return "device_mover";
        case EdgeKind::Duplicate: return "duplicate";
        case EdgeKind::Merge: return "merge";
    }
    return "hand_off";
}

namespace {

bool same_shape(const Scratch& a, const Scratch& b) {
    auto norm = [](const std::vector<std::string>& v) {
        std::vector<std::string> out;
        for (const auto& e : v) out.push_back(normalize_extent(e));
        return out;
    };
    return norm(a.extents) == norm(b.extents) && norm(a.lbound) == norm(b.lbound);
}

std::string join(const std::vector<std::string>& v, const char* sep) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
    return out;
}

}  // namespace

ConsolidatedArgSpec consolidate(const std::vector<RoutineSpec>& routines) {
    std::map<std::string, ScalarKind> externals;
    std::map<std::string, MetaKind> metadata;
    std::map<std::string, GridEntry> grids;
    std::map<std::string, ScratchEntry> scratch;

    ConsolidatedArgSpec out;
    for (const auto& routine : routines) {
        std::vector<std::string> binding;
        for (const auto& arg : routine.arguments) {
            std::visit(
                [&](const auto& src) {
                    using T = std::decay_t<decltype(src)>;
                    if constexpr (std::is_same_v<T, External>) {
                        auto [it, inserted] = externals.emplace(arg.name, src.kind);
                        if (!inserted && it->second != src.kind)
                            throw Error(Errc::ConflictingExternalKind,
                                        "external '" + arg.name + "' is " + std::string(to_string(it->second)) +
                                            " in one routine and " + std::string(to_string(src.kind)) + " in '" +
                                            routine.name + "'");
                        binding.push_back(entry_name(ExternalEntry{arg.name, src.kind}));
                    } else if constexpr (std::is_same_v<T, TileMetadata>) {
                        metadata.emplace(std::string(to_string(src.kind)), src.kind);
                        binding.push_back(entry_name(src.kind));
                    } else if constexpr (std::is_same_v<T, GridData>) {
                        auto& g = grids[std::string(to_string(src.structure))];
                        g.structure = src.structure;
                        g.variables_in.insert(src.variables_in.begin(), src.variables_in.end());
                        g.variables_out.insert(src.variables_out.begin(), src.variables_out.end());
                        binding.push_back(entry_name(g));
                    } else {
                        auto [it, inserted] = scratch.emplace(arg.name, ScratchEntry{arg.name, src});
                        if (!inserted && !same_shape(it->second.shape, src))
                            throw Error(Errc::ConflictingScratchExtents,
                                        "scratch '" + arg.name + "' declared as [" +
                                            join(it->second.shape.extents, ", ") + "] and [" +
                                            join(src.extents, ", ") + "] (in '" + routine.name + "')");
                        binding.push_back(entry_name(it->second));
                    }
                },
                arg.source);
        }
        out.bindings.push_back(std::move(binding));
    }
    for (const auto& [name, kind] : externals) out.externals.push_back(ExternalEntry{name, kind});
    for (const auto& [name, kind] : metadata) out.tile_metadata.push_back(kind);
    for (auto& [name, g] : grids) out.grid_data.push_back(std::move(g));
    for (auto& [name, s] : scratch) out.scratch.push_back(std::move(s));
    return out;
}

const TaskFunction* PlanGraph::find(std::string_view id) const {
    for (const auto& tf : task_functions)
        if (tf.id == id) return &tf;
    return nullptr;
}

std::optional<std::size_t> PlanGraph::index_of(std::string_view id) const {
    for (std::size_t i = 0; i < task_functions.size(); ++i)
        if (task_functions[i].id == id) return i;
    return std::nullopt;
}

bool quotient_is_acyclic(const RecipeGraph& graph, const Grouping& grouping) {
    constexpr auto kUnplaced = static_cast<std::size_t>(-1);
    std::vector<std::size_t> group_of(graph.size(), kUnplaced);
    for (std::size_t g = 0; g < grouping.size(); ++g)
        for (auto v : grouping[g]) group_of[v] = g;
    // nodes outside the grouping count as singletons
    std::size_t n = grouping.size();
    for (auto& g : group_of)
        if (g == kUnplaced) g = n++;
    std::vector<std::set<std::size_t>> succ(n);
    for (std::size_t v = 0; v < graph.size(); ++v)
        for (auto s : graph.successors(v))
            if (group_of[v] != group_of[s]) succ[group_of[v]].insert(group_of[s]);
    std::vector<std::size_t> indegree(n, 0);
    for (const auto& s : succ)
        for (auto t : s) ++indegree[t];
    std::vector<std::size_t> ready;
    for (std::size_t i = 0; i < n; ++i)
        if (indegree[i] == 0) ready.push_back(i);
    std::size_t seen = 0;
    while (!ready.empty()) {
        auto g = ready.back();
        ready.pop_back();
        ++seen;
        for (auto t : succ[g])
            if (--indegree[t] == 0) ready.push_back(t);
    }
    return seen == n;
}

Grouping GreedyFusion::group(const RecipeGraph& graph) const {
    Grouping groups;
    std::vector<std::size_t> group_of(graph.size(), 0);
    std::vector<Device> group_device;
    for (auto v : topological_indices(graph)) {
        const auto& node = graph.nodes()[v];
        const auto& preds = graph.predecessors(v);
        bool joined = false;
        if (!graph.from_begin(v) && !preds.empty()) {
            const auto target = group_of[preds.front()];
            const bool all_in = std::all_of(preds.begin(), preds.end(),
                                            [&](std::size_t p) { return group_of[p] == target; });
            if (all_in && group_device[target] == node.device) {
                groups[target].push_back(v);
                group_of[v] = target;
                if (quotient_is_acyclic(graph, groups)) {
                    joined = true;
                } else {
                    groups[target].pop_back();
                }
            }
        }
        if (!joined) {
            group_of[v] = groups.size();
            groups.push_back({v});
            group_device.push_back(node.device);
        }
    }
    return groups;
}

namespace {

std::string tf_label(std::size_t i) {
    std::string s;
    ++i;
    while (i > 0) {
        --i;
        s.insert(s.begin(), static_cast<char>('A' + i % 26));
        i /= 26;
    }
    return "TF_" + s;
}

}  // namespace

PlanGraph fuse(const RecipeGraph& graph, const SpecTable& specs, const FusionStrategy& strategy) {
    for (const auto& node : graph.nodes()) {
        auto it = specs.find(node.action);
        if (it == specs.end())
            throw Error(Errc::MissingRoutineSpec, "no annotated routine named '" + node.action + "'");
        if (!it->second.device_variants.count(node.device))
            throw Error(Errc::DeviceVariantUnavailable, "routine '" + node.action + "' has no " +
                                                             std::string(to_string(node.device)) + " variant");
    }

    const auto groups = strategy.group(graph);
    if (!quotient_is_acyclic(graph, groups))
        throw Error(Errc::CycleError, "fusion produced a cyclic task-function graph");

    PlanGraph plan;
    plan.name = graph.name();
    std::vector<std::size_t> group_of(graph.size(), 0);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        TaskFunction tf;
        tf.id = tf_label(g);
        tf.device = graph.nodes()[groups[g].front()].device;
        tf.data_item = data_item_for(tf.device);
        std::vector<RoutineSpec> members;
        for (auto v : groups[g]) {
            const auto& node = graph.nodes()[v];
            if (node.device != tf.device)
                throw Error(Errc::InvalidRecipe, "fusion strategy mixed devices in " + tf.id);
            group_of[v] = g;
            tf.routines.push_back(node.action);
            tf.node_ids.push_back(node.id);
            members.push_back(specs.find(node.action)->second);
        }
        tf.spec = consolidate(members);
        plan.task_functions.push_back(std::move(tf));
    }

    // Quotient edges in deterministic order: distributor edges, then by source
    // group and target group.
    std::set<std::pair<std::size_t, std::size_t>> tf_edges;
    std::set<std::size_t> roots, sinks;
    for (std::size_t v = 0; v < graph.size(); ++v) {
        if (graph.from_begin(v)) roots.insert(group_of[v]);
        if (graph.to_end(v)) sinks.insert(group_of[v]);
        for (auto s : graph.successors(v))
            if (group_of[v] != group_of[s]) tf_edges.emplace(group_of[v], group_of[s]);
    }
    std::vector<std::size_t> indegree(groups.size(), 0);
    for (const auto& [a, b] : tf_edges) ++indegree[b];

    const auto& tfs = plan.task_functions;
    for (auto r : roots)
        plan.edges.push_back({std::string(kBeginId), tfs[r].id, roots.size() > 1 ? EdgeKind::Duplicate : EdgeKind::HandOff});
    for (const auto& [a, b] : tf_edges) {
        EdgeKind kind = EdgeKind::HandOff;
        if (tfs[a].device == Device::GPU && tfs[b].device == Device::CPU) kind = EdgeKind::DeviceMover;
        else if (indegree[b] + (roots.count(b) ? 1 : 0) > 1) kind = EdgeKind::Merge;
        plan.edges.push_back({tfs[a].id, tfs[b].id, kind});
    }
    for (auto s : sinks)
        plan.edges.push_back({tfs[s].id, std::string(kEndId), sinks.size() > 1 ? EdgeKind::Merge : EdgeKind::HandOff});

    for (const auto& [at, kernel] : graph.merges()) {
        if (at == kEndId) {
            plan.merge_kernels[std::string(kEndId)] = kernel;
        } else {
            auto v = *graph.index_of(at);
            plan.merge_kernels[tfs[group_of[v]].id] = kernel;
        }
    }
    return plan;
}

namespace {

json spec_to_json(const ConsolidatedArgSpec& spec) {
    json j;
    j["externals"] = json::array();
    for (const auto& e : spec.externals)
        j["externals"].push_back({{"name", e.name}, {"type", std::string(to_string(e.kind))}});
    j["tile_metadata"] = json::array();
    for (auto k : spec.tile_metadata) j["tile_metadata"].push_back(std::string(to_string(k)));
    j["grid_data"] = json::array();
    for (const auto& g : spec.grid_data)
        j["grid_data"].push_back(
            {{"structure", std::string(to_string(g.structure))}, {"in", g.variables_in}, {"out", g.variables_out}});
    j["scratch"] = json::array();
    for (const auto& s : spec.scratch)
        j["scratch"].push_back({{"name", s.name}, {"extents", s.shape.extents}, {"lbound", s.shape.lbound}});
    j["bindings"] = spec.bindings;
    return j;
}

template <typename Enum>
Enum parse_enum(const std::string& text, std::initializer_list<Enum> values) {
    for (auto v : values)
        if (to_string(v) == text) return v;
    throw Error(Errc::ParseError, "unexpected value '" + text + "' in plan document");
}

ConsolidatedArgSpec spec_from_json(const json& j) {
    ConsolidatedArgSpec spec;
    for (const auto& e : j.at("externals"))
        spec.externals.push_back({e.at("name").get<std::string>(),
                                  parse_enum(e.at("type").get<std::string>(), {ScalarKind::Real, ScalarKind::Integer})});
    for (const auto& k : j.at("tile_metadata"))
        spec.tile_metadata.push_back(parse_enum(
            k.get<std::string>(), {MetaKind::Lo, MetaKind::Hi, MetaKind::Deltas, MetaKind::Dt, MetaKind::BlockId}));
    for (const auto& g : j.at("grid_data"))
        spec.grid_data.push_back(
            {parse_enum(g.at("structure").get<std::string>(), {Structure::Center, Structure::FluxX, Structure::FluxY}),
             g.at("in").get<std::set<std::string>>(), g.at("out").get<std::set<std::string>>()});
    for (const auto& s : j.at("scratch"))
        spec.scratch.push_back({s.at("name").get<std::string>(),
                                Scratch{s.at("extents").get<std::vector<std::string>>(),
                                        s.at("lbound").get<std::vector<std::string>>()}});
    spec.bindings = j.at("bindings").get<std::vector<std::vector<std::string>>>();
    return spec;
}

}  // namespace

std::string render_plan(const PlanGraph& plan) {
    json doc;
    doc["name"] = plan.name;
    doc["task_functions"] = json::array();
    for (const auto& tf : plan.task_functions) {
        doc["task_functions"].push_back({{"id", tf.id},
                                         {"device", std::string(to_string(tf.device))},
                                         {"data_item", std::string(to_string(tf.data_item))},
                                         {"routines", tf.routines},
                                         {"nodes", tf.node_ids},
                                         {"spec", spec_to_json(tf.spec)}});
    }
    doc["edges"] = json::array();
    for (const auto& e : plan.edges)
        doc["edges"].push_back({{"from", e.from}, {"to", e.to}, {"kind", std::string(to_string(e.kind))}});
    doc["merge_kernels"] = plan.merge_kernels;
    return doc.dump(2) + "\n";
}

PlanGraph load_plan(std::string_view document) {
    try {
        auto doc = json::parse(document);
        PlanGraph plan;
        plan.name = doc.at("name").get<std::string>();
        for (const auto& jt : doc.at("task_functions")) {
            TaskFunction tf;
            tf.id = jt.at("id").get<std::string>();
            tf.device = parse_device(jt.at("device").get<std::string>());
            tf.data_item = parse_enum(jt.at("data_item").get<std::string>(),
                                      {DataItemKind::DataPacket, DataItemKind::TileWrapper});
            if (tf.data_item != data_item_for(tf.device))
                throw Error(Errc::ParseError, tf.id + ": data item does not match device");
            tf.routines = jt.at("routines").get<std::vector<std::string>>();
            tf.node_ids = jt.at("nodes").get<std::vector<std::string>>();
            tf.spec = spec_from_json(jt.at("spec"));
            plan.task_functions.push_back(std::move(tf));
        }
        for (const auto& je : doc.at("edges"))
            plan.edges.push_back({je.at("from").get<std::string>(), je.at("to").get<std::string>(),
                                  parse_enum(je.at("kind").get<std::string>(),
                                             {EdgeKind::HandOff, EdgeKind::DeviceMover, EdgeKind::Duplicate,
                                              EdgeKind::Merge})});
        plan.merge_kernels = doc.at("merge_kernels").get<std::map<std::string, std::string>>();
        return plan;
    } catch (const json::exception& e) {
        throw Error(Errc::ParseError, e.what());
    }
}

}  // namespace orcha
