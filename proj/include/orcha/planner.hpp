#pragma once

#include "orcha/annotation.hpp"
#include "orcha/recipe_graph.hpp"

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace orcha {

struct ExternalEntry {
    std::string name;
    ScalarKind kind = ScalarKind::Real;
    bool operator==(const ExternalEntry&) const = default;
};

struct GridEntry {
    Structure structure = Structure::Center;
    std::set<std::string> variables_in;
    std::set<std::string> variables_out;
    bool operator==(const GridEntry&) const = default;
};

struct ScratchEntry {
    std::string name;
    Scratch shape;
    bool operator==(const ScratchEntry&) const = default;
};

/// Deduplicated union of the data needed by every routine of a task
/// function. Entries are ordered externals, tile metadata, grid data,
/// scratch; alphabetical within each group.
struct ConsolidatedArgSpec {
    std::vector<ExternalEntry> externals;
    std::vector<MetaKind> tile_metadata;
    std::vector<GridEntry> grid_data;
    std::vector<ScratchEntry> scratch;
    /// bindings[r][a] is the consolidated entry name that argument `a` of
    /// routine `r` reads from.
    std::vector<std::vector<std::string>> bindings;

    /// Names of all entries in canonical order.
    std::vector<std::string> entry_names() const;
    std::size_t entry_count() const {
        return externals.size() + tile_metadata.size() + grid_data.size() + scratch.size();
    }
    const GridEntry* grid(Structure s) const;
    const ScratchEntry* find_scratch(std::string_view name) const;

    /// Entry equality ignoring bindings.
    bool same_entries(const ConsolidatedArgSpec& other) const {
        return externals == other.externals && tile_metadata == other.tile_metadata &&
               grid_data == other.grid_data && scratch == other.scratch;
    }
    bool operator==(const ConsolidatedArgSpec&) const = default;
};

std::string entry_name(const ExternalEntry& e);
std::string entry_name(MetaKind k);
std::string entry_name(const GridEntry& g);
std::string entry_name(const ScratchEntry& s);

ConsolidatedArgSpec consolidate(const std::vector<RoutineSpec>& routines);

enum class DataItemKind { DataPacket, TileWrapper };
std::string_view to_string(DataItemKind kind);

inline DataItemKind data_item_for(Device device) {
    return device == Device::GPU ? DataItemKind::DataPacket : DataItemKind::TileWrapper;
}

struct TaskFunction {
    std::string id;
    Device device = Device::CPU;
    std::vector<std::string> routines;
    std::vector<std::string> node_ids;
    ConsolidatedArgSpec spec;
    DataItemKind data_item = DataItemKind::TileWrapper;
    bool operator==(const TaskFunction&) const = default;
};

enum class EdgeKind { HandOff, DeviceMover, Duplicate, Merge };
std::string_view to_string(EdgeKind kind);

/// Dataflow edge between task functions. The distributor is "__begin__", the
/// orchestration exit "__end__".
struct PlanEdge {
    std::string from;
    std::string to;
    EdgeKind kind = EdgeKind::HandOff;
    bool operator==(const PlanEdge&) const = default;
};

struct PlanGraph {
    std::string name;
    std::vector<TaskFunction> task_functions;
    std::vector<PlanEdge> edges;
    /// Join point (task function id or "__end__") -> merge kernel.
    std::map<std::string, std::string> merge_kernels;

    const TaskFunction* find(std::string_view id) const;
    std::optional<std::size_t> index_of(std::string_view id) const;
    bool operator==(const PlanGraph&) const = default;
};

/// Partition of recipe nodes into task-function groups, listed in creation
/// order, each group in execution order.
using Grouping = std::vector<std::vector<std::size_t>>;

class FusionStrategy {
public:
    virtual ~FusionStrategy() = default;
    virtual Grouping group(const RecipeGraph& graph) const = 0;
};

/// Walks nodes in topological order; a node joins the group of its
/// predecessors when it runs on the same device, all of its in-neighbors
/// already belong to that one group, and the contracted graph stays acyclic.
class GreedyFusion final : public FusionStrategy {
public:
    Grouping group(const RecipeGraph& graph) const override;
};

/// True if contracting each group of `grouping` leaves `graph` acyclic.
bool quotient_is_acyclic(const RecipeGraph& graph, const Grouping& grouping);

using SpecTable = std::map<std::string, RoutineSpec, std::less<>>;

PlanGraph fuse(const RecipeGraph& graph, const SpecTable& specs, const FusionStrategy& strategy = GreedyFusion{});

std::string render_plan(const PlanGraph& plan);
PlanGraph load_plan(std::string_view document);

/// Pipeline shape recognized by the runtime and the performance model: one
/// chain from the distributor, or several chains fed by block duplication that
/// meet in a single per-block merge barrier (at a task function or at exit),
/// optionally followed by one more chain.
struct PipelinePlan {
    struct Merge {
        std::string at;  // task function id or "__end__"
        std::optional<std::string> kernel;
    };

    std::vector<std::vector<std::size_t>> branches;  // task function indices
    bool duplicate = false;
    std::optional<Merge> merge;
    std::vector<std::size_t> tail;  // chain starting at the join task function
    std::vector<std::pair<std::size_t, std::size_t>> movers;  // GPU -> CPU hand-offs

    bool empty() const { return branches.empty(); }
};

PipelinePlan derive_topology(const PlanGraph& plan);

}  // namespace orcha
