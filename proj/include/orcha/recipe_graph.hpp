#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace orcha {

/// Execution target of an action. Identified by exact string match on its
/// name ("CPU", "GPU").
enum class Device { CPU, GPU };

std::string_view to_string(Device device);
Device parse_device(std::string_view name);
std::optional<Device> try_parse_device(std::string_view name);

inline constexpr std::string_view kBeginId = "__begin__";
inline constexpr std::string_view kEndId = "__end__";

struct RecipeNode {
    std::string id;
    std::string action;
    Device device = Device::CPU;
    std::vector<std::string> after;

    bool operator==(const RecipeNode&) const = default;
};

/// Validated control-flow DAG of one orchestration region. The begin and end
/// markers are implicit: a node listing "__begin__" (or nothing) in `after`
/// hangs off the begin marker; nodes without successors feed the end marker.
class RecipeGraph {
public:
    RecipeGraph() = default;
    RecipeGraph(std::string name, std::vector<RecipeNode> nodes,
                std::map<std::string, std::string> merges = {});

    const std::string& name() const { return name_; }
    const std::vector<RecipeNode>& nodes() const { return nodes_; }
    std::size_t size() const { return nodes_.size(); }

    /// Merge kernel registered for a join point (node id or "__end__").
    const std::map<std::string, std::string>& merges() const { return merges_; }

    std::optional<std::size_t> index_of(std::string_view id) const;

    /// Work-node predecessors of node `i` in document order (begin excluded).
    const std::vector<std::size_t>& predecessors(std::size_t i) const { return preds_[i]; }
    const std::vector<std::size_t>& successors(std::size_t i) const { return succs_[i]; }
    bool from_begin(std::size_t i) const { return from_begin_[i]; }
    bool to_end(std::size_t i) const { return succs_[i].empty(); }

    bool operator==(const RecipeGraph& other) const {
        return name_ == other.name_ && nodes_ == other.nodes_ && merges_ == other.merges_;
    }

private:
    std::string name_;
    std::vector<RecipeNode> nodes_;
    std::map<std::string, std::string> merges_;
    std::vector<std::vector<std::size_t>> preds_;
    std::vector<std::vector<std::size_t>> succs_;
    std::vector<bool> from_begin_;
};

RecipeGraph load_recipe(std::string_view document);
std::string render_recipe(const RecipeGraph& graph);

/// Kahn's algorithm; among ready nodes the one earliest in the document wins.
std::vector<std::string> topological_order(const RecipeGraph& graph);
std::vector<std::size_t> topological_indices(const RecipeGraph& graph);

}  // namespace orcha
