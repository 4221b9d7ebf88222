#pragma once

#include "orcha/macro.hpp"
#include "orcha/planner.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace orcha {

/// Text with `_param:NAME` value slots and `_link:SLOT` child slots. A link
/// slot alone on its line indents every line of every child by the slot's
/// indentation; with no children that line disappears.
class Template {
public:
    struct Param {
        std::string name;
    };
    struct Link {
        std::string name;
        std::string indent;  // non-empty only for a slot alone on its line
        bool own_line = false;
    };
    using Segment = std::variant<std::string, Param, Link>;

    Template() = default;
    Template(std::string name, std::string_view text);

    const std::string& name() const { return name_; }
    const std::vector<Segment>& segments() const { return segments_; }
    std::vector<std::string> param_names() const;
    std::vector<std::string> link_names() const;

private:
    std::string name_;
    std::vector<Segment> segments_;
};

/// Named templates plus the macro definitions applied to their bodies.
class TemplateLibrary {
public:
    void add(std::string name, std::string text) { raw_[std::move(name)] = std::move(text); }
    bool contains(std::string_view name) const { return raw_.count(std::string(name)) != 0; }
    const std::string& raw(std::string_view name) const;

    DefinitionSet& macros() { return macros_; }
    const DefinitionSet& macros() const { return macros_; }

    /// Template body after macro expansion under `qualifiers`.
    Template instantiate(std::string_view name, const QualifierPath& qualifiers) const;

    /// Built-in templates and macros.
    static TemplateLibrary defaults();
    /// Defaults overridden by every `*.tpl` (and `*.macros`) file in `dir`.
    static TemplateLibrary from_directory(const std::filesystem::path& dir);

private:
    std::map<std::string, std::string> raw_;
    DefinitionSet macros_;
};

struct SourceNode {
    Template tmpl;
    std::map<std::string, std::string> params;
    std::map<std::string, std::vector<SourceNode>> links;
};

/// Parameterized source tree for one task function.
struct SourceTree {
    std::string tf_id;
    SourceNode root;
};

SourceTree build_tree(const TaskFunction& tf, const TemplateLibrary& templates);
std::string render(const SourceTree& tree);
std::string render(const SourceNode& node);

/// Lowest-level plan the runtime interprets.
struct ExecutablePlan {
    struct Call {
        std::string routine;
        std::vector<std::string> args;  // consolidated entry names
        bool operator==(const Call&) const = default;
    };
    struct Function {
        TaskFunction tf;
        std::vector<Call> calls;
        bool operator==(const Function&) const = default;
    };
    struct Mover {
        std::string from, to;
        bool operator==(const Mover&) const = default;
    };
    struct Duplicate {
        std::vector<std::string> targets;
        bool operator==(const Duplicate&) const = default;
    };
    struct Merge {
        std::string at;
        std::vector<std::string> inputs;
        std::string kernel;  // empty when no kernel was registered
        bool operator==(const Merge&) const = default;
    };

    std::string name;
    std::vector<Function> functions;
    std::vector<Mover> movers;
    std::vector<Duplicate> duplicates;
    std::vector<Merge> merges;
    PlanGraph graph;
    PipelinePlan topology;

    bool empty() const { return functions.empty(); }
    const Function& function(std::size_t tf_index) const { return functions[tf_index]; }
};

ExecutablePlan emit_plan(const PlanGraph& plan);
std::string render_executable_plan(const ExecutablePlan& plan);
ExecutablePlan load_executable_plan(std::string_view document);

/// Writes `<out>/<tf>.glue` for every task function plus `<out>/plan.json`.
void write_generated(const ExecutablePlan& plan, const TemplateLibrary& templates, const std::filesystem::path& out);

}  // namespace orcha
