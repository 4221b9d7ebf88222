#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace orcha {

using QualifierPath = std::vector<std::string>;

std::string to_string(const QualifierPath& path);  // "gpu.tiled"
QualifierPath parse_qualifier_path(std::string_view dotted);

struct MacroDefinition {
    std::string name;
    std::vector<std::string> params;
    std::string body;  // `$(param)` substitutes, `@NAME(args)` invokes
    QualifierPath qualifiers{"default"};

    bool operator==(const MacroDefinition&) const = default;
};

/// Macro definitions scoped by qualifier path, with an inheritance forest
/// between paths. A path without an explicit parent inherits from its prefix
/// (["gpu","tiled"] -> ["gpu"]) and single-element paths from ["default"].
class DefinitionSet {
public:
    /// Throws MacroSyntax for repeated parameters or references to undeclared
    /// parameters. Re-adding an identical definition is a no-op.
    void add(MacroDefinition def);

    /// Throws InheritanceError on cycles.
    void inherit(const QualifierPath& child, const QualifierPath& parent);

    const std::vector<MacroDefinition>* candidates(std::string_view name) const;
    QualifierPath parent_of(const QualifierPath& path) const;
    bool defines(std::string_view name) const { return candidates(name) != nullptr; }

private:
    std::map<std::string, std::vector<MacroDefinition>, std::less<>> definitions_;
    std::map<QualifierPath, QualifierPath> inheritance_;
};

/// Picks the definition of `name` visible from `active`: the active path
/// itself first, then each ancestor toward ["default"].
const MacroDefinition& arbitrate(const DefinitionSet& set, std::string_view name, const QualifierPath& active);

/// Expands every `@NAME(args)` in `text` until none remain.
std::string expand(const DefinitionSet& set, std::string_view text, const QualifierPath& active);

inline constexpr int kMacroRecursionLimit = 64;

/// Definition file format:
///
///     # comment
///     [gpu.tiled]
///     inherit gpu
///     NAME(a, b) = body with $(a) and @OTHER()
///
/// A trailing backslash continues a definition on the next line; whitespace
/// before the backslash is dropped.
DefinitionSet parse_definitions(std::string_view text);

}  // namespace orcha
