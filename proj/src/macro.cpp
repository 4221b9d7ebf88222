#include "orcha/macro.hpp"

#include "orcha/error.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace orcha {

std::string to_string(const QualifierPath& path) {
    std::string out;
    for (std::size_t i = 0; i < path.size(); ++i) out += (i ? "." : "") + path[i];
    return out;
}

QualifierPath parse_qualifier_path(std::string_view dotted) {
    QualifierPath path;
    std::size_t start = 0;
    for (;;) {
        auto dot = dotted.find('.', start);
        auto part = dotted.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start);
        if (part.empty()) throw Error(Errc::MacroSyntax, "empty component in qualifier path '" + std::string(dotted) + "'");
        path.emplace_back(part);
        if (dot == std::string_view::npos) break;
        start = dot + 1;
    }
    return path;
}

namespace {

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

/// Parameter names referenced as `$(p)` in a body.
std::set<std::string> referenced_params(std::string_view body) {
    std::set<std::string> refs;
    for (std::size_t i = 0; i + 1 < body.size(); ++i) {
        if (body[i] != '$' || body[i + 1] != '(') continue;
        auto close = body.find(')', i + 2);
        if (close == std::string_view::npos) throw Error(Errc::MacroSyntax, "unterminated '$(' in body");
        refs.emplace(body.substr(i + 2, close - i - 2));
        i = close;
    }
    return refs;
}

const QualifierPath kDefault{"default"};

}  // namespace

void DefinitionSet::add(MacroDefinition def) {
    if (def.name.empty() || !is_ident_start(def.name.front()) ||
        !std::all_of(def.name.begin(), def.name.end(), is_ident))
        throw Error(Errc::MacroSyntax, "invalid macro name '" + def.name + "'");
    if (def.qualifiers.empty()) throw Error(Errc::MacroSyntax, def.name + ": empty qualifier path");
    std::set<std::string> seen;
    for (const auto& p : def.params)
        if (!seen.insert(p).second) throw Error(Errc::MacroSyntax, def.name + ": parameter '" + p + "' repeated");
    for (const auto& ref : referenced_params(def.body))
        if (!seen.count(ref)) throw Error(Errc::MacroSyntax, def.name + ": body references undeclared '$(" + ref + ")'");
    auto& list = definitions_[def.name];
    if (std::find(list.begin(), list.end(), def) == list.end()) list.push_back(std::move(def));
}

void DefinitionSet::inherit(const QualifierPath& child, const QualifierPath& parent) {
    if (child.empty() || parent.empty()) throw Error(Errc::InheritanceError, "empty qualifier path");
    if (child == kDefault) throw Error(Errc::InheritanceError, "the default path cannot inherit");
    auto previous = inheritance_.find(child);
    if (previous != inheritance_.end() && previous->second != parent)
        throw Error(Errc::InheritanceError, to_string(child) + " already inherits from " + to_string(previous->second));
    inheritance_[child] = parent;
    // walk up from the new parent; reaching the child again is a cycle
    QualifierPath cur = parent;
    for (int guard = 0; cur != kDefault; ++guard) {
        if (cur == child || guard > 1000) {
            inheritance_.erase(child);
            throw Error(Errc::InheritanceError, "inheritance cycle through " + to_string(child));
        }
        cur = parent_of(cur);
    }
}

const std::vector<MacroDefinition>* DefinitionSet::candidates(std::string_view name) const {
    auto it = definitions_.find(name);
    return it == definitions_.end() ? nullptr : &it->second;
}

QualifierPath DefinitionSet::parent_of(const QualifierPath& path) const {
    if (auto it = inheritance_.find(path); it != inheritance_.end()) return it->second;
    if (path.size() > 1) return QualifierPath(path.begin(), path.end() - 1);
    return kDefault;
}

const MacroDefinition& arbitrate(const DefinitionSet& set, std::string_view name, const QualifierPath& active) {
    const auto* list = set.candidates(name);
    if (!list) throw Error(Errc::Undefined, "macro '" + std::string(name) + "' is not defined");
    QualifierPath cur = active.empty() ? kDefault : active;
    for (;;) {
        const MacroDefinition* found = nullptr;
        for (const auto& def : *list) {
            if (def.qualifiers != cur) continue;
            if (found)
                throw Error(Errc::Ambiguous,
                            "macro '" + std::string(name) + "' has several definitions at [" + to_string(cur) + "]");
            found = &def;
        }
        if (found) return *found;
        if (cur == kDefault) break;
        cur = set.parent_of(cur);
    }
    throw Error(Errc::Undefined,
                "macro '" + std::string(name) + "' has no definition visible from [" + to_string(active) + "]");
}

namespace {

struct Call {
    std::string name;
    std::vector<std::string> args;
    std::size_t end = 0;  // one past ')'
};

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

/// Parses `@NAME(args)` at `at` (pointing at '@'). Returns nullopt when the
/// '@' does not start an invocation.
std::optional<Call> parse_call(std::string_view text, std::size_t at) {
    std::size_t i = at + 1;
    if (i >= text.size() || !is_ident_start(text[i])) return std::nullopt;
    while (i < text.size() && is_ident(text[i])) ++i;
    if (i >= text.size() || text[i] != '(') return std::nullopt;
    Call call;
    call.name = std::string(text.substr(at + 1, i - at - 1));
    int depth = 0;
    std::size_t arg_start = i + 1;
    for (std::size_t j = i; j < text.size(); ++j) {
        char c = text[j];
        if (c == '(') {
            ++depth;
        } else if (c == ')') {
            if (--depth == 0) {
                auto last = trim(text.substr(arg_start, j - arg_start));
                if (!call.args.empty() || !last.empty()) call.args.emplace_back(last);
                call.end = j + 1;
                return call;
            }
        } else if (c == ',' && depth == 1) {
            call.args.emplace_back(trim(text.substr(arg_start, j - arg_start)));
            arg_start = j + 1;
        }
    }
    throw Error(Errc::MacroSyntax, "unbalanced parentheses in invocation of '" + call.name + "'");
}

std::string substitute(const MacroDefinition& def, const std::vector<std::string>& args) {
    std::string out;
    const auto& body = def.body;
    for (std::size_t i = 0; i < body.size(); ++i) {
        if (body[i] == '$' && i + 1 < body.size() && body[i + 1] == '(') {
            auto close = body.find(')', i + 2);
            auto name = body.substr(i + 2, close - i - 2);
            auto it = std::find(def.params.begin(), def.params.end(), name);
            out += args[static_cast<std::size_t>(it - def.params.begin())];
            i = close;
        } else {
            out += body[i];
        }
    }
    return out;
}

std::string expand_chain(const DefinitionSet& set, std::string_view text, const QualifierPath& active,
                         std::vector<std::string>& chain) {
    if (chain.size() > static_cast<std::size_t>(kMacroRecursionLimit))
        throw Error(Errc::RecursionLimit, "macro expansion nested deeper than " + std::to_string(kMacroRecursionLimit));
    std::string out;
    std::size_t i = 0;
    while (i < text.size()) {
        auto at = text.find('@', i);
        if (at == std::string_view::npos) {
            out.append(text.substr(i));
            break;
        }
        out.append(text.substr(i, at - i));
        auto call = parse_call(text, at);
        if (!call) {
            out += '@';
            i = at + 1;
            continue;
        }
        if (std::find(chain.begin(), chain.end(), call->name) != chain.end()) {
            std::string path;
            for (const auto& c : chain) path += c + " -> ";
            throw Error(Errc::SelfReference, "macro '" + call->name + "' refers to itself (" + path + call->name + ")");
        }
        const auto& def = arbitrate(set, call->name, active);
        if (call->args.size() != def.params.size())
            throw Error(Errc::ArityMismatch, "macro '" + call->name + "' takes " + std::to_string(def.params.size()) +
                                                 " argument(s), got " + std::to_string(call->args.size()));
        std::vector<std::string> args;
        for (const auto& a : call->args) args.push_back(expand_chain(set, a, active, chain));
        chain.push_back(call->name);
        out += expand_chain(set, substitute(def, args), active, chain);
        chain.pop_back();
        i = call->end;
    }
    return out;
}

}  // namespace

std::string expand(const DefinitionSet& set, std::string_view text, const QualifierPath& active) {
    std::vector<std::string> chain;
    return expand_chain(set, text, active, chain);
}

DefinitionSet parse_definitions(std::string_view text) {
    // join continuation lines first, remembering the starting line number
    std::vector<std::pair<std::size_t, std::string>> lines;
    {
        std::size_t line_no = 0, pos = 0;
        std::string pending;
        std::size_t pending_line = 0;
        bool continuing = false;
        while (pos <= text.size()) {
            auto nl = text.find('\n', pos);
            std::string line(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
            pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!continuing) pending_line = line_no;
            const bool more = !line.empty() && line.back() == '\\';
            if (more) {
                line.pop_back();
                while (!line.empty() && (line.back() == ' ' || line.back() == '\t')) line.pop_back();
            }
            pending += continuing ? "\n" + line : line;
            continuing = more;
            if (!continuing) {
                lines.emplace_back(pending_line, std::move(pending));
                pending.clear();
            }
        }
        if (continuing) lines.emplace_back(pending_line, std::move(pending));
    }

    DefinitionSet set;
    QualifierPath section{"default"};
    for (const auto& [line_no, raw] : lines) {
        auto fail = [&, line_no = line_no](const std::string& why) {
            return Error(Errc::MacroSyntax, "line " + std::to_string(line_no) + ": " + why);
        };
        auto line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw fail("unterminated section header");
            section = parse_qualifier_path(trim(line.substr(1, line.size() - 2)));
            continue;
        }
        if (line.rfind("inherit ", 0) == 0) {
            set.inherit(section, parse_qualifier_path(trim(line.substr(8))));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string_view::npos) throw fail("expected 'NAME(params) = body'");
        auto head = trim(line.substr(0, eq));
        auto open = head.find('(');
        if (open == std::string_view::npos || head.back() != ')') throw fail("expected 'NAME(params)'");
        MacroDefinition def;
        def.name = std::string(trim(head.substr(0, open)));
        auto params = head.substr(open + 1, head.size() - open - 2);
        if (!trim(params).empty()) {
            std::size_t start = 0;
            for (;;) {
                auto comma = params.find(',', start);
                def.params.emplace_back(
                    trim(params.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
                if (comma == std::string_view::npos) break;
                start = comma + 1;
            }
        }
        def.body = std::string(trim(line.substr(eq + 1)));
        def.qualifiers = section;
        set.add(std::move(def));
    }
    return set;
}

}  // namespace orcha
