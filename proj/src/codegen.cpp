#include "orcha/codegen.hpp"

#include "orcha/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace orcha {

namespace embedded {
std::string_view default_macros();
std::string_view template_taskfunction();
std::string_view template_extract_entry();
std::string_view template_call_entry();
}  // namespace embedded

using nlohmann::json;

namespace {

bool is_slot_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

}  // namespace

Template::Template(std::string name, std::string_view text) : name_(std::move(name)) {
    static constexpr std::string_view kParam = "_param:";
    static constexpr std::string_view kLink = "_link:";
    std::set<std::string> names;
    std::string literal;
    std::size_t i = 0;
    while (i < text.size()) {
        const bool param = text.substr(i, kParam.size()) == kParam;
        const bool link = !param && text.substr(i, kLink.size()) == kLink;
        if (!param && !link) {
            literal += text[i++];
            continue;
        }
        const std::size_t start = i + (param ? kParam.size() : kLink.size());
        std::size_t end = start;
        while (end < text.size() && is_slot_char(text[end])) ++end;
        if (end == start) throw Error(Errc::TemplateError, name_ + ": slot without a name");
        std::string slot(text.substr(start, end - start));
        if (!names.insert(slot).second) throw Error(Errc::TemplateError, name_ + ": slot '" + slot + "' repeated");

        if (param) {
            if (!literal.empty()) segments_.emplace_back(std::move(literal));
            literal.clear();
            segments_.emplace_back(Param{std::move(slot)});
            i = end;
            continue;
        }
        // A link alone on its line carries the line's indentation.
        const auto line_start = literal.find_last_of('\n') == std::string::npos ? 0 : literal.find_last_of('\n') + 1;
        const auto prefix = std::string_view(literal).substr(line_start);
        const bool blank_before = std::all_of(prefix.begin(), prefix.end(), [](char c) { return c == ' ' || c == '\t'; });
        std::size_t after = end;
        while (after < text.size() && (text[after] == ' ' || text[after] == '\t')) ++after;
        const bool blank_after = after == text.size() || text[after] == '\n';
        Link l{std::move(slot), {}, false};
        if (blank_before && blank_after) {
            l.indent = std::string(prefix);
            l.own_line = true;
            literal.erase(line_start);
            i = after < text.size() ? after + 1 : after;
        } else {
            i = end;
        }
        if (!literal.empty()) segments_.emplace_back(std::move(literal));
        literal.clear();
        segments_.emplace_back(std::move(l));
    }
    if (!literal.empty()) segments_.emplace_back(std::move(literal));
}

std::vector<std::string> Template::param_names() const {
    std::vector<std::string> out;
    for (const auto& s : segments_)
        if (auto p = std::get_if<Param>(&s)) out.push_back(p->name);
    return out;
}

std::vector<std::string> Template::link_names() const {
    std::vector<std::string> out;
    for (const auto& s : segments_)
        if (auto l = std::get_if<Link>(&s)) out.push_back(l->name);
    return out;
}

const std::string& TemplateLibrary::raw(std::string_view name) const {
    auto it = raw_.find(std::string(name));
    if (it == raw_.end()) throw Error(Errc::MissingTemplate, "template '" + std::string(name) + "' not in library");
    return it->second;
}

Template TemplateLibrary::instantiate(std::string_view name, const QualifierPath& qualifiers) const {
    return Template(std::string(name), expand(macros_, raw(name), qualifiers));
}

TemplateLibrary TemplateLibrary::defaults() {
    TemplateLibrary lib;
    lib.add("taskfunction", std::string(embedded::template_taskfunction()));
    lib.add("extract_entry", std::string(embedded::template_extract_entry()));
    lib.add("call_entry", std::string(embedded::template_call_entry()));
    lib.macros_ = parse_definitions(embedded::default_macros());
    return lib;
}

TemplateLibrary TemplateLibrary::from_directory(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw Error(Errc::IoError, "template directory '" + dir.string() + "' not found");
    auto lib = defaults();
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::string macro_text;
    for (const auto& path : files) {
        std::ifstream in(path);
        std::stringstream ss;
        ss << in.rdbuf();
        if (path.extension() == ".tpl") lib.add(path.stem().string(), ss.str());
        else if (path.extension() == ".macros") macro_text += ss.str() + "\n";
    }
    if (!macro_text.empty()) lib.macros_ = parse_definitions(macro_text);
    return lib;
}

namespace {

std::string device_qualifier(Device d) { return d == Device::GPU ? "gpu" : "cpu"; }

std::string entry_kind(const ConsolidatedArgSpec& spec, const std::string& entry) {
    for (const auto& e : spec.externals)
        if (entry_name(e) == entry) return "external";
    for (auto k : spec.tile_metadata)
        if (entry_name(k) == entry) return "metadata";
    for (const auto& g : spec.grid_data)
        if (entry_name(g) == entry) return "grid";
    return "scratch";
}

/// Comma-separated list, continued with " &" once a line passes `width`.
std::string wrap_args(const std::vector<std::string>& args, std::size_t width) {
    std::string out, line;
    for (std::size_t i = 0; i < args.size(); ++i) {
        std::string piece = args[i] + (i + 1 < args.size() ? ", " : "");
        if (!line.empty() && line.size() + piece.size() > width) {
            out += line;
            while (!out.empty() && out.back() == ' ') out.pop_back();
            out += " &\n      ";
            line.clear();
        }
        line += piece;
    }
    return out + line;
}

void check_bound(const SourceNode& node) {
    for (const auto& p : node.tmpl.param_names())
        if (!node.params.count(p))
            throw Error(Errc::UnboundSlot, "template '" + node.tmpl.name() + "': parameter '" + p + "' is unbound");
    for (const auto& l : node.tmpl.link_names())
        if (!node.links.count(l))
            throw Error(Errc::UnboundSlot, "template '" + node.tmpl.name() + "': link '" + l + "' is unbound");
}

}  // namespace

SourceTree build_tree(const TaskFunction& tf, const TemplateLibrary& templates) {
    for (const char* required : {"taskfunction", "extract_entry", "call_entry"})
        if (!templates.contains(required))
            throw Error(Errc::MissingTemplate, "template library lacks '" + std::string(required) + "'");
    const QualifierPath qualifiers{device_qualifier(tf.device)};

    SourceTree tree;
    tree.tf_id = tf.id;
    auto& root = tree.root;
    root.tmpl = templates.instantiate("taskfunction", qualifiers);
    root.params["tf_id"] = tf.id;
    root.params["name"] = "taskfunction_" + tf.id;
    root.params["device"] = std::string(to_string(tf.device));
    root.params["data_item"] = std::string(to_string(tf.data_item));
    root.params["n_routines"] = std::to_string(tf.routines.size());

    const auto extract = templates.instantiate("extract_entry", qualifiers);
    auto& extracts = root.links["extract"];
    for (const auto& entry : tf.spec.entry_names()) {
        SourceNode child{extract, {}, {}};
        child.params["entry"] = entry;
        child.params["kind"] = entry_kind(tf.spec, entry);
        child.params["key"] = entry;
        extracts.push_back(std::move(child));
    }

    const auto call = templates.instantiate("call_entry", qualifiers);
    auto& calls = root.links["calls"];
    for (std::size_t r = 0; r < tf.routines.size(); ++r) {
        SourceNode child{call, {}, {}};
        child.params["routine"] = tf.routines[r];
        const auto& binding = r < tf.spec.bindings.size() ? tf.spec.bindings[r] : std::vector<std::string>{};
        child.params["args"] = wrap_args(binding, 64);
        calls.push_back(std::move(child));
    }
    // user templates with slots nothing binds fail here rather than at render time
    check_bound(root);
    for (const auto* group : {&extracts, &calls})
        for (const auto& child : *group) check_bound(child);
    return tree;
}

std::string render(const SourceNode& node) {
    check_bound(node);
    std::string out;
    for (const auto& seg : node.tmpl.segments()) {
        if (auto lit = std::get_if<std::string>(&seg)) {
            out += *lit;
        } else if (auto p = std::get_if<Template::Param>(&seg)) {
            out += node.params.at(p->name);
        } else {
            const auto& link = std::get<Template::Link>(seg);
            for (const auto& child : node.links.at(link.name)) {
                auto text = render(child);
                if (!link.own_line) {
                    out += text;
                    continue;
                }
                if (!text.empty() && text.back() == '\n') text.pop_back();
                std::size_t start = 0;
                for (;;) {
                    auto nl = text.find('\n', start);
                    auto line = text.substr(start, nl == std::string::npos ? std::string::npos : nl - start);
                    if (!line.empty()) out += link.indent + line;
                    out += '\n';
                    if (nl == std::string::npos) break;
                    start = nl + 1;
                }
            }
        }
    }
    return out;
}

std::string render(const SourceTree& tree) { return render(tree.root); }

ExecutablePlan emit_plan(const PlanGraph& plan) {
    ExecutablePlan out;
    out.name = plan.name;
    out.graph = plan;
    out.topology = derive_topology(plan);
    for (const auto& tf : plan.task_functions) {
        ExecutablePlan::Function fn;
        fn.tf = tf;
        for (std::size_t r = 0; r < tf.routines.size(); ++r)
            fn.calls.push_back({tf.routines[r], r < tf.spec.bindings.size() ? tf.spec.bindings[r] : std::vector<std::string>{}});
        out.functions.push_back(std::move(fn));
    }
    ExecutablePlan::Duplicate dup;
    for (const auto& e : plan.edges) {
        if (e.kind == EdgeKind::DeviceMover) out.movers.push_back({e.from, e.to});
        if (e.kind == EdgeKind::Duplicate) dup.targets.push_back(e.to);
    }
    if (!dup.targets.empty()) out.duplicates.push_back(std::move(dup));
    if (const auto& merge = out.topology.merge) {
        ExecutablePlan::Merge m;
        m.at = merge->at;
        for (const auto& branch : out.topology.branches) m.inputs.push_back(plan.task_functions[branch.back()].id);
        m.kernel = merge->kernel.value_or("");
        out.merges.push_back(std::move(m));
    }
    return out;
}

std::string render_executable_plan(const ExecutablePlan& plan) {
    json doc;
    doc["name"] = plan.name;
    doc["functions"] = json::array();
    for (const auto& fn : plan.functions) {
        json calls = json::array();
        for (const auto& c : fn.calls) calls.push_back({{"routine", c.routine}, {"args", c.args}});
        doc["functions"].push_back({{"id", fn.tf.id},
                                    {"device", std::string(to_string(fn.tf.device))},
                                    {"data_item", std::string(to_string(fn.tf.data_item))},
                                    {"calls", std::move(calls)}});
    }
    doc["movers"] = json::array();
    for (const auto& m : plan.movers) doc["movers"].push_back({{"from", m.from}, {"to", m.to}});
    doc["duplicates"] = json::array();
    for (const auto& d : plan.duplicates) doc["duplicates"].push_back({{"targets", d.targets}});
    doc["merges"] = json::array();
    for (const auto& m : plan.merges)
        doc["merges"].push_back({{"at", m.at}, {"inputs", m.inputs}, {"kernel", m.kernel}});
    doc["graph"] = json::parse(render_plan(plan.graph));
    return doc.dump(2) + "\n";
}

ExecutablePlan load_executable_plan(std::string_view document) {
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::exception& e) {
        throw Error(Errc::ParseError, e.what());
    }
    if (!doc.contains("graph")) throw Error(Errc::ParseError, "executable plan lacks 'graph'");
    auto plan = emit_plan(load_plan(doc["graph"].dump()));
    // the stored directives must agree with the ones re-derived from the graph
    if (json::parse(render_executable_plan(plan)) != doc)
        throw Error(Errc::ParseError, "executable plan directives disagree with its graph");
    return plan;
}

void write_generated(const ExecutablePlan& plan, const TemplateLibrary& templates, const std::filesystem::path& out) {
    namespace fs = std::filesystem;
    fs::create_directories(out);
    auto write = [](const fs::path& path, const std::string& text) {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw Error(Errc::IoError, "cannot write '" + path.string() + "'");
        f << text;
    };
    for (const auto& fn : plan.functions) write(out / (fn.tf.id + ".glue"), render(build_tree(fn.tf, templates)));
    write(out / "plan.json", render_executable_plan(plan));
}

}  // namespace orcha
