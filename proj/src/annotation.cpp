#include "orcha/annotation.hpp"

#include "orcha/error.hpp"
#include "orcha/extent_expr.hpp"
#include "orcha/variables.hpp"

#include <json.hpp>

#include <cctype>
#include <map>
#include <optional>

namespace orcha {

using nlohmann::json;

std::string_view to_string(Structure s) {
    switch (s) {
        case Structure::Center: return "center";
        case Structure::FluxX: return "flux_x";
        case Structure::FluxY: return "flux_y";
    }
    return "center";
}

std::string_view to_string(ScalarKind k) {
    return k == ScalarKind::Real ? "real" : "integer";
}

std::string_view to_string(MetaKind k) {
    switch (k) {
        case MetaKind::Lo: return "lo";
        case MetaKind::Hi: return "hi";
        case MetaKind::Deltas: return "deltas";
        case MetaKind::Dt: return "dt";
        case MetaKind::BlockId: return "block_id";
    }
    return "lo";
}

const ArgumentSpec* RoutineSpec::find(std::string_view arg) const {
    for (const auto& a : arguments)
        if (a.name == arg) return &a;
    return nullptr;
}

std::string_view default_sentinel_for(std::string_view path) {
    auto dot = path.rfind('.');
    auto ext = dot == std::string_view::npos ? std::string_view{} : path.substr(dot + 1);
    if (ext == "F90" || ext == "f90" || ext == "F" || ext == "f" || ext == "F03") return "!!";
    return "//!";
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    if (trim(s).empty()) return out;
    std::size_t start = 0;
    for (;;) {
        auto comma = s.find(',', start);
        auto item = trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        out.emplace_back(item);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::optional<Structure> parse_structure(std::string_view s) {
    if (s == "center") return Structure::Center;
    if (s == "flux_x") return Structure::FluxX;
    if (s == "flux_y") return Structure::FluxY;
    return std::nullopt;
}

std::optional<ScalarKind> parse_scalar(std::string_view s) {
    if (s == "real") return ScalarKind::Real;
    if (s == "integer") return ScalarKind::Integer;
    return std::nullopt;
}

std::optional<MetaKind> parse_meta(std::string_view s) {
    if (s == "lo") return MetaKind::Lo;
    if (s == "hi") return MetaKind::Hi;
    if (s == "deltas") return MetaKind::Deltas;
    if (s == "dt") return MetaKind::Dt;
    if (s == "block_id") return MetaKind::BlockId;
    return std::nullopt;
}

struct PendingArg {
    std::string name;
    std::size_t line = 0;
    std::map<std::string, std::pair<std::string, std::size_t>> keys;  // key -> (value, line)
};

class BlockBuilder {
public:
    BlockBuilder(std::string file, std::size_t begin_line) : file_(std::move(file)), begin_line_(begin_line) {}

    [[noreturn]] void fail(Errc code, std::size_t line, const std::string& why) const {
        throw Error(code, file_ + ":" + std::to_string(line) + ": " + why);
    }

    void top_entry(std::string_view key, std::string_view value, std::size_t line) {
        if (key == "routine") {
            if (value.empty()) fail(Errc::SyntaxError, line, "empty routine name");
            spec_.name = std::string(value);
        } else if (key == "devices") {
            for (const auto& d : split_list(value)) {
                auto dev = try_parse_device(d);
                if (!dev) fail(Errc::UnknownDevice, line, "unknown device '" + d + "'");
                spec_.device_variants.insert(*dev);
            }
        } else if (key == "argument") {
            if (value.empty()) fail(Errc::SyntaxError, line, "empty argument name");
            for (const auto& a : args_)
                if (a.name == value) fail(Errc::DuplicateArgument, line, "argument '" + std::string(value) + "' repeated");
            args_.push_back(PendingArg{std::string(value), line, {}});
        } else {
            fail(Errc::SyntaxError, line, "unknown key '" + std::string(key) + "'");
        }
    }

    void sub_entry(std::string_view key, std::string_view value, std::size_t line) {
        if (args_.empty()) fail(Errc::SyntaxError, line, "indented entry outside of an argument");
        auto& arg = args_.back();
        if (!arg.keys.emplace(std::string(key), std::make_pair(std::string(value), line)).second)
            fail(Errc::SyntaxError, line, "key '" + std::string(key) + "' repeated");
    }

    RoutineSpec finish() {
        if (spec_.name.empty()) fail(Errc::SyntaxError, begin_line_, "annotation block without 'routine'");
        if (spec_.device_variants.empty())
            fail(Errc::SyntaxError, begin_line_, "routine '" + spec_.name + "' lists no devices");
        spec_.source_file = file_;
        for (auto& arg : args_) spec_.arguments.push_back(build(arg));
        return std::move(spec_);
    }

private:
    ArgumentSpec build(PendingArg& arg) {
        auto take = [&](const char* key) -> std::optional<std::pair<std::string, std::size_t>> {
            auto it = arg.keys.find(key);
            if (it == arg.keys.end()) return std::nullopt;
            auto v = it->second;
            arg.keys.erase(it);
            return v;
        };
        auto src = take("source");
        if (!src) fail(Errc::SyntaxError, arg.line, "argument '" + arg.name + "' has no source");

        ArgumentSpec out;
        out.name = arg.name;
        const auto& kind = src->first;
        if (kind == "grid_data") {
            GridData g;
            if (auto s = take("structure")) {
                auto st = parse_structure(s->first);
                if (!st) fail(Errc::SyntaxError, s->second, "unknown structure '" + s->first + "'");
                g.structure = *st;
            }
            auto read_vars = [&](const char* key, std::set<std::string>& into) {
                if (auto v = take(key)) {
                    for (const auto& name : split_list(v->first)) {
                        if (!var_index(name)) fail(Errc::UnknownVariable, v->second, "unknown variable '" + name + "'");
                        into.insert(name);
                    }
                }
            };
            read_vars("in", g.variables_in);
            read_vars("out", g.variables_out);
            if (g.variables_in.empty() && g.variables_out.empty())
                fail(Errc::SyntaxError, arg.line, "grid argument '" + arg.name + "' names no variables");
            out.source = std::move(g);
        } else if (kind == "scratch") {
            Scratch s;
            auto ext = take("extents");
            if (!ext) fail(Errc::SyntaxError, arg.line, "scratch argument '" + arg.name + "' has no extents");
            s.extents = split_list(ext->first);
            if (s.extents.empty()) fail(Errc::SyntaxError, ext->second, "empty extents");
            for (const auto& e : s.extents) check(e, ext->second);
            if (auto lb = take("lbound")) {
                s.lbound = split_list(lb->first);
                for (const auto& e : s.lbound) check(e, lb->second);
                if (s.lbound.size() != s.extents.size())
                    fail(Errc::SyntaxError, lb->second, "lbound rank differs from extents rank");
            } else {
                s.lbound.assign(s.extents.size(), "1");
            }
            out.source = std::move(s);
        } else if (kind == "external") {
            External e;
            if (auto t = take("type")) {
                auto k = parse_scalar(t->first);
                if (!k) fail(Errc::SyntaxError, t->second, "unknown scalar type '" + t->first + "'");
                e.kind = *k;
            }
            out.source = e;
        } else if (kind == "tile_metadata") {
            auto k = take("kind");
            if (!k) fail(Errc::SyntaxError, arg.line, "tile_metadata argument '" + arg.name + "' has no kind");
            auto mk = parse_meta(k->first);
            if (!mk) fail(Errc::SyntaxError, k->second, "unknown metadata kind '" + k->first + "'");
            out.source = TileMetadata{*mk};
        } else {
            fail(Errc::UnknownSourceKind, src->second, "unknown source kind '" + kind + "'");
        }
        if (!arg.keys.empty()) {
            const auto& [key, val] = *arg.keys.begin();
            fail(Errc::SyntaxError, val.second, "key '" + key + "' not valid for source '" + kind + "'");
        }
        return out;
    }

    void check(const std::string& expr, std::size_t line) const {
        try {
            check_extent_expression(expr);
        } catch (const Error& e) {
            fail(Errc::ExpressionError, line, e.what());
        }
    }

    std::string file_;
    std::size_t begin_line_;
    RoutineSpec spec_;
    std::vector<PendingArg> args_;
};

std::size_t leading_spaces(std::string_view s) {
    std::size_t n = 0;
    while (n < s.size() && (s[n] == ' ' || s[n] == '\t')) ++n;
    return n;
}

}  // namespace

std::vector<RoutineSpec> parse_annotations(std::string_view source_text, std::string_view comment_sentinel,
                                           std::string_view source_file) {
    if (comment_sentinel.empty()) throw Error(Errc::SyntaxError, "empty comment sentinel");
    const std::string file = source_file.empty() ? std::string("<input>") : std::string(source_file);

    std::vector<RoutineSpec> specs;
    std::optional<BlockBuilder> block;
    std::size_t block_indent = 0;
    std::size_t begin_line = 0;

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= source_text.size()) {
        auto nl = source_text.find('\n', pos);
        auto raw = source_text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? source_text.size() + 1 : nl + 1;
        ++line_no;
        if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);

        auto stripped = raw.substr(leading_spaces(raw));
        if (stripped.substr(0, comment_sentinel.size()) != comment_sentinel) continue;
        auto rest = stripped.substr(comment_sentinel.size());
        auto content = trim(rest);
        if (content.empty()) continue;

        if (content == "milhoja begin") {
            if (block) throw Error(Errc::SyntaxError, file + ":" + std::to_string(line_no) + ": nested 'milhoja begin'");
            block.emplace(file, line_no);
            block_indent = leading_spaces(rest);
            begin_line = line_no;
            continue;
        }
        if (content == "milhoja end") {
            if (!block) throw Error(Errc::SyntaxError, file + ":" + std::to_string(line_no) + ": 'milhoja end' without begin");
            specs.push_back(block->finish());
            block.reset();
            continue;
        }
        if (!block) continue;  // ordinary comment using the same sentinel

        auto colon = content.find(':');
        if (colon == std::string_view::npos)
            block->fail(Errc::SyntaxError, line_no, "expected 'key: value'");
        auto key = trim(content.substr(0, colon));
        auto value = trim(content.substr(colon + 1));
        if (key.empty()) block->fail(Errc::SyntaxError, line_no, "empty key");
        if (leading_spaces(rest) > block_indent)
            block->sub_entry(key, value, line_no);
        else
            block->top_entry(key, value, line_no);
    }
    if (block)
        throw Error(Errc::UnterminatedBlock, file + ":" + std::to_string(begin_line) + ": 'milhoja begin' never closed");
    return specs;
}

namespace {

json argument_to_json(const ArgumentSpec& arg) {
    return std::visit(
        [](const auto& src) -> json {
            using T = std::decay_t<decltype(src)>;
            json j;
            if constexpr (std::is_same_v<T, GridData>) {
                j["source"] = "grid_data";
                j["structure"] = std::string(to_string(src.structure));
                j["in"] = src.variables_in;
                j["out"] = src.variables_out;
            } else if constexpr (std::is_same_v<T, Scratch>) {
                j["source"] = "scratch";
                j["extents"] = src.extents;
                j["lbound"] = src.lbound;
            } else if constexpr (std::is_same_v<T, External>) {
                j["source"] = "external";
                j["type"] = std::string(to_string(src.kind));
            } else {
                j["source"] = "tile_metadata";
                j["kind"] = std::string(to_string(src.kind));
            }
            return j;
        },
        arg.source);
}

ArgumentSource argument_from_json(const std::string& name, const json& j) {
    auto fail = [&](const std::string& why) -> Error {
        return Error(Errc::ParseError, "argument '" + name + "': " + why);
    };
    const auto source = j.at("source").get<std::string>();
    if (source == "grid_data") {
        GridData g;
        auto st = parse_structure(j.at("structure").get<std::string>());
        if (!st) throw fail("bad structure");
        g.structure = *st;
        g.variables_in = j.at("in").get<std::set<std::string>>();
        g.variables_out = j.at("out").get<std::set<std::string>>();
        return g;
    }
    if (source == "scratch") {
        return Scratch{j.at("extents").get<std::vector<std::string>>(), j.at("lbound").get<std::vector<std::string>>()};
    }
    if (source == "external") {
        auto k = parse_scalar(j.at("type").get<std::string>());
        if (!k) throw fail("bad type");
        return External{*k};
    }
    if (source == "tile_metadata") {
        auto k = parse_meta(j.at("kind").get<std::string>());
        if (!k) throw fail("bad kind");
        return TileMetadata{*k};
    }
    throw Error(Errc::UnknownSourceKind, "argument '" + name + "': unknown source '" + source + "'");
}

}  // namespace

std::string export_spec(const RoutineSpec& spec) {
    json doc;
    doc["name"] = spec.name;
    doc["source_file"] = spec.source_file;
    doc["devices"] = json::array();
    for (auto d : spec.device_variants) doc["devices"].push_back(std::string(to_string(d)));
    doc["arguments"] = json::object();
    doc["argument_order"] = json::array();
    for (const auto& arg : spec.arguments) {
        doc["arguments"][arg.name] = argument_to_json(arg);
        doc["argument_order"].push_back(arg.name);
    }
    return doc.dump(2) + "\n";
}

RoutineSpec import_spec(std::string_view document) {
    try {
        auto doc = json::parse(document);
        RoutineSpec spec;
        spec.name = doc.at("name").get<std::string>();
        spec.source_file = doc.value("source_file", std::string{});
        for (const auto& d : doc.at("devices")) spec.device_variants.insert(parse_device(d.get<std::string>()));
        const auto& args = doc.at("arguments");
        for (const auto& name : doc.at("argument_order")) {
            auto n = name.get<std::string>();
            if (spec.find(n)) throw Error(Errc::DuplicateArgument, "argument '" + n + "' repeated");
            spec.arguments.push_back(ArgumentSpec{n, argument_from_json(n, args.at(n))});
        }
        if (args.size() != spec.arguments.size())
            throw Error(Errc::ParseError, "argument_order does not list every argument");
        return spec;
    } catch (const json::exception& e) {
        throw Error(Errc::ParseError, e.what());
    }
}

}  // namespace orcha
