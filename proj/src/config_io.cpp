#include "orcha/config_io.hpp"

#include "orcha/error.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace orcha {

using nlohmann::json;

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoError, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

namespace {

json parse_object(std::string_view document, const char* what) {
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::parse_error& e) {
        throw Error(Errc::ParseError, std::string(what) + ": " + e.what());
    }
    if (!doc.is_object()) throw Error(Errc::ParseError, std::string(what) + ": top level must be an object");
    return doc;
}

void only_keys(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, v] : obj.items())
        if (!allowed.count(k)) throw Error(Errc::InvalidConfig, where + ": unknown key '" + k + "'");
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) return;
    try {
        out = it->template get<T>();
    } catch (const json::exception&) {
        throw Error(Errc::ParseError, where + ": key '" + key + "' has the wrong type");
    }
}

const json* child(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) return nullptr;
    if (!it->is_object()) throw Error(Errc::ParseError, where + ": '" + key + "' must be an object");
    return &*it;
}

PipelineConfig pipeline_from(const json& doc) {
    const std::string where = "pipeline config";
    only_keys(doc, {"teams", "n_blocks_per_packet", "streams", "donation_edges", "split_ratio", "link", "watchdog_s"},
              where);
    PipelineConfig cfg;
    if (auto it = doc.find("teams"); it != doc.end()) {
        if (!it->is_array()) throw Error(Errc::ParseError, where + ": 'teams' must be an array");
        for (const auto& t : *it) {
            if (!t.is_object()) throw Error(Errc::ParseError, where + ": each team must be an object");
            only_keys(t, {"name", "workers", "role"}, where);
            ThreadTeamConfig team;
            read(t, "name", team.name, where);
            read(t, "workers", team.workers, where);
            std::string role;
            read(t, "role", role, where);
            team.role = role.empty() ? role_from_name(team.name) : parse_team_role(role);
            cfg.teams.push_back(std::move(team));
        }
    }
    read(doc, "n_blocks_per_packet", cfg.n_blocks_per_packet, where);
    read(doc, "streams", cfg.streams, where);
    read(doc, "split_ratio", cfg.split_ratio, where);
    read(doc, "watchdog_s", cfg.watchdog_s, where);
    if (auto it = doc.find("donation_edges"); it != doc.end()) {
        if (!it->is_array()) throw Error(Errc::ParseError, where + ": 'donation_edges' must be an array");
        for (const auto& e : *it) {
            if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string())
                throw Error(Errc::ParseError, where + ": donation edges are [from, to] pairs");
            cfg.donation_edges.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
        }
    }
    if (const json* link = child(doc, "link", where)) {
        only_keys(*link, {"alpha_us", "beta_us_per_kib"}, where);
        read(*link, "alpha_us", cfg.link.alpha_us, where);
        read(*link, "beta_us_per_kib", cfg.link.beta_us_per_kib, where);
    }
    cfg.validate();
    return cfg;
}

json pipeline_to(const PipelineConfig& cfg) {
    json doc;
    doc["teams"] = json::array();
    for (const auto& t : cfg.teams)
        doc["teams"].push_back({{"name", t.name}, {"workers", t.workers}, {"role", std::string(to_string(t.role))}});
    doc["n_blocks_per_packet"] = cfg.n_blocks_per_packet;
    doc["streams"] = cfg.streams;
    doc["donation_edges"] = json::array();
    for (const auto& [from, to] : cfg.donation_edges) doc["donation_edges"].push_back({from, to});
    doc["split_ratio"] = cfg.split_ratio;
    doc["link"] = {{"alpha_us", cfg.link.alpha_us}, {"beta_us_per_kib", cfg.link.beta_us_per_kib}};
    doc["watchdog_s"] = cfg.watchdog_s;
    return doc;
}

ProblemConfig problem_from(const json& doc) {
    const std::string where = "problem config";
    only_keys(doc, {"problem", "mesh", "dt", "physics"}, where);
    ProblemConfig cfg;
    read(doc, "problem", cfg.problem, where);
    if (cfg.problem != "sedov" && cfg.problem != "cellular")
        throw Error(Errc::InvalidConfig, where + ": unknown problem '" + cfg.problem + "'");
    if (cfg.problem == "cellular") {
        cfg.shape = MeshShape{8, 2, 16, 16, 2, 0.0, 256.0, 0.0, 64.0};
        cfg.dt = 3e-9;
        cfg.physics.diffusion = 1e7;
    }
    read(doc, "dt", cfg.dt, where);
    if (const json* m = child(doc, "mesh", where)) {
        only_keys(*m, {"nbx", "nby", "nxb", "nyb", "h", "xmin", "xmax", "ymin", "ymax"}, where);
        auto& s = cfg.shape;
        read(*m, "nbx", s.nbx, where);
        read(*m, "nby", s.nby, where);
        read(*m, "nxb", s.nxb, where);
        read(*m, "nyb", s.nyb, where);
        read(*m, "h", s.h, where);
        read(*m, "xmin", s.xmin, where);
        read(*m, "xmax", s.xmax, where);
        read(*m, "ymin", s.ymin, where);
        read(*m, "ymax", s.ymax, where);
    }
    if (const json* p = child(doc, "physics", where)) {
        only_keys(*p, {"gamma", "cv", "eos_a", "eos_b", "eos_work", "burn_a", "burn_ta", "burn_q", "diffusion"}, where);
        auto& ph = cfg.physics;
        read(*p, "gamma", ph.gamma, where);
        read(*p, "cv", ph.cv, where);
        read(*p, "eos_a", ph.eos_a, where);
        read(*p, "eos_b", ph.eos_b, where);
        read(*p, "eos_work", ph.eos_work, where);
        read(*p, "burn_a", ph.burn_a, where);
        read(*p, "burn_ta", ph.burn_ta, where);
        read(*p, "burn_q", ph.burn_q, where);
        read(*p, "diffusion", ph.diffusion, where);
    }
    if (!(cfg.dt > 0.0)) throw Error(Errc::InvalidConfig, where + ": dt must be positive");
    return cfg;
}

}  // namespace

PipelineConfig parse_pipeline_config(std::string_view document) {
    return pipeline_from(parse_object(document, "pipeline config"));
}

std::string render_pipeline_config(const PipelineConfig& cfg) { return pipeline_to(cfg).dump(2) + "\n"; }

CostModel parse_cost_model(std::string_view document) {
    const std::string where = "cost model";
    const json doc = parse_object(document, "cost model");
    only_keys(doc,
              {"alpha_us", "beta_us_per_kib", "cpu_cores", "device_slots", "streams", "model_outbound",
               "distributor_us", "mover_us", "merge_us", "mesh", "kernels", "note"},
              where);
    CostModel c;
    read(doc, "alpha_us", c.alpha_us, where);
    read(doc, "beta_us_per_kib", c.beta_us_per_kib, where);
    read(doc, "cpu_cores", c.cpu_cores, where);
    read(doc, "device_slots", c.device_slots, where);
    read(doc, "streams", c.streams, where);
    read(doc, "model_outbound", c.model_outbound, where);
    read(doc, "distributor_us", c.distributor_us, where);
    read(doc, "mover_us", c.mover_us, where);
    read(doc, "merge_us", c.merge_us, where);
    if (const json* m = child(doc, "mesh", where)) {
        only_keys(*m, {"nxb", "nyb", "nguard"}, where);
        read(*m, "nxb", c.mesh.nxb, where);
        read(*m, "nyb", c.mesh.nyb, where);
        read(*m, "nguard", c.mesh.nguard, where);
    }
    if (const json* k = child(doc, "kernels", where)) {
        for (const auto& [name, v] : k->items()) {
            if (!v.is_object()) throw Error(Errc::ParseError, where + ": kernel '" + name + "' must be an object");
            only_keys(v, {"host_us", "device_us"}, where);
            KernelCost kc;
            read(v, "host_us", kc.host_us, where);
            read(v, "device_us", kc.device_us, where);
            c.kernels[name] = kc;
        }
    }
    c.validate();
    return c;
}

std::string render_cost_model(const CostModel& c) {
    json doc;
    doc["alpha_us"] = c.alpha_us;
    doc["beta_us_per_kib"] = c.beta_us_per_kib;
    doc["cpu_cores"] = c.cpu_cores;
    doc["device_slots"] = c.device_slots;
    doc["streams"] = c.streams;
    doc["model_outbound"] = c.model_outbound;
    doc["distributor_us"] = c.distributor_us;
    doc["mover_us"] = c.mover_us;
    doc["merge_us"] = c.merge_us;
    doc["mesh"] = {{"nxb", c.mesh.nxb}, {"nyb", c.mesh.nyb}, {"nguard", c.mesh.nguard}};
    doc["kernels"] = json::object();
    for (const auto& [name, k] : c.kernels) doc["kernels"][name] = {{"host_us", k.host_us}, {"device_us", k.device_us}};
    return doc.dump(2) + "\n";
}

RunFile parse_run_file(std::string_view document) {
    const json doc = parse_object(document, "run file");
    only_keys(doc, {"problem", "pipeline", "note"}, "run file");
    RunFile rf;
    if (const json* p = child(doc, "problem", "run file")) rf.problem = problem_from(*p);
    if (const json* p = child(doc, "pipeline", "run file")) rf.pipeline = pipeline_from(*p);
    return rf;
}

std::string render_problem_config(const ProblemConfig& cfg) {
    const auto& s = cfg.shape;
    const auto& p = cfg.physics;
    json doc = {{"problem", cfg.problem},
                {"dt", cfg.dt},
                {"mesh",
                 {{"nbx", s.nbx}, {"nby", s.nby}, {"nxb", s.nxb}, {"nyb", s.nyb}, {"h", s.h},
                  {"xmin", s.xmin}, {"xmax", s.xmax}, {"ymin", s.ymin}, {"ymax", s.ymax}}},
                {"physics",
                 {{"gamma", p.gamma}, {"cv", p.cv}, {"eos_a", p.eos_a}, {"eos_b", p.eos_b}, {"eos_work", p.eos_work},
                  {"burn_a", p.burn_a}, {"burn_ta", p.burn_ta}, {"burn_q", p.burn_q}, {"diffusion", p.diffusion}}}};
    return doc.dump(2) + "\n";
}

BlockMesh make_problem_mesh(const ProblemConfig& cfg) {
    BlockMesh mesh(cfg.shape);
    if (cfg.problem == "cellular")
        init_cellular(mesh, CellularConfig{}, cfg.physics);
    else
        init_sedov(mesh, SedovConfig{}, cfg.physics);
    return mesh;
}

std::string render_run_report(const RunReport& r) {
    json doc;
    doc["wall_s"] = r.wall_s;
    doc["cycles"] = r.cycles;
    doc["stage_busy_s"] = r.stage_busy_s;
    doc["stage_blocks"] = r.stage_blocks;
    doc["team_items"] = r.team_items;
    doc["team_busy_s"] = r.team_busy_s;
    doc["donated_busy_s"] = r.donated_busy_s;
    doc["packets"] = r.packets;
    doc["merges"] = r.merges;
    doc["bytes_in"] = r.bytes_in;
    doc["bytes_out"] = r.bytes_out;
    doc["exactly_once"] = r.exactly_once;
    doc["checksums"] = r.checksums;
    doc["teams_created"] = r.teams_created;
    return doc.dump(2) + "\n";
}

std::string render_sim_report(const SimReport& r, bool with_events) {
    json doc;
    doc["makespan_us"] = r.makespan_us;
    doc["link_util"] = r.link_util();
    doc["device_util"] = r.device_util();
    doc["cpu_util"] = r.cpu_util();
    doc["packets"] = r.packets;
    doc["team_busy_us"] = r.team_busy_us;
    doc["donated_busy_us"] = r.donated_busy_us;
    if (with_events) {
        doc["events"] = json::array();
        for (const auto& e : r.events)
            doc["events"].push_back(
                {{"start_us", e.start_us}, {"time_us", e.time_us}, {"resource", e.resource}, {"what", e.what}});
    }
    return doc.dump(2) + "\n";
}

}  // namespace orcha
