#pragma once

#include "orcha/kernels.hpp"
#include "orcha/mesh.hpp"
#include "orcha/perf_sim.hpp"
#include "orcha/runtime.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace orcha {

/// Whole file as a string. Throws IoError.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

/// Missing keys keep their defaults. Throws ParseError / InvalidConfig.
PipelineConfig parse_pipeline_config(std::string_view document);
std::string render_pipeline_config(const PipelineConfig& cfg);

/// {"alpha_us", "beta_us_per_kib", "cpu_cores", "device_slots", "streams",
///  "model_outbound", "distributor_us", "mover_us", "merge_us",
///  "mesh": {"nxb", "nyb", "nguard"}, "kernels": {name: {"host_us", "device_us"}}}
CostModel parse_cost_model(std::string_view document);
std::string render_cost_model(const CostModel& cost);

struct ProblemConfig {
    std::string problem = "sedov";  // "sedov" or "cellular"
    MeshShape shape;
    double dt = 0.002;
    PhysicsParams physics;
    bool operator==(const ProblemConfig&) const = default;
};

/// A run file: {"problem": {...}, "pipeline": {...}}. Either part may be
/// absent.
struct RunFile {
    ProblemConfig problem;
    std::optional<PipelineConfig> pipeline;
};

RunFile parse_run_file(std::string_view document);
std::string render_problem_config(const ProblemConfig& cfg);

/// Mesh of `cfg.shape` with the named initial condition applied.
BlockMesh make_problem_mesh(const ProblemConfig& cfg);

std::string render_run_report(const RunReport& report);
std::string render_sim_report(const SimReport& report, bool with_events = false);

}  // namespace orcha
