#pragma once

#include "orcha/codegen.hpp"
#include "orcha/kernels.hpp"
#include "orcha/mesh.hpp"

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace orcha {

enum class TeamRole { HostCompute, DeviceProxy, Mover };
std::string_view to_string(TeamRole r);
TeamRole parse_team_role(std::string_view s);
/// "gpu*" -> device proxy, "mover*" -> mover, anything else -> host compute.
TeamRole role_from_name(std::string_view name);

struct ThreadTeamConfig {
    std::string name;
    int workers = 1;
    TeamRole role = TeamRole::HostCompute;
    bool operator==(const ThreadTeamConfig&) const = default;
};

struct LinkConfig {
    double alpha_us = 0.0;
    double beta_us_per_kib = 0.0;
    bool operator==(const LinkConfig&) const = default;
};

struct PipelineConfig {
    std::vector<ThreadTeamConfig> teams;
    std::size_t n_blocks_per_packet = 1;
    int streams = 1;
    /// (from, to): once `from` has drained its queue for the cycle its
    /// workers serve `to` until `to` drains too. At most one edge per team.
    std::vector<std::pair<std::string, std::string>> donation_edges;
    /// Fraction of blocks a GPU task function at the head of a single chain
    /// hands to a host twin running the host variants of the same routines.
    double split_ratio = 0.0;
    LinkConfig link;
    double watchdog_s = 30.0;

    /// Throws InvalidConfig.
    void validate() const;
    bool operator==(const PipelineConfig&) const = default;
};

/// Teams sufficient for `plan`: "cpu" (2 workers), "gpu" (1) when a task
/// function runs on the GPU, "mover" (1) when the plan has movers.
PipelineConfig default_pipeline_config(const ExecutablePlan& plan);

struct RunReport {
    double wall_s = 0.0;
    std::size_t cycles = 0;
    std::map<std::string, double> stage_busy_s;        // task function (or "mover", "merge")
    std::map<std::string, std::size_t> stage_blocks;   // blocks processed per stage
    std::map<std::string, std::size_t> team_items;     // tasks taken, including "distributor"
    std::map<std::string, double> team_busy_s;
    std::map<std::string, double> donated_busy_s;      // busy time of workers away from home
    std::size_t packets = 0;
    std::size_t merges = 0;
    std::size_t bytes_in = 0;
    std::size_t bytes_out = 0;
    bool exactly_once = true;
    std::vector<std::string> checksums;
    std::size_t teams_created = 0;
};

struct StepInputs {
    double dt = 0.0;
    PhysicsParams physics;
};

/// Persistent thread teams. Workers are created once and reused by every
/// cycle until the runtime is destroyed.
class Runtime {
public:
    explicit Runtime(PipelineConfig cfg, const KernelRegistry& registry = KernelRegistry::builtin());
    ~Runtime();
    Runtime(const Runtime&) = delete;
    Runtime& operator=(const Runtime&) = delete;

    const PipelineConfig& config() const;
    std::size_t team_count() const;
    std::size_t idle_teams() const;
    /// Number of worker threads ever created.
    std::size_t threads_created() const;
    std::size_t teams_created() const;

    /// One orchestration cycle: halos are filled, every block runs through
    /// the plan, the mesh is updated in place. Kernel failures surface as
    /// KernelPanic naming the block, stalls longer than the watchdog as
    /// Deadlock.
    RunReport run_cycle(const ExecutablePlan& plan, BlockMesh& mesh, const StepInputs& inputs);

    /// Runs after every cycle, outside orchestration. No-op by default.
    std::function<void(BlockMesh&)> post_cycle;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::unique_ptr<Runtime> start_teams(const PipelineConfig& cfg);

/// `steps` cycles with reports summed; checksums from the final state.
RunReport run_steps(Runtime& rt, const ExecutablePlan& plan, BlockMesh& mesh, const StepInputs& inputs, int steps);

}  // namespace orcha
