#pragma once

#include "orcha/codegen.hpp"
#include "orcha/runtime.hpp"

#include <map>
#include <string>
#include <vector>

namespace orcha {

struct KernelCost {
    double host_us = 0.0;    // per block
    double device_us = 0.0;  // per block
    bool operator==(const KernelCost&) const = default;
};

struct CostModel {
    double alpha_us = 0.0;
    double beta_us_per_kib = 0.0;
    std::map<std::string, KernelCost> kernels;
    int cpu_cores = 1;
    int device_slots = 1;
    int streams = 1;
    bool model_outbound = true;
    double distributor_us = 0.0;  // per block handed out
    double mover_us = 0.0;        // per packet unpacked
    double merge_us = 0.0;        // per block merged
    MeshParams mesh;              // block shape used for transfer sizes

    /// Throws InvalidConfig.
    void validate() const;
    bool operator==(const CostModel&) const = default;
};

struct SimEvent {
    double time_us = 0.0;
    std::string resource;  // "link", "device", "<team>", "distributor", "merge"
    std::string what;      // e.g. "in TF_A#0", "compute TF_A#0", "TF_B block 3"
    double start_us = 0.0;
    bool operator==(const SimEvent&) const = default;
};

struct SimReport {
    double makespan_us = 0.0;
    double link_busy_us = 0.0;
    double device_busy_us = 0.0;   // summed over slots
    double cpu_busy_us = 0.0;      // summed over host workers
    std::map<std::string, double> team_busy_us;
    std::map<std::string, double> donated_busy_us;
    std::size_t packets = 0;
    double link_capacity = 1.0;
    double device_capacity = 1.0;
    double cpu_capacity = 1.0;
    std::vector<SimEvent> events;  // completion order

    double link_util() const { return makespan_us > 0 ? link_busy_us / (makespan_us * link_capacity) : 0.0; }
    double device_util() const { return makespan_us > 0 ? device_busy_us / (makespan_us * device_capacity) : 0.0; }
    double cpu_util() const { return makespan_us > 0 ? cpu_busy_us / (makespan_us * cpu_capacity) : 0.0; }
};

/// Teams and options for a modeled run. Host task functions are assigned to
/// host_compute teams round robin; without any, one "cpu" team of
/// cost.cpu_cores workers serves them all. The distributor is a one-worker
/// team named "distributor" that may donate like any other team.
struct SimOptions {
    std::vector<ThreadTeamConfig> teams;
    std::vector<std::pair<std::string, std::string>> donation_edges;
    double split_ratio = 0.0;
};

SimOptions sim_options_from(const PipelineConfig& cfg);

/// Deterministic event simulation of one cycle over `n_blocks` blocks.
SimReport simulate(const ExecutablePlan& plan, const CostModel& cost, std::size_t n_blocks, std::size_t n_per_packet,
                   const SimOptions& options = {});

/// Latest completion time in an event log.
double replay_makespan(const std::vector<SimEvent>& events);

struct SweepSpec {
    std::string key;  // "nblocks" (blocks per packet) or "streams"
    std::vector<double> values;
};

/// Parses "nblocks=5,10,20". Throws InvalidConfig.
SweepSpec parse_sweep(std::string_view text);

/// CSV with header `p,makespan_us,link_util,device_util,cpu_util`; one row
/// per sweep value, p being the swept value.
std::string sweep(const ExecutablePlan& plan, const CostModel& cost, std::size_t n_blocks, std::size_t n_per_packet,
                  const SweepSpec& spec, const SimOptions& options = {});

}  // namespace orcha
