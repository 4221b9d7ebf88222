#include "orcha/runtime.hpp"

#include "orcha/error.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

namespace orcha {

std::string_view to_string(TeamRole r) {
    switch (r) {
    case TeamRole::HostCompute: return "host_compute";
    case TeamRole::DeviceProxy: return "device_proxy";
    case TeamRole::Mover: return "mover";
    }
    return "?";
}

TeamRole parse_team_role(std::string_view s) {
    for (auto r : {TeamRole::HostCompute, TeamRole::DeviceProxy, TeamRole::Mover})
        if (to_string(r) == s) return r;
    throw Error(Errc::InvalidConfig, "unknown team role '" + std::string(s) + "'");
}

TeamRole role_from_name(std::string_view name) {
    if (name.rfind("gpu", 0) == 0) return TeamRole::DeviceProxy;
    if (name.rfind("mover", 0) == 0) return TeamRole::Mover;
    return TeamRole::HostCompute;
}

void PipelineConfig::validate() const {
    auto bad = [](const std::string& why) { return Error(Errc::InvalidConfig, why); };
    if (teams.empty()) throw bad("no thread teams configured");
    std::map<std::string, std::size_t> index;
    for (const auto& t : teams) {
        if (t.name.empty()) throw bad("team with empty name");
        if (t.workers < 1) throw bad("team '" + t.name + "' needs at least one worker");
        if (!index.emplace(t.name, index.size()).second) throw bad("team '" + t.name + "' listed twice");
    }
    if (n_blocks_per_packet < 1) throw bad("blocks per packet must be at least 1");
    if (streams < 1) throw bad("streams must be at least 1");
    if (!(split_ratio >= 0.0 && split_ratio <= 1.0)) throw bad("split ratio must lie in [0, 1]");
    if (!(link.alpha_us >= 0.0) || !(link.beta_us_per_kib >= 0.0)) throw bad("link costs must be non-negative");
    if (!(watchdog_s > 0.0)) throw bad("watchdog timeout must be positive");
    std::map<std::string, std::string> next;
    for (const auto& [from, to] : donation_edges) {
        const bool known_from = index.count(from) || from == "distributor";
        if (!known_from || !index.count(to)) throw bad("donation edge " + from + " -> " + to + " names an unknown team");
        if (from == to) throw bad("team '" + from + "' cannot donate to itself");
        if (!next.emplace(from, to).second) throw bad("team '" + from + "' has more than one donation edge");
    }
    for (const auto& [start, unused] : next) {
        std::string cur = start;
        for (std::size_t hops = 0; next.count(cur); ++hops) {
            cur = next.at(cur);
            if (cur == start || hops > next.size()) throw bad("donation edges form a cycle through '" + start + "'");
        }
    }
}

PipelineConfig default_pipeline_config(const ExecutablePlan& plan) {
    PipelineConfig cfg;
    cfg.teams.push_back({"cpu", 2, TeamRole::HostCompute});
    bool gpu = false;
    for (const auto& fn : plan.functions) gpu = gpu || fn.tf.device == Device::GPU;
    if (gpu) {
        cfg.teams.push_back({"gpu", 1, TeamRole::DeviceProxy});
        cfg.teams.push_back({"mover", 1, TeamRole::Mover});
    }
    return cfg;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Aborted {};

struct Task {
    enum Kind { Host, Device, Move } kind = Host;
    int stage = 0;
    int block = -1;
    std::shared_ptr<DataPacket> packet;
};

struct Stage {
    std::string key;
    std::size_t tf = 0;
    Device device = Device::CPU;
    std::vector<std::pair<std::string, const Kernel*>> kernels;
    ConsolidatedArgSpec spec;
    PacketLayout full_layout;
    BlockMesh* mesh = nullptr;
    int team = -1;
    int mover_team = -1;
    int next = -1;
    bool branch_end = false;
    std::size_t expected = 0;
    std::size_t received = 0;
    std::vector<int> batch;
    std::unique_ptr<std::atomic<int>[]> counts;
};

struct Cycle {
    StepInputs inputs;
    Externals externals;
    std::vector<Stage> stages;
    std::vector<BlockMesh> branch_meshes;
    BlockMesh* main = nullptr;
    std::vector<int> heads;       // stage fed by the distributor, per branch
    int twin = -1;                // host twin of heads[0] in split mode
    std::size_t n_per_packet = 1;
    int nbranches = 1;
    bool merge_barrier = false;
    MergeFn merge = nullptr;
    int tail_head = -1;
    std::vector<int> arrivals;
    std::size_t nblocks = 0;
    std::size_t sinks_done = 0;
    bool aborted = false;
    std::exception_ptr error;

    std::size_t packets = 0, merges = 0, bytes_in = 0, bytes_out = 0;
    std::map<std::string, double> stage_busy;
};

struct Team {
    ThreadTeamConfig cfg;
    int donate_to = -1;
    std::deque<Task> queue;
    std::size_t expected = 0, pushed = 0;
    std::size_t items = 0;
    double busy = 0.0, donated_busy = 0.0;
    int active = 0;
};

}  // namespace

struct Runtime::Impl {
    PipelineConfig cfg;
    const KernelRegistry& registry;
    std::vector<Team> teams;
    std::vector<std::thread> threads;
    std::size_t threads_created = 0;
    std::size_t teams_created = 0;

    mutable std::mutex m;
    std::condition_variable work_cv, done_cv, stream_cv;
    std::mutex link_m;
    bool shutdown = false;
    Cycle* cycle = nullptr;
    std::size_t active = 0;
    std::size_t progress = 0;
    int streams_free = 0;
    int distributor_donates_to = -1;
    double distributor_busy = 0.0;
    std::size_t distributor_items = 0;

    Impl(PipelineConfig c, const KernelRegistry& r) : cfg(std::move(c)), registry(r) {}

    // --- queues (lock held) ---

    void push(int team, Task t) {
        auto& q = teams[static_cast<std::size_t>(team)];
        q.queue.push_back(std::move(t));
        ++q.pushed;
        work_cv.notify_all();
        if (team == distributor_donates_to) done_cv.notify_all();
    }

    bool take(int team, Task& t, int& from) {
        if (!cycle || cycle->aborted) return false;
        auto& home = teams[static_cast<std::size_t>(team)];
        auto pop = [&](int source) {
            auto& q = teams[static_cast<std::size_t>(source)].queue;
            t = std::move(q.front());
            q.pop_front();
            from = source;
            if (q.empty()) work_cv.notify_all();
            return true;
        };
        if (!home.queue.empty()) return pop(team);
        if (home.pushed == home.expected && home.donate_to >= 0 &&
            !teams[static_cast<std::size_t>(home.donate_to)].queue.empty())
            return pop(home.donate_to);
        return false;
    }

    // --- pipeline steps (lock not held) ---

    void link(std::size_t bytes) {
        const double us = cfg.link.alpha_us + cfg.link.beta_us_per_kib * static_cast<double>(bytes) / 1024.0;
        if (us <= 0.0) return;
        std::lock_guard<std::mutex> lk(link_m);
        std::this_thread::sleep_for(std::chrono::duration<double, std::micro>(us));
    }

    void sink(Cycle& c) {
        std::lock_guard<std::mutex> lk(m);
        ++c.sinks_done;
        done_cv.notify_all();
    }

    void deliver(Cycle& c, int si, int block) {
        auto& s = c.stages[static_cast<std::size_t>(si)];
        if (s.device == Device::CPU) {
            std::lock_guard<std::mutex> lk(m);
            push(s.team, Task{Task::Host, si, block, nullptr});
            return;
        }
        std::vector<int> batch;
        {
            std::lock_guard<std::mutex> lk(m);
            s.batch.push_back(block);
            ++s.received;
            if (s.batch.size() == c.n_per_packet || s.received == s.expected) batch.swap(s.batch);
        }
        if (batch.empty()) return;
        auto lay = batch.size() == c.n_per_packet ? s.full_layout : layout(s.spec, batch.size(), s.mesh->params());
        auto packet = std::make_shared<DataPacket>(pack(lay, *s.mesh, batch, c.externals));
        std::lock_guard<std::mutex> lk(m);
        ++c.packets;
        c.bytes_in += lay.transfer_in;
        c.bytes_out += lay.transfer_out;
        push(s.team, Task{Task::Device, si, -1, std::move(packet)});
    }

    void merge_arrive(Cycle& c, int block) {
        {
            std::lock_guard<std::mutex> lk(m);
            if (++c.arrivals[static_cast<std::size_t>(block)] < c.nbranches) return;
        }
        if (c.merge) {
            const auto t0 = Clock::now();
            ScratchArena none;
            const double dt = c.inputs.dt;
            c.merge(view_of(c.branch_meshes[0], block, dt, none), view_of(c.branch_meshes[1], block, dt, none),
                    view_of(*c.main, block, dt, none), c.inputs.physics);
            std::lock_guard<std::mutex> lk(m);
            ++c.merges;
            c.stage_busy["merge"] += seconds_since(t0);
        }
        if (c.tail_head >= 0)
            deliver(c, c.tail_head, block);
        else
            sink(c);
    }

    void route(Cycle& c, const Stage& s, int block) {
        if (s.next >= 0)
            deliver(c, s.next, block);
        else if (s.branch_end && c.merge_barrier)
            merge_arrive(c, block);
        else
            sink(c);
    }

    static void call(const Stage& s, const std::string& routine, KernelFn fn, const TileView& view,
                     const PhysicsParams& p) {
        try {
            fn(view, p);
        } catch (const Error& e) {
            if (e.code() == Errc::KernelPanic) throw;
            throw Error(Errc::KernelPanic, "block " + std::to_string(view.block_id) + " in " + s.key + " (" + routine +
                                               "): " + e.what());
        } catch (const std::exception& e) {
            throw Error(Errc::KernelPanic, "block " + std::to_string(view.block_id) + " in " + s.key + " (" + routine +
                                               "): " + e.what());
        }
    }

    void execute(Cycle& c, const Task& t, std::map<std::string, ScratchArena>& arenas) {
        auto& s = c.stages[static_cast<std::size_t>(t.stage)];
        const auto& phys = c.inputs.physics;
        switch (t.kind) {
        case Task::Host: {
            auto& arena = arenas[s.key];
            arena.prepare(s.spec, s.mesh->params());
            const auto view = view_of(*s.mesh, t.block, c.inputs.dt, arena);
            for (const auto& [name, k] : s.kernels) call(s, name, k->host, view, phys);
            ++s.counts[static_cast<std::size_t>(t.block)];
            route(c, s, t.block);
            return;
        }
        case Task::Device: {
            {
                std::unique_lock<std::mutex> lk(m);
                stream_cv.wait(lk, [&] { return streams_free > 0 || c.aborted; });
                if (c.aborted) throw Aborted{};
                --streams_free;
            }
            auto release = [&] {
                std::lock_guard<std::mutex> lk(m);
                ++streams_free;
                stream_cv.notify_one();
            };
            try {
                auto& packet = *t.packet;
                link(packet.layout.transfer_in);
                for (std::size_t k = 0; k < packet.block_ids.size(); ++k) {
                    const auto view = view_of(packet, k);
                    for (const auto& [name, kern] : s.kernels) call(s, name, kern->device, view, phys);
                }
                link(packet.layout.transfer_out);
            } catch (...) {
                release();
                throw;
            }
            release();
            for (int b : t.packet->block_ids) ++s.counts[static_cast<std::size_t>(b)];
            if (s.mover_team >= 0) {
                std::lock_guard<std::mutex> lk(m);
                push(s.mover_team, Task{Task::Move, t.stage, -1, t.packet});
                return;
            }
            unpack(*t.packet, *s.mesh);
            for (int b : t.packet->block_ids) route(c, s, b);
            return;
        }
        case Task::Move:
            unpack(*t.packet, *s.mesh);
            for (int b : t.packet->block_ids) route(c, s, b);
            return;
        }
    }

    void fail(Cycle& c, std::exception_ptr e) {
        if (!c.error) c.error = e;
        c.aborted = true;
        for (auto& team : teams) team.queue.clear();
        work_cv.notify_all();
        stream_cv.notify_all();
        done_cv.notify_all();
    }

    void worker(int team) {
        std::map<std::string, ScratchArena> arenas;
        std::unique_lock<std::mutex> lk(m);
        for (;;) {
            Task t;
            int from = -1;
            work_cv.wait(lk, [&] { return shutdown || take(team, t, from); });
            if (from < 0) return;  // shutdown
            Cycle& c = *cycle;
            ++active;
            ++teams[static_cast<std::size_t>(team)].active;
            lk.unlock();
            const auto t0 = Clock::now();
            std::exception_ptr error;
            try {
                execute(c, t, arenas);
            } catch (const Aborted&) {
            } catch (...) {
                error = std::current_exception();
            }
            const double busy = seconds_since(t0);
            lk.lock();
            if (error) fail(c, error);
            --active;
            --teams[static_cast<std::size_t>(team)].active;
            ++progress;
            ++teams[static_cast<std::size_t>(from)].items;
            teams[static_cast<std::size_t>(team)].busy += busy;
            if (from != team) teams[static_cast<std::size_t>(team)].donated_busy += busy;
            c.stage_busy[t.kind == Task::Move ? std::string("mover") : c.stages[static_cast<std::size_t>(t.stage)].key] +=
                busy;
            done_cv.notify_all();
        }
    }

    std::string diagnostics(const Cycle& c) const {
        std::string out = std::to_string(c.sinks_done) + "/" + std::to_string(c.nblocks) + " blocks finished;";
        for (const auto& t : teams)
            out += " " + t.cfg.name + ": queued=" + std::to_string(t.queue.size()) + " pushed=" +
                   std::to_string(t.pushed) + "/" + std::to_string(t.expected) + " busy=" + std::to_string(t.active) + ";";
        for (const auto& s : c.stages)
            if (s.device == Device::GPU)
                out += " " + s.key + ": batched " + std::to_string(s.received) + "/" + std::to_string(s.expected) + ";";
        return out;
    }
};

Runtime::Runtime(PipelineConfig cfg, const KernelRegistry& registry)
    : impl_(std::make_unique<Impl>(std::move(cfg), registry)) {
    auto& im = *impl_;
    im.cfg.validate();
    for (const auto& t : im.cfg.teams) im.teams.push_back(Team{t, -1, {}, 0, 0, 0, 0.0, 0.0, 0});
    for (const auto& [from, to] : im.cfg.donation_edges) {
        auto find = [&](const std::string& n) {
            for (std::size_t i = 0; i < im.teams.size(); ++i)
                if (im.teams[i].cfg.name == n) return static_cast<int>(i);
            return -1;
        };
        if (find(from) < 0)
            im.distributor_donates_to = find(to);
        else
            im.teams[static_cast<std::size_t>(find(from))].donate_to = find(to);
    }
    im.teams_created = im.teams.size();
    for (std::size_t t = 0; t < im.teams.size(); ++t)
        for (int w = 0; w < im.teams[t].cfg.workers; ++w) {
            im.threads.emplace_back([&im, t] { im.worker(static_cast<int>(t)); });
            ++im.threads_created;
        }
}

Runtime::~Runtime() {
    {
        std::lock_guard<std::mutex> lk(impl_->m);
        impl_->shutdown = true;
    }
    impl_->work_cv.notify_all();
    for (auto& t : impl_->threads) t.join();
}

const PipelineConfig& Runtime::config() const { return impl_->cfg; }
std::size_t Runtime::team_count() const { return impl_->teams.size(); }
std::size_t Runtime::threads_created() const { return impl_->threads_created; }
std::size_t Runtime::teams_created() const { return impl_->teams_created; }

std::size_t Runtime::idle_teams() const {
    std::lock_guard<std::mutex> lk(impl_->m);
    std::size_t n = 0;
    for (const auto& t : impl_->teams) n += (t.active == 0 && t.queue.empty()) ? 1 : 0;
    return n;
}

std::unique_ptr<Runtime> start_teams(const PipelineConfig& cfg) { return std::make_unique<Runtime>(cfg); }

namespace {

/// Bresenham-style split: block k goes to the host twin when the running
/// share floor((k + 1) r) steps up.
bool to_twin(std::size_t k, double ratio) {
    return std::floor(static_cast<double>(k + 1) * ratio) > std::floor(static_cast<double>(k) * ratio);
}

}  // namespace

RunReport Runtime::run_cycle(const ExecutablePlan& plan, BlockMesh& mesh, const StepInputs& inputs) {
    auto& im = *impl_;
    const auto started = Clock::now();
    RunReport report;
    report.teams_created = im.teams_created;
    report.cycles = 1;
    mesh.fill_halos();
    if (plan.empty()) {
        report.checksums = mesh.checksums();
        return report;
    }

    const auto& topo = plan.topology;
    Cycle c;
    c.inputs = inputs;
    c.externals = {{"dt", inputs.dt}};
    c.main = &mesh;
    c.nblocks = static_cast<std::size_t>(mesh.nblocks());
    c.n_per_packet = im.cfg.n_blocks_per_packet;
    c.nbranches = static_cast<int>(topo.branches.size());
    c.merge_barrier = topo.merge.has_value();
    c.arrivals.assign(c.nblocks, 0);
    if (topo.duplicate) c.branch_meshes.assign(topo.branches.size(), mesh);
    if (topo.merge) {
        if (!topo.merge->kernel || topo.merge->kernel->empty())
            throw Error(Errc::MissingKernel, "merge at " + topo.merge->at + " has no merge kernel");
        if (c.nbranches != 2) throw Error(Errc::InvalidConfig, "merge kernels combine exactly two branches");
        c.merge = im.registry.merge(*topo.merge->kernel);
    }

    std::map<TeamRole, std::vector<int>> by_role;
    for (std::size_t t = 0; t < im.teams.size(); ++t)
        by_role[im.teams[t].cfg.role].push_back(static_cast<int>(t));
    std::map<TeamRole, std::size_t> next_team;
    auto assign = [&](TeamRole role, const std::string& what) {
        auto it = by_role.find(role);
        if (it == by_role.end())
            throw Error(Errc::InvalidConfig, what + " needs a " + std::string(to_string(role)) + " team");
        return it->second[next_team[role]++ % it->second.size()];
    };
    const int mover = by_role.count(TeamRole::Mover) ? by_role[TeamRole::Mover].front() : -1;

    // stage list: branches in order, then the tail; twin last
    std::size_t n_stages = topo.tail.size();
    for (const auto& b : topo.branches) n_stages += b.size();
    const bool split = im.cfg.split_ratio > 0.0 && !topo.duplicate &&
                       plan.function(topo.branches[0][0]).tf.device == Device::GPU;
    c.stages.resize(n_stages + (split ? 1 : 0));
    auto make_stage = [&](std::size_t si, std::size_t tf, BlockMesh* m, bool host_twin) {
        const auto& fn = plan.function(tf);
        auto& s = c.stages[si];
        s.tf = tf;
        s.device = host_twin ? Device::CPU : fn.tf.device;
        s.key = fn.tf.id + (host_twin ? ":host" : "");
        s.spec = fn.tf.spec;
        s.mesh = m;
        for (const auto& call : fn.calls) {
            const auto& k = im.registry.get(call.routine);
            if (s.device == Device::GPU && !k.device)
                throw Error(Errc::DeviceVariantUnavailable, call.routine + " has no device variant");
            if (s.device == Device::CPU && !k.host)
                throw Error(Errc::DeviceVariantUnavailable, call.routine + " has no host variant");
            s.kernels.emplace_back(call.routine, &k);
        }
        if (s.device == Device::GPU) {
            s.team = assign(TeamRole::DeviceProxy, s.key);
            s.mover_team = mover;
            s.full_layout = layout(s.spec, c.n_per_packet, m->params());
        } else {
            s.team = assign(TeamRole::HostCompute, s.key);
        }
        s.counts = std::make_unique<std::atomic<int>[]>(c.nblocks);
        for (std::size_t b = 0; b < c.nblocks; ++b) s.counts[b] = 0;
    };
    std::size_t si = 0;
    for (std::size_t br = 0; br < topo.branches.size(); ++br) {
        BlockMesh* m = topo.duplicate ? &c.branch_meshes[br] : &mesh;
        c.heads.push_back(static_cast<int>(si));
        const auto& chain = topo.branches[br];
        for (std::size_t k = 0; k < chain.size(); ++k, ++si) {
            make_stage(si, chain[k], m, false);
            c.stages[si].next = k + 1 < chain.size() ? static_cast<int>(si + 1) : -1;
            c.stages[si].branch_end = k + 1 == chain.size();
            c.stages[si].expected = c.nblocks;
        }
    }
    if (!topo.tail.empty()) {
        c.tail_head = static_cast<int>(si);
        for (std::size_t k = 0; k < topo.tail.size(); ++k, ++si) {
            make_stage(si, topo.tail[k], &mesh, false);
            c.stages[si].next = k + 1 < topo.tail.size() ? static_cast<int>(si + 1) : -1;
            c.stages[si].expected = c.nblocks;
        }
    }
    if (!topo.duplicate && topo.branches.size() == 1 && c.merge_barrier) c.merge_barrier = false;
    if (split) {
        c.twin = static_cast<int>(si);
        make_stage(si, topo.branches[0][0], &mesh, true);
        auto& head = c.stages[static_cast<std::size_t>(c.heads[0])];
        c.stages[si].next = head.next;
        c.stages[si].branch_end = head.branch_end;
        std::size_t twin_blocks = 0;
        for (std::size_t k = 0; k < c.nblocks; ++k) twin_blocks += to_twin(k, im.cfg.split_ratio) ? 1 : 0;
        c.stages[si].expected = twin_blocks;
        head.expected = c.nblocks - twin_blocks;
    }

    std::vector<std::size_t> expected(im.teams.size(), 0);
    for (const auto& s : c.stages) {
        const auto tasks = s.device == Device::CPU ? s.expected : (s.expected + c.n_per_packet - 1) / c.n_per_packet;
        expected[static_cast<std::size_t>(s.team)] += tasks;
        if (s.device == Device::GPU && s.mover_team >= 0) expected[static_cast<std::size_t>(s.mover_team)] += tasks;
    }

    {
        std::lock_guard<std::mutex> lk(im.m);
        for (std::size_t t = 0; t < im.teams.size(); ++t) {
            auto& team = im.teams[t];
            team.queue.clear();
            team.pushed = 0;
            team.expected = expected[t];
            team.items = 0;
            team.busy = team.donated_busy = 0.0;
        }
        im.streams_free = im.cfg.streams;
        im.cycle = &c;
    }
    im.work_cv.notify_all();

    // distributor on the calling thread
    std::size_t distributed = 0;
    try {
        for (std::size_t b = 0; b < c.nblocks; ++b) {
            {
                std::lock_guard<std::mutex> guard(im.m);
                if (c.aborted) break;
            }
            for (std::size_t br = 0; br < c.heads.size(); ++br) {
                int head = c.heads[br];
                if (br == 0 && c.twin >= 0 && to_twin(b, im.cfg.split_ratio)) head = c.twin;
                im.deliver(c, head, static_cast<int>(b));
                ++distributed;
                std::lock_guard<std::mutex> guard(im.m);
                ++im.progress;
            }
        }
    } catch (...) {
        std::lock_guard<std::mutex> guard(im.m);
        im.fail(c, std::current_exception());
    }

    std::unique_lock<std::mutex> lk(im.m);
    auto last_progress = im.progress;
    auto last_change = Clock::now();
    im.distributor_busy = 0.0;
    im.distributor_items = 0;
    std::map<std::string, ScratchArena> arenas;
    while (!c.aborted && !(c.sinks_done == c.nblocks && im.active == 0)) {
        const int target = im.distributor_donates_to;
        if (target >= 0 && !im.teams[static_cast<std::size_t>(target)].queue.empty()) {
            auto& q = im.teams[static_cast<std::size_t>(target)].queue;
            Task t = std::move(q.front());
            q.pop_front();
            ++im.active;
            lk.unlock();
            const auto t0 = Clock::now();
            std::exception_ptr error;
            try {
                im.execute(c, t, arenas);
            } catch (const Aborted&) {
            } catch (...) {
                error = std::current_exception();
            }
            const double busy = seconds_since(t0);
            lk.lock();
            if (error) im.fail(c, error);
            --im.active;
            ++im.progress;
            ++im.teams[static_cast<std::size_t>(target)].items;
            ++im.distributor_items;
            im.distributor_busy += busy;
            c.stage_busy[t.kind == Task::Move ? std::string("mover") : c.stages[static_cast<std::size_t>(t.stage)].key] +=
                busy;
            im.done_cv.notify_all();
            continue;
        }
        im.done_cv.wait_for(lk, std::chrono::milliseconds(20));
        if (im.progress != last_progress) {
            last_progress = im.progress;
            last_change = Clock::now();
        } else if (seconds_since(last_change) > im.cfg.watchdog_s) {
            im.fail(c, std::make_exception_ptr(Error(
                           Errc::Deadlock, "no progress for " + std::to_string(im.cfg.watchdog_s) + " s: " + im.diagnostics(c))));
        }
    }
    if (c.aborted) {
        im.done_cv.wait(lk, [&] { return im.active == 0; });
        im.cycle = nullptr;
        std::rethrow_exception(c.error);
    }
    im.cycle = nullptr;

    for (std::size_t s = 0; s < c.stages.size(); ++s) {
        const auto& st = c.stages[s];
        std::size_t blocks = 0;
        for (std::size_t b = 0; b < c.nblocks; ++b) blocks += static_cast<std::size_t>(st.counts[b].load());
        report.stage_blocks[st.key] += blocks;
    }
    // every task function runs each block exactly once (head and twin share)
    std::map<std::size_t, std::vector<int>> per_tf;
    for (const auto& st : c.stages) {
        auto& v = per_tf[st.tf];
        v.resize(c.nblocks, 0);
        for (std::size_t b = 0; b < c.nblocks; ++b) v[b] += st.counts[b].load();
    }
    for (const auto& [tf, v] : per_tf)
        for (int n : v) report.exactly_once = report.exactly_once && n == 1;

    report.team_items["distributor"] = distributed;
    report.team_busy_s["distributor"] = im.distributor_busy;
    report.donated_busy_s["distributor"] = im.distributor_busy;
    report.team_items["distributor_donated"] = im.distributor_items;
    for (const auto& t : im.teams) {
        report.team_items[t.cfg.name] = t.items;
        report.team_busy_s[t.cfg.name] = t.busy;
        report.donated_busy_s[t.cfg.name] = t.donated_busy;
    }
    report.stage_busy_s = c.stage_busy;
    report.packets = c.packets;
    report.merges = c.merges;
    report.bytes_in = c.bytes_in;
    report.bytes_out = c.bytes_out;
    lk.unlock();

    if (post_cycle) post_cycle(mesh);
    report.wall_s = seconds_since(started);
    report.checksums = mesh.checksums();
    return report;
}

RunReport run_steps(Runtime& rt, const ExecutablePlan& plan, BlockMesh& mesh, const StepInputs& inputs, int steps) {
    RunReport total;
    total.teams_created = rt.teams_created();
    for (int s = 0; s < steps; ++s) {
        auto r = rt.run_cycle(plan, mesh, inputs);
        total.wall_s += r.wall_s;
        total.cycles += r.cycles;
        for (const auto& [k, v] : r.stage_busy_s) total.stage_busy_s[k] += v;
        for (const auto& [k, v] : r.stage_blocks) total.stage_blocks[k] += v;
        for (const auto& [k, v] : r.team_items) total.team_items[k] += v;
        for (const auto& [k, v] : r.team_busy_s) total.team_busy_s[k] += v;
        for (const auto& [k, v] : r.donated_busy_s) total.donated_busy_s[k] += v;
        total.packets += r.packets;
        total.merges += r.merges;
        total.bytes_in += r.bytes_in;
        total.bytes_out += r.bytes_out;
        total.exactly_once = total.exactly_once && r.exactly_once;
    }
    total.teams_created = rt.teams_created();
    total.checksums = mesh.checksums();
    return total;
}

}  // namespace orcha
