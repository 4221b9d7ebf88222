#include "orcha/perf_sim.hpp"

#include "orcha/error.hpp"

#include <cmath>
#include <cstdio>
#include <deque>
#include <functional>
#include <queue>

namespace orcha {

void CostModel::validate() const {
    auto bad = [](const std::string& why) { return Error(Errc::InvalidConfig, why); };
    if (!(alpha_us >= 0) || !(beta_us_per_kib >= 0) || !(distributor_us >= 0) || !(mover_us >= 0) || !(merge_us >= 0))
        throw bad("costs must be non-negative");
    for (const auto& [name, k] : kernels)
        if (!(k.host_us >= 0) || !(k.device_us >= 0)) throw bad("kernel '" + name + "' has a negative cost");
    if (cpu_cores < 1 || device_slots < 1 || streams < 1) throw bad("cpu_cores, device_slots and streams must be >= 1");
}

SimOptions sim_options_from(const PipelineConfig& cfg) {
    return SimOptions{cfg.teams, cfg.donation_edges, cfg.split_ratio};
}

double replay_makespan(const std::vector<SimEvent>& events) {
    double m = 0.0;
    for (const auto& e : events) m = std::max(m, e.time_us);
    return m;
}

namespace {

struct Packet {
    int stage = 0;
    std::vector<int> blocks;
    std::size_t in_bytes = 0, out_bytes = 0;
    std::size_t id = 0;
};

struct HostTask {
    enum Kind { Distribute, Compute, Move } kind = Compute;
    int stage = 0;
    int block = 0;
    std::shared_ptr<Packet> packet;
    double duration = 0.0;
};

struct SimTeam {
    std::string name;
    int workers = 1;
    int idle = 1;
    int donate_to = -1;
    std::deque<HostTask> queue;
    std::size_t expected = 0, pushed = 0;
    double busy = 0.0, donated_busy = 0.0;
};

struct SimStage {
    std::string key;
    bool device = false;
    double host_cost = 0.0, device_cost = 0.0;
    int next = -1;
    bool branch_end = false;
    int team = -1;
    std::size_t expected = 0, received = 0;
    std::vector<int> batch;
    ConsolidatedArgSpec spec;
};

struct Event {
    double t;
    std::uint64_t seq;
    std::function<void()> fn;
    bool operator>(const Event& o) const { return t != o.t ? t > o.t : seq > o.seq; }
};

bool to_twin(std::size_t k, double ratio) {
    return std::floor(static_cast<double>(k + 1) * ratio) > std::floor(static_cast<double>(k) * ratio);
}

class Simulator {
public:
    Simulator(const ExecutablePlan& plan, const CostModel& cost, std::size_t n_blocks, std::size_t n_per_packet,
              const SimOptions& options)
        : cost_(cost), nblocks_(n_blocks), n_(n_per_packet) {
        cost.validate();
        if (n_per_packet < 1) throw Error(Errc::InvalidConfig, "blocks per packet must be at least 1");
        build_teams(plan, options);
        build_stages(plan, options);
    }

    SimReport run() {
        tokens_ = cost_.streams;
        slots_ = cost_.device_slots;
        for (std::size_t b = 0; b < nblocks_; ++b)
            for (std::size_t br = 0; br < heads_.size(); ++br) {
                int head = heads_[br];
                if (br == 0 && twin_ >= 0 && to_twin(b, split_)) head = twin_;
                push(0, HostTask{HostTask::Distribute, head, static_cast<int>(b), nullptr, cost_.distributor_us});
            }
        dispatch();
        while (!events_.empty()) {
            auto ev = events_.top();
            events_.pop();
            now_ = ev.t;
            ev.fn();
            dispatch();
        }
        if (sinks_ != nblocks_) throw Error(Errc::Deadlock, "modeled pipeline stalled with " + std::to_string(sinks_) +
                                                                "/" + std::to_string(nblocks_) + " blocks finished");
        report_.makespan_us = replay_makespan(report_.events);
        for (const auto& t : teams_) {
            report_.team_busy_us[t.name] = t.busy;
            report_.donated_busy_us[t.name] = t.donated_busy;
        }
        report_.link_capacity = 1.0;
        report_.device_capacity = cost_.device_slots;
        report_.cpu_capacity = cpu_workers_;
        return std::move(report_);
    }

private:
    void build_teams(const ExecutablePlan& plan, const SimOptions& options) {
        teams_.push_back(SimTeam{"distributor", 1, 1, -1, {}, 0, 0, 0, 0});
        for (const auto& t : options.teams) {
            if (t.role == TeamRole::DeviceProxy) continue;
            if (t.workers < 1) throw Error(Errc::InvalidConfig, "team '" + t.name + "' needs at least one worker");
            teams_.push_back(SimTeam{t.name, t.workers, t.workers, -1, {}, 0, 0, 0, 0});
            (t.role == TeamRole::Mover ? movers_ : hosts_).push_back(static_cast<int>(teams_.size() - 1));
        }
        if (hosts_.empty()) {
            teams_.push_back(SimTeam{"cpu", cost_.cpu_cores, cost_.cpu_cores, -1, {}, 0, 0, 0, 0});
            hosts_.push_back(static_cast<int>(teams_.size() - 1));
        }
        bool gpu = false;
        for (const auto& fn : plan.functions) gpu = gpu || fn.tf.device == Device::GPU;
        if (gpu && movers_.empty()) {
            teams_.push_back(SimTeam{"mover", 1, 1, -1, {}, 0, 0, 0, 0});
            movers_.push_back(static_cast<int>(teams_.size() - 1));
        }
        for (int h : hosts_) cpu_workers_ += teams_[static_cast<std::size_t>(h)].workers;
        auto find = [&](const std::string& n) {
            for (std::size_t i = 0; i < teams_.size(); ++i)
                if (teams_[i].name == n) return static_cast<int>(i);
            throw Error(Errc::InvalidConfig, "donation edge names unknown team '" + n + "'");
        };
        for (const auto& [from, to] : options.donation_edges) {
            auto& t = teams_[static_cast<std::size_t>(find(from))];
            if (t.donate_to >= 0) throw Error(Errc::InvalidConfig, "team '" + from + "' has more than one donation edge");
            t.donate_to = find(to);
            if (t.donate_to == find(from)) throw Error(Errc::InvalidConfig, "team '" + from + "' cannot donate to itself");
        }
    }

    double kernel_cost(const std::string& routine, bool device) const {
        auto it = cost_.kernels.find(routine);
        if (it == cost_.kernels.end()) throw Error(Errc::InvalidConfig, "cost model has no entry for '" + routine + "'");
        return device ? it->second.device_us : it->second.host_us;
    }

    void build_stages(const ExecutablePlan& plan, const SimOptions& options) {
        if (plan.empty()) return;
        const auto& topo = plan.topology;
        std::size_t rr = 0;
        auto make = [&](std::size_t tf, bool twin) {
            const auto& fn = plan.function(tf);
            SimStage s;
            s.device = fn.tf.device == Device::GPU && !twin;
            s.key = fn.tf.id + (twin ? ":host" : "");
            s.spec = fn.tf.spec;
            for (const auto& c : fn.calls) {
                if (s.device)
                    s.device_cost += kernel_cost(c.routine, true);
                else
                    s.host_cost += kernel_cost(c.routine, false);
            }
            if (!s.device) s.team = hosts_[rr++ % hosts_.size()];
            s.expected = nblocks_;
            stages_.push_back(std::move(s));
            return static_cast<int>(stages_.size() - 1);
        };
        for (const auto& chain : topo.branches) {
            int prev = -1;
            for (auto tf : chain) {
                int si = make(tf, false);
                if (prev < 0)
                    heads_.push_back(si);
                else
                    stages_[static_cast<std::size_t>(prev)].next = si;
                prev = si;
            }
            stages_[static_cast<std::size_t>(prev)].branch_end = true;
        }
        nbranches_ = static_cast<int>(topo.branches.size());
        merge_ = topo.merge.has_value() && topo.duplicate;
        int prev = -1;
        for (auto tf : topo.tail) {
            int si = make(tf, false);
            if (prev < 0)
                tail_head_ = si;
            else
                stages_[static_cast<std::size_t>(prev)].next = si;
            prev = si;
        }
        split_ = options.split_ratio;
        if (split_ > 0.0 && !topo.duplicate && stages_[static_cast<std::size_t>(heads_[0])].device) {
            auto& head = stages_[static_cast<std::size_t>(heads_[0])];
            const int next = head.next;
            const bool end = head.branch_end;
            twin_ = make(topo.branches[0][0], true);
            auto& tw = stages_[static_cast<std::size_t>(twin_)];
            tw.next = next;
            tw.branch_end = end;
            std::size_t n_twin = 0;
            for (std::size_t k = 0; k < nblocks_; ++k) n_twin += to_twin(k, split_) ? 1 : 0;
            tw.expected = n_twin;
            stages_[static_cast<std::size_t>(heads_[0])].expected = nblocks_ - n_twin;
        }
        arrivals_.assign(nblocks_, 0);
        teams_[0].expected = nblocks_ * heads_.size();
        for (const auto& s : stages_) {
            if (s.device)
                teams_[static_cast<std::size_t>(movers_.front())].expected += (s.expected + n_ - 1) / n_;
            else
                teams_[static_cast<std::size_t>(s.team)].expected += s.expected;
        }
    }

    void at(double t, std::function<void()> fn) { events_.push(Event{t, seq_++, std::move(fn)}); }

    void log(double start, const std::string& resource, std::string what) {
        report_.events.push_back(SimEvent{now_, resource, std::move(what), start});
    }

    void push(int team, HostTask t) {
        auto& q = teams_[static_cast<std::size_t>(team)];
        q.queue.push_back(std::move(t));
        ++q.pushed;
    }

    void start(int worker_team, int queue_team) {
        auto& src = teams_[static_cast<std::size_t>(queue_team)];
        HostTask t = std::move(src.queue.front());
        src.queue.pop_front();
        --teams_[static_cast<std::size_t>(worker_team)].idle;
        const double begin = now_;
        at(now_ + t.duration, [this, t, worker_team, queue_team, begin] {
            auto& w = teams_[static_cast<std::size_t>(worker_team)];
            ++w.idle;
            w.busy += t.duration;
            if (worker_team != queue_team) w.donated_busy += t.duration;
            finish(t, teams_[static_cast<std::size_t>(queue_team)].name, begin);
        });
    }

    void dispatch() {
        for (std::size_t i = 0; i < teams_.size(); ++i)
            while (teams_[i].idle > 0 && !teams_[i].queue.empty()) start(static_cast<int>(i), static_cast<int>(i));
        for (std::size_t i = 0; i < teams_.size(); ++i) {
            auto& t = teams_[i];
            if (t.donate_to < 0 || t.pushed != t.expected || !t.queue.empty()) continue;
            while (t.idle > 0 && !teams_[static_cast<std::size_t>(t.donate_to)].queue.empty())
                start(static_cast<int>(i), t.donate_to);
        }
    }

    void finish(const HostTask& t, const std::string& queue_name, double begin) {
        switch (t.kind) {
        case HostTask::Distribute:
            log(begin, queue_name, "distribute block " + std::to_string(t.block));
            deliver(t.stage, t.block);
            break;
        case HostTask::Compute:
            report_.cpu_busy_us += t.duration;
            log(begin, queue_name, stages_[static_cast<std::size_t>(t.stage)].key + " block " + std::to_string(t.block));
            route(t.stage, t.block);
            break;
        case HostTask::Move:
            log(begin, queue_name, "unpack packet " + std::to_string(t.packet->id));
            for (int b : t.packet->blocks) route(t.stage, b);
            break;
        }
    }

    void deliver(int si, int block) {
        auto& s = stages_[static_cast<std::size_t>(si)];
        if (!s.device) {
            push(s.team, HostTask{HostTask::Compute, si, block, nullptr, s.host_cost});
            return;
        }
        s.batch.push_back(block);
        ++s.received;
        if (s.batch.size() < n_ && s.received < s.expected) return;
        auto pk = std::make_shared<Packet>();
        pk->stage = si;
        pk->blocks.swap(s.batch);
        const auto lay = layout(s.spec, pk->blocks.size(), cost_.mesh);
        pk->in_bytes = lay.transfer_in;
        pk->out_bytes = lay.transfer_out;
        pk->id = report_.packets++;
        if (tokens_ > 0) {
            --tokens_;
            transfer(pk, true);
        } else {
            token_wait_.push_back(pk);
        }
    }

    void route(int si, int block) {
        const auto& s = stages_[static_cast<std::size_t>(si)];
        if (s.next >= 0) return deliver(s.next, block);
        if (s.branch_end && merge_) {
            if (++arrivals_[static_cast<std::size_t>(block)] < nbranches_) return;
            const double begin = now_;
            at(now_ + cost_.merge_us, [this, block, begin] {
                log(begin, "merge", "merge block " + std::to_string(block));
                if (tail_head_ >= 0)
                    deliver(tail_head_, block);
                else
                    sink(block);
            });
            return;
        }
        sink(block);
    }

    void sink(int block) {
        ++sinks_;
        log(now_, "sink", "block " + std::to_string(block) + " done");
    }

    void transfer(const std::shared_ptr<Packet>& pk, bool inbound) {
        link_queue_.emplace_back(pk, inbound);
        pump_link();
    }

    void pump_link() {
        if (link_busy_ || link_queue_.empty()) return;
        auto [pk, inbound] = link_queue_.front();
        link_queue_.pop_front();
        link_busy_ = true;
        const double kib = static_cast<double>(inbound ? pk->in_bytes : pk->out_bytes) / 1024.0;
        const double dur = cost_.alpha_us + cost_.beta_us_per_kib * kib;
        const double begin = now_;
        at(now_ + dur, [this, pk = pk, inbound = inbound, dur, begin] {
            link_busy_ = false;
            report_.link_busy_us += dur;
            log(begin, "link", std::string(inbound ? "in" : "out") + " packet " + std::to_string(pk->id));
            if (inbound)
                compute(pk);
            else
                returned(pk);
            pump_link();
        });
    }

    void compute(const std::shared_ptr<Packet>& pk) {
        if (slots_ == 0) {
            slot_wait_.push_back(pk);
            return;
        }
        --slots_;
        const auto& s = stages_[static_cast<std::size_t>(pk->stage)];
        const double dur = static_cast<double>(pk->blocks.size()) * s.device_cost;
        const double begin = now_;
        at(now_ + dur, [this, pk, dur, begin] {
            ++slots_;
            report_.device_busy_us += dur;
            log(begin, "device", "compute packet " + std::to_string(pk->id));
            if (cost_.model_outbound)
                transfer(pk, false);
            else
                returned(pk);
            if (!slot_wait_.empty()) {
                auto next = slot_wait_.front();
                slot_wait_.pop_front();
                compute(next);
            }
        });
    }

    void returned(const std::shared_ptr<Packet>& pk) {
        ++tokens_;
        if (!token_wait_.empty()) {
            auto next = token_wait_.front();
            token_wait_.pop_front();
            --tokens_;
            transfer(next, true);
        }
        push(movers_.front(), HostTask{HostTask::Move, pk->stage, -1, pk, cost_.mover_us});
    }

    const CostModel& cost_;
    std::size_t nblocks_, n_;
    std::vector<SimTeam> teams_;
    std::vector<int> hosts_, movers_;
    int cpu_workers_ = 0;
    std::vector<SimStage> stages_;
    std::vector<int> heads_;
    int twin_ = -1;
    double split_ = 0.0;
    int nbranches_ = 1;
    bool merge_ = false;
    int tail_head_ = -1;
    std::vector<int> arrivals_;
    std::size_t sinks_ = 0;

    int tokens_ = 0, slots_ = 0;
    bool link_busy_ = false;
    std::deque<std::pair<std::shared_ptr<Packet>, bool>> link_queue_;
    std::deque<std::shared_ptr<Packet>> token_wait_, slot_wait_;

    std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
    std::uint64_t seq_ = 0;
    double now_ = 0.0;
    SimReport report_;
};

}  // namespace

SimReport simulate(const ExecutablePlan& plan, const CostModel& cost, std::size_t n_blocks, std::size_t n_per_packet,
                   const SimOptions& options) {
    return Simulator(plan, cost, n_blocks, n_per_packet, options).run();
}

SweepSpec parse_sweep(std::string_view text) {
    auto eq = text.find('=');
    if (eq == std::string_view::npos) throw Error(Errc::InvalidConfig, "sweep must look like key=v1,v2,...");
    SweepSpec spec;
    spec.key = std::string(text.substr(0, eq));
    if (spec.key != "nblocks" && spec.key != "streams")
        throw Error(Errc::InvalidConfig, "cannot sweep '" + spec.key + "' (use nblocks or streams)");
    auto rest = text.substr(eq + 1);
    std::size_t start = 0;
    for (;;) {
        auto comma = rest.find(',', start);
        auto item = std::string(rest.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        std::size_t used = 0;
        long value = 0;
        try {
            value = std::stol(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size() || value < 1)
            throw Error(Errc::InvalidConfig, "sweep value '" + item + "' is not a positive integer");
        spec.values.push_back(static_cast<double>(value));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return spec;
}

std::string sweep(const ExecutablePlan& plan, const CostModel& cost, std::size_t n_blocks, std::size_t n_per_packet,
                  const SweepSpec& spec, const SimOptions& options) {
    std::string csv = "p,makespan_us,link_util,device_util,cpu_util\n";
    for (double v : spec.values) {
        auto c = cost;
        auto n = n_per_packet;
        if (spec.key == "nblocks")
            n = static_cast<std::size_t>(v);
        else
            c.streams = static_cast<int>(v);
        const auto r = simulate(plan, c, n_blocks, n, options);
        char row[160];
        std::snprintf(row, sizeof row, "%ld,%.3f,%.6f,%.6f,%.6f\n", static_cast<long>(v), r.makespan_us, r.link_util(),
                      r.device_util(), r.cpu_util());
        csv += row;
    }
    return csv;
}

}  // namespace orcha
