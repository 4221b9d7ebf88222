#include "orcha/error.hpp"
#include "orcha/planner.hpp"

namespace orcha {

namespace {

[[noreturn]] void unsupported(const std::string& why) {
    throw Error(Errc::UnsupportedTopology, why);
}

}  // namespace

PipelinePlan derive_topology(const PlanGraph& plan) {
    PipelinePlan out;
    const std::size_t n = plan.task_functions.size();
    if (n == 0) return out;

    std::vector<std::vector<std::size_t>> succ(n), pred(n);
    std::vector<bool> root(n, false), sink(n, false);
    auto index = [&](const std::string& id) {
        auto i = plan.index_of(id);
        if (!i) throw Error(Errc::ParseError, "edge references unknown task function '" + id + "'");
        return *i;
    };
    for (const auto& e : plan.edges) {
        const bool from_begin = e.from == kBeginId;
        const bool to_end = e.to == kEndId;
        if (from_begin && to_end) continue;
        if (from_begin) {
            root[index(e.to)] = true;
        } else if (to_end) {
            sink[index(e.from)] = true;
        } else {
            auto a = index(e.from), b = index(e.to);
            succ[a].push_back(b);
            pred[b].push_back(a);
            const auto& ta = plan.task_functions[a];
            const auto& tb = plan.task_functions[b];
            if (ta.device == Device::GPU && tb.device == Device::CPU) out.movers.emplace_back(a, b);
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        const auto& id = plan.task_functions[i].id;
        if (succ[i].size() + (sink[i] ? 1 : 0) > 1)
            unsupported(id + " fans out to several consumers; only the distributor may duplicate blocks");
        if (succ[i].empty() && !sink[i]) unsupported(id + " has no consumer");
        if (root[i] && !pred[i].empty()) unsupported(id + " is fed by both the distributor and another task function");
    }

    // Follows single-input links from `start`; stops before a join.
    auto walk = [&](std::size_t start) {
        std::vector<std::size_t> chain{start};
        std::size_t cur = start;
        while (!succ[cur].empty()) {
            auto next = succ[cur].front();
            if (pred[next].size() > 1) break;
            chain.push_back(next);
            cur = next;
        }
        return chain;
    };

    std::vector<std::size_t> roots;
    for (std::size_t i = 0; i < n; ++i)
        if (root[i]) roots.push_back(i);
    if (roots.empty()) unsupported("no task function is fed by the distributor");

    std::optional<std::size_t> join;
    bool join_at_end = false;
    for (auto r : roots) {
        auto chain = walk(r);
        const auto last = chain.back();
        if (sink[last]) {
            join_at_end = true;
        } else {
            auto j = succ[last].front();
            if (join && *join != j) unsupported("branches meet in more than one merge point");
            join = j;
        }
        out.branches.push_back(std::move(chain));
    }

    std::size_t covered = 0;
    for (const auto& b : out.branches) covered += b.size();

    if (roots.size() == 1) {
        if (join) unsupported("a single chain cannot reach a merge point");
    } else {
        out.duplicate = true;
        if (join && join_at_end) unsupported("some branches end at exit while others merge at a task function");
        if (join) {
            if (pred[*join].size() != roots.size())
                unsupported("merge point " + plan.task_functions[*join].id + " is not fed by every branch");
            out.tail = walk(*join);
            if (!sink[out.tail.back()]) unsupported("a second merge point follows the first");
            covered += out.tail.size();
        }
        PipelinePlan::Merge merge;
        merge.at = join ? plan.task_functions[*join].id : std::string(kEndId);
        if (auto it = plan.merge_kernels.find(merge.at); it != plan.merge_kernels.end()) merge.kernel = it->second;
        out.merge = std::move(merge);
    }
    if (covered != n) unsupported("task functions outside the series-parallel pipeline");
    return out;
}

}  // namespace orcha
