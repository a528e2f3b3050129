#pragma once

// Fixed-tick reference scheduler (1 us resolution) used to cross-check the
// event-driven RTDS implementation. Everything is recomputed per tick from
// plain arrays; only the extratime rotation keeps order between ticks.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <optional>
#include <tuple>
#include <vector>

#include "rsaas/platform.hpp"
#include "rsaas/rtds/scheduler.hpp"

namespace oracle {

struct TickVcpu {
    std::int64_t budget_us;
    std::int64_t period_us;
    bool extratime;
    std::vector<std::uint32_t> affinity;
};

struct ScriptStep {
    std::int64_t at_us;
    std::uint32_t vcpu;
    bool wake;  // false: block
    std::int64_t new_budget_us = 0;  // > 0: budget change instead of wake/block
};

struct TickInstance {
    rsaas::SchedPolicy policy = rsaas::SchedPolicy::EDF;
    std::uint32_t pcpus = 1;
    std::vector<TickVcpu> vcpus;
    std::vector<ScriptStep> script;  // sorted by time, stable
    std::int64_t horizon_us = 100000;
    std::int64_t extra_slice_us = 1000;
};

struct TickSegment {
    std::uint32_t pcpu;
    std::uint32_t vcpu;
    bool extra;
    std::int64_t start_us;
    std::int64_t end_us;
    auto key() const { return std::tie(pcpu, start_us, vcpu, extra, end_us); }
    bool operator==(const TickSegment& o) const { return key() == o.key(); }
    bool operator<(const TickSegment& o) const { return key() < o.key(); }
};

inline std::vector<TickSegment> run_tick_oracle(const TickInstance& in) {
    struct V {
        std::int64_t left = 0, deadline = 0, slice = 0;
        bool armed = false, wants = false, extra_cls = false;
        int on = -1;
    };
    const std::size_t n = in.vcpus.size();
    std::vector<std::int64_t> budget(n);
    for (std::size_t i = 0; i < n; ++i) budget[i] = in.vcpus[i].budget_us;
    std::vector<V> s(n);
    std::deque<std::uint32_t> extra;
    std::vector<std::optional<std::pair<std::uint32_t, bool>>> occ(in.pcpus);
    std::vector<std::int64_t> since(in.pcpus, 0);
    std::vector<TickSegment> out;
    std::size_t step = 0;

    auto can_run = [&](std::uint32_t v, std::uint32_t p) {
        const auto& a = in.vcpus[v].affinity;
        return std::find(a.begin(), a.end(), p) != a.end();
    };
    auto drop_extra = [&](std::uint32_t v) { extra.erase(std::remove(extra.begin(), extra.end(), v), extra.end()); };
    auto join = [&](std::uint32_t v) {
        if (s[v].left == 0 && in.vcpus[v].extratime) {
            extra.push_back(v);
            s[v].slice = in.extra_slice_us;
        }
    };

    for (std::int64_t t = 0; t <= in.horizon_us; ++t) {
        if (t > 0) {
            for (std::uint32_t v = 0; v < n; ++v) {
                if (s[v].on < 0) continue;
                if (!s[v].extra_cls) {
                    if (s[v].left > 0 && --s[v].left == 0 && s[v].wants) join(v);
                } else if (--s[v].slice <= 0) {
                    drop_extra(v);
                    extra.push_back(v);
                    s[v].slice = in.extra_slice_us;
                }
            }
        }
        if (t == in.horizon_us) break;

        for (; step < in.script.size() && in.script[step].at_us == t; ++step) {
            const auto& e = in.script[step];
            V& v = s[e.vcpu];
            if (e.new_budget_us > 0) {
                budget[e.vcpu] = e.new_budget_us;
                v.left = std::min(v.left, e.new_budget_us);
                if (v.wants) {
                    drop_extra(e.vcpu);
                    join(e.vcpu);
                }
            } else if (e.wake && !v.wants) {
                v.wants = true;
                if (!v.armed || v.deadline <= t) {
                    v.left = budget[e.vcpu];
                    v.deadline = t + in.vcpus[e.vcpu].period_us;
                    v.slice = in.extra_slice_us;
                    v.armed = true;
                }
                join(e.vcpu);
            } else if (!e.wake && v.wants) {
                v.wants = false;
                drop_extra(e.vcpu);
            }
        }
        for (std::uint32_t v = 0; v < n; ++v) {
            if (!s[v].armed || s[v].deadline != t) continue;
            drop_extra(v);
            s[v].left = budget[v];
            s[v].deadline = t + in.vcpus[v].period_us;
            s[v].slice = in.extra_slice_us;
        }

        std::vector<std::uint32_t> order;
        for (std::uint32_t v = 0; v < n; ++v)
            if (s[v].wants && s[v].left > 0) order.push_back(v);
        std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
            const std::int64_t ka = in.policy == rsaas::SchedPolicy::EDF ? s[a].deadline : in.vcpus[a].period_us;
            const std::int64_t kb = in.policy == rsaas::SchedPolicy::EDF ? s[b].deadline : in.vcpus[b].period_us;
            return ka != kb ? ka < kb : a < b;
        });
        std::vector<std::optional<std::pair<std::uint32_t, bool>>> next(in.pcpus);
        auto place = [&](std::uint32_t v, bool cls_extra) {
            int choice = -1;
            if (s[v].on >= 0 && !next[s[v].on]) choice = s[v].on;
            if (choice < 0)
                for (std::uint32_t p = 0; p < in.pcpus && choice < 0; ++p)
                    if (can_run(v, p) && !next[p] && !occ[p]) choice = static_cast<int>(p);
            if (choice < 0)
                for (std::uint32_t p = 0; p < in.pcpus && choice < 0; ++p)
                    if (can_run(v, p) && !next[p]) choice = static_cast<int>(p);
            if (choice >= 0) next[choice] = std::make_pair(v, cls_extra);
        };
        for (auto v : order) place(v, false);
        for (auto v : extra) place(v, true);

        for (auto& v : s) v.on = -1;
        for (std::uint32_t p = 0; p < in.pcpus; ++p) {
            if (next[p] != occ[p]) {
                if (occ[p] && since[p] < t) out.push_back({p, occ[p]->first, occ[p]->second, since[p], t});
                since[p] = t;
            }
            occ[p] = next[p];
            if (occ[p]) {
                s[occ[p]->first].on = static_cast<int>(p);
                s[occ[p]->first].extra_cls = occ[p]->second;
            }
        }
    }
    for (std::uint32_t p = 0; p < in.pcpus; ++p)
        if (occ[p] && since[p] < in.horizon_us) out.push_back({p, occ[p]->first, occ[p]->second, since[p], in.horizon_us});
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace oracle
