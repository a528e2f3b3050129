#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rsaas/error.hpp"
#include "rsaas/platform.hpp"
#include "rsaas/sim/time.hpp"

namespace rsaas::rtds {

using VCpuId = std::uint32_t;
using PoolId = std::uint32_t;

enum class ExecClass : std::uint8_t { Budgeted, Extra };
enum class VCpuStatus { Running, Runnable, Depleted, Blocked };

constexpr std::string_view to_string(ExecClass c) { return c == ExecClass::Budgeted ? "budget" : "extra"; }

struct VCpuState {
    VCpuId id = 0;
    std::string name;
    PoolId pool = 0;
    RtdsParams params;
    std::vector<PCpuId> affinity;  // sorted

    Duration budget_left{0};
    SimTime cur_deadline = kTimeZero;
    bool armed = false;      // has a pending replenishment at cur_deadline
    bool wants_run = false;  // guest has something to run
    std::optional<PCpuId> on;
    ExecClass cls = ExecClass::Budgeted;
    Duration slice_left{0};  // extratime round-robin quantum

    VCpuStatus status() const {
        if (!wants_run) return VCpuStatus::Blocked;
        if (on) return VCpuStatus::Running;
        if (budget_left.count() == 0) return VCpuStatus::Depleted;
        return VCpuStatus::Runnable;
    }

    bool can_run_on(PCpuId p) const { return std::binary_search(affinity.begin(), affinity.end(), p); }
};

/// Per-pool queues. The runqueue holds every non-blocked vCPU with
/// residual budget (running ones included) in priority order; `depleted`
/// holds non-blocked vCPUs at zero budget; `extra` is the round-robin order
/// of the depleted vCPUs that may use spare capacity.
struct PoolQueues {
    SchedPolicy policy = SchedPolicy::EDF;
    std::vector<PCpuId> pcpus;
    std::vector<VCpuId> runqueue;
    std::vector<VCpuId> depleted;
    std::deque<VCpuId> extra;
};

/// One contiguous stretch of a vCPU on a pCPU in one execution class.
struct Segment {
    PCpuId pcpu;
    VCpuId vcpu;
    ExecClass cls;
    SimTime start;
    SimTime end;
    friend bool operator==(const Segment&, const Segment&) = default;
};

/// Budget window [start, end) of one server period.
struct PeriodWindow {
    VCpuId vcpu;
    SimTime start;
    SimTime end;
    Duration budget;
};

struct Switch {
    PCpuId pcpu;
    std::optional<VCpuId> from;
    std::optional<VCpuId> to;
    ExecClass cls;
};

struct Options {
    Duration extratime_slice = from_us(1000);
    bool keep_history = true;
};

/// Real-time deferrable-server scheduler over CPU pools. The caller owns
/// time: it calls advance() to account elapsed execution, applies state
/// changes (wake/block/replenish/parameter changes), then reschedule().
/// Replenishment deadlines to be armed are collected in take_armed().
class RtdsScheduler {
public:
    explicit RtdsScheduler(Options opts = {}) : opts_(opts) {}

    PoolId add_pool(SchedPolicy policy, std::vector<PCpuId> pcpus) {
        std::sort(pcpus.begin(), pcpus.end());
        PoolQueues q;
        q.policy = policy;
        q.pcpus = std::move(pcpus);
        for (PCpuId p : q.pcpus) {
            if (p >= occupant_.size()) occupant_.resize(p + 1);
        }
        pools_.push_back(std::move(q));
        return static_cast<PoolId>(pools_.size() - 1);
    }

    VCpuId add_vcpu(std::string name, PoolId pool, RtdsParams params, std::vector<PCpuId> affinity) {
        if (!params.valid()) throw Error(Errc::InvalidParams, "vCPU '" + name + "' has invalid server parameters");
        if (pool >= pools_.size()) throw Error(Errc::InvalidParams, "vCPU '" + name + "' references unknown pool");
        std::sort(affinity.begin(), affinity.end());
        affinity.erase(std::unique(affinity.begin(), affinity.end()), affinity.end());
        std::erase_if(affinity, [&](PCpuId p) {
            return !std::binary_search(pools_[pool].pcpus.begin(), pools_[pool].pcpus.end(), p);
        });
        if (affinity.empty()) throw Error(Errc::InvalidParams, "vCPU '" + name + "' has empty affinity within pool");
        VCpuState v;
        v.id = static_cast<VCpuId>(vcpus_.size());
        v.name = std::move(name);
        v.pool = pool;
        v.params = params;
        v.affinity = std::move(affinity);
        vcpus_.push_back(std::move(v));
        return vcpus_.back().id;
    }

    const Options& options() const { return opts_; }
    std::size_t vcpu_count() const { return vcpus_.size(); }
    std::size_t pool_count() const { return pools_.size(); }
    const VCpuState& vcpu(VCpuId v) const { return vcpus_.at(checked(v)); }
    const PoolQueues& pool(PoolId p) const { return pools_.at(p); }
    const std::vector<VCpuState>& vcpus() const { return vcpus_; }

    std::optional<VCpuId> running_on(PCpuId p) const {
        return p < occupant_.size() ? occupant_[p].vcpu : std::nullopt;
    }
    ExecClass running_class(PCpuId p) const { return occupant_.at(p).cls; }
    std::size_t pcpu_span() const { return occupant_.size(); }

    /// Accounts execution of every running vCPU between the last call and `now`.
    void advance(SimTime now) {
        if (now <= last_) return;
        const Duration dt = now - last_;
        for (auto& v : vcpus_) {
            if (!v.on) continue;
            if (v.cls == ExecClass::Budgeted) {
                consume_budget(v.id, dt);
            } else {
                v.slice_left -= dt;
                if (v.slice_left.count() <= 0) {
                    auto& extra = pools_[v.pool].extra;
                    std::erase(extra, v.id);
                    extra.push_back(v.id);
                    v.slice_left = opts_.extratime_slice;
                }
            }
        }
        last_ = now;
    }

    /// Drains `ran_for` from the residual budget; at zero the vCPU moves to
    /// the depleted queue (and the extratime rotation if permitted).
    void consume_budget(VCpuId id, Duration ran_for) {
        auto& v = vcpus_.at(checked(id));
        if (v.budget_left.count() == 0) return;
        v.budget_left = std::max(Duration{0}, v.budget_left - ran_for);
        if (v.budget_left.count() == 0 && v.wants_run) to_depleted(v);
    }

    void wake(VCpuId id, SimTime now) {
        auto& v = vcpus_.at(checked(id));
        if (v.wants_run) return;
        v.wants_run = true;
        if (!v.armed || v.cur_deadline <= now) start_period(v, now);
        enqueue(v);
    }

    void block(VCpuId id, SimTime /*now*/) {
        auto& v = vcpus_.at(checked(id));
        if (!v.wants_run) return;
        v.wants_run = false;
        dequeue(v);
    }

    /// Refills the budget at the end of the current period. Returns false
    /// for a stale request (`at` is not the current deadline).
    bool replenish(VCpuId id, SimTime at) {
        auto& v = vcpus_.at(checked(id));
        if (!v.armed || at != v.cur_deadline) return false;
        if (v.wants_run) dequeue(v);
        v.budget_left = v.params.budget;
        v.cur_deadline = at + v.params.period;
        v.slice_left = opts_.extratime_slice;
        arm(v, at);
        if (v.wants_run) enqueue(v);
        return true;
    }

    void set_policy(PoolId pool, SchedPolicy policy) {
        auto& q = pools_.at(pool);
        q.policy = policy;
        sort_runqueue(q);
    }

    void set_params(VCpuId id, RtdsParams params) {
        if (!params.valid()) throw Error(Errc::InvalidParams, "budget must be in (0, period]");
        auto& v = vcpus_.at(checked(id));
        if (v.wants_run) dequeue(v);
        v.params = params;
        v.budget_left = std::min(v.budget_left, params.budget);
        if (v.wants_run) enqueue(v);
    }

    /// Highest-priority candidate for `p` considered in isolation: budgeted
    /// class first, then the extratime rotation; nullopt means idle.
    std::optional<VCpuId> pick_vcpu(PCpuId p, SimTime /*now*/ = kTimeZero) const {
        for (const auto& q : pools_) {
            if (!std::binary_search(q.pcpus.begin(), q.pcpus.end(), p)) continue;
            for (VCpuId id : q.runqueue)
                if (vcpus_[id].can_run_on(p)) return id;
            for (VCpuId id : q.extra)
                if (vcpus_[id].can_run_on(p)) return id;
        }
        return std::nullopt;
    }

    /// Recomputes the pCPU assignment of every pool. vCPUs are placed in
    /// priority order (budgeted class, then extratime rotation); each takes
    /// its current pCPU if still free, else the lowest free idle pCPU in its
    /// affinity, else the lowest free one.
    std::vector<Switch> reschedule(SimTime now) {
        std::vector<Switch> switches;
        std::vector<Slot> next(occupant_.size());
        for (const auto& q : pools_) {
            std::vector<bool> taken(occupant_.size(), false);
            auto place = [&](VCpuId id, ExecClass cls) {
                const auto& v = vcpus_[id];
                std::optional<PCpuId> choice;
                if (v.on && !taken[*v.on] && v.can_run_on(*v.on)) choice = v.on;
                if (!choice) {
                    for (PCpuId p : v.affinity)
                        if (!taken[p] && !occupant_[p].vcpu) {
                            choice = p;
                            break;
                        }
                }
                if (!choice) {
                    for (PCpuId p : v.affinity)
                        if (!taken[p]) {
                            choice = p;
                            break;
                        }
                }
                if (choice) {
                    taken[*choice] = true;
                    next[*choice] = Slot{id, cls, now};
                }
            };
            for (VCpuId id : q.runqueue) place(id, ExecClass::Budgeted);
            for (VCpuId id : q.extra) place(id, ExecClass::Extra);
        }
        for (PCpuId p = 0; p < occupant_.size(); ++p) {
            const Slot& cur = occupant_[p];
            const Slot& nxt = next[p];
            if (cur.vcpu == nxt.vcpu && (!cur.vcpu || cur.cls == nxt.cls)) continue;
            close_segment(p, now);
            if (cur.vcpu && vcpus_[*cur.vcpu].on == p) vcpus_[*cur.vcpu].on.reset();
            switches.push_back({p, cur.vcpu, nxt.vcpu, nxt.cls});
        }
        for (const auto& s : switches) {
            occupant_[s.pcpu] = next[s.pcpu];
            if (s.to) {
                vcpus_[*s.to].on = s.pcpu;
                vcpus_[*s.to].cls = s.cls;
            }
        }
        return switches;
    }

    /// Earliest budget exhaustion or extratime quantum expiry among running vCPUs.
    std::optional<SimTime> next_timer(SimTime now) const {
        std::optional<SimTime> best;
        for (const auto& v : vcpus_) {
            if (!v.on) continue;
            const SimTime t = now + (v.cls == ExecClass::Budgeted ? v.budget_left : v.slice_left);
            if (!best || t < *best) best = t;
        }
        return best;
    }

    /// Replenishments armed since the last call: (vCPU, deadline).
    std::vector<std::pair<VCpuId, SimTime>> take_armed() { return std::exchange(armed_, {}); }

    /// Closes open segments at `now` so that history covers [0, now).
    void flush_history(SimTime now) {
        for (PCpuId p = 0; p < occupant_.size(); ++p) {
            close_segment(p, now);
            occupant_[p].since = now;
        }
    }

    const std::vector<Segment>& segments() const { return segments_; }
    const std::vector<PeriodWindow>& windows() const { return windows_; }

    /// Full-scan check of queue and status invariants; returns violations.
    std::vector<std::string> check_invariants(bool after_reschedule = true) const {
        std::vector<std::string> bad;
        for (PoolId pid = 0; pid < pools_.size(); ++pid) {
            const auto& q = pools_[pid];
            if (!std::is_sorted(q.runqueue.begin(), q.runqueue.end(),
                                [&](VCpuId a, VCpuId b) { return outranks(q.policy, vcpus_[a], vcpus_[b]); }))
                bad.push_back("pool " + std::to_string(pid) + " runqueue out of priority order");
            for (VCpuId id : q.runqueue) {
                if (std::find(q.depleted.begin(), q.depleted.end(), id) != q.depleted.end())
                    bad.push_back(vcpus_[id].name + " in both runqueue and depleted queue");
                if (vcpus_[id].budget_left.count() <= 0) bad.push_back(vcpus_[id].name + " queued with no budget");
            }
            for (VCpuId id : q.depleted)
                if (vcpus_[id].budget_left.count() != 0) bad.push_back(vcpus_[id].name + " depleted with budget");
        }
        for (const auto& v : vcpus_) {
            if (v.budget_left.count() < 0 || v.budget_left > v.params.budget)
                bad.push_back(v.name + " budget_left outside [0, budget]");
            if (v.on && !v.can_run_on(*v.on)) bad.push_back(v.name + " running outside its affinity");
            if (v.on && v.budget_left.count() == 0 && !v.params.extratime)
                bad.push_back(v.name + " depleted but running");
            if (v.on && !v.wants_run) bad.push_back(v.name + " blocked but running");
        }
        if (after_reschedule) {
            for (const auto& v : vcpus_) {
                if (v.on || !v.wants_run || v.budget_left.count() == 0) continue;
                for (PCpuId p : v.affinity)
                    if (!occupant_[p].vcpu) bad.push_back("pCPU" + std::to_string(p) + " idle while " + v.name + " waits");
            }
        }
        return bad;
    }

    static bool outranks(SchedPolicy policy, const VCpuState& a, const VCpuState& b) {
        if (policy == SchedPolicy::EDF) {
            if (a.cur_deadline != b.cur_deadline) return a.cur_deadline < b.cur_deadline;
        } else if (a.params.period != b.params.period) {
            return a.params.period < b.params.period;
        }
        return a.id < b.id;
    }

private:
    struct Slot {
        std::optional<VCpuId> vcpu;
        ExecClass cls = ExecClass::Budgeted;
        SimTime since = kTimeZero;
    };

    VCpuId checked(VCpuId id) const {
        if (id >= vcpus_.size()) throw Error(Errc::UnknownVcpu, "vCPU " + std::to_string(id));
        return id;
    }

    void start_period(VCpuState& v, SimTime now) {
        v.budget_left = v.params.budget;
        v.cur_deadline = now + v.params.period;
        v.slice_left = opts_.extratime_slice;
        arm(v, now);
    }

    void arm(VCpuState& v, SimTime start) {
        v.armed = true;
        armed_.emplace_back(v.id, v.cur_deadline);
        if (opts_.keep_history) windows_.push_back({v.id, start, v.cur_deadline, v.params.budget});
    }

    void enqueue(VCpuState& v) {
        auto& q = pools_[v.pool];
        if (v.budget_left.count() > 0) {
            auto pos = std::lower_bound(q.runqueue.begin(), q.runqueue.end(), v.id, [&](VCpuId a, VCpuId b) {
                return outranks(q.policy, vcpus_[a], vcpus_[b]);
            });
            q.runqueue.insert(pos, v.id);
        } else {
            q.depleted.push_back(v.id);
            if (v.params.extratime) {
                q.extra.push_back(v.id);
                v.slice_left = opts_.extratime_slice;
            }
        }
    }

    void dequeue(VCpuState& v) {
        auto& q = pools_[v.pool];
        std::erase(q.runqueue, v.id);
        std::erase(q.depleted, v.id);
        std::erase(q.extra, v.id);
    }

    void to_depleted(VCpuState& v) {
        dequeue(v);
        enqueue(v);
    }

    void sort_runqueue(PoolQueues& q) {
        std::stable_sort(q.runqueue.begin(), q.runqueue.end(),
                         [&](VCpuId a, VCpuId b) { return outranks(q.policy, vcpus_[a], vcpus_[b]); });
    }

    void close_segment(PCpuId p, SimTime now) {
        Slot& s = occupant_[p];
        if (s.vcpu && opts_.keep_history && s.since < now) segments_.push_back({p, *s.vcpu, s.cls, s.since, now});
    }

    Options opts_;
    std::vector<PoolQueues> pools_;
    std::vector<VCpuState> vcpus_;
    std::vector<Slot> occupant_;
    std::vector<std::pair<VCpuId, SimTime>> armed_;
    std::vector<Segment> segments_;
    std::vector<PeriodWindow> windows_;
    SimTime last_ = kTimeZero;
};

/// Budget bound audit: within every period window a vCPU's budgeted-class
/// execution must not exceed the window's budget. Returns violations.
inline std::vector<std::string> audit_budget(const RtdsScheduler& s) {
    std::vector<std::string> bad;
    // Per vCPU, segments and windows are each disjoint and chronological.
    std::vector<std::vector<const Segment*>> by_vcpu(s.vcpu_count());
    for (const auto& seg : s.segments())
        if (seg.cls == ExecClass::Budgeted) by_vcpu[seg.vcpu].push_back(&seg);
    for (auto& list : by_vcpu)
        std::sort(list.begin(), list.end(), [](const Segment* a, const Segment* b) { return a->start < b->start; });
    std::vector<std::size_t> cursor(s.vcpu_count(), 0);
    for (const auto& w : s.windows()) {
        const auto& list = by_vcpu[w.vcpu];
        std::size_t& j = cursor[w.vcpu];
        while (j < list.size() && list[j]->end <= w.start) ++j;
        Duration used{0};
        for (std::size_t k = j; k < list.size() && list[k]->start < w.end; ++k) {
            const SimTime a = std::max(list[k]->start, w.start);
            const SimTime b = std::min(list[k]->end, w.end);
            if (a < b) used += b - a;
        }
        if (used > w.budget)
            bad.push_back(s.vcpu(w.vcpu).name + " ran " + std::to_string(used.count()) + "ns in window [" +
                          std::to_string(ns_of(w.start)) + "," + std::to_string(ns_of(w.end)) + ") with budget " +
                          std::to_string(w.budget.count()) + "ns");
    }
    return bad;
}

}  // namespace rsaas::rtds
