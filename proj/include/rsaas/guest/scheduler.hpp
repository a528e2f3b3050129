#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rsaas/error.hpp"
#include "rsaas/platform.hpp"
#include "rsaas/sim/time.hpp"

namespace rsaas::guest {

using TaskId = std::uint32_t;
using MutexId = std::uint32_t;
using CondId = std::uint32_t;

enum class TaskState { Running, Ready, Blocked, Throttled };

constexpr std::string_view to_string(TaskState s) {
    switch (s) {
        case TaskState::Running: return "Running";
        case TaskState::Ready: return "Ready";
        case TaskState::Blocked: return "Blocked";
        case TaskState::Throttled: return "Throttled";
    }
    return "?";
}

// A DEADLINE task blocked on a mutex boosts its owner to this priority.
inline constexpr int kDeadlineInheritedPriority = 99;

struct GuestTask {
    TaskId id = 0;
    std::string name;
    std::size_t vcpu = 0;
    GuestPolicy policy;

    bool has_work = false;
    std::optional<MutexId> waiting_mutex;
    std::optional<CondId> waiting_cond;
    std::vector<MutexId> held;
    int effective_prio = 0;

    Duration rr_left{0};

    // DEADLINE reservation
    bool dl_started = false;
    bool throttled = false;
    Duration runtime_left{0};
    SimTime period_start = kTimeZero;
    SimTime abs_deadline = kTimeZero;
    std::uint64_t throttle_count = 0;

    bool is_deadline() const { return policy.kind == GuestPolicyKind::Deadline; }
    bool active() const { return has_work && !waiting_mutex && !waiting_cond; }
    int base_prio() const { return is_deadline() ? kDeadlineInheritedPriority : policy.priority; }
    SimTime period_end() const { return period_start + policy.period; }
};

struct PiMutex {
    std::optional<TaskId> owner;
    std::vector<TaskId> waiters;  // highest effective priority first, FIFO among equals
};

struct CondVar {
    std::vector<TaskId> waiters;  // arrival order
};

/// Task scheduler of one guest OS. Tasks are pinned to one of the VM's
/// vCPUs. Per vCPU, non-throttled DEADLINE tasks (EDF) outrank FIFO/RR,
/// which share one priority space 1-99 with a FIFO list per level.
class GuestScheduler {
public:
    explicit GuestScheduler(std::size_t vcpu_count, Duration rr_timeslice = from_us(100000))
        : rr_timeslice_(rr_timeslice), per_vcpu_(vcpu_count) {}

    std::size_t vcpu_count() const { return per_vcpu_.size(); }
    std::size_t task_count() const { return tasks_.size(); }
    Duration rr_timeslice() const { return rr_timeslice_; }

    TaskId add_task(std::string name, std::size_t vcpu, GuestPolicy policy) {
        if (vcpu >= per_vcpu_.size()) throw Error(Errc::InvalidTask, "task '" + name + "' pinned to missing vCPU");
        if (!policy.valid()) throw Error(Errc::InvalidTask, "task '" + name + "' has invalid scheduling parameters");
        GuestTask t;
        t.id = static_cast<TaskId>(tasks_.size());
        t.name = std::move(name);
        t.vcpu = vcpu;
        t.policy = policy;
        t.effective_prio = t.base_prio();
        t.rr_left = rr_timeslice_;
        tasks_.push_back(std::move(t));
        return tasks_.back().id;
    }

    const GuestTask& task(TaskId id) const { return tasks_.at(checked(id)); }
    const std::vector<GuestTask>& tasks() const { return tasks_; }

    TaskState state(TaskId id) const {
        const auto& t = task(id);
        if (!t.active()) return TaskState::Blocked;
        if (t.is_deadline() && t.throttled) return TaskState::Throttled;
        if (per_vcpu_[t.vcpu].current == id) return TaskState::Running;
        return TaskState::Ready;
    }

    int effective_priority(TaskId id) const { return task(id).effective_prio; }

    /// The workload tells the scheduler whether the task has pending work.
    void set_has_work(TaskId id, bool has_work, SimTime now) {
        auto& t = tasks_.at(checked(id));
        const bool before = t.active();
        t.has_work = has_work;
        update_activity(t, before, now);
    }

    /// Highest-ranked eligible task on `vcpu`, or nullopt when idle.
    std::optional<TaskId> pick_task(std::size_t vcpu) const {
        const auto& q = per_vcpu_.at(vcpu);
        std::optional<TaskId> best;
        for (TaskId id : q.deadline) {
            if (!best || earlier_deadline(tasks_[id], tasks_[*best])) best = id;
        }
        if (best) return best;
        for (const auto& [prio, list] : q.levels)
            if (!list.empty()) return list.front();
        return std::nullopt;
    }

    /// Makes the pick current on `vcpu`; a preempted FIFO/RR task keeps its
    /// place at the head of its priority list.
    std::optional<TaskId> dispatch(std::size_t vcpu) {
        auto& q = per_vcpu_.at(vcpu);
        q.current = pick_task(vcpu);
        return q.current;
    }

    std::optional<TaskId> current(std::size_t vcpu) const { return per_vcpu_.at(vcpu).current; }
    bool runnable(std::size_t vcpu) const { return pick_task(vcpu).has_value(); }

    /// Charges `ran` of execution to the current task of its vCPU: RR
    /// quantum rotation and DEADLINE runtime accounting.
    void account(TaskId id, Duration ran, SimTime now) {
        auto& t = tasks_.at(checked(id));
        if (t.is_deadline()) {
            deadline_throttle(id, ran, now);
            return;
        }
        if (t.policy.kind != GuestPolicyKind::RoundRobin || !t.active()) return;
        t.rr_left -= ran;
        if (t.rr_left.count() <= 0) {
            t.rr_left = rr_timeslice_;
            auto& list = per_vcpu_[t.vcpu].levels[t.effective_prio];
            std::erase(list, t.id);
            list.push_back(t.id);
        }
    }

    /// Consumes DEADLINE runtime. At zero the task is throttled until its
    /// next period start, where runtime refills and the deadline advances.
    void deadline_throttle(TaskId id, Duration consumed, SimTime now) {
        auto& t = tasks_.at(checked(id));
        if (!t.is_deadline()) return;
        t.runtime_left -= consumed;
        roll_period(t, now);
        if (t.runtime_left.count() <= 0 && !t.throttled && t.dl_started) {
            t.runtime_left = Duration{0};
            t.throttled = true;
            ++t.throttle_count;
            std::erase(per_vcpu_[t.vcpu].deadline, t.id);
        }
    }

    /// Applies DEADLINE period boundaries reached by `now`.
    void advance_time(SimTime now) {
        for (auto& t : tasks_)
            if (t.is_deadline()) roll_period(t, now);
    }

    /// Next instant at which guest state changes without outside input.
    /// `vcpu_on_cpu[i]` says whether vCPU i is currently executing.
    std::optional<SimTime> next_timer(SimTime now, const std::vector<bool>& vcpu_on_cpu) const {
        std::optional<SimTime> best;
        auto consider = [&](SimTime t) {
            if (t > now && (!best || t < *best)) best = t;
        };
        for (std::size_t v = 0; v < per_vcpu_.size(); ++v) {
            const auto& cur = per_vcpu_[v].current;
            if (!cur || v >= vcpu_on_cpu.size() || !vcpu_on_cpu[v]) continue;
            const auto& t = tasks_[*cur];
            if (!t.active()) continue;
            if (t.is_deadline() && !t.throttled) consider(now + t.runtime_left);
            if (t.policy.kind == GuestPolicyKind::RoundRobin) consider(now + t.rr_left);
        }
        for (const auto& t : tasks_)
            if (t.is_deadline() && t.dl_started && t.active()) consider(t.period_end());
        return best;
    }

    // ---- synchronization ------------------------------------------------

    MutexId add_mutex() {
        mutexes_.emplace_back();
        return static_cast<MutexId>(mutexes_.size() - 1);
    }
    CondId add_cond() {
        conds_.emplace_back();
        return static_cast<CondId>(conds_.size() - 1);
    }
    const PiMutex& mutex(MutexId m) const { return mutexes_.at(m); }
    const CondVar& cond(CondId c) const { return conds_.at(c); }

    /// Returns true if acquired. Otherwise the task blocks and the owner
    /// (transitively) inherits the waiter's priority.
    bool mutex_lock(TaskId id, MutexId m, SimTime now) {
        auto& t = tasks_.at(checked(id));
        auto& mx = mutexes_.at(m);
        if (!mx.owner) {
            mx.owner = id;
            t.held.push_back(m);
            return true;
        }
        if (*mx.owner == id) throw Error(Errc::InvalidTask, "task '" + t.name + "' relocks a mutex it owns");
        const bool before = t.active();
        t.waiting_mutex = m;
        insert_waiter(mx, id);
        update_activity(t, before, now);
        refresh_priority(*mx.owner);
        return false;
    }

    /// Releases `m`, restores the caller's priority and hands the mutex to
    /// the highest-priority waiter, which is returned.
    std::optional<TaskId> mutex_unlock(TaskId id, MutexId m, SimTime now) {
        auto& t = tasks_.at(checked(id));
        auto& mx = mutexes_.at(m);
        if (mx.owner != id)
            throw Error(Errc::UnlockNotOwner, "task '" + t.name + "' unlocks mutex " + std::to_string(m) +
                                                  " it does not own");
        std::erase(t.held, m);
        mx.owner.reset();
        std::optional<TaskId> next;
        if (!mx.waiters.empty()) {
            next = mx.waiters.front();
            mx.waiters.erase(mx.waiters.begin());
            auto& w = tasks_[*next];
            const bool before = w.active();
            w.waiting_mutex.reset();
            mx.owner = *next;
            w.held.push_back(m);
            update_activity(w, before, now);
            refresh_priority(*next);
        }
        refresh_priority(id);
        return next;
    }

    void cond_wait(TaskId id, CondId c, SimTime now) {
        auto& t = tasks_.at(checked(id));
        const bool before = t.active();
        t.waiting_cond = c;
        conds_.at(c).waiters.push_back(id);
        update_activity(t, before, now);
    }

    /// Wakes the highest-priority waiter (earliest arrival among equals).
    std::optional<TaskId> cond_signal(CondId c, SimTime now) {
        auto& cv = conds_.at(c);
        if (cv.waiters.empty()) return std::nullopt;
        auto it = cv.waiters.begin();
        for (auto w = cv.waiters.begin(); w != cv.waiters.end(); ++w)
            if (tasks_[*w].effective_prio > tasks_[*it].effective_prio) it = w;
        const TaskId id = *it;
        cv.waiters.erase(it);
        release_cond(id, now);
        return id;
    }

    /// Wakes all waiters; returned (and made ready) in priority order.
    std::vector<TaskId> cond_broadcast(CondId c, SimTime now) {
        auto& cv = conds_.at(c);
        std::vector<TaskId> order = std::move(cv.waiters);
        cv.waiters.clear();
        std::stable_sort(order.begin(), order.end(), [&](TaskId a, TaskId b) {
            return tasks_[a].effective_prio > tasks_[b].effective_prio;
        });
        for (TaskId id : order) release_cond(id, now);
        return order;
    }

private:
    struct VcpuQueues {
        std::map<int, std::deque<TaskId>, std::greater<>> levels;
        std::vector<TaskId> deadline;
        std::optional<TaskId> current;
    };

    TaskId checked(TaskId id) const {
        if (id >= tasks_.size()) throw Error(Errc::UnknownTask, "task " + std::to_string(id));
        return id;
    }

    static bool earlier_deadline(const GuestTask& a, const GuestTask& b) {
        if (a.abs_deadline != b.abs_deadline) return a.abs_deadline < b.abs_deadline;
        return a.id < b.id;
    }

    void update_activity(GuestTask& t, bool was_active, SimTime now) {
        const bool is_active = t.active();
        if (was_active == is_active) return;
        auto& q = per_vcpu_[t.vcpu];
        if (is_active) {
            if (t.is_deadline()) {
                if (!t.dl_started || now >= t.period_end()) start_dl_period(t, now);
                if (!t.throttled) q.deadline.push_back(t.id);
            } else {
                q.levels[t.effective_prio].push_back(t.id);
            }
        } else {
            if (t.is_deadline())
                std::erase(q.deadline, t.id);
            else
                erase_from_level(q, t);
        }
    }

    static void erase_from_level(VcpuQueues& q, const GuestTask& t) {
        auto it = q.levels.find(t.effective_prio);
        if (it == q.levels.end()) return;
        std::erase(it->second, t.id);
        if (it->second.empty()) q.levels.erase(it);
    }

    void start_dl_period(GuestTask& t, SimTime start) {
        t.dl_started = true;
        t.period_start = start;
        t.runtime_left = t.policy.runtime;
        t.abs_deadline = start + t.policy.deadline;
        t.throttled = false;
    }

    // Contiguous refill for a task that is still active at its boundary;
    // an inactive task starts a fresh period when it becomes active again.
    void roll_period(GuestTask& t, SimTime now) {
        if (!t.dl_started || !t.active() || now < t.period_end()) return;
        const auto periods = (now - t.period_start) / t.policy.period;
        const bool was_throttled = t.throttled;
        start_dl_period(t, t.period_start + periods * t.policy.period);
        if (was_throttled) per_vcpu_[t.vcpu].deadline.push_back(t.id);
    }

    void insert_waiter(PiMutex& mx, TaskId id) {
        auto pos = std::find_if(mx.waiters.begin(), mx.waiters.end(), [&](TaskId other) {
            return tasks_[other].effective_prio < tasks_[id].effective_prio;
        });
        mx.waiters.insert(pos, id);
    }

    int inherited_priority(const GuestTask& t) const {
        int p = t.base_prio();
        for (MutexId m : t.held)
            for (TaskId w : mutexes_[m].waiters) p = std::max(p, tasks_[w].effective_prio);
        return p;
    }

    // Recomputes the effective priority and propagates it along the chain
    // of mutex owners the task is blocked behind.
    void refresh_priority(TaskId id) {
        std::optional<TaskId> cur = id;
        while (cur) {
            auto& t = tasks_[*cur];
            const int p = inherited_priority(t);
            if (p == t.effective_prio) return;
            auto& q = per_vcpu_[t.vcpu];
            const bool queued = t.active() && !t.is_deadline();
            if (queued) erase_from_level(q, t);
            t.effective_prio = p;
            if (queued) {
                auto& list = q.levels[p];
                if (q.current == t.id)
                    list.push_front(t.id);
                else
                    list.push_back(t.id);
            }
            cur.reset();
            if (t.waiting_mutex) {
                auto& mx = mutexes_[*t.waiting_mutex];
                std::erase(mx.waiters, t.id);
                insert_waiter(mx, t.id);
                cur = mx.owner;
            }
        }
    }

    void release_cond(TaskId id, SimTime now) {
        auto& t = tasks_[id];
        const bool before = t.active();
        t.waiting_cond.reset();
        update_activity(t, before, now);
    }

    Duration rr_timeslice_;
    std::vector<GuestTask> tasks_;
    std::vector<VcpuQueues> per_vcpu_;
    std::vector<PiMutex> mutexes_;
    std::vector<CondVar> conds_;
};

}  // namespace rsaas::guest
