#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rsaas/error.hpp"
#include "rsaas/guest/scheduler.hpp"
#include "rsaas/platform.hpp"
#include "rsaas/rtds/scheduler.hpp"
#include "rsaas/sim/contention.hpp"
#include "rsaas/sim/engine.hpp"

namespace rsaas {

using TaskHandle = std::uint32_t;
using Continuation = std::function<void(SimTime)>;

struct MachineOptions {
    ContentionModel contention;
    Duration extratime_slice = from_us(1000);
    Duration rr_timeslice = from_us(100000);
    bool keep_history = true;
};

/// Execution of a guest task on a pCPU, as seen through both schedulers.
struct TaskSegment {
    PCpuId pcpu;
    TaskHandle task;
    SimTime start;
    SimTime end;
};

/// The simulated host: RTDS hypervisor scheduling the platform's vCPUs,
/// one guest scheduler per VM, and jobs whose execution demand drains at
/// the contention-dependent rate while their task actually holds a pCPU.
///
/// Within one instant the order is fixed: account elapsed execution, finish
/// jobs that completed, dispatch the instant's events in (time, seq) order,
/// then reschedule until no zero-demand job remains runnable.
class Machine : private InstantHooks {
public:
    explicit Machine(const PlatformSpec& spec, MachineOptions opts = {})
        : spec_(require_valid(spec)), opts_(opts),
          hv_(rtds::Options{opts.extratime_slice, opts.keep_history}) {
        opts_.contention.validate();
        std::map<std::string, rtds::PoolId> pool_ids;
        for (const auto& pool : spec_.pools) pool_ids[pool.name] = hv_.add_pool(pool.policy, pool.pcpus);
        for (std::uint32_t vm = 0; vm < spec_.vms.size(); ++vm) {
            const auto& v = spec_.vms[vm];
            const rtds::PoolId pool = pool_ids.at(spec_.pool_of(v).name);
            guests_.emplace_back(v.vcpus.size(), opts_.rr_timeslice);
            std::vector<rtds::VCpuId> ids;
            for (std::size_t i = 0; i < v.vcpus.size(); ++i) {
                const auto id = hv_.add_vcpu(v.vcpus[i].id, pool, v.vcpus[i].params, v.vcpus[i].affinity);
                vcpus_.push_back({vm, i, v.role == VmRole::Stress});
                ids.push_back(id);
            }
            vm_vcpus_.push_back(std::move(ids));
        }
        running_.assign(hv_.pcpu_span(), std::nullopt);
        since_.assign(hv_.pcpu_span(), kTimeZero);
        rate_.assign(hv_.pcpu_span(), 1.0);
        engine_.set_hooks(this);
    }

    Machine(const Machine&) = delete;
    Machine& operator=(const Machine&) = delete;

    // ---- topology ------------------------------------------------------

    const PlatformSpec& platform() const { return spec_; }

    std::uint32_t vm_index(std::string_view name) const {
        for (std::uint32_t i = 0; i < spec_.vms.size(); ++i)
            if (spec_.vms[i].name == name) return i;
        throw Error(Errc::InvalidTask, "no VM named '" + std::string(name) + "'");
    }

    rtds::VCpuId vcpu_id(std::uint32_t vm, std::size_t index) const { return vm_vcpus_.at(vm).at(index); }

    TaskHandle add_task(std::uint32_t vm, std::size_t vcpu_index, std::string name,
                        std::optional<GuestPolicy> policy = std::nullopt) {
        const auto local =
            guests_.at(vm).add_task(std::move(name), vcpu_index, policy.value_or(spec_.vms.at(vm).guest_policy));
        tasks_.push_back({vm, local, {}, {}});
        return static_cast<TaskHandle>(tasks_.size() - 1);
    }

    const std::string& task_name(TaskHandle t) const { return guest_task(t).name; }
    const guest::GuestTask& guest_task(TaskHandle t) const { return guests_.at(rec(t).vm).task(rec(t).local); }
    guest::TaskState task_state(TaskHandle t) const { return guests_.at(rec(t).vm).state(rec(t).local); }
    std::uint32_t task_vm(TaskHandle t) const { return rec(t).vm; }
    std::size_t task_count() const { return tasks_.size(); }
    std::optional<TaskHandle> handle_of(std::uint32_t vm, guest::TaskId local) const {
        for (TaskHandle h = 0; h < tasks_.size(); ++h)
            if (tasks_[h].vm == vm && tasks_[h].local == local) return h;
        return std::nullopt;
    }

    // ---- work -----------------------------------------------------------

    /// Queues a job of `demand` execution time; `on_done` runs in the task's
    /// context when it completes. Zero demand completes as soon as the task
    /// is dispatched on a running vCPU.
    void submit_job(TaskHandle t, Duration demand, Continuation on_done = {}) {
        if (demand.count() < 0) throw Error(Errc::InvalidTask, "negative job demand");
        push_job(t, static_cast<double>(demand.count()), std::move(on_done));
    }

    /// A job that never completes (CPU hog).
    void submit_endless(TaskHandle t) { push_job(t, std::numeric_limits<double>::infinity(), {}); }

    std::size_t pending_jobs(TaskHandle t) const { return rec(t).jobs.size(); }

    // ---- synchronization (called from task context) ---------------------

    guest::MutexId add_mutex(std::uint32_t vm) { return guests_.at(vm).add_mutex(); }
    guest::CondId add_cond(std::uint32_t vm) { return guests_.at(vm).add_cond(); }

    void lock(TaskHandle t, guest::MutexId m, Continuation on_acquired) {
        auto& r = rec(t);
        if (guests_[r.vm].mutex_lock(r.local, m, now())) {
            if (on_acquired) on_acquired(now());
        } else {
            r.resume = std::move(on_acquired);
        }
    }

    void unlock(TaskHandle t, guest::MutexId m) {
        const auto& r = rec(t);
        if (auto next = guests_[r.vm].mutex_unlock(r.local, m, now())) resume(*handle_of(r.vm, *next));
    }

    void wait(TaskHandle t, guest::CondId c, Continuation on_wakeup) {
        auto& r = rec(t);
        r.resume = std::move(on_wakeup);
        guests_[r.vm].cond_wait(r.local, c, now());
    }

    void signal(std::uint32_t vm, guest::CondId c) {
        if (auto w = guests_.at(vm).cond_signal(c, now())) resume(*handle_of(vm, *w));
    }

    void broadcast(std::uint32_t vm, guest::CondId c) {
        for (auto w : guests_.at(vm).cond_broadcast(c, now())) resume(*handle_of(vm, w));
    }

    // ---- time -------------------------------------------------------------

    SimTime now() const { return engine_.now(); }

    void post(SimTime at, EventKind kind, std::uint32_t subject, std::function<void()> fn) {
        engine_.schedule(at, kind, subject, 0, std::move(fn));
    }

    std::size_t run_until(SimTime t_end) { return engine_.run_until(t_end); }

    /// Closes execution histories at the current clock.
    void flush_history() {
        const SimTime t = now();
        hv_.flush_history(t);
        for (PCpuId p = 0; p < running_.size(); ++p) {
            if (running_[p] && since_[p] < t && opts_.keep_history) task_segments_.push_back({p, *running_[p], since_[p], t});
            since_[p] = t;
        }
    }

    void set_trace(EventTrace* trace) { engine_.set_trace(trace); }
    void set_observer(std::function<void(const Machine&, SimTime)> fn) { observer_ = std::move(fn); }

    /// Changes applied here take effect at the end of the current instant.
    rtds::RtdsScheduler& hypervisor() { return hv_; }
    const rtds::RtdsScheduler& hypervisor() const { return hv_; }
    const guest::GuestScheduler& guest(std::uint32_t vm) const { return guests_.at(vm); }
    const Engine& engine() const { return engine_; }
    const MachineOptions& options() const { return opts_; }

    std::optional<TaskHandle> running_task(PCpuId p) const { return running_.at(p); }
    double rate(PCpuId p) const { return rate_.at(p); }
    const std::vector<TaskSegment>& task_segments() const { return task_segments_; }
    bool is_stress_vcpu(rtds::VCpuId v) const { return vcpus_.at(v).stress; }

private:
    struct Job {
        double work_left;  // ns of uncontended execution
        Continuation done;
    };
    struct TaskRec {
        std::uint32_t vm;
        guest::TaskId local;
        std::deque<Job> jobs;
        Continuation resume;
    };
    struct VcpuRec {
        std::uint32_t vm;
        std::size_t local;
        bool stress;
    };

    static constexpr double kDoneEpsilon = 1e-6;

    TaskRec& rec(TaskHandle t) {
        if (t >= tasks_.size()) throw Error(Errc::UnknownTask, "task handle " + std::to_string(t));
        return tasks_[t];
    }
    const TaskRec& rec(TaskHandle t) const {
        if (t >= tasks_.size()) throw Error(Errc::UnknownTask, "task handle " + std::to_string(t));
        return tasks_[t];
    }

    void push_job(TaskHandle t, double work, Continuation done) {
        auto& r = rec(t);
        r.jobs.push_back({work, std::move(done)});
        if (r.jobs.size() == 1) guests_[r.vm].set_has_work(r.local, true, now());
    }

    void resume(TaskHandle t) {
        auto& r = rec(t);
        push_job(t, 0.0, std::exchange(r.resume, {}));
    }

    // Task currently executing on pCPU p per the present assignment.
    std::optional<TaskHandle> executing_on(PCpuId p) const {
        const auto v = hv_.running_on(p);
        if (!v) return std::nullopt;
        const auto& vr = vcpus_[*v];
        const auto cur = guests_[vr.vm].current(vr.local);
        if (!cur || !guests_[vr.vm].task(*cur).active()) return std::nullopt;
        for (TaskHandle h = 0; h < tasks_.size(); ++h)
            if (tasks_[h].vm == vr.vm && tasks_[h].local == *cur) return h;
        return std::nullopt;
    }

    // Finishes the front job of every task executing now whose demand is spent.
    bool complete_finished(SimTime t) {
        bool any = false;
        std::vector<TaskHandle> done;
        for (PCpuId p = 0; p < running_.size(); ++p) {
            const auto h = executing_on(p);
            if (!h) continue;
            const auto& jobs = tasks_[*h].jobs;
            if (!jobs.empty() && jobs.front().work_left <= kDoneEpsilon) done.push_back(*h);
        }
        std::sort(done.begin(), done.end());
        for (TaskHandle h : done) {
            auto& r = tasks_[h];
            if (r.jobs.empty() || r.jobs.front().work_left > kDoneEpsilon) continue;
            Continuation cb = std::move(r.jobs.front().done);
            r.jobs.pop_front();
            if (r.jobs.empty()) guests_[r.vm].set_has_work(r.local, false, t);
            any = true;
            if (cb) cb(t);
        }
        return any;
    }

    void on_instant_begin(SimTime t) override {
        if (t > last_) {
            const Duration dt = t - last_;
            for (PCpuId p = 0; p < running_.size(); ++p) {
                if (!running_[p]) continue;
                auto& r = tasks_[*running_[p]];
                if (!r.jobs.empty()) {
                    auto& job = r.jobs.front();
                    job.work_left -= static_cast<double>(dt.count()) * rate_[p];
                    if (job.work_left < 0.0) job.work_left = 0.0;
                }
                guests_[r.vm].account(r.local, dt, t);
            }
            hv_.advance(t);
            for (auto& g : guests_) g.advance_time(t);
            last_ = t;
        }
        complete_finished(t);
    }

    void on_event(const SimEvent& e) override {
        if (e.kind == EventKind::PeriodReplenish) {
            if (hv_.replenish(e.subject, e.time) && engine_.trace() != nullptr)
                engine_.trace()->decision(e.time, "replenish", e.subject, ns_of(hv_.vcpu(e.subject).cur_deadline));
        }
        // Timer kinds only wake the machine up; the instant hooks do the work.
    }

    void on_instant_end(SimTime t) override {
        for (int guard = 0;; ++guard) {
            if (guard > 100000) throw Error(Errc::InvalidTask, "zero-demand job loop did not settle");
            for (rtds::VCpuId v = 0; v < vcpus_.size(); ++v) {
                const bool want = guests_[vcpus_[v].vm].runnable(vcpus_[v].local);
                if (want && !hv_.vcpu(v).wants_run)
                    hv_.wake(v, t);
                else if (!want && hv_.vcpu(v).wants_run)
                    hv_.block(v, t);
            }
            for (const auto& s : hv_.reschedule(t)) {
                if (engine_.trace() != nullptr)
                    engine_.trace()->decision(t, s.cls == rtds::ExecClass::Budgeted ? "run" : "run-extra", s.pcpu,
                                              s.to ? static_cast<std::int64_t>(*s.to) : -1);
            }
            for (auto& g : guests_)
                for (std::size_t i = 0; i < g.vcpu_count(); ++i) g.dispatch(i);
            if (!complete_finished(t)) break;
        }
        for (const auto& [v, deadline] : hv_.take_armed()) engine_.schedule(deadline, EventKind::PeriodReplenish, v);

        int stress_running = 0;
        for (PCpuId p = 0; p < running_.size(); ++p) {
            const auto v = hv_.running_on(p);
            if (v && vcpus_[*v].stress) ++stress_running;
        }
        for (PCpuId p = 0; p < running_.size(); ++p) {
            const auto v = hv_.running_on(p);
            const int elsewhere = stress_running - ((v && vcpus_[*v].stress) ? 1 : 0);
            rate_[p] = opts_.contention.effective_rate(elsewhere);
            const auto h = executing_on(p);
            if (h != running_[p]) {
                if (running_[p] && since_[p] < t && opts_.keep_history)
                    task_segments_.push_back({p, *running_[p], since_[p], t});
                running_[p] = h;
                since_[p] = t;
            }
        }
        if (observer_) observer_(*this, t);
        arm_timer(t);
    }

    void arm_timer(SimTime t) {
        std::optional<SimTime> next;
        EventKind kind = EventKind::TimerFire;
        auto consider = [&](std::optional<SimTime> c, EventKind k) {
            if (c && (!next || *c < *next)) {
                next = c;
                kind = k;
            }
        };
        consider(hv_.next_timer(t), EventKind::BudgetExhausted);
        std::vector<bool> on_cpu;
        for (std::uint32_t vm = 0; vm < guests_.size(); ++vm) {
            on_cpu.assign(guests_[vm].vcpu_count(), false);
            for (std::size_t i = 0; i < on_cpu.size(); ++i) on_cpu[i] = hv_.vcpu(vm_vcpus_[vm][i]).on.has_value();
            consider(guests_[vm].next_timer(t, on_cpu), EventKind::TimerFire);
        }
        for (PCpuId p = 0; p < running_.size(); ++p) {
            if (!running_[p]) continue;
            const auto& jobs = tasks_[*running_[p]].jobs;
            if (jobs.empty() || !std::isfinite(jobs.front().work_left)) continue;
            const double span = std::ceil(jobs.front().work_left / rate_[p]);
            consider(t + Duration{static_cast<std::int64_t>(span)}, EventKind::TaskComplete);
        }
        if (!next) return;
        if (*next <= t) next = t + Duration{1};
        if (armed_timer_ <= t || *next < armed_timer_) {
            engine_.schedule(*next, kind, 0, ++timer_token_);
            armed_timer_ = *next;
        }
    }

    PlatformSpec spec_;
    MachineOptions opts_;
    Engine engine_;
    rtds::RtdsScheduler hv_;
    std::vector<guest::GuestScheduler> guests_;
    std::vector<VcpuRec> vcpus_;
    std::vector<std::vector<rtds::VCpuId>> vm_vcpus_;
    std::vector<TaskRec> tasks_;

    std::vector<std::optional<TaskHandle>> running_;
    std::vector<SimTime> since_;
    std::vector<double> rate_;
    std::vector<TaskSegment> task_segments_;

    SimTime last_ = kTimeZero;
    SimTime armed_timer_ = kTimeZero;
    std::uint64_t timer_token_ = 0;
    std::function<void(const Machine&, SimTime)> observer_;
};

}  // namespace rsaas
