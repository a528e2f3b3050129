#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rsaas/machine.hpp"
#include "rsaas/sim/rng.hpp"

namespace rsaas::guest {

struct ScenarioResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

/// True if `a` must run instead of `b` on the same vCPU.
inline bool strictly_outranks(const GuestTask& a, const GuestTask& b) {
    const bool a_dl = a.is_deadline() && !a.throttled;
    const bool b_dl = b.is_deadline() && !b.throttled;
    if (a_dl != b_dl) return a_dl;
    if (a_dl) return a.abs_deadline < b.abs_deadline;
    return a.effective_prio > b.effective_prio;
}

/// Priority-order violations at this instant: an executing vCPU runs a task
/// while a strictly higher-ranked task of the same vCPU is eligible, or
/// idles while one is eligible.
inline std::vector<std::string> priority_violations(const Machine& m) {
    std::vector<std::string> bad;
    const auto& hv = m.hypervisor();
    for (std::uint32_t vm = 0; vm < m.platform().vms.size(); ++vm) {
        const auto& g = m.guest(vm);
        for (std::size_t i = 0; i < g.vcpu_count(); ++i) {
            if (!hv.vcpu(m.vcpu_id(vm, i)).on) continue;
            const auto cur = g.current(i);
            for (const auto& t : g.tasks()) {
                if (t.vcpu != i || !t.active() || (t.is_deadline() && t.throttled)) continue;
                if (!cur || !g.task(*cur).active()) {
                    bad.push_back("vCPU idles while '" + t.name + "' is eligible");
                } else if (t.id != *cur && strictly_outranks(t, g.task(*cur))) {
                    bad.push_back("'" + g.task(*cur).name + "' runs while '" + t.name + "' outranks it");
                }
            }
        }
    }
    return bad;
}

/// Single-VM platform with `vcpus` vCPUs, each pinned to its own pCPU.
inline PlatformSpec scenario_platform(std::size_t vcpus, Duration budget = from_us(10000),
                                      Duration period = from_us(10000)) {
    PlatformSpec s;
    s.pcpu_count = static_cast<std::uint32_t>(vcpus);
    CpuPool pool{"pool0", {}, SchedPolicy::EDF};
    VmSpec vm{"guest", VmRole::Privileged, {}, GuestPolicy::fifo(50), ""};
    for (std::size_t i = 0; i < vcpus; ++i) {
        pool.pcpus.push_back(static_cast<PCpuId>(i));
        vm.vcpus.push_back({"guest." + std::to_string(i), {budget, period, false}, {static_cast<PCpuId>(i)}});
    }
    s.pools.push_back(pool);
    s.vms.push_back(vm);
    return s;
}

/// Offense (low priority) and defense (high priority) CPU hogs per vCPU,
/// plus a periodic referee above both. Once every defender is on the field
/// the ball (offense execution) must not move.
inline ScenarioResult sched_football(std::uint64_t seed, std::size_t vcpus = 2, std::size_t per_side = 3,
                                     Duration game = from_us(2'000'000)) {
    ScenarioResult r{"sched_football", true, ""};
    Machine m(scenario_platform(vcpus, from_us(4000), from_us(10000)));
    RngStream rng(seed, "football");
    std::vector<TaskHandle> offense, defense;
    SimTime kickoff = kTimeZero;
    for (std::size_t v = 0; v < vcpus; ++v) {
        for (std::size_t k = 0; k < per_side; ++k) {
            const auto o = m.add_task(0, v, "offense", GuestPolicy::fifo(20 + static_cast<int>(rng.below(20))));
            const auto d = m.add_task(0, v, "defense", GuestPolicy::fifo(60 + static_cast<int>(rng.below(20))));
            offense.push_back(o);
            defense.push_back(d);
            m.post(at_us(static_cast<std::int64_t>(rng.below(1000))), EventKind::TaskReady, o, [&m, o] { m.submit_endless(o); });
            const SimTime at = at_us(1000 + static_cast<std::int64_t>(rng.below(20000)));
            kickoff = std::max(kickoff, at);
            m.post(at, EventKind::TaskReady, d, [&m, d] { m.submit_endless(d); });
        }
        const auto ref = m.add_task(0, v, "referee", GuestPolicy::fifo(95));
        for (SimTime t = at_us(5000); t < kTimeZero + game; t += from_us(50000))
            m.post(t, EventKind::TaskReady, ref, [&m, ref] { m.submit_job(ref, from_us(200)); });
    }
    std::size_t checks = 0;
    m.set_observer([&](const Machine& mm, SimTime) {
        ++checks;
        for (auto& v : priority_violations(mm)) {
            if (r.pass) r.detail = v;
            r.pass = false;
        }
    });
    m.run_until(kTimeZero + game);
    m.flush_history();
    Duration ball{0};
    for (const auto& s : m.task_segments()) {
        if (std::find(offense.begin(), offense.end(), s.task) == offense.end()) continue;
        if (s.end > kickoff) ball += s.end - std::max(s.start, kickoff);
    }
    if (ball.count() != 0) {
        r.pass = false;
        r.detail = "ball moved " + std::to_string(ball.count()) + "ns after kickoff";
    }
    if (r.pass) r.detail = std::to_string(checks) + " decision points, ball stayed";
    return r;
}

/// Tasks of distinct random priorities wait on a condition; a broadcast
/// must run them in non-increasing priority order.
inline ScenarioResult prio_wake(std::uint64_t seed, std::size_t tasks = 8) {
    ScenarioResult r{"prio-wake", true, ""};
    Machine m(scenario_platform(1));
    RngStream rng(seed, "prio-wake");
    const auto cv = m.add_cond(0);
    std::vector<int> finished;
    for (std::size_t i = 0; i < tasks; ++i) {
        const int prio = 1 + static_cast<int>(rng.below(98));
        const auto t = m.add_task(0, 0, "waiter", GuestPolicy::fifo(prio));
        m.post(at_us(static_cast<std::int64_t>(10 * i)), EventKind::TaskReady, t, [&m, &finished, t, cv, prio] {
            m.submit_job(t, from_us(5), [&m, &finished, t, cv, prio](SimTime) {
                m.wait(t, cv, [&m, &finished, t, prio](SimTime) {
                    m.submit_job(t, from_us(100), [&finished, prio](SimTime) { finished.push_back(prio); });
                });
            });
        });
    }
    const auto waker = m.add_task(0, 0, "waker", GuestPolicy::fifo(99));
    m.post(at_us(1000), EventKind::TaskReady, waker,
           [&m, waker, cv] { m.submit_job(waker, from_us(1), [&m, cv](SimTime) { m.broadcast(0, cv); }); });
    m.run_until(at_us(10000));
    if (finished.size() != tasks) {
        r.pass = false;
        r.detail = std::to_string(finished.size()) + " of " + std::to_string(tasks) + " waiters finished";
    } else if (!std::is_sorted(finished.begin(), finished.end(), std::greater<>())) {
        r.pass = false;
        r.detail = "wake order not priority ordered";
    } else {
        r.detail = std::to_string(tasks) + " waiters woke in priority order";
    }
    return r;
}

/// A running low-priority hog must be displaced in the same decision point
/// at which a higher-priority task becomes ready, at every level.
inline ScenarioResult prio_preempt(std::uint64_t seed, int levels = 9) {
    ScenarioResult r{"prio-preempt", true, ""};
    Machine m(scenario_platform(1));
    RngStream rng(seed, "prio-preempt");
    std::vector<TaskHandle> tasks;
    std::vector<SimTime> wake_at;
    SimTime t = kTimeZero;
    for (int k = 0; k < levels; ++k) {
        const auto h = m.add_task(0, 0, "level", GuestPolicy::fifo(10 + 10 * k));
        t += from_us(100 + static_cast<std::int64_t>(rng.below(2000)));
        tasks.push_back(h);
        wake_at.push_back(t);
        m.post(t, EventKind::TaskReady, h, [&m, h] { m.submit_job(h, from_us(100000)); });
    }
    std::size_t next = 0;
    m.set_observer([&](const Machine& mm, SimTime now) {
        while (next < wake_at.size() && wake_at[next] <= now) {
            const auto running = mm.running_task(0);
            if (wake_at[next] == now && running != tasks[next] && r.pass) {
                r.pass = false;
                r.detail = "level " + std::to_string(next) + " not running at its wake instant";
            }
            ++next;
        }
    });
    m.run_until(t + from_us(1000));
    if (next != wake_at.size()) {
        r.pass = false;
        r.detail = "observer missed wake instants";
    }
    if (r.pass) r.detail = std::to_string(levels) + " immediate preemptions";
    return r;
}

/// A DEADLINE CPU hog next to a FIFO hog: in every run of k whole
/// reservation periods it executes at most k * runtime.
inline ScenarioResult deadline_bandwidth(std::uint64_t seed, int periods = 200) {
    ScenarioResult r{"deadline-bandwidth", true, ""};
    RngStream rng(seed, "dl-bw");
    const std::int64_t period_us = 2000 + static_cast<std::int64_t>(rng.below(18000));
    const std::int64_t runtime_us = 100 + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(period_us - 100)));
    Machine m(scenario_platform(1));
    const auto d = m.add_task(0, 0, "dl", GuestPolicy::deadline_server(from_us(runtime_us), from_us(period_us),
                                                                     from_us(period_us)));
    const auto f = m.add_task(0, 0, "hog", GuestPolicy::fifo(99));
    const SimTime start = at_us(static_cast<std::int64_t>(rng.below(5000)));
    m.post(kTimeZero, EventKind::TaskReady, f, [&m, f] { m.submit_endless(f); });
    m.post(start, EventKind::TaskReady, d, [&m, d] { m.submit_endless(d); });
    const SimTime end = start + from_us(period_us) * periods;
    m.run_until(end);
    m.flush_history();

    std::vector<Duration> per_period(static_cast<std::size_t>(periods), Duration{0});
    for (const auto& s : m.task_segments()) {
        if (s.task != d) continue;
        for (SimTime a = s.start; a < s.end;) {
            const auto idx = (a - start) / from_us(period_us);
            const SimTime boundary = start + from_us(period_us) * (idx + 1);
            const SimTime b = std::min(s.end, boundary);
            if (idx >= 0 && idx < periods) per_period[static_cast<std::size_t>(idx)] += b - a;
            a = b;
        }
    }
    std::vector<Duration> prefix(per_period.size() + 1, Duration{0});
    for (std::size_t i = 0; i < per_period.size(); ++i) prefix[i + 1] = prefix[i] + per_period[i];
    for (int k = 1; k <= periods && r.pass; ++k) {
        for (int i = 0; i + k <= periods; ++i) {
            const Duration sum = prefix[static_cast<std::size_t>(i + k)] - prefix[static_cast<std::size_t>(i)];
            if (sum > from_us(runtime_us) * k) {
                r.pass = false;
                r.detail = "window of " + std::to_string(k) + " periods got " + std::to_string(sum.count()) + "ns";
                break;
            }
        }
    }
    Duration total{0};
    for (auto p : per_period) total += p;
    if (total != from_us(runtime_us) * periods && r.pass) {
        r.pass = false;
        r.detail = "reservation not honoured: " + std::to_string(total.count()) + "ns";
    }
    if (r.pass) r.detail = std::to_string(periods) + " periods of " + std::to_string(runtime_us) + "/" +
                           std::to_string(period_us) + "us";
    return r;
}

}  // namespace rsaas::guest
