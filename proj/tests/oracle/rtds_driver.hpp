#pragma once

// Minimal event-driven host for the RTDS scheduler alone: scripted
// wake/block events, replenishments, and budget/slice timers.

#include <algorithm>
#include <vector>

#include "rsaas/rtds/scheduler.hpp"
#include "rsaas/sim/engine.hpp"
#include "tick_rtds.hpp"

namespace oracle {

class RtdsDriver : public rsaas::InstantHooks {
public:
    explicit RtdsDriver(const TickInstance& in) : hv_(rsaas::rtds::Options{rsaas::from_us(in.extra_slice_us), true}) {
        std::vector<rsaas::PCpuId> all;
        for (std::uint32_t p = 0; p < in.pcpus; ++p) all.push_back(p);
        const auto pool = hv_.add_pool(in.policy, all);
        for (std::size_t i = 0; i < in.vcpus.size(); ++i) {
            const auto& v = in.vcpus[i];
            hv_.add_vcpu("v" + std::to_string(i), pool,
                         {rsaas::from_us(v.budget_us), rsaas::from_us(v.period_us), v.extratime}, v.affinity);
        }
        for (const auto& s : in.script) {
            const std::uint64_t aux = s.new_budget_us > 0 ? 2 + static_cast<std::uint64_t>(s.new_budget_us) : s.wake;
            engine_.schedule(rsaas::at_us(s.at_us), rsaas::EventKind::TaskReady, s.vcpu, aux);
        }
        engine_.set_hooks(this);
    }

    void run(rsaas::SimTime until) {
        engine_.run_until(until);
        hv_.flush_history(until);
    }

    std::vector<TickSegment> segments() const {
        std::vector<TickSegment> out;
        for (const auto& s : hv_.segments())
            out.push_back({s.pcpu, s.vcpu, s.cls == rsaas::rtds::ExecClass::Extra, rsaas::ns_of(s.start) / 1000,
                           rsaas::ns_of(s.end) / 1000});
        std::sort(out.begin(), out.end());
        return out;
    }

    rsaas::rtds::RtdsScheduler& scheduler() { return hv_; }
    rsaas::Engine& engine() { return engine_; }
    std::vector<std::string> invariant_failures;

private:
    void on_instant_begin(rsaas::SimTime t) override { hv_.advance(t); }

    void on_event(const rsaas::SimEvent& e) override {
        if (e.kind == rsaas::EventKind::TaskReady) {
            if (e.aux >= 2) {
                auto p = hv_.vcpu(e.subject).params;
                p.budget = rsaas::from_us(static_cast<std::int64_t>(e.aux - 2));
                hv_.set_params(e.subject, p);
            } else if (e.aux == 1) {
                hv_.wake(e.subject, e.time);
            } else {
                hv_.block(e.subject, e.time);
            }
        } else if (e.kind == rsaas::EventKind::PeriodReplenish) {
            hv_.replenish(e.subject, e.time);
        }
    }

    void on_instant_end(rsaas::SimTime t) override {
        hv_.reschedule(t);
        for (auto& bad : hv_.check_invariants(true)) invariant_failures.push_back(std::move(bad));
        for (const auto& [v, d] : hv_.take_armed()) engine_.schedule(d, rsaas::EventKind::PeriodReplenish, v);
        if (auto next = hv_.next_timer(t); next && (armed_ <= t || *next < armed_)) {
            engine_.schedule(*next, rsaas::EventKind::BudgetExhausted);
            armed_ = *next;
        }
    }

    rsaas::Engine engine_;
    rsaas::rtds::RtdsScheduler hv_;
    rsaas::SimTime armed_ = rsaas::kTimeZero;
};

}  // namespace oracle
