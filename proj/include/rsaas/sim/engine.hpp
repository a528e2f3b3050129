#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rsaas/error.hpp"
#include "rsaas/sim/rng.hpp"
#include "rsaas/sim/time.hpp"

namespace rsaas {

enum class EventKind : std::uint8_t {
    TaskReady,
    BudgetExhausted,
    PeriodReplenish,
    TimerFire,
    MessageDeliver,
    TaskComplete,
    SampleDue,
};

constexpr std::string_view to_string(EventKind k) {
    switch (k) {
        case EventKind::TaskReady: return "TaskReady";
        case EventKind::BudgetExhausted: return "BudgetExhausted";
        case EventKind::PeriodReplenish: return "PeriodReplenish";
        case EventKind::TimerFire: return "TimerFire";
        case EventKind::MessageDeliver: return "MessageDeliver";
        case EventKind::TaskComplete: return "TaskComplete";
        case EventKind::SampleDue: return "SampleDue";
    }
    return "?";
}

struct SimEvent {
    SimTime time;
    std::uint64_t seq = 0;
    EventKind kind = EventKind::TimerFire;
    std::uint32_t subject = 0;
    std::uint64_t aux = 0;
};

/// Event-trace dump: one line per record, `time_ns,seq,kind,subject,aux`.
/// Scheduler decisions use `-` in the seq column. A running FNV-1a digest
/// over all lines allows cheap trace comparison without keeping the text.
class EventTrace {
public:
    EventTrace() = default;
    explicit EventTrace(std::ostream* out) : out_(out) {}

    void event(const SimEvent& e) {
        line(std::to_string(ns_of(e.time)) + ',' + std::to_string(e.seq) + ',' + std::string(to_string(e.kind)) +
             ',' + std::to_string(e.subject) + ',' + std::to_string(e.aux));
    }

    void decision(SimTime t, std::string_view what, std::int64_t a, std::int64_t b) {
        line(std::to_string(ns_of(t)) + ",-," + std::string(what) + ',' + std::to_string(a) + ',' +
             std::to_string(b));
    }

    std::uint64_t digest() const { return digest_; }
    std::uint64_t lines() const { return lines_; }

private:
    void line(const std::string& s) {
        digest_ = fnv1a(s, digest_);
        digest_ = fnv1a("\n", digest_);
        ++lines_;
        if (out_ != nullptr) *out_ << s << '\n';
    }

    std::ostream* out_ = nullptr;
    std::uint64_t digest_ = 0xCBF29CE484222325ULL;
    std::uint64_t lines_ = 0;
};

/// Callbacks around the processing of one simulated instant. All events
/// sharing a timestamp are dispatched between one begin/end pair.
class InstantHooks {
public:
    virtual ~InstantHooks() = default;
    virtual void on_instant_begin(SimTime) {}
    virtual void on_event(const SimEvent&) {}
    virtual void on_instant_end(SimTime) {}
};

/// Deterministic discrete-event core. Events are totally ordered by
/// (time, seq); seq is the insertion counter.
class Engine {
public:
    using Action = std::function<void()>;

    SimTime now() const { return now_; }
    std::size_t pending() const { return heap_.size(); }
    std::uint64_t dispatched() const { return dispatched_; }

    void set_hooks(InstantHooks* hooks) { hooks_ = hooks; }
    void set_trace(EventTrace* trace) { trace_ = trace; }
    EventTrace* trace() const { return trace_; }

    /// Enqueues an event. An action, when given, runs instead of the
    /// on_event hook. Throws PastEvent if `t` precedes the clock.
    std::uint64_t schedule(SimTime t, EventKind kind, std::uint32_t subject = 0, std::uint64_t aux = 0,
                           Action action = {}) {
        if (t < now_)
            throw Error(Errc::PastEvent, "event at " + std::to_string(ns_of(t)) + "ns before clock " +
                                             std::to_string(ns_of(now_)) + "ns");
        const std::uint64_t seq = next_seq_++;
        heap_.push_back({SimEvent{t, seq, kind, subject, aux}, std::move(action)});
        std::push_heap(heap_.begin(), heap_.end(), Later{});
        return seq;
    }

    std::uint64_t schedule(const SimEvent& e, Action action = {}) {
        return schedule(e.time, e.kind, e.subject, e.aux, std::move(action));
    }

    SimTime next_time() const { return heap_.empty() ? kTimeNever : heap_.front().event.time; }

    /// Processes every event with time <= t_end, then sets the clock to t_end.
    std::size_t run_until(SimTime t_end) {
        if (t_end < now_) throw Error(Errc::PastEvent, "run_until target precedes the clock");
        std::size_t processed = 0;
        while (!heap_.empty() && heap_.front().event.time <= t_end) {
            const SimTime t = heap_.front().event.time;
            now_ = t;
            if (hooks_ != nullptr) hooks_->on_instant_begin(t);
            // End-of-instant processing may schedule more work at t.
            while (!heap_.empty() && heap_.front().event.time == t) {
                while (!heap_.empty() && heap_.front().event.time == t) {
                    dispatch_front();
                    ++processed;
                }
                if (hooks_ != nullptr) hooks_->on_instant_end(t);
            }
        }
        now_ = t_end;
        return processed;
    }

private:
    struct Entry {
        SimEvent event;
        Action action;
    };
    struct Later {
        bool operator()(const Entry& a, const Entry& b) const {
            if (a.event.time != b.event.time) return a.event.time > b.event.time;
            return a.event.seq > b.event.seq;
        }
    };

    void dispatch_front() {
        std::pop_heap(heap_.begin(), heap_.end(), Later{});
        Entry entry = std::move(heap_.back());
        heap_.pop_back();
        ++dispatched_;
        if (trace_ != nullptr) trace_->event(entry.event);
        if (entry.action)
            entry.action();
        else if (hooks_ != nullptr)
            hooks_->on_event(entry.event);
    }

    std::vector<Entry> heap_;
    SimTime now_ = kTimeZero;
    std::uint64_t next_seq_ = 0;
    std::uint64_t dispatched_ = 0;
    InstantHooks* hooks_ = nullptr;
    EventTrace* trace_ = nullptr;
};

}  // namespace rsaas
