#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rsaas/app/protocol.hpp"
#include "rsaas/machine.hpp"
#include "rsaas/platform.hpp"
#include "rsaas/sim/rng.hpp"

namespace rsaas::app {

struct AppParams {
    std::uint32_t n = 35;
    Duration period = from_us(100000);
    Duration first_release = from_us(20000);
    Duration cycle_offset = from_us(10000);  // common to both replicas, uniform [0, cycle_offset)
    Duration release_jitter = from_us(500);   // per replica, uniform [0, release_jitter)
    Duration produce_cost = from_us(150);
    Duration voter_cost = from_us(100);
    double cost_jitter = 0.5;  // uniform +-fraction on produce and voter costs
    Duration ack_cost = from_us(0);
    double p_mismatch = 0.0;
    std::optional<GuestPolicy> critical_policy;  // replica and voter tasks; VM default otherwise
    Duration stress_start_spread = from_us(10000);
    Duration drain = from_us(500000);
    std::array<std::uint32_t, 2> silence_after{std::numeric_limits<std::uint32_t>::max(),
                                               std::numeric_limits<std::uint32_t>::max()};

    void validate() const {
        if (n < 1) throw Error(Errc::InvalidExperiment, "app.n must be >= 1");
        if (period.count() <= 0) throw Error(Errc::InvalidExperiment, "app.period must be > 0");
        if (release_jitter.count() < 0 || cycle_offset.count() < 0 || first_release.count() < 0 || drain.count() < 0 ||
            stress_start_spread.count() < 0)
            throw Error(Errc::InvalidExperiment, "app durations must be >= 0");
        if (produce_cost.count() < 0 || voter_cost.count() < 0 || ack_cost.count() < 0)
            throw Error(Errc::InvalidExperiment, "app costs must be >= 0");
        if (!(cost_jitter >= 0.0 && cost_jitter <= 1.0))
            throw Error(Errc::InvalidExperiment, "app.cost_jitter must be in [0, 1]");
        if (!(p_mismatch >= 0.0 && p_mismatch <= 1.0))
            throw Error(Errc::InvalidExperiment, "app.p_mismatch must be in [0, 1]");
        if (critical_policy && !critical_policy->valid())
            throw Error(Errc::InvalidExperiment, "invalid guest policy for replica/voter tasks");
    }
};

struct CampaignResult {
    std::vector<LatencySample> samples;  // sorted by (vm, kind, seq)
    std::vector<VoteRecord> votes;       // by decision time
    std::vector<Measurement> measurements;
    std::array<std::size_t, 2> delivered{0, 0};
    std::size_t undecided = 0;
    std::uint64_t trace_digest = 0;
    std::uint64_t events = 0;
};

/// Roles of the platform's VMs as used by the 2oo2 application.
struct AppLayout {
    std::uint32_t pvm = 0;
    std::uint32_t voter = 0;
    std::array<std::uint32_t, 2> replicas{};
    std::vector<std::uint32_t> stress;
};

inline AppLayout app_layout(const PlatformSpec& spec) {
    AppLayout l;
    std::optional<std::uint32_t> pvm, voter;
    std::vector<std::uint32_t> replicas;
    for (std::uint32_t i = 0; i < spec.vms.size(); ++i) {
        switch (spec.vms[i].role) {
            case VmRole::Privileged: pvm = i; break;
            case VmRole::Voter:
                if (!voter) voter = i;
                break;
            case VmRole::Replica: replicas.push_back(i); break;
            case VmRole::Stress: l.stress.push_back(i); break;
        }
    }
    if (!pvm || !voter || replicas.size() < 2)
        throw Error(Errc::InvalidExperiment, "a 2oo2 run needs a privileged VM, a voter VM and two replica VMs");
    l.pvm = *pvm;
    l.voter = *voter;
    l.replicas = {replicas[0], replicas[1]};
    return l;
}

namespace detail {

inline Duration jittered(Duration base, double jitter, double u) {
    const double f = 1.0 + jitter * (2.0 * u - 1.0);
    return Duration{static_cast<std::int64_t>(std::llround(static_cast<double>(base.count()) * f))};
}

}  // namespace detail

/// Runs one 2oo2 campaign arm on `spec`. Every VM with the Stress role gets
/// one always-runnable hog per vCPU. All randomness is addressed by
/// (stream, index), so adding or removing the stress VM leaves the draws of
/// the application untouched.
class TwoOutOfTwo {
public:
    TwoOutOfTwo(const PlatformSpec& spec, AppParams params, ChannelModel channel, MachineOptions opts,
                std::uint64_t seed)
        : params_(std::move(params)), channel_(channel), seed_(seed), layout_(app_layout(spec)), m_(spec, opts),
          values_(seed, "values"), cycle_rng_(seed, "cycle"), voter_rng_(seed, "voter"), stress_rng_(seed, "stress"),
          replica_rng_{RngStream(seed, "replica1"), RngStream(seed, "replica2")} {
        params_.validate();
        channel_.validate();
        const auto& vms = spec.vms;
        for (std::size_t i = 0; i < vms[layout_.pvm].vcpus.size(); ++i)
            backend_.push_back(m_.add_task(layout_.pvm, i, "backend." + std::to_string(i)));
        const GuestPolicy critical_voter = params_.critical_policy.value_or(vms[layout_.voter].guest_policy);
        for (std::size_t i = 0; i < vms[layout_.voter].vcpus.size(); ++i)
            receiver_.push_back(m_.add_task(layout_.voter, i, "vote." + std::to_string(i), critical_voter));
        for (int r = 0; r < 2; ++r) {
            const auto vm = layout_.replicas[r];
            producer_[r] = m_.add_task(vm, 0, "replica", params_.critical_policy.value_or(vms[vm].guest_policy));
            replica_name_[r] = vms[vm].name;
        }
        voter_name_ = vms[layout_.voter].name;
        std::uint64_t stress_index = 0;
        for (auto vm : layout_.stress) {
            for (std::size_t i = 0; i < vms[vm].vcpus.size(); ++i, ++stress_index) {
                const auto hog = m_.add_task(vm, i, "hog." + std::to_string(i));
                const auto offset = Duration{static_cast<std::int64_t>(
                    stress_rng_.uniform_at(stress_index) * static_cast<double>(params_.stress_start_spread.count()))};
                m_.post(kTimeZero + offset, EventKind::TaskReady, hog, [this, hog] { m_.submit_endless(hog); });
            }
        }
    }

    CampaignResult run(EventTrace* trace = nullptr) {
        m_.set_trace(trace);
        SimTime last = kTimeZero;
        for (int r = 0; r < 2; ++r) {
            const std::uint32_t count = std::min(params_.n, params_.silence_after[r]);
            for (std::uint32_t k = 0; k < count; ++k) {
                const auto jitter = Duration{static_cast<std::int64_t>(
                    replica_rng_[r].uniform_at(2 * k) * static_cast<double>(params_.release_jitter.count()))};
                const auto offset = Duration{static_cast<std::int64_t>(
                    cycle_rng_.uniform_at(k) * static_cast<double>(params_.cycle_offset.count()))};
                const SimTime at = kTimeZero + params_.first_release + params_.period * k + offset + jitter;
                last = std::max(last, at);
                m_.post(at, EventKind::SampleDue, producer_[r], [this, r, k] { release(r, k); });
            }
        }
        m_.run_until(last + params_.drain);
        result_.undecided = voter_.undecided();
        result_.events = m_.engine().dispatched();
        if (trace != nullptr) result_.trace_digest = trace->digest();
        std::sort(result_.samples.begin(), result_.samples.end(), [](const LatencySample& a, const LatencySample& b) {
            if (a.vm != b.vm) return a.vm < b.vm;
            if (a.kind != b.kind) return a.kind < b.kind;
            return a.seq < b.seq;
        });
        return std::move(result_);
    }

    Machine& machine() { return m_; }
    const AppLayout& layout() const { return layout_; }

    /// Value replica r reports for seq under this seed.
    std::int64_t value_of(int r, std::uint64_t seq) const {
        const auto truth = static_cast<std::int64_t>(values_.at(3 * seq) % 1000);
        if (r == 0) return truth;
        const bool differ = values_.uniform_at(3 * seq + 1) < params_.p_mismatch;
        return differ ? truth + 1 + static_cast<std::int64_t>(values_.at(3 * seq + 2) % 9) : truth;
    }

private:
    TaskHandle backend_for(int r) const { return backend_[static_cast<std::size_t>(r) % backend_.size()]; }
    TaskHandle receiver_for(int r) const { return receiver_[static_cast<std::size_t>(r) % receiver_.size()]; }

    void release(int r, std::uint64_t seq) {
        const Duration cost =
            detail::jittered(params_.produce_cost, params_.cost_jitter, replica_rng_[r].uniform_at(2 * seq + 1));
        m_.submit_job(producer_[r], cost, [this, r, seq](SimTime now) {
            Measurement msg{r, seq, value_of(r, seq), now};
            replicas_[r].sent(seq, now);
            result_.measurements.push_back(msg);
            m_.submit_job(backend_for(r), channel_.backend_cost, [this, msg](SimTime t) {
                m_.post(t + channel_.wire_delay, EventKind::MessageDeliver, receiver_for(msg.replica),
                        [this, msg] { deliver(msg); });
            });
        });
    }

    void deliver(const Measurement& msg) {
        voter_.arrive(msg.replica, msg.seq, m_.now());
        ++result_.delivered[msg.replica];
        const Duration cost = detail::jittered(params_.voter_cost, params_.cost_jitter,
                                               voter_rng_.uniform_at(2 * msg.seq + msg.replica));
        m_.submit_job(receiver_for(msg.replica), cost, [this, msg](SimTime now) {
            if (auto decided = voter_.process(msg.replica, msg.seq, msg.value, now)) {
                result_.votes.push_back(decided->first);
                result_.samples.push_back({voter_name_, SampleKind::VoterDecision, msg.seq, decided->second});
            }
            send_ack(msg.replica, msg.seq);
        });
    }

    void send_ack(int r, std::uint64_t seq) {
        m_.submit_job(backend_for(r), channel_.backend_cost, [this, r, seq](SimTime t) {
            m_.post(t + channel_.wire_delay, EventKind::MessageDeliver, producer_[r], [this, r, seq] {
                m_.submit_job(producer_[r], params_.ack_cost, [this, r, seq](SimTime now) {
                    const Duration rt = replicas_[r].on_ack(seq, now);
                    result_.samples.push_back({replica_name_[r], SampleKind::ReplicaRoundTrip, seq, rt});
                });
            });
        });
    }

    AppParams params_;
    ChannelModel channel_;
    std::uint64_t seed_;
    AppLayout layout_;
    Machine m_;
    RngStream values_, cycle_rng_, voter_rng_, stress_rng_;
    std::array<RngStream, 2> replica_rng_;

    std::vector<TaskHandle> backend_, receiver_;
    std::array<TaskHandle, 2> producer_{};
    std::array<std::string, 2> replica_name_;
    std::string voter_name_;

    VoterState voter_;
    std::array<ReplicaState, 2> replicas_;
    CampaignResult result_;
};

inline CampaignResult run_2oo2(const PlatformSpec& spec, const AppParams& params, const ChannelModel& channel,
                               const MachineOptions& opts, std::uint64_t seed, EventTrace* trace = nullptr) {
    TwoOutOfTwo app(spec, params, channel, opts, seed);
    return app.run(trace);
}

}  // namespace rsaas::app
