#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rsaas/error.hpp"
#include "rsaas/sim/time.hpp"

namespace rsaas::app {

enum class SampleKind { ReplicaRoundTrip, VoterDecision };

constexpr std::string_view to_string(SampleKind k) {
    return k == SampleKind::ReplicaRoundTrip ? "ReplicaRoundTrip" : "VoterDecision";
}

inline std::optional<SampleKind> parse_sample_kind(std::string_view s) {
    if (s == "ReplicaRoundTrip") return SampleKind::ReplicaRoundTrip;
    if (s == "VoterDecision") return SampleKind::VoterDecision;
    return std::nullopt;
}

struct Measurement {
    int replica = 0;  // 0 or 1
    std::uint64_t seq = 0;
    std::int64_t value = 0;
    SimTime sent_at{};
};

enum class VoteOutcome { Match, Mismatch };

struct VoteRecord {
    std::uint64_t seq = 0;
    std::array<std::int64_t, 2> values{};
    VoteOutcome outcome = VoteOutcome::Match;
    SimTime decided_at{};
};

struct LatencySample {
    std::string vm;
    SampleKind kind = SampleKind::ReplicaRoundTrip;
    std::uint64_t seq = 0;
    Duration latency{};
};

/// Per-hop cost of the privileged VM's split-driver backend plus a fixed
/// wire delay per message.
struct ChannelModel {
    Duration backend_cost = from_us(50);
    Duration wire_delay = from_us(10);

    void validate() const {
        if (backend_cost.count() < 0 || wire_delay.count() < 0)
            throw Error(Errc::InvalidExperiment, "channel costs must be >= 0");
    }
};

/// Voter bookkeeping: arrivals per seq and pairwise comparison.
class VoterState {
public:
    /// Registers the arrival of (replica, seq). Throws DuplicateSeq on repeat.
    void arrive(int replica, std::uint64_t seq, SimTime at) {
        auto& p = pending_[seq];
        if (p.arrived[replica]) {
            throw Error(Errc::DuplicateSeq,
                        "replica " + std::to_string(replica + 1) + " delivered seq " + std::to_string(seq) + " twice");
        }
        p.arrived[replica] = true;
        if (!p.first_arrival || at < *p.first_arrival) p.first_arrival = at;
    }

    /// Stores the processed value; when both halves are present the pair is
    /// voted and the decision latency is reported.
    std::optional<std::pair<VoteRecord, Duration>> process(int replica, std::uint64_t seq, std::int64_t value,
                                                           SimTime now) {
        auto it = pending_.find(seq);
        if (it == pending_.end() || !it->second.arrived[replica])
            throw Error(Errc::UnknownSeq, "voter processed seq " + std::to_string(seq) + " before arrival");
        auto& p = it->second;
        p.value[replica] = value;
        if (!p.value[0] || !p.value[1]) return std::nullopt;
        VoteRecord rec{seq, {*p.value[0], *p.value[1]},
                       *p.value[0] == *p.value[1] ? VoteOutcome::Match : VoteOutcome::Mismatch, now};
        const Duration latency = now - *p.first_arrival;
        pending_.erase(it);
        ++decided_;
        return std::make_pair(rec, latency);
    }

    std::size_t decided() const { return decided_; }
    std::size_t undecided() const { return pending_.size(); }

private:
    struct Pending {
        std::array<bool, 2> arrived{false, false};
        std::array<std::optional<std::int64_t>, 2> value;
        std::optional<SimTime> first_arrival;
    };
    std::map<std::uint64_t, Pending> pending_;
    std::size_t decided_ = 0;
};

/// Replica bookkeeping: outstanding sends awaiting their ACK.
class ReplicaState {
public:
    void sent(std::uint64_t seq, SimTime at) {
        if (!last_seq_ || seq > *last_seq_) last_seq_ = seq;
        else throw Error(Errc::DuplicateSeq, "replica seq must increase");
        outstanding_[seq] = at;
    }

    Duration on_ack(std::uint64_t seq, SimTime now) {
        auto it = outstanding_.find(seq);
        if (it == outstanding_.end()) throw Error(Errc::UnknownSeq, "ACK for unknown seq " + std::to_string(seq));
        const Duration rt = now - it->second;
        outstanding_.erase(it);
        return rt;
    }

    std::size_t outstanding() const { return outstanding_.size(); }

private:
    std::map<std::uint64_t, SimTime> outstanding_;
    std::optional<std::uint64_t> last_seq_;
};

/// Voting response requirement: every decision must be within the upper
/// bound of the band; the band itself is reported as given.
struct ResponseBand {
    Duration lower = from_us(350000);
    Duration upper = from_us(500000);
};

struct ResponseCheck {
    bool pass = true;
    bool vacuous = false;
    std::size_t failures = 0;
    std::vector<bool> per_sample;
    std::string warning;
};

inline ResponseCheck check_response_requirement(const std::vector<Duration>& latencies, ResponseBand band = {}) {
    ResponseCheck r;
    if (latencies.empty()) {
        r.vacuous = true;
        r.warning = "no voter decisions to check";
        return r;
    }
    for (Duration d : latencies) {
        const bool ok = d <= band.upper;
        r.per_sample.push_back(ok);
        if (!ok) ++r.failures;
    }
    r.pass = r.failures == 0;
    return r;
}

}  // namespace rsaas::app
