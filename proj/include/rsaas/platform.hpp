#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "rsaas/error.hpp"
#include "rsaas/sim/time.hpp"

namespace rsaas {

using PCpuId = std::uint32_t;

enum class SchedPolicy { EDF, RM };
enum class VmRole { Privileged, Replica, Voter, Stress };

constexpr std::string_view to_string(SchedPolicy p) { return p == SchedPolicy::EDF ? "EDF" : "RM"; }

constexpr std::string_view to_string(VmRole r) {
    switch (r) {
        case VmRole::Privileged: return "privileged";
        case VmRole::Replica: return "replica";
        case VmRole::Voter: return "voter";
        case VmRole::Stress: return "stress";
    }
    return "?";
}

/// Deferrable-server parameters of one vCPU.
struct RtdsParams {
    Duration budget{};
    Duration period{};
    bool extratime = false;

    bool valid() const { return period.count() > 0 && budget.count() > 0 && budget <= period; }
    friend bool operator==(const RtdsParams&, const RtdsParams&) = default;
};

enum class GuestPolicyKind { Fifo, RoundRobin, Deadline };

constexpr std::string_view to_string(GuestPolicyKind k) {
    switch (k) {
        case GuestPolicyKind::Fifo: return "FIFO";
        case GuestPolicyKind::RoundRobin: return "RR";
        case GuestPolicyKind::Deadline: return "DEADLINE";
    }
    return "?";
}

/// Scheduling class of a guest task. `priority` is used by FIFO and RR,
/// the three durations by DEADLINE.
struct GuestPolicy {
    GuestPolicyKind kind = GuestPolicyKind::Fifo;
    int priority = 50;
    Duration runtime{};
    Duration deadline{};
    Duration period{};

    static GuestPolicy fifo(int prio) { return {GuestPolicyKind::Fifo, prio, {}, {}, {}}; }
    static GuestPolicy round_robin(int prio) { return {GuestPolicyKind::RoundRobin, prio, {}, {}, {}}; }
    static GuestPolicy deadline_server(Duration runtime, Duration deadline, Duration period) {
        return {GuestPolicyKind::Deadline, 0, runtime, deadline, period};
    }

    bool valid() const {
        if (kind == GuestPolicyKind::Deadline)
            return runtime.count() > 0 && runtime <= deadline && deadline <= period;
        return priority >= 1 && priority <= 99;
    }
    friend bool operator==(const GuestPolicy&, const GuestPolicy&) = default;
};

struct VCpuSpec {
    std::string id;
    RtdsParams params;
    std::vector<PCpuId> affinity;
    friend bool operator==(const VCpuSpec&, const VCpuSpec&) = default;
};

struct VmSpec {
    std::string name;
    VmRole role = VmRole::Replica;
    std::vector<VCpuSpec> vcpus;
    GuestPolicy guest_policy;
    std::string pool;  // empty: first pool
    friend bool operator==(const VmSpec&, const VmSpec&) = default;
};

struct CpuPool {
    std::string name;
    std::vector<PCpuId> pcpus;
    SchedPolicy policy = SchedPolicy::EDF;
    friend bool operator==(const CpuPool&, const CpuPool&) = default;
};

struct PlatformSpec {
    std::uint32_t pcpu_count = 0;
    std::vector<CpuPool> pools;
    std::vector<VmSpec> vms;

    const CpuPool& pool_of(const VmSpec& vm) const {
        if (vm.pool.empty()) return pools.front();
        for (const auto& p : pools)
            if (p.name == vm.pool) return p;
        throw Error(Errc::InvalidPlatform, "VM '" + vm.name + "' references unknown pool '" + vm.pool + "'");
    }

    const VmSpec* find_vm(std::string_view name) const {
        for (const auto& vm : vms)
            if (vm.name == name) return &vm;
        return nullptr;
    }

    friend bool operator==(const PlatformSpec&, const PlatformSpec&) = default;
};

enum class PlatformIssueKind {
    InvalidPcpuCount,
    EmptyPool,
    PoolOverlap,
    UnpooledPcpu,
    PcpuOutOfRange,
    UnknownPool,
    EmptyAffinity,
    AffinityOutsidePool,
    BudgetExceedsPeriod,
    NonPositiveParams,
    InvalidGuestPolicy,
    DuplicateId,
    PrivilegedCount,
};

constexpr std::string_view to_string(PlatformIssueKind k) {
    switch (k) {
        case PlatformIssueKind::InvalidPcpuCount: return "InvalidPcpuCount";
        case PlatformIssueKind::EmptyPool: return "EmptyPool";
        case PlatformIssueKind::PoolOverlap: return "PoolOverlap";
        case PlatformIssueKind::UnpooledPcpu: return "UnpooledPcpu";
        case PlatformIssueKind::PcpuOutOfRange: return "PcpuOutOfRange";
        case PlatformIssueKind::UnknownPool: return "UnknownPool";
        case PlatformIssueKind::EmptyAffinity: return "EmptyAffinity";
        case PlatformIssueKind::AffinityOutsidePool: return "AffinityOutsidePool";
        case PlatformIssueKind::BudgetExceedsPeriod: return "BudgetExceedsPeriod";
        case PlatformIssueKind::NonPositiveParams: return "NonPositiveParams";
        case PlatformIssueKind::InvalidGuestPolicy: return "InvalidGuestPolicy";
        case PlatformIssueKind::DuplicateId: return "DuplicateId";
        case PlatformIssueKind::PrivilegedCount: return "PrivilegedCount";
    }
    return "?";
}

struct PlatformIssue {
    PlatformIssueKind kind;
    std::string detail;
};

/// Enumerates every invariant violation of `spec`; an empty result means valid.
inline std::vector<PlatformIssue> validate_platform(const PlatformSpec& spec) {
    std::vector<PlatformIssue> issues;
    auto add = [&](PlatformIssueKind k, std::string d) { issues.push_back({k, std::move(d)}); };

    if (spec.pcpu_count < 1) add(PlatformIssueKind::InvalidPcpuCount, "pcpu_count must be >= 1");

    std::map<PCpuId, std::string> owner;
    std::set<std::string> pool_names;
    for (const auto& pool : spec.pools) {
        if (!pool_names.insert(pool.name).second)
            add(PlatformIssueKind::DuplicateId, "pool name '" + pool.name + "' repeated");
        if (pool.pcpus.empty()) add(PlatformIssueKind::EmptyPool, "pool '" + pool.name + "' has no pCPU");
        for (PCpuId p : pool.pcpus) {
            if (p >= spec.pcpu_count) {
                add(PlatformIssueKind::PcpuOutOfRange,
                    "pool '" + pool.name + "' lists pCPU" + std::to_string(p));
                continue;
            }
            auto [it, fresh] = owner.emplace(p, pool.name);
            if (!fresh && it->second != pool.name)
                add(PlatformIssueKind::PoolOverlap,
                    "pCPU" + std::to_string(p) + " in pools '" + it->second + "' and '" + pool.name + "'");
        }
    }
    for (PCpuId p = 0; p < spec.pcpu_count; ++p)
        if (!owner.contains(p)) add(PlatformIssueKind::UnpooledPcpu, "pCPU" + std::to_string(p) + " belongs to no pool");

    std::set<std::string> vm_names;
    std::set<std::string> vcpu_ids;
    int privileged = 0;
    for (const auto& vm : spec.vms) {
        if (!vm_names.insert(vm.name).second) add(PlatformIssueKind::DuplicateId, "VM name '" + vm.name + "' repeated");
        if (vm.role == VmRole::Privileged) ++privileged;
        if (!vm.guest_policy.valid())
            add(PlatformIssueKind::InvalidGuestPolicy, "VM '" + vm.name + "' has an invalid guest policy");

        const CpuPool* pool = nullptr;
        if (vm.pool.empty()) {
            if (!spec.pools.empty()) pool = &spec.pools.front();
        } else {
            for (const auto& p : spec.pools)
                if (p.name == vm.pool) pool = &p;
        }
        if (pool == nullptr) add(PlatformIssueKind::UnknownPool, "VM '" + vm.name + "' has no pool");

        for (const auto& v : vm.vcpus) {
            if (!vcpu_ids.insert(v.id).second) add(PlatformIssueKind::DuplicateId, "vCPU id '" + v.id + "' repeated");
            if (v.params.period.count() <= 0 || v.params.budget.count() <= 0)
                add(PlatformIssueKind::NonPositiveParams, "vCPU '" + v.id + "' needs budget > 0 and period > 0");
            else if (v.params.budget > v.params.period)
                add(PlatformIssueKind::BudgetExceedsPeriod,
                    "vCPU '" + v.id + "' budget " + std::to_string(v.params.budget.count() / 1000) + "us > period " +
                        std::to_string(v.params.period.count() / 1000) + "us");
            if (pool == nullptr) continue;
            std::size_t inside = 0;
            for (PCpuId p : v.affinity)
                if (std::find(pool->pcpus.begin(), pool->pcpus.end(), p) != pool->pcpus.end()) ++inside;
            if (inside == 0)
                add(PlatformIssueKind::EmptyAffinity, "vCPU '" + v.id + "' has no affinity pCPU within pool '" +
                                                          pool->name + "'");
            else if (inside != v.affinity.size())
                add(PlatformIssueKind::AffinityOutsidePool,
                    "vCPU '" + v.id + "' pins pCPUs outside pool '" + pool->name + "'");
        }
    }
    if (privileged != 1)
        add(PlatformIssueKind::PrivilegedCount,
            "expected exactly one privileged VM, found " + std::to_string(privileged));
    return issues;
}

/// Throws InvalidPlatform listing every issue unless `spec` is valid.
inline const PlatformSpec& require_valid(const PlatformSpec& spec) {
    auto issues = validate_platform(spec);
    if (!issues.empty()) {
        std::ostringstream msg;
        for (std::size_t i = 0; i < issues.size(); ++i)
            msg << (i ? "; " : "") << to_string(issues[i].kind) << " (" << issues[i].detail << ")";
        throw Error(Errc::InvalidPlatform, msg.str());
    }
    return spec;
}

struct PocDefaults {
    Duration budget = from_us(4000);
    Duration period = from_us(10000);
    bool critical_extratime = false;
    SchedPolicy pool_policy = SchedPolicy::EDF;
    GuestPolicy critical_policy = GuestPolicy::fifo(80);
    GuestPolicy backend_policy = GuestPolicy::fifo(90);
};

/// The 8-pCPU proof-of-concept layout: pVM on pCPU0/1, voter on pCPU2/3,
/// one replica each on pCPU4 and pCPU5, pCPU6/7 left for the stress VM.
inline PlatformSpec paper_poc_platform(const PocDefaults& d = {}) {
    const RtdsParams params{d.budget, d.period, d.critical_extratime};
    PlatformSpec spec;
    spec.pcpu_count = 8;
    spec.pools.push_back({"pool0", {0, 1, 2, 3, 4, 5, 6, 7}, d.pool_policy});
    spec.vms.push_back({"pvm", VmRole::Privileged, {{"pvm.0", params, {0}}, {"pvm.1", params, {1}}},
                        d.backend_policy, ""});
    spec.vms.push_back({"voter", VmRole::Voter, {{"voter.0", params, {2}}, {"voter.1", params, {3}}},
                        d.critical_policy, ""});
    spec.vms.push_back({"replica1", VmRole::Replica, {{"replica1.0", params, {4}}}, d.critical_policy, ""});
    spec.vms.push_back({"replica2", VmRole::Replica, {{"replica2.0", params, {5}}}, d.critical_policy, ""});
    return spec;
}

/// pCPUs that no vCPU of the platform may run on.
inline std::vector<PCpuId> free_pcpus(const PlatformSpec& spec) {
    std::set<PCpuId> used;
    for (const auto& vm : spec.vms)
        for (const auto& v : vm.vcpus) used.insert(v.affinity.begin(), v.affinity.end());
    std::vector<PCpuId> out;
    for (PCpuId p = 0; p < spec.pcpu_count; ++p)
        if (!used.contains(p)) out.push_back(p);
    return out;
}

/// Reserved bandwidth per pCPU, counting only vCPUs pinned to that single pCPU.
inline std::vector<double> pcpu_utilization(const PlatformSpec& spec) {
    std::vector<double> u(spec.pcpu_count, 0.0);
    for (const auto& vm : spec.vms)
        for (const auto& v : vm.vcpus)
            if (v.affinity.size() == 1 && v.affinity.front() < spec.pcpu_count)
                u[v.affinity.front()] += static_cast<double>(v.params.budget.count()) /
                                         static_cast<double>(v.params.period.count());
    return u;
}

}  // namespace rsaas
