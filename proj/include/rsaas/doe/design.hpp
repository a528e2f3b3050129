#pragma once

#include <algorithm>
#include <cctype>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rsaas/error.hpp"
#include "rsaas/platform.hpp"

namespace rsaas::doe {

struct Factor {
    std::string name;
    std::vector<std::string> levels;
};

struct DesignRun {
    std::string id;  // uppercase levels joined by '_'
    std::vector<std::pair<std::string, std::string>> assignment;

    const std::string* level(std::string_view factor) const {
        for (const auto& [f, l] : assignment)
            if (f == factor) return &l;
        return nullptr;
    }
};

struct DesignPlan {
    std::vector<Factor> factors;
    std::vector<DesignRun> runs;
};

inline std::string upper(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

/// Cartesian product of the levels. The first factor varies slowest, each
/// factor's levels keep their listed order.
inline DesignPlan full_factorial(const std::vector<Factor>& factors) {
    if (factors.empty()) throw Error(Errc::EmptyFactorList, "design needs at least one factor");
    for (const auto& f : factors) {
        if (f.levels.empty()) throw Error(Errc::EmptyLevels, "factor '" + f.name + "' has no levels");
        std::set<std::string> seen;
        for (const auto& l : f.levels)
            if (!seen.insert(upper(l)).second)
                throw Error(Errc::DuplicateLevel, "factor '" + f.name + "' repeats level '" + l + "'");
    }
    DesignPlan plan{factors, {}};
    std::vector<std::size_t> idx(factors.size(), 0);
    while (true) {
        DesignRun run;
        for (std::size_t i = 0; i < factors.size(); ++i) {
            const auto& l = factors[i].levels[idx[i]];
            run.assignment.emplace_back(factors[i].name, l);
            run.id += (i ? "_" : "") + upper(l);
        }
        plan.runs.push_back(std::move(run));
        std::size_t i = factors.size();
        while (i > 0) {
            --i;
            if (++idx[i] < factors[i].levels.size()) break;
            idx[i] = 0;
            if (i == 0) return plan;
        }
    }
}

enum class StressLevel { None, Low, Mid, High };

constexpr std::string_view to_string(StressLevel s) {
    switch (s) {
        case StressLevel::None: return "NONE";
        case StressLevel::Low: return "LOW";
        case StressLevel::Mid: return "MID";
        case StressLevel::High: return "HIGH";
    }
    return "?";
}

inline std::optional<StressLevel> parse_stress_level(std::string_view s) {
    const auto u = upper(s);
    if (u == "NONE") return StressLevel::None;
    if (u == "LOW") return StressLevel::Low;
    if (u == "MID") return StressLevel::Mid;
    if (u == "HIGH") return StressLevel::High;
    return std::nullopt;
}

struct StressParams {
    RtdsParams params{from_us(4000), from_us(10000), true};
    GuestPolicy policy = GuestPolicy::fifo(50);
};

/// Stress VM for a load level on the proof-of-concept layout:
///   Low  -> 1 vCPU on the lowest free pCPU (6)
///   Mid  -> 4 vCPUs on the free pCPUs and the pVM pCPUs: 6, 7, 0, 1
///   High -> 4 vCPUs on the voter and replica pCPUs: 2, 3, 4, 5
/// None yields no VM.
inline std::optional<VmSpec> materialize_stress(StressLevel level, const PlatformSpec& platform,
                                                const StressParams& sp = {}) {
    auto pins_of = [&](VmRole role) {
        std::vector<std::vector<PCpuId>> out;
        for (const auto& vm : platform.vms)
            if (vm.role == role)
                for (const auto& v : vm.vcpus) out.push_back(v.affinity);
        return out;
    };
    using Pins = std::vector<std::vector<PCpuId>>;
    const bool compatible = platform.pcpu_count >= 8 && free_pcpus(platform) == std::vector<PCpuId>{6, 7} &&
                            pins_of(VmRole::Privileged) == Pins{{0}, {1}} &&
                            pins_of(VmRole::Voter) == Pins{{2}, {3}} && pins_of(VmRole::Replica) == Pins{{4}, {5}} &&
                            pins_of(VmRole::Stress).empty();
    if (!compatible)
        throw Error(Errc::IncompatiblePlatform, "stress levels are defined for the 8-pCPU proof-of-concept layout");

    std::vector<PCpuId> pins;
    switch (level) {
        case StressLevel::None: return std::nullopt;
        case StressLevel::Low: pins = {6}; break;
        case StressLevel::Mid: pins = {6, 7, 0, 1}; break;
        case StressLevel::High: pins = {2, 3, 4, 5}; break;
    }
    VmSpec vm{"stress", VmRole::Stress, {}, sp.policy, platform.vms.front().pool};
    for (std::size_t i = 0; i < pins.size(); ++i)
        vm.vcpus.push_back({"stress." + std::to_string(i), sp.params, {pins[i]}});
    return vm;
}

}  // namespace rsaas::doe
