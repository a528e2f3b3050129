#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <ostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "rsaas/app/workload.hpp"
#include "rsaas/doe/design.hpp"
#include "rsaas/machine.hpp"
#include "rsaas/platform.hpp"

namespace rsaas::doe {

enum class Arm { Without, With };

constexpr std::string_view to_string(Arm a) { return a == Arm::Without ? "without" : "with"; }

inline std::optional<Arm> parse_arm(std::string_view s) {
    if (s == "without") return Arm::Without;
    if (s == "with") return Arm::With;
    return std::nullopt;
}

/// Guest policy parameters behind the scheduler factor levels.
struct GuestLevels {
    int priority = 80;
    Duration dl_runtime = from_us(2000);
    Duration dl_deadline = from_us(10000);
    Duration dl_period = from_us(10000);

    GuestPolicy policy_for(std::string_view level) const {
        const auto u = upper(level);
        if (u == "FIFO") return GuestPolicy::fifo(priority);
        if (u == "RR") return GuestPolicy::round_robin(priority);
        if (u == "DEADLINE") return GuestPolicy::deadline_server(dl_runtime, dl_deadline, dl_period);
        throw Error(Errc::InvalidExperiment, "unknown scheduler level '" + std::string(level) + "'");
    }
};

struct ExperimentConfig {
    PlatformSpec platform = paper_poc_platform();
    app::AppParams app;
    app::ChannelModel channel;
    ContentionModel contention{true, 0.2};
    Duration extratime_slice = from_us(1000);
    Duration rr_timeslice = from_us(100000);
    StressParams stress;
    GuestLevels guest;
    std::vector<Factor> factors{{"stress", {"LOW", "MID", "HIGH"}}, {"scheduler", {"FIFO"}}};
    std::uint64_t seed = 1;
    std::uint32_t repetitions = 1;
    unsigned threads = 0;  // 0: hardware concurrency

    void validate() const {
        require_valid(platform);
        app.validate();
        channel.validate();
        contention.validate();
        if (app.n < 2) throw Error(Errc::InvalidExperiment, "N must be >= 2 for the t-test");
        if (repetitions < 1) throw Error(Errc::InvalidExperiment, "repetitions must be >= 1");
        if (extratime_slice.count() <= 0 || rr_timeslice.count() <= 0)
            throw Error(Errc::InvalidExperiment, "time slices must be > 0");
        if (!stress.params.valid() || !stress.policy.valid())
            throw Error(Errc::InvalidExperiment, "invalid stress VM parameters");
        const auto plan = full_factorial(factors);
        for (const auto& f : factors) {
            for (const auto& l : f.levels) {
                if (f.name == "stress") {
                    if (!parse_stress_level(l)) throw Error(Errc::InvalidExperiment, "unknown stress level '" + l + "'");
                } else if (f.name == "scheduler") {
                    (void)guest.policy_for(l);
                } else if (f.name == "hv_policy") {
                    if (upper(l) != "EDF" && upper(l) != "RM")
                        throw Error(Errc::InvalidExperiment, "unknown hv_policy level '" + l + "'");
                } else {
                    throw Error(Errc::InvalidExperiment, "unknown factor '" + f.name + "'");
                }
            }
        }
        if (std::none_of(factors.begin(), factors.end(), [](const Factor& f) { return f.name == "stress"; }))
            throw Error(Errc::InvalidExperiment, "the design needs a 'stress' factor");
    }
};

/// Everything one simulation cell depends on.
struct CellSpec {
    std::string run_id;
    std::size_t run_index = 0;
    Arm arm = Arm::Without;
    std::uint32_t repetition = 0;
    std::uint64_t seed = 0;
    PlatformSpec platform;
    app::AppParams app;
    app::ChannelModel channel;
    MachineOptions machine;
};

inline CellSpec build_cell(const ExperimentConfig& cfg, const DesignPlan& plan, std::size_t run_index, Arm arm,
                           std::uint32_t repetition) {
    const auto& run = plan.runs.at(run_index);
    CellSpec c;
    c.run_id = run.id;
    c.run_index = run_index;
    c.arm = arm;
    c.repetition = repetition;
    c.seed = derive_seed(cfg.seed, repetition);
    c.platform = cfg.platform;
    c.app = cfg.app;
    c.channel = cfg.channel;
    c.machine.contention = cfg.contention;
    c.machine.extratime_slice = cfg.extratime_slice;
    c.machine.rr_timeslice = cfg.rr_timeslice;
    c.machine.keep_history = false;
    if (const auto* s = run.level("scheduler")) c.app.critical_policy = cfg.guest.policy_for(*s);
    if (const auto* p = run.level("hv_policy"))
        for (auto& pool : c.platform.pools) pool.policy = upper(*p) == "RM" ? SchedPolicy::RM : SchedPolicy::EDF;
    if (arm == Arm::With) {
        const auto* s = run.level("stress");
        const auto level = s ? parse_stress_level(*s) : std::nullopt;
        if (!level) throw Error(Errc::InvalidExperiment, "run '" + run.id + "' has no stress level");
        if (auto vm = materialize_stress(*level, c.platform, cfg.stress)) c.platform.vms.push_back(std::move(*vm));
    } else {
        (void)materialize_stress(StressLevel::None, c.platform, cfg.stress);
    }
    return c;
}

inline std::string describe(const GuestPolicy& p) {
    std::ostringstream o;
    o << to_string(p.kind);
    if (p.kind == GuestPolicyKind::Deadline)
        o << '(' << p.runtime.count() << ',' << p.deadline.count() << ',' << p.period.count() << ")ns";
    else
        o << '(' << p.priority << ')';
    return o.str();
}

/// One `key=value` line per parameter of the cell except its arm; used to
/// show what a paired with/without comparison changes.
inline std::vector<std::string> describe(const CellSpec& c) {
    std::vector<std::string> out;
    auto add = [&](const std::string& k, const auto& v) {
        std::ostringstream o;
        o << k << '=' << v;
        out.push_back(o.str());
    };
    add("run", c.run_id);
    add("repetition", c.repetition);
    add("seed", c.seed);
    add("pcpus", c.platform.pcpu_count);
    for (const auto& pool : c.platform.pools) {
        std::ostringstream pins;
        for (std::size_t i = 0; i < pool.pcpus.size(); ++i) pins << (i ? " " : "") << pool.pcpus[i];
        add("pool." + pool.name, std::string(to_string(pool.policy)) + " " + pins.str());
    }
    for (const auto& vm : c.platform.vms) {
        add("vm." + vm.name + ".role", to_string(vm.role));
        add("vm." + vm.name + ".policy", describe(vm.guest_policy));
        for (const auto& v : vm.vcpus) {
            std::ostringstream o;
            o << v.params.budget.count() << '/' << v.params.period.count() << (v.params.extratime ? " extra" : "")
              << " pin";
            for (auto p : v.affinity) o << ' ' << p;
            add("vcpu." + v.id, o.str());
        }
    }
    const auto& a = c.app;
    add("app.n", a.n);
    add("app.period_ns", a.period.count());
    add("app.first_release_ns", a.first_release.count());
    add("app.cycle_offset_ns", a.cycle_offset.count());
    add("app.release_jitter_ns", a.release_jitter.count());
    add("app.produce_cost_ns", a.produce_cost.count());
    add("app.voter_cost_ns", a.voter_cost.count());
    add("app.cost_jitter", a.cost_jitter);
    add("app.ack_cost_ns", a.ack_cost.count());
    add("app.p_mismatch", a.p_mismatch);
    add("app.critical_policy", a.critical_policy ? describe(*a.critical_policy) : std::string("vm-default"));
    add("app.stress_start_spread_ns", a.stress_start_spread.count());
    add("app.drain_ns", a.drain.count());
    add("channel.backend_cost_ns", c.channel.backend_cost.count());
    add("channel.wire_delay_ns", c.channel.wire_delay.count());
    add("contention.enabled", c.machine.contention.enabled);
    add("contention.kappa", c.machine.contention.kappa);
    add("machine.extratime_slice_ns", c.machine.extratime_slice.count());
    add("machine.rr_timeslice_ns", c.machine.rr_timeslice.count());
    return out;
}

/// Lines present in exactly one of the two descriptions.
inline std::vector<std::string> diff(const CellSpec& a, const CellSpec& b) {
    auto da = describe(a), db = describe(b);
    std::sort(da.begin(), da.end());
    std::sort(db.begin(), db.end());
    std::vector<std::string> out;
    std::set_symmetric_difference(da.begin(), da.end(), db.begin(), db.end(), std::back_inserter(out));
    return out;
}

struct CellResult {
    CellSpec cell;
    app::CampaignResult result;
};

struct CampaignData {
    DesignPlan plan;
    std::vector<CellResult> cells;  // ordered by (run, repetition, arm)
};

inline CellResult run_cell(const CellSpec& cell, EventTrace* trace = nullptr) {
    return {cell, app::run_2oo2(cell.platform, cell.app, cell.channel, cell.machine, cell.seed, trace)};
}

/// Optional per-cell trace destination; a null stream disables tracing.
using TraceSink = std::function<std::unique_ptr<std::ostream>(const CellSpec&)>;

/// Runs every (run, repetition, arm) cell, possibly on several threads.
/// Each cell owns its simulation; results land in a fixed slot, so the
/// outcome does not depend on the thread count.
inline CampaignData run_campaign(const ExperimentConfig& cfg, const TraceSink& trace_sink = {}) {
    cfg.validate();
    CampaignData data{full_factorial(cfg.factors), {}};
    std::vector<CellSpec> specs;
    for (std::size_t r = 0; r < data.plan.runs.size(); ++r)
        for (std::uint32_t rep = 0; rep < cfg.repetitions; ++rep)
            for (Arm arm : {Arm::Without, Arm::With}) specs.push_back(build_cell(cfg, data.plan, r, arm, rep));

    std::vector<std::optional<CellResult>> slots(specs.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto worker = [&] {
        for (std::size_t i = next++; i < specs.size(); i = next++) {
            try {
                std::unique_ptr<std::ostream> out;
                if (trace_sink) out = trace_sink(specs[i]);
                if (out) {
                    EventTrace trace(out.get());
                    slots[i] = run_cell(specs[i], &trace);
                } else {
                    slots[i] = run_cell(specs[i]);
                }
            } catch (...) {
                std::lock_guard lock(failure_mu);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    unsigned n = cfg.threads != 0 ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    n = std::min<unsigned>(n, static_cast<unsigned>(specs.size()));
    if (n <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    for (auto& s : slots) data.cells.push_back(std::move(*s));
    return data;
}

}  // namespace rsaas::doe
