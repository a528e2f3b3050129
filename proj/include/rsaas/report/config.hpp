#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "rsaas/doe/experiment.hpp"
#include "rsaas/stats/ttest.hpp"

namespace rsaas::report {

/// Where and how results are written and analysed.
struct OutputOptions {
    std::string dir = "out";
    bool merged = false;
    stats::TTestVariant test = stats::TTestVariant::Welch;
    double alpha = 0.05;
    app::ResponseBand band;
};

struct CampaignFile {
    doe::ExperimentConfig experiment;
    OutputOptions output;
};

namespace detail {

inline std::string where(const YAML::Node& n) {
    const auto m = n.Mark();
    if (m.is_null()) return "";
    return "line " + std::to_string(m.line + 1) + ", column " + std::to_string(m.column + 1) + ": ";
}

[[noreturn]] inline void fail(const YAML::Node& n, const std::string& msg) {
    throw Error(Errc::ConfigParse, where(n) + msg);
}

inline void require_map(const YAML::Node& n, const std::string& what) {
    if (!n.IsMap()) fail(n, "'" + what + "' must be a mapping");
}

inline void only_keys(const YAML::Node& n, const std::string& section, std::initializer_list<const char*> keys) {
    require_map(n, section);
    const std::set<std::string> known(keys.begin(), keys.end());
    for (const auto& kv : n) {
        const auto k = kv.first.as<std::string>();
        if (!known.contains(k)) fail(kv.first, "unknown key '" + k + "' in '" + section + "'");
    }
}

template <class T>
T scalar(const YAML::Node& n, const std::string& key) {
    if (!n.IsScalar()) fail(n, "'" + key + "' must be a scalar");
    try {
        return n.as<T>();
    } catch (const YAML::Exception&) {
        fail(n, "bad value '" + n.Scalar() + "' for '" + key + "'");
    }
}

template <class T>
void read(const YAML::Node& sec, const char* key, T& out) {
    if (const auto n = sec[key]) out = scalar<T>(n, key);
}

inline void read_us(const YAML::Node& sec, const char* key, Duration& out) {
    if (const auto n = sec[key]) {
        const double us = scalar<double>(n, key);
        if (!(us >= 0.0)) fail(n, "'" + std::string(key) + "' must be >= 0");
        out = Duration{static_cast<std::int64_t>(std::llround(us * 1000.0))};
    }
}

inline SchedPolicy sched_policy(const YAML::Node& n) {
    const auto s = doe::upper(scalar<std::string>(n, "policy"));
    if (s == "EDF") return SchedPolicy::EDF;
    if (s == "RM") return SchedPolicy::RM;
    fail(n, "policy must be EDF or RM");
}

inline VmRole vm_role(const YAML::Node& n) {
    const auto s = scalar<std::string>(n, "role");
    if (s == "privileged") return VmRole::Privileged;
    if (s == "replica") return VmRole::Replica;
    if (s == "voter") return VmRole::Voter;
    if (s == "stress") return VmRole::Stress;
    fail(n, "role must be privileged, replica, voter or stress");
}

inline GuestPolicy guest_policy(const YAML::Node& n) {
    only_keys(n, "policy", {"kind", "priority", "runtime_us", "deadline_us", "period_us"});
    GuestPolicy p;
    if (const auto k = n["kind"]) {
        const auto s = doe::upper(scalar<std::string>(k, "kind"));
        if (s == "FIFO") p.kind = GuestPolicyKind::Fifo;
        else if (s == "RR") p.kind = GuestPolicyKind::RoundRobin;
        else if (s == "DEADLINE") p.kind = GuestPolicyKind::Deadline;
        else fail(k, "kind must be FIFO, RR or DEADLINE");
    }
    read(n, "priority", p.priority);
    read_us(n, "runtime_us", p.runtime);
    read_us(n, "deadline_us", p.deadline);
    read_us(n, "period_us", p.period);
    if (!p.valid()) fail(n, "invalid guest policy");
    return p;
}

inline std::vector<std::uint32_t> pcpu_list(const YAML::Node& n, const std::string& key) {
    if (!n.IsSequence()) fail(n, "'" + key + "' must be a list of pCPU numbers");
    std::vector<std::uint32_t> out;
    for (const auto& e : n) out.push_back(scalar<std::uint32_t>(e, key));
    return out;
}

struct RtdsDefaults {
    RtdsParams params{from_us(4000), from_us(10000), false};
    SchedPolicy policy = SchedPolicy::EDF;
};

inline PlatformSpec platform(const YAML::Node& n, const RtdsDefaults& rd) {
    only_keys(n, "platform", {"preset", "pcpus", "pools", "vms"});
    if (const auto preset = n["preset"]) {
        if (n["pcpus"] || n["pools"] || n["vms"]) fail(preset, "'preset' excludes pcpus/pools/vms");
        if (scalar<std::string>(preset, "preset") != "paper_poc") fail(preset, "unknown preset (known: paper_poc)");
        PocDefaults d;
        d.budget = rd.params.budget;
        d.period = rd.params.period;
        d.critical_extratime = rd.params.extratime;
        d.pool_policy = rd.policy;
        return paper_poc_platform(d);
    }
    PlatformSpec spec;
    if (!n["pcpus"]) fail(n, "platform needs 'pcpus' or a 'preset'");
    spec.pcpu_count = scalar<std::uint32_t>(n["pcpus"], "pcpus");
    if (const auto pools = n["pools"]) {
        if (!pools.IsSequence()) fail(pools, "'pools' must be a list");
        for (const auto& p : pools) {
            only_keys(p, "pools[]", {"name", "pcpus", "policy"});
            CpuPool pool{"pool" + std::to_string(spec.pools.size()), {}, rd.policy};
            read(p, "name", pool.name);
            if (!p["pcpus"]) fail(p, "pool needs 'pcpus'");
            for (auto c : pcpu_list(p["pcpus"], "pcpus")) pool.pcpus.push_back(c);
            if (const auto pol = p["policy"]) pool.policy = sched_policy(pol);
            spec.pools.push_back(std::move(pool));
        }
    } else {
        CpuPool pool{"pool0", {}, rd.policy};
        for (std::uint32_t c = 0; c < spec.pcpu_count; ++c) pool.pcpus.push_back(c);
        spec.pools.push_back(std::move(pool));
    }
    const auto vms = n["vms"];
    if (!vms || !vms.IsSequence()) fail(n, "platform needs a 'vms' list");
    for (const auto& v : vms) {
        only_keys(v, "vms[]", {"name", "role", "policy", "pool", "vcpus"});
        VmSpec vm;
        if (!v["name"] || !v["role"] || !v["vcpus"]) fail(v, "vm needs 'name', 'role' and 'vcpus'");
        vm.name = scalar<std::string>(v["name"], "name");
        vm.role = vm_role(v["role"]);
        vm.guest_policy = v["policy"] ? guest_policy(v["policy"]) : GuestPolicy::fifo(80);
        read(v, "pool", vm.pool);
        if (!v["vcpus"].IsSequence()) fail(v["vcpus"], "'vcpus' must be a list");
        for (const auto& c : v["vcpus"]) {
            only_keys(c, "vcpus[]", {"id", "budget_us", "period_us", "extratime", "affinity"});
            VCpuSpec vc{vm.name + "." + std::to_string(vm.vcpus.size()), rd.params, {}};
            read(c, "id", vc.id);
            read_us(c, "budget_us", vc.params.budget);
            read_us(c, "period_us", vc.params.period);
            read(c, "extratime", vc.params.extratime);
            if (!c["affinity"]) fail(c, "vCPU needs 'affinity'");
            for (auto p : pcpu_list(c["affinity"], "affinity")) vc.affinity.push_back(p);
            vm.vcpus.push_back(std::move(vc));
        }
        spec.vms.push_back(std::move(vm));
    }
    return spec;
}

inline std::vector<doe::Factor> factors(const YAML::Node& n) {
    if (!n.IsSequence()) fail(n, "'factors' must be a list");
    std::vector<doe::Factor> out;
    for (const auto& f : n) {
        only_keys(f, "factors[]", {"name", "levels"});
        if (!f["name"] || !f["levels"]) fail(f, "factor needs 'name' and 'levels'");
        doe::Factor factor{scalar<std::string>(f["name"], "name"), {}};
        if (!f["levels"].IsSequence()) fail(f["levels"], "'levels' must be a list");
        for (const auto& l : f["levels"]) factor.levels.push_back(scalar<std::string>(l, "levels"));
        out.push_back(std::move(factor));
    }
    return out;
}

}  // namespace detail

/// Parses a campaign file. Every section is optional; missing keys keep
/// their defaults. Unknown keys are errors.
inline CampaignFile parse_config(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw Error(Errc::ConfigParse,
                    "line " + std::to_string(e.mark.line + 1) + ", column " + std::to_string(e.mark.column + 1) +
                        ": " + e.msg);
    }
    CampaignFile cf;
    auto& x = cf.experiment;
    if (root.IsNull()) return cf;
    detail::only_keys(root, "top level",
                      {"platform", "rtds", "stress", "channel", "contention", "app", "guest", "factors", "campaign",
                       "output"});
    using namespace detail;

    RtdsDefaults rd;
    if (const auto n = root["rtds"]) {
        only_keys(n, "rtds", {"budget_us", "period_us", "extratime", "policy", "extratime_slice_us"});
        read_us(n, "budget_us", rd.params.budget);
        read_us(n, "period_us", rd.params.period);
        read(n, "extratime", rd.params.extratime);
        if (const auto p = n["policy"]) rd.policy = sched_policy(p);
        read_us(n, "extratime_slice_us", x.extratime_slice);
    }
    x.platform = root["platform"] ? platform(root["platform"], rd) : [&] {
        PocDefaults d;
        d.budget = rd.params.budget;
        d.period = rd.params.period;
        d.critical_extratime = rd.params.extratime;
        d.pool_policy = rd.policy;
        return paper_poc_platform(d);
    }();

    if (const auto n = root["stress"]) {
        only_keys(n, "stress", {"budget_us", "period_us", "extratime", "policy"});
        read_us(n, "budget_us", x.stress.params.budget);
        read_us(n, "period_us", x.stress.params.period);
        read(n, "extratime", x.stress.params.extratime);
        if (const auto p = n["policy"]) x.stress.policy = guest_policy(p);
    }
    if (const auto n = root["channel"]) {
        only_keys(n, "channel", {"backend_cost_us", "wire_delay_us"});
        read_us(n, "backend_cost_us", x.channel.backend_cost);
        read_us(n, "wire_delay_us", x.channel.wire_delay);
    }
    if (const auto n = root["contention"]) {
        only_keys(n, "contention", {"enabled", "kappa"});
        read(n, "enabled", x.contention.enabled);
        read(n, "kappa", x.contention.kappa);
    }
    if (const auto n = root["app"]) {
        only_keys(n, "app",
                  {"n", "period_us", "first_release_us", "cycle_offset_us", "release_jitter_us", "produce_cost_us",
                   "voter_cost_us", "cost_jitter", "ack_cost_us", "p_mismatch", "stress_start_spread_us",
                   "drain_us"});
        auto& a = x.app;
        read(n, "n", a.n);
        read_us(n, "period_us", a.period);
        read_us(n, "first_release_us", a.first_release);
        read_us(n, "cycle_offset_us", a.cycle_offset);
        read_us(n, "release_jitter_us", a.release_jitter);
        read_us(n, "produce_cost_us", a.produce_cost);
        read_us(n, "voter_cost_us", a.voter_cost);
        read(n, "cost_jitter", a.cost_jitter);
        read_us(n, "ack_cost_us", a.ack_cost);
        read(n, "p_mismatch", a.p_mismatch);
        read_us(n, "stress_start_spread_us", a.stress_start_spread);
        read_us(n, "drain_us", a.drain);
    }
    if (const auto n = root["guest"]) {
        only_keys(n, "guest", {"priority", "rr_timeslice_us", "dl_runtime_us", "dl_deadline_us", "dl_period_us"});
        read(n, "priority", x.guest.priority);
        read_us(n, "rr_timeslice_us", x.rr_timeslice);
        read_us(n, "dl_runtime_us", x.guest.dl_runtime);
        read_us(n, "dl_deadline_us", x.guest.dl_deadline);
        read_us(n, "dl_period_us", x.guest.dl_period);
    }
    if (const auto n = root["factors"]) x.factors = factors(n);
    if (const auto n = root["campaign"]) {
        only_keys(n, "campaign", {"seed", "repetitions", "threads"});
        read(n, "seed", x.seed);
        read(n, "repetitions", x.repetitions);
        read(n, "threads", x.threads);
    }
    if (const auto n = root["output"]) {
        only_keys(n, "output", {"dir", "merged", "test", "alpha", "response_band_ms"});
        auto& o = cf.output;
        read(n, "dir", o.dir);
        read(n, "merged", o.merged);
        if (const auto t = n["test"]) {
            const auto s = scalar<std::string>(t, "test");
            if (s == "welch") o.test = stats::TTestVariant::Welch;
            else if (s == "pooled") o.test = stats::TTestVariant::Pooled;
            else fail(t, "test must be welch or pooled");
        }
        read(n, "alpha", o.alpha);
        if (!(o.alpha > 0.0 && o.alpha < 1.0)) fail(n["alpha"], "alpha must be in (0, 1)");
        if (const auto b = n["response_band_ms"]) {
            if (!b.IsSequence() || b.size() != 2) fail(b, "response_band_ms must be [lower, upper]");
            o.band.lower = from_us(static_cast<std::int64_t>(scalar<double>(b[0], "response_band_ms") * 1000));
            o.band.upper = from_us(static_cast<std::int64_t>(scalar<double>(b[1], "response_band_ms") * 1000));
            if (o.band.upper < o.band.lower) fail(b, "response band upper bound below lower bound");
        }
    }
    try {
        x.validate();
    } catch (const Error& e) {
        throw Error(Errc::ConfigParse, e.what());
    }
    return cf;
}

inline CampaignFile load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::ConfigParse, "cannot open config '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config(ss.str());
    } catch (const Error& e) {
        if (e.code() != Errc::ConfigParse) throw;
        const std::string msg = e.what();
        throw Error(Errc::ConfigParse, path.string() + ": " + msg.substr(msg.find(": ") + 2));
    }
}

}  // namespace rsaas::report
