#include <gtest/gtest.h>

#include <random>
#include <set>

#include "rsaas/doe/experiment.hpp"

using namespace rsaas;
using namespace rsaas::doe;

namespace {

template <class F>
Errc code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return Errc::InvalidExperiment;
}

std::vector<std::string> ids(const DesignPlan& p) {
    std::vector<std::string> out;
    for (const auto& r : p.runs) out.push_back(r.id);
    return out;
}

ExperimentConfig small_config() {
    ExperimentConfig cfg;
    cfg.app.n = 6;
    cfg.threads = 1;
    return cfg;
}

}  // namespace

TEST(Design, PaperPlan) {
    const auto plan = full_factorial({{"stress", {"Low", "Mid", "High"}}, {"scheduler", {"FIFO"}}});
    EXPECT_EQ(ids(plan), (std::vector<std::string>{"LOW_FIFO", "MID_FIFO", "HIGH_FIFO"}));
    EXPECT_EQ(*plan.runs[1].level("stress"), "Mid");
    EXPECT_EQ(plan.runs[1].level("hv_policy"), nullptr);
}

TEST(Design, TwoByTwoOrder) {
    const auto plan = full_factorial({{"stress", {"LOW", "HIGH"}}, {"scheduler", {"FIFO", "RR"}}});
    EXPECT_EQ(ids(plan), (std::vector<std::string>{"LOW_FIFO", "LOW_RR", "HIGH_FIFO", "HIGH_RR"}));
}

TEST(Design, Errors) {
    EXPECT_EQ(code_of([] { (void)full_factorial({}); }), Errc::EmptyFactorList);
    EXPECT_EQ(code_of([] { (void)full_factorial({{"stress", {}}}); }), Errc::EmptyLevels);
    EXPECT_EQ(code_of([] { (void)full_factorial({{"stress", {"LOW", "low"}}}); }), Errc::DuplicateLevel);
}

TEST(Design, RandomProductProperty) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Factor> fs(1 + rng() % 4);
        std::size_t product = 1;
        for (std::size_t i = 0; i < fs.size(); ++i) {
            fs[i].name = "f" + std::to_string(i);
            const std::size_t k = 1 + rng() % 4;
            for (std::size_t j = 0; j < k; ++j) fs[i].levels.push_back("l" + std::to_string(j));
            product *= k;
        }
        const auto plan = full_factorial(fs);
        ASSERT_EQ(plan.runs.size(), product);
        std::set<std::vector<std::pair<std::string, std::string>>> assignments;
        for (const auto& r : plan.runs) assignments.insert(r.assignment);
        EXPECT_EQ(assignments.size(), product);
    }
}

TEST(Stress, Affinities) {
    const auto spec = paper_poc_platform();
    auto pins = [&](StressLevel l) {
        std::vector<std::vector<PCpuId>> out;
        const auto vm = materialize_stress(l, spec);
        for (const auto& v : vm->vcpus) out.push_back(v.affinity);
        return out;
    };
    using P = std::vector<std::vector<PCpuId>>;
    EXPECT_EQ(pins(StressLevel::Low), (P{{6}}));
    EXPECT_EQ(pins(StressLevel::Mid), (P{{6}, {7}, {0}, {1}}));
    EXPECT_EQ(pins(StressLevel::High), (P{{2}, {3}, {4}, {5}}));
    EXPECT_FALSE(materialize_stress(StressLevel::None, spec));
    const auto vm = *materialize_stress(StressLevel::Mid, spec);
    EXPECT_EQ(vm.role, VmRole::Stress);
    EXPECT_TRUE(vm.vcpus[0].params.extratime);
}

TEST(Stress, IncompatiblePlatform) {
    auto spec = paper_poc_platform();
    spec.vms[2].vcpus[0].affinity = {6};
    EXPECT_EQ(code_of([&] { (void)materialize_stress(StressLevel::Low, spec); }), Errc::IncompatiblePlatform);
}

TEST(Campaign, PairedArmsDifferOnlyByStressVm) {
    const auto cfg = small_config();
    const auto plan = full_factorial(cfg.factors);
    for (std::size_t r = 0; r < plan.runs.size(); ++r) {
        const auto without = build_cell(cfg, plan, r, Arm::Without, 3);
        const auto with = build_cell(cfg, plan, r, Arm::With, 3);
        EXPECT_EQ(without.seed, with.seed);
        const auto d = diff(without, with);
        ASSERT_FALSE(d.empty());
        for (const auto& line : d) {
            const bool stress_line = line.rfind("vm.stress.", 0) == 0 || line.rfind("vcpu.stress.", 0) == 0;
            EXPECT_TRUE(stress_line) << line;
        }
    }
}

TEST(Campaign, SeedsPerRepetition) {
    const auto cfg = small_config();
    const auto plan = full_factorial(cfg.factors);
    std::set<std::uint64_t> seeds;
    for (std::uint32_t rep = 0; rep < 10; ++rep) seeds.insert(build_cell(cfg, plan, 0, Arm::With, rep).seed);
    EXPECT_EQ(seeds.size(), 10u);
    EXPECT_EQ(build_cell(cfg, plan, 0, Arm::With, 4).seed, build_cell(cfg, plan, 2, Arm::Without, 4).seed);
}

TEST(Campaign, CountsPerArm) {
    auto cfg = small_config();
    cfg.app.n = 35;
    cfg.factors = {{"stress", {"LOW"}}, {"scheduler", {"FIFO"}}};
    const auto data = run_campaign(cfg);
    ASSERT_EQ(data.cells.size(), 2u);
    for (const auto& c : data.cells) {
        std::size_t rt = 0, vd = 0;
        for (const auto& s : c.result.samples) (s.kind == app::SampleKind::ReplicaRoundTrip ? rt : vd)++;
        EXPECT_EQ(rt, 70u);
        EXPECT_EQ(vd, 35u);
    }
    EXPECT_EQ(data.cells[0].cell.arm, Arm::Without);
    EXPECT_EQ(data.cells[1].cell.arm, Arm::With);
}

TEST(Campaign, ThreadCountDoesNotMatter) {
    auto cfg = small_config();
    cfg.repetitions = 3;
    const auto one = run_campaign(cfg);
    cfg.threads = 4;
    const auto four = run_campaign(cfg);
    ASSERT_EQ(one.cells.size(), 18u);
    ASSERT_EQ(one.cells.size(), four.cells.size());
    for (std::size_t i = 0; i < one.cells.size(); ++i) {
        const auto &a = one.cells[i].result.samples, &b = four.cells[i].result.samples;
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t j = 0; j < a.size(); ++j) EXPECT_EQ(a[j].latency, b[j].latency);
    }
}

TEST(Campaign, GuestAndHvFactors) {
    auto cfg = small_config();
    cfg.factors = {{"stress", {"MID"}}, {"scheduler", {"FIFO", "RR", "DEADLINE"}}, {"hv_policy", {"EDF", "RM"}}};
    const auto plan = full_factorial(cfg.factors);
    ASSERT_EQ(plan.runs.size(), 6u);
    const auto c = build_cell(cfg, plan, 5, Arm::With, 0);
    EXPECT_EQ(c.run_id, "MID_DEADLINE_RM");
    EXPECT_EQ(c.app.critical_policy->kind, GuestPolicyKind::Deadline);
    EXPECT_EQ(c.platform.pools[0].policy, SchedPolicy::RM);
    const auto data = run_campaign(cfg);
    EXPECT_EQ(data.cells.size(), 12u);
}

TEST(Campaign, Validation) {
    auto cfg = small_config();
    cfg.app.n = 1;
    EXPECT_EQ(code_of([&] { cfg.validate(); }), Errc::InvalidExperiment);
    cfg = small_config();
    cfg.repetitions = 0;
    EXPECT_EQ(code_of([&] { cfg.validate(); }), Errc::InvalidExperiment);
    cfg = small_config();
    cfg.factors = {{"stress", {"EXTREME"}}};
    EXPECT_EQ(code_of([&] { cfg.validate(); }), Errc::InvalidExperiment);
    cfg = small_config();
    cfg.factors = {{"scheduler", {"FIFO"}}};
    EXPECT_EQ(code_of([&] { cfg.validate(); }), Errc::InvalidExperiment);
    cfg = small_config();
    cfg.factors = {{"stress", {"LOW"}}, {"colour", {"red"}}};
    EXPECT_EQ(code_of([&] { cfg.validate(); }), Errc::InvalidExperiment);
}
