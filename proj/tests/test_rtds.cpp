#include <gtest/gtest.h>

#include "instances.hpp"
#include "rsaas/rtds/scheduler.hpp"
#include "rtds_driver.hpp"
#include "tick_rtds.hpp"

using namespace rsaas;
using namespace rsaas::rtds;

namespace {

RtdsParams us(std::int64_t b, std::int64_t p, bool extra = false) { return {from_us(b), from_us(p), extra}; }

struct Host {
    RtdsScheduler s;
    PoolId pool;
    explicit Host(std::vector<PCpuId> pcpus, SchedPolicy pol = SchedPolicy::EDF) : pool(s.add_pool(pol, pcpus)) {}
};

}  // namespace

TEST(Rtds, WakeOnIdleRunsImmediately) {
    Host h({0});
    const auto v = h.s.add_vcpu("v", h.pool, us(4000, 10000), {0});
    h.s.wake(v, at_us(0));
    h.s.reschedule(at_us(0));
    EXPECT_EQ(h.s.running_on(0), v);
    EXPECT_EQ(h.s.vcpu(v).status(), VCpuStatus::Running);
}

TEST(Rtds, EdfEarlierDeadlinePreempts) {
    Host h({0});
    const auto u = h.s.add_vcpu("u", h.pool, us(5000, 15000), {0});
    const auto v = h.s.add_vcpu("v", h.pool, us(2000, 8000), {0});
    h.s.wake(u, at_us(0));
    h.s.reschedule(at_us(0));
    h.s.advance(at_us(0));
    h.s.wake(v, at_us(0));
    const auto sw = h.s.reschedule(at_us(0));
    ASSERT_EQ(sw.size(), 1u);
    EXPECT_EQ(sw[0].from, u);
    EXPECT_EQ(sw[0].to, v);
}

TEST(Rtds, StaleWakeGetsFreshBudget) {
    Host h({0});
    const auto v = h.s.add_vcpu("v", h.pool, us(4000, 10000), {0});
    h.s.wake(v, at_us(0));
    h.s.reschedule(at_us(0));
    h.s.advance(at_us(1000));
    h.s.block(v, at_us(1000));
    h.s.reschedule(at_us(1000));
    h.s.wake(v, at_us(25000));
    EXPECT_EQ(h.s.vcpu(v).budget_left, from_us(4000));
    EXPECT_EQ(h.s.vcpu(v).cur_deadline, at_us(35000));
}

TEST(Rtds, BudgetConsumedInTwoSlices) {
    Host h({0});
    const auto v = h.s.add_vcpu("v", h.pool, us(4000, 10000), {0});
    h.s.wake(v, at_us(0));
    h.s.consume_budget(v, from_us(2000));
    EXPECT_EQ(h.s.vcpu(v).status(), VCpuStatus::Runnable);
    h.s.consume_budget(v, from_us(2000));
    EXPECT_EQ(h.s.vcpu(v).status(), VCpuStatus::Depleted);
    EXPECT_EQ(h.s.pool(h.pool).depleted, std::vector<VCpuId>{v});
}

TEST(Rtds, ExtratimeUsesSpareCapacityOnly) {
    Host h({0});
    const auto x = h.s.add_vcpu("x", h.pool, us(1000, 10000, true), {0});
    h.s.wake(x, at_us(0));
    h.s.reschedule(at_us(0));
    h.s.advance(at_us(1000));
    h.s.reschedule(at_us(1000));
    EXPECT_EQ(h.s.running_on(0), x);
    EXPECT_EQ(h.s.running_class(0), ExecClass::Extra);

    const auto b = h.s.add_vcpu("b", h.pool, us(1000, 10000), {0});
    h.s.wake(b, at_us(1000));
    h.s.reschedule(at_us(1000));
    EXPECT_EQ(h.s.running_on(0), b);
}

TEST(Rtds, DepletedNonExtratimeNeverRuns) {
    Host h({0});
    const auto v = h.s.add_vcpu("v", h.pool, us(4000, 10000), {0});
    h.s.wake(v, at_us(0));
    h.s.reschedule(at_us(0));
    h.s.advance(at_us(4000));
    h.s.reschedule(at_us(4000));
    EXPECT_FALSE(h.s.running_on(0));
    EXPECT_TRUE(h.s.check_invariants().empty());
}

TEST(Rtds, Replenish) {
    Host h({0});
    const auto v = h.s.add_vcpu("v", h.pool, us(4000, 10000), {0});
    h.s.wake(v, at_us(0));
    h.s.reschedule(at_us(0));
    h.s.advance(at_us(4000));
    EXPECT_TRUE(h.s.replenish(v, at_us(10000)));
    EXPECT_EQ(h.s.vcpu(v).budget_left, from_us(4000));
    EXPECT_EQ(h.s.vcpu(v).cur_deadline, at_us(20000));
    EXPECT_EQ(h.s.pool(h.pool).runqueue, std::vector<VCpuId>{v});
    EXPECT_FALSE(h.s.replenish(v, at_us(10000)));
}

TEST(Rtds, BlockedReplenishStaysBlocked) {
    Host h({0});
    const auto v = h.s.add_vcpu("v", h.pool, us(4000, 10000), {0});
    h.s.wake(v, at_us(0));
    h.s.block(v, at_us(0));
    EXPECT_TRUE(h.s.replenish(v, at_us(10000)));
    EXPECT_EQ(h.s.vcpu(v).status(), VCpuStatus::Blocked);
    EXPECT_TRUE(h.s.pool(h.pool).runqueue.empty());
}

TEST(Rtds, FullUtilizationNeverDepletes) {
    oracle::TickInstance in;
    in.vcpus = {{10000, 10000, false, {0}}};
    in.script = {{0, 0, true}};
    in.horizon_us = 50000;
    oracle::RtdsDriver d(in);
    d.run(at_us(50000));
    Duration busy{0};
    for (const auto& s : d.scheduler().segments()) busy += s.end - s.start;
    EXPECT_EQ(busy, from_us(50000));
}

TEST(Rtds, RmShorterPeriodWins) {
    Host h({0}, SchedPolicy::RM);
    const auto v2 = h.s.add_vcpu("v2", h.pool, us(1000, 20000), {0});
    const auto v1 = h.s.add_vcpu("v1", h.pool, us(1000, 10000), {0});
    h.s.wake(v2, at_us(0));
    h.s.wake(v1, at_us(0));
    EXPECT_EQ(h.s.pick_vcpu(0), v1);
}

TEST(Rtds, EdfTwoVcpuTrace) {
    oracle::TickInstance in;
    in.vcpus = {{3, 10, false, {0}}, {4, 20, false, {0}}};
    in.script = {{0, 0, true}, {0, 1, true}};
    in.horizon_us = 20;
    const auto expect = oracle::run_tick_oracle(in);
    ASSERT_GE(expect.size(), 2u);
    EXPECT_EQ(expect[0], (oracle::TickSegment{0, 0, false, 0, 3}));
    EXPECT_EQ(expect[1], (oracle::TickSegment{0, 1, false, 3, 7}));
    oracle::RtdsDriver d(in);
    d.run(at_us(in.horizon_us));
    EXPECT_EQ(d.segments(), expect);
}

TEST(Rtds, EmptyIsIdle) {
    Host h({0});
    h.s.add_vcpu("v", h.pool, us(1000, 10000), {0});
    EXPECT_FALSE(h.s.pick_vcpu(0));
}

TEST(Rtds, PolicySwitchResorts) {
    Host h({0});
    const auto a = h.s.add_vcpu("a", h.pool, us(1000, 20000), {0});
    const auto b = h.s.add_vcpu("b", h.pool, us(1000, 10000), {0});
    h.s.wake(a, at_us(0));      // deadline 20000
    h.s.wake(b, at_us(14000));  // deadline 24000
    EXPECT_EQ(h.s.pool(h.pool).runqueue, (std::vector<VCpuId>{a, b}));
    h.s.set_policy(h.pool, SchedPolicy::RM);
    EXPECT_EQ(h.s.pool(h.pool).runqueue, (std::vector<VCpuId>{b, a}));
    EXPECT_TRUE(h.s.check_invariants(false).empty());
}

TEST(Rtds, InvalidParamsAndClamp) {
    Host h({0});
    const auto v = h.s.add_vcpu("v", h.pool, us(4000, 10000), {0});
    EXPECT_THROW(h.s.set_params(v, us(12000, 10000)), Error);
    h.s.wake(v, at_us(0));
    h.s.set_params(v, us(1000, 10000));
    EXPECT_EQ(h.s.vcpu(v).budget_left, from_us(1000));
}

TEST(Rtds, UnknownVcpu) {
    Host h({0});
    try {
        h.s.wake(3, at_us(0));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::UnknownVcpu);
    }
}

TEST(Rtds, OracleAgreementSample) {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        const auto in = oracle::random_instance(seed);
        oracle::RtdsDriver d(in);
        d.run(at_us(in.horizon_us));
        ASSERT_EQ(d.segments(), oracle::run_tick_oracle(in)) << "seed " << seed;
        EXPECT_TRUE(d.invariant_failures.empty()) << d.invariant_failures.front();
        EXPECT_TRUE(audit_budget(d.scheduler()).empty());
    }
}

TEST(Rtds, AuditCleanRun) {
    oracle::TickInstance in;
    in.vcpus = {{2000, 10000, false, {0}}};
    in.script = {{0, 0, true}};
    oracle::RtdsDriver d(in);
    d.run(at_us(30000));
    EXPECT_TRUE(audit_budget(d.scheduler()).empty());
}
