#include <gtest/gtest.h>

#include <sstream>

#include "rsaas/sim/contention.hpp"
#include "rsaas/sim/engine.hpp"

using namespace rsaas;

TEST(Engine, SameTimeKeepsInsertionOrder) {
    Engine e;
    std::string order;
    e.schedule(at_us(100), EventKind::TimerFire, 0, 0, [&] { order += 'A'; });
    e.schedule(at_us(100), EventKind::TimerFire, 0, 0, [&] { order += 'B'; });
    EXPECT_EQ(e.run_until(at_us(1000)), 2u);
    EXPECT_EQ(order, "AB");
}

TEST(Engine, TimeOrder) {
    Engine e;
    std::string order;
    e.schedule(at_us(50), EventKind::TimerFire, 0, 0, [&] { order += '5'; });
    e.schedule(at_us(30), EventKind::TimerFire, 0, 0, [&] { order += '3'; });
    e.run_until(at_us(100));
    EXPECT_EQ(order, "35");
}

TEST(Engine, PastEventRejected) {
    Engine e;
    e.run_until(at_us(10));
    try {
        e.schedule(at_us(5), EventKind::TimerFire);
        FAIL();
    } catch (const Error& err) {
        EXPECT_EQ(err.code(), Errc::PastEvent);
    }
}

TEST(Engine, EmptyRunAdvancesClock) {
    Engine e;
    EXPECT_EQ(e.run_until(SimTime{Duration{1'000'000'000}}), 0u);
    EXPECT_EQ(ns_of(e.now()), 1'000'000'000);
}

TEST(Engine, SingleEvent) {
    Engine e;
    e.schedule(SimTime{Duration{500'000'000}}, EventKind::SampleDue);
    EXPECT_EQ(e.run_until(SimTime{Duration{1'000'000'000}}), 1u);
}

TEST(Engine, ChainedSchedulingAtSameInstant) {
    Engine e;
    int n = 0;
    std::function<void()> again = [&] {
        if (++n < 5) e.schedule(e.now(), EventKind::TimerFire, 0, 0, again);
    };
    e.schedule(at_us(7), EventKind::TimerFire, 0, 0, again);
    e.run_until(at_us(7));
    EXPECT_EQ(n, 5);
}

TEST(Engine, TraceDigestDeterministic) {
    auto run = [] {
        std::ostringstream out;
        EventTrace trace(&out);
        Engine e;
        e.set_trace(&trace);
        RngStream rng(42, "trace");
        for (int i = 0; i < 200; ++i) e.schedule(at_us(static_cast<std::int64_t>(rng.below(1000))), EventKind::TaskReady, i);
        e.run_until(at_us(2000));
        return std::make_pair(trace.digest(), out.str());
    };
    const auto a = run();
    const auto b = run();
    EXPECT_EQ(a.first, b.first);
    EXPECT_EQ(a.second, b.second);
    EXPECT_NE(a.second.find(",TaskReady,"), std::string::npos);
}

TEST(Rng, StreamsReproducibleAndIndependent) {
    RngStream a(7, "replica1"), b(7, "replica1"), c(7, "replica2");
    for (int i = 0; i < 10; ++i) {
        const auto x = a.next();
        EXPECT_EQ(x, b.next());
        EXPECT_NE(x, c.next());
    }
    EXPECT_EQ(RngStream(7, "replica1").at(3), RngStream(7, "replica1").at(3));
    EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
}

TEST(Rng, UniformRange) {
    RngStream r(1, "u");
    for (int i = 0; i < 10000; ++i) {
        const double u = r.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        ASSERT_LT(r.below(7), 7u);
    }
}

TEST(Contention, Rate) {
    ContentionModel off;
    EXPECT_DOUBLE_EQ(off.effective_rate(3), 1.0);
    ContentionModel on{true, 0.1};
    EXPECT_NEAR(on.effective_rate(2), 1.0 / 1.2, 1e-12);
    EXPECT_DOUBLE_EQ(on.effective_rate(0), 1.0);
    EXPECT_THROW((ContentionModel{true, -1.0}.validate()), Error);
}
