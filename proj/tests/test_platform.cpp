#include <gtest/gtest.h>

#include "rsaas/platform.hpp"

using namespace rsaas;

namespace {

bool has(const std::vector<PlatformIssue>& issues, PlatformIssueKind k) {
    for (const auto& i : issues)
        if (i.kind == k) return true;
    return false;
}

}  // namespace

TEST(Platform, PocLayoutIsValid) {
    const auto spec = paper_poc_platform();
    EXPECT_TRUE(validate_platform(spec).empty());
    EXPECT_EQ(spec.pcpu_count, 8u);
    EXPECT_EQ(spec.vms.size(), 4u);
    std::size_t vcpus = 0;
    for (const auto& vm : spec.vms) {
        for (const auto& v : vm.vcpus) {
            EXPECT_EQ(v.affinity.size(), 1u);
            EXPECT_EQ(v.params.budget, from_us(4000));
            EXPECT_EQ(v.params.period, from_us(10000));
        }
        vcpus += vm.vcpus.size();
    }
    EXPECT_EQ(vcpus, 6u);
    EXPECT_EQ(spec.find_vm("pvm")->vcpus[1].affinity, std::vector<PCpuId>{1});
    EXPECT_EQ(spec.find_vm("voter")->vcpus[1].affinity, std::vector<PCpuId>{3});
    EXPECT_EQ(spec.find_vm("replica2")->vcpus[0].affinity, std::vector<PCpuId>{5});
    EXPECT_EQ(free_pcpus(spec), (std::vector<PCpuId>{6, 7}));
}

TEST(Platform, Utilization) {
    const auto u = pcpu_utilization(paper_poc_platform());
    for (PCpuId p = 0; p < 6; ++p) EXPECT_DOUBLE_EQ(u[p], 0.4);
    EXPECT_DOUBLE_EQ(u[6], 0.0);
    EXPECT_DOUBLE_EQ(u[7], 0.0);
}

TEST(Platform, BudgetExceedsPeriod) {
    auto spec = paper_poc_platform();
    spec.vms[1].vcpus[0].params.budget = from_us(12000);
    EXPECT_TRUE(has(validate_platform(spec), PlatformIssueKind::BudgetExceedsPeriod));
    EXPECT_THROW(require_valid(spec), Error);
}

TEST(Platform, AffinityOutOfRange) {
    auto spec = paper_poc_platform();
    spec.vms[2].vcpus[0].affinity = {9};
    EXPECT_TRUE(has(validate_platform(spec), PlatformIssueKind::EmptyAffinity));
}

TEST(Platform, DuplicatesAndOverlap) {
    auto spec = paper_poc_platform();
    spec.vms[3].name = "replica1";
    spec.vms[3].vcpus[0].id = "replica1.0";
    spec.pools.push_back({"pool1", {7}, SchedPolicy::RM});
    const auto issues = validate_platform(spec);
    EXPECT_TRUE(has(issues, PlatformIssueKind::DuplicateId));
    EXPECT_TRUE(has(issues, PlatformIssueKind::PoolOverlap));
}

TEST(Platform, EveryViolationReported) {
    auto spec = paper_poc_platform();
    spec.vms[1].vcpus[0].params.budget = from_us(12000);
    spec.vms[2].vcpus[0].affinity = {9};
    EXPECT_GE(validate_platform(spec).size(), 2u);
}

TEST(Platform, ValidationIdempotent) {
    const auto spec = paper_poc_platform();
    const auto& once = require_valid(spec);
    EXPECT_EQ(require_valid(once), spec);
}
