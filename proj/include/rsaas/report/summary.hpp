#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "rsaas/report/samples.hpp"
#include "rsaas/stats/ttest.hpp"

namespace rsaas::report {

enum class Role { Replicas, Voter };

constexpr std::string_view to_string(Role r) { return r == Role::Replicas ? "Replicas" : "Voter"; }

struct SummaryRow {
    std::string config_id;
    Role vm = Role::Replicas;
    std::size_t n_without = 0;
    std::size_t n_with = 0;
    double base_avg_us = 0.0;
    double base_sd_us = 0.0;
    double avg_incr_pct = 0.0;
    double sd_incr_pct = 0.0;
    double p_value = 1.0;
    bool significant = false;
    std::optional<bool> response_check;  // voter rows only
};

struct Summary {
    std::vector<SummaryRow> rows;
    stats::TTestVariant variant = stats::TTestVariant::Welch;
    double alpha = 0.05;
    app::ResponseBand band;
    std::vector<std::string> warnings;
};

/// One row per (config, role) in order of first appearance; both
/// replicas' samples are pooled into the Replicas row.
inline Summary summarize(const std::vector<RawSample>& samples, stats::TTestVariant variant, double alpha = 0.05,
                         app::ResponseBand band = {}) {
    Summary sum{{}, variant, alpha, band, {}};
    std::vector<std::string> order;
    std::map<std::string, std::array<std::array<std::vector<double>, 2>, 2>> groups;  // [role][arm]
    for (const auto& s : samples) {
        auto [it, fresh] = groups.try_emplace(s.config_id);
        if (fresh) order.push_back(s.config_id);
        const auto role = s.kind == app::SampleKind::ReplicaRoundTrip ? Role::Replicas : Role::Voter;
        it->second[static_cast<int>(role)][s.arm == doe::Arm::With].push_back(s.latency_us);
    }
    for (const auto& id : order) {
        const auto& g = groups.at(id);
        for (Role role : {Role::Replicas, Role::Voter}) {
            const auto& base = g[static_cast<int>(role)][0];
            const auto& with = g[static_cast<int>(role)][1];
            if (base.empty() && with.empty()) continue;
            if (base.empty() || with.empty())
                throw Error(Errc::MissingArm, "config '" + id + "' has no '" +
                                                  std::string(base.empty() ? "without" : "with") + "' samples for " +
                                                  std::string(to_string(role)));
            SummaryRow r;
            r.config_id = id;
            r.vm = role;
            r.n_without = base.size();
            r.n_with = with.size();
            r.base_avg_us = stats::mean(base);
            r.base_sd_us = stats::sample_sd(base);
            r.avg_incr_pct = stats::pct_increase(r.base_avg_us, stats::mean(with));
            r.sd_incr_pct = stats::pct_increase(r.base_sd_us, stats::sample_sd(with));
            const auto t = stats::t_test(base, with, variant, alpha);
            r.p_value = t.p;
            r.significant = t.significant;
            if (role == Role::Voter) {
                std::vector<Duration> lat;
                for (const auto* arm : {&base, &with})
                    for (double us : *arm) lat.push_back(Duration{static_cast<std::int64_t>(std::llround(us * 1000))});
                const auto check = app::check_response_requirement(lat, band);
                r.response_check = check.pass;
                if (!check.warning.empty()) sum.warnings.push_back(id + ": " + check.warning);
            }
            sum.rows.push_back(std::move(r));
        }
    }
    return sum;
}

namespace detail {

inline std::string fixed2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string sci(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2E", v);
    return buf;
}

inline std::vector<std::string> cells(const SummaryRow& r) {
    return {r.config_id,
            std::string(to_string(r.vm)),
            fixed2(r.base_avg_us),
            fixed2(r.base_sd_us),
            fixed2(r.avg_incr_pct),
            fixed2(r.sd_incr_pct),
            sci(r.p_value),
            r.significant ? "yes" : "no",
            r.response_check ? (*r.response_check ? "pass" : "fail") : "n/a"};
}

inline const std::vector<std::string>& headers() {
    static const std::vector<std::string> h{"config_id",   "vm",      "base_avg_us", "base_sd_us",    "avg_incr_pct",
                                            "sd_incr_pct", "p_value", "significant", "response_check"};
    return h;
}

}  // namespace detail

inline std::string footer(const Summary& s) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "t-test: %s, two-tailed, alpha=%g; response band [%g ms, %g ms], pass iff <= %g ms",
                  std::string(stats::to_string(s.variant)).c_str(), s.alpha, us_of(s.band.lower) / 1000.0,
                  us_of(s.band.upper) / 1000.0, us_of(s.band.upper) / 1000.0);
    return buf;
}

inline void write_csv(std::ostream& out, const Summary& s) {
    const auto& h = detail::headers();
    for (std::size_t i = 0; i < h.size(); ++i) out << (i ? "," : "") << h[i];
    out << '\n';
    for (const auto& r : s.rows) {
        const auto c = detail::cells(r);
        for (std::size_t i = 0; i < c.size(); ++i) out << (i ? "," : "") << c[i];
        out << '\n';
    }
}

/// Aligned table with the same values as the CSV, plus the footer.
inline void write_text(std::ostream& out, const Summary& s) {
    std::vector<std::vector<std::string>> table{detail::headers()};
    for (const auto& r : s.rows) table.push_back(detail::cells(r));
    std::vector<std::size_t> w(table.front().size(), 0);
    for (const auto& row : table)
        for (std::size_t i = 0; i < row.size(); ++i) w[i] = std::max(w[i], row[i].size());
    for (const auto& row : table) {
        std::string line;
        for (std::size_t i = 0; i < row.size(); ++i) {
            const bool left = i < 2;
            const std::string pad(w[i] - row[i].size(), ' ');
            line += (i ? "  " : "") + (left ? row[i] + pad : pad + row[i]);
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
        out << line << '\n';
    }
    out << footer(s) << '\n';
    for (const auto& wmsg : s.warnings) out << "warning: " << wmsg << '\n';
}

}  // namespace rsaas::report
