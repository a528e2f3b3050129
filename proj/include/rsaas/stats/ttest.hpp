#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string_view>

#include "rsaas/error.hpp"

namespace rsaas::stats {

inline double mean(std::span<const double> s) {
    if (s.empty()) throw Error(Errc::TooFewSamples, "mean of an empty sample");
    double sum = 0.0;
    for (double x : s) sum += x;
    return sum / static_cast<double>(s.size());
}

/// Bessel-corrected (n - 1) standard deviation, two-pass.
inline double sample_variance(std::span<const double> s) {
    if (s.size() < 2) throw Error(Errc::TooFewSamples, "standard deviation needs at least 2 samples");
    const double m = mean(s);
    double ss = 0.0;
    for (double x : s) ss += (x - m) * (x - m);
    return ss / static_cast<double>(s.size() - 1);
}

inline double sample_sd(std::span<const double> s) { return std::sqrt(sample_variance(s)); }

inline double pct_increase(double base, double stressed) {
    if (!(base > 0.0)) throw Error(Errc::NonPositiveBase, "percentage increase needs a positive base");
    return (stressed - base) / base * 100.0;
}

namespace detail {

// Continued fraction of the incomplete beta function, modified Lentz.
inline double beta_cf(double a, double b, double x) {
    constexpr double tiny = 1e-300;
    constexpr double eps = 1e-16;
    double c = 1.0;
    double d = 1.0 - (a + b) * x / (a + 1.0);
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 100000; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) break;
    }
    return h;
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_cf(a, b, x) / a;
    return 1.0 - front * detail::beta_cf(b, a, 1.0 - x) / b;
}

/// P(T > x) for Student's t with `df` degrees of freedom.
inline double student_t_sf(double x, double df) {
    if (!(df > 0.0) || std::isinf(df)) throw Error(Errc::InvalidDf, "degrees of freedom must be finite and > 0");
    if (std::isnan(x)) throw Error(Errc::InvalidDf, "t statistic is NaN");
    if (x == 0.0) return 0.5;
    const double tail = 0.5 * incomplete_beta(0.5 * df, 0.5, df / (df + x * x));
    return x > 0.0 ? tail : 1.0 - tail;
}

enum class TTestVariant { Welch, Pooled };

constexpr std::string_view to_string(TTestVariant v) {
    return v == TTestVariant::Welch ? "Welch (unequal variances)" : "Student (pooled variance)";
}

struct TestResult {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;
    bool significant = false;
    double alpha = 0.05;
    TTestVariant variant = TTestVariant::Welch;
};

/// Two-sample t-test of mean(a) - mean(b), two-tailed.
inline TestResult t_test(std::span<const double> a, std::span<const double> b, TTestVariant variant,
                         double alpha = 0.05) {
    if (a.size() < 2 || b.size() < 2) throw Error(Errc::TooFewSamples, "t-test needs at least 2 samples per group");
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double va = sample_variance(a);
    const double vb = sample_variance(b);
    if (!(va + vb > 0.0)) throw Error(Errc::ZeroVariance, "both samples have zero variance");
    const double diff = mean(a) - mean(b);
    TestResult r;
    r.alpha = alpha;
    r.variant = variant;
    if (variant == TTestVariant::Welch) {
        const double qa = va / na;
        const double qb = vb / nb;
        r.t = diff / std::sqrt(qa + qb);
        r.df = (qa + qb) * (qa + qb) / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    } else {
        r.df = na + nb - 2.0;
        const double sp2 = ((na - 1.0) * va + (nb - 1.0) * vb) / r.df;
        r.t = diff / std::sqrt(sp2 * (1.0 / na + 1.0 / nb));
    }
    r.p = std::min(1.0, 2.0 * student_t_sf(std::fabs(r.t), r.df));
    r.significant = r.p < alpha;
    return r;
}

inline TestResult welch_t_test(std::span<const double> a, std::span<const double> b, double alpha = 0.05) {
    return t_test(a, b, TTestVariant::Welch, alpha);
}

inline TestResult pooled_t_test(std::span<const double> a, std::span<const double> b, double alpha = 0.05) {
    return t_test(a, b, TTestVariant::Pooled, alpha);
}

}  // namespace rsaas::stats
