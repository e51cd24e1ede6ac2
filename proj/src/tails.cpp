#include "mtbrw/tails.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mtbrw {

namespace {

constexpr double kQuantileRelTol = 1e-12;
constexpr int kMaxBisectIter = 400;

}  // namespace

double SlowlyVarying::operator()(double x) const noexcept {
    return c * std::pow(1.0 + std::log1p(std::max(x, 0.0)), beta);
}

double SlowlyVarying::log_value(double x) const noexcept {
    return std::log(c) + beta * std::log(1.0 + std::log1p(std::max(x, 0.0)));
}

std::string to_string(TailFamily family) {
    return family == TailFamily::kRegularlyVarying ? "regularly_varying" : "semi_exponential";
}

namespace {

/// log S(x) of the right-tail family alone, for x >= 0.  The min(1, .) cap
/// becomes min(0, .) in log space.
double log_survival_positive(const TailSpec& t, double x) {
    if (t.family == TailFamily::kRegularlyVarying) {
        return std::min(0.0, t.L.log_value(x) - t.r * std::log(x));
    }
    return std::min(0.0, t.a.log_value(x) - t.L(x) * std::pow(x, t.r));
}

/// Largest x at which the right-tail family alone satisfies S(x) >= p.
double quantile_positive(const TailSpec& t, double p) {
    if (t.family == TailFamily::kRegularlyVarying && t.L.is_constant()) {
        return std::pow(t.L.c / p, 1.0 / t.r);
    }
    if (t.family == TailFamily::kSemiExponential && t.L.is_constant() && t.a.is_constant()) {
        if (p >= t.a.c) return 0.0;
        return std::pow(std::log(t.a.c / p) / t.L.c, 1.0 / t.r);
    }

    const double log_p = std::log(p);
    if (log_survival_positive(t, std::numeric_limits<double>::min()) <= log_p) {
        return 0.0;  // an atom at the origin already covers p
    }
    double lo = std::numeric_limits<double>::min();
    double hi = 1.0;
    while (log_survival_positive(t, hi) > log_p) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e300) return hi;
    }
    for (int i = 0; i < kMaxBisectIter; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double ls = log_survival_positive(t, mid);
        if (std::abs(std::expm1(ls - log_p)) <= kQuantileRelTol) return mid;
        if (ls >= log_p) lo = mid; else hi = mid;
        if (hi - lo <= 1e-14 * std::max(1.0, std::abs(lo))) break;
    }
    return lo;
}

}  // namespace

double TailSpec::log_survival(double x) const {
    if (left && left->weight > 0.0) {
        const double w = left->weight;
        if (x >= 0.0) return std::log1p(-w) + log_survival_positive(*this, x);
        return std::log(w * (-std::expm1(left->rate * x)) + (1.0 - w));
    }
    if (x <= 0.0) return 0.0;
    return log_survival_positive(*this, x);
}

double TailSpec::survival(double x) const { return std::exp(log_survival(x)); }

double TailSpec::quantile(double p) const {
    if (!left || left->weight == 0.0) return quantile_positive(*this, p);

    // Mixture with the exponential left tail: invert the full survival.
    const double log_p = std::log(p);
    double lo = -1.0;
    double hi = 1.0;
    while (log_survival(lo) < log_p) {
        hi = lo;
        lo *= 2.0;
        if (lo < -1e300) return -std::numeric_limits<double>::infinity();
    }
    while (log_survival(hi) >= log_p) {
        lo = hi;
        hi = hi <= 0.0 ? 1.0 : hi * 2.0;
        if (hi > 1e300) return hi;
    }
    for (int i = 0; i < kMaxBisectIter; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double ls = log_survival(mid);
        if (std::abs(std::expm1(ls - log_p)) <= kQuantileRelTol) return mid;
        if (ls >= log_p) lo = mid; else hi = mid;
        if (hi - lo <= 1e-14 * std::max(1.0, std::abs(lo))) break;
    }
    return lo;
}

double TailSpec::sample(CounterRng& rng) const {
    if (left && left->weight > 0.0) {
        const double branch = rng.next_uniform();
        const double u = rng.next_uniform();
        if (branch < left->weight) return std::log(u) / left->rate;
        return quantile_positive(*this, u);
    }
    return quantile_positive(*this, rng.next_uniform());
}

}  // namespace mtbrw
