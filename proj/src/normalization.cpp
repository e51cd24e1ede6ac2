#include "mtbrw/normalization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mtbrw/errors.hpp"

namespace mtbrw {

namespace {

constexpr double kRelResidual = 1e-10;
constexpr int kMaxBisectIter = 500;

double log_L_min(const std::vector<SlowlyVarying>& L, double x) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& l : L) best = std::min(best, l.log_value(x));
    return best;
}

/// Root of g on (0, inf) where g is continuous and nonincreasing, with
/// g(0+) > 0 > g(inf).  Returns the first x with |g(x)| <= tol.
template <typename G>
double bisect_decreasing(G g, double tol) {
    double lo = std::numeric_limits<double>::min();
    double hi = 1.0;
    while (g(hi) > 0.0) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e300) throw Unsolvable("normalization: no root below 1e300");
    }
    for (int i = 0; i < kMaxBisectIter; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double gm = g(mid);
        if (std::abs(gm) <= tol) return mid;
        if (gm > 0.0) lo = mid; else hi = mid;
    }
    throw NonConvergence("normalization: bisection stalled above residual target");
}

}  // namespace

double solve_a_n(int n, double rho, int k, const TailSpec& tail) {
    if (n < 1) throw PreconditionError("solve_a_n: n must be >= 1");
    if (!(rho > 1.0)) throw PreconditionError("solve_a_n: growth rate must be > 1");
    // S(a_n) = n^-k rho^-n, i.e. log S(a_n) = -(k log n + n log rho) < 0.
    const double target = -(k * std::log(static_cast<double>(n)) +
                            n * std::log(rho));

    if (tail.family == TailFamily::kRegularlyVarying && tail.L.is_constant() && !tail.left) {
        return std::exp((std::log(tail.L.c) - target) / tail.r);
    }
    if (tail.family == TailFamily::kSemiExponential && tail.L.is_constant() &&
        tail.a.is_constant() && !tail.left) {
        const double arg = std::log(tail.a.c) - target;
        if (arg <= 0.0) throw Unsolvable("solve_a_n: survival never this small");
        return std::pow(arg / tail.L.c, 1.0 / tail.r);
    }
    return bisect_decreasing([&](double x) { return tail.log_survival(x) - target; },
                             0.5 * kRelResidual);
}

double solve_psi(int n, double r, const std::vector<SlowlyVarying>& L) {
    if (n < 1) throw PreconditionError("solve_psi: n must be >= 1");
    if (!(r > 0.0)) throw PreconditionError("solve_psi: exponent must be > 0");
    if (L.empty()) throw PreconditionError("solve_psi: needs at least one L");
    const double log_n = std::log(static_cast<double>(n));

    bool all_const = true;
    for (const auto& l : L) all_const = all_const && l.is_constant();
    if (all_const) {
        double c = std::numeric_limits<double>::infinity();
        for (const auto& l : L) c = std::min(c, l.c);
        return std::exp((log_n - std::log(c)) / r);
    }
    // L(psi) psi^r / n = 1 in log space; the left side increases in psi, so
    // negate to reuse the decreasing-root helper.
    return bisect_decreasing(
        [&](double x) { return -(log_L_min(L, x) + r * std::log(x) - log_n); },
        0.5 * kRelResidual);
}

double a_n_residual(int n, double rho, int k, const TailSpec& tail, double value) {
    const double log_lhs = k * std::log(static_cast<double>(n)) + n * std::log(rho) +
                           tail.log_survival(value);
    return std::abs(std::expm1(log_lhs));
}

double psi_residual(int n, double r, const std::vector<SlowlyVarying>& L, double value) {
    const double log_lhs =
        log_L_min(L, value) + r * std::log(value) - std::log(static_cast<double>(n));
    return std::abs(std::expm1(log_lhs));
}

NormalizationTable a_n_table(const std::vector<int>& ns, double rho, int k,
                             const TailSpec& tail) {
    NormalizationTable table;
    for (int n : ns) {
        const double value = solve_a_n(n, rho, k, tail);
        table.rows.push_back({n, value, a_n_residual(n, rho, k, tail, value)});
    }
    return table;
}

NormalizationTable psi_table(const std::vector<int>& ns, double r,
                             const std::vector<SlowlyVarying>& L) {
    NormalizationTable table;
    for (int n : ns) {
        const double value = solve_psi(n, r, L);
        table.rows.push_back({n, value, psi_residual(n, r, L, value)});
    }
    return table;
}

}  // namespace mtbrw
