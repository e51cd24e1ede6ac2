#pragma once

#include <optional>
#include <string>

#include "mtbrw/rng.hpp"

namespace mtbrw {

/// Parametric slowly varying function L(x) = c * (1 + log(1 + max(x, 0)))^beta.
struct SlowlyVarying {
    double c = 1.0;
    double beta = 0.0;

    double operator()(double x) const noexcept;
    /// log L(x), evaluated without forming L(x) itself.
    double log_value(double x) const noexcept;
    bool is_constant() const noexcept { return beta == 0.0; }
};

enum class TailFamily { kRegularlyVarying, kSemiExponential };

/// Optional left tail: with probability `weight` the displacement is -Exp(rate).
struct ExponentialLeft {
    double rate = 1.0;
    double weight = 0.0;
};

/// One displacement law, described through its survival function S(x) = P(X > x).
///
///   regularly varying:  S(x) = min(1, L(x) * x^-r)            for x > 0
///   semi-exponential:   S(x) = min(1, a(x) * exp(-L(x) x^r))  for x > 0, r in (0,1)
///
/// and S(x) = 1 for x <= 0 when no left tail is configured.  With a left tail
/// the law is the mixture weight * (-Exp(rate)) + (1 - weight) * (law above).
struct TailSpec {
    TailFamily family = TailFamily::kRegularlyVarying;
    double r = 1.0;
    SlowlyVarying L{};
    /// Prefactor of the semi-exponential survival; unused for regularly varying.
    SlowlyVarying a{};
    std::optional<ExponentialLeft> left{};

    double survival(double x) const;
    /// log S(x); stays finite-precision deep in the tail where S underflows.
    double log_survival(double x) const;
    /// inf{x : S(x) <= p} for p in (0, 1].  Closed form when the slowly varying
    /// parts are constant, monotone bisection otherwise.
    double quantile(double p) const;
    double sample(CounterRng& rng) const;
};

std::string to_string(TailFamily family);

}  // namespace mtbrw
