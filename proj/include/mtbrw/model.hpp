#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtbrw/matrix.hpp"
#include "mtbrw/rng.hpp"
#include "mtbrw/tails.hpp"

namespace mtbrw {

enum class OffspringKind { kDeterministic, kBernoulliShifted, kPoisson, kGeometric, kBinomial };

/// Offspring count law for one (parent type, child type) pair.
///
///   deterministic(count)       always `count`
///   bernoulli_shifted(p)       1 with prob 1-p, 2 with prob p
///   poisson(lambda)
///   geometric(p)               P(k) = (1-p)^k p on k = 0,1,2,...
///   binomial(trials, p)
struct OffspringLaw {
    OffspringKind kind = OffspringKind::kDeterministic;
    std::int64_t count = 0;   // deterministic
    double p = 0.0;           // bernoulli_shifted, geometric, binomial
    double lambda = 0.0;      // poisson
    std::int64_t trials = 0;  // binomial

    static OffspringLaw deterministic(std::int64_t count);
    static OffspringLaw bernoulli_shifted(double p);
    static OffspringLaw poisson(double lambda);
    static OffspringLaw geometric(double p);
    static OffspringLaw binomial(std::int64_t trials, double p);

    /// Exact mean in closed form; never estimated.
    double mean() const;
    double pmf(std::uint64_t k) const;
    /// Probability of drawing zero offspring.
    double mass_at_zero() const;
    std::uint64_t sample(CounterRng& rng) const;
};

/// Full model: d types, offspring laws per (parent, child) pair, one
/// displacement law per child type, and the type of the root particle.
struct ModelSpec {
    int num_types = 0;
    std::vector<std::vector<OffspringLaw>> offspring;  // [parent][child]
    std::vector<TailSpec> tails;                       // indexed by child type
    int initial_type = 0;                              // 0-based

    int dim() const { return num_types; }
};

/// Exact mean matrix M(i, j) = E[number of type-j children of a type-i parent].
Matrix mean_matrix(const ModelSpec& spec);

struct Violation {
    std::string code;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
    std::string summary() const;
};

struct ValidationOptions {
    /// Flag any possibility of the initial class dying out (required by
    /// verification profiles that assume sure survival).
    bool require_sure_survival = false;
};

/// Checks parameter ranges, tail exponents, survival-function monotonicity on
/// a geometric grid, and (optionally) sure survival of the initial class.
ValidationReport validate(const ModelSpec& spec, const ValidationOptions& options = {});

/// Parses a model from its JSON configuration.  Unknown keys anywhere in the
/// document are rejected.  Throws ConfigError.
ModelSpec model_from_json_text(const std::string& text);
ModelSpec model_from_json_file(const std::string& path);

}  // namespace mtbrw
