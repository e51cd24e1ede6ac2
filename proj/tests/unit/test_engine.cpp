#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <doctest.h>

#include "mtbrw/engine.hpp"
#include "mtbrw/errors.hpp"
#include "mtbrw/model.hpp"
#include "mtbrw/rng.hpp"

using mtbrw::CounterRng;
using mtbrw::ModelSpec;
using mtbrw::OffspringLaw;
using mtbrw::PopulationCapExceeded;
using mtbrw::TailFamily;
using mtbrw::TailSpec;
using mtbrw::TrialOptions;
using mtbrw::TrialResult;
using mtbrw::WEstimator;
namespace stream_ns = mtbrw::stream_ns;

namespace {

TailSpec pareto2() {
    TailSpec t;
    t.family = TailFamily::kRegularlyVarying;
    t.r = 2.0;
    return t;
}

ModelSpec binary_split() {
    ModelSpec spec;
    spec.num_types = 1;
    spec.offspring = {{OffspringLaw::deterministic(2)}};
    spec.tails = {pareto2()};
    spec.initial_type = 0;
    return spec;
}

/// Type 0 spawns two of itself plus one type-1 child; type 1 is sterile, so
/// its particles below the horizon never reach a surviving line.
ModelSpec with_dead_end() {
    ModelSpec spec;
    spec.num_types = 2;
    spec.offspring = {
        {OffspringLaw::deterministic(2), OffspringLaw::deterministic(1)},
        {OffspringLaw::deterministic(0), OffspringLaw::deterministic(0)},
    };
    spec.tails = {pareto2(), pareto2()};
    spec.initial_type = 0;
    return spec;
}

}  // namespace

TEST_CASE("identical seeds reproduce a trial bit for bit") {
    ModelSpec spec;
    spec.num_types = 2;
    spec.offspring = {
        {OffspringLaw::poisson(1.1), OffspringLaw::bernoulli_shifted(0.3)},
        {OffspringLaw::geometric(0.55), OffspringLaw::poisson(0.7)},
    };
    spec.tails = {pareto2(), pareto2()};
    spec.initial_type = 0;

    TrialOptions opts;
    opts.horizon = 8;
    opts.track_ancestry = true;

    CounterRng rng1(77, stream_ns::id(stream_ns::kTrials, 5));
    CounterRng rng2(77, stream_ns::id(stream_ns::kTrials, 5));
    const TrialResult a = mtbrw::run_trial(spec, opts, rng1);
    const TrialResult b = mtbrw::run_trial(spec, opts, rng2);
    CHECK(a.extinct == b.extinct);
    CHECK(a.R == b.R);
    CHECK(a.Z == b.Z);
    CHECK(a.Y == b.Y);
    CHECK(a.max_disp == b.max_disp);
    CHECK(rng1.draws() == rng2.draws());

    CounterRng rng3(77, stream_ns::id(stream_ns::kTrials, 6));
    const TrialResult c = mtbrw::run_trial(spec, opts, rng3);
    CHECK((c.extinct != a.extinct || c.R != a.R));
}

TEST_CASE("deterministic offspring reproduce exact matrix-power counts") {
    ModelSpec spec;
    spec.num_types = 2;
    spec.offspring = {
        {OffspringLaw::deterministic(1), OffspringLaw::deterministic(2)},
        {OffspringLaw::deterministic(0), OffspringLaw::deterministic(2)},
    };
    spec.tails = {pareto2(), pareto2()};
    spec.initial_type = 0;

    CounterRng rng(1, stream_ns::id(stream_ns::kTrials, 0));
    const auto counts = mtbrw::run_counts(spec, 10, 10'000'000, rng);

    std::uint64_t z0 = 1, z1 = 0;
    CHECK(counts[0] == std::vector<std::uint64_t>{1, 0});
    for (int g = 1; g <= 10; ++g) {
        const std::uint64_t next0 = z0;
        const std::uint64_t next1 = 2 * z0 + 2 * z1;
        z0 = next0;
        z1 = next1;
        CHECK(counts[g] == std::vector<std::uint64_t>{z0, z1});
    }
}

TEST_CASE("mean counts match the mean matrix within five standard errors") {
    ModelSpec spec;
    spec.num_types = 2;
    spec.offspring = {
        {OffspringLaw::poisson(1.1), OffspringLaw::bernoulli_shifted(0.3)},
        {OffspringLaw::geometric(0.55), OffspringLaw::poisson(0.7)},
    };
    spec.tails = {pareto2(), pareto2()};
    spec.initial_type = 0;
    const int n = 6;
    const int trials = 3000;

    // Exact E[Z_n] = e_0 M^n.
    const mtbrw::Matrix m = mtbrw::mean_matrix(spec);
    std::vector<double> expected{1.0, 0.0};
    for (int g = 0; g < n; ++g) {
        std::vector<double> next(2, 0.0);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) next[j] += expected[i] * m(i, j);
        expected = next;
    }

    std::vector<double> sum(2, 0.0), sumsq(2, 0.0);
    for (int t = 0; t < trials; ++t) {
        CounterRng rng(2025, stream_ns::id(stream_ns::kTrials, t));
        const auto counts = mtbrw::run_counts(spec, n, 1'000'000, rng);
        for (int j = 0; j < 2; ++j) {
            const double z = static_cast<double>(counts[n][j]);
            sum[j] += z;
            sumsq[j] += z * z;
        }
    }
    for (int j = 0; j < 2; ++j) {
        const double mean = sum[j] / trials;
        const double sd = std::sqrt(sumsq[j] / trials - mean * mean);
        CHECK(std::abs(mean - expected[j]) <= 5.0 * sd / std::sqrt(trials));
    }
}

TEST_CASE("binary splitting at horizon five: counts, ancestral counts, W") {
    TrialOptions opts;
    opts.horizon = 5;
    opts.track_ancestry = true;
    CounterRng rng(3, stream_ns::id(stream_ns::kTrials, 0));
    const TrialResult trial = mtbrw::run_trial(binary_split(), opts, rng);

    CHECK_FALSE(trial.extinct);
    CHECK(trial.Z[5] == std::vector<std::uint64_t>{32});
    // 2 + 4 + 8 + 16 + 32 particles, all on surviving lines.
    CHECK(trial.Y == std::vector<std::uint64_t>{62});

    WEstimator est;
    est.mode = WEstimator::Mode::kEigenvector;
    est.rho = 2.0;
    est.v = {1.0};
    CHECK(mtbrw::estimate_W(trial, est) == doctest::Approx(1.0).epsilon(1e-12));
    WEstimator count_est;
    count_est.mode = WEstimator::Mode::kTypeCount;
    count_est.rho = 2.0;
    count_est.type_I = 0;
    count_est.k = 0;
    CHECK(mtbrw::estimate_W(trial, count_est) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sterile particles below the horizon leave the ancestral count") {
    TrialOptions opts;
    opts.horizon = 5;
    opts.track_ancestry = true;
    CounterRng rng(3, stream_ns::id(stream_ns::kTrials, 1));
    const TrialResult trial = mtbrw::run_trial(with_dead_end(), opts, rng);

    CHECK(trial.Z[5] == std::vector<std::uint64_t>{32, 16});
    // Type 0: every particle survives, 2 + ... + 32 = 62.  Type 1: only the
    // horizon generation counts itself; earlier ones died childless.
    CHECK(trial.Y == std::vector<std::uint64_t>{62, 16});
    std::uint64_t z1_total = 0;
    for (int g = 1; g <= 5; ++g) z1_total += trial.Z[g][1];
    CHECK(trial.Y[1] < z1_total);
}

TEST_CASE("the population cap stops a trial with the offending generation") {
    TrialOptions opts;
    opts.horizon = 10;
    opts.cap = 100;
    CounterRng rng(4, stream_ns::id(stream_ns::kTrials, 0));
    try {
        mtbrw::run_trial(binary_split(), opts, rng);
        FAIL("expected PopulationCapExceeded");
    } catch (const PopulationCapExceeded& e) {
        CHECK(e.generation == 7);  // 2^7 = 128 would be the first breach
        CHECK(e.cap == 100);
        CHECK(e.attempted > e.cap);
    }
    CounterRng rng2(4, stream_ns::id(stream_ns::kTrials, 0));
    CHECK_THROWS_AS(mtbrw::run_counts(binary_split(), 10, 100, rng2), PopulationCapExceeded);
}

TEST_CASE("a single lineage walks the sum of its displacement draws") {
    ModelSpec spec;
    spec.num_types = 1;
    spec.offspring = {{OffspringLaw::deterministic(1)}};
    spec.tails = {pareto2()};
    spec.initial_type = 0;
    const int n = 12;

    TrialOptions opts;
    opts.horizon = n;
    CounterRng rng(88, stream_ns::id(stream_ns::kTrials, 9));
    const TrialResult trial = mtbrw::run_trial(spec, opts, rng);

    // Deterministic offspring draw nothing, so the replayed stream yields the
    // displacement draws in order.
    CounterRng replay(88, stream_ns::id(stream_ns::kTrials, 9));
    double position = 0.0;
    double largest = -1e300;
    for (int g = 0; g < n; ++g) {
        const double step = spec.tails[0].sample(replay);
        position += step;
        largest = std::max(largest, step);
    }
    CHECK(trial.R == position);
    CHECK(trial.max_disp[0] == largest);
    CHECK(trial.Z[n] == std::vector<std::uint64_t>{1});
}

TEST_CASE("immediate extinction is reported, with counts padded to the horizon") {
    ModelSpec spec;
    spec.num_types = 1;
    spec.offspring = {{OffspringLaw::deterministic(0)}};
    spec.tails = {pareto2()};
    spec.initial_type = 0;

    TrialOptions opts;
    opts.horizon = 4;
    opts.track_ancestry = true;
    CounterRng rng(5, stream_ns::id(stream_ns::kTrials, 0));
    const TrialResult trial = mtbrw::run_trial(spec, opts, rng);
    CHECK(trial.extinct);
    CHECK(trial.extinct_at == 1);
    CHECK(trial.R == -std::numeric_limits<double>::infinity());
    REQUIRE(trial.Z.size() == 5);
    for (int g = 1; g <= 4; ++g) CHECK(trial.Z[g] == std::vector<std::uint64_t>{0});
    CHECK(trial.Y == std::vector<std::uint64_t>{0});

    WEstimator est;
    est.mode = WEstimator::Mode::kEigenvector;
    est.rho = 2.0;
    est.v = {1.0};
    CHECK(mtbrw::estimate_W(trial, est) == 0.0);
}
