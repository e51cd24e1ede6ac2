#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mtbrw/model.hpp"
#include "mtbrw/rng.hpp"

namespace mtbrw {

/// One generation of living particles as parallel arrays.  Parent indices
/// point into the previous generation.  max_disp is flattened d-per-particle:
/// the running maximum displacement of each type along the particle's
/// ancestry (-inf where the type has not appeared).
struct GenerationFrame {
    std::vector<double> position;
    std::vector<std::int32_t> type;
    std::vector<std::int64_t> parent;
    std::vector<double> max_disp;

    std::size_t size() const { return position.size(); }
};

GenerationFrame root_frame(const ModelSpec& spec);

/// Advances one generation.  Children are produced parent by parent, child
/// type by child type, child index last, so stream consumption is fully
/// determined by the incoming frame.  Throws PopulationCapExceeded as soon as
/// the next generation would grow past `cap`.
GenerationFrame step_generation(const GenerationFrame& frame, const ModelSpec& spec,
                                CounterRng& rng, std::uint64_t cap, int generation_index);

/// Per-generation record kept only for the ancestral counting pass.
struct AncestryFrame {
    std::vector<std::int32_t> type;
    std::vector<std::int64_t> parent;
};

/// Per type, the number of particles in generations 1..n lying on an
/// ancestral line of some generation-n particle; generation-n particles count
/// themselves.  `frames` holds generations 0..n.
std::vector<std::uint64_t> ancestors_with_descendants(const std::vector<AncestryFrame>& frames,
                                                      int num_types);

/// Plug-in estimate of the martingale limit from the horizon counts:
/// eigenvector mode uses (Z_n . v) / rho^n, type-count mode uses
/// Z_n[I] / (n^k rho^n); both evaluated through logs.
struct WEstimator {
    enum class Mode { kEigenvector, kTypeCount } mode = Mode::kEigenvector;
    double rho = 0.0;
    std::vector<double> v;  // eigenvector mode
    int type_I = 0;         // type-count mode
    int k = 0;              // type-count mode
};

struct TrialOptions {
    int horizon = 1;
    std::uint64_t cap = 2'000'000;
    bool track_ancestry = false;
};

struct TrialResult {
    bool extinct = false;
    bool capped = false;  // set by callers that catch PopulationCapExceeded
    int extinct_at = -1;  // first empty generation, -1 when the horizon was reached
    /// Rightmost position at the horizon; -inf only in memory for extinct
    /// trials, never serialized as a number.
    double R = 0.0;
    std::vector<double> max_disp;               // per type, over surviving ancestral lines
    std::vector<std::vector<std::uint64_t>> Z;  // [generation 0..n][type]
    std::vector<std::uint64_t> Y;               // per type; empty unless tracked
    double W_hat = 0.0;
};

TrialResult run_trial(const ModelSpec& spec, const TrialOptions& options, CounterRng& rng,
                      const std::optional<WEstimator>& estimator = {});

double estimate_W(const TrialResult& trial, const WEstimator& estimator);

/// Generation counts only, for series estimation where displacements are
/// irrelevant.  Returns [generation 0..horizon][type]; stops early on
/// extinction (trailing generations are zero).
std::vector<std::vector<std::uint64_t>> run_counts(const ModelSpec& spec, int horizon,
                                                   std::uint64_t cap, CounterRng& rng);

}  // namespace mtbrw
