#include "mtbrw/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mtbrw/errors.hpp"

namespace mtbrw {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

GenerationFrame root_frame(const ModelSpec& spec) {
    GenerationFrame frame;
    frame.position.push_back(0.0);
    frame.type.push_back(static_cast<std::int32_t>(spec.initial_type));
    frame.parent.push_back(-1);
    frame.max_disp.assign(spec.num_types, kNegInf);
    return frame;
}

GenerationFrame step_generation(const GenerationFrame& frame, const ModelSpec& spec,
                                CounterRng& rng, std::uint64_t cap, int generation_index) {
    const int d = spec.num_types;
    GenerationFrame next;
    next.position.reserve(frame.size());
    for (std::size_t p = 0; p < frame.size(); ++p) {
        const int parent_type = frame.type[p];
        const double parent_position = frame.position[p];
        for (int j = 0; j < d; ++j) {
            const std::uint64_t children = spec.offspring[parent_type][j].sample(rng);
            for (std::uint64_t c = 0; c < children; ++c) {
                if (next.size() >= cap)
                    throw PopulationCapExceeded(generation_index, next.size() + 1, cap);
                const double disp = spec.tails[j].sample(rng);
                next.position.push_back(parent_position + disp);
                next.type.push_back(static_cast<std::int32_t>(j));
                next.parent.push_back(static_cast<std::int64_t>(p));
                const std::size_t base = next.max_disp.size();
                next.max_disp.resize(base + d);
                for (int t = 0; t < d; ++t) next.max_disp[base + t] = frame.max_disp[p * d + t];
                next.max_disp[base + j] = std::max(next.max_disp[base + j], disp);
            }
        }
    }
    return next;
}

std::vector<std::uint64_t> ancestors_with_descendants(const std::vector<AncestryFrame>& frames,
                                                      int num_types) {
    std::vector<std::uint64_t> y(num_types, 0);
    if (frames.size() < 2) return y;

    const std::size_t n = frames.size() - 1;
    std::vector<bool> marked(frames[n].type.size(), true);
    for (std::size_t g = n; g >= 1; --g) {
        const AncestryFrame& cur = frames[g];
        std::vector<bool> parent_marked(frames[g - 1].type.size(), false);
        for (std::size_t i = 0; i < cur.type.size(); ++i) {
            if (!marked[i]) continue;
            ++y[cur.type[i]];
            parent_marked[cur.parent[i]] = true;
        }
        marked.swap(parent_marked);
    }
    return y;
}

double estimate_W(const TrialResult& trial, const WEstimator& estimator) {
    const std::size_t n = trial.Z.size() - 1;
    const double log_rho_n = static_cast<double>(n) * std::log(estimator.rho);
    if (estimator.mode == WEstimator::Mode::kEigenvector) {
        double dot = 0.0;
        for (std::size_t i = 0; i < trial.Z[n].size(); ++i)
            dot += static_cast<double>(trial.Z[n][i]) * estimator.v[i];
        if (dot <= 0.0) return 0.0;
        return std::exp(std::log(dot) - log_rho_n);
    }
    const std::uint64_t z = trial.Z[n][estimator.type_I];
    if (z == 0) return 0.0;
    return std::exp(std::log(static_cast<double>(z)) -
                    estimator.k * std::log(static_cast<double>(n)) - log_rho_n);
}

TrialResult run_trial(const ModelSpec& spec, const TrialOptions& options, CounterRng& rng,
                      const std::optional<WEstimator>& estimator) {
    if (options.horizon < 1) throw PreconditionError("run_trial: horizon must be >= 1");
    const int d = spec.num_types;
    const int n = options.horizon;

    TrialResult out;
    out.Z.reserve(n + 1);
    std::vector<AncestryFrame> ancestry;
    if (options.track_ancestry) ancestry.reserve(n + 1);

    GenerationFrame frame = root_frame(spec);
    auto record = [&](const GenerationFrame& f) {
        std::vector<std::uint64_t> z(d, 0);
        for (std::int32_t t : f.type) ++z[t];
        out.Z.push_back(std::move(z));
        if (options.track_ancestry) ancestry.push_back({f.type, f.parent});
    };
    record(frame);

    for (int g = 1; g <= n; ++g) {
        frame = step_generation(frame, spec, rng, options.cap, g);
        record(frame);
        if (frame.size() == 0) {
            out.extinct = true;
            out.extinct_at = g;
            break;
        }
    }
    // Zero rows keep Z indexed 0..n even when the process died early.
    while (out.Z.size() < static_cast<std::size_t>(n + 1))
        out.Z.emplace_back(d, 0);

    if (out.extinct) {
        out.R = kNegInf;
        out.max_disp.assign(d, kNegInf);
        out.Y.assign(options.track_ancestry ? d : 0, 0);
    } else {
        out.R = *std::max_element(frame.position.begin(), frame.position.end());
        out.max_disp.assign(d, kNegInf);
        for (std::size_t p = 0; p < frame.size(); ++p)
            for (int t = 0; t < d; ++t)
                out.max_disp[t] = std::max(out.max_disp[t], frame.max_disp[p * d + t]);
        if (options.track_ancestry) out.Y = ancestors_with_descendants(ancestry, d);
    }
    if (estimator) out.W_hat = estimate_W(out, *estimator);
    return out;
}

std::vector<std::vector<std::uint64_t>> run_counts(const ModelSpec& spec, int horizon,
                                                   std::uint64_t cap, CounterRng& rng) {
    const int d = spec.num_types;
    std::vector<std::vector<std::uint64_t>> counts(horizon + 1,
                                                   std::vector<std::uint64_t>(d, 0));
    counts[0][spec.initial_type] = 1;
    for (int g = 1; g <= horizon; ++g) {
        std::uint64_t total = 0;
        for (int i = 0; i < d; ++i) {
            for (std::uint64_t particle = 0; particle < counts[g - 1][i]; ++particle) {
                for (int j = 0; j < d; ++j) {
                    const std::uint64_t children = spec.offspring[i][j].sample(rng);
                    counts[g][j] += children;
                    total += children;
                    if (total > cap) throw PopulationCapExceeded(g, total, cap);
                }
            }
        }
        if (total == 0) break;
    }
    return counts;
}

}  // namespace mtbrw
