#include "mtbrw/limits.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <string>

#include <json.hpp>

#include "mtbrw/engine.hpp"
#include "mtbrw/errors.hpp"
#include "mtbrw/normalization.hpp"
#include "mtbrw/rng.hpp"

namespace mtbrw {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Malformed models are configuration errors; well-formed models outside the
/// supercritical regime are precondition violations.
void require_valid(const ModelSpec& spec) {
    const ValidationReport report = validate(spec);
    if (report.ok()) return;
    for (const auto& v : report.violations)
        if (v.code != "subcritical_initial_class" && v.code != "extinction_possible")
            throw ConfigError(report.summary());
    throw PreconditionError(report.summary());
}

double mean_of(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double empirical_cdf(const std::vector<double>& sorted, double x) {
    const auto hi = std::upper_bound(sorted.begin(), sorted.end(), x);
    return static_cast<double>(hi - sorted.begin()) / static_cast<double>(sorted.size());
}

/// Bootstrap standard error of a statistic of resampled indices.
template <typename Statistic>
double bootstrap_se(std::size_t sample_size, std::uint64_t replicates, CounterRng& rng,
                    Statistic statistic) {
    if (sample_size < 2 || replicates < 2) return 0.0;
    std::vector<std::size_t> idx(sample_size);
    std::vector<double> stats;
    stats.reserve(replicates);
    for (std::uint64_t b = 0; b < replicates; ++b) {
        for (auto& i : idx) i = static_cast<std::size_t>(rng.next_u64() % sample_size);
        stats.push_back(statistic(idx));
    }
    const double m = mean_of(stats);
    double acc = 0.0;
    for (double s : stats) acc += (s - m) * (s - m);
    return std::sqrt(acc / static_cast<double>(stats.size() - 1));
}

double binomial_half_width(double p, double trials) {
    return 1.96 * std::sqrt(std::max(0.0, p * (1.0 - p)) / trials);
}

ZetaOptions zeta_options_from(const VerifyOptions& options, double rho) {
    ZetaOptions zopts;
    zopts.depth = options.zeta_depth;
    zopts.trials = options.zeta_trials;
    zopts.prefactor = ZetaPrefactor::kOne;
    zopts.from_depth_one = options.zeta_from_depth_one;
    zopts.cap = options.cap;
    zopts.rho_override = rho;
    return zopts;
}

json zeta_json(const ZetaEstimate& z) {
    json rows = json::array();
    for (const auto& row : z.rows)
        rows.push_back(json{{"weight", row.weight},
                            {"p_alive", row.p_alive},
                            {"p_alive_half_width", row.p_alive_half_width},
                            {"p_type", row.p_type},
                            {"p_type_half_width", row.p_type_half_width}});
    return json{
        {"start_type", z.start_type + 1},
        {"depth", z.depth},
        {"trials", z.trials},
        {"rho", z.rho},
        {"prefactor", z.prefactor},
        {"prefactor_mode",
         z.prefactor_mode == ZetaPrefactor::kLeftEigenvector ? "left_eigenvector" : "one"},
        {"from_depth_one", z.from_depth_one},
        {"series_alive", z.series_alive},
        {"series_alive_se", z.series_alive_se},
        {"series_per_type_sum", z.series_per_type_sum},
        {"value", z.value},
        {"value_se", z.prefactor * z.series_alive_se},
        {"value_per_type_sum", z.value_per_type_sum},
        {"truncation_bound", z.truncation_bound},
        {"survival_rows", rows},
    };
}

json curve_json(const CdfCurve& curve) {
    return json{{"x", curve.x},
                {"empirical", curve.empirical},
                {"theoretical", curve.theoretical},
                {"gap", curve.gap},
                {"ks", curve.ks}};
}

std::string curve_csv(const CdfCurve& curve) {
    std::string out = "x,empirical,theoretical,gap\n";
    char line[160];
    for (std::size_t i = 0; i < curve.x.size(); ++i) {
        std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g\n", curve.x[i],
                      curve.empirical[i], curve.theoretical[i], curve.gap[i]);
        out += line;
    }
    return out;
}

std::vector<int> one_based(const std::vector<int>& xs) {
    std::vector<int> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = xs[i] + 1;
    return out;
}

}  // namespace

ZetaEstimate estimate_zeta(const ModelSpec& spec, const SpectralAnalysis& analysis,
                           int start_type, std::uint64_t seed, const ZetaOptions& options) {
    const int d = spec.num_types;
    if (start_type < 0 || start_type >= d)
        throw PreconditionError("zeta start type out of range");
    if (options.depth < 1) throw PreconditionError("zeta depth must be at least 1");
    if (options.trials == 0) throw PreconditionError("zeta needs at least one trial");

    ZetaEstimate est;
    est.start_type = start_type;
    est.depth = options.depth;
    est.trials = options.trials;
    est.from_depth_one = options.from_depth_one;
    est.prefactor_mode = options.prefactor;
    est.rho = options.rho_override > 0.0 ? options.rho_override : analysis.rho_pre[start_type];
    if (!(est.rho > 1.0))
        throw PreconditionError("zeta series needs a growth rate above one");

    if (options.prefactor == ZetaPrefactor::kLeftEigenvector) {
        const int cls = analysis.decomp.class_of[start_type];
        const auto& members = analysis.decomp.classes[cls];
        const auto pos =
            std::find(members.begin(), members.end(), start_type) - members.begin();
        est.prefactor = analysis.class_perron[cls].u[pos];
    }

    ModelSpec sub = spec;
    sub.initial_type = start_type;

    const int J = options.depth;
    const int j0 = options.from_depth_one ? 1 : 0;
    std::vector<double> weight(J + 1);
    for (int j = 0; j <= J; ++j) weight[j] = std::pow(est.rho, -j);
    std::vector<std::uint64_t> alive(J + 1, 0);
    std::vector<std::vector<std::uint64_t>> present(J + 1, std::vector<std::uint64_t>(d, 0));
    double sum_s = 0.0;
    double sum_s2 = 0.0;

    for (std::uint64_t t = 0; t < options.trials; ++t) {
        CounterRng rng(seed, stream_ns::id(stream_ns::kZeta, t));
        const auto counts = run_counts(sub, J, options.cap, rng);
        double s = 0.0;
        for (int j = 0; j <= J; ++j) {
            bool any = false;
            for (int l = 0; l < d; ++l)
                if (counts[j][l] > 0) {
                    present[j][l] += 1;
                    any = true;
                }
            if (any) {
                alive[j] += 1;
                if (j >= j0) s += weight[j];
            }
        }
        sum_s += s;
        sum_s2 += s * s;
    }

    const double T = static_cast<double>(options.trials);
    est.rows.resize(J + 1);
    for (int j = 0; j <= J; ++j) {
        auto& row = est.rows[j];
        row.weight = weight[j];
        row.p_alive = static_cast<double>(alive[j]) / T;
        row.p_alive_half_width = binomial_half_width(row.p_alive, T);
        row.p_type.resize(d);
        row.p_type_half_width.resize(d);
        for (int l = 0; l < d; ++l) {
            row.p_type[l] = static_cast<double>(present[j][l]) / T;
            row.p_type_half_width[l] = binomial_half_width(row.p_type[l], T);
        }
        if (j >= j0) {
            est.series_alive += row.weight * row.p_alive;
            for (int l = 0; l < d; ++l) est.series_per_type_sum += row.weight * row.p_type[l];
        }
    }
    if (options.trials > 1) {
        const double mean_s = sum_s / T;
        const double var = std::max(0.0, (sum_s2 - T * mean_s * mean_s) / (T - 1.0));
        est.series_alive_se = std::sqrt(var / T);
    }
    est.value = est.prefactor * est.series_alive;
    est.value_per_type_sum = est.prefactor * est.series_per_type_sum;
    est.truncation_bound =
        est.prefactor * d * std::pow(est.rho, -J) * est.rho / (est.rho - 1.0);
    return est;
}

ZetaEstimate with_prefactor(const ZetaEstimate& estimate, double prefactor, ZetaPrefactor mode) {
    ZetaEstimate out = estimate;
    out.prefactor = prefactor;
    out.prefactor_mode = mode;
    out.value = prefactor * estimate.series_alive;
    out.value_per_type_sum = prefactor * estimate.series_per_type_sum;
    const int d =
        estimate.rows.empty() ? 1 : static_cast<int>(estimate.rows.front().p_type.size());
    out.truncation_bound =
        prefactor * d * std::pow(estimate.rho, -estimate.depth) * estimate.rho /
        (estimate.rho - 1.0);
    return out;
}

double limit_cdf(double x, double zeta, double r, const std::vector<double>& W_samples) {
    if (W_samples.empty()) throw PreconditionError("limit_cdf needs martingale samples");
    if (!(x > 0.0)) return 0.0;
    const double x_pow = std::pow(x, -r);
    double acc = 0.0;
    for (double w : W_samples) acc += std::exp(-zeta * w * x_pow);
    return acc / static_cast<double>(W_samples.size());
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw PreconditionError("quantile of an empty sample");
    if (q <= 0.0) return sorted.front();
    if (q >= 1.0) return sorted.back();
    const double h = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

std::vector<double> make_grid(const std::vector<double>& samples, std::size_t points,
                              double lo_q, double hi_q) {
    std::vector<double> finite;
    finite.reserve(samples.size());
    for (double s : samples)
        if (std::isfinite(s)) finite.push_back(s);
    if (finite.empty()) throw PreconditionError("grid needs at least one finite sample");
    std::sort(finite.begin(), finite.end());
    const double lo = quantile_sorted(finite, lo_q);
    const double hi = quantile_sorted(finite, hi_q);
    if (!(hi > lo) || points < 2) return {lo};
    std::vector<double> grid(points);
    for (std::size_t i = 0; i < points; ++i)
        grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    return grid;
}

double ks_distance(std::vector<double> samples, const std::function<double(double)>& cdf,
                   const std::vector<double>& grid) {
    if (samples.size() < 2) throw PreconditionError("ks_distance needs at least two samples");
    std::sort(samples.begin(), samples.end());
    const double size = static_cast<double>(samples.size());
    const auto f_hat = [&](double x) {
        return static_cast<double>(std::upper_bound(samples.begin(), samples.end(), x) -
                                   samples.begin()) /
               size;
    };
    const auto f_hat_left = [&](double x) {
        return static_cast<double>(std::lower_bound(samples.begin(), samples.end(), x) -
                                   samples.begin()) /
               size;
    };
    double ks = 0.0;
    for (double g : grid) ks = std::max(ks, std::abs(f_hat(g) - cdf(g)));
    for (double s : samples) {
        if (!std::isfinite(s)) continue;
        const double theory = cdf(s);
        ks = std::max({ks, std::abs(f_hat(s) - theory), std::abs(theory - f_hat_left(s))});
    }
    return ks;
}

namespace {

CdfCurve build_curve(const std::vector<double>& samples,
                     const std::function<double(double)>& cdf, std::size_t grid_points) {
    CdfCurve curve;
    curve.x = make_grid(samples, grid_points);
    std::vector<double> sorted(samples);
    std::sort(sorted.begin(), sorted.end());
    curve.empirical.reserve(curve.x.size());
    for (double g : curve.x) {
        const double emp = empirical_cdf(sorted, g);
        const double theory = cdf(g);
        curve.empirical.push_back(emp);
        curve.theoretical.push_back(theory);
        curve.gap.push_back(std::abs(emp - theory));
    }
    curve.ks = ks_distance(samples, cdf, curve.x);
    return curve;
}

}  // namespace

HeavyReport verify_heavy(const ModelSpec& spec, int n, std::uint64_t seed,
                         const VerifyOptions& options) {
    if (n < 1) throw PreconditionError("horizon must be at least 1");
    if (options.trials < 2) throw PreconditionError("need at least two trials");
    require_valid(spec);
    for (const auto& tail : spec.tails)
        if (tail.family != TailFamily::kRegularlyVarying)
            throw PreconditionError(
                "heavy-tail verification needs regularly varying tails for every type");

    const Matrix m = mean_matrix(spec);
    const SpectralAnalysis analysis = analyze_mean_matrix(m);
    const auto& decomp = analysis.decomp;
    const int from_class = decomp.class_of[spec.initial_type];

    const DominantPair dominant = dominant_pair_heavy(analysis, spec.tails, 1e-9, from_class);
    if (!dominant.unique)
        throw PreconditionError(
            "dominant (class, type) pair is not unique; the limit law is undetermined");
    if (!(dominant.rho > 1.0))
        throw PreconditionError("dominant growth rate must exceed one");
    const Matrix alpha_block = decomp.block(m, dominant.alpha_class);
    if (!is_primitive(alpha_block,
                      static_cast<int>(alpha_block.rows() * alpha_block.rows()) + 1))
        throw PreconditionError("the dominant class block must be primitive");

    const double a_n = solve_a_n(n, dominant.rho, dominant.k, spec.tails[dominant.type_I]);

    HeavyReport report;
    report.n = n;
    report.trials = options.trials;
    report.irreducible = decomp.irreducible();
    report.dominant = dominant;
    report.a_n = a_n;
    report.selected_log_speed = std::log(dominant.rho) / dominant.r;
    for (int a = 0; a < decomp.num_classes(); ++a) {
        if (!decomp.reaches[from_class][a]) continue;
        ClassSpeed speed;
        speed.class_index = a;
        speed.types = decomp.classes[a];
        speed.rho = analysis.class_rho[a];
        speed.min_r = kInf;
        for (int i : decomp.classes[a]) speed.min_r = std::min(speed.min_r, spec.tails[i].r);
        speed.log_speed = speed.rho > 1.0 ? std::log(speed.rho) / speed.min_r : -kInf;
        report.isolated_speeds.push_back(speed);
    }

    std::vector<double> R_scaled;
    std::vector<double> M_scaled;
    R_scaled.reserve(options.trials);
    M_scaled.reserve(options.trials);
    TrialOptions trial_opts;
    trial_opts.horizon = n;
    trial_opts.cap = options.cap;
    for (std::uint64_t t = 0; t < options.trials; ++t) {
        CounterRng rng(seed, stream_ns::id(stream_ns::kTrials, t));
        try {
            const TrialResult trial = run_trial(spec, trial_opts, rng);
            if (trial.extinct) {
                ++report.extinct_count;
                R_scaled.push_back(-kInf);
                M_scaled.push_back(-kInf);
            } else {
                R_scaled.push_back(trial.R / a_n);
                double mx = -kInf;
                for (double v : trial.max_disp) mx = std::max(mx, v);
                M_scaled.push_back(mx / a_n);
            }
        } catch (const PopulationCapExceeded&) {
            ++report.capped_count;
        }
    }
    if (R_scaled.size() < 2)
        throw PreconditionError("too few usable trials: the population cap removed them");

    // Martingale samples from fresh trials at the same horizon, so the two
    // Monte Carlo layers stay independent.
    const int cls_I = decomp.class_of[dominant.type_I];
    const auto& members_I = decomp.classes[cls_I];
    const auto& v_block = analysis.class_perron[cls_I].v;
    const double log_scale =
        dominant.k * std::log(static_cast<double>(n)) + n * std::log(dominant.rho);
    const auto scaled = [&](double value) {
        return value > 0.0 ? std::exp(std::log(value) - log_scale) : 0.0;
    };
    std::vector<double> W_eig;
    std::vector<double> W_count;
    W_eig.reserve(options.trials);
    W_count.reserve(options.trials);
    for (std::uint64_t t = 0; t < options.trials; ++t) {
        CounterRng rng(seed, stream_ns::id(stream_ns::kAuxBatch, t));
        try {
            const auto counts = run_counts(spec, n, options.cap, rng);
            double dot = 0.0;
            for (std::size_t p = 0; p < members_I.size(); ++p)
                dot += static_cast<double>(counts[n][members_I[p]]) * v_block[p];
            W_eig.push_back(scaled(dot));
            W_count.push_back(scaled(static_cast<double>(counts[n][dominant.type_I])));
        } catch (const PopulationCapExceeded&) {
            ++report.capped_count;
        }
    }
    if (W_eig.empty())
        throw PreconditionError("no martingale samples: the population cap removed them");

    const ZetaEstimate zeta_bare = estimate_zeta(
        spec, analysis, dominant.type_I, seed, zeta_options_from(options, dominant.rho));
    const auto pos_I =
        std::find(members_I.begin(), members_I.end(), dominant.type_I) - members_I.begin();
    const ZetaEstimate zeta_eig = with_prefactor(
        zeta_bare, analysis.class_perron[cls_I].u[pos_I], ZetaPrefactor::kLeftEigenvector);

    const auto make_fit = [&](const std::string& name, const ZetaEstimate& zeta,
                              const std::vector<double>& W_samples) {
        HeavyFit fit;
        fit.pairing = name;
        fit.zeta = zeta;
        fit.W_mean = mean_of(W_samples);
        std::size_t positive = 0;
        for (double w : W_samples)
            if (w > 0.0) ++positive;
        fit.W_positive_fraction =
            static_cast<double>(positive) / static_cast<double>(W_samples.size());
        const double value = zeta.value;
        const double r = dominant.r;
        const auto cdf = [value, r, &W_samples](double x) {
            return limit_cdf(x, value, r, W_samples);
        };
        fit.R_curve = build_curve(R_scaled, cdf, options.grid_points);
        fit.M_curve = build_curve(M_scaled, cdf, options.grid_points);
        return fit;
    };

    if (report.irreducible) {
        report.fits.push_back(make_fit("eigenvector", zeta_eig, W_eig));
    } else {
        report.fits.push_back(make_fit("count", zeta_bare, W_count));
        report.fits.push_back(make_fit("eigenvector", zeta_eig, W_eig));
    }
    report.best_fit = 0;
    for (std::size_t f = 1; f < report.fits.size(); ++f)
        if (report.fits[f].R_curve.ks < report.fits[report.best_fit].R_curve.ks)
            report.best_fit = f;
    report.dominant_class_types = members_I;
    return report;
}

SemiExpReport verify_semiexp(const ModelSpec& spec, const std::vector<int>& n_list,
                             std::uint64_t seed, const VerifyOptions& options) {
    if (n_list.empty()) throw PreconditionError("need at least one horizon");
    for (int n : n_list)
        if (n < 1) throw PreconditionError("horizons must be at least 1");
    if (options.trials < 2) throw PreconditionError("need at least two trials");
    require_valid(spec);
    for (const auto& tail : spec.tails)
        if (tail.family != TailFamily::kSemiExponential)
            throw PreconditionError(
                "stretched-tail verification needs semi-exponential tails for every type");

    const Matrix m = mean_matrix(spec);
    const SpectralAnalysis analysis = analyze_mean_matrix(m);
    const auto& decomp = analysis.decomp;
    const int from_class = decomp.class_of[spec.initial_type];
    const SemiExpData data = dominant_data_semiexp(analysis, spec.tails, 1e-12, from_class);
    if (!(data.rho > 1.0)) throw PreconditionError("driving growth rate must exceed one");
    for (int a : data.preceding_classes) {
        if (analysis.class_rho[a] < data.rho * (1.0 - 1e-9)) continue;
        const Matrix block = decomp.block(m, a);
        if (!is_primitive(block, static_cast<int>(block.rows() * block.rows()) + 1))
            throw PreconditionError("every class attaining the driving rate must be primitive");
    }

    SemiExpReport report;
    report.r = data.r;
    report.rho = data.rho;
    report.target = std::pow(std::log(data.rho), 1.0 / data.r);
    report.attaining_types = data.attaining_types;
    report.preceding_classes = data.preceding_classes;

    std::vector<int> horizons(n_list);
    std::sort(horizons.begin(), horizons.end());
    horizons.erase(std::unique(horizons.begin(), horizons.end()), horizons.end());

    std::vector<double> last_samples;
    TrialOptions trial_opts;
    trial_opts.cap = options.cap;
    for (std::size_t ni = 0; ni < horizons.size(); ++ni) {
        const int n = horizons[ni];
        SemiExpRow row;
        row.n = n;
        row.psi = solve_psi(n, data.r, data.L_min_over);
        row.trials = options.trials;
        trial_opts.horizon = n;
        std::vector<double> samples;
        std::vector<double> samples_m;
        samples.reserve(options.trials);
        samples_m.reserve(options.trials);
        for (std::uint64_t t = 0; t < options.trials; ++t) {
            CounterRng rng(seed,
                           stream_ns::id(stream_ns::kTrials, ni * options.trials + t));
            try {
                const TrialResult trial = run_trial(spec, trial_opts, rng);
                if (trial.extinct) {
                    ++row.extinct_count;
                } else {
                    samples.push_back(trial.R / row.psi);
                    double m_stat = -std::numeric_limits<double>::infinity();
                    for (double disp : trial.max_disp) m_stat = std::max(m_stat, disp);
                    samples_m.push_back(m_stat / row.psi);
                }
            } catch (const PopulationCapExceeded&) {
                ++row.capped_count;
            }
        }
        if (samples.size() < 2)
            throw PreconditionError("too few surviving trials at horizon " + std::to_string(n));
        std::sort(samples.begin(), samples.end());
        std::sort(samples_m.begin(), samples_m.end());
        row.median = quantile_sorted(samples, 0.5);
        row.q10 = quantile_sorted(samples, 0.1);
        row.q90 = quantile_sorted(samples, 0.9);
        row.median_M = quantile_sorted(samples_m, 0.5);
        row.q10_M = quantile_sorted(samples_m, 0.1);
        row.q90_M = quantile_sorted(samples_m, 0.9);
        const auto median_boot = [&](const std::vector<double>& sorted,
                                     std::uint64_t stream_idx) {
            CounterRng boot_rng(seed, stream_ns::id(stream_ns::kBootstrap, stream_idx));
            return bootstrap_se(sorted.size(), options.bootstrap, boot_rng,
                                [&](const std::vector<std::size_t>& idx) {
                                    std::vector<double> resample;
                                    resample.reserve(idx.size());
                                    for (std::size_t i : idx) resample.push_back(sorted[i]);
                                    std::sort(resample.begin(), resample.end());
                                    return quantile_sorted(resample, 0.5);
                                });
        };
        row.median_se = median_boot(samples, ni);
        row.median_M_se = median_boot(samples_m, 2048 + ni);
        row.abs_err = std::abs(row.median - report.target);
        row.abs_err_M = std::abs(row.median_M - report.target);
        report.rows.push_back(row);
        if (ni + 1 == horizons.size()) last_samples = samples;
    }

    for (std::size_t i = 1; i < report.rows.size(); ++i) {
        const auto& prev = report.rows[i - 1];
        const auto& cur = report.rows[i];
        const double allowance =
            1.96 * std::sqrt(prev.median_se * prev.median_se + cur.median_se * cur.median_se);
        const double slack = cur.abs_err - prev.abs_err - allowance;
        report.trend_slack.push_back(slack);
        if (slack > 0.0) report.trend_nonincreasing = false;
        const double allowance_m = 1.96 * std::sqrt(prev.median_M_se * prev.median_M_se +
                                                    cur.median_M_se * cur.median_M_se);
        const double slack_m = cur.abs_err_M - prev.abs_err_M - allowance_m;
        report.trend_slack_M.push_back(slack_m);
        if (slack_m > 0.0) report.trend_nonincreasing_M = false;
    }

    const double target = report.target;
    report.final_curve = build_curve(
        last_samples, [target](double x) { return x >= target ? 1.0 : 0.0; },
        options.grid_points);
    return report;
}

TotalPopulationReport verify_total_population(const ModelSpec& spec, int n, std::uint64_t seed,
                                              const VerifyOptions& options) {
    if (n < 1) throw PreconditionError("horizon must be at least 1");
    if (options.trials < 2) throw PreconditionError("need at least two trials");
    require_valid(spec);

    const Matrix m = mean_matrix(spec);
    const SpectralAnalysis analysis = analyze_mean_matrix(m);
    const auto& decomp = analysis.decomp;
    const int from_class = decomp.class_of[spec.initial_type];
    const int d = spec.num_types;

    TotalPopulationReport report;
    report.n = n;
    report.trials = options.trials;

    std::vector<std::vector<std::uint64_t>> Y_all;
    std::vector<std::vector<std::uint64_t>> Z_final;
    Y_all.reserve(options.trials);
    Z_final.reserve(options.trials);
    TrialOptions trial_opts;
    trial_opts.horizon = n;
    trial_opts.cap = options.cap;
    trial_opts.track_ancestry = true;
    for (std::uint64_t t = 0; t < options.trials; ++t) {
        CounterRng rng(seed, stream_ns::id(stream_ns::kTrials, t));
        try {
            const TrialResult trial = run_trial(spec, trial_opts, rng);
            if (trial.extinct) ++report.extinct_count;
            Y_all.push_back(trial.Y);
            Z_final.push_back(trial.Z[n]);
        } catch (const PopulationCapExceeded&) {
            ++report.capped_count;
        }
    }
    if (Y_all.size() < 2)
        throw PreconditionError("too few usable trials: the population cap removed them");
    const std::size_t usable = Y_all.size();

    for (int i = 0; i < d; ++i) {
        const int cls = decomp.class_of[i];
        double rho = 0.0;
        if (decomp.reaches[from_class][cls])
            for (int a = 0; a < decomp.num_classes(); ++a)
                if (decomp.reaches[from_class][a] && decomp.reaches[a][cls])
                    rho = std::max(rho, analysis.class_rho[a]);
        if (!(rho > 1.0)) {
            report.skipped_types.push_back(i);
            continue;
        }
        TotalPopulationRow row;
        row.type = i;
        row.rho = rho;
        row.k = growth_exponent(decomp, analysis.class_rho, i, 1e-9, from_class);
        const double log_scale =
            row.k * std::log(static_cast<double>(n)) + n * std::log(rho);
        const auto scaled = [&](double value) {
            return value > 0.0 ? std::exp(std::log(value) - log_scale) : 0.0;
        };
        std::vector<double> y(usable);
        std::vector<double> w(usable);
        for (std::size_t t = 0; t < usable; ++t) {
            y[t] = scaled(static_cast<double>(Y_all[t][i]));
            w[t] = scaled(static_cast<double>(Z_final[t][i]));
        }
        row.Y_mean_scaled = mean_of(y);
        row.W_mean = mean_of(w);
        ZetaOptions zopts = zeta_options_from(options, rho);
        row.zeta = estimate_zeta(spec, analysis, i, seed, zopts);
        row.predicted = row.zeta.value * row.W_mean;
        row.delta = row.Y_mean_scaled - row.predicted;
        row.delta_per_type_sum = row.Y_mean_scaled - row.zeta.value_per_type_sum * row.W_mean;
        CounterRng boot_rng(seed, stream_ns::id(stream_ns::kBootstrap, 4096 + i));
        const double zeta_value = row.zeta.value;
        row.delta_se = bootstrap_se(
            usable, options.bootstrap, boot_rng, [&](const std::vector<std::size_t>& idx) {
                double ym = 0.0;
                double wm = 0.0;
                for (std::size_t t : idx) {
                    ym += y[t];
                    wm += w[t];
                }
                const double inv = 1.0 / static_cast<double>(idx.size());
                return ym * inv - zeta_value * wm * inv;
            });
        // Two error sources beyond the paired bootstrap: the series stops at
        // depth J (prediction undershoots by at most the truncation bound
        // times the martingale mean), and the series itself carries Monte
        // Carlo noise that the trial resampling cannot see.
        const double allowance = row.zeta.truncation_bound * row.W_mean +
                                 5.0 * row.zeta.series_alive_se * row.W_mean;
        row.within_5se = std::abs(row.delta) <= 5.0 * row.delta_se + allowance;
        report.rows.push_back(row);
    }
    return report;
}

std::string HeavyReport::to_json_text() const {
    json fits_json = json::array();
    for (const auto& fit : fits)
        fits_json.push_back(json{{"pairing", fit.pairing},
                                 {"zeta", zeta_json(fit.zeta)},
                                 {"W_mean", fit.W_mean},
                                 {"W_positive_fraction", fit.W_positive_fraction},
                                 {"R", curve_json(fit.R_curve)},
                                 {"M", curve_json(fit.M_curve)}});
    json speeds = json::array();
    for (const auto& speed : isolated_speeds)
        speeds.push_back(json{{"class_index", speed.class_index + 1},
                              {"types", one_based(speed.types)},
                              {"rho", speed.rho},
                              {"min_r", speed.min_r},
                              {"log_speed", speed.log_speed}});
    const json doc{
        {"mode", "heavy"},
        {"n", n},
        {"trials", trials},
        {"extinct", extinct_count},
        {"capped", capped_count},
        {"irreducible", irreducible},
        {"dominant",
         json{{"class_index", dominant.alpha_class + 1},
              {"type", dominant.type_I + 1},
              {"class_types_of_type", one_based(dominant_class_types)},
              {"rho", dominant.rho},
              {"r", dominant.r},
              {"k", dominant.k},
              {"unique", dominant.unique}}},
        {"a_n", a_n},
        {"selected_log_speed", selected_log_speed},
        {"isolated_class_speeds", speeds},
        {"fits", fits_json},
        {"best_fit", best_fit},
        {"best_ks_R", fits.empty() ? 0.0 : fits[best_fit].R_curve.ks},
        {"best_ks_M", fits.empty() ? 0.0 : fits[best_fit].M_curve.ks},
    };
    return doc.dump(2) + "\n";
}

std::string HeavyReport::cdf_csv() const {
    if (fits.empty()) return "x,empirical,theoretical,gap\n";
    return curve_csv(fits[best_fit].R_curve);
}

std::string SemiExpReport::to_json_text() const {
    json rows_json = json::array();
    for (const auto& row : rows)
        rows_json.push_back(json{{"n", row.n},
                                 {"psi", row.psi},
                                 {"trials", row.trials},
                                 {"extinct", row.extinct_count},
                                 {"capped", row.capped_count},
                                 {"median", row.median},
                                 {"q10", row.q10},
                                 {"q90", row.q90},
                                 {"median_se", row.median_se},
                                 {"abs_err", row.abs_err},
                                 {"median_M", row.median_M},
                                 {"q10_M", row.q10_M},
                                 {"q90_M", row.q90_M},
                                 {"median_M_se", row.median_M_se},
                                 {"abs_err_M", row.abs_err_M}});
    const json doc{
        {"mode", "semiexp"},
        {"r", r},
        {"rho", rho},
        {"target", target},
        {"attaining_types", one_based(attaining_types)},
        {"preceding_classes", one_based(preceding_classes)},
        {"rows", rows_json},
        {"trend_slack", trend_slack},
        {"trend_nonincreasing", trend_nonincreasing},
        {"trend_slack_M", trend_slack_M},
        {"trend_nonincreasing_M", trend_nonincreasing_M},
        {"final_curve", curve_json(final_curve)},
    };
    return doc.dump(2) + "\n";
}

std::string SemiExpReport::cdf_csv() const { return curve_csv(final_curve); }

std::string TotalPopulationReport::to_json_text() const {
    json rows_json = json::array();
    for (const auto& row : rows)
        rows_json.push_back(json{{"type", row.type + 1},
                                 {"rho", row.rho},
                                 {"k", row.k},
                                 {"Y_mean_scaled", row.Y_mean_scaled},
                                 {"W_mean", row.W_mean},
                                 {"zeta", zeta_json(row.zeta)},
                                 {"predicted", row.predicted},
                                 {"delta", row.delta},
                                 {"delta_se", row.delta_se},
                                 {"delta_per_type_sum", row.delta_per_type_sum},
                                 {"within_5se", row.within_5se}});
    const json doc{
        {"mode", "total_population"},
        {"n", n},
        {"trials", trials},
        {"extinct", extinct_count},
        {"capped", capped_count},
        {"rows", rows_json},
        {"skipped_types", one_based(skipped_types)},
    };
    return doc.dump(2) + "\n";
}

std::string TotalPopulationReport::cdf_csv() const {
    std::string out = "x,empirical,theoretical,gap\n";
    char line[160];
    for (const auto& row : rows) {
        std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g\n", row.type + 1,
                      row.Y_mean_scaled, row.predicted, std::abs(row.delta));
        out += line;
    }
    return out;
}

}  // namespace mtbrw
