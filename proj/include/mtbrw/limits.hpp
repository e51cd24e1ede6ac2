#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mtbrw/class_analysis.hpp"
#include "mtbrw/model.hpp"

namespace mtbrw {

/// Scale factor multiplying the survival series.  The left-eigenvector mode
/// multiplies by the left Perron entry of the starting type's diagonal block
/// (with the in-block pairing u . v = 1); it belongs with martingale
/// estimates that weight horizon counts by the right eigenvector.  The plain
/// mode leaves the series bare and belongs with raw per-type counts.  Both
/// pairings estimate the same product in the limit.
enum class ZetaPrefactor { kLeftEigenvector, kOne };

/// Monte Carlo survival estimates of depth-j subtrees started from one type.
struct SurvivalRow {
    double weight = 0.0;   // rho^-j
    double p_alive = 0.0;  // fraction of subtrees with any particle at depth j
    double p_alive_half_width = 0.0;  // 1.96-sigma binomial half-width
    std::vector<double> p_type;       // per type: fraction with that type present at depth j
    std::vector<double> p_type_half_width;
};

/// Truncated series estimate of the scale constant in the max-displacement
/// limit law.
///
/// A particle with a surviving line to the horizon contributes exactly one
/// displacement of its type to the running maximum, no matter how many types
/// its descendants carry, so the series weights the per-depth survival
/// probability of a subtree.  The per-type sum, which counts a subtree once
/// per type it keeps alive at each depth, is reported alongside as a
/// diagnostic; the two coincide for single-type models.
struct ZetaEstimate {
    int start_type = 0;  // 0-based
    int depth = 0;       // J: last depth included in the series
    std::uint64_t trials = 0;
    double rho = 0.0;        // growth rate of the chain feeding the start type
    double prefactor = 1.0;  // 1 or the left Perron entry of the start type's block
    ZetaPrefactor prefactor_mode = ZetaPrefactor::kOne;
    bool from_depth_one = false;  // drop the j = 0 term (always 1) from the series
    double series_alive = 0.0;    // sum_j rho^-j P(alive at depth j)
    double series_alive_se = 0.0;  // standard error from per-trial weighted sums
    double series_per_type_sum = 0.0;  // sum_j rho^-j sum_l P(type l present at depth j)
    double value = 0.0;                // prefactor * series_alive
    double value_per_type_sum = 0.0;   // prefactor * series_per_type_sum
    double truncation_bound = 0.0;     // prefactor * d * rho^-J * rho/(rho-1)
    std::vector<SurvivalRow> rows;     // j = 0..J
};

struct ZetaOptions {
    int depth = 14;  // J
    std::uint64_t trials = 20000;
    ZetaPrefactor prefactor = ZetaPrefactor::kOne;
    bool from_depth_one = false;
    std::uint64_t cap = 2'000'000;  // per-subtree population cap
    double rho_override = 0.0;      // > 0 replaces analysis.rho_pre[start_type]
};

/// Estimates the scale constant by simulating `trials` independent subtrees
/// of depth J from `start_type`, all driven by dedicated counter streams of
/// `seed`.  rho is taken from analysis.rho_pre[start_type] and must exceed 1.
ZetaEstimate estimate_zeta(const ModelSpec& spec, const SpectralAnalysis& analysis,
                           int start_type, std::uint64_t seed, const ZetaOptions& options);

/// Same simulation, different scale factor: rescales an existing estimate.
ZetaEstimate with_prefactor(const ZetaEstimate& estimate, double prefactor,
                            ZetaPrefactor mode);

/// Mean over W samples of exp(-zeta W x^-r); 0 for x <= 0.
double limit_cdf(double x, double zeta, double r, const std::vector<double>& W_samples);

/// Linear quantile interpolation on a sorted sample (the common `type 7`).
double quantile_sorted(const std::vector<double>& sorted, double q);

/// Evenly spaced grid spanning the [lo_q, hi_q] quantile range of the finite
/// entries of `samples`.
std::vector<double> make_grid(const std::vector<double>& samples, std::size_t points = 200,
                              double lo_q = 0.05, double hi_q = 0.99);

/// Max over grid points and finite sample points of the gap between the
/// right-continuous empirical CDF and `cdf`; at sample points both the gap at
/// the point and the gap against the left limit are taken.  Non-finite
/// samples (extinct trials pushed to -inf) count in the denominator only.
double ks_distance(std::vector<double> samples, const std::function<double(double)>& cdf,
                   const std::vector<double>& grid);

struct VerifyOptions {
    std::uint64_t trials = 1000;
    std::uint64_t cap = 2'000'000;
    int zeta_depth = 14;
    // 4000 subtrees put the series noise near 0.5% of its value, far below
    // the distributional tolerances; the dedicated estimator defaults higher.
    std::uint64_t zeta_trials = 4000;
    bool zeta_from_depth_one = false;
    std::size_t grid_points = 200;
    std::uint64_t bootstrap = 1000;
};

/// One comparison curve on a fixed grid.  `ks` also scans sample points, so
/// it can exceed the largest tabulated gap.
struct CdfCurve {
    std::vector<double> x;
    std::vector<double> empirical;
    std::vector<double> theoretical;
    std::vector<double> gap;
    double ks = 0.0;
};

/// One (scale constant, martingale estimator) pairing fitted to the data.
struct HeavyFit {
    std::string pairing;  // "eigenvector" or "count"
    ZetaEstimate zeta;
    double W_mean = 0.0;
    double W_positive_fraction = 0.0;
    CdfCurve R_curve;  // rightmost position / a_n
    CdfCurve M_curve;  // max displacement / a_n
};

/// Growth-versus-tail speed of one class in isolation: with rate rho and
/// heaviest in-class tail exponent r, positions scale like rho^(n/r).
struct ClassSpeed {
    int class_index = -1;
    std::vector<int> types;  // member types, 0-based
    double rho = 0.0;
    double min_r = 0.0;
    double log_speed = 0.0;  // log(rho)/min_r, -inf when rho <= 1 has no spread
};

struct HeavyReport {
    int n = 0;
    std::uint64_t trials = 0;
    std::uint64_t extinct_count = 0;
    std::uint64_t capped_count = 0;
    bool irreducible = true;
    DominantPair dominant;
    std::vector<int> dominant_class_types;  // members of the dominant type's class, 0-based
    double a_n = 0.0;
    double selected_log_speed = 0.0;
    std::vector<ClassSpeed> isolated_speeds;  // classes reachable from the initial class
    std::vector<HeavyFit> fits;  // one pairing when irreducible, both when reducible
    std::size_t best_fit = 0;    // smallest KS on the R statistic

    std::string to_json_text() const;
    std::string cdf_csv() const;  // R-statistic curve of the best fit
};

/// Simulates at horizon n and compares R_n/a_n and M_n/a_n against the
/// mixed Frechet limit law with Monte Carlo scale constant and martingale
/// samples (fresh trials at the same horizon).
HeavyReport verify_heavy(const ModelSpec& spec, int n, std::uint64_t seed,
                         const VerifyOptions& options);

struct SemiExpRow {
    int n = 0;
    double psi = 0.0;
    std::uint64_t trials = 0;
    std::uint64_t extinct_count = 0;
    std::uint64_t capped_count = 0;
    double median = 0.0;
    double q10 = 0.0;
    double q90 = 0.0;
    double median_se = 0.0;  // bootstrap
    double abs_err = 0.0;    // |median - target|
    /// Same quantiles for the largest single displacement along surviving
    /// lines, again scaled by psi(n).  This statistic shares the limit
    /// constant but carries no additive mean-drift term of order n, so it
    /// settles inside the asymptotic window at far smaller horizons than the
    /// rightmost position does.
    double median_M = 0.0;
    double q10_M = 0.0;
    double q90_M = 0.0;
    double median_M_se = 0.0;
    double abs_err_M = 0.0;
};

struct SemiExpReport {
    double r = 0.0;
    double rho = 0.0;
    double target = 0.0;  // (log rho)^(1/r)
    std::vector<int> attaining_types;
    std::vector<int> preceding_classes;
    std::vector<SemiExpRow> rows;
    /// Per consecutive pair of horizons: abs_err increase minus the 1.96-sigma
    /// allowance from both bootstrap errors; non-positive entries pass.
    std::vector<double> trend_slack;
    bool trend_nonincreasing = true;
    /// Same trend check over the max-displacement medians.
    std::vector<double> trend_slack_M;
    bool trend_nonincreasing_M = true;
    /// Empirical CDF of R_n/psi(n) at the largest horizon against the step
    /// at the target constant.
    CdfCurve final_curve;

    std::string to_json_text() const;
    std::string cdf_csv() const;
};

/// Checks the almost-sure normalization R_n/psi(n) -> (log rho)^(1/r) over a
/// ladder of horizons.  Quantiles are over surviving, uncapped trials.
SemiExpReport verify_semiexp(const ModelSpec& spec, const std::vector<int>& n_list,
                             std::uint64_t seed, const VerifyOptions& options);

struct TotalPopulationRow {
    int type = 0;  // 0-based
    double rho = 0.0;
    int k = 0;
    double Y_mean_scaled = 0.0;  // mean of Y[type] / (n^k rho^n)
    double W_mean = 0.0;         // mean of Z_n[type] / (n^k rho^n)
    ZetaEstimate zeta;           // bare series, start type = this type
    double predicted = 0.0;      // zeta.value * W_mean
    double delta = 0.0;          // Y_mean_scaled - predicted
    double delta_se = 0.0;       // paired bootstrap over trials
    double delta_per_type_sum = 0.0;  // diagnostic against the per-type-sum series
    /// |delta| within 5 bootstrap errors plus the series truncation and
    /// series sampling-error allowances.
    bool within_5se = false;
};

struct TotalPopulationReport {
    int n = 0;
    std::uint64_t trials = 0;
    std::uint64_t extinct_count = 0;
    std::uint64_t capped_count = 0;
    std::vector<TotalPopulationRow> rows;
    std::vector<int> skipped_types;  // growth rate at most 1, no geometric scaling

    std::string to_json_text() const;
    /// Per-type rows in the shared four-column layout: type index as x,
    /// scaled ancestral mean as empirical, series prediction as theoretical.
    std::string cdf_csv() const;
};

/// Checks that the ancestral-population counts track the scale constant:
/// mean Y_n^i/(n^k rho_i^n) against zeta_i times the mean martingale estimate,
/// with both sides taken over the same trials (extinct trials contribute
/// zeros to both).
TotalPopulationReport verify_total_population(const ModelSpec& spec, int n, std::uint64_t seed,
                                              const VerifyOptions& options);

}  // namespace mtbrw
