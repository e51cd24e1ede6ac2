#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mtbrw/class_analysis.hpp"
#include "mtbrw/engine.hpp"
#include "mtbrw/errors.hpp"
#include "mtbrw/limits.hpp"
#include "mtbrw/model.hpp"
#include "mtbrw/normalization.hpp"
#include "mtbrw/rng.hpp"

namespace {

using mtbrw::ConfigError;
using mtbrw::NonConvergence;
using mtbrw::PopulationCapExceeded;
using mtbrw::PreconditionError;
using mtbrw::Unsolvable;
using nlohmann::json;

constexpr const char* kToolVersion = "1.0.0";

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitPrecondition = 3;
constexpr int kExitRuntime = 4;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return text;
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t hash = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 1099511628211ULL;
    }
    return hash;
}

std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Writes through a temporary name and renames, so readers never observe a
/// half-written file.
void atomic_write(const std::filesystem::path& path, const std::string& body) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write file: " + tmp.string());
        out.write(body.data(), static_cast<std::streamsize>(body.size()));
        if (!out) throw ConfigError("short write: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

struct OutputSink {
    std::optional<std::filesystem::path> dir;

    void emit(const std::string& name, const std::string& body, bool stdout_fallback) const {
        if (dir) {
            atomic_write(*dir / name, body);
        } else if (stdout_fallback) {
            std::cout << body;
        }
    }
};

void write_manifest(const OutputSink& sink, const std::string& subcommand,
                    const std::string& config_text, const json& parameters,
                    const std::string& started_at) {
    if (!sink.dir) return;
    const json manifest{
        {"config_hash_fnv1a64", hex64(fnv1a64(config_text))},
        {"subcommand", subcommand},
        {"parameters", parameters},
        {"tool_version", kToolVersion},
        {"started_at", started_at},
        {"finished_at", utc_timestamp()},
    };
    atomic_write(*sink.dir / "manifest.json", manifest.dump(2) + "\n");
}

json perron_json(const mtbrw::PerronData& perron) {
    return json{{"rho", perron.rho},
                {"u", perron.u},
                {"v", perron.v},
                {"residual", perron.residual},
                {"iterations", perron.iterations}};
}

std::vector<int> one_based(const std::vector<int>& xs) {
    std::vector<int> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = xs[i] + 1;
    return out;
}

json analyze_json(const mtbrw::ModelSpec& spec) {
    const mtbrw::Matrix m = mtbrw::mean_matrix(spec);
    const mtbrw::SpectralAnalysis analysis = mtbrw::analyze_mean_matrix(m);
    const auto& decomp = analysis.decomp;

    json classes = json::array();
    for (int a = 0; a < decomp.num_classes(); ++a) {
        const mtbrw::Matrix block = decomp.block(m, a);
        const auto primitive =
            mtbrw::is_primitive(block, static_cast<int>(block.rows() * block.rows()) + 1);
        json entry{{"index", a + 1},
                   {"types", one_based(decomp.classes[a])},
                   {"perron", perron_json(analysis.class_perron[a])},
                   {"primitive_power", primitive ? json(*primitive) : json(nullptr)}};
        classes.push_back(entry);
    }

    json reaches = json::array();
    for (int a = 0; a < decomp.num_classes(); ++a) {
        json row = json::array();
        for (int b = 0; b < decomp.num_classes(); ++b) row.push_back(decomp.reaches[a][b]);
        reaches.push_back(row);
    }

    json per_type = json::array();
    for (int i = 0; i < spec.num_types; ++i)
        per_type.push_back(json{{"type", i + 1},
                                {"class_index", decomp.class_of[i] + 1},
                                {"rho_pre", analysis.rho_pre[i]},
                                {"k", analysis.growth_k[i]}});

    json matrix = json::array();
    for (int i = 0; i < spec.num_types; ++i) {
        json row = json::array();
        for (int j = 0; j < spec.num_types; ++j) row.push_back(m(i, j));
        matrix.push_back(row);
    }

    const bool all_rv = std::all_of(spec.tails.begin(), spec.tails.end(), [](const auto& t) {
        return t.family == mtbrw::TailFamily::kRegularlyVarying;
    });
    const bool all_se = std::all_of(spec.tails.begin(), spec.tails.end(), [](const auto& t) {
        return t.family == mtbrw::TailFamily::kSemiExponential;
    });

    json dominant(nullptr);
    if (all_rv) {
        try {
            const mtbrw::DominantPair pair = mtbrw::dominant_pair_heavy(analysis, spec.tails);
            dominant = json{{"class_index", pair.alpha_class + 1}, {"type", pair.type_I + 1},
                            {"rho", pair.rho},           {"r", pair.r},
                            {"k", pair.k},               {"unique", pair.unique}};
        } catch (const PreconditionError&) {
            // no class grows, nothing to report
        }
    }
    json semiexp(nullptr);
    if (all_se) {
        const mtbrw::SemiExpData data = mtbrw::dominant_data_semiexp(analysis, spec.tails);
        semiexp = json{{"r", data.r},
                       {"attaining_types", one_based(data.attaining_types)},
                       {"preceding_classes", one_based(data.preceding_classes)},
                       {"rho", data.rho}};
    }

    return json{{"num_types", spec.num_types},
                {"initial_type", spec.initial_type + 1},
                {"initial_class", decomp.class_of[spec.initial_type] + 1},
                {"mean_matrix", matrix},
                {"irreducible", decomp.irreducible()},
                {"classes", classes},
                {"reaches", reaches},
                {"per_type", per_type},
                {"dominant_pair_heavy", dominant},
                {"semiexp_data", semiexp}};
}

/// Growth data for the scale sequence, restricted to what the initial
/// particle can reach.
struct ScaleChoice {
    bool heavy = false;
    mtbrw::DominantPair dominant;   // heavy
    mtbrw::SemiExpData semiexp;     // stretched
};

ScaleChoice choose_scale(const mtbrw::ModelSpec& spec, const mtbrw::SpectralAnalysis& analysis) {
    const bool all_rv = std::all_of(spec.tails.begin(), spec.tails.end(), [](const auto& t) {
        return t.family == mtbrw::TailFamily::kRegularlyVarying;
    });
    const bool all_se = std::all_of(spec.tails.begin(), spec.tails.end(), [](const auto& t) {
        return t.family == mtbrw::TailFamily::kSemiExponential;
    });
    if (!all_rv && !all_se)
        throw PreconditionError(
            "normalization needs all tails in one family (regularly varying or semi-exponential)");
    const int from_class = analysis.decomp.class_of[spec.initial_type];
    ScaleChoice choice;
    choice.heavy = all_rv;
    if (all_rv) {
        choice.dominant = mtbrw::dominant_pair_heavy(analysis, spec.tails, 1e-9, from_class);
        if (!choice.dominant.unique)
            throw PreconditionError("dominant (class, type) pair is not unique");
        if (!(choice.dominant.rho > 1.0))
            throw PreconditionError("dominant growth rate must exceed one");
    } else {
        choice.semiexp = mtbrw::dominant_data_semiexp(analysis, spec.tails, 1e-12, from_class);
        if (!(choice.semiexp.rho > 1.0))
            throw PreconditionError("driving growth rate must exceed one");
    }
    return choice;
}

std::string table_csv(const mtbrw::NormalizationTable& table) {
    std::string out = "n,value,residual\n";
    char line[128];
    for (const auto& row : table.rows) {
        std::snprintf(line, sizeof line, "%d,%.17g,%.17g\n", row.n, row.value, row.residual);
        out += line;
    }
    return out;
}

int cmd_analyze(const std::string& config_path, const OutputSink& sink) {
    const std::string started = utc_timestamp();
    const std::string text = read_file(config_path);
    const mtbrw::ModelSpec spec = mtbrw::model_from_json_text(text);
    const mtbrw::ValidationReport report = mtbrw::validate(spec);
    json doc = analyze_json(spec);
    json violations = json::array();
    for (const auto& v : report.violations)
        violations.push_back(json{{"code", v.code}, {"message", v.message}});
    doc["validation"] = violations;
    const std::string body = doc.dump(2) + "\n";
    sink.emit("report.json", body, true);
    write_manifest(sink, "analyze", text, json{{"config", config_path}}, started);
    return kExitOk;
}

int cmd_normalize(const std::string& config_path, std::vector<int> ns, const OutputSink& sink) {
    const std::string started = utc_timestamp();
    const std::string text = read_file(config_path);
    const mtbrw::ModelSpec spec = mtbrw::model_from_json_text(text);
    const mtbrw::ValidationReport vr = mtbrw::validate(spec);
    if (!vr.ok()) throw PreconditionError(vr.summary());
    std::sort(ns.begin(), ns.end());
    ns.erase(std::unique(ns.begin(), ns.end()), ns.end());

    const mtbrw::SpectralAnalysis analysis = mtbrw::analyze_mean_matrix(mtbrw::mean_matrix(spec));
    const ScaleChoice choice = choose_scale(spec, analysis);
    mtbrw::NormalizationTable table;
    json params{{"config", config_path}, {"n_list", ns}};
    json doc;
    if (choice.heavy) {
        table = mtbrw::a_n_table(ns, choice.dominant.rho, choice.dominant.k,
                                 spec.tails[choice.dominant.type_I]);
        doc["kind"] = "a_n";
        doc["rho"] = choice.dominant.rho;
        doc["k"] = choice.dominant.k;
        doc["type"] = choice.dominant.type_I + 1;
        doc["r"] = choice.dominant.r;
    } else {
        table = mtbrw::psi_table(ns, choice.semiexp.r, choice.semiexp.L_min_over);
        doc["kind"] = "psi";
        doc["rho"] = choice.semiexp.rho;
        doc["r"] = choice.semiexp.r;
        doc["attaining_types"] = one_based(choice.semiexp.attaining_types);
    }
    json rows = json::array();
    for (const auto& row : table.rows)
        rows.push_back(json{{"n", row.n}, {"value", row.value}, {"residual", row.residual}});
    doc["rows"] = rows;
    const std::string body = doc.dump(2) + "\n";
    sink.emit("report.json", body, true);
    sink.emit("normalize.csv", table_csv(table), false);
    write_manifest(sink, "normalize", text, params, started);
    return kExitOk;
}

int cmd_simulate(const std::string& config_path, int n, std::uint64_t trials, std::uint64_t seed,
                 std::uint64_t cap, bool track_ancestry, const OutputSink& sink) {
    const std::string started = utc_timestamp();
    const std::string text = read_file(config_path);
    const mtbrw::ModelSpec spec = mtbrw::model_from_json_text(text);
    const mtbrw::ValidationReport vr = mtbrw::validate(spec);
    if (!vr.ok()) throw PreconditionError(vr.summary());

    const mtbrw::SpectralAnalysis analysis = mtbrw::analyze_mean_matrix(mtbrw::mean_matrix(spec));
    const auto& decomp = analysis.decomp;
    const int from_class = decomp.class_of[spec.initial_type];
    // Count-based martingale estimate at the fastest reachable type; 0 when
    // nothing grows.
    std::optional<mtbrw::WEstimator> estimator;
    int best_type = -1;
    double best_rho = 1.0;
    for (int i = 0; i < spec.num_types; ++i) {
        if (!decomp.reaches[from_class][decomp.class_of[i]]) continue;
        double rho = 0.0;
        for (int a = 0; a < decomp.num_classes(); ++a)
            if (decomp.reaches[from_class][a] && decomp.reaches[a][decomp.class_of[i]])
                rho = std::max(rho, analysis.class_rho[a]);
        if (rho > best_rho) {
            best_rho = rho;
            best_type = i;
        }
    }
    if (best_type >= 0) {
        mtbrw::WEstimator est;
        est.mode = mtbrw::WEstimator::Mode::kTypeCount;
        est.rho = best_rho;
        est.type_I = best_type;
        est.k = mtbrw::growth_exponent(decomp, analysis.class_rho, best_type, 1e-9, from_class);
        estimator = est;
    }

    const int d = spec.num_types;
    std::string trials_csv = "trial,extinct,extinct_at,capped,R";
    for (int j = 0; j < d; ++j) trials_csv += ",M_" + std::to_string(j + 1);
    trials_csv += ",W_hat";
    for (int j = 0; j < d; ++j) trials_csv += ",Y_" + std::to_string(j + 1);
    for (int j = 0; j < d; ++j) trials_csv += ",Z_n_" + std::to_string(j + 1);
    trials_csv += "\n";
    std::string counts_csv = "trial,generation";
    for (int j = 0; j < d; ++j) counts_csv += ",Z_" + std::to_string(j + 1);
    counts_csv += "\n";

    mtbrw::TrialOptions opts;
    opts.horizon = n;
    opts.cap = cap;
    opts.track_ancestry = track_ancestry;
    char buf[64];
    for (std::uint64_t t = 0; t < trials; ++t) {
        mtbrw::CounterRng rng(seed, mtbrw::stream_ns::id(mtbrw::stream_ns::kTrials, t));
        mtbrw::TrialResult trial;
        try {
            trial = mtbrw::run_trial(spec, opts, rng);
        } catch (const PopulationCapExceeded& e) {
            trial = mtbrw::TrialResult{};
            trial.capped = true;
            trial.extinct_at = e.generation;
        }
        trials_csv += std::to_string(t);
        trials_csv += trial.extinct ? ",1," : ",0,";
        if (trial.extinct || trial.capped) trials_csv += std::to_string(trial.extinct_at);
        trials_csv += trial.capped ? ",1" : ",0";
        const bool has_position = !trial.extinct && !trial.capped;
        if (has_position) {
            std::snprintf(buf, sizeof buf, ",%.17g", trial.R);
            trials_csv += buf;
        } else {
            trials_csv += ",";
        }
        for (int j = 0; j < d; ++j) {
            if (has_position && std::isfinite(trial.max_disp[j])) {
                std::snprintf(buf, sizeof buf, ",%.17g", trial.max_disp[j]);
                trials_csv += buf;
            } else {
                trials_csv += ",";
            }
        }
        if (!trial.capped && estimator) {
            std::snprintf(buf, sizeof buf, ",%.17g", mtbrw::estimate_W(trial, *estimator));
            trials_csv += buf;
        } else {
            trials_csv += ",";
        }
        for (int j = 0; j < d; ++j) {
            if (trial.capped || !track_ancestry)
                trials_csv += ",";
            else
                trials_csv += "," + std::to_string(trial.Y[j]);
        }
        for (int j = 0; j < d; ++j) {
            if (trial.capped)
                trials_csv += ",";
            else
                trials_csv += "," + std::to_string(trial.Z[n][j]);
        }
        trials_csv += "\n";
        if (!trial.capped)
            for (int g = 0; g <= n; ++g) {
                counts_csv += std::to_string(t) + "," + std::to_string(g);
                for (int j = 0; j < d; ++j) counts_csv += "," + std::to_string(trial.Z[g][j]);
                counts_csv += "\n";
            }
    }

    sink.emit("trials.csv", trials_csv, true);
    sink.emit("counts.csv", counts_csv, false);
    write_manifest(sink, "simulate", text,
                   json{{"config", config_path},
                        {"n", n},
                        {"trials", trials},
                        {"seed", seed},
                        {"cap", cap},
                        {"track_ancestry", track_ancestry}},
                   started);
    return kExitOk;
}

int cmd_verify(const std::string& config_path, const std::string& theorem, std::vector<int> ns,
               std::uint64_t seed, const mtbrw::VerifyOptions& options, const OutputSink& sink) {
    const std::string started = utc_timestamp();
    const std::string text = read_file(config_path);
    const mtbrw::ModelSpec spec = mtbrw::model_from_json_text(text);
    if (ns.empty()) throw ConfigError("verify needs --n or --n-list");

    const json params{{"config", config_path}, {"theorem", theorem},   {"n_list", ns},
                      {"seed", seed},          {"trials", options.trials},
                      {"zeta_depth", options.zeta_depth}, {"zeta_trials", options.zeta_trials},
                      {"zeta_from_one", options.zeta_from_depth_one},
                      {"grid_points", options.grid_points}, {"bootstrap", options.bootstrap},
                      {"cap", options.cap}};

    std::string report_body;
    std::string csv_body;
    if (theorem == "1" || theorem == "3" || theorem == "heavy") {
        const mtbrw::HeavyReport report = mtbrw::verify_heavy(spec, ns.back(), seed, options);
        report_body = report.to_json_text();
        csv_body = report.cdf_csv();
    } else if (theorem == "2" || theorem == "4" || theorem == "semiexp") {
        const mtbrw::SemiExpReport report = mtbrw::verify_semiexp(spec, ns, seed, options);
        report_body = report.to_json_text();
        csv_body = report.cdf_csv();
    } else if (theorem == "lemma-Y") {
        const mtbrw::TotalPopulationReport report =
            mtbrw::verify_total_population(spec, ns.back(), seed, options);
        report_body = report.to_json_text();
        csv_body = report.cdf_csv();
    } else {
        throw ConfigError("unknown --theorem value: " + theorem +
                          " (expected 1, 2, 3, 4, heavy, semiexp, or lemma-Y)");
    }

    sink.emit("report.json", report_body, true);
    sink.emit("cdf.csv", csv_body, false);
    write_manifest(sink, "verify", text, params, started);
    return kExitOk;
}

int cmd_zeta(const std::string& config_path, int type_1based, std::uint64_t seed,
             const mtbrw::ZetaOptions& zopts, const OutputSink& sink) {
    const std::string started = utc_timestamp();
    const std::string text = read_file(config_path);
    const mtbrw::ModelSpec spec = mtbrw::model_from_json_text(text);
    const mtbrw::ValidationReport vr = mtbrw::validate(spec);
    if (!vr.ok()) throw PreconditionError(vr.summary());
    if (type_1based < 1 || type_1based > spec.num_types)
        throw ConfigError("--type out of range");

    const mtbrw::SpectralAnalysis analysis = mtbrw::analyze_mean_matrix(mtbrw::mean_matrix(spec));
    const mtbrw::ZetaEstimate estimate =
        mtbrw::estimate_zeta(spec, analysis, type_1based - 1, seed, zopts);

    json doc{{"start_type", estimate.start_type + 1},
             {"depth", estimate.depth},
             {"trials", estimate.trials},
             {"rho", estimate.rho},
             {"prefactor", estimate.prefactor},
             {"prefactor_mode",
              estimate.prefactor_mode == mtbrw::ZetaPrefactor::kLeftEigenvector
                  ? "left_eigenvector"
                  : "one"},
             {"from_depth_one", estimate.from_depth_one},
             {"series_alive", estimate.series_alive},
             {"series_alive_se", estimate.series_alive_se},
             {"series_per_type_sum", estimate.series_per_type_sum},
             {"value", estimate.value},
             {"value_per_type_sum", estimate.value_per_type_sum},
             {"truncation_bound", estimate.truncation_bound}};
    json rows = json::array();
    for (const auto& row : estimate.rows)
        rows.push_back(json{{"weight", row.weight},
                            {"p_alive", row.p_alive},
                            {"p_alive_half_width", row.p_alive_half_width},
                            {"p_type", row.p_type},
                            {"p_type_half_width", row.p_type_half_width}});
    doc["survival_rows"] = rows;
    const std::string body = doc.dump(2) + "\n";
    sink.emit("report.json", body, true);
    write_manifest(sink, "zeta", text,
                   json{{"config", config_path},
                        {"type", type_1based},
                        {"seed", seed},
                        {"depth", zopts.depth},
                        {"trials", zopts.trials},
                        {"prefactor",
                         zopts.prefactor == mtbrw::ZetaPrefactor::kLeftEigenvector
                             ? "left_eigenvector"
                             : "one"},
                        {"from_depth_one", zopts.from_depth_one}},
                   started);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-type branching random walk: simulation and limit-law verification"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::string theorem;
    std::string prefactor_name = "one";
    std::vector<int> n_list;
    int n_single = 0;
    int zeta_type = 1;
    std::uint64_t seed = 0;
    bool track_ancestry = false;
    bool zeta_from_one = false;
    mtbrw::VerifyOptions verify_options;
    mtbrw::ZetaOptions zeta_options;

    auto add_common = [&](CLI::App* cmd, bool need_out_option) {
        cmd->add_option("--config", config_path, "model configuration (JSON)")->required();
        if (need_out_option) cmd->add_option("--out", out_dir, "output directory");
    };

    CLI::App* analyze = app.add_subcommand("analyze", "class and spectral report");
    add_common(analyze, true);

    CLI::App* normalize = app.add_subcommand("normalize", "scale sequence a_n or psi(n)");
    add_common(normalize, true);
    normalize->add_option("--n", n_single, "single horizon");
    normalize->add_option("--n-list", n_list, "horizons")->delimiter(',');

    CLI::App* simulate = app.add_subcommand("simulate", "raw trial data as CSV");
    add_common(simulate, true);
    simulate->add_option("--n", n_single, "horizon")->required();
    simulate->add_option("--trials", verify_options.trials, "number of trials")->required();
    simulate->add_option("--seed", seed, "master seed")->required();
    simulate->add_option("--cap", verify_options.cap, "population cap per trial");
    simulate->add_flag("--track-ancestry", track_ancestry, "emit ancestral-population counts");

    CLI::App* verify = app.add_subcommand("verify", "statistical limit-law check");
    add_common(verify, true);
    verify->add_option("--theorem", theorem, "1|2|3|4|heavy|semiexp|lemma-Y")->required();
    verify->add_option("--n", n_single, "horizon");
    verify->add_option("--n-list", n_list, "horizons (semiexp mode)")->delimiter(',');
    verify->add_option("--trials", verify_options.trials, "number of trials");
    verify->add_option("--seed", seed, "master seed")->required();
    verify->add_option("--cap", verify_options.cap, "population cap per trial");
    verify->add_option("--zeta-depth", verify_options.zeta_depth, "series truncation depth");
    verify->add_option("--zeta-trials", verify_options.zeta_trials, "subtrees per depth series");
    verify->add_flag("--zeta-from-one", verify_options.zeta_from_depth_one,
                     "start the series at depth 1 instead of 0");
    verify->add_option("--grid-points", verify_options.grid_points, "comparison grid size");
    verify->add_option("--bootstrap", verify_options.bootstrap, "bootstrap replicates");

    CLI::App* zeta = app.add_subcommand("zeta", "scale-constant series estimate");
    add_common(zeta, true);
    zeta->add_option("--type", zeta_type, "start type (1-based)")->required();
    zeta->add_option("--seed", seed, "master seed")->required();
    zeta->add_option("--depth", zeta_options.depth, "series truncation depth");
    zeta->add_option("--trials", zeta_options.trials, "subtree count");
    zeta->add_option("--cap", zeta_options.cap, "population cap per subtree");
    zeta->add_option("--prefactor", prefactor_name, "one|left-eigenvector");
    zeta->add_flag("--zeta-from-one", zeta_from_one, "start the series at depth 1 instead of 0");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        OutputSink sink;
        if (!out_dir.empty()) {
            std::filesystem::create_directories(out_dir);
            sink.dir = out_dir;
        }
        if (!n_list.empty() && n_single > 0) n_list.push_back(n_single);
        if (n_list.empty() && n_single > 0) n_list = {n_single};
        std::sort(n_list.begin(), n_list.end());
        n_list.erase(std::unique(n_list.begin(), n_list.end()), n_list.end());

        if (app.got_subcommand(analyze)) return cmd_analyze(config_path, sink);
        if (app.got_subcommand(normalize)) {
            if (n_list.empty()) throw ConfigError("normalize needs --n or --n-list");
            return cmd_normalize(config_path, n_list, sink);
        }
        if (app.got_subcommand(simulate))
            return cmd_simulate(config_path, n_single, verify_options.trials, seed,
                                verify_options.cap, track_ancestry, sink);
        if (app.got_subcommand(verify))
            return cmd_verify(config_path, theorem, n_list, seed, verify_options, sink);
        if (app.got_subcommand(zeta)) {
            zeta_options.from_depth_one = zeta_from_one;
            if (prefactor_name == "left-eigenvector")
                zeta_options.prefactor = mtbrw::ZetaPrefactor::kLeftEigenvector;
            else if (prefactor_name != "one")
                throw ConfigError("unknown --prefactor value: " + prefactor_name);
            return cmd_zeta(config_path, zeta_type, seed, zeta_options, sink);
        }
        return kExitConfig;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const PreconditionError& e) {
        std::cerr << "precondition violation: " << e.what() << "\n";
        return kExitPrecondition;
    } catch (const PopulationCapExceeded& e) {
        std::cerr << "runtime limit: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const Unsolvable& e) {
        std::cerr << "runtime limit: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const NonConvergence& e) {
        std::cerr << "runtime limit: " << e.what() << "\n";
        return kExitRuntime;
    }
}
