#include "mtbrw/model.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mtbrw/class_analysis.hpp"
#include "mtbrw/errors.hpp"

namespace mtbrw {

using nlohmann::json;

OffspringLaw OffspringLaw::deterministic(std::int64_t count) {
    OffspringLaw law;
    law.kind = OffspringKind::kDeterministic;
    law.count = count;
    return law;
}

OffspringLaw OffspringLaw::bernoulli_shifted(double p) {
    OffspringLaw law;
    law.kind = OffspringKind::kBernoulliShifted;
    law.p = p;
    return law;
}

OffspringLaw OffspringLaw::poisson(double lambda) {
    OffspringLaw law;
    law.kind = OffspringKind::kPoisson;
    law.lambda = lambda;
    return law;
}

OffspringLaw OffspringLaw::geometric(double p) {
    OffspringLaw law;
    law.kind = OffspringKind::kGeometric;
    law.p = p;
    return law;
}

OffspringLaw OffspringLaw::binomial(std::int64_t trials, double p) {
    OffspringLaw law;
    law.kind = OffspringKind::kBinomial;
    law.trials = trials;
    law.p = p;
    return law;
}

double OffspringLaw::mean() const {
    switch (kind) {
        case OffspringKind::kDeterministic: return static_cast<double>(count);
        case OffspringKind::kBernoulliShifted: return 1.0 + p;
        case OffspringKind::kPoisson: return lambda;
        case OffspringKind::kGeometric: return (1.0 - p) / p;
        case OffspringKind::kBinomial: return static_cast<double>(trials) * p;
    }
    return 0.0;
}

double OffspringLaw::pmf(std::uint64_t k) const {
    const double kd = static_cast<double>(k);
    switch (kind) {
        case OffspringKind::kDeterministic:
            return k == static_cast<std::uint64_t>(count) ? 1.0 : 0.0;
        case OffspringKind::kBernoulliShifted:
            if (k == 1) return 1.0 - p;
            if (k == 2) return p;
            return 0.0;
        case OffspringKind::kPoisson:
            if (lambda == 0.0) return k == 0 ? 1.0 : 0.0;
            return std::exp(kd * std::log(lambda) - lambda - std::lgamma(kd + 1.0));
        case OffspringKind::kGeometric:
            return p * std::pow(1.0 - p, kd);
        case OffspringKind::kBinomial: {
            if (k > static_cast<std::uint64_t>(trials)) return 0.0;
            const double n = static_cast<double>(trials);
            if (p == 0.0) return k == 0 ? 1.0 : 0.0;
            if (p == 1.0) return kd == n ? 1.0 : 0.0;
            const double log_pmf = std::lgamma(n + 1.0) - std::lgamma(kd + 1.0) -
                                   std::lgamma(n - kd + 1.0) + kd * std::log(p) +
                                   (n - kd) * std::log1p(-p);
            return std::exp(log_pmf);
        }
    }
    return 0.0;
}

double OffspringLaw::mass_at_zero() const {
    switch (kind) {
        case OffspringKind::kDeterministic: return count == 0 ? 1.0 : 0.0;
        case OffspringKind::kBernoulliShifted: return 0.0;
        case OffspringKind::kPoisson: return std::exp(-lambda);
        case OffspringKind::kGeometric: return p;
        case OffspringKind::kBinomial:
            if (trials == 0 || p == 0.0) return 1.0;
            return std::pow(1.0 - p, static_cast<double>(trials));
    }
    return 0.0;
}

namespace {

std::uint64_t sample_poisson_knuth(double lambda, CounterRng& rng) {
    const double limit = std::exp(-lambda);
    std::uint64_t k = 0;
    double prod = rng.next_uniform();
    while (prod > limit) {
        ++k;
        prod *= rng.next_uniform();
    }
    return k;
}

}  // namespace

std::uint64_t OffspringLaw::sample(CounterRng& rng) const {
    switch (kind) {
        case OffspringKind::kDeterministic:
            return static_cast<std::uint64_t>(count);
        case OffspringKind::kBernoulliShifted:
            return rng.next_uniform() < p ? 2 : 1;
        case OffspringKind::kPoisson: {
            // Knuth's product method, split into chunks so the e^-lambda
            // threshold never underflows.
            double remaining = lambda;
            std::uint64_t total = 0;
            while (remaining > 16.0) {
                total += sample_poisson_knuth(16.0, rng);
                remaining -= 16.0;
            }
            return total + sample_poisson_knuth(remaining, rng);
        }
        case OffspringKind::kGeometric: {
            if (p >= 1.0) return 0;
            const double u = rng.next_uniform();
            return static_cast<std::uint64_t>(std::log(u) / std::log1p(-p));
        }
        case OffspringKind::kBinomial: {
            std::uint64_t k = 0;
            for (std::int64_t i = 0; i < trials; ++i)
                if (rng.next_uniform() < p) ++k;
            return k;
        }
    }
    return 0;
}

Matrix mean_matrix(const ModelSpec& spec) {
    const int d = spec.num_types;
    Matrix m(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = spec.offspring[i][j].mean();
    return m;
}

std::string ValidationReport::summary() const {
    std::ostringstream out;
    for (std::size_t i = 0; i < violations.size(); ++i) {
        if (i) out << "; ";
        out << violations[i].code << ": " << violations[i].message;
    }
    return out.str();
}

namespace {

void check_law(const OffspringLaw& law, int i, int j, ValidationReport& report) {
    const std::string where =
        "offspring[" + std::to_string(i + 1) + "][" + std::to_string(j + 1) + "]";
    auto bad = [&](const std::string& msg) {
        report.violations.push_back({"offspring_param", where + ": " + msg});
    };
    switch (law.kind) {
        case OffspringKind::kDeterministic:
            if (law.count < 0) bad("deterministic count must be >= 0");
            break;
        case OffspringKind::kBernoulliShifted:
            if (!(law.p >= 0.0 && law.p <= 1.0)) bad("bernoulli_shifted p must be in [0, 1]");
            break;
        case OffspringKind::kPoisson:
            if (!(law.lambda >= 0.0) || !std::isfinite(law.lambda))
                bad("poisson lambda must be finite and >= 0");
            break;
        case OffspringKind::kGeometric:
            if (!(law.p > 0.0 && law.p <= 1.0)) bad("geometric p must be in (0, 1]");
            break;
        case OffspringKind::kBinomial:
            if (law.trials < 0) bad("binomial trial count must be >= 0");
            if (!(law.p >= 0.0 && law.p <= 1.0)) bad("binomial p must be in [0, 1]");
            break;
    }
    if (!std::isfinite(law.mean()))
        report.violations.push_back({"mean_not_finite", where + ": mean is not finite"});
}

void check_tail(const TailSpec& tail, int j, ValidationReport& report) {
    const std::string where = "tails[" + std::to_string(j + 1) + "]";
    auto add = [&](const std::string& code, const std::string& msg) {
        report.violations.push_back({code, where + ": " + msg});
    };
    if (!(tail.L.c > 0.0) || !std::isfinite(tail.L.c) || !std::isfinite(tail.L.beta))
        add("tail_param", "L must have finite parameters with c > 0");
    if (tail.family == TailFamily::kRegularlyVarying) {
        if (!(tail.r > 0.0)) add("tail_exponent", "regularly varying exponent must be > 0");
    } else {
        if (!(tail.r > 0.0 && tail.r < 1.0))
            add("tail_exponent", "semi-exponential exponent must be in (0, 1)");
        if (tail.L.beta < 0.0)
            add("semiexp_L_decreasing",
                "semi-exponential L must be nondecreasing (beta >= 0)");
        if (!(tail.a.c > 0.0) || !std::isfinite(tail.a.c) || !std::isfinite(tail.a.beta))
            add("tail_param", "a must have finite parameters with c > 0");
    }
    if (tail.left) {
        if (!(tail.left->rate > 0.0)) add("tail_param", "left tail rate must be > 0");
        if (!(tail.left->weight >= 0.0 && tail.left->weight < 1.0))
            add("tail_param", "left tail weight must be in [0, 1)");
    }

    // The quantile inverts the survival by bisection, which needs S to be
    // nonincreasing; extreme slowly-varying parameters can break that.
    double prev = 1.0;
    bool monotone = true;
    for (int g = 0; g <= 1000 && monotone; ++g) {
        const double x = 1e-6 * std::pow(1e15, g / 1000.0);
        const double s = tail.survival(x);
        if (s > prev + 1e-12) monotone = false;
        prev = s;
    }
    if (!monotone) add("survival_not_monotone", "survival increases somewhere on (0, 1e9)");
}

/// Types whose lineage within the given class a.s. never dies: the greatest
/// fixpoint of "a.s. has at least one child of a type in the set".
std::vector<bool> sure_survivors(const ModelSpec& spec, const std::vector<int>& class_types) {
    std::vector<bool> in_set(spec.num_types, false);
    for (int t : class_types) in_set[t] = true;
    bool changed = true;
    while (changed) {
        changed = false;
        for (int i : class_types) {
            if (!in_set[i]) continue;
            double mass_no_child = 1.0;
            for (int j : class_types)
                if (in_set[j]) mass_no_child *= spec.offspring[i][j].mass_at_zero();
            if (mass_no_child > 0.0) {
                in_set[i] = false;
                changed = true;
            }
        }
    }
    return in_set;
}

}  // namespace

ValidationReport validate(const ModelSpec& spec, const ValidationOptions& options) {
    ValidationReport report;
    const int d = spec.num_types;
    if (d < 1) {
        report.violations.push_back({"bad_shape", "model needs at least one type"});
        return report;
    }
    if (static_cast<int>(spec.offspring.size()) != d ||
        static_cast<int>(spec.tails.size()) != d) {
        report.violations.push_back({"bad_shape", "offspring must be d x d and tails length d"});
        return report;
    }
    for (const auto& row : spec.offspring)
        if (static_cast<int>(row.size()) != d) {
            report.violations.push_back({"bad_shape", "offspring must be d x d"});
            return report;
        }
    if (spec.initial_type < 0 || spec.initial_type >= d) {
        report.violations.push_back({"bad_initial_type", "initial type out of range"});
        return report;
    }

    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) check_law(spec.offspring[i][j], i, j, report);
    for (int j = 0; j < d; ++j) check_tail(spec.tails[j], j, report);
    if (!report.ok()) return report;  // spectral checks need sane parameters

    const SpectralAnalysis analysis = analyze_mean_matrix(mean_matrix(spec));
    const int initial_class = analysis.decomp.class_of[spec.initial_type];
    // Growth is judged over everything the initial particle can seed, so a
    // transient initial class feeding a supercritical one passes.
    double reachable_rho = 0.0;
    for (int a = 0; a < analysis.decomp.num_classes(); ++a)
        if (analysis.decomp.reaches[initial_class][a])
            reachable_rho = std::max(reachable_rho, analysis.class_rho[a]);
    if (reachable_rho <= 1.0)
        report.violations.push_back(
            {"subcritical_initial_class",
             "largest growth rate reachable from the initial type is " +
                 std::to_string(reachable_rho) + ", needs > 1"});

    if (options.require_sure_survival) {
        const auto survivors =
            sure_survivors(spec, analysis.decomp.classes[initial_class]);
        if (!survivors[spec.initial_type])
            report.violations.push_back(
                {"extinction_possible", "the initial class can die out with positive probability"});
    }
    return report;
}

namespace {

void require_keys(const json& obj, const std::string& where,
                  const std::set<std::string>& required, const std::set<std::string>& optional) {
    if (!obj.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& item : obj.items()) {
        if (!required.count(item.key()) && !optional.count(item.key()))
            throw ConfigError("unknown key '" + item.key() + "' in " + where);
    }
    for (const auto& key : required)
        if (!obj.contains(key)) throw ConfigError(where + " is missing key '" + key + "'");
}

double get_number(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.at(key).is_number()) throw ConfigError(where + "." + key + " must be a number");
    return obj.at(key).get<double>();
}

std::int64_t get_integer(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.at(key).is_number_integer())
        throw ConfigError(where + "." + key + " must be an integer");
    return obj.at(key).get<std::int64_t>();
}

SlowlyVarying parse_slowly_varying(const json& obj, const std::string& where) {
    require_keys(obj, where, {}, {"c", "beta"});
    SlowlyVarying out;
    if (obj.contains("c")) out.c = get_number(obj, "c", where);
    if (obj.contains("beta")) out.beta = get_number(obj, "beta", where);
    return out;
}

OffspringLaw parse_offspring(const json& obj, const std::string& where) {
    require_keys(obj, where, {"kind"}, {"c", "p", "lambda", "n"});
    const std::string kind = obj.at("kind").is_string() ? obj.at("kind").get<std::string>() : "";
    auto only = [&](std::set<std::string> params) {
        params.insert("kind");
        require_keys(obj, where, params, {});
    };
    if (kind == "deterministic") {
        only({"c"});
        return OffspringLaw::deterministic(get_integer(obj, "c", where));
    }
    if (kind == "bernoulli_shifted") {
        only({"p"});
        return OffspringLaw::bernoulli_shifted(get_number(obj, "p", where));
    }
    if (kind == "poisson") {
        only({"lambda"});
        return OffspringLaw::poisson(get_number(obj, "lambda", where));
    }
    if (kind == "geometric") {
        only({"p"});
        return OffspringLaw::geometric(get_number(obj, "p", where));
    }
    if (kind == "binomial") {
        only({"n", "p"});
        return OffspringLaw::binomial(get_integer(obj, "n", where), get_number(obj, "p", where));
    }
    throw ConfigError(where + ": unknown offspring kind '" + kind + "'");
}

TailSpec parse_tail(const json& obj, const std::string& where) {
    require_keys(obj, where, {"family", "r"}, {"L", "a", "left"});
    TailSpec out;
    const std::string family =
        obj.at("family").is_string() ? obj.at("family").get<std::string>() : "";
    if (family == "regularly_varying") {
        out.family = TailFamily::kRegularlyVarying;
        if (obj.contains("a")) throw ConfigError("unknown key 'a' in " + where);
    } else if (family == "semi_exponential") {
        out.family = TailFamily::kSemiExponential;
    } else {
        throw ConfigError(where + ": unknown tail family '" + family + "'");
    }
    out.r = get_number(obj, "r", where);
    if (obj.contains("L")) out.L = parse_slowly_varying(obj.at("L"), where + ".L");
    if (obj.contains("a")) out.a = parse_slowly_varying(obj.at("a"), where + ".a");
    if (obj.contains("left")) {
        const json& left = obj.at("left");
        require_keys(left, where + ".left", {"rate", "weight"}, {});
        out.left = ExponentialLeft{get_number(left, "rate", where + ".left"),
                                   get_number(left, "weight", where + ".left")};
    }
    return out;
}

}  // namespace

ModelSpec model_from_json_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    require_keys(doc, "config", {"types", "offspring", "tails", "initial_type"}, {});

    ModelSpec spec;
    spec.num_types = static_cast<int>(get_integer(doc, "types", "config"));
    if (spec.num_types < 1) throw ConfigError("config.types must be >= 1");
    const int d = spec.num_types;

    const json& offspring = doc.at("offspring");
    if (!offspring.is_array() || static_cast<int>(offspring.size()) != d)
        throw ConfigError("config.offspring must be an array of " + std::to_string(d) + " rows");
    spec.offspring.resize(d);
    for (int i = 0; i < d; ++i) {
        const json& row = offspring.at(i);
        if (!row.is_array() || static_cast<int>(row.size()) != d)
            throw ConfigError("config.offspring[" + std::to_string(i + 1) + "] must have " +
                              std::to_string(d) + " entries");
        for (int j = 0; j < d; ++j)
            spec.offspring[i].push_back(parse_offspring(
                row.at(j),
                "offspring[" + std::to_string(i + 1) + "][" + std::to_string(j + 1) + "]"));
    }

    const json& tails = doc.at("tails");
    if (!tails.is_array() || static_cast<int>(tails.size()) != d)
        throw ConfigError("config.tails must be an array of " + std::to_string(d) + " entries");
    for (int j = 0; j < d; ++j)
        spec.tails.push_back(parse_tail(tails.at(j), "tails[" + std::to_string(j + 1) + "]"));

    const std::int64_t initial = get_integer(doc, "initial_type", "config");
    if (initial < 1 || initial > d)
        throw ConfigError("config.initial_type must be in [1, " + std::to_string(d) + "]");
    spec.initial_type = static_cast<int>(initial - 1);
    return spec;
}

ModelSpec model_from_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return model_from_json_text(buffer.str());
}

}  // namespace mtbrw
