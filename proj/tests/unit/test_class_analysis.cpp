#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <doctest.h>

#include "mtbrw/class_analysis.hpp"
#include "mtbrw/errors.hpp"
#include "mtbrw/matrix.hpp"
#include "mtbrw/rng.hpp"
#include "mtbrw/tails.hpp"

using mtbrw::ClassDecomposition;
using mtbrw::CounterRng;
using mtbrw::DominantPair;
using mtbrw::Matrix;
using mtbrw::PerronData;
using mtbrw::SemiExpData;
using mtbrw::SpectralAnalysis;
using mtbrw::TailFamily;
using mtbrw::TailSpec;

namespace {

Matrix from_rows(const std::vector<std::vector<double>>& rows) {
    Matrix m(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
    return m;
}

double perron_residual(const Matrix& m, const PerronData& p) {
    double res = 0.0;
    const std::size_t d = m.rows();
    for (std::size_t i = 0; i < d; ++i) {
        double mv = 0.0, um = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            mv += m(i, j) * p.v[j];
            um += p.u[j] * m(j, i);
        }
        res = std::max(res, std::abs(mv - p.rho * p.v[i]));
        res = std::max(res, std::abs(um - p.rho * p.u[i]));
    }
    return res / p.rho;
}

TailSpec rv(double r) {
    TailSpec t;
    t.family = TailFamily::kRegularlyVarying;
    t.r = r;
    return t;
}

TailSpec se(double r) {
    TailSpec t;
    t.family = TailFamily::kSemiExponential;
    t.r = r;
    return t;
}

/// Log of E[count at `type` after n steps from `from`], via scaled powers so
/// nothing overflows.
double log_mean_count(const Matrix& m, int from, int type, int n) {
    const std::size_t d = m.rows();
    const double scale = m.max_entry();
    std::vector<double> x(d, 0.0);
    x[from] = 1.0;
    double log_carried = 0.0;
    for (int step = 0; step < n; ++step) {
        std::vector<double> y(d, 0.0);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) y[j] += x[i] * m(i, j) / scale;
        x.swap(y);
        log_carried += std::log(scale);
    }
    return x[type] > 0.0 ? std::log(x[type]) + log_carried
                         : -std::numeric_limits<double>::infinity();
}

}  // namespace

TEST_CASE("perron data on three worked matrices") {
    const Matrix single = from_rows({{2.0}});
    const PerronData p1 = mtbrw::perron(single);
    CHECK(p1.rho == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(p1.u == std::vector<double>{1.0});
    CHECK(p1.v == std::vector<double>{1.0});

    // [[1,2],[3,2]]: rho 4, right eigenvector (2,3), left eigenvector (1,1).
    const Matrix two = from_rows({{1.0, 2.0}, {3.0, 2.0}});
    const PerronData p2 = mtbrw::perron(two);
    CHECK(p2.rho == doctest::Approx(4.0).epsilon(1e-10));
    CHECK(p2.v[0] == doctest::Approx(0.4).epsilon(1e-9));
    CHECK(p2.v[1] == doctest::Approx(0.6).epsilon(1e-9));
    CHECK(p2.u[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(p2.u[1] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(perron_residual(two, p2) <= 1e-10);

    // Periodic block: the plain power method cycles, the shifted one must not.
    const Matrix periodic = from_rows({{0.0, 2.0}, {2.0, 0.0}});
    const PerronData p3 = mtbrw::perron(periodic);
    CHECK(p3.rho == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(p3.v[0] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(p3.v[1] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(p3.u[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(p3.u[1] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(perron_residual(periodic, p3) <= 1e-10);
}

TEST_CASE("perron normalization invariants hold on random irreducible blocks") {
    CounterRng rng(11, mtbrw::stream_ns::id(mtbrw::stream_ns::kAuxBatch, 50));
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t d = 2 + trial % 4;
        Matrix m(d, d);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) m(i, j) = 0.1 + 2.9 * rng.next_uniform();
        const PerronData p = mtbrw::perron(m);
        double norm_v = 0.0, uv = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            CHECK(p.v[i] > 0.0);
            CHECK(p.u[i] > 0.0);
            norm_v += std::abs(p.v[i]);
            uv += p.u[i] * p.v[i];
        }
        CHECK(norm_v == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(uv == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(perron_residual(m, p) <= 1e-9);
    }
}

TEST_CASE("condense finds classes in topological order with exact zero fill") {
    // Types 0<->2 form one class feeding type 1, which feeds the class 3<->4.
    Matrix m(5, 5);
    m(0, 2) = 1.5;
    m(2, 0) = 0.5;
    m(0, 1) = 1.0;   // class {0,2} -> class {1}
    m(1, 1) = 3.0;
    m(1, 3) = 0.25;  // class {1} -> class {3,4}
    m(3, 4) = 1.0;
    m(4, 3) = 1.0;

    const ClassDecomposition decomp = mtbrw::condense(m);
    REQUIRE(decomp.num_classes() == 3);
    CHECK(decomp.classes[0] == std::vector<int>{0, 2});
    CHECK(decomp.classes[1] == std::vector<int>{1});
    CHECK(decomp.classes[2] == std::vector<int>{3, 4});
    CHECK(decomp.class_of == std::vector<int>{0, 1, 0, 2, 2});

    CHECK(decomp.reaches[0][0]);
    CHECK(decomp.reaches[0][1]);
    CHECK(decomp.reaches[0][2]);
    CHECK_FALSE(decomp.reaches[1][0]);
    CHECK(decomp.reaches[1][2]);
    CHECK_FALSE(decomp.reaches[2][0]);
    CHECK_FALSE(decomp.reaches[2][1]);

    // Block upper triangular after permutation, with exact zeros below.
    const Matrix p = decomp.permuted(m);
    const std::vector<int> offsets{0, 2, 3, 5};
    for (int ci = 0; ci < 3; ++ci)
        for (int cj = 0; cj < ci; ++cj)
            for (int i = offsets[ci]; i < offsets[ci + 1]; ++i)
                for (int j = offsets[cj]; j < offsets[cj + 1]; ++j) CHECK(p(i, j) == 0.0);

    // Condensing an already condensed ordering changes nothing.
    const ClassDecomposition again = mtbrw::condense(p);
    CHECK(again.num_classes() == 3);
    CHECK(again.classes[0].size() == 2);
    CHECK(again.classes[1].size() == 1);
    CHECK(again.classes[2].size() == 2);

    const SpectralAnalysis analysis = mtbrw::analyze_mean_matrix(m);
    CHECK(analysis.class_rho[0] == doctest::Approx(std::sqrt(0.75)).epsilon(1e-9));
    CHECK(analysis.class_rho[1] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(analysis.class_rho[2] == doctest::Approx(1.0).epsilon(1e-9));
    // rho seen at a type is the max over classes that reach it.
    CHECK(analysis.rho_pre[0] == doctest::Approx(std::sqrt(0.75)).epsilon(1e-9));
    CHECK(analysis.rho_pre[1] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(analysis.rho_pre[3] == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("primitivity index of small blocks") {
    CHECK(mtbrw::is_primitive(from_rows({{2.0}}), 2) == 1);
    CHECK(mtbrw::is_primitive(from_rows({{1.0, 1.0}, {1.0, 0.0}}), 5) == 2);
    CHECK(mtbrw::is_primitive(from_rows({{0.0, 2.0}, {2.0, 0.0}}), 100) == std::nullopt);
    CHECK(mtbrw::is_primitive(from_rows({{0.0, 1.0}, {0.0, 0.0}}), 100) == std::nullopt);
    CHECK(mtbrw::is_primitive(from_rows({{1.0, 2.0}, {3.0, 2.0}}), 5) == 1);
}

TEST_CASE("growth exponents match slopes of exact mean counts") {
    struct GrowthCase {
        Matrix m;
        int type;
        double rho;
        int k;
    };
    const std::vector<GrowthCase> cases{
        {from_rows({{2.0}}), 0, 2.0, 0},
        {from_rows({{2.0, 1.0}, {0.0, 2.0}}), 1, 2.0, 1},
        {from_rows({{3.0, 1.0}, {0.0, 1.5}}), 1, 3.0, 0},
    };
    for (const auto& c : cases) {
        const SpectralAnalysis analysis = mtbrw::analyze_mean_matrix(c.m);
        CHECK(analysis.rho_pre[c.type] == doctest::Approx(c.rho).epsilon(1e-9));
        CHECK(analysis.growth_k[c.type] == c.k);

        // Slope of log(E count) - n log rho against log n over n = 32..256.
        const double y1 = log_mean_count(c.m, 0, c.type, 32) - 32 * std::log(c.rho);
        const double y2 = log_mean_count(c.m, 0, c.type, 256) - 256 * std::log(c.rho);
        const double slope = (y2 - y1) / (std::log(256.0) - std::log(32.0));
        CHECK(std::abs(slope - c.k) <= 0.15);
    }
}

TEST_CASE("growth exponent respects the starting class") {
    const Matrix m = from_rows({{2.0, 1.0}, {0.0, 2.0}});
    const ClassDecomposition decomp = mtbrw::condense(m);
    const std::vector<double> rho{2.0, 2.0};
    CHECK(mtbrw::growth_exponent(decomp, rho, 1) == 1);
    // Started inside the second class, the first one never contributes.
    CHECK(mtbrw::growth_exponent(decomp, rho, 1, 1e-9, decomp.class_of[1]) == 0);
    CHECK(mtbrw::growth_exponent(decomp, rho, 0) == 0);
}

TEST_CASE("dominant heavy pair agrees with a brute-force scan") {
    CounterRng rng(123, mtbrw::stream_ns::id(mtbrw::stream_ns::kAuxBatch, 60));
    const std::vector<double> r_choices{0.8, 1.7, 2.5, 3.1, 4.2};
    int degenerate = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int d = 5;
        Matrix m(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                if (rng.next_uniform() < 0.35) m(i, j) = 0.2 + 2.8 * rng.next_uniform();
        std::vector<TailSpec> tails;
        for (int i = 0; i < d; ++i)
            tails.push_back(rv(r_choices[rng.next_u64() % r_choices.size()]));

        const SpectralAnalysis analysis = mtbrw::analyze_mean_matrix(m);
        const auto& decomp = analysis.decomp;

        double best = -std::numeric_limits<double>::infinity();
        int achievers = 0;
        for (int a = 0; a < decomp.num_classes(); ++a) {
            if (analysis.class_rho[a] <= 0.0) continue;
            for (int i = 0; i < d; ++i) {
                if (!decomp.reaches[a][decomp.class_of[i]]) continue;
                const double score = std::log(analysis.class_rho[a]) / tails[i].r;
                if (score > best + 1e-9) {
                    best = score;
                    achievers = 1;
                } else if (score > best - 1e-9) {
                    ++achievers;
                }
            }
        }
        if (achievers == 0) {
            ++degenerate;  // every class has rate zero
            CHECK_THROWS_AS(mtbrw::dominant_pair_heavy(analysis, tails),
                            mtbrw::PreconditionError);
            continue;
        }
        const DominantPair pair = mtbrw::dominant_pair_heavy(analysis, tails);
        CHECK(std::log(pair.rho) / pair.r == doctest::Approx(best).epsilon(1e-9));
        CHECK(pair.rho == analysis.class_rho[pair.alpha_class]);
        CHECK(pair.r == tails[pair.type_I].r);
        CHECK(decomp.reaches[pair.alpha_class][decomp.class_of[pair.type_I]]);
        CHECK(pair.unique == (achievers == 1));
    }
    CHECK(degenerate < 30);  // the scan must mostly exercise the real path
}

TEST_CASE("dominant pair restricted to the initial class ignores unreachable growth") {
    // Two disconnected classes; the faster one cannot be seeded from type 1.
    const Matrix m = from_rows({{2.0, 0.0}, {0.0, 3.0}});
    const SpectralAnalysis analysis = mtbrw::analyze_mean_matrix(m);
    const std::vector<TailSpec> tails{rv(2.0), rv(2.0)};

    const DominantPair global = mtbrw::dominant_pair_heavy(analysis, tails);
    CHECK(global.rho == doctest::Approx(3.0));

    const int start_class = analysis.decomp.class_of[0];
    const DominantPair local = mtbrw::dominant_pair_heavy(analysis, tails, 1e-9, start_class);
    CHECK(local.rho == doctest::Approx(2.0));
    CHECK(local.type_I == 0);
}

TEST_CASE("semi-exponential data collects attaining types and preceding classes") {
    // Chain 0 -> 1 -> 2 with distinct exponents; the minimum r sits at type 1.
    Matrix m(3, 3);
    m(0, 0) = 2.0;
    m(0, 1) = 1.0;
    m(1, 1) = 1.2;
    m(1, 2) = 1.0;
    m(2, 2) = 3.0;
    const SpectralAnalysis analysis = mtbrw::analyze_mean_matrix(m);
    const std::vector<TailSpec> tails{se(0.7), se(0.4), se(0.6)};

    const SemiExpData data = mtbrw::dominant_data_semiexp(analysis, tails);
    CHECK(data.r == doctest::Approx(0.4));
    CHECK(data.attaining_types == std::vector<int>{1});
    // Classes {0} and {1} reach type 1; class {2} does not.
    CHECK(data.preceding_classes == std::vector<int>{0, 1});
    CHECK(data.rho == doctest::Approx(2.0));

    // Started at type 2 only its own class is in play.
    const SemiExpData from_last =
        mtbrw::dominant_data_semiexp(analysis, tails, 1e-12, analysis.decomp.class_of[2]);
    CHECK(from_last.r == doctest::Approx(0.6));
    CHECK(from_last.attaining_types == std::vector<int>{2});
    CHECK(from_last.rho == doctest::Approx(3.0));
}
