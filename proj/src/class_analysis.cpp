#include "mtbrw/class_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mtbrw/errors.hpp"

namespace mtbrw {

namespace {

constexpr double kPerronRelResidual = 1e-10;
constexpr int kPerronMaxIter = 100000;

struct TarjanState {
    const std::vector<std::vector<int>>& adj;
    std::vector<int> index, low;
    std::vector<bool> on_stack;
    std::vector<int> stack;
    std::vector<std::vector<int>> sccs;  // emitted descendants first
    int counter = 0;

    explicit TarjanState(const std::vector<std::vector<int>>& adj)
        : adj(adj), index(adj.size(), -1), low(adj.size(), 0), on_stack(adj.size(), false) {}

    void visit(int v) {
        index[v] = low[v] = counter++;
        stack.push_back(v);
        on_stack[v] = true;
        for (int w : adj[v]) {
            if (index[w] < 0) {
                visit(w);
                low[v] = std::min(low[v], low[w]);
            } else if (on_stack[w]) {
                low[v] = std::min(low[v], index[w]);
            }
        }
        if (low[v] == index[v]) {
            sccs.emplace_back();
            int w;
            do {
                w = stack.back();
                stack.pop_back();
                on_stack[w] = false;
                sccs.back().push_back(w);
            } while (w != v);
        }
    }
};

/// One power-iteration solve: dominant eigenpair of `a`, certified by the
/// max-norm residual relative to the shifted-back eigenvalue.
std::vector<double> power_iterate(const Matrix& a, double shift, double* eigenvalue,
                                  double* residual, int* iterations) {
    const std::size_t d = a.rows();
    std::vector<double> v(d, 1.0 / static_cast<double>(d));
    double lambda = 0.0;
    for (int iter = 1; iter <= kPerronMaxIter; ++iter) {
        std::vector<double> w = a * v;
        double vv = 0.0, wv = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            vv += v[i] * v[i];
            wv += w[i] * v[i];
        }
        lambda = wv / vv;
        const double rho = std::max(lambda - shift, std::numeric_limits<double>::min());
        double res = 0.0;
        for (std::size_t i = 0; i < d; ++i) res = std::max(res, std::abs(w[i] - lambda * v[i]));
        if (res / rho <= 0.5 * kPerronRelResidual) {
            *eigenvalue = lambda;
            *residual = res / rho;
            *iterations = iter;
            return v;  // the residual certifies this iterate, not the next one
        }
        double norm = 0.0;
        for (double x : w) norm += std::abs(x);
        for (std::size_t i = 0; i < d; ++i) v[i] = w[i] / norm;
    }
    throw NonConvergence("power iteration did not reach residual " +
                         std::to_string(kPerronRelResidual));
}

}  // namespace

Matrix ClassDecomposition::block(const Matrix& m, int cls) const {
    const auto& members = classes[cls];
    Matrix b(members.size(), members.size());
    for (std::size_t i = 0; i < members.size(); ++i)
        for (std::size_t j = 0; j < members.size(); ++j) b(i, j) = m(members[i], members[j]);
    return b;
}

Matrix ClassDecomposition::permuted(const Matrix& m) const {
    Matrix p(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) p(i, j) = m(type_order[i], type_order[j]);
    return p;
}

ClassDecomposition condense(const Matrix& m) {
    const int d = static_cast<int>(m.rows());
    std::vector<std::vector<int>> adj(d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (m(i, j) > 0.0) adj[i].push_back(j);

    TarjanState tarjan(adj);
    for (int v = 0; v < d; ++v)
        if (tarjan.index[v] < 0) tarjan.visit(v);

    // Tarjan emits descendant classes first; reversing yields a topological
    // order with ancestor classes in front.
    ClassDecomposition out;
    out.num_types = d;
    out.classes.assign(tarjan.sccs.rbegin(), tarjan.sccs.rend());
    out.class_of.assign(d, -1);
    for (int c = 0; c < out.num_classes(); ++c) {
        std::sort(out.classes[c].begin(), out.classes[c].end());
        for (int t : out.classes[c]) out.class_of[t] = c;
    }

    const int nc = out.num_classes();
    out.reaches.assign(nc, std::vector<bool>(nc, false));
    for (int c = 0; c < nc; ++c) out.reaches[c][c] = true;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (m(i, j) > 0.0) out.reaches[out.class_of[i]][out.class_of[j]] = true;
    for (int k = 0; k < nc; ++k)
        for (int a = 0; a < nc; ++a)
            if (out.reaches[a][k])
                for (int b = 0; b < nc; ++b)
                    if (out.reaches[k][b]) out.reaches[a][b] = true;

    for (const auto& members : out.classes)
        out.type_order.insert(out.type_order.end(), members.begin(), members.end());
    return out;
}

std::optional<int> is_primitive(const Matrix& m, int l_max) {
    const std::size_t d = m.rows();
    std::vector<bool> reach(d * d), next(d * d);
    for (std::size_t i = 0; i < d * d; ++i) reach[i] = false;
    Matrix base(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) base(i, j) = m(i, j) > 0.0 ? 1.0 : 0.0;

    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) reach[i * d + j] = base(i, j) > 0.0;

    for (int l = 1; l <= l_max; ++l) {
        bool all = true;
        for (bool b : reach)
            if (!b) {
                all = false;
                break;
            }
        if (all) return l;
        // boolean power: reach <- reach * base
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) {
                bool hit = false;
                for (std::size_t k = 0; k < d && !hit; ++k)
                    hit = reach[i * d + k] && base(k, j) > 0.0;
                next[i * d + j] = hit;
            }
        reach.swap(next);
    }
    return std::nullopt;
}

PerronData perron(const Matrix& block) {
    const std::size_t d = block.rows();
    if (d == 1) return PerronData{block(0, 0), {1.0}, {1.0}, 0.0, 0};
    if (block.max_entry() <= 0.0)
        throw PreconditionError("perron: block of size > 1 has no positive entries");

    // Any positive diagonal shift keeps the eigenvectors and moves the
    // eigenvalue by exactly the shift; a shift of half the largest entry
    // separates the dominant eigenvalue even for periodic blocks.
    const double shift = 0.5 * block.max_entry();
    Matrix a = block;
    for (std::size_t i = 0; i < d; ++i) a(i, i) += shift;

    PerronData out;
    double lambda_v = 0.0, lambda_u = 0.0, res_v = 0.0, res_u = 0.0;
    int it_v = 0, it_u = 0;
    out.v = power_iterate(a, shift, &lambda_v, &res_v, &it_v);
    out.u = power_iterate(a.transpose(), shift, &lambda_u, &res_u, &it_u);
    out.rho = lambda_v - shift;
    out.residual = std::max(res_v, res_u);
    out.iterations = std::max(it_v, it_u);

    double norm_v = 0.0;
    for (double x : out.v) norm_v += std::abs(x);
    for (double& x : out.v) x /= norm_v;
    double uv = 0.0;
    for (std::size_t i = 0; i < d; ++i) uv += out.u[i] * out.v[i];
    for (double& x : out.u) x /= uv;
    return out;
}

SpectralAnalysis analyze_mean_matrix(const Matrix& m) {
    SpectralAnalysis out;
    out.decomp = condense(m);
    const int nc = out.decomp.num_classes();
    out.class_perron.reserve(nc);
    for (int c = 0; c < nc; ++c) out.class_perron.push_back(perron(out.decomp.block(m, c)));
    out.class_rho.reserve(nc);
    for (const auto& p : out.class_perron) out.class_rho.push_back(p.rho);

    const int d = out.decomp.num_types;
    out.rho_pre.assign(d, 0.0);
    out.growth_k.assign(d, 0);
    for (int j = 0; j < d; ++j) {
        const int cj = out.decomp.class_of[j];
        for (int a = 0; a < nc; ++a)
            if (out.decomp.reaches[a][cj]) out.rho_pre[j] = std::max(out.rho_pre[j], out.class_rho[a]);
        out.growth_k[j] = growth_exponent(out.decomp, out.class_rho, j);
    }
    return out;
}

int growth_exponent(const ClassDecomposition& decomp, const std::vector<double>& class_rho,
                    int type, double tie_tol, int from_class) {
    const int nc = decomp.num_classes();
    const int cj = decomp.class_of[type];
    const auto in_scope = [&](int a) {
        return decomp.reaches[a][cj] && (from_class < 0 || decomp.reaches[from_class][a]);
    };
    double target = 0.0;
    for (int a = 0; a < nc; ++a)
        if (in_scope(a)) target = std::max(target, class_rho[a]);

    // Longest chain (under reachability) of classes attaining the target rate
    // and feeding the type's class; class ids ascend along reachability.
    std::vector<int> len(nc, 0);
    int best = 1;
    for (int a = 0; a < nc; ++a) {
        if (!in_scope(a)) continue;
        if (std::abs(class_rho[a] - target) > tie_tol * std::max(1.0, target)) continue;
        len[a] = 1;
        for (int b = 0; b < a; ++b)
            if (len[b] > 0 && decomp.reaches[b][a]) len[a] = std::max(len[a], len[b] + 1);
        best = std::max(best, len[a]);
    }
    return best - 1;
}

DominantPair dominant_pair_heavy(const SpectralAnalysis& analysis,
                                 const std::vector<TailSpec>& tails, double tie_tol,
                                 int from_class) {
    const auto& decomp = analysis.decomp;
    DominantPair out;
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < decomp.num_classes(); ++a) {
        if (from_class >= 0 && !decomp.reaches[from_class][a]) continue;
        const double log_rho = analysis.class_rho[a] > 0.0
                                   ? std::log(analysis.class_rho[a])
                                   : -std::numeric_limits<double>::infinity();
        for (int i = 0; i < decomp.num_types; ++i) {
            if (!decomp.reaches[a][decomp.class_of[i]]) continue;
            const double score = log_rho / tails[i].r;
            if (score > best + tie_tol) {
                best = score;
                out.alpha_class = a;
                out.type_I = i;
                out.unique = true;
            } else if (score > best - tie_tol && (a != out.alpha_class || i != out.type_I)) {
                out.unique = false;
            }
        }
    }
    if (out.type_I < 0)
        throw PreconditionError("dominant pair: no class with a positive growth rate");
    out.rho = analysis.class_rho[out.alpha_class];
    out.r = tails[out.type_I].r;
    out.k = growth_exponent(decomp, analysis.class_rho, out.type_I, 1e-9, from_class);
    return out;
}

SemiExpData dominant_data_semiexp(const SpectralAnalysis& analysis,
                                  const std::vector<TailSpec>& tails, double tie_tol,
                                  int from_class) {
    const auto& decomp = analysis.decomp;
    const auto type_in_scope = [&](int j) {
        return from_class < 0 || decomp.reaches[from_class][decomp.class_of[j]];
    };
    SemiExpData out;
    out.r = std::numeric_limits<double>::infinity();
    for (int j = 0; j < decomp.num_types; ++j)
        if (type_in_scope(j)) out.r = std::min(out.r, tails[j].r);
    for (int j = 0; j < decomp.num_types; ++j)
        if (type_in_scope(j) && tails[j].r <= out.r + tie_tol) {
            out.attaining_types.push_back(j);
            out.L_min_over.push_back(tails[j].L);
        }
    for (int a = 0; a < decomp.num_classes(); ++a) {
        if (from_class >= 0 && !decomp.reaches[from_class][a]) continue;
        bool precedes = false;
        for (int j : out.attaining_types)
            if (decomp.reaches[a][decomp.class_of[j]]) precedes = true;
        if (precedes) {
            out.preceding_classes.push_back(a);
            out.rho = std::max(out.rho, analysis.class_rho[a]);
        }
    }
    return out;
}

}  // namespace mtbrw
