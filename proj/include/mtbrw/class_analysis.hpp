#pragma once

#include <optional>
#include <vector>

#include "mtbrw/matrix.hpp"
#include "mtbrw/tails.hpp"

namespace mtbrw {

/// Perron data of one irreducible (as a graph) nonnegative block.
/// u and v are the left and right eigenvectors, entrywise positive, with
/// u . v = 1 and ||v||_1 = 1.
struct PerronData {
    double rho = 0.0;
    std::vector<double> u;
    std::vector<double> v;
    double residual = 0.0;  // max-norm residual of M v - rho v, relative to rho
    int iterations = 0;
};

/// Communicating-class decomposition of a mean matrix.
///
/// Classes are numbered in topological order: if a class can produce types of
/// another class, it gets the smaller id.  Renumbering types class by class
/// therefore makes the matrix block upper triangular with exact zeros below
/// the diagonal blocks.
struct ClassDecomposition {
    int num_types = 0;
    std::vector<int> class_of;               // type -> class id
    std::vector<std::vector<int>> classes;   // class id -> member types, ascending
    std::vector<std::vector<bool>> reaches;  // reaches[a][b]: b descends from a (reflexive)
    std::vector<int> type_order;             // types permuted class by class

    int num_classes() const { return static_cast<int>(classes.size()); }
    bool irreducible() const { return num_classes() == 1; }
    Matrix block(const Matrix& m, int cls) const;
    Matrix permuted(const Matrix& m) const;
};

ClassDecomposition condense(const Matrix& m);

/// Least l <= l_max with all entries of the l-th boolean power positive,
/// nullopt when no such l exists (the block is imprimitive or reducible).
std::optional<int> is_primitive(const Matrix& m, int l_max);

/// Power iteration with a diagonal shift; the shift leaves the eigenvectors
/// unchanged and is subtracted from the converged eigenvalue.  Terminates when
/// the relative residual is at most 1e-10; throws NonConvergence after 1e5
/// iterations.
PerronData perron(const Matrix& block);

/// Decomposition plus per-class spectra and per-type growth scales:
/// E[Z_n at type j] grows like n^growth_k[j] * rho_pre[j]^n.
struct SpectralAnalysis {
    ClassDecomposition decomp;
    std::vector<PerronData> class_perron;  // per class
    std::vector<double> class_rho;         // per class
    std::vector<double> rho_pre;           // per type: max class_rho over classes reaching it
    std::vector<int> growth_k;             // per type
};

SpectralAnalysis analyze_mean_matrix(const Matrix& m);

/// Polynomial correction exponent for one type: one less than the longest
/// chain of classes that all attain rho_pre[type] and reach the type's class.
/// When from_class >= 0 only classes reachable from it are considered, which
/// matches growth seen from a particle started inside that class.
int growth_exponent(const ClassDecomposition& decomp, const std::vector<double>& class_rho,
                    int type, double tie_tol = 1e-9, int from_class = -1);

/// Dominant (class, type) pair for heavy-tailed verification: the maximizer of
/// rho_a^(1/r_i) over pairs where class a reaches class(i).  `unique` is false
/// when another pair ties within tolerance.
struct DominantPair {
    int alpha_class = -1;
    int type_I = -1;
    double rho = 0.0;
    double r = 0.0;
    int k = 0;
    bool unique = true;
};

/// When from_class >= 0, only pairs whose class chain is reachable from it
/// participate; unreachable classes never contribute particles.
DominantPair dominant_pair_heavy(const SpectralAnalysis& analysis,
                                 const std::vector<TailSpec>& tails, double tie_tol = 1e-9,
                                 int from_class = -1);

/// Data driving the almost-sure normalization in the stretched-exponential
/// regime: the minimal exponent r, the types attaining it, the classes
/// reaching those types, and the growth rate over those classes.
struct SemiExpData {
    double r = 0.0;
    std::vector<int> attaining_types;    // B
    std::vector<int> preceding_classes;  // A
    double rho = 0.0;                    // max class_rho over A
    /// Pointwise minimum of L over the attaining types.
    std::vector<SlowlyVarying> L_min_over;
};

SemiExpData dominant_data_semiexp(const SpectralAnalysis& analysis,
                                  const std::vector<TailSpec>& tails, double tie_tol = 1e-12,
                                  int from_class = -1);

}  // namespace mtbrw
