#pragma once

#include <vector>

#include "mtbrw/tails.hpp"

namespace mtbrw {

/// Scale for the heavy-tailed limit at horizon n: the root of
/// n^k * rho^n * S(a_n) = 1, solved in log space so rho^n never overflows.
/// Closed form when the slowly varying parts are constant, bisection on the
/// log survival otherwise.  Throws Unsolvable when no root exists.
double solve_a_n(int n, double rho, int k, const TailSpec& tail);

/// Scale for the almost-sure normalization: the root of L(psi) * psi^r = n
/// where L is the pointwise minimum of the given slowly varying functions.
double solve_psi(int n, double r, const std::vector<SlowlyVarying>& L);

/// Relative residuals of the defining equations at a candidate root.
double a_n_residual(int n, double rho, int k, const TailSpec& tail, double value);
double psi_residual(int n, double r, const std::vector<SlowlyVarying>& L, double value);

struct NormalizationPoint {
    int n = 0;
    double value = 0.0;
    double residual = 0.0;
};

struct NormalizationTable {
    std::vector<NormalizationPoint> rows;
};

NormalizationTable a_n_table(const std::vector<int>& ns, double rho, int k, const TailSpec& tail);
NormalizationTable psi_table(const std::vector<int>& ns, double r,
                             const std::vector<SlowlyVarying>& L);

}  // namespace mtbrw
