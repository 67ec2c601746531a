#pragma once

#include <cstdint>
#include <vector>

#include "cpstream/tensor.hpp"

namespace cpstream {

/// Rank-R factorization in Kruskal normal form: every factor column has
/// unit 2-norm and nonnegative weights carry the component magnitudes.
struct KruskalModel {
    std::vector<Matrix> factors;  // factor n is dim(n) x R
    Vector lambda;                // R nonnegative weights

    int order() const { return static_cast<int>(factors.size()); }
    int rank() const { return static_cast<int>(lambda.size()); }
    Shape shape() const;

    /// Pull column norms into lambda, leaving unit columns. Degenerate
    /// (zero-norm) columns keep lambda 0 and are left untouched.
    void normalize();
};

struct AlsConfig {
    int rank = 1;
    int max_iters = 100;
    double rel_tol = 1e-8;
    int n_restarts = 3;
    std::uint64_t seed = 0;
};

struct AlsResult {
    KruskalModel model;
    double fit = 0.0;                     // 1 - |X - X_hat|_F / |X|_F
    int iterations = 0;                   // sweeps run by the winning restart
    std::vector<double> fit_history;      // per sweep, winning restart
    std::vector<double> residual_history; // |X - X_hat|_F per sweep
    bool rescued_degenerate = false;      // a near-zero column was re-drawn
};

/// Alternating least squares CP decomposition. Cyclic mode updates with the
/// Gram-product pseudoinverse, per-update column normalization into lambda,
/// stop on max_iters or relative fit change < rel_tol, best of n_restarts.
/// Deterministic given (cfg.seed, cfg). Throws ConfigError when the rank
/// exceeds the solvability bound and NumericError on a zero tensor or
/// non-finite intermediate (message carries the sweep index).
AlsResult cp_als(const DenseTensor& t, const AlsConfig& cfg);

/// One exact least-squares mode update with all other factors held fixed:
/// argmin_A | unfolding - A * chain^T |_F with chain the Khatri-Rao chain
/// of the remaining factors. Returns the unnormalized factor.
Matrix als_solve_mode(const Matrix& unfolding, const std::vector<Matrix>& factors, int mode);

/// Sum of weighted rank-one terms.
DenseTensor reconstruct(const KruskalModel& m);

/// 1 - |t - reconstruct(m)|_F / |t|_F. Throws NumericError for zero-norm t.
double model_fit(const DenseTensor& t, const KruskalModel& m);

}  // namespace cpstream
