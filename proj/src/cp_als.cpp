#include "cpstream/cp_als.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "cpstream/rng.hpp"

namespace cpstream {

namespace {

constexpr double kDegenerateNorm = 1e-14;

bool all_finite(const Matrix& m) { return m.allFinite(); }

// Peel a Khatri-Rao-structured vector into per-mode columns: v is the
// vectorization of an outer product over `dims` with the first dimension
// fastest; successive rank-1 SVD splits recover each mode's column.
void peel_rank1(const Vector& v, const std::vector<std::int64_t>& dims,
                std::vector<Vector>& out) {
    Vector carry = v;
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
        const std::int64_t rows = dims[k];
        const std::int64_t cols = carry.size() / rows;
        Eigen::Map<const Matrix> m(carry.data(), rows, cols);
        Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
        out[k] = svd.matrixU().col(0);
        carry = svd.singularValues()(0) * svd.matrixV().col(0);
    }
    out[dims.size() - 1] = carry;
}

// Direct slice-eigendecomposition initialization. Two random linear
// combinations of the slices of a (flattened) three-mode view share the
// factor of the largest mode as generalized eigenvectors; the remaining
// factors follow from a least-squares solve plus rank-1 peeling. Exact for
// noiseless rank-R data, a strong warm start otherwise; different slice
// mixtures land in different basins, so every restart draws its own. The
// flattening and the subspace SVDs do not depend on the mixture and are
// computed once per decomposition.
class GevdInit {
public:
    GevdInit(const DenseTensor& t, const std::vector<Matrix>& unfoldings, int rank)
        : t_(t), unfoldings_(unfoldings), rank_(rank) {
        const int order = t.order();
        if (order < 3) return;

        m1_ = 0;
        for (int n = 1; n < order; ++n)
            if (t.dim(n) > t.dim(m1_)) m1_ = n;
        m2_ = m1_ == 0 ? 1 : 0;
        for (int n = 0; n < order; ++n)
            if (n != m1_ && t.dim(n) > t.dim(m2_)) m2_ = n;
        if (m1_ > m2_) std::swap(m1_, m2_);

        d1_ = t.dim(m1_);
        d2_ = t.dim(m2_);
        l_total_ = t.num_elements() / (d1_ * d2_);
        if (d1_ < rank || d2_ < rank || l_total_ < 2) return;

        std::vector<int> rest;
        for (int n = 0; n < order; ++n)
            if (n != m1_ && n != m2_) rest.push_back(n);

        // Three-mode view (d1, d2, L): remaining modes pack ascending,
        // lowest fastest, matching the matricize column convention.
        flat_.resize(d1_ * d2_, l_total_);
        std::vector<std::int64_t> idx(static_cast<std::size_t>(order), 0);
        std::int64_t pos = 0;
        const auto& vals = t.values();
        do {
            std::int64_t l = 0, stride = 1;
            for (int n : rest) {
                l += idx[static_cast<std::size_t>(n)] * stride;
                stride *= t.dim(n);
            }
            flat_(idx[static_cast<std::size_t>(m1_)] + idx[static_cast<std::size_t>(m2_)] * d1_, l) =
                vals[static_cast<std::size_t>(pos)];
            ++pos;
            bool done = true;
            for (std::size_t k = 0; k < idx.size(); ++k) {
                if (++idx[k] < t.shape().dims[k]) {
                    done = false;
                    break;
                }
                idx[k] = 0;
            }
            if (done) break;
        } while (true);

        Eigen::BDCSVD<Matrix> svd1(unfoldings[static_cast<std::size_t>(m1_)], Eigen::ComputeThinU);
        Eigen::BDCSVD<Matrix> svd2(unfoldings[static_cast<std::size_t>(m2_)], Eigen::ComputeThinU);
        if (svd1.nonzeroSingularValues() < rank || svd2.nonzeroSingularValues() < rank) return;
        u_r_ = svd1.matrixU().leftCols(rank);
        v_r_ = svd2.matrixU().leftCols(rank);
        usable_ = true;
    }

    bool usable() const { return usable_; }

    std::optional<std::vector<Matrix>> factors(std::uint64_t mixture_seed) const {
        if (!usable_) return std::nullopt;
        const int order = t_.order();
        const int rank = rank_;
        for (int attempt = 0; attempt < 3; ++attempt) {
            rng::Substream ws(
                rng::derive(mixture_seed, {rng::kAlsGevd, static_cast<std::uint64_t>(attempt)}));
            Vector w1(l_total_), w2(l_total_);
            for (std::int64_t i = 0; i < l_total_; ++i) w1(i) = ws.uniform01() * 2 - 1;
            for (std::int64_t i = 0; i < l_total_; ++i) w2(i) = ws.uniform01() * 2 - 1;

            Vector s1v = flat_ * w1, s2v = flat_ * w2;
            const Eigen::Map<const Matrix> s1m(s1v.data(), d1_, d2_), s2m(s2v.data(), d1_, d2_);

            const Matrix p1 = u_r_.transpose() * s1m * v_r_;
            const Matrix p2 = u_r_.transpose() * s2m * v_r_;
            Eigen::FullPivLU<Matrix> lu(p2);
            if (!lu.isInvertible()) continue;
            const Matrix pencil = p1 * lu.inverse();

            Eigen::EigenSolver<Matrix> es(pencil);
            if (es.info() != Eigen::Success) continue;
            Matrix a_sub(rank, rank);
            for (int c = 0; c < rank; ++c) {
                // Conjugate pairs contribute their real and imaginary parts.
                if (std::abs(es.eigenvalues()(c).imag()) >
                        1e-9 * std::abs(es.eigenvalues()(c).real()) &&
                    c + 1 < rank) {
                    a_sub.col(c) = es.eigenvectors().col(c).real();
                    a_sub.col(c + 1) = es.eigenvectors().col(c).imag();
                    ++c;
                } else {
                    a_sub.col(c) = es.eigenvectors().col(c).real();
                }
            }
            Matrix a1 = u_r_ * a_sub;
            bool ok = true;
            for (int c = 0; c < rank && ok; ++c) {
                const double nrm = a1.col(c).norm();
                if (nrm < kDegenerateNorm)
                    ok = false;
                else
                    a1.col(c) /= nrm;
            }
            if (!ok) continue;

            // Remaining structure from one least-squares solve against A.
            Eigen::CompleteOrthogonalDecomposition<Matrix> cod(a1);
            const Matrix h = cod.solve(unfoldings_[static_cast<std::size_t>(m1_)]);
            std::vector<std::int64_t> chain_dims;
            std::vector<int> chain_modes;
            for (int n = 0; n < order; ++n)
                if (n != m1_) {
                    chain_modes.push_back(n);
                    chain_dims.push_back(t_.dim(n));
                }

            std::vector<Matrix> factors(static_cast<std::size_t>(order));
            factors[static_cast<std::size_t>(m1_)] = a1;
            for (int n = 0; n < order; ++n)
                if (n != m1_) factors[static_cast<std::size_t>(n)] = Matrix(t_.dim(n), rank);

            std::vector<Vector> parts(chain_dims.size());
            for (int r = 0; r < rank; ++r) {
                peel_rank1(h.row(r).transpose(), chain_dims, parts);
                for (std::size_t k = 0; k < chain_modes.size(); ++k)
                    factors[static_cast<std::size_t>(chain_modes[k])].col(r) = parts[k];
            }
            for (const Matrix& f : factors)
                if (!all_finite(f)) ok = false;
            if (!ok) continue;
            return factors;
        }
        return std::nullopt;
    }

private:
    const DenseTensor& t_;
    const std::vector<Matrix>& unfoldings_;
    int rank_;
    int m1_ = 0, m2_ = 1;
    std::int64_t d1_ = 0, d2_ = 0, l_total_ = 0;
    Matrix flat_, u_r_, v_r_;
    bool usable_ = false;
};

// Hadamard product of Gram matrices over all modes except `skip`.
Matrix gram_product(const std::vector<Matrix>& grams, int skip) {
    Matrix v;
    bool started = false;
    for (int n = 0; n < static_cast<int>(grams.size()); ++n) {
        if (n == skip) continue;
        if (!started) {
            v = grams[static_cast<std::size_t>(n)];
            started = true;
        } else {
            v = v.cwiseProduct(grams[static_cast<std::size_t>(n)]);
        }
    }
    return v;
}

}  // namespace

Shape KruskalModel::shape() const {
    Shape s;
    for (const Matrix& f : factors) s.dims.push_back(f.rows());
    return s;
}

void KruskalModel::normalize() {
    const int r = rank();
    if (lambda.size() == 0) lambda = Vector::Ones(r);
    for (Matrix& f : factors) {
        for (int c = 0; c < r; ++c) {
            const double nrm = f.col(c).norm();
            if (nrm > 0.0) {
                f.col(c) /= nrm;
                lambda(c) *= nrm;
            }
        }
    }
}

Matrix als_solve_mode(const Matrix& unfolding, const std::vector<Matrix>& factors, int mode) {
    const Matrix chain = khatri_rao_chain(factors, mode);
    std::vector<Matrix> grams(factors.size());
    for (std::size_t n = 0; n < factors.size(); ++n) grams[n] = factors[n].transpose() * factors[n];
    const Matrix v = gram_product(grams, mode);
    const Matrix mttkrp = unfolding * chain;
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(v);
    return cod.solve(mttkrp.transpose()).transpose();
}

AlsResult cp_als(const DenseTensor& t, const AlsConfig& cfg) {
    if (cfg.rank < 1) throw ConfigError("cp_als: rank must be >= 1");
    if (cfg.max_iters < 1) throw ConfigError("cp_als: max_iters must be >= 1");
    if (cfg.rel_tol <= 0.0) throw ConfigError("cp_als: rel_tol must be > 0");
    if (cfg.n_restarts < 1) throw ConfigError("cp_als: n_restarts must be >= 1");

    const int order = t.order();
    const std::int64_t numel = t.num_elements();
    for (int n = 0; n < order; ++n) {
        const std::int64_t others = t.dim(n) == 0 ? 0 : numel / std::max<std::int64_t>(t.dim(n), 1);
        if (cfg.rank > others)
            throw ConfigError("cp_als: rank " + std::to_string(cfg.rank) +
                              " exceeds solvability bound for mode " + std::to_string(n + 1));
    }

    const double norm_x = frobenius_norm(t);
    if (norm_x == 0.0) throw NumericError("cp_als: input tensor is identically zero");

    std::vector<Matrix> unfoldings(static_cast<std::size_t>(order));
    for (int n = 0; n < order; ++n) unfoldings[static_cast<std::size_t>(n)] = matricize(t, n);

    AlsResult best;
    best.fit = -std::numeric_limits<double>::infinity();

    const int r = cfg.rank;
    const GevdInit gevd(t, unfoldings, r);
    for (int restart = 0; restart < cfg.n_restarts; ++restart) {
        const std::uint64_t restart_seed =
            rng::derive(cfg.seed, {rng::kAlsRestart, static_cast<std::uint64_t>(restart)});

        // Each restart starts from the slice-eigendecomposition solution of
        // its own slice mixture when the shape admits it, falling back to
        // random factors otherwise.
        std::vector<Matrix> factors;
        if (auto init = gevd.factors(restart_seed)) factors = std::move(*init);
        if (factors.empty()) {
            factors.resize(static_cast<std::size_t>(order));
            for (int n = 0; n < order; ++n) {
                rng::Substream rs(
                    rng::derive(restart_seed, {rng::kAlsFactor, static_cast<std::uint64_t>(n)}));
                factors[static_cast<std::size_t>(n)] = Matrix(t.dim(n), r);
                rs.fill_uniform(factors[static_cast<std::size_t>(n)]);
            }
        }
        std::vector<Matrix> grams(static_cast<std::size_t>(order));
        for (int n = 0; n < order; ++n)
            grams[static_cast<std::size_t>(n)] =
                factors[static_cast<std::size_t>(n)].transpose() * factors[static_cast<std::size_t>(n)];

        Vector lambda = Vector::Ones(r);
        double prev_fit = 0.0;
        bool rescued = false;
        std::vector<double> fits, residuals;
        rng::Substream rescue(rng::derive(restart_seed, {rng::kAlsRescue}));

        int sweep = 0;
        for (; sweep < cfg.max_iters; ++sweep) {
            Matrix last_mttkrp;
            for (int n = 0; n < order; ++n) {
                const Matrix chain = khatri_rao_chain(factors, n);
                const Matrix v = gram_product(grams, n);
                const Matrix mttkrp = unfoldings[static_cast<std::size_t>(n)] * chain;
                Eigen::CompleteOrthogonalDecomposition<Matrix> cod(v);
                Matrix raw = cod.solve(mttkrp.transpose()).transpose();

                if (!all_finite(raw))
                    throw NumericError("cp_als: non-finite factor at sweep " + std::to_string(sweep + 1) +
                                       ", mode " + std::to_string(n + 1));

                for (int c = 0; c < r; ++c) {
                    double nrm = raw.col(c).norm();
                    if (nrm < kDegenerateNorm) {
                        // Re-draw a collapsed column to keep the Gram products invertible.
                        for (Eigen::Index i = 0; i < raw.rows(); ++i) raw(i, c) = rescue.uniform01();
                        nrm = raw.col(c).norm();
                        rescued = true;
                    }
                    lambda(c) = nrm;
                    raw.col(c) /= nrm;
                }
                factors[static_cast<std::size_t>(n)] = raw;
                grams[static_cast<std::size_t>(n)] = raw.transpose() * raw;
                if (n == order - 1) last_mttkrp = mttkrp;
            }

            // Fit via the cached last-mode MTTKRP:
            //   <X, M> = sum_r lambda_r <mttkrp_r, a_r>,  |M|^2 = lambda' (hadamard grams) lambda.
            const double inner = (last_mttkrp.cwiseProduct(factors[static_cast<std::size_t>(order - 1)]) *
                                  lambda.asDiagonal())
                                     .sum();
            const Matrix full_gram = gram_product(grams, -1);
            const double norm_m_sq = lambda.dot(full_gram * lambda);
            const double res_sq = std::max(0.0, norm_x * norm_x - 2.0 * inner + norm_m_sq);
            const double residual = std::sqrt(res_sq);
            const double fit = 1.0 - residual / norm_x;
            if (!std::isfinite(fit))
                throw NumericError("cp_als: non-finite fit at sweep " + std::to_string(sweep + 1));

            fits.push_back(fit);
            residuals.push_back(residual);
            if (sweep > 0 && std::abs(fit - prev_fit) < cfg.rel_tol) {
                ++sweep;
                break;
            }
            prev_fit = fit;
        }

        const double final_fit = fits.empty() ? -std::numeric_limits<double>::infinity() : fits.back();
        if (final_fit > best.fit) {
            best.model.factors = factors;
            best.model.lambda = lambda;
            best.fit = final_fit;
            best.iterations = sweep;
            best.fit_history = std::move(fits);
            best.residual_history = std::move(residuals);
            best.rescued_degenerate = rescued;
        }
    }
    return best;
}

DenseTensor reconstruct(const KruskalModel& m) {
    if (m.order() < 2) throw ConfigError("reconstruct: model order must be >= 2");
    const Matrix chain = khatri_rao_chain(m.factors, 0);
    Vector lambda = m.lambda.size() ? m.lambda : Vector::Ones(m.rank());
    const Matrix unfolded = m.factors[0] * lambda.asDiagonal() * chain.transpose();
    return dematricize(unfolded, m.shape(), 0);
}

double model_fit(const DenseTensor& t, const KruskalModel& m) {
    const double norm_x = frobenius_norm(t);
    if (norm_x == 0.0) throw NumericError("model_fit: zero-norm tensor");
    const DenseTensor rec = reconstruct(m);
    if (!(rec.shape() == t.shape())) throw ConfigError("model_fit: shape mismatch");
    double res_sq = 0.0;
    for (std::size_t i = 0; i < t.values().size(); ++i) {
        const double d = t.values()[i] - rec.values()[i];
        res_sq += d * d;
    }
    return 1.0 - std::sqrt(res_sq) / norm_x;
}

}  // namespace cpstream
