#include "cpstream/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace cpstream {

namespace {

constexpr double kRankTol = 1e-10;
constexpr double kDegenerateRow = 1e-12;

Matrix column_normalized(const Matrix& m) {
    Matrix out = m;
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
        const double nrm = out.col(c).norm();
        if (nrm > 0.0) out.col(c) /= nrm;
    }
    return out;
}

// Rank-revealing least-squares solve of proj * X = rhs with an explicit
// full-column-rank requirement.
Matrix checked_solve(const Matrix& proj, const Matrix& rhs, int mode) {
    if (proj.rows() < proj.cols())
        throw NumericError("recover: mode " + std::to_string(mode + 1) + " projection is " +
                           std::to_string(proj.rows()) + "x" + std::to_string(proj.cols()) +
                           "; p*Q must reach the mode extent (raise p per the replica bound)");
    Eigen::ColPivHouseholderQR<Matrix> qr(proj);
    qr.setThreshold(kRankTol);
    const auto rank = qr.rank();
    if (rank < proj.cols())
        throw NumericError("recover: rank-deficient projection on mode " + std::to_string(mode + 1) +
                           " (rank " + std::to_string(rank) + " of " + std::to_string(proj.cols()) + ")");
    return qr.solve(rhs);
}

}  // namespace

std::vector<int> greedy_match(const Matrix& similarity, double tie_tol,
                              std::vector<std::string>* log) {
    const int r = static_cast<int>(similarity.rows());
    if (similarity.cols() != r) throw ConfigError("greedy_match: similarity must be square");
    std::vector<int> perm(static_cast<std::size_t>(r), -1);
    std::vector<bool> ref_used(static_cast<std::size_t>(r), false), cand_used(static_cast<std::size_t>(r), false);

    for (int step = 0; step < r; ++step) {
        double best = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < r; ++i) {
            if (ref_used[static_cast<std::size_t>(i)]) continue;
            for (int j = 0; j < r; ++j) {
                if (cand_used[static_cast<std::size_t>(j)]) continue;
                best = std::max(best, similarity(i, j));
            }
        }
        // Lowest (ref, cand) pair among near-ties wins.
        int bi = -1, bj = -1, ties = 0;
        for (int i = 0; i < r && bi < 0; ++i) {
            if (ref_used[static_cast<std::size_t>(i)]) continue;
            for (int j = 0; j < r; ++j) {
                if (cand_used[static_cast<std::size_t>(j)]) continue;
                if (similarity(i, j) >= best - tie_tol) {
                    bi = i;
                    bj = j;
                    break;
                }
            }
        }
        for (int i = 0; i < r; ++i) {
            if (ref_used[static_cast<std::size_t>(i)]) continue;
            for (int j = 0; j < r; ++j)
                if (!cand_used[static_cast<std::size_t>(j)] && similarity(i, j) >= best - tie_tol)
                    ++ties;
        }
        if (ties > 1 && log)
            log->push_back("ambiguous match at similarity " + std::to_string(best) + " (" +
                           std::to_string(ties) + " candidates), resolved to lowest index");
        perm[static_cast<std::size_t>(bi)] = bj;
        ref_used[static_cast<std::size_t>(bi)] = true;
        cand_used[static_cast<std::size_t>(bj)] = true;
    }
    return perm;
}

std::vector<int> exhaustive_match(const Matrix& similarity) {
    const int r = static_cast<int>(similarity.rows());
    if (similarity.cols() != r) throw ConfigError("exhaustive_match: similarity must be square");
    if (r > 8) throw ConfigError("exhaustive_match: rank too large for enumeration");
    std::vector<int> cand(static_cast<std::size_t>(r));
    std::iota(cand.begin(), cand.end(), 0);
    std::vector<int> best_perm = cand;
    double best = -std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (int i = 0; i < r; ++i) total += similarity(i, cand[static_cast<std::size_t>(i)]);
        if (total > best) {
            best = total;
            best_perm = cand;
        }
    } while (std::next_permutation(cand.begin(), cand.end()));
    return best_perm;
}

AlignedStack align_replicas(const std::vector<KruskalModel>& models, const ReplicaSet& rs) {
    const int p = rs.p();
    if (static_cast<int>(models.size()) != p)
        throw ConfigError("align_replicas: expected " + std::to_string(p) + " models");
    const int order = rs.order();
    const int rank = models.front().rank();
    for (const KruskalModel& m : models)
        if (m.rank() != rank || m.order() != order)
            throw ConfigError("align_replicas: models disagree on rank or order");
    if (p >= 2 && rs.shared < 1)
        throw ConfigError("align_replicas: shared columns required to align multiple replicas");

    const double inv_order = 1.0 / static_cast<double>(order);

    // Spread each model's weights into every mode as lambda^(1/N).
    auto redistributed = [&](int rep) {
        std::vector<Matrix> f = models[static_cast<std::size_t>(rep)].factors;
        const Vector& lam = models[static_cast<std::size_t>(rep)].lambda;
        Vector root(rank);
        for (int r = 0; r < rank; ++r) root(r) = std::pow(std::max(lam(r), 0.0), inv_order);
        for (Matrix& fm : f) fm = fm * root.asDiagonal();
        return f;
    };

    AlignedStack out;
    out.reference = 0;
    out.stacks.assign(static_cast<std::size_t>(order), Matrix(p * rs.q, rank));
    out.perms.assign(static_cast<std::size_t>(p), {});
    out.scales.assign(static_cast<std::size_t>(p), {});

    const std::vector<Matrix> ref = redistributed(0);
    for (int n = 0; n < order; ++n) out.stacks[static_cast<std::size_t>(n)].topRows(rs.q) = ref[static_cast<std::size_t>(n)];
    {
        std::vector<int> id(static_cast<std::size_t>(rank));
        std::iota(id.begin(), id.end(), 0);
        out.perms[0] = id;
        out.scales[0].assign(static_cast<std::size_t>(order), Vector::Ones(rank));
    }

    // The shared rows are projections through the common leading columns,
    // which are uniform draws and therefore strongly correlated with each
    // other. Comparing the raw rows makes every column look alike; the
    // Cholesky factor of the shared block's Gram turns them into
    // coefficients in an orthonormal basis of the shared subspace, where
    // cosines discriminate properly.
    std::vector<Eigen::LLT<Matrix>> whiteners(static_cast<std::size_t>(order));
    std::vector<bool> whiten_ok(static_cast<std::size_t>(order), false);
    if (p >= 2) {
        for (int n = 0; n < order; ++n) {
            Matrix gram;
            if (n == rs.temporal_mode) {
                gram = rs.temporal_shared_gram;
            } else {
                const Matrix& u = rs.replicas[0].nontemporal[static_cast<std::size_t>(rs.nontemporal_slot(n))];
                const Matrix u_s = u.leftCols(rs.shared);
                gram = u_s.transpose() * u_s;
            }
            if (gram.rows() == rs.shared && gram.cols() == rs.shared && rs.shared > 0) {
                whiteners[static_cast<std::size_t>(n)].compute(gram);
                whiten_ok[static_cast<std::size_t>(n)] =
                    whiteners[static_cast<std::size_t>(n)].info() == Eigen::Success;
            }
        }
    }
    auto shared_coords = [&](const Matrix& factor, int n) {
        Matrix rows = factor.topRows(rs.shared);
        if (whiten_ok[static_cast<std::size_t>(n)])
            rows = whiteners[static_cast<std::size_t>(n)].matrixL().solve(rows);
        return rows;
    };

    std::vector<Matrix> ref_shared(static_cast<std::size_t>(order));
    for (int n = 0; n < order; ++n) {
        ref_shared[static_cast<std::size_t>(n)] = shared_coords(ref[static_cast<std::size_t>(n)], n);
        for (int c = 0; c < rank; ++c)
            if (p >= 2 && ref_shared[static_cast<std::size_t>(n)].col(c).norm() < kDegenerateRow)
                throw NumericError("align_replicas: degenerate shared rows in reference, mode " +
                                   std::to_string(n + 1));
    }

    // Shared-row cosines alone cannot separate strongly correlated
    // components (their projections onto a few shared coordinates are all
    // nearly parallel). Whenever two replicas' stacked projections form a
    // determined system (2Q >= extent), the pairing is decided by joint
    // solve consistency instead: matching columns describe the same ambient
    // vector, so the stacked residual is small only for true pairs.
    bool pair_solve = p >= 2;
    for (std::int64_t d : rs.nontemporal_dims)
        if (2LL * rs.q < d + 1) pair_solve = false;

    for (int rep = 1; rep < p; ++rep) {
        std::vector<Matrix> cand = redistributed(rep);
        std::vector<Matrix> cand_shared(static_cast<std::size_t>(order));
        for (int n = 0; n < order; ++n)
            cand_shared[static_cast<std::size_t>(n)] = shared_coords(cand[static_cast<std::size_t>(n)], n);

        Matrix sim(rank, rank);
        if (pair_solve) {
            // Joint projections [U_ref; U_rep]^T per non-temporal mode.
            double worst = 0.0;
            Matrix rms = Matrix::Zero(rank, rank);
            int modes_used = 0;
            for (int n = 0; n < order; ++n) {
                if (n == rs.temporal_mode) continue;
                const int slot = rs.nontemporal_slot(n);
                const Matrix& u_ref = rs.replicas[0].nontemporal[static_cast<std::size_t>(slot)];
                const Matrix& u_rep =
                    rs.replicas[static_cast<std::size_t>(rep)].nontemporal[static_cast<std::size_t>(slot)];
                Matrix joint(2 * rs.q, u_ref.rows());
                joint.topRows(rs.q) = u_ref.transpose();
                joint.bottomRows(rs.q) = u_rep.transpose();
                Eigen::ColPivHouseholderQR<Matrix> qr(joint);

                const Matrix& rb = ref[static_cast<std::size_t>(n)];
                const Matrix& cb = cand[static_cast<std::size_t>(n)];
                for (int i = 0; i < rank; ++i) {
                    for (int j = 0; j < rank; ++j) {
                        // Scale the candidate from the shared rows first;
                        // a scalar is estimable even where the direction
                        // information is thin.
                        const Vector zr = ref_shared[static_cast<std::size_t>(n)].col(i);
                        const Vector zc = cand_shared[static_cast<std::size_t>(n)].col(j);
                        const double denom = zc.squaredNorm();
                        const double s = denom > 0.0 ? zr.dot(zc) / denom : 0.0;
                        Vector rhs(2 * rs.q);
                        rhs.head(rs.q) = rb.col(i);
                        rhs.tail(rs.q) = s * cb.col(j);
                        const Vector x = qr.solve(rhs);
                        const double rel = (joint * x - rhs).norm() / std::max(rhs.norm(), 1e-300);
                        rms(i, j) += rel * rel;
                    }
                }
                ++modes_used;
            }
            for (int i = 0; i < rank; ++i)
                for (int j = 0; j < rank; ++j) {
                    const double rho = std::sqrt(rms(i, j) / std::max(modes_used, 1));
                    sim(i, j) = 1.0 - std::min(1.0, rho);
                    worst = std::max(worst, rho);
                }
            (void)worst;
        } else {
            sim.setOnes();
            for (int n = 0; n < order; ++n) {
                const Matrix r_n = column_normalized(ref_shared[static_cast<std::size_t>(n)]);
                Matrix c_n = cand_shared[static_cast<std::size_t>(n)];
                for (int c = 0; c < rank; ++c)
                    if (c_n.col(c).norm() < kDegenerateRow)
                        throw NumericError("align_replicas: degenerate shared rows in replica " +
                                           std::to_string(rep + 1) + ", mode " + std::to_string(n + 1));
                c_n = column_normalized(c_n);
                sim = sim.cwiseProduct((r_n.transpose() * c_n).cwiseAbs());
            }
        }

        const std::vector<int> perm = greedy_match(sim, 1e-9, &out.notes);
        for (int i = 0; i < rank; ++i) {
            const double accepted = sim(i, perm[static_cast<std::size_t>(i)]);
            out.min_match_similarity = std::min(out.min_match_similarity, accepted);
            for (int j = 0; j < rank; ++j)
                if (j != perm[static_cast<std::size_t>(i)])
                    out.max_offdiag_similarity = std::max(out.max_offdiag_similarity, sim(i, j));
        }

        std::vector<Vector> mode_scales(static_cast<std::size_t>(order), Vector::Ones(rank));
        for (int n = 0; n < order; ++n) {
            Matrix block(rs.q, rank);
            for (int i = 0; i < rank; ++i) {
                const int j = perm[static_cast<std::size_t>(i)];
                const Vector cand_rows = cand_shared[static_cast<std::size_t>(n)].col(j);
                const Vector ref_rows = ref_shared[static_cast<std::size_t>(n)].col(i);
                const double denom = cand_rows.squaredNorm();
                const double scale = denom > 0.0 ? ref_rows.dot(cand_rows) / denom : 0.0;
                if (!std::isfinite(scale) || scale == 0.0)
                    throw NumericError("align_replicas: degenerate scale for replica " +
                                       std::to_string(rep + 1) + ", mode " + std::to_string(n + 1));
                mode_scales[static_cast<std::size_t>(n)](i) = scale;
                block.col(i) = scale * cand[static_cast<std::size_t>(n)].col(j);
            }
            out.stacks[static_cast<std::size_t>(n)].middleRows(rep * rs.q, rs.q) = block;
        }
        out.perms[static_cast<std::size_t>(rep)] = perm;
        out.scales[static_cast<std::size_t>(rep)] = std::move(mode_scales);
    }
    return out;
}

Matrix stack_projections(const ReplicaSet& rs, int mode, std::int64_t row_begin,
                         std::int64_t row_end) {
    const int p = rs.p();
    std::int64_t dim;
    if (mode == rs.temporal_mode) {
        dim = row_end - row_begin;
    } else {
        dim = rs.nontemporal_dims[static_cast<std::size_t>(rs.nontemporal_slot(mode))];
    }
    Matrix out(static_cast<std::int64_t>(p) * rs.q, dim);
    for (int rep = 0; rep < p; ++rep) {
        const CompressionReplica& r = rs.replicas[static_cast<std::size_t>(rep)];
        if (mode == rs.temporal_mode)
            out.middleRows(static_cast<std::int64_t>(rep) * rs.q, rs.q) =
                r.temporal_rows(row_begin, row_end).transpose();
        else
            out.middleRows(static_cast<std::int64_t>(rep) * rs.q, rs.q) =
                r.nontemporal[static_cast<std::size_t>(rs.nontemporal_slot(mode))].transpose();
    }
    return out;
}

Matrix recover_nontemporal(const Matrix& stacked_factor, const Matrix& stacked_projection, int mode) {
    if (stacked_factor.rows() != stacked_projection.rows())
        throw ConfigError("recover_nontemporal: stack and projection row counts differ");
    return checked_solve(stacked_projection, stacked_factor, mode);
}

Matrix recover_nontemporal_weighted(const Matrix& stacked_factor, const Matrix& stacked_projection,
                                    int mode, int q, const Matrix& col_weights) {
    if (stacked_factor.rows() != stacked_projection.rows())
        throw ConfigError("recover_nontemporal: stack and projection row counts differ");
    const int rank = static_cast<int>(stacked_factor.cols());
    const int p = static_cast<int>(col_weights.rows());
    Matrix out(stacked_projection.cols(), rank);
    for (int r = 0; r < rank; ++r) {
        Matrix wproj = stacked_projection;
        Vector rhs = stacked_factor.col(r);
        for (int rep = 0; rep < p; ++rep) {
            const double w = col_weights(rep, r);
            wproj.middleRows(static_cast<std::int64_t>(rep) * q, q) *= w;
            rhs.segment(static_cast<std::int64_t>(rep) * q, q) *= w;
        }
        out.col(r) = checked_solve(wproj, rhs, mode);
    }
    return out;
}

TemporalAppendResult recover_temporal_append(const Matrix& temporal_stack, const ReplicaSet& rs,
                                             SummaryState& summaries, const Matrix& c_old,
                                             std::int64_t t_new, const Matrix* col_weights) {
    const int p = rs.p();
    const int q = rs.q;
    const int rank = static_cast<int>(temporal_stack.cols());
    if (temporal_stack.rows() != static_cast<std::int64_t>(p) * q)
        throw ConfigError("recover_temporal_append: stack rows != p*Q");
    if (t_new < 1) throw ConfigError("recover_temporal_append: t_new must be >= 1");
    if (col_weights && (col_weights->rows() != p || col_weights->cols() != rank))
        throw ConfigError("recover_temporal_append: weight matrix must be p x R");

    const std::int64_t k_old = c_old.rows();

    Matrix history(static_cast<std::int64_t>(p) * q, rank);
    for (int rep = 0; rep < p; ++rep) {
        Matrix& hist = summaries.history[static_cast<std::size_t>(rep)];
        if (hist.cols() == 0) hist = Matrix::Zero(q, rank);
        if (hist.rows() != q || hist.cols() != rank)
            throw ConfigError("recover_temporal_append: history accumulator shape mismatch");
        history.middleRows(static_cast<std::int64_t>(rep) * q, q) = hist;
    }

    const Matrix proj = stack_projections(rs, rs.temporal_mode, k_old, k_old + t_new);
    if (proj.rows() < proj.cols() + 1)
        throw NumericError("recover_temporal_append: p*Q too small for the batch extent");

    // Per column: stack_r = gauge_r * history_r + proj * (gauge_r * rows_r).
    // The gauge coefficient is 1 in exact arithmetic (the stack arrives in
    // the stored gauge) but fitting it jointly stops noise in the per-batch
    // scale estimate from leaking a multiple of the whole history into the
    // appended rows.
    Matrix new_rows(t_new, rank);
    double res_sq = 0.0, rhs_sq = 0.0;
    for (int r = 0; r < rank; ++r) {
        Vector rhs = temporal_stack.col(r);
        Vector hist_col = history.col(r);
        Matrix wproj = proj;
        if (col_weights) {
            for (int rep = 0; rep < p; ++rep) {
                const double w = (*col_weights)(rep, r);
                rhs.segment(static_cast<std::int64_t>(rep) * q, q) *= w;
                hist_col.segment(static_cast<std::int64_t>(rep) * q, q) *= w;
                wproj.middleRows(static_cast<std::int64_t>(rep) * q, q) *= w;
            }
        }
        Vector solved(t_new);
        Vector fitted_residual;
        if (hist_col.norm() <= kRankTol * std::max(1.0, rhs.norm())) {
            solved = checked_solve(wproj, rhs, rs.temporal_mode);
            fitted_residual = rhs - wproj * solved;
        } else {
            Matrix system(wproj.rows(), t_new + 1);
            system.leftCols(t_new) = wproj;
            system.col(t_new) = hist_col;
            Eigen::ColPivHouseholderQR<Matrix> qr(system);
            qr.setThreshold(kRankTol);
            if (qr.rank() < system.cols())
                throw NumericError("recover_temporal_append: rank-deficient joint system");
            const Vector sol = qr.solve(rhs);
            double gauge = sol(t_new);
            if (!std::isfinite(gauge))
                throw NumericError("recover_temporal_append: non-finite history gauge");
            // The coefficient refines a quantity that is exactly 1 in exact
            // arithmetic; far outside that it is itself noise, and dividing
            // by it would blow up the appended rows.
            if (std::abs(gauge - 1.0) > 0.5) {
                solved = checked_solve(wproj, rhs - hist_col, rs.temporal_mode);
                gauge = 1.0;
            } else {
                solved = sol.head(t_new) / gauge;
            }
            fitted_residual = rhs - gauge * (hist_col + wproj * solved);
        }
        new_rows.col(r) = solved;
        res_sq += fitted_residual.squaredNorm();
        rhs_sq += rhs.squaredNorm();
    }
    const double rel = rhs_sq > 0.0 ? std::sqrt(res_sq / rhs_sq) : 0.0;

    for (int rep = 0; rep < p; ++rep) {
        const Matrix w_new =
            rs.replicas[static_cast<std::size_t>(rep)].temporal_rows(k_old, k_old + t_new);
        summaries.history[static_cast<std::size_t>(rep)] += w_new.transpose() * new_rows;
    }
    return {std::move(new_rows), rel};
}

Matrix temporal_stack_from_summaries(const ReplicaSet& rs, const SummaryState& summaries,
                                     const std::vector<Matrix>& nontemporal_final) {
    const int p = rs.p();
    const int q = rs.q;
    const int order = rs.order();
    const int tmode = rs.temporal_mode;
    if (static_cast<int>(nontemporal_final.size()) != order - 1)
        throw ConfigError("temporal_stack_from_summaries: need one factor per non-temporal mode");
    const int rank = static_cast<int>(nontemporal_final.front().cols());

    Matrix stack(static_cast<std::int64_t>(p) * q, rank);
    for (int rep = 0; rep < p; ++rep) {
        std::vector<Matrix> compressed(static_cast<std::size_t>(order));
        int slot = 0;
        for (int n = 0; n < order; ++n) {
            if (n == tmode) {
                compressed[static_cast<std::size_t>(n)] = Matrix::Zero(q, rank);  // skipped below
                continue;
            }
            const Matrix& u =
                rs.replicas[static_cast<std::size_t>(rep)].nontemporal[static_cast<std::size_t>(rs.nontemporal_slot(n))];
            compressed[static_cast<std::size_t>(n)] =
                u.transpose() * nontemporal_final[static_cast<std::size_t>(slot)];
            ++slot;
        }
        const Matrix chain = khatri_rao_chain(compressed, tmode);
        const Matrix unfolding = matricize(summaries.y[static_cast<std::size_t>(rep)], tmode);
        Eigen::CompleteOrthogonalDecomposition<Matrix> cod(chain);
        cod.setThreshold(1e-8);
        stack.middleRows(static_cast<std::int64_t>(rep) * q, q) =
            cod.solve(unfolding.transpose()).transpose();
    }
    return stack;
}

Matrix refine_stack(AlignedStack& aligned, const ReplicaSet& rs,
                    const std::vector<Matrix>& nontemporal_solved) {
    const int p = rs.p();
    const int q = rs.q;
    const int tmode = rs.temporal_mode;
    const int order = rs.order();
    const int rank = static_cast<int>(aligned.stacks.front().cols());

    Matrix weights = Matrix::Ones(p, rank);
    if (nontemporal_solved.empty()) return weights;

    for (int rep = 0; rep < p; ++rep) {
        Vector temporal_scale = Vector::Ones(rank);
        Vector agreement = Vector::Ones(rank);
        int slot = 0;
        for (int n = 0; n < order; ++n) {
            if (n == tmode) continue;
            const Matrix& u =
                rs.replicas[static_cast<std::size_t>(rep)].nontemporal[static_cast<std::size_t>(rs.nontemporal_slot(n))];
            // Agreement is judged in an orthonormal basis of span(U_p);
            // raw Q-coordinates are dominated by the projections' common
            // direction and make everything look collinear.
            Eigen::LLT<Matrix> llt(Matrix(u.transpose() * u));
            const bool white = llt.info() == Eigen::Success;
            Matrix target = u.transpose() * nontemporal_solved[static_cast<std::size_t>(slot)];
            auto block = aligned.stacks[static_cast<std::size_t>(n)].middleRows(
                static_cast<std::int64_t>(rep) * q, q);
            Matrix zt = white ? Matrix(llt.matrixL().solve(target)) : target;
            Matrix zb = white ? Matrix(llt.matrixL().solve(Matrix(block))) : Matrix(block);
            for (int r = 0; r < rank; ++r) {
                const double bb = zb.col(r).squaredNorm();
                const double bt = zb.col(r).dot(zt.col(r));
                const double tt = zt.col(r).squaredNorm();
                const double scale = bb > 0.0 ? bt / bb : 0.0;
                const double cosine = (bb > 0.0 && tt > 0.0) ? bt / std::sqrt(bb * tt) : 0.0;
                if (!std::isfinite(scale) || std::abs(scale) < 1e-3 || std::abs(scale) > 1e3) {
                    agreement(r) = 0.0;
                    continue;
                }
                block.col(r) *= scale;
                temporal_scale(r) /= scale;
                agreement(r) *= std::abs(cosine);
            }
            ++slot;
        }
        auto tblock = aligned.stacks[static_cast<std::size_t>(tmode)].middleRows(
            static_cast<std::int64_t>(rep) * q, q);
        for (int r = 0; r < rank; ++r) {
            if (std::isfinite(temporal_scale(r)) && agreement(r) > 0.0)
                tblock.col(r) *= temporal_scale(r);
            const double a = agreement(r);
            weights(rep, r) = a <= 0.5 ? 0.0 : ((a - 0.5) / 0.5) * ((a - 0.5) / 0.5);
        }
    }

    // Keep every column solvable: if the surviving rows cannot cover the
    // largest mode extent, fall back to uniform weights for that column.
    std::int64_t max_dim = 0;
    for (std::int64_t d : rs.nontemporal_dims) max_dim = std::max(max_dim, d);
    for (int r = 0; r < rank; ++r) {
        double mass = 0.0;
        for (int rep = 0; rep < p; ++rep) mass += weights(rep, r) > 0.0 ? q : 0;
        if (mass < static_cast<double>(max_dim) + 1) weights.col(r).setOnes();
    }
    return weights;
}

bool kruskal_check(int q, const std::vector<int>& k_ranks, int rank) {
    if (q < 1 || rank < 1) throw ConfigError("kruskal_check: Q and R must be >= 1");
    if (k_ranks.size() < 2) throw ConfigError("kruskal_check: need k-ranks for >= 3 modes");
    long sum = 0;
    for (int r : k_ranks) {
        if (r < 1) throw ConfigError("kruskal_check: k-ranks must be >= 1");
        sum += std::min(q, r);
    }
    const long needed = 2L * rank + static_cast<long>(k_ranks.size()) - 1;
    return sum >= needed;
}

std::int64_t replica_bound(std::int64_t i_dim, std::int64_t j_dim, std::int64_t k_batch, int q,
                           int shared) {
    return replica_bound_nmode({i_dim, j_dim}, k_batch, q, shared);
}

std::int64_t replica_bound_nmode(const std::vector<std::int64_t>& nontemporal_dims,
                                 std::int64_t k_batch, int q, int shared) {
    if (q <= shared) throw ConfigError("replica_bound: requires Q > shared");
    if (nontemporal_dims.empty()) throw ConfigError("replica_bound: no non-temporal dims");
    double worst = static_cast<double>(nontemporal_dims[0] - shared) / static_cast<double>(q - shared);
    for (std::size_t m = 1; m < nontemporal_dims.size(); ++m)
        worst = std::max(worst, static_cast<double>(nontemporal_dims[m]) / q);
    worst = std::max(worst, static_cast<double>(k_batch) / q);
    return static_cast<std::int64_t>(std::ceil(worst));
}

GaugeMatch match_columns(const std::vector<Matrix>& current, const std::vector<Matrix>& stored) {
    if (current.size() != stored.size() || current.empty())
        throw ConfigError("match_columns: mode count mismatch");
    const int order = static_cast<int>(current.size());
    const int rank = static_cast<int>(current.front().cols());

    Matrix sim = Matrix::Ones(rank, rank);
    std::vector<Matrix> cur_unit(current.size()), sto_unit(stored.size());
    for (int n = 0; n < order; ++n) {
        cur_unit[static_cast<std::size_t>(n)] = column_normalized(current[static_cast<std::size_t>(n)]);
        sto_unit[static_cast<std::size_t>(n)] = column_normalized(stored[static_cast<std::size_t>(n)]);
        sim = sim.cwiseProduct((sto_unit[static_cast<std::size_t>(n)].transpose() *
                                cur_unit[static_cast<std::size_t>(n)])
                                   .cwiseAbs());
    }
    GaugeMatch gm;
    gm.perm = greedy_match(sim);
    gm.signs.assign(static_cast<std::size_t>(order), Vector::Ones(rank));
    gm.norms.assign(static_cast<std::size_t>(order), Vector::Ones(rank));
    for (int n = 0; n < order; ++n) {
        for (int i = 0; i < rank; ++i) {
            const int j = gm.perm[static_cast<std::size_t>(i)];
            const double cosine = sto_unit[static_cast<std::size_t>(n)].col(i).dot(
                cur_unit[static_cast<std::size_t>(n)].col(j));
            gm.signs[static_cast<std::size_t>(n)](i) = cosine < 0.0 ? -1.0 : 1.0;
            gm.norms[static_cast<std::size_t>(n)](i) = current[static_cast<std::size_t>(n)].col(j).norm();
        }
    }
    return gm;
}

}  // namespace cpstream
