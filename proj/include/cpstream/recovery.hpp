#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cpstream/compression.hpp"
#include "cpstream/cp_als.hpp"
#include "cpstream/tensor.hpp"

namespace cpstream {

/// Column matching of candidate columns against reference columns from a
/// nonnegative similarity matrix sim(ref, cand). perm[ref] = cand.
std::vector<int> greedy_match(const Matrix& similarity, double tie_tol = 1e-9,
                              std::vector<std::string>* log = nullptr);

/// Exhaustive optimal matching (maximum total similarity); rank <= 8 only.
/// Test oracle for greedy_match and the small-rank path of congruence.
std::vector<int> exhaustive_match(const Matrix& similarity);

/// Replica decompositions aligned into one permutation/scale gauge and
/// stacked. stacks[n] is pQ x R with row block r holding replica r's mode-n
/// factor after weight redistribution, column matching against the
/// reference replica, and shared-row scale fixing.
struct AlignedStack {
    std::vector<Matrix> stacks;                 // one per mode
    std::vector<std::vector<int>> perms;        // per replica, perm[ref col] = replica col
    std::vector<std::vector<Vector>> scales;    // per replica, per mode, length-R scale
    Matrix pair_similarity;                     // p x R accepted-match similarity
    int reference = 0;
    double min_match_similarity = 1.0;          // worst accepted pairing
    double max_offdiag_similarity = 0.0;        // best rejected pairing
    std::vector<std::string> notes;             // tie/ambiguity log
};

/// Align the p replica decompositions. The weight vector of each model is
/// spread as lambda^(1/N) into every mode, columns are matched to the
/// reference replica by the product over modes of absolute cosine
/// similarity between the shared-projection rows (rows 0..shared), and a
/// least-squares scale on those rows reconciles signs and magnitudes.
/// Requires shared >= 1 when p >= 2; p == 1 returns the trivial stack.
AlignedStack align_replicas(const std::vector<KruskalModel>& models, const ReplicaSet& rs);

/// Row-stack of the replicas' transposed mode matrices, replica order
/// matching AlignedStack. For the temporal mode, W rows [row_begin, row_end)
/// are used. Result is pQ x dim.
Matrix stack_projections(const ReplicaSet& rs, int mode, std::int64_t row_begin = 0,
                         std::int64_t row_end = 0);

/// Least-squares recovery of one mode's factor: argmin_A |proj * A - stack|.
/// proj must be tall (pQ >= dim) with full column rank; rank is checked with
/// a rank-revealing QR at tolerance 1e-10 relative to the largest pivot.
Matrix recover_nontemporal(const Matrix& stacked_factor, const Matrix& stacked_projection, int mode);

/// Scale-free consensus recovery of every non-temporal factor. The plain
/// stacked solve treats the per-replica column scales as exact; profiling
/// those nuisance scales out of the same least-squares objective turns each
/// column into a subspace-intersection problem whose solution is the
/// smallest eigenvector of an accumulated projector matrix, with replica
/// contributions weighted by match quality and then by agreement with the
/// first-pass consensus. Coincides with recover_nontemporal on exactly
/// consistent stacks. Returned factors have unit columns in ascending
/// non-temporal mode order; weights are the final p x R replica weights.
struct ConsensusRecovery {
    std::vector<Matrix> factors;
    Matrix weights;
};
ConsensusRecovery recover_nontemporal_consensus(const AlignedStack& aligned, const ReplicaSet& rs);

struct TemporalAppendResult {
    Matrix new_rows;        // t_new x R, in the gauge of the supplied stack
    double solve_residual;  // relative residual of the stacked solve
};

/// Recover the rows the current batch appended to the temporal factor.
/// temporal_stack must already be in the gauge of the maintained model (the
/// caller re-gauges the aligned stack; see match_columns); per replica the
/// history accumulator is subtracted and the residuals are solved against
/// the stacked new-row projections. Updates summaries.history in place:
/// M_p += W_new,p^T * C_new. c_old supplies the number of already-recovered
/// rows; on the first batch (no history) this reduces to recover_nontemporal
/// on the temporal mode. col_weights (p x R), when given, downweights each
/// replica's rows per column in the least-squares systems.
TemporalAppendResult recover_temporal_append(const Matrix& temporal_stack, const ReplicaSet& rs,
                                             SummaryState& summaries, const Matrix& c_old,
                                             std::int64_t t_new,
                                             const Matrix* col_weights = nullptr);

/// Per-replica compressed temporal factors regressed from the maintained
/// summaries against fixed non-temporal factors: for each replica, solves
/// the temporal unfolding of Y_p against the Khatri-Rao chain of the
/// compressed non-temporal factors. In exact arithmetic this equals the
/// aligned temporal stack; under noise it uses every summary entry and is
/// already in the gauge of the supplied factors. Returns the pQ x R stack
/// in replica order. nontemporal_final holds the ambient factors in
/// ascending mode order (temporal mode excluded).
Matrix temporal_stack_from_summaries(const ReplicaSet& rs, const SummaryState& summaries,
                                     const std::vector<Matrix>& nontemporal_final);


/// Identifiability of the compressed decompositions:
/// sum_n min(Q, krank_n) >= 2R + (N - 1), the 3-mode form being >= 2R + 2.
bool kruskal_check(int q, const std::vector<int>& k_ranks, int rank);

/// Minimum replica count for near-certain identifiability:
/// ceil(max((I - shared) / (Q - shared), J / Q, K_batch / Q)).
std::int64_t replica_bound(std::int64_t i_dim, std::int64_t j_dim, std::int64_t k_batch, int q,
                           int shared);

/// N-mode generalization of replica_bound: the shared offset applies to the
/// first non-temporal mode, the remaining modes contribute I_n / Q, and the
/// batch extent contributes K_batch / Q.
std::int64_t replica_bound_nmode(const std::vector<std::int64_t>& nontemporal_dims,
                                 std::int64_t k_batch, int q, int shared);

/// Column correspondence between two factor lists over the same modes:
/// perm[stored col] = current col by product-of-|cos| greedy matching,
/// per-mode signs of the matched cosines, and the matched columns' norms.
struct GaugeMatch {
    std::vector<int> perm;
    std::vector<Vector> signs;  // per mode, +-1
    std::vector<Vector> norms;  // per mode, current-column 2-norms
};
GaugeMatch match_columns(const std::vector<Matrix>& current, const std::vector<Matrix>& stored);

}  // namespace cpstream
