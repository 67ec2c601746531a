#pragma once

#include <cstdint>
#include <vector>

#include "cpstream/cp_als.hpp"
#include "cpstream/streaming.hpp"
#include "cpstream/tensor.hpp"

namespace cpstream {

/// Fitness(%) = 100 * (1 - |x - x_hat|_F / |x|_F). Can be negative when the
/// residual exceeds the signal. Throws NumericError for zero-norm x.
double fitness(const DenseTensor& x, const DenseTensor& x_hat);

/// Per-component recovery score against a ground-truth model: after optimal
/// column matching (exhaustive for R <= 6, greedy above), the product over
/// modes of the absolute cosine similarity of matched columns. Invariant
/// under column permutation, sign flips and rescaling of either argument.
std::vector<double> congruence(const KruskalModel& ground, const KruskalModel& est);

/// Byte accounting of a live stream state, by component. Element counts are
/// doubles at 8 bytes each.
struct Footprint {
    std::int64_t replica_bytes = 0;      // projection matrices incl. temporal window
    std::int64_t summary_bytes = 0;      // p * Q^N entries
    std::int64_t factor_bytes = 0;       // model factors + lambda
    std::int64_t accumulator_bytes = 0;  // temporal-history accumulators
    std::int64_t total() const {
        return replica_bytes + summary_bytes + factor_bytes + accumulator_bytes;
    }
};
Footprint measure_footprint(const StreamState& state);

/// Space model of one ingest step evaluated two ways. `predicted_elements`
/// is the documented accounting of the persistent single-copy state this
/// implementation holds between batches:
///   p*Q*T                        fixed non-temporal projections
///   p*Q^N                        summaries
///   (T + t_old + t_new)*R + R    factors and weights after the append
///   p*Q*R                        history accumulators
/// with T the sum of non-temporal extents; the per-batch temporal window
/// (p*Q*t_new) is transient and dropped after every ingest.
/// `formula_elements` is the reference cost model
/// pQ(pT + t_new + R) + (T + t_old)R + Q^N, which counts the non-temporal
/// projections once per worker pair (every worker holding all p triplets)
/// and the summary working set once per worker; the overhead between the
/// two accountings is their ratio, reported alongside.
struct SpaceModel {
    std::int64_t predicted_elements = 0;
    std::int64_t formula_elements = 0;
    double ratio = 0.0;  // predicted / formula
    std::int64_t predicted_replica_elements = 0;
    std::int64_t predicted_summary_elements = 0;
    std::int64_t predicted_factor_elements = 0;
    std::int64_t predicted_accumulator_elements = 0;
};
SpaceModel memory_account(const StreamConfig& cfg, const std::vector<std::int64_t>& nontemporal_dims,
                          std::int64_t t_old, std::int64_t t_new);

/// Full-tensor CP-ALS with timing; the recompute-from-scratch reference.
struct BaselineResult {
    KruskalModel model;
    double fitness_pct = 0.0;
    double fit = 0.0;
    double seconds = 0.0;
};
BaselineResult baseline_full_cp(const DenseTensor& full, int rank, AlsConfig als);

}  // namespace cpstream
