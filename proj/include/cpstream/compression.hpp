#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cpstream/tensor.hpp"

namespace cpstream {

/// One replica's projection matrices. Non-temporal matrices are I_n x Q and
/// fixed for the lifetime of the stream; the temporal matrix gains rows as
/// batches arrive. The leading `shared` columns of every matrix are
/// bit-identical across replicas.
///
/// Only a row window of the temporal matrix is kept in memory: rows
/// [temporal_window_start, temporal_rows_total). Callers that never trim
/// (window start 0) see the full history; the streaming driver drops spent
/// rows after each batch since the summaries carry all past information.
struct CompressionReplica {
    int replica_id = 0;                    // 0-based
    std::vector<Matrix> nontemporal;       // by non-temporal mode, ascending
    Matrix temporal;                       // window rows x Q
    std::int64_t temporal_window_start = 0;
    std::int64_t temporal_rows_total = 0;  // == slices ingested

    /// Temporal rows [begin, end) as a (end-begin) x Q block; the range must
    /// lie inside the materialized window.
    Matrix temporal_rows(std::int64_t begin, std::int64_t end) const;
};

struct ReplicaSet {
    std::vector<CompressionReplica> replicas;
    std::uint64_t seed = 0;
    int q = 0;
    int shared = 0;
    int temporal_mode = 0;                  // position of the growing mode
    std::vector<std::int64_t> nontemporal_dims;  // ascending by original mode
    std::int64_t batches_drawn = 0;         // temporal extensions so far

    /// Gram matrix of the shared temporal columns over every row ever
    /// drawn. Lets the alignment stage whiten shared-row projections of the
    /// temporal factor without keeping the row history around.
    Matrix temporal_shared_gram;

    int p() const { return static_cast<int>(replicas.size()); }
    int order() const { return static_cast<int>(nontemporal_dims.size()) + 1; }

    /// Full-tensor mode index -> index into CompressionReplica::nontemporal.
    int nontemporal_slot(int mode) const;
};

/// Per-replica compressed summaries plus the temporal-history accumulators.
/// history[p] is Q x R and holds the running sum over past batches of
/// W_batch^T * C_batch; it is sized lazily by the recovery stage.
struct SummaryState {
    std::vector<DenseTensor> y;     // Q^N summaries, one per replica
    std::vector<Matrix> history;    // Q x R accumulators, one per replica
    std::int64_t batches_seen = 0;
};

/// Draw the p replicas' fixed non-temporal matrices. Entries are iid
/// uniform(0,1) from per-(replica, mode) substreams; the shared leading
/// block is drawn once per mode and copied into every replica. The temporal
/// matrices start empty. Deterministic given seed.
ReplicaSet gen_replicas(const std::vector<std::int64_t>& nontemporal_dims, int q, int p,
                        int shared, std::uint64_t seed, int temporal_mode = -1);

/// Append t_new fresh uniform rows to every replica's temporal matrix.
/// The shared leading columns of the new rows are drawn once and copied
/// across replicas; existing rows are untouched. batch_key defaults to
/// rs.batches_drawn, so re-running from a copied state is reproducible.
void extend_temporal(ReplicaSet& rs, std::int64_t t_new,
                     std::optional<std::uint64_t> batch_key = std::nullopt);

/// Drop temporal rows below the current total from the materialized window.
void drop_temporal_history(ReplicaSet& rs);

/// Project t through replica `replica`: mode-n products with the transposed
/// projection matrices, mode 0 first then ascending. The temporal mode uses
/// W rows [row_begin, row_end), which must match t's temporal extent.
DenseTensor compress(const DenseTensor& t, const ReplicaSet& rs, int replica,
                     std::int64_t row_begin, std::int64_t row_end);

SummaryState init_summaries(const ReplicaSet& rs);

/// Elementwise summary update y_p += z_p.
void update_summaries(SummaryState& state, const std::vector<DenseTensor>& z);

}  // namespace cpstream
