#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cpstream/compression.hpp"
#include "cpstream/cp_als.hpp"
#include "cpstream/recovery.hpp"
#include "cpstream/tensor.hpp"

namespace cpstream {

struct StreamConfig {
    int rank = 1;
    int p = 1;
    int q = 1;
    int shared = 0;
    int temporal_mode = -1;  // -1: last mode
    AlsConfig als;
    std::uint64_t seed = 0;
    bool enforce_bounds = false;
    int workers = 0;   // 0: one per available core, capped at p
    bool strict = false;
    double residual_warning = 1e-3;
};

/// Per-batch diagnostics. Wall times live in memory only; checkpoints carry
/// the deterministic fields so fixed-seed runs serialize identically.
struct BatchRecord {
    std::int64_t batch_index = 0;
    std::int64_t t_new = 0;
    double temporal_residual = 0.0;      // relative stacked-solve residual
    double min_match_similarity = 1.0;
    double max_offdiag_similarity = 0.0;
    bool warned = false;
    double compress_seconds = 0.0;
    double als_seconds = 0.0;
    double recover_seconds = 0.0;
    double total_seconds = 0.0;
};

/// Full persistent state of one stream. The model is kept in Kruskal normal
/// form; its temporal factor has slices_seen rows. Replica temporal windows
/// are dropped after every ingest, so the footprint is flat in the stream
/// length apart from the temporal factor and the history accumulators.
struct StreamState {
    StreamConfig config;
    ReplicaSet replicas;
    SummaryState summaries;
    KruskalModel model;
    std::int64_t slices_seen = 0;
    std::vector<BatchRecord> log;

    int order() const { return replicas.order(); }
    int temporal_mode() const { return replicas.temporal_mode; }
};

/// Start a stream from its first batch: draws the replicas, compresses the
/// batch into the summaries, and runs one decomposition + recovery pass.
/// With enforce_bounds set, rejects configurations failing the replica
/// bound or the compressed-identifiability inequality.
StreamState init_stream(const DenseTensor& first_batch, const StreamConfig& cfg);

/// Ingest one batch of new slices on the temporal mode: extend the temporal
/// projections, compress and add into the summaries, decompose each summary,
/// align, and re-solve all factors (non-temporal replaced, temporal rows
/// appended). Deterministic given seeds, regardless of worker count.
void ingest_batch(StreamState& state, const DenseTensor& batch);

// -- Checkpointing -----------------------------------------------------------
// Container layout: magic "OCTS", u32 format version, u64 payload length,
// u64 CRC-64/ECMA of the payload, then tagged sections (config, replicas,
// summaries, model, log). Unknown versions are rejected; length or checksum
// mismatches raise IoError.

std::vector<std::uint8_t> checkpoint_save(const StreamState& state);
StreamState checkpoint_load(const std::vector<std::uint8_t>& bytes);

void checkpoint_save_file(const StreamState& state, const std::string& path);
StreamState checkpoint_load_file(const std::string& path);

/// Human-readable checkpoint summary (the CLI `inspect` subcommand).
void describe_checkpoint(const StreamState& state, std::ostream& out);

}  // namespace cpstream
