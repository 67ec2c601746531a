#include "cpstream/streaming.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>

#include "cpstream/rng.hpp"

namespace cpstream {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

void validate_config(const StreamConfig& cfg, int order) {
    if (order < 3) throw ConfigError("stream: tensor order must be >= 3");
    if (cfg.rank < 1) throw ConfigError("stream: rank must be >= 1");
    if (cfg.p < 1) throw ConfigError("stream: p must be >= 1");
    if (cfg.q < 1) throw ConfigError("stream: Q must be >= 1");
    if (cfg.shared < 0 || cfg.shared >= cfg.q)
        throw ConfigError("stream: shared must lie in [0, Q)");
    if (cfg.temporal_mode >= order)
        throw ConfigError("stream: temporal mode out of range");
    if (cfg.p >= 2 && cfg.shared < 1)
        throw ConfigError("stream: alignment across replicas needs shared >= 1");
}

int resolve_workers(const StreamConfig& cfg) {
    int w = cfg.workers;
    if (w <= 0) w = static_cast<int>(std::thread::hardware_concurrency());
    if (w < 1) w = 1;
    return std::min(w, cfg.p);
}

// Deterministic parallel loop: iteration i writes only slot i, so results
// are identical for any worker count.
void parallel_replicas(int count, int workers, const std::function<void(int)>& body) {
    if (workers <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    const int n_threads = std::min(workers, count);
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) {
        pool.emplace_back([&, t]() {
            for (int i = t; i < count; i += n_threads) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (std::thread& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

std::vector<std::int64_t> nontemporal_dims_of(const DenseTensor& t, int temporal_mode) {
    std::vector<std::int64_t> dims;
    for (int n = 0; n < t.order(); ++n)
        if (n != temporal_mode) dims.push_back(t.dim(n));
    return dims;
}

struct RecoveredBatch {
    std::vector<Matrix> nontemporal_final;  // stored-gauge unit-ish columns (unnormalized)
    Matrix appended_rows;                   // raw temporal rows in stored gauge
    TemporalAppendResult temporal;
};

// Shared core of init and ingest, entered after the summaries already
// include the new batch. Solves every mode from the aligned stacks, refines
// the per-replica scales and weights against the consensus, carries the
// result into the gauge of `stored` (or fixes a fresh gauge when stored is
// empty), and appends the temporal rows.
RecoveredBatch recover_batch(AlignedStack& aligned, ReplicaSet& rs, SummaryState& summaries,
                             const std::vector<Matrix>& stored_nontemporal, const Matrix& c_old_raw,
                             std::int64_t t_new) {
    const int order = rs.order();
    const int rank = static_cast<int>(aligned.stacks.front().cols());
    const int tmode = rs.temporal_mode;

    std::vector<Matrix> projs;   // non-temporal projections, ascending
    std::vector<Matrix> solved;  // non-temporal solves, ascending mode order
    projs.reserve(static_cast<std::size_t>(order - 1));
    solved.reserve(static_cast<std::size_t>(order - 1));
    for (int n = 0; n < order; ++n) {
        if (n == tmode) continue;
        projs.push_back(stack_projections(rs, n));
        solved.push_back(
            recover_nontemporal(aligned.stacks[static_cast<std::size_t>(n)], projs.back(), n));
    }

    // Consensus refinement: re-fit per-replica scales over all Q rows and
    // downweight replica-columns that disagree in direction.
    Matrix weights = Matrix::Ones(rs.p(), rank);
    for (int pass = 0; pass < 2; ++pass) {
        weights = refine_stack(aligned, rs, solved);
        int slot = 0;
        for (int n = 0; n < order; ++n) {
            if (n == tmode) continue;
            solved[static_cast<std::size_t>(slot)] = recover_nontemporal_weighted(
                aligned.stacks[static_cast<std::size_t>(n)], projs[static_cast<std::size_t>(slot)],
                n, rs.q, weights);
            ++slot;
        }
    }

    // Carry the solved factors into the stored gauge: permutation and signs
    // from full-column matching, unit-normalized columns. Component
    // magnitudes are recovered by the temporal regression below.
    std::vector<int> perm(static_cast<std::size_t>(rank));
    std::vector<Vector> signs;
    if (stored_nontemporal.empty()) {
        for (int i = 0; i < rank; ++i) perm[static_cast<std::size_t>(i)] = i;
        signs.assign(solved.size(), Vector::Ones(rank));
    } else {
        GaugeMatch gm = match_columns(solved, stored_nontemporal);
        perm = gm.perm;
        signs = std::move(gm.signs);
    }

    RecoveredBatch out;
    out.nontemporal_final.resize(solved.size());
    for (std::size_t m = 0; m < solved.size(); ++m) {
        Matrix fin(solved[m].rows(), rank);
        for (int i = 0; i < rank; ++i) {
            const int j = perm[static_cast<std::size_t>(i)];
            const double nrm = solved[m].col(j).norm();
            if (nrm <= 0.0)
                throw NumericError("recover: zero column in recovered factor");
            fin.col(i) = solved[m].col(j) * (signs[m](i) / nrm);
        }
        out.nontemporal_final[m] = std::move(fin);
    }

    // The temporal stack is regressed from the summaries against the final
    // non-temporal factors: it lands directly in the stored gauge and uses
    // every summary entry, so the append stays consistent with the history
    // accumulators under noise.
    const Matrix temporal_stack =
        temporal_stack_from_summaries(rs, summaries, out.nontemporal_final);

    out.temporal = recover_temporal_append(temporal_stack, rs, summaries, c_old_raw, t_new);
    out.appended_rows = out.temporal.new_rows;
    return out;
}

KruskalModel assemble_model(const std::vector<Matrix>& nontemporal, const Matrix& temporal_raw,
                            int tmode) {
    KruskalModel model;
    const int order = static_cast<int>(nontemporal.size()) + 1;
    model.factors.resize(static_cast<std::size_t>(order));
    int slot = 0;
    for (int n = 0; n < order; ++n) {
        if (n == tmode)
            model.factors[static_cast<std::size_t>(n)] = temporal_raw;
        else
            model.factors[static_cast<std::size_t>(n)] = nontemporal[static_cast<std::size_t>(slot++)];
    }
    model.lambda = Vector::Ones(static_cast<int>(temporal_raw.cols()));
    model.normalize();
    return model;
}

}  // namespace

StreamState init_stream(const DenseTensor& first_batch, const StreamConfig& cfg_in) {
    StreamConfig cfg = cfg_in;
    const int order = first_batch.order();
    if (cfg.temporal_mode < 0) cfg.temporal_mode = order - 1;
    validate_config(cfg, order);
    cfg.als.rank = cfg.rank;

    const int tmode = cfg.temporal_mode;
    const std::int64_t t0 = first_batch.dim(tmode);
    if (t0 < 1) throw ConfigError("init_stream: first batch has no temporal extent");
    const auto nt_dims = nontemporal_dims_of(first_batch, tmode);

    if (cfg.enforce_bounds) {
        const std::int64_t need = replica_bound_nmode(nt_dims, t0, cfg.q, cfg.shared);
        if (cfg.p < need)
            throw ConfigError("init_stream: p=" + std::to_string(cfg.p) +
                              " below the replica bound; need p >= " + std::to_string(need));
        std::vector<int> kranks;
        for (int n = 0; n < order; ++n)
            kranks.push_back(static_cast<int>(std::min<std::int64_t>(first_batch.dim(n), cfg.rank)));
        if (!kruskal_check(cfg.q, kranks, cfg.rank))
            throw ConfigError("init_stream: compressed decomposition fails the identifiability bound");
    }

    StreamState st;
    st.config = cfg;
    st.replicas = gen_replicas(nt_dims, cfg.q, cfg.p, cfg.shared, cfg.seed, tmode);
    st.summaries = init_summaries(st.replicas);

    const auto t_start = Clock::now();
    BatchRecord rec;
    rec.batch_index = 0;
    rec.t_new = t0;

    // Stage 1 (compress): temporal extension, projections, summary update.
    auto t_compress = Clock::now();
    extend_temporal(st.replicas, t0);

    const int workers = resolve_workers(cfg);
    std::vector<DenseTensor> z(static_cast<std::size_t>(cfg.p));
    parallel_replicas(cfg.p, workers, [&](int r) {
        z[static_cast<std::size_t>(r)] = compress(first_batch, st.replicas, r, 0, t0);
    });
    update_summaries(st.summaries, z);
    rec.compress_seconds = seconds_since(t_compress);

    std::vector<KruskalModel> models(static_cast<std::size_t>(cfg.p));
    auto t_als = Clock::now();
    parallel_replicas(cfg.p, workers, [&](int r) {
        AlsConfig als = cfg.als;
        als.seed = rng::derive(cfg.seed,
                               {rng::kStreamAls, static_cast<std::uint64_t>(r), std::uint64_t{0}});
        models[static_cast<std::size_t>(r)] = cp_als(st.summaries.y[static_cast<std::size_t>(r)], als).model;
    });
    rec.als_seconds = seconds_since(t_als);

    auto t_recover = Clock::now();
    AlignedStack aligned = align_replicas(models, st.replicas);
    rec.min_match_similarity = aligned.min_match_similarity;
    rec.max_offdiag_similarity = aligned.max_offdiag_similarity;

    RecoveredBatch rb = recover_batch(aligned, st.replicas, st.summaries, {}, Matrix(0, cfg.rank), t0);
    rec.temporal_residual = rb.temporal.solve_residual;
    rec.warned = rb.temporal.solve_residual > cfg.residual_warning;
    if (rec.warned && cfg.strict)
        throw NumericError("init_stream: temporal solve residual " +
                           std::to_string(rb.temporal.solve_residual) + " exceeds strict threshold");

    st.model = assemble_model(rb.nontemporal_final, rb.appended_rows, tmode);
    drop_temporal_history(st.replicas);
    st.slices_seen = t0;
    rec.recover_seconds = seconds_since(t_recover);
    rec.total_seconds = seconds_since(t_start);
    st.log.push_back(rec);
    return st;
}

void ingest_batch(StreamState& st, const DenseTensor& batch) {
    const int order = st.order();
    const int tmode = st.temporal_mode();
    if (batch.order() != order)
        throw ConfigError("ingest_batch: batch order mismatch at batch " +
                          std::to_string(st.summaries.batches_seen));
    for (int n = 0; n < order; ++n)
        if (n != tmode && batch.dim(n) != st.model.factors[static_cast<std::size_t>(n)].rows())
            throw ConfigError("ingest_batch: extent mismatch on mode " + std::to_string(n + 1) +
                              " at batch " + std::to_string(st.summaries.batches_seen));
    const std::int64_t t_new = batch.dim(tmode);
    if (t_new < 1) throw ConfigError("ingest_batch: batch has no temporal extent");

    // Strict mode rolls the whole state back if the batch is rejected.
    StreamState backup;
    if (st.config.strict) backup = st;
    const std::string context = "batch " + std::to_string(st.summaries.batches_seen) + ": ";

    try {
        const auto t_start = Clock::now();
        BatchRecord rec;
        rec.batch_index = st.summaries.batches_seen;
        rec.t_new = t_new;

        const std::int64_t k_old = st.slices_seen;

        auto t_compress = Clock::now();
        extend_temporal(st.replicas, t_new);
        const int workers = resolve_workers(st.config);
        std::vector<DenseTensor> z(static_cast<std::size_t>(st.config.p));
        parallel_replicas(st.config.p, workers, [&](int r) {
            z[static_cast<std::size_t>(r)] = compress(batch, st.replicas, r, k_old, k_old + t_new);
        });
        update_summaries(st.summaries, z);
        rec.compress_seconds = seconds_since(t_compress);

        std::vector<KruskalModel> models(static_cast<std::size_t>(st.config.p));
        auto t_als = Clock::now();
        parallel_replicas(st.config.p, workers, [&](int r) {
            AlsConfig als = st.config.als;
            als.rank = st.config.rank;
            als.seed = rng::derive(st.config.seed,
                                   {rng::kStreamAls, static_cast<std::uint64_t>(r),
                                    static_cast<std::uint64_t>(rec.batch_index)});
            models[static_cast<std::size_t>(r)] =
                cp_als(st.summaries.y[static_cast<std::size_t>(r)], als).model;
        });
        rec.als_seconds = seconds_since(t_als);

        auto t_recover = Clock::now();
        AlignedStack aligned = align_replicas(models, st.replicas);
        rec.min_match_similarity = aligned.min_match_similarity;
        rec.max_offdiag_similarity = aligned.max_offdiag_similarity;

        std::vector<Matrix> stored;
        for (int n = 0; n < order; ++n)
            if (n != tmode) stored.push_back(st.model.factors[static_cast<std::size_t>(n)]);
        const Matrix c_old_raw =
            st.model.factors[static_cast<std::size_t>(tmode)] * st.model.lambda.asDiagonal();

        RecoveredBatch rb = recover_batch(aligned, st.replicas, st.summaries, stored, c_old_raw, t_new);
        rec.temporal_residual = rb.temporal.solve_residual;
        rec.warned = rb.temporal.solve_residual > st.config.residual_warning;
        if (rec.warned && st.config.strict)
            throw NumericError("temporal solve residual " +
                               std::to_string(rb.temporal.solve_residual) +
                               " exceeds strict threshold");

        Matrix temporal_raw(k_old + t_new, st.config.rank);
        temporal_raw.topRows(k_old) = c_old_raw;
        temporal_raw.bottomRows(t_new) = rb.appended_rows;
        st.model = assemble_model(rb.nontemporal_final, temporal_raw, tmode);

        drop_temporal_history(st.replicas);
        st.slices_seen += t_new;
        rec.recover_seconds = seconds_since(t_recover);
        rec.total_seconds = seconds_since(t_start);
        st.log.push_back(rec);
    } catch (const ConfigError& e) {
        if (st.config.strict) st = std::move(backup);
        throw ConfigError(context + e.what());
    } catch (const NumericError& e) {
        if (st.config.strict) st = std::move(backup);
        throw NumericError(context + e.what());
    } catch (...) {
        if (st.config.strict) st = std::move(backup);
        throw;
    }
}

}  // namespace cpstream
