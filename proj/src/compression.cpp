#include "cpstream/compression.hpp"

#include <string>

#include "cpstream/rng.hpp"

namespace cpstream {

Matrix CompressionReplica::temporal_rows(std::int64_t begin, std::int64_t end) const {
    if (begin < temporal_window_start || end > temporal_rows_total || begin > end)
        throw ConfigError("temporal_rows: range [" + std::to_string(begin) + "," +
                          std::to_string(end) + ") outside materialized window");
    return temporal.middleRows(begin - temporal_window_start, end - begin);
}

int ReplicaSet::nontemporal_slot(int mode) const {
    if (mode == temporal_mode || mode < 0 || mode >= order())
        throw ConfigError("nontemporal_slot: bad mode");
    return mode < temporal_mode ? mode : mode - 1;
}

ReplicaSet gen_replicas(const std::vector<std::int64_t>& nontemporal_dims, int q, int p,
                        int shared, std::uint64_t seed, int temporal_mode) {
    if (q < 1) throw ConfigError("gen_replicas: Q must be >= 1");
    if (p < 1) throw ConfigError("gen_replicas: p must be >= 1");
    if (shared < 0 || shared > q)
        throw ConfigError("gen_replicas: shared must lie in [0, Q]");
    if (nontemporal_dims.empty()) throw ConfigError("gen_replicas: no non-temporal modes");
    for (std::int64_t d : nontemporal_dims)
        if (d < 1) throw ConfigError("gen_replicas: non-temporal extents must be >= 1");

    ReplicaSet rs;
    rs.seed = seed;
    rs.q = q;
    rs.shared = shared;
    rs.nontemporal_dims = nontemporal_dims;
    rs.temporal_shared_gram = Matrix::Zero(shared, shared);
    const int order = static_cast<int>(nontemporal_dims.size()) + 1;
    rs.temporal_mode = temporal_mode < 0 ? order - 1 : temporal_mode;
    if (rs.temporal_mode < 0 || rs.temporal_mode >= order)
        throw ConfigError("gen_replicas: temporal mode out of range");

    // Shared leading block per mode, drawn once.
    std::vector<Matrix> shared_blocks(nontemporal_dims.size());
    for (std::size_t m = 0; m < nontemporal_dims.size(); ++m) {
        shared_blocks[m] = Matrix(nontemporal_dims[m], shared);
        rng::Substream s(rng::derive(seed, {rng::kNontemporalShared, static_cast<std::uint64_t>(m)}));
        s.fill_uniform(shared_blocks[m]);
    }

    rs.replicas.resize(static_cast<std::size_t>(p));
    for (int r = 0; r < p; ++r) {
        CompressionReplica& rep = rs.replicas[static_cast<std::size_t>(r)];
        rep.replica_id = r;
        rep.nontemporal.resize(nontemporal_dims.size());
        for (std::size_t m = 0; m < nontemporal_dims.size(); ++m) {
            Matrix mat(nontemporal_dims[m], q);
            mat.leftCols(shared) = shared_blocks[m];
            if (q > shared) {
                rng::Substream s(rng::derive(
                    seed, {rng::kNontemporalPrivate, static_cast<std::uint64_t>(m),
                           static_cast<std::uint64_t>(r)}));
                s.fill_uniform(mat.rightCols(q - shared));
            }
            rep.nontemporal[m] = std::move(mat);
        }
        rep.temporal = Matrix(0, q);
    }
    return rs;
}

void extend_temporal(ReplicaSet& rs, std::int64_t t_new, std::optional<std::uint64_t> batch_key) {
    if (t_new < 1) throw ConfigError("extend_temporal: t_new must be >= 1");
    const std::uint64_t key = batch_key.value_or(static_cast<std::uint64_t>(rs.batches_drawn));
    const int q = rs.q;
    const int shared = rs.shared;

    Matrix shared_rows(t_new, shared);
    {
        rng::Substream s(rng::derive(rs.seed, {rng::kTemporalShared, key}));
        s.fill_uniform(shared_rows);
    }
    rs.temporal_shared_gram += shared_rows.transpose() * shared_rows;
    for (CompressionReplica& rep : rs.replicas) {
        Matrix fresh(t_new, q);
        fresh.leftCols(shared) = shared_rows;
        if (q > shared) {
            rng::Substream s(rng::derive(rs.seed, {rng::kTemporalPrivate, key,
                                                   static_cast<std::uint64_t>(rep.replica_id)}));
            s.fill_uniform(fresh.rightCols(q - shared));
        }
        Matrix grown(rep.temporal.rows() + t_new, q);
        grown.topRows(rep.temporal.rows()) = rep.temporal;
        grown.bottomRows(t_new) = fresh;
        rep.temporal = std::move(grown);
        rep.temporal_rows_total += t_new;
    }
    ++rs.batches_drawn;
}

void drop_temporal_history(ReplicaSet& rs) {
    for (CompressionReplica& rep : rs.replicas) {
        rep.temporal = Matrix(0, rs.q);
        rep.temporal_window_start = rep.temporal_rows_total;
    }
}

DenseTensor compress(const DenseTensor& t, const ReplicaSet& rs, int replica,
                     std::int64_t row_begin, std::int64_t row_end) {
    if (replica < 0 || replica >= rs.p()) throw ConfigError("compress: replica out of range");
    if (t.order() != rs.order()) throw ConfigError("compress: tensor order mismatch");
    const CompressionReplica& rep = rs.replicas[static_cast<std::size_t>(replica)];
    if (t.dim(rs.temporal_mode) != row_end - row_begin)
        throw ConfigError("compress: temporal extent does not match row range");

    DenseTensor out = t;
    for (int mode = 0; mode < rs.order(); ++mode) {
        Matrix proj;  // Q x I_mode
        if (mode == rs.temporal_mode) {
            proj = rep.temporal_rows(row_begin, row_end).transpose();
        } else {
            const Matrix& u = rep.nontemporal[static_cast<std::size_t>(rs.nontemporal_slot(mode))];
            if (u.rows() != t.dim(mode))
                throw ConfigError("compress: extent mismatch on mode " + std::to_string(mode + 1));
            proj = u.transpose();
        }
        out = mode_n_product(out, proj, mode);
    }
    return out;
}

SummaryState init_summaries(const ReplicaSet& rs) {
    SummaryState state;
    Shape summary_shape;
    summary_shape.dims.assign(static_cast<std::size_t>(rs.order()), rs.q);
    state.y.assign(static_cast<std::size_t>(rs.p()), DenseTensor::zeros(summary_shape));
    state.history.assign(static_cast<std::size_t>(rs.p()), Matrix(rs.q, 0));
    return state;
}

void update_summaries(SummaryState& state, const std::vector<DenseTensor>& z) {
    if (z.size() != state.y.size())
        throw ConfigError("update_summaries: replica count mismatch");
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (!(z[i].shape() == state.y[i].shape()))
            throw ConfigError("update_summaries: summary shape mismatch for replica " +
                              std::to_string(i + 1));
        auto& acc = state.y[i].values();
        const auto& add = z[i].values();
        for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += add[k];
    }
    ++state.batches_seen;
}

}  // namespace cpstream
