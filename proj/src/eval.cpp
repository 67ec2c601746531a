#include "cpstream/eval.hpp"

#include <chrono>
#include <cmath>

#include "cpstream/recovery.hpp"

namespace cpstream {

double fitness(const DenseTensor& x, const DenseTensor& x_hat) {
    if (!(x.shape() == x_hat.shape())) throw ConfigError("fitness: shape mismatch");
    const double norm_x = frobenius_norm(x);
    if (norm_x == 0.0) throw NumericError("fitness: zero-norm reference tensor");
    double res_sq = 0.0;
    for (std::size_t i = 0; i < x.values().size(); ++i) {
        const double d = x.values()[i] - x_hat.values()[i];
        res_sq += d * d;
    }
    return 100.0 * (1.0 - std::sqrt(res_sq) / norm_x);
}

std::vector<double> congruence(const KruskalModel& ground, const KruskalModel& est) {
    if (ground.rank() != est.rank()) throw ConfigError("congruence: rank mismatch");
    if (ground.order() != est.order()) throw ConfigError("congruence: order mismatch");
    for (int n = 0; n < ground.order(); ++n)
        if (ground.factors[static_cast<std::size_t>(n)].rows() !=
            est.factors[static_cast<std::size_t>(n)].rows())
            throw ConfigError("congruence: factor shape mismatch on mode " + std::to_string(n + 1));

    const int rank = ground.rank();
    Matrix sim = Matrix::Ones(rank, rank);
    for (int n = 0; n < ground.order(); ++n) {
        Matrix g = ground.factors[static_cast<std::size_t>(n)];
        Matrix e = est.factors[static_cast<std::size_t>(n)];
        for (int c = 0; c < rank; ++c) {
            const double gn = g.col(c).norm(), en = e.col(c).norm();
            if (gn > 0.0) g.col(c) /= gn;
            if (en > 0.0) e.col(c) /= en;
        }
        sim = sim.cwiseProduct((g.transpose() * e).cwiseAbs());
    }
    const std::vector<int> perm = rank <= 6 ? exhaustive_match(sim) : greedy_match(sim);
    std::vector<double> scores(static_cast<std::size_t>(rank));
    for (int i = 0; i < rank; ++i) scores[static_cast<std::size_t>(i)] = sim(i, perm[static_cast<std::size_t>(i)]);
    return scores;
}

Footprint measure_footprint(const StreamState& st) {
    Footprint fp;
    for (const CompressionReplica& rep : st.replicas.replicas) {
        for (const Matrix& m : rep.nontemporal) fp.replica_bytes += 8 * m.size();
        fp.replica_bytes += 8 * rep.temporal.size();
    }
    for (const DenseTensor& y : st.summaries.y)
        fp.summary_bytes += 8 * y.num_elements();
    for (const Matrix& f : st.model.factors) fp.factor_bytes += 8 * f.size();
    fp.factor_bytes += 8 * st.model.lambda.size();
    for (const Matrix& h : st.summaries.history) fp.accumulator_bytes += 8 * h.size();
    return fp;
}

SpaceModel memory_account(const StreamConfig& cfg, const std::vector<std::int64_t>& nontemporal_dims,
                          std::int64_t t_old, std::int64_t t_new) {
    if (cfg.q < 1 || cfg.p < 1 || cfg.rank < 1)
        throw ConfigError("memory_account: invalid configuration");
    const std::int64_t order = static_cast<std::int64_t>(nontemporal_dims.size()) + 1;
    std::int64_t t_sum = 0;
    for (std::int64_t d : nontemporal_dims) t_sum += d;
    std::int64_t q_pow = 1;
    for (std::int64_t n = 0; n < order; ++n) q_pow *= cfg.q;

    SpaceModel sm;
    sm.predicted_replica_elements = static_cast<std::int64_t>(cfg.p) * cfg.q * t_sum;
    sm.predicted_summary_elements = static_cast<std::int64_t>(cfg.p) * q_pow;
    sm.predicted_factor_elements = (t_sum + t_old + t_new) * cfg.rank + cfg.rank;
    sm.predicted_accumulator_elements =
        static_cast<std::int64_t>(cfg.p) * cfg.q * cfg.rank;
    sm.predicted_elements = sm.predicted_replica_elements + sm.predicted_summary_elements +
                            sm.predicted_factor_elements + sm.predicted_accumulator_elements;

    sm.formula_elements = static_cast<std::int64_t>(cfg.p) * cfg.q *
                              (static_cast<std::int64_t>(cfg.p) * t_sum + t_new + cfg.rank) +
                          (t_sum + t_old) * cfg.rank + q_pow;
    sm.ratio = static_cast<double>(sm.predicted_elements) / static_cast<double>(sm.formula_elements);
    return sm;
}

BaselineResult baseline_full_cp(const DenseTensor& full, int rank, AlsConfig als) {
    if (full.num_elements() == 0) throw ConfigError("baseline_full_cp: empty tensor");
    als.rank = rank;
    const auto t0 = std::chrono::steady_clock::now();
    AlsResult res = cp_als(full, als);
    BaselineResult out;
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.model = std::move(res.model);
    out.fit = res.fit;
    out.fitness_pct = 100.0 * res.fit;
    return out;
}

}  // namespace cpstream
