#include "cpstream/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "cpstream/io.hpp"
#include "cpstream/recovery.hpp"
#include "cpstream/rng.hpp"

namespace cpstream {

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_dims(const std::vector<std::int64_t>& dims) {
    std::string out;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) out += 'x';
        out += std::to_string(dims[i]);
    }
    return out;
}

std::vector<std::int64_t> parse_dims(const std::string& s) {
    std::vector<std::int64_t> dims;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, 'x')) dims.push_back(std::stoll(part));
    return dims;
}

std::vector<std::int64_t> nontemporal_of(const std::vector<std::int64_t>& dims, int tmode) {
    std::vector<std::int64_t> out;
    for (int n = 0; n < static_cast<int>(dims.size()); ++n)
        if (n != tmode) out.push_back(dims[static_cast<std::size_t>(n)]);
    return out;
}

/// Ground-truth model restricted to the first k temporal rows.
KruskalModel truth_prefix(const KruskalModel& truth, int tmode, std::int64_t k) {
    KruskalModel out = truth;
    out.factors[static_cast<std::size_t>(tmode)] =
        truth.factors[static_cast<std::size_t>(tmode)].topRows(k);
    return out;
}

EvalRow make_row(const RunSpec& spec, const StreamState& st, const DenseTensor& full,
                 const std::optional<KruskalModel>& truth, std::int64_t batch_index) {
    const BatchRecord& rec = st.log.back();
    EvalRow row;
    row.seed = spec.config.seed;
    row.dims = full.shape().dims;
    row.dims[static_cast<std::size_t>(st.temporal_mode())] = st.slices_seen;
    row.rank = spec.config.rank;
    row.p = spec.config.p;
    row.q = spec.config.q;
    row.shared = spec.config.shared;
    row.batch = batch_index;
    row.t_new = rec.t_new;

    const DenseTensor prefix = slice_mode(full, st.temporal_mode(), 0, st.slices_seen);
    row.fitness_pct = fitness(prefix, reconstruct(st.model));

    if (truth) {
        const auto scores =
            congruence(truth_prefix(*truth, st.temporal_mode(), st.slices_seen), st.model);
        row.congruence_min = *std::min_element(scores.begin(), scores.end());
        double sum = 0.0;
        for (double s : scores) sum += s;
        row.congruence_mean = sum / static_cast<double>(scores.size());
    } else {
        row.congruence_min = std::numeric_limits<double>::quiet_NaN();
        row.congruence_mean = std::numeric_limits<double>::quiet_NaN();
    }

    if (!spec.zero_timings) {
        row.compress_s = rec.compress_seconds;
        row.als_s = rec.als_seconds;
        row.recover_s = rec.recover_seconds;
        row.total_s = rec.total_seconds;
    }

    const Footprint fp = measure_footprint(st);
    row.bytes_replicas = fp.replica_bytes;
    row.bytes_summaries = fp.summary_bytes;
    row.bytes_factors = fp.factor_bytes;
    row.bytes_accumulators = fp.accumulator_bytes;
    row.bytes_total = fp.total();

    const auto nt = nontemporal_of(full.shape().dims, st.temporal_mode());
    row.formula_elements =
        memory_account(st.config, nt, st.slices_seen - rec.t_new, rec.t_new).formula_elements;

    row.oracle_fitness_pct = std::numeric_limits<double>::quiet_NaN();
    row.oracle_s = std::numeric_limits<double>::quiet_NaN();
    return row;
}

}  // namespace

SynthData generate_synthetic(const SynthSpec& spec) {
    if (spec.dims.size() < 2) throw ConfigError("gen: need at least two extents");
    for (std::int64_t d : spec.dims)
        if (d < 1) throw ConfigError("gen: extents must be >= 1");
    if (spec.rank < 1) throw ConfigError("gen: rank must be >= 1");
    if (spec.noise_sigma < 0.0) throw ConfigError("gen: noise sigma must be >= 0");

    KruskalModel model;
    model.factors.resize(spec.dims.size());
    for (std::size_t n = 0; n < spec.dims.size(); ++n) {
        Matrix f(spec.dims[n], spec.rank);
        rng::Substream s(rng::derive(spec.seed, {rng::kSynthFactor, static_cast<std::uint64_t>(n)}));
        s.fill_uniform(f);
        model.factors[n] = std::move(f);
    }
    model.lambda = Vector::Ones(spec.rank);

    DenseTensor tensor = reconstruct(model);
    if (spec.noise_sigma > 0.0 || spec.noise_mu != 0.0) {
        rng::Substream s(rng::derive(spec.seed, {rng::kSynthNoise}));
        for (double& v : tensor.values()) v += s.normal(spec.noise_mu, spec.noise_sigma);
    }
    model.normalize();
    return {std::move(tensor), std::move(model)};
}

void cmd_gen(const SynthSpec& spec, const std::string& tensor_path, const std::string& truth_path) {
    SynthData data = generate_synthetic(spec);
    write_tensor_dense(data.tensor, tensor_path);
    write_kruskal(data.truth, truth_path);
}

std::string EvalRow::csv_header() {
    return "seed,dims,R,p,Q,shared,batch,t_new,fitness_pct,congruence_min,congruence_mean,"
           "compress_s,als_s,recover_s,total_s,bytes_replicas,bytes_summaries,bytes_factors,"
           "bytes_accumulators,bytes_total,formula_elements,oracle_fitness_pct,oracle_s";
}

std::string EvalRow::to_csv() const {
    std::ostringstream out;
    out << seed << ',' << fmt_dims(dims) << ',' << rank << ',' << p << ',' << q << ',' << shared
        << ',' << batch << ',' << t_new << ',' << fmt_double(fitness_pct) << ','
        << fmt_double(congruence_min) << ',' << fmt_double(congruence_mean) << ','
        << fmt_double(compress_s) << ',' << fmt_double(als_s) << ',' << fmt_double(recover_s) << ','
        << fmt_double(total_s) << ',' << bytes_replicas << ',' << bytes_summaries << ','
        << bytes_factors << ',' << bytes_accumulators << ',' << bytes_total << ','
        << formula_elements << ',' << fmt_double(oracle_fitness_pct) << ',' << fmt_double(oracle_s);
    return out.str();
}

EvalRow EvalRow::from_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() < 23) throw IoError("EvalRow: expected 23 fields, got " +
                                          std::to_string(fields.size()));
    EvalRow row;
    std::size_t i = 0;
    row.seed = std::stoull(fields[i++]);
    row.dims = parse_dims(fields[i++]);
    row.rank = std::stoi(fields[i++]);
    row.p = std::stoi(fields[i++]);
    row.q = std::stoi(fields[i++]);
    row.shared = std::stoi(fields[i++]);
    row.batch = std::stoll(fields[i++]);
    row.t_new = std::stoll(fields[i++]);
    row.fitness_pct = std::stod(fields[i++]);
    row.congruence_min = std::stod(fields[i++]);
    row.congruence_mean = std::stod(fields[i++]);
    row.compress_s = std::stod(fields[i++]);
    row.als_s = std::stod(fields[i++]);
    row.recover_s = std::stod(fields[i++]);
    row.total_s = std::stod(fields[i++]);
    row.bytes_replicas = std::stoll(fields[i++]);
    row.bytes_summaries = std::stoll(fields[i++]);
    row.bytes_factors = std::stoll(fields[i++]);
    row.bytes_accumulators = std::stoll(fields[i++]);
    row.bytes_total = std::stoll(fields[i++]);
    row.formula_elements = std::stoll(fields[i++]);
    row.oracle_fitness_pct = std::stod(fields[i++]);
    row.oracle_s = std::stod(fields[i++]);
    return row;
}

RunOutput run_stream(const RunSpec& spec) {
    if (spec.batch_size < 1) throw ConfigError("run: batch size must be >= 1");

    DenseTensor full;
    if (spec.use_synth)
        full = generate_synthetic(spec.synth).tensor;
    else if (!spec.tensor_path.empty())
        full = read_tensor_any(spec.tensor_path);
    else
        throw ConfigError("run: no input tensor given");

    std::optional<KruskalModel> truth;
    if (!spec.truth_path.empty()) truth = read_kruskal(spec.truth_path);

    RunOutput out;
    const int tmode = spec.config.temporal_mode < 0 ? full.order() - 1 : spec.config.temporal_mode;
    const std::int64_t k_total = full.dim(tmode);

    std::int64_t batches_done = 0;
    if (spec.resume) {
        if (spec.checkpoint_path.empty()) throw ConfigError("run: resume needs a checkpoint path");
        out.state = checkpoint_load_file(spec.checkpoint_path);
        out.state.config.workers = spec.config.workers;  // execution knob, not stream state
        batches_done = out.state.summaries.batches_seen;
    } else {
        const std::int64_t first = std::min(spec.batch_size, k_total);
        out.state = init_stream(slice_mode(full, tmode, 0, first), spec.config);
        batches_done = 1;
        out.rows.push_back(make_row(spec, out.state, full, truth, 0));
        if (spec.stop_after > 0 && batches_done >= spec.stop_after) {
            if (!spec.checkpoint_path.empty()) checkpoint_save_file(out.state, spec.checkpoint_path);
            out.completed = false;
            return out;
        }
    }

    while (out.state.slices_seen < k_total) {
        const std::int64_t t_new = std::min(spec.batch_size, k_total - out.state.slices_seen);
        const DenseTensor batch = slice_mode(full, tmode, out.state.slices_seen, t_new);
        ingest_batch(out.state, batch);
        ++batches_done;
        out.rows.push_back(make_row(spec, out.state, full, truth, batches_done - 1));

        if (!spec.checkpoint_path.empty() && spec.checkpoint_every > 0 &&
            batches_done % spec.checkpoint_every == 0)
            checkpoint_save_file(out.state, spec.checkpoint_path);
        if (spec.stop_after > 0 && batches_done >= spec.stop_after) {
            if (!spec.checkpoint_path.empty()) checkpoint_save_file(out.state, spec.checkpoint_path);
            out.completed = false;
            return out;
        }
    }

    // Whole-run summary row.
    EvalRow summary = make_row(spec, out.state, full, truth, -1);
    summary.t_new = out.state.slices_seen;
    double compress = 0.0, als = 0.0, recover = 0.0, total = 0.0;
    for (const BatchRecord& rec : out.state.log) {
        compress += rec.compress_seconds;
        als += rec.als_seconds;
        recover += rec.recover_seconds;
        total += rec.total_seconds;
    }
    if (!spec.zero_timings) {
        summary.compress_s = compress;
        summary.als_s = als;
        summary.recover_s = recover;
        summary.total_s = total;
    }
    out.stream_fitness_pct = summary.fitness_pct;

    if (spec.with_oracle) {
        AlsConfig als_cfg = spec.config.als;
        als_cfg.rank = spec.config.rank;
        als_cfg.seed = spec.config.seed;
        const BaselineResult oracle = baseline_full_cp(full, spec.config.rank, als_cfg);
        summary.oracle_fitness_pct = oracle.fitness_pct;
        summary.oracle_s = spec.zero_timings ? 0.0 : oracle.seconds;
        out.oracle_fitness_pct = oracle.fitness_pct;
    }
    out.rows.push_back(summary);

    if (!spec.checkpoint_path.empty()) checkpoint_save_file(out.state, spec.checkpoint_path);
    out.completed = true;
    return out;
}

RunOutput cmd_run(const RunSpec& spec) {
    RunOutput out = run_stream(spec);
    if (!spec.out_csv.empty()) {
        std::ofstream csv;
        if (spec.resume) {
            csv.open(spec.out_csv, std::ios::app);
        } else {
            csv.open(spec.out_csv, std::ios::trunc);
            if (csv) csv << EvalRow::csv_header() << '\n';
        }
        if (!csv) throw IoError("run: cannot open '" + spec.out_csv + "'");
        for (const EvalRow& row : out.rows) csv << row.to_csv() << '\n';
        if (!csv) throw IoError("run: write failed for '" + spec.out_csv + "'");
    }
    return out;
}

void cmd_sweep(const RunSpec& base, const std::string& axis,
               const std::vector<std::int64_t>& values, const std::string& out_csv) {
    if (values.empty()) throw ConfigError("sweep: empty value list");
    if (axis != "p" && axis != "q" && axis != "shared")
        throw ConfigError("sweep: axis must be one of p, q, shared");

    std::ofstream csv(out_csv, std::ios::trunc);
    if (!csv) throw IoError("sweep: cannot open '" + out_csv + "'");
    csv << EvalRow::csv_header() << ",sweep_axis,sweep_value,status\n";

    for (std::int64_t value : values) {
        RunSpec spec = base;
        spec.out_csv.clear();
        spec.checkpoint_path.clear();
        if (axis == "p")
            spec.config.p = static_cast<int>(value);
        else if (axis == "q")
            spec.config.q = static_cast<int>(value);
        else
            spec.config.shared = static_cast<int>(value);

        try {
            RunOutput out = run_stream(spec);
            for (const EvalRow& row : out.rows)
                csv << row.to_csv() << ',' << axis << ',' << value << ",ok\n";
        } catch (const Error& e) {
            EvalRow row;
            row.seed = spec.config.seed;
            row.dims = spec.use_synth ? spec.synth.dims : std::vector<std::int64_t>{};
            row.rank = spec.config.rank;
            row.p = spec.config.p;
            row.q = spec.config.q;
            row.shared = spec.config.shared;
            row.batch = -1;
            std::string what = e.what();
            std::replace(what.begin(), what.end(), ',', ';');
            csv << row.to_csv() << ',' << axis << ',' << value << ",error:" << what << "\n";
        }
    }
    if (!csv) throw IoError("sweep: write failed for '" + out_csv + "'");
}

void cmd_inspect(const std::string& checkpoint_path, std::ostream& out) {
    describe_checkpoint(checkpoint_load_file(checkpoint_path), out);
}

}  // namespace cpstream
