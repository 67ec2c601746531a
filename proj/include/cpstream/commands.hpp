#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cpstream/eval.hpp"
#include "cpstream/streaming.hpp"

namespace cpstream {

/// Synthetic dataset: reconstruct(random uniform factors) + N(mu, sigma)
/// noise on every entry. Deterministic per seed.
struct SynthSpec {
    std::vector<std::int64_t> dims;
    int rank = 1;
    double noise_mu = 0.0;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
};

struct SynthData {
    DenseTensor tensor;
    KruskalModel truth;
};
SynthData generate_synthetic(const SynthSpec& spec);

/// Writes the tensor (dense binary) and the ground-truth model next to it.
void cmd_gen(const SynthSpec& spec, const std::string& tensor_path, const std::string& truth_path);

/// One streaming run: input tensor, stream configuration, batching and
/// output paths. stop_after > 0 ends the run after that many batches
/// (counting the initial one) without the summary row, leaving a checkpoint
/// to resume from; resume continues an interrupted run and appends to the
/// same CSV.
struct RunSpec {
    std::string tensor_path;             // empty: use synth
    SynthSpec synth;
    bool use_synth = false;
    std::string truth_path;              // optional ground-truth model
    StreamConfig config;
    std::int64_t batch_size = 1;
    std::string out_csv;
    std::string checkpoint_path;
    std::int64_t checkpoint_every = 0;   // batches; 0 = final only
    std::int64_t stop_after = 0;         // 0 = run to completion
    bool resume = false;
    bool with_oracle = false;
    bool zero_timings = false;           // deterministic CSV output
};

/// One CSV row; batch == -1 marks the whole-run summary row.
struct EvalRow {
    std::uint64_t seed = 0;
    std::vector<std::int64_t> dims;
    int rank = 0, p = 0, q = 0, shared = 0;
    std::int64_t batch = 0;
    std::int64_t t_new = 0;
    double fitness_pct = 0.0;
    double congruence_min = 0.0, congruence_mean = 0.0;  // NaN without ground truth
    double compress_s = 0.0, als_s = 0.0, recover_s = 0.0, total_s = 0.0;
    std::int64_t bytes_replicas = 0, bytes_summaries = 0, bytes_factors = 0,
                 bytes_accumulators = 0, bytes_total = 0;
    std::int64_t formula_elements = 0;
    double oracle_fitness_pct = 0.0, oracle_s = 0.0;  // NaN unless --oracle summary row

    static std::string csv_header();
    std::string to_csv() const;
    static EvalRow from_csv(const std::string& line);
};

struct RunOutput {
    std::vector<EvalRow> rows;   // rows produced by this invocation only
    StreamState state;
    bool completed = false;      // false when stop_after ended the run early
    double oracle_fitness_pct = 0.0;
    double stream_fitness_pct = 0.0;
};

/// Execute a run in-process; cmd_run adds the CSV/checkpoint file handling.
RunOutput run_stream(const RunSpec& spec);
RunOutput cmd_run(const RunSpec& spec);

/// One full run per value of the swept parameter (p, q or shared), fixed
/// seeds, all rows merged into one CSV with the swept value appended.
/// A failing value is recorded as an error row and the sweep continues.
void cmd_sweep(const RunSpec& base, const std::string& axis,
               const std::vector<std::int64_t>& values, const std::string& out_csv);

void cmd_inspect(const std::string& checkpoint_path, std::ostream& out);

}  // namespace cpstream
