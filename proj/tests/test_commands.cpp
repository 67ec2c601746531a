#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cpstream/commands.hpp"
#include "cpstream/io.hpp"

using namespace cpstream;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

SynthSpec small_spec(std::uint64_t seed) {
    SynthSpec spec;
    spec.dims = {10, 9, 12};
    spec.rank = 2;
    spec.seed = seed;
    return spec;
}

RunSpec small_run(std::uint64_t seed) {
    RunSpec spec;
    spec.use_synth = true;
    spec.synth = small_spec(seed);
    spec.config.rank = 2;
    spec.config.p = 4;
    spec.config.q = 6;
    spec.config.shared = 2;
    spec.config.seed = seed;
    spec.config.workers = 1;
    spec.config.als.max_iters = 150;
    spec.batch_size = 4;
    spec.zero_timings = true;
    return spec;
}

}  // namespace

TEST_CASE("generate_synthetic determinism and exact rank") {
    const SynthData a = generate_synthetic(small_spec(5));
    const SynthData b = generate_synthetic(small_spec(5));
    CHECK(a.tensor == b.tensor);
    CHECK(a.truth.lambda == b.truth.lambda);

    // Noiseless data is exactly rank R.
    AlsConfig als;
    als.rank = 2;
    als.max_iters = 500;
    als.rel_tol = 1e-13;
    als.seed = 3;
    const AlsResult res = cp_als(a.tensor, als);
    CHECK(100.0 * res.fit >= 100.0 - 1e-4);
}

TEST_CASE("noise changes the tensor but not the ground truth factors") {
    SynthSpec noisy = small_spec(5);
    noisy.noise_mu = 0.1;
    noisy.noise_sigma = 0.2;
    const SynthData clean = generate_synthetic(small_spec(5));
    const SynthData with_noise = generate_synthetic(noisy);
    CHECK(with_noise.tensor != clean.tensor);
    for (int n = 0; n < 3; ++n)
        CHECK(with_noise.truth.factors[static_cast<std::size_t>(n)] ==
              clean.truth.factors[static_cast<std::size_t>(n)]);
}

TEST_CASE("cmd_gen writes byte-identical files for the same seed") {
    const std::string t1 = temp_path("gen_a.bin"), t2 = temp_path("gen_b.bin");
    cmd_gen(small_spec(9), t1, t1 + ".truth");
    cmd_gen(small_spec(9), t2, t2 + ".truth");
    CHECK(slurp(t1) == slurp(t2));
    CHECK(slurp(t1 + ".truth") == slurp(t2 + ".truth"));

    const DenseTensor t = read_tensor_dense(t1);
    CHECK((t.shape() == Shape{10, 9, 12}));
    const KruskalModel truth = read_kruskal(t1 + ".truth");
    CHECK(truth.rank() == 2);
    for (const std::string& p : {t1, t2, t1 + ".truth", t2 + ".truth"}) std::remove(p.c_str());
}

TEST_CASE("eval row csv round trip") {
    EvalRow row;
    row.seed = 42;
    row.dims = {50, 50, 50};
    row.rank = 5;
    row.p = 20;
    row.q = 30;
    row.shared = 5;
    row.batch = 3;
    row.t_new = 5;
    row.fitness_pct = 97.125;
    row.congruence_min = 0.991;
    row.congruence_mean = 0.995;
    row.compress_s = 0.5;
    row.als_s = 1.25;
    row.recover_s = 0.125;
    row.total_s = 1.9375;
    row.bytes_replicas = 480000;
    row.bytes_summaries = 4320000;
    row.bytes_factors = 4040;
    row.bytes_accumulators = 24000;
    row.bytes_total = 4828040;
    row.formula_elements = 1233525;
    row.oracle_fitness_pct = 98.5;
    row.oracle_s = 2.75;

    const EvalRow back = EvalRow::from_csv(row.to_csv());
    CHECK(back.seed == row.seed);
    CHECK(back.dims == row.dims);
    CHECK(back.rank == row.rank);
    CHECK(back.batch == row.batch);
    CHECK(back.fitness_pct == row.fitness_pct);
    CHECK(back.congruence_min == row.congruence_min);
    CHECK(back.total_s == row.total_s);
    CHECK(back.bytes_total == row.bytes_total);
    CHECK(back.formula_elements == row.formula_elements);
    CHECK(back.oracle_fitness_pct == row.oracle_fitness_pct);

    // NaN congruence (no ground truth) survives the trip as NaN.
    row.congruence_min = std::nan("");
    const EvalRow nan_back = EvalRow::from_csv(row.to_csv());
    CHECK(std::isnan(nan_back.congruence_min));
}

TEST_CASE("cmd_run produces one row per batch plus a summary") {
    RunSpec spec = small_run(21);
    spec.out_csv = temp_path("run_basic.csv");
    const RunOutput out = cmd_run(spec);
    CHECK(out.completed);
    // 12 slices in batches of 4: init + 2 ingests + summary.
    CHECK(out.rows.size() == 4);
    CHECK(out.rows.back().batch == -1);
    CHECK(out.rows.back().fitness_pct >= 90.0);

    std::ifstream csv(spec.out_csv);
    std::string line;
    std::getline(csv, line);
    CHECK(line == EvalRow::csv_header());
    int data_rows = 0;
    while (std::getline(csv, line))
        if (!line.empty()) {
            EvalRow parsed = EvalRow::from_csv(line);  // every row parses
            ++data_rows;
        }
    CHECK(data_rows == 4);
    std::remove(spec.out_csv.c_str());
}

TEST_CASE("batch size above the stream length runs init only") {
    RunSpec spec = small_run(33);
    spec.batch_size = 100;
    const RunOutput out = run_stream(spec);
    CHECK(out.state.summaries.batches_seen == 1);
    CHECK(out.rows.size() == 2);  // init row + summary
}

TEST_CASE("congruence columns appear when ground truth is passed") {
    const std::string tensor = temp_path("truth_in.bin");
    cmd_gen(small_spec(44), tensor, tensor + ".truth");
    RunSpec spec = small_run(44);
    spec.use_synth = false;
    spec.tensor_path = tensor;
    spec.truth_path = tensor + ".truth";
    const RunOutput out = run_stream(spec);
    CHECK(out.rows.back().congruence_min > 0.9);
    CHECK(out.rows.back().congruence_mean >= out.rows.back().congruence_min);
    std::remove(tensor.c_str());
    std::remove((tensor + ".truth").c_str());
}

TEST_CASE("interrupted and resumed run reproduces the straight-through CSV") {
    RunSpec straight = small_run(55);
    straight.out_csv = temp_path("straight.csv");
    straight.checkpoint_path = temp_path("straight.ckpt");
    cmd_run(straight);

    RunSpec part1 = small_run(55);
    part1.out_csv = temp_path("resumed.csv");
    part1.checkpoint_path = temp_path("resumed.ckpt");
    part1.stop_after = 2;
    const RunOutput p1 = cmd_run(part1);
    CHECK_FALSE(p1.completed);

    RunSpec part2 = part1;
    part2.stop_after = 0;
    part2.resume = true;
    const RunOutput p2 = cmd_run(part2);
    CHECK(p2.completed);

    CHECK(slurp(straight.out_csv) == slurp(part1.out_csv));
    CHECK(slurp(straight.checkpoint_path) == slurp(part1.checkpoint_path));
    for (const std::string& p :
         {straight.out_csv, straight.checkpoint_path, part1.out_csv, part1.checkpoint_path})
        std::remove(p.c_str());
}

TEST_CASE("oracle flag fills the comparison columns") {
    RunSpec spec = small_run(66);
    spec.with_oracle = true;
    const RunOutput out = run_stream(spec);
    CHECK(std::isfinite(out.oracle_fitness_pct));
    CHECK(out.rows.back().oracle_fitness_pct == out.oracle_fitness_pct);
    CHECK(out.stream_fitness_pct >= out.oracle_fitness_pct - 5.0);
}

TEST_CASE("cmd_sweep merges one run per value and records failures") {
    RunSpec base = small_run(77);
    const std::string out_csv = temp_path("sweep.csv");
    // Include an invalid value (shared >= q) to exercise the error row.
    cmd_sweep(base, "shared", {1, 2, 6}, out_csv);

    std::ifstream csv(out_csv);
    std::string line;
    std::getline(csv, line);
    CHECK(line == EvalRow::csv_header() + ",sweep_axis,sweep_value,status");
    int ok_rows = 0, error_rows = 0;
    while (std::getline(csv, line)) {
        if (line.find(",ok") != std::string::npos) ++ok_rows;
        if (line.find(",error:") != std::string::npos) ++error_rows;
    }
    CHECK(ok_rows == 8);  // two successful values, four rows each
    CHECK(error_rows == 1);
    std::remove(out_csv.c_str());

    CHECK_THROWS_AS(cmd_sweep(base, "shared", {}, out_csv), ConfigError);
    CHECK_THROWS_AS(cmd_sweep(base, "rank", {1}, out_csv), ConfigError);
}
