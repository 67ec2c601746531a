// Command-line front end: synthetic data generation, stream runs, parameter
// sweeps and checkpoint inspection. Exit codes: 0 ok, 2 configuration error,
// 3 numerical failure, 4 I/O error.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cpstream/commands.hpp"

namespace {

std::vector<std::int64_t> parse_dims_arg(const std::string& s) {
    std::vector<std::int64_t> dims;
    std::string part;
    std::stringstream ss(s);
    while (std::getline(ss, part, 'x')) dims.push_back(std::stoll(part));
    return dims;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Streaming CP tensor decomposition over compressed summaries"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Flat key=value configuration file; flags win");

    // gen ---------------------------------------------------------------
    auto* gen = app.add_subcommand("gen", "Generate a synthetic low-rank tensor plus ground truth");
    std::string gen_dims = "50x50x50";
    cpstream::SynthSpec synth;
    std::string gen_out = "tensor.bin";
    gen->add_option("--dims", gen_dims, "Extents, e.g. 50x50x50");
    gen->add_option("--rank", synth.rank, "Ground-truth rank");
    gen->add_option("--noise-mu", synth.noise_mu, "Gaussian noise mean");
    gen->add_option("--noise-sigma", synth.noise_sigma, "Gaussian noise std deviation");
    gen->add_option("--seed", synth.seed, "Master seed");
    gen->add_option("--out", gen_out, "Output tensor path (ground truth gets .truth suffix)");

    // run ---------------------------------------------------------------
    auto* run = app.add_subcommand("run", "Stream a tensor batch-by-batch and write a CSV report");
    cpstream::RunSpec spec;
    std::string run_dims;
    run->add_option("--input", spec.tensor_path, "Tensor file (dense binary or text COO)");
    run->add_option("--dims", run_dims, "Generate input in-process with these extents");
    run->add_option("--rank", spec.config.rank, "Decomposition rank");
    run->add_option("--p", spec.config.p, "Number of replicas");
    run->add_option("--q", spec.config.q, "Compressed extent per mode");
    run->add_option("--shared", spec.config.shared, "Shared leading columns");
    run->add_option("--batch", spec.batch_size, "Slices per batch");
    run->add_option("--seed", spec.config.seed, "Master seed");
    run->add_option("--noise-mu", spec.synth.noise_mu, "Synthetic noise mean");
    run->add_option("--noise-sigma", spec.synth.noise_sigma, "Synthetic noise std deviation");
    run->add_option("--synth-rank", spec.synth.rank, "Synthetic ground-truth rank (defaults to --rank)")
        ->default_val(0);
    run->add_option("--truth", spec.truth_path, "Ground-truth model for congruence columns");
    run->add_option("--out", spec.out_csv, "CSV output path");
    run->add_option("--checkpoint", spec.checkpoint_path, "Checkpoint path");
    run->add_option("--checkpoint-every", spec.checkpoint_every, "Checkpoint every k batches");
    run->add_option("--stop-after", spec.stop_after, "Stop after k batches (for later resume)");
    run->add_flag("--resume", spec.resume, "Resume from the checkpoint");
    run->add_flag("--oracle", spec.with_oracle, "Also run full-tensor CP-ALS for comparison");
    run->add_flag("--enforce-bounds", spec.config.enforce_bounds,
                  "Reject configs failing the replica/identifiability bounds");
    run->add_option("--workers", spec.config.workers, "Replica worker threads (0 = cores)");
    run->add_flag("--strict", spec.config.strict, "Abort a batch on recovery residual warnings");
    run->add_flag("--zero-timings", spec.zero_timings, "Write zeros for timing columns");
    run->add_option("--als-iters", spec.config.als.max_iters, "ALS iteration cap");
    run->add_option("--als-tol", spec.config.als.rel_tol, "ALS relative fit tolerance");
    run->add_option("--als-restarts", spec.config.als.n_restarts, "ALS restarts");

    // sweep ---------------------------------------------------------------
    auto* sweep = app.add_subcommand("sweep", "Repeat a run over values of p, q or shared");
    std::string sweep_axis;
    std::vector<std::int64_t> sweep_values;
    std::string sweep_out = "sweep.csv";
    sweep->add_option("--axis", sweep_axis, "One of: p, q, shared")->required();
    sweep->add_option("--values", sweep_values, "Swept values")->required()->delimiter(',');
    sweep->add_option("--out", sweep_out, "Merged CSV output path");
    sweep->add_option("--input", spec.tensor_path, "Tensor file");
    sweep->add_option("--dims", run_dims, "Generate input in-process with these extents");
    sweep->add_option("--rank", spec.config.rank, "Decomposition rank");
    sweep->add_option("--p", spec.config.p, "Number of replicas");
    sweep->add_option("--q", spec.config.q, "Compressed extent per mode");
    sweep->add_option("--shared", spec.config.shared, "Shared leading columns");
    sweep->add_option("--batch", spec.batch_size, "Slices per batch");
    sweep->add_option("--seed", spec.config.seed, "Master seed");
    sweep->add_option("--noise-mu", spec.synth.noise_mu, "Synthetic noise mean");
    sweep->add_option("--noise-sigma", spec.synth.noise_sigma, "Synthetic noise std deviation");
    sweep->add_option("--truth", spec.truth_path, "Ground-truth model");
    sweep->add_option("--workers", spec.config.workers, "Replica worker threads");
    sweep->add_flag("--zero-timings", spec.zero_timings, "Write zeros for timing columns");

    // inspect ---------------------------------------------------------------
    auto* inspect = app.add_subcommand("inspect", "Pretty-print a checkpoint");
    std::string inspect_path;
    inspect->add_option("checkpoint", inspect_path, "Checkpoint file")->required();

    int spare = 0;
    run->add_option("--synth-seed", spare, "(reserved)")->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*gen) {
            synth.dims = parse_dims_arg(gen_dims);
            cpstream::cmd_gen(synth, gen_out, gen_out + ".truth");
            std::cout << "wrote " << gen_out << " and " << gen_out << ".truth\n";
        } else if (*run || *sweep) {
            if (!run_dims.empty()) {
                spec.use_synth = true;
                spec.synth.dims = parse_dims_arg(run_dims);
                spec.synth.seed = spec.config.seed;
                if (spec.synth.rank <= 0) spec.synth.rank = spec.config.rank;
            }
            if (*run) {
                cpstream::RunOutput out = cpstream::cmd_run(spec);
                if (!out.rows.empty())
                    std::cout << "batches=" << out.state.summaries.batches_seen
                              << " fitness=" << out.rows.back().fitness_pct << "%\n";
                if (!out.completed) std::cout << "stopped early; checkpoint written\n";
            } else {
                cpstream::cmd_sweep(spec, sweep_axis, sweep_values, sweep_out);
                std::cout << "wrote " << sweep_out << "\n";
            }
        } else if (*inspect) {
            cpstream::cmd_inspect(inspect_path, std::cout);
        }
    } catch (const cpstream::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const cpstream::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 4;
    } catch (const cpstream::NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
