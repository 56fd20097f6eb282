// Command-line driver: single-site, continue, couple, cascade,
// check-frequency, check-decay, diagnose.

#include "latkam/harness.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <cstdio>

int main(int argc, char** argv) {
    CLI::App app{"whiskered tori and quasi-periodic breathers in Hamiltonian lattices"};
    app.require_subcommand(1);

    std::string configPath, outDir = "out", stateFile;
    int threads = 0;
    std::uint64_t seed = 0;
    app.add_option("--config", configPath, "configuration file (JSON)");
    app.add_option("--out", outDir, "output directory");
    app.add_option("--threads", threads, "OpenMP thread count (0 = runtime default)");
    app.add_option("--seed", seed, "seed recorded with the run");

    auto* cSingle = app.add_subcommand("single-site", "uncoupled one-site breather");
    auto* cContinue = app.add_subcommand("continue", "continuation in the coupling strength");
    auto* cCouple = app.add_subcommand("couple", "two-breather separation scan and solve");
    auto* cCascade = app.add_subcommand("cascade", "inductive multi-frequency cascade");
    auto* cFreq = app.add_subcommand("check-frequency", "Diophantine quality report");
    auto* cDecay = app.add_subcommand("check-decay", "decay-function axiom report");
    auto* cDiag = app.add_subcommand("diagnose", "recompute diagnostics of a state file");
    cDiag->add_option("state", stateFile, "state file to diagnose")->required();

    CLI11_PARSE(app, argc, argv);
    if (threads > 0) omp_set_num_threads(threads);

    try {
        if (cDiag->parsed()) return latkam::cmd_diagnose(stateFile, outDir);
        if (configPath.empty()) {
            std::fprintf(stderr, "error: --config is required for this command\n");
            return 2;
        }
        latkam::ExperimentConfig cfg = latkam::load_config(configPath);
        if (cSingle->parsed()) return latkam::cmd_single_site(cfg, outDir, seed);
        if (cContinue->parsed()) return latkam::cmd_continue(cfg, outDir, seed);
        if (cCouple->parsed()) return latkam::cmd_couple(cfg, outDir, seed);
        if (cCascade->parsed()) return latkam::cmd_cascade(cfg, outDir, seed);
        if (cFreq->parsed()) return latkam::cmd_check_frequency(cfg, outDir);
        if (cDecay->parsed()) return latkam::cmd_check_decay(cfg, outDir);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
