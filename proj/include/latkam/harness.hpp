#pragma once

#include "latkam/coupling.hpp"
#include "latkam/kam.hpp"
#include "latkam/state_io.hpp"

#include <nlohmann/json.hpp>
#include <string>

namespace latkam {

/// Parsed and validated experiment configuration (unknown keys rejected).
struct ExperimentConfig {
    nlohmann::json raw;

    ModelConfig model;
    double alpha = 2.0;
    double beta = 0.5;       // decay rate of the working weight
    double betaTilde = 0.25; // weaker rate for coupling norms
    double prefactor = 0.0;  // 0: take max_prefactor(alpha, 0, dim)
    int decayDim = 1;

    double tol = 1e-11;
    int maxIter = 25;
    int kmax = 64;
    int gridM = 0;           // 0: auto from kmax
    double rho = 0.05;
    double seriesTol = 1e-14;
    double divisorFloor = 1e-13;

    std::vector<double> omegas;
    nlohmann::json experiment; // verb-specific parameters

    DecayFunction decay() const;
    SolverOptions solver_options() const;
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig config_from_json(const nlohmann::json& j);

double frequency_preset(const std::string& name); // "golden", "silver"

/// Initial guess for a one-site breather: libration amplitude matched to the
/// map rotation number by bisection, flow orbit sampled over one period.
KamState single_site_guess(const ExperimentConfig& cfg, double omega);

/// Converged one-site breather of the uncoupled model (epsilon forced to 0).
KamState run_single_site(const ExperimentConfig& cfg, double omega);

/// Warm-started continuation in epsilon from a converged state.
KamState continue_in_epsilon(const ExperimentConfig& cfg, const KamState& from, double eps);

/// Exponential localization fit: slope of -log|K_i| against |i - c| over the
/// sites where the deviation is numerically visible.
double decay_slope(const TorusEmbedding& K);

void write_history_csv(const std::vector<IterationRecord>& history, const std::string& path);

int cmd_single_site(const ExperimentConfig& cfg, const std::string& outDir, std::uint64_t seed);
int cmd_continue(const ExperimentConfig& cfg, const std::string& outDir, std::uint64_t seed);
int cmd_couple(const ExperimentConfig& cfg, const std::string& outDir, std::uint64_t seed);
int cmd_cascade(const ExperimentConfig& cfg, const std::string& outDir, std::uint64_t seed);
int cmd_check_frequency(const ExperimentConfig& cfg, const std::string& outDir);
int cmd_check_decay(const ExperimentConfig& cfg, const std::string& outDir);
int cmd_diagnose(const std::string& stateFile, const std::string& outDir);

} // namespace latkam
