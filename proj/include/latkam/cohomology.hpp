#pragma once

#include "latkam/fourier.hpp"

#include <stdexcept>
#include <vector>

namespace latkam {

struct NonzeroAverage : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ResonantMode : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DiophantineReport {
    VectorXd omega;
    double nu = 0.0;
    int kmax = 0;
    double kappa = 0.0;             // max over modes of [ |k|^nu dist(k.omega) ]^{-1}
    std::vector<int> worstMode;
    bool resonant = false;          // an exact resonance was hit in the scan
};

enum class DiophantineFlavor { map, flow }; // dist to Z vs dist to 0

/// Exact scan of the mode box 0 < |k|_1 <= kmax; deterministic lexicographic
/// tie-break on the attaining mode.
DiophantineReport measure_diophantine(const VectorXd& omega, double nu, int kmax,
                                      DiophantineFlavor flavor = DiophantineFlavor::map);

struct CohomologySettings {
    double zeroAvgTol = 1e-12;
    double divisorFloor = 1e-13;
};

/// Solve v(theta+omega) - v(theta) = h(theta) mode by mode, rows independent.
/// Requires |avg(h)| <= zeroAvgTol per row; the solution has zero average.
MatrixXcd solve_difference(const TorusGrid& grid, const MatrixXcd& h_modes, const VectorXd& omega,
                           const CohomologySettings& st = {});

/// Solve sum_j omega_j dv/dtheta_j = h with zero average.
MatrixXcd solve_directional(const TorusGrid& grid, const MatrixXcd& h_modes, const VectorXd& omega,
                            const CohomologySettings& st = {});

/// Smallest divisor magnitude |e^{2 pi i k.omega} - 1| over 0 < |k|_inf <= kmax.
double min_divisor(const TorusGrid& grid, const VectorXd& omega, int kmax);

/// Diophantine quality of every truncation omega^(r) of a frequency sequence.
std::vector<DiophantineReport> check_sequence(const std::vector<VectorXd>& omegas,
                                              const std::vector<double>& nuSchedule,
                                              const std::vector<int>& kmaxSchedule);

} // namespace latkam
