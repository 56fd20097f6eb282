#pragma once

#include "latkam/kam.hpp"

#include <functional>

namespace latkam {

/// Change the active window, padding new sites with the fixed point and
/// dropping sites that fall outside (their content must be negligible).
TorusEmbedding rewindow(const TorusEmbedding& K, Window w);

/// (tau^m K)_i = K_{i+m}: the breather at c moves to c - m.
TorusEmbedding translate(const TorusEmbedding& K, int m);

/// Product-torus superposition K(theta1, theta2) = K1(theta1) + tau^m K2(theta2)
/// over the zero background.  K2 contributes modes with K1's indices zero and
/// vice versa; the result lives on `outGrid` with cutoff `kmaxOut`.
TorusEmbedding superpose(const TorusEmbedding& K1, const TorusEmbedding& K2, int m,
                         const TorusGrid& outGrid, int kmaxOut);

struct ScanRow {
    int m = 0;
    double errSup = 0.0;
    double errWeighted = 0.0; // in the Gamma_{betaTilde} norm, centers c12
};

struct CouplingScan {
    std::vector<ScanRow> rows;
    double fittedRate = 0.0; // slope of -log(err) vs m
};

/// Invariance error of the two-breather superposition at each separation,
/// measured in the slightly weaker decay norm Gamma_{betaTilde}.  The product
/// torus uses its own cutoff and per-angle grid (0 = derived from the cutoff);
/// factor tails beyond the cutoff must be negligible.
CouplingScan coupling_scan(const ModelConfig& cfg, const KamState& s1, const KamState& s2,
                           const std::vector<int>& distances, double betaTilde,
                           const SolverOptions& opt, int kmaxOut = 16, int gridOut = 0);

/// Assemble the coupled two-frequency state from two one-frequency breathers
/// at separation m (second factor moved to c2 + m), ready for the solver.
KamState coupled_state(const ModelConfig& cfg, const KamState& s1, const KamState& s2, int m,
                       int kmaxOut, int gridOut = 0);

/// Spatially non-resonant centers: no scan point is equidistant (1-norm) from
/// more than two centers.
bool check_nonresonant(const std::vector<Site>& centers, int margin = 8);

struct CascadePlan {
    std::vector<double> frequencies;  // omega_r, one per stage
    std::vector<int> separations;     // m_r for stages r >= 2
    std::vector<double> decaySchedule; // beta_r, strictly decreasing
    std::vector<int> bandSchedule;    // kmax per stage
    std::vector<double> tolSchedule;  // solver tol per stage
    std::vector<int> gridSchedule;    // grid per angle per stage (0 = auto)
    double betaTilde = 0.25;
    double smallnessCap = 5e-2;       // superposition error gate before solving
    int maxSeparationDoublings = 3;
    std::vector<double> nuSchedule;   // Diophantine exponents for check_sequence
    int kmaxDiophantine = 200;

    void validate() const;
};

struct CascadeResult {
    std::vector<KamState> stages;
    std::vector<double> interiorIncrement; // per added stage, at the first center
    std::vector<int> usedSeparations;
};

/// Inductive multi-frequency cascade: stage r solves from the superposition of
/// stage r-1 with a fresh single breather at separation m_r, doubling the
/// separation on failure (bounded retries).  `makeSingle` supplies a converged
/// one-frequency breather centered at 0 for a requested frequency and cutoff.
CascadeResult cascade(const ModelConfig& cfg, const CascadePlan& plan, const SolverOptions& opt,
                      const std::function<KamState(double omega, int kmax, double tol)>& makeSingle);

} // namespace latkam
