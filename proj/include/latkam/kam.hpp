#pragma once

#include "latkam/cohomology.hpp"
#include "latkam/decay.hpp"
#include "latkam/embedding.hpp"
#include "latkam/model.hpp"
#include "latkam/splitting.hpp"

#include <optional>
#include <stdexcept>
#include <vector>

namespace latkam {

struct DegenerateEmbedding : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DegenerateTwist : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DegenerateParameter : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SeriesDivergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NoConvergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IterationRecord {
    int iter = 0;
    double errSup = 0.0;
    double errWeighted = 0.0;
    double lambdaNorm = 0.0;
    double isotropy = 0.0;     // sup_grid |L|
    double normN = 0.0;
    double invAvgA = 0.0;      // 1 / sigma_min(avg A)
    double invAvgQ = 0.0;      // 1 / sigma_min(avg Q)
    double obstruction = 0.0;  // |avg(DK^T J^c E^c)| seen by the center solve
    double mu1 = 0.0, mu2 = 0.0, mu3 = 0.0;
    double bundleDefect = 0.0;
    double tailFrac = 0.0;
};

/// How the counterterm is used.  Momentum translation pairs degenerately with
/// zero-winding (librational) tori: avg(Q) is the average of a derivative and
/// vanishes identically.  For exact-symplectic maps the average obstruction is
/// quadratically small on contractible tori, so `automatic` freezes lambda and
/// projects the residual average out (recording it), while winding tori keep
/// the translated-torus path.
enum class CountertermMode { automatic, always, never };

struct SolverOptions {
    DecayFunction gamma;
    double rho = 0.05;
    double tol = 1e-11;              // grid-sup stopping criterion
    int maxIter = 25;
    double seriesTol = 1e-14;
    double divisorFloor = 1e-13;
    double bundleRefreshDefect = 1e-9;
    GraphRefineOptions graph{};
    int rateNmax = 12;
    bool measureRatesEachIter = false;
    double twistFloor = 1e-12;       // |det avg(A)| floor
    CountertermMode counterterm = CountertermMode::automatic;
    bool verbose = false;

    explicit SolverOptions(DecayFunction g) : gamma(g) {}
};

struct KamState {
    ModelConfig model;
    TorusEmbedding K;
    VectorXd lambda;
    VectorXd omega;
    SplittingBundle bundle;
    std::vector<IterationRecord> history;
    IterationRecord diag;
};

/// E(theta) = F_lambda(K(theta)) - K(theta + omega) on the grid.
GridField invariance_error(const ModelConfig& cfg, const KamState& st);

double grid_sup(const GridField& G);

/// Per-grid-point geometry of the center equations.
struct CenterGeometry {
    std::vector<MatrixXd> Mt;       // 2W x 2l at theta
    std::vector<MatrixXd> MtJcMt;   // 2l x 2l, Mt^T J^c Mt at theta (isinvariant check)
    std::vector<MatrixXd> A;        // l x l twist integrand
    std::vector<MatrixXd> Q;        // l x l parameter pairing
    std::vector<MatrixXd> L;        // l x l isotropy defect
    std::vector<MatrixXd> H;        // 2l x l
    std::vector<MatrixXd> VinvRot;  // 2l x 2l, V(theta+omega)^{-1}
    std::vector<MatrixXd> MtRotT_Jc; // 2l x 2W: Mt(theta+omega)^T Jc(theta+omega)
    std::vector<MatrixXd> DKrotT_Jc; // l x 2W: DK(theta+omega)^T Jc(theta+omega)
    MatrixXd dLambdaF;              // 2W x l, constant
    MatrixXd avgA, avgQ;            // l x l
    double normN = 0.0;
    double normL = 0.0;             // sup_grid |L|
};

CenterGeometry center_geometry(const ModelConfig& cfg, const KamState& st,
                               const SolverOptions& opt);

struct CenterSolution {
    GridField DeltaC;
    VectorXd Lambda;
    double droppedAverage = 0.0; // |avg(T2)| projected out on the frozen branch
    bool countertermActive = false;
};

/// Triangular solve of the reduced center equations with the counterterm
/// choice avg(T2) = 0 (or the frozen-lambda average projection).
CenterSolution solve_center(const ModelConfig& cfg, const KamState& st, const CenterGeometry& geo,
                            const GridField& Ec, const SolverOptions& opt);

/// Convergent cocycle series for the stable and unstable projections.
std::pair<GridField, GridField> solve_hyperbolic(const ModelConfig& cfg, const KamState& st,
                                                 const GridField& E, const VectorXd& Lambda,
                                                 const SolverOptions& opt);

/// D_{lambda,K}F(Lambda, Delta) + E: the linearized operator applied to a
/// candidate correction, for residual checks.
GridField apply_linearized(const ModelConfig& cfg, const KamState& st, const GridField& Delta,
                           const VectorXd& Lambda);

KamState newton_step(const ModelConfig& cfg, const KamState& st, const SolverOptions& opt);

KamState solve(const ModelConfig& cfg, KamState st, const SolverOptions& opt);

/// Dense discretized Newton system (one-frequency tori, small instances):
/// unknowns (Delta on the grid, Lambda) with a zero-average-tangent gauge row.
std::pair<GridField, VectorXd> direct_newton_oracle(const ModelConfig& cfg, const KamState& st);

/// Fills st.diag from the current (K, lambda): error norms, isotropy, twist
/// and parameter averages, bundle defect, tail fraction.
void refresh_diagnostics(const ModelConfig& cfg, KamState& st, const SolverOptions& opt,
                         bool withRates = false);

/// min over tau of the grid sup distance between K1 o T_tau and K2
/// (coarse scan plus golden-section refinement); returns (tau, distance).
std::pair<VectorXd, double> align_phase(const TorusEmbedding& K1, const TorusEmbedding& K2);

} // namespace latkam
