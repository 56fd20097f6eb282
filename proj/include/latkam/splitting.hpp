#pragma once

#include "latkam/embedding.hpp"
#include "latkam/kernels.hpp"
#include "latkam/model.hpp"

#include <array>
#include <stdexcept>
#include <vector>

namespace latkam {

struct ContractionFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invariant stable/center/unstable frames along the torus.  S[g] stacks the
/// bases [B^s | B^c | B^u] at grid point g; each block is kept orthonormal
/// and smooth in theta so the stacks can be evaluated at rotated points by
/// trigonometric interpolation.
struct SplittingBundle {
    TorusGrid grid;
    Window window;
    int ns = 0, nc = 0, nu = 0;
    std::vector<MatrixXd> S;

    double mu1 = 0.0, mu2 = 0.0, mu3 = 0.0, Ch = 0.0;
    double defect = -1.0;

    int dim() const { return ns + nc + nu; }
    Eigen::Block<const MatrixXd> Bs(int g) const { return S[g].block(0, 0, dim(), ns); }
    Eigen::Block<const MatrixXd> Bc(int g) const { return S[g].block(0, ns, dim(), nc); }
    Eigen::Block<const MatrixXd> Bu(int g) const { return S[g].block(0, ns + nc, dim(), nu); }

    /// Frames as one (2W*2W x Ng) stack for spectral evaluation at shifted angles.
    MatrixXd flatten() const;
    static std::vector<MatrixXd> unflatten(const TorusGrid& g, int n, const MatrixXd& flat);
};

MatrixXd symplectic_J(const Window& w);

/// Splitting of the uncoupled superposition: stable/unstable eigenvectors of
/// the one-site linearized map at the fixed point on quiescent sites, the full
/// (q,p) plane at each center.  Constant in theta.  Throws when the one-site
/// linearization is not hyperbolic (|trace| <= 2).
SplittingBundle initial_splitting(const ModelConfig& cfg, const TorusEmbedding& K);

struct GraphRefineOptions {
    double tol = 1e-10;        // target invariance defect
    int maxOuter = 12;
    int maxInner = 400;
    double innerTol = 1e-13;   // fixed-point update threshold
    int npower = 1;            // cocycle power; escalated automatically on failure
    bool verbose = false;
};

/// Invariance defect of the bundle under the cocycle DF o K over T_omega:
/// max over components of ||(Id - Pi^sigma_{theta+omega}) DF B^sigma_theta||
/// relative to ||DF B^sigma_theta||.
double invariance_defect(const SplittingBundle& b, const ModelConfig& cfg,
                         const TorusEmbedding& K, const VectorXd& omega);

/// Graph-transform refinement: fixed-point iteration for the four graphs
/// (stable, center-stable for the forward cocycle; unstable, center-unstable
/// for the inverse cocycle), intersection for the center, re-orthonormalized
/// frames.  Iterates until the invariance defect drops below tol.
SplittingBundle graph_refine(const SplittingBundle& b, const ModelConfig& cfg,
                             const TorusEmbedding& K, const VectorXd& omega,
                             const GraphRefineOptions& opt = {});

struct RateEstimate {
    double mu1 = 0.0, mu2 = 0.0, mu3 = 0.0, Ch = 0.0;
};

/// Power iteration of the cocycle restricted to each sub-bundle over
/// n = 1..nmax in the Gamma-weighted sup norm; geometric fit plus the largest
/// overshoot constant.
RateEstimate measure_rates(const SplittingBundle& b, const ModelConfig& cfg,
                           const TorusEmbedding& K, const VectorXd& omega,
                           const DecayFunction& gamma, const std::vector<int>& centers,
                           int nmax = 16);

/// Componentwise oblique projections of a tangent grid field; parts sum to G.
std::array<GridField, 3> project(const SplittingBundle& b, const GridField& G);

/// Projection using frames evaluated at theta + shift (spectral interpolation).
std::array<GridField, 3> project_shifted(const SplittingBundle& b, const GridField& G,
                                         const VectorXd& shift);

/// Largest normalized pairing Omega(u,v) over the pairs that vanish for a
/// whiskered torus: (s,s), (u,u), (s,c), (u,c).
double symplectic_orthogonality_residual(const SplittingBundle& b);

} // namespace latkam
