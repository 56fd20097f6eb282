#pragma once

#include "latkam/decay_operator.hpp"

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

namespace latkam {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Pairwise potential at lattice offset k: V_k(s) = quad/2 s^2 + quart/4 s^4.
struct CouplingTerm {
    int offset = 1;
    double quad = 0.0;
    double quart = 0.0;
};

/// Klein-Gordon type lattice: H = sum_i p_i^2/2 + W(q_i)
///                                + eps sum_k sum_i V_k(q_i - q_{i+k}).
/// The discrete map F is `substeps` kick-drift-kick Verlet steps of size
/// `stepSize`; sites outside the window are pinned at the fixed point (0,0).
struct ModelConfig {
    enum class Onsite { pendulum, polynomial };
    Onsite onsite = Onsite::pendulum;
    std::vector<double> poly;            // c[j] multiplies q^(j+2) when polynomial
    std::vector<CouplingTerm> couplings; // offsets >= 1
    double epsilon = 0.0;
    double stepSize = 0.1;
    int substeps = 5;
    Window window{-16, 16};
    int dim = 1;

    double onsiteW(double q) const;   // W(q)
    double onsiteWp(double q) const;  // W'(q)
    double onsiteWpp(double q) const; // W''(q)
    int coupling_range() const;
    double map_time() const { return stepSize * substeps; }

    /// Hyperbolic fixed point at q=0 (W''(0) < 0), V_k'(0) = 0, and when a
    /// decay function is supplied, |V_k| <= C_V Gamma(k) for the reported C_V.
    void validate(const DecayFunction* gamma = nullptr) const;
};

/// One (q,p) pair per window site; interleaved layout (q_0,p_0,q_1,p_1,...).
/// q is the lift to the real line (librational orbits never wind).
struct PhaseField {
    Window window;
    VectorXd v;

    PhaseField() = default;
    explicit PhaseField(Window w) : window(w), v(VectorXd::Zero(2 * w.size())) {}
    double& q(int site) { return v[2 * window.index(site)]; }
    double& p(int site) { return v[2 * window.index(site) + 1]; }
    double q(int site) const { return v[2 * window.index(site)]; }
    double p(int site) const { return v[2 * window.index(site) + 1]; }
};

/// dot p_i = -W'(q_i) - eps sum_k [V_k'(q_i - q_{i+k}) - V_k'(q_{i-k} - q_i)],
/// with out-of-window neighbors read as 0.  `q` holds one entry per site.
VectorXd force(const ModelConfig& cfg, const VectorXd& q);

/// d(force)_i/dq_j as a (W x W) matrix (banded with halfwidth coupling_range).
MatrixXd force_jacobian(const ModelConfig& cfg, const VectorXd& q);

double energy(const ModelConfig& cfg, const PhaseField& x);

PhaseField map_F(const ModelConfig& cfg, const PhaseField& x);

/// Exact chain-rule Jacobian of the Verlet composition, dense (2W x 2W).
MatrixXd dF_dense(const ModelConfig& cfg, const PhaseField& x);

/// Reference Jacobian assembled as a product of per-substep block factors,
/// returned with its certified decay structure.
DecayOperator dF(const ModelConfig& cfg, const PhaseField& x);

/// F followed by momentum translation p_{c_j} += lambda_j at each center.
PhaseField map_F_lambda(const ModelConfig& cfg, const std::vector<int>& centers,
                        const VectorXd& lambda, const PhaseField& x);

/// dF_lambda/dlambda_j: the constant unit momentum vector at center c_j.
VectorXd dF_dlambda(const Window& w, int center);

/// Adaptive Dormand-Prince integration of the continuous flow.  Used for
/// initial guesses only.
PhaseField flow(const ModelConfig& cfg, const PhaseField& x0, double t, double rtol = 1e-12);

/// Flow with first-order variational equations; DS columns span the tangent.
void flow_variational(const ModelConfig& cfg, PhaseField& x, MatrixXd& DS, double t,
                      double rtol = 1e-12);

/// Rotation number of the map F restricted to the single-site (q,p) plane,
/// measured around the elliptic point (pi, 0) by a weighted Birkhoff average
/// of angle increments over n iterates.  Positive by convention.
double rotation_number(const ModelConfig& cfg, double q0, int n = 20000);

/// Libration amplitude q0 in (pi, qhi) whose map rotation number is omega,
/// found by bisection.  Throws if omega is outside the attainable range.
double amplitude_for_rotation(const ModelConfig& cfg, double omega, double tol = 1e-12);

} // namespace latkam
