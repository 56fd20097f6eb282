#pragma once

#include "latkam/decay.hpp"
#include "latkam/decay_operator.hpp"
#include "latkam/fourier.hpp"

#include <Eigen/Dense>
#include <vector>

namespace latkam {

/// Values of a phase-space (or tangent) quantity at all grid points:
/// (2W x Ng), column g = value at theta_g, interleaved (q_i, p_i) rows.
struct GridField {
    TorusGrid grid;
    Window window;
    MatrixXd values;

    GridField() = default;
    GridField(TorusGrid g, Window w) : grid(g), window(w), values(MatrixXd::Zero(2 * w.size(), g.size())) {}
};

/// Fourier representation of an embedding K: T^l -> M^window.  Coefficients
/// live on the full FFT grid with modes beyond kmax zeroed; reality is kept
/// as an invariant.  `winding` holds integer winding numbers of the q lift
/// per (site, angle); librational tori keep it zero.
struct TorusEmbedding {
    TorusGrid grid;
    int kmax = 0;
    Window window;
    std::vector<int> centers;
    MatrixXcd modes;    // (2W x Ng)
    Eigen::MatrixXi winding; // (W x l)

    TorusEmbedding() = default;
    TorusEmbedding(TorusGrid g, int kmax_, Window w, std::vector<int> centers_);

    int l() const { return grid.l; }
    int sites() const { return window.size(); }
};

/// Grid size for a cutoff: the smallest FFT-friendly M >= dealias*(2*kmax+1).
int grid_size_for(int kmax, double dealias = 2.0);

TorusEmbedding constant_embedding(TorusGrid g, int kmax, Window w, std::vector<int> centers);

GridField evaluate_grid(const TorusEmbedding& K);
TorusEmbedding from_grid(const GridField& G, int kmax, std::vector<int> centers,
                         const Eigen::MatrixXi* winding = nullptr);

TorusEmbedding rotate(const TorusEmbedding& K, const VectorXd& omega);

/// DK(theta) at every grid point: stacked (2W x l) blocks, stored as a
/// (2W*l x Ng) matrix with column-major blocks [d/dtheta_0 | d/dtheta_1 |...].
MatrixXd derivative_grid(const TorusEmbedding& K);

/// ell^1 majorant of site i at width rho (per-site vector magnitude).
double majorant_norm(const TorusEmbedding& K, int site, double rho);

/// sup_i min_j Gamma^{-1}(i - c_j) ||K_i||_rho over the window.
double embedding_norm(const TorusEmbedding& K, const std::vector<int>& centers,
                      const DecayFunction& gamma, double rho);
double embedding_norm(const TorusEmbedding& K, const DecayFunction& gamma, double rho);

/// Weighted norm of a grid field: sup_i min_j Gamma^{-1}(i - c_j) max_g |G_i(theta_g)|.
double field_norm(const GridField& G, const std::vector<int>& centers, const DecayFunction& gamma);

double tail_fraction(const TorusEmbedding& K, int band);

/// Evaluate the embedding at an arbitrary angle (includes the winding lift).
VectorXd eval_at(const TorusEmbedding& K, const VectorXd& theta);

/// Largest |coefficient| violation of coefficient(-k) == conj(coefficient(k)).
double reality_defect(const TorusEmbedding& K);

} // namespace latkam
