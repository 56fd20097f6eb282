#pragma once

#include "latkam/embedding.hpp"
#include "latkam/model.hpp"

#include <vector>

namespace latkam {

/// Grid-sweep kernels used by the solver inner loops.  `kernels` holds the
/// OpenMP implementations; `ref` holds straightforward serial versions kept
/// for testing (the rotation reference uses a naive DFT instead of the FFT).
/// Both sides must agree to near machine precision; see tests/test_kernels
/// and the bench target.
namespace kernels {

/// Trigonometric interpolation of every row of a (rows x Ng) stack at the
/// rotated points theta + omega.
MatrixXd rotate_stack(const TorusGrid& grid, const MatrixXd& stack, const VectorXd& omega);

/// One dense matrix per grid point applied to the matching column.
MatrixXd apply_pointwise(const std::vector<MatrixXd>& A, const MatrixXd& x);

/// Dense Jacobian of the lattice map at every column of X.
std::vector<MatrixXd> jacobian_grid(const ModelConfig& cfg, const GridField& X);

/// The lattice map applied to every column of X.
GridField map_grid(const ModelConfig& cfg, const GridField& X);

} // namespace kernels

namespace ref {

MatrixXd rotate_stack(const TorusGrid& grid, const MatrixXd& stack, const VectorXd& omega);
MatrixXd apply_pointwise(const std::vector<MatrixXd>& A, const MatrixXd& x);
std::vector<MatrixXd> jacobian_grid(const ModelConfig& cfg, const GridField& X);
GridField map_grid(const ModelConfig& cfg, const GridField& X);

} // namespace ref

} // namespace latkam
