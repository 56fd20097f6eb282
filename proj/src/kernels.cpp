#include "latkam/kernels.hpp"

#include <cmath>
#include <numbers>

namespace latkam {

namespace kernels {

MatrixXd rotate_stack(const TorusGrid& grid, const MatrixXd& stack, const VectorXd& omega) {
    MatrixXcd modes = grid_to_modes(grid, stack);
    rotate_modes(grid, modes, omega);
    return modes_to_grid(grid, modes);
}

MatrixXd apply_pointwise(const std::vector<MatrixXd>& A, const MatrixXd& x) {
    const int ng = static_cast<int>(A.size());
    MatrixXd out(A.empty() ? 0 : A[0].rows(), ng);
#pragma omp parallel for schedule(static)
    for (int g = 0; g < ng; ++g) out.col(g) = A[g] * x.col(g);
    return out;
}

std::vector<MatrixXd> jacobian_grid(const ModelConfig& cfg, const GridField& X) {
    const int ng = X.grid.size();
    std::vector<MatrixXd> out(ng);
#pragma omp parallel for schedule(dynamic)
    for (int g = 0; g < ng; ++g) {
        PhaseField x(X.window);
        x.v = X.values.col(g);
        out[g] = dF_dense(cfg, x);
    }
    return out;
}

GridField map_grid(const ModelConfig& cfg, const GridField& X) {
    GridField out(X.grid, X.window);
    const int ng = X.grid.size();
#pragma omp parallel for schedule(dynamic)
    for (int g = 0; g < ng; ++g) {
        PhaseField x(X.window);
        x.v = X.values.col(g);
        out.values.col(g) = map_F(cfg, x).v;
    }
    return out;
}

} // namespace kernels

namespace ref {

// O(Ng^2) per row: explicit mode sums, no FFT.
MatrixXd rotate_stack(const TorusGrid& grid, const MatrixXd& stack, const VectorXd& omega) {
    const int ng = grid.size();
    const double two_pi = 2.0 * std::numbers::pi;
    MatrixXcd modes = MatrixXcd::Zero(stack.rows(), ng);
    for (int g = 0; g < ng; ++g) {
        auto idx = grid.unflatten(g);
        for (int gp = 0; gp < ng; ++gp) {
            auto idxp = grid.unflatten(gp);
            double arg = 0.0;
            for (int j = 0; j < grid.l; ++j)
                arg -= two_pi * double(idx[j]) * double(idxp[j]) / grid.m[j];
            Cx e = std::polar(1.0 / ng, arg);
            for (int r = 0; r < stack.rows(); ++r) modes(r, g) += stack(r, gp) * e;
        }
    }
    MatrixXd out(stack.rows(), ng);
    for (int gp = 0; gp < ng; ++gp) {
        auto idxp = grid.unflatten(gp);
        for (int r = 0; r < stack.rows(); ++r) out(r, gp) = 0.0;
        for (int g = 0; g < ng; ++g) {
            auto k = grid.modes(g);
            double arg = 0.0;
            for (int j = 0; j < grid.l; ++j)
                arg += two_pi * k[j] * (double(idxp[j]) / grid.m[j] + omega[j]);
            Cx e = std::polar(1.0, arg);
            for (int r = 0; r < stack.rows(); ++r) out(r, gp) += (modes(r, g) * e).real();
        }
    }
    return out;
}

MatrixXd apply_pointwise(const std::vector<MatrixXd>& A, const MatrixXd& x) {
    const int ng = static_cast<int>(A.size());
    MatrixXd out(A.empty() ? 0 : A[0].rows(), ng);
    for (int g = 0; g < ng; ++g) out.col(g) = A[g] * x.col(g);
    return out;
}

std::vector<MatrixXd> jacobian_grid(const ModelConfig& cfg, const GridField& X) {
    const int ng = X.grid.size();
    std::vector<MatrixXd> out(ng);
    for (int g = 0; g < ng; ++g) {
        PhaseField x(X.window);
        x.v = X.values.col(g);
        out[g] = dF(cfg, x).dense(); // block-factor product path
    }
    return out;
}

GridField map_grid(const ModelConfig& cfg, const GridField& X) {
    GridField out(X.grid, X.window);
    for (int g = 0; g < X.grid.size(); ++g) {
        PhaseField x(X.window);
        x.v = X.values.col(g);
        out.values.col(g) = map_F(cfg, x).v;
    }
    return out;
}

} // namespace ref

} // namespace latkam
