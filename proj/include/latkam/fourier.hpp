#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <vector>

namespace latkam {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;
using Cx = std::complex<double>;

/// Collocation grid on T^l (l <= 3), m[j] points along angle j.
/// Grid points are theta_g = (g_0/m_0, ..., g_{l-1}/m_{l-1}); the flat index
/// runs fastest along angle 0, matching the FFT layout used throughout.
struct TorusGrid {
    int l = 1;
    std::array<int, 3> m{1, 1, 1};

    TorusGrid() = default;
    TorusGrid(int l_, std::array<int, 3> m_) : l(l_), m(m_) {}
    static TorusGrid dim1(int m0) { return {1, {m0, 1, 1}}; }

    int size() const { return m[0] * m[1] * m[2]; }

    std::array<int, 3> unflatten(int g) const {
        std::array<int, 3> idx{0, 0, 0};
        idx[0] = g % m[0];
        idx[1] = (g / m[0]) % m[1];
        idx[2] = g / (m[0] * m[1]);
        return idx;
    }
    int flatten(std::array<int, 3> idx) const {
        return idx[0] + m[0] * (idx[1] + m[1] * idx[2]);
    }
    /// Signed Fourier mode of FFT bin b along an axis of length mm.
    static int signed_mode(int b, int mm) { return b <= mm / 2 ? b : b - mm; }
    std::array<int, 3> modes(int g) const {
        auto idx = unflatten(g);
        for (int j = 0; j < l; ++j) idx[j] = signed_mode(idx[j], m[j]);
        return idx;
    }
    bool operator==(const TorusGrid& o) const { return l == o.l && m == o.m; }
};

/// In-place unnormalized l-dimensional c2c FFT over a contiguous buffer of
/// grid.size() complex values.  Thread-safe; plans are cached per grid shape.
void fft_forward(const TorusGrid& grid, Cx* buf);
void fft_backward(const TorusGrid& grid, Cx* buf);

/// Row-wise transforms of a (rows x grid.size()) stack.  grid_to_modes divides
/// by grid.size() so that values(g) = sum_k modes(k) e^{2 pi i k.theta_g}.
MatrixXcd grid_to_modes(const TorusGrid& grid, const MatrixXd& values);
MatrixXd modes_to_grid(const TorusGrid& grid, const MatrixXcd& modes);

/// Multiply mode k by e^{2 pi i k.omega} (composition with T_omega).
void rotate_modes(const TorusGrid& grid, MatrixXcd& modes, const VectorXd& omega);

/// Partial derivative along angle j: multiply mode k by 2 pi i k_j.
void derivative_modes(const TorusGrid& grid, MatrixXcd& modes, int j);

/// Zero all modes with |k|_inf > kmax and enforce Hermitian symmetry
/// (coefficients of real data), including zeroing unpaired Nyquist bins.
void band_limit(const TorusGrid& grid, MatrixXcd& modes, int kmax);

/// ell^1 majorant per row: sum_k |modes(row,k)| e^{2 pi rho |k|_1}.
VectorXd majorant_rows(const TorusGrid& grid, const MatrixXcd& modes, double rho);

/// Fraction of the ell^1 mass (per row maximum) carried by modes with
/// |k|_inf >= band.
double tail_fraction_modes(const TorusGrid& grid, const MatrixXcd& modes, int band);

/// Evaluate sum_k modes(.,k) e^{2 pi i k.theta} at one arbitrary point.
VectorXcd eval_modes_at(const TorusGrid& grid, const MatrixXcd& modes, const VectorXd& theta);

} // namespace latkam
