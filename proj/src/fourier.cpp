#include "latkam/fourier.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace latkam {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

struct PlanPair {
    fftw_plan fwd = nullptr;
    fftw_plan bwd = nullptr;
};

// Plans are created once per grid shape with FFTW_ESTIMATE (deterministic) and
// FFTW_UNALIGNED so they can run on any caller buffer via the new-array
// interface, which is thread-safe.
PlanPair& plan_for(const TorusGrid& grid) {
    static std::map<std::array<int, 4>, PlanPair> cache;
    static std::mutex mtx;
    std::array<int, 4> key{grid.l, grid.m[0], grid.m[1], grid.m[2]};
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;

    std::vector<Cx> scratch(grid.size());
    auto* p = reinterpret_cast<fftw_complex*>(scratch.data());
    // FFTW uses row-major dims; our flat index runs fastest along angle 0,
    // so dims are reversed.
    int dims[3];
    for (int j = 0; j < grid.l; ++j) dims[j] = grid.m[grid.l - 1 - j];
    unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    PlanPair pp;
    pp.fwd = fftw_plan_dft(grid.l, dims, p, p, FFTW_FORWARD, flags);
    pp.bwd = fftw_plan_dft(grid.l, dims, p, p, FFTW_BACKWARD, flags);
    if (!pp.fwd || !pp.bwd) throw std::runtime_error("fftw plan creation failed");
    return cache.emplace(key, pp).first->second;
}

} // namespace

void fft_forward(const TorusGrid& grid, Cx* buf) {
    auto* p = reinterpret_cast<fftw_complex*>(buf);
    fftw_execute_dft(plan_for(grid).fwd, p, p);
}

void fft_backward(const TorusGrid& grid, Cx* buf) {
    auto* p = reinterpret_cast<fftw_complex*>(buf);
    fftw_execute_dft(plan_for(grid).bwd, p, p);
}

MatrixXcd grid_to_modes(const TorusGrid& grid, const MatrixXd& values) {
    const int ng = grid.size();
    if (values.cols() != ng) throw std::invalid_argument("grid_to_modes: column count != grid size");
    MatrixXcd out(values.rows(), ng);
    const double inv = 1.0 / ng;
#pragma omp parallel
    {
        std::vector<Cx> buf(ng);
#pragma omp for schedule(static)
        for (int r = 0; r < values.rows(); ++r) {
            for (int g = 0; g < ng; ++g) buf[g] = values(r, g);
            fft_forward(grid, buf.data());
            for (int g = 0; g < ng; ++g) out(r, g) = buf[g] * inv;
        }
    }
    return out;
}

MatrixXd modes_to_grid(const TorusGrid& grid, const MatrixXcd& modes) {
    const int ng = grid.size();
    if (modes.cols() != ng) throw std::invalid_argument("modes_to_grid: column count != grid size");
    MatrixXd out(modes.rows(), ng);
#pragma omp parallel
    {
        std::vector<Cx> buf(ng);
#pragma omp for schedule(static)
        for (int r = 0; r < modes.rows(); ++r) {
            for (int g = 0; g < ng; ++g) buf[g] = modes(r, g);
            fft_backward(grid, buf.data());
            for (int g = 0; g < ng; ++g) out(r, g) = buf[g].real();
        }
    }
    return out;
}

void rotate_modes(const TorusGrid& grid, MatrixXcd& modes, const VectorXd& omega) {
    const int ng = grid.size();
    if (omega.size() != grid.l) throw std::invalid_argument("rotate_modes: omega dim != torus dim");
    VectorXcd phase(ng);
    for (int g = 0; g < ng; ++g) {
        auto k = grid.modes(g);
        double arg = 0.0;
        for (int j = 0; j < grid.l; ++j) arg += k[j] * omega[j];
        phase[g] = std::polar(1.0, two_pi * arg);
    }
#pragma omp parallel for schedule(static)
    for (int r = 0; r < modes.rows(); ++r)
        for (int g = 0; g < ng; ++g) modes(r, g) *= phase[g];
}

void derivative_modes(const TorusGrid& grid, MatrixXcd& modes, int j) {
    const int ng = grid.size();
    for (int g = 0; g < ng; ++g) {
        auto k = grid.modes(g);
        modes.col(g) *= Cx(0.0, two_pi * k[j]);
    }
}

void band_limit(const TorusGrid& grid, MatrixXcd& modes, int kmax) {
    const int ng = grid.size();
    for (int g = 0; g < ng; ++g) {
        auto k = grid.modes(g);
        bool keep = true;
        for (int j = 0; j < grid.l; ++j) {
            // drop the unpaired Nyquist bin of even-length axes as well
            if (std::abs(k[j]) > kmax || 2 * std::abs(k[j]) == grid.m[j]) keep = false;
        }
        if (!keep) modes.col(g).setZero();
    }
    // Hermitian symmetrization: average the (k, -k) pairs.
    for (int g = 0; g < ng; ++g) {
        auto idx = grid.unflatten(g);
        std::array<int, 3> neg{0, 0, 0};
        for (int j = 0; j < 3; ++j) neg[j] = idx[j] == 0 ? 0 : grid.m[j] - idx[j];
        int gneg = grid.flatten(neg);
        if (gneg < g) continue;
        for (int r = 0; r < modes.rows(); ++r) {
            Cx a = modes(r, g), b = modes(r, gneg);
            Cx s = 0.5 * (a + std::conj(b));
            modes(r, g) = s;
            modes(r, gneg) = std::conj(s);
        }
    }
}

VectorXd majorant_rows(const TorusGrid& grid, const MatrixXcd& modes, double rho) {
    const int ng = grid.size();
    VectorXd w(ng);
    for (int g = 0; g < ng; ++g) {
        auto k = grid.modes(g);
        int k1 = 0;
        for (int j = 0; j < grid.l; ++j) k1 += std::abs(k[j]);
        w[g] = std::exp(two_pi * rho * k1);
    }
    VectorXd out(modes.rows());
#pragma omp parallel for schedule(static)
    for (int r = 0; r < modes.rows(); ++r) {
        double s = 0.0;
        for (int g = 0; g < ng; ++g) s += std::abs(modes(r, g)) * w[g];
        out[r] = s;
    }
    return out;
}

double tail_fraction_modes(const TorusGrid& grid, const MatrixXcd& modes, int band) {
    const int ng = grid.size();
    double worst = 0.0;
    for (int r = 0; r < modes.rows(); ++r) {
        double total = 0.0, tail = 0.0;
        for (int g = 0; g < ng; ++g) {
            auto k = grid.modes(g);
            int kinf = 0;
            for (int j = 0; j < grid.l; ++j) kinf = std::max(kinf, std::abs(k[j]));
            double a = std::abs(modes(r, g));
            total += a;
            if (kinf >= band) tail += a;
        }
        if (total > 0.0) worst = std::max(worst, tail / total);
    }
    return worst;
}

VectorXcd eval_modes_at(const TorusGrid& grid, const MatrixXcd& modes, const VectorXd& theta) {
    const int ng = grid.size();
    VectorXcd acc = VectorXcd::Zero(modes.rows());
    for (int g = 0; g < ng; ++g) {
        auto k = grid.modes(g);
        double arg = 0.0;
        for (int j = 0; j < grid.l; ++j) arg += k[j] * theta[j];
        acc += modes.col(g) * std::polar(1.0, two_pi * arg);
    }
    return acc;
}

} // namespace latkam
