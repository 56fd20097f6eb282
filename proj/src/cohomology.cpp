#include "latkam/cohomology.hpp"

#include <cmath>
#include <numbers>

namespace latkam {

namespace {
constexpr double two_pi = 2.0 * std::numbers::pi;

double dist_to_int(double x) {
    return std::abs(x - std::round(x));
}

// Enumerate k in Z^l with 0 < |k|_1 <= kmax, visiting in lexicographic order.
template <typename F>
void scan_modes(int l, int kmax, F&& fn) {
    std::vector<int> k(l, -kmax);
    while (true) {
        int norm = 0;
        for (int j = 0; j < l; ++j) norm += std::abs(k[j]);
        if (norm > 0 && norm <= kmax) fn(k);
        int j = l - 1;
        while (j >= 0) {
            if (++k[j] <= kmax) break;
            k[j] = -kmax;
            --j;
        }
        if (j < 0) break;
    }
}

} // namespace

DiophantineReport measure_diophantine(const VectorXd& omega, double nu, int kmax,
                                      DiophantineFlavor flavor) {
    if (kmax < 1) throw std::invalid_argument("measure_diophantine: kmax >= 1");
    DiophantineReport rep;
    rep.omega = omega;
    rep.nu = nu;
    rep.kmax = kmax;
    rep.worstMode.assign(omega.size(), 0);
    const int l = static_cast<int>(omega.size());
    scan_modes(l, kmax, [&](const std::vector<int>& k) {
        double dot = 0.0;
        int norm = 0;
        for (int j = 0; j < l; ++j) {
            dot += k[j] * omega[j];
            norm += std::abs(k[j]);
        }
        double dist = flavor == DiophantineFlavor::map ? dist_to_int(dot) : std::abs(dot);
        if (dist == 0.0) {
            if (!rep.resonant) {
                rep.resonant = true;
                rep.worstMode = k;
            }
            return;
        }
        double val = 1.0 / (std::pow(double(norm), nu) * dist);
        if (val > rep.kappa) {
            rep.kappa = val;
            rep.worstMode = k;
        }
    });
    if (rep.resonant) rep.kappa = std::numeric_limits<double>::infinity();
    return rep;
}

double min_divisor(const TorusGrid& grid, const VectorXd& omega, int kmax) {
    double dmin = std::numeric_limits<double>::infinity();
    scan_modes(grid.l, grid.l * kmax, [&](const std::vector<int>& k) {
        for (int j = 0; j < grid.l; ++j)
            if (std::abs(k[j]) > kmax) return;
        double dot = 0.0;
        for (int j = 0; j < grid.l; ++j) dot += k[j] * omega[j];
        double div = 2.0 * std::abs(std::sin(std::numbers::pi * dot));
        dmin = std::min(dmin, div);
    });
    return dmin;
}

MatrixXcd solve_difference(const TorusGrid& grid, const MatrixXcd& h_modes, const VectorXd& omega,
                           const CohomologySettings& st) {
    const int ng = grid.size();
    for (int r = 0; r < h_modes.rows(); ++r)
        if (std::abs(h_modes(r, 0)) > st.zeroAvgTol)
            throw NonzeroAverage("solve_difference: right-hand side has nonzero average");
    MatrixXcd v = MatrixXcd::Zero(h_modes.rows(), ng);
    std::vector<Cx> div(ng);
    for (int g = 1; g < ng; ++g) {
        auto k = grid.modes(g);
        double dot = 0.0;
        bool any = false;
        for (int j = 0; j < grid.l; ++j) {
            dot += k[j] * omega[j];
            any = any || k[j] != 0;
        }
        if (!any) {
            div[g] = 0.0;
            continue;
        }
        Cx d = std::polar(1.0, two_pi * dot) - 1.0;
        if (std::abs(d) < st.divisorFloor)
            throw ResonantMode("solve_difference: divisor below floor inside the band");
        div[g] = d;
    }
#pragma omp parallel for schedule(static)
    for (int r = 0; r < h_modes.rows(); ++r)
        for (int g = 1; g < ng; ++g)
            if (div[g] != Cx(0.0)) v(r, g) = h_modes(r, g) / div[g];
    return v;
}

MatrixXcd solve_directional(const TorusGrid& grid, const MatrixXcd& h_modes, const VectorXd& omega,
                            const CohomologySettings& st) {
    const int ng = grid.size();
    for (int r = 0; r < h_modes.rows(); ++r)
        if (std::abs(h_modes(r, 0)) > st.zeroAvgTol)
            throw NonzeroAverage("solve_directional: right-hand side has nonzero average");
    MatrixXcd v = MatrixXcd::Zero(h_modes.rows(), ng);
    for (int g = 1; g < ng; ++g) {
        auto k = grid.modes(g);
        double dot = 0.0;
        bool any = false;
        for (int j = 0; j < grid.l; ++j) {
            dot += k[j] * omega[j];
            any = any || k[j] != 0;
        }
        if (!any) continue;
        Cx d(0.0, two_pi * dot);
        if (std::abs(d) < st.divisorFloor)
            throw ResonantMode("solve_directional: divisor below floor inside the band");
        for (int r = 0; r < h_modes.rows(); ++r) v(r, g) = h_modes(r, g) / d;
    }
    return v;
}

std::vector<DiophantineReport> check_sequence(const std::vector<VectorXd>& omegas,
                                              const std::vector<double>& nuSchedule,
                                              const std::vector<int>& kmaxSchedule) {
    if (omegas.empty()) return {};
    if (nuSchedule.size() < omegas.size() || kmaxSchedule.size() < omegas.size())
        throw std::invalid_argument("check_sequence: schedule shorter than sequence");
    std::vector<DiophantineReport> out;
    VectorXd cat;
    for (std::size_t r = 0; r < omegas.size(); ++r) {
        int l_r = static_cast<int>(omegas[r].size());
        int total = static_cast<int>(cat.size()) + l_r;
        if (nuSchedule[r] <= double(total))
            throw std::invalid_argument("check_sequence: need nu_r > r*l");
        VectorXd next(total);
        next.head(cat.size()) = cat;
        next.tail(l_r) = omegas[r];
        cat = next;
        out.push_back(measure_diophantine(cat, nuSchedule[r], kmaxSchedule[r]));
    }
    return out;
}

} // namespace latkam
