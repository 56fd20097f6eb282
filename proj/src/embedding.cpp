#include "latkam/embedding.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace latkam {

namespace {
constexpr double two_pi = 2.0 * std::numbers::pi;
}

TorusEmbedding::TorusEmbedding(TorusGrid g, int kmax_, Window w, std::vector<int> centers_)
    : grid(g), kmax(kmax_), window(w), centers(std::move(centers_)),
      modes(MatrixXcd::Zero(2 * w.size(), g.size())),
      winding(Eigen::MatrixXi::Zero(w.size(), g.l)) {
    for (int j = 0; j < g.l; ++j)
        if (g.m[j] < 2 * kmax_ + 1) throw std::invalid_argument("TorusEmbedding: grid below 2*kmax+1");
}

int grid_size_for(int kmax, double dealias) {
    int need = static_cast<int>(std::ceil(dealias * (2 * kmax + 1)));
    // FFT-friendly: products of 2 and 3
    int m = 1;
    while (m < need) m *= 2;
    for (int cand = need; cand < m; ++cand) {
        int r = cand;
        while (r % 2 == 0) r /= 2;
        while (r % 3 == 0) r /= 3;
        if (r == 1) return cand;
    }
    return m;
}

TorusEmbedding constant_embedding(TorusGrid g, int kmax, Window w, std::vector<int> centers) {
    return TorusEmbedding(g, kmax, w, std::move(centers));
}

GridField evaluate_grid(const TorusEmbedding& K) {
    GridField G(K.grid, K.window);
    G.values = modes_to_grid(K.grid, K.modes);
    if (K.winding.cwiseAbs().sum() > 0) {
        const int ng = K.grid.size();
        for (int g = 0; g < ng; ++g) {
            auto idx = K.grid.unflatten(g);
            for (int s = 0; s < K.window.size(); ++s) {
                double lift = 0.0;
                for (int j = 0; j < K.grid.l; ++j)
                    lift += two_pi * K.winding(s, j) * (double(idx[j]) / K.grid.m[j]);
                G.values(2 * s, g) += lift;
            }
        }
    }
    return G;
}

TorusEmbedding from_grid(const GridField& G, int kmax, std::vector<int> centers,
                         const Eigen::MatrixXi* winding) {
    TorusEmbedding K(G.grid, kmax, G.window, std::move(centers));
    MatrixXd periodic = G.values;
    if (winding) {
        K.winding = *winding;
        const int ng = G.grid.size();
        for (int g = 0; g < ng; ++g) {
            auto idx = G.grid.unflatten(g);
            for (int s = 0; s < G.window.size(); ++s) {
                double lift = 0.0;
                for (int j = 0; j < G.grid.l; ++j)
                    lift += two_pi * (*winding)(s, j) * (double(idx[j]) / G.grid.m[j]);
                periodic(2 * s, g) -= lift;
            }
        }
    }
    K.modes = grid_to_modes(G.grid, periodic);
    band_limit(K.grid, K.modes, kmax);
    return K;
}

TorusEmbedding rotate(const TorusEmbedding& K, const VectorXd& omega) {
    TorusEmbedding out = K;
    rotate_modes(out.grid, out.modes, omega);
    if (K.winding.cwiseAbs().sum() > 0) {
        // the lift advances by 2 pi (winding . omega) at the zero mode
        for (int s = 0; s < K.window.size(); ++s) {
            double shift = 0.0;
            for (int j = 0; j < K.grid.l; ++j) shift += two_pi * K.winding(s, j) * omega[j];
            out.modes(2 * s, 0) += shift;
        }
    }
    return out;
}

MatrixXd derivative_grid(const TorusEmbedding& K) {
    const int n = 2 * K.window.size();
    const int ng = K.grid.size();
    MatrixXd DK(n * K.grid.l, ng);
    for (int j = 0; j < K.grid.l; ++j) {
        MatrixXcd dm = K.modes;
        derivative_modes(K.grid, dm, j);
        DK.middleRows(j * n, n) = modes_to_grid(K.grid, dm);
        for (int s = 0; s < K.window.size(); ++s)
            if (K.winding(s, j) != 0)
                DK.row(j * n + 2 * s).array() += two_pi * K.winding(s, j);
    }
    return DK;
}

double majorant_norm(const TorusEmbedding& K, int site, double rho) {
    const int ng = K.grid.size();
    const int s = K.window.index(site);
    double sum = 0.0;
    for (int g = 0; g < ng; ++g) {
        auto k = K.grid.modes(g);
        int k1 = 0;
        for (int j = 0; j < K.grid.l; ++j) k1 += std::abs(k[j]);
        double mag = std::hypot(std::abs(K.modes(2 * s, g)), std::abs(K.modes(2 * s + 1, g)));
        sum += mag * std::exp(two_pi * rho * k1);
    }
    return sum;
}

double embedding_norm(const TorusEmbedding& K, const std::vector<int>& centers,
                      const DecayFunction& gamma, double rho) {
    if (centers.empty()) throw std::invalid_argument("embedding_norm: empty center list");
    double worst = 0.0;
    for (int site = K.window.lo; site <= K.window.hi; ++site) {
        double m = majorant_norm(K, site, rho);
        if (m == 0.0) continue;
        double g = 0.0;
        for (int c : centers) g = std::max(g, gamma(std::abs(site - c)));
        worst = std::max(worst, m / g);
    }
    return worst;
}

double embedding_norm(const TorusEmbedding& K, const DecayFunction& gamma, double rho) {
    return embedding_norm(K, K.centers, gamma, rho);
}

double field_norm(const GridField& G, const std::vector<int>& centers, const DecayFunction& gamma) {
    if (centers.empty()) throw std::invalid_argument("field_norm: empty center list");
    double worst = 0.0;
    for (int s = 0; s < G.window.size(); ++s) {
        int site = G.window.lo + s;
        double m = 0.0;
        for (int g = 0; g < G.grid.size(); ++g)
            m = std::max(m, std::hypot(G.values(2 * s, g), G.values(2 * s + 1, g)));
        if (m == 0.0) continue;
        double gw = 0.0;
        for (int c : centers) gw = std::max(gw, gamma(std::abs(site - c)));
        worst = std::max(worst, m / gw);
    }
    return worst;
}

double tail_fraction(const TorusEmbedding& K, int band) {
    return tail_fraction_modes(K.grid, K.modes, band);
}

VectorXd eval_at(const TorusEmbedding& K, const VectorXd& theta) {
    VectorXcd v = eval_modes_at(K.grid, K.modes, theta);
    VectorXd out = v.real();
    if (K.winding.cwiseAbs().sum() > 0)
        for (int s = 0; s < K.window.size(); ++s) {
            double lift = 0.0;
            for (int j = 0; j < K.grid.l; ++j) lift += two_pi * K.winding(s, j) * theta[j];
            out[2 * s] += lift;
        }
    return out;
}

double reality_defect(const TorusEmbedding& K) {
    const int ng = K.grid.size();
    double worst = 0.0;
    for (int g = 0; g < ng; ++g) {
        auto idx = K.grid.unflatten(g);
        std::array<int, 3> neg{0, 0, 0};
        for (int j = 0; j < 3; ++j) neg[j] = idx[j] == 0 ? 0 : K.grid.m[j] - idx[j];
        int gneg = K.grid.flatten(neg);
        for (int r = 0; r < K.modes.rows(); ++r)
            worst = std::max(worst, std::abs(K.modes(r, g) - std::conj(K.modes(r, gneg))));
    }
    return worst;
}

} // namespace latkam
