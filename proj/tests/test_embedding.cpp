#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "latkam/embedding.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace latkam;

namespace {
constexpr double two_pi = 2.0 * std::numbers::pi;

TorusEmbedding random_band_limited(TorusGrid grid, int kmax, Window w, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    GridField G(grid, w);
    for (int r = 0; r < G.values.rows(); ++r)
        for (int g = 0; g < grid.size(); ++g) G.values(r, g) = u(rng);
    TorusEmbedding K = from_grid(G, kmax, {(w.lo + w.hi) / 2});
    // band-limit by construction: regenerate values from the masked modes
    return K;
}

} // namespace

TEST_CASE("embedding: constant field keeps only the zero mode") {
    TorusGrid grid = TorusGrid::dim1(32);
    Window w{-2, 2};
    GridField G(grid, w);
    G.values.row(2 * w.index(0)).setConstant(0.7);
    TorusEmbedding K = from_grid(G, 8, {0});
    for (int g = 1; g < grid.size(); ++g) CHECK(std::abs(K.modes(2 * w.index(0), g)) < 1e-15);
    CHECK(K.modes(2 * w.index(0), 0).real() == doctest::Approx(0.7));
}

TEST_CASE("embedding: grid round trip on band-limited data") {
    TorusGrid grid = TorusGrid::dim1(48);
    Window w{-3, 3};
    std::mt19937_64 rng(101);
    TorusEmbedding K = random_band_limited(grid, 10, w, rng);
    GridField G = evaluate_grid(K);
    TorusEmbedding K2 = from_grid(G, 10, K.centers);
    CHECK((K.modes - K2.modes).cwiseAbs().maxCoeff() < 1e-13);
    CHECK(reality_defect(K) < 1e-14);
}

TEST_CASE("embedding: rotation is exact and invertible") {
    TorusGrid grid = TorusGrid::dim1(64);
    Window w{0, 0};
    std::mt19937_64 rng(7);
    TorusEmbedding K = random_band_limited(grid, 20, w, rng);
    VectorXd omega = VectorXd::Constant(1, (std::sqrt(5.0) - 1.0) / 2.0);
    TorusEmbedding back = rotate(rotate(K, omega), (-omega).eval());
    CHECK((K.modes - back.modes).cwiseAbs().maxCoeff() < 1e-14);

    // single harmonic with omega = 1/4 picks up the factor i
    TorusEmbedding H(grid, 4, w, {0});
    H.modes(0, 1) = Cx(0.5, 0.0);
    H.modes(0, 63) = Cx(0.5, 0.0);
    TorusEmbedding Hr = rotate(H, VectorXd::Constant(1, 0.25));
    CHECK(Hr.modes(0, 1).real() == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(Hr.modes(0, 1).imag() == doctest::Approx(0.5).epsilon(1e-15));

    // identity rotation and norm preservation
    TorusEmbedding same = rotate(K, VectorXd::Zero(1));
    CHECK((K.modes - same.modes).cwiseAbs().maxCoeff() == 0.0);
    double a = 0.0141;
    DecayFunction g(2.0, 0.25, a, 1);
    TorusEmbedding Kr = rotate(K, omega);
    CHECK(embedding_norm(Kr, g, 0.05) ==
          doctest::Approx(embedding_norm(K, g, 0.05)).epsilon(1e-12));
}

TEST_CASE("embedding: derivative of a circle") {
    TorusGrid grid = TorusGrid::dim1(32);
    Window w{0, 0};
    TorusEmbedding K(grid, 8, w, {0});
    // K(theta) = (sin 2 pi theta, cos 2 pi theta)
    K.modes(0, 1) = Cx(0.0, -0.5);
    K.modes(0, 31) = Cx(0.0, 0.5);
    K.modes(1, 1) = Cx(0.5, 0.0);
    K.modes(1, 31) = Cx(0.5, 0.0);
    MatrixXd DK = derivative_grid(K);
    CHECK(DK(0, 0) == doctest::Approx(two_pi).epsilon(1e-13));
    CHECK(DK(1, 0) == doctest::Approx(0.0).epsilon(1e-13));

    // derivative commutes with rotation
    VectorXd omega = VectorXd::Constant(1, 0.31830988618);
    MatrixXd a = derivative_grid(rotate(K, omega));
    MatrixXcd dm = grid_to_modes(grid, derivative_grid(K));
    rotate_modes(grid, dm, omega);
    MatrixXd b = modes_to_grid(grid, dm);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("embedding: winding lift convention") {
    TorusGrid grid = TorusGrid::dim1(16);
    Window w{0, 0};
    TorusEmbedding K(grid, 4, w, {0});
    K.winding(0, 0) = 1;
    GridField G = evaluate_grid(K);
    for (int g = 0; g < grid.size(); ++g)
        CHECK(G.values(0, g) == doctest::Approx(two_pi * g / grid.m[0]).epsilon(1e-14));
    MatrixXd DK = derivative_grid(K);
    CHECK(DK(0, 3) == doctest::Approx(two_pi).epsilon(1e-13));
    // from_grid with the known winding recovers a pure lift
    TorusEmbedding K2 = from_grid(G, 4, {0}, &K.winding);
    CHECK(K2.modes.cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("embedding: majorant norms") {
    TorusGrid grid = TorusGrid::dim1(32);
    Window w{-1, 1};
    TorusEmbedding K(grid, 8, w, {0});
    double A = 0.37;
    K.modes(2 * w.index(0), 1) = Cx(A / 2, 0.0);
    K.modes(2 * w.index(0), 31) = Cx(A / 2, 0.0);
    CHECK(majorant_norm(K, 0, 0.0) == doctest::Approx(A).epsilon(1e-14));
    CHECK(majorant_norm(K, 0, 0.1) == doctest::Approx(A * std::exp(two_pi * 0.1)).epsilon(1e-13));
    TorusEmbedding C(grid, 8, w, {0});
    C.modes(2 * w.index(0), 0) = Cx(-0.8, 0.0);
    CHECK(majorant_norm(C, 0, 0.0) == doctest::Approx(0.8).epsilon(1e-14));
}

TEST_CASE("embedding: weighted norm examples") {
    double a = max_prefactor(2.0, 0.5, 1);
    DecayFunction g(2.0, 0.5, a, 1);
    TorusGrid grid = TorusGrid::dim1(32);
    Window w{-8, 8};

    // support only at the center: norm = Gamma(0)^{-1} = 1/a
    TorusEmbedding K(grid, 8, w, {0});
    K.modes(2 * w.index(0), 1) = Cx(0.5, 0.0);
    K.modes(2 * w.index(0), 31) = Cx(0.5, 0.0);
    CHECK(embedding_norm(K, g, 0.0) == doctest::Approx(1.0 / a).epsilon(1e-12));

    // translate embedding and centers together: unchanged
    TorusEmbedding K2(grid, 8, w, {3});
    K2.modes(2 * w.index(3), 1) = Cx(0.5, 0.0);
    K2.modes(2 * w.index(3), 31) = Cx(0.5, 0.0);
    CHECK(embedding_norm(K2, g, 0.0) == doctest::Approx(embedding_norm(K, g, 0.0)).epsilon(1e-14));

    // deviation of size Gamma(5) at distance 5 contributes exactly 1
    TorusEmbedding K3(grid, 8, w, {0});
    K3.modes(2 * w.index(5), 0) = Cx(g(5), 0.0);
    CHECK(embedding_norm(K3, g, 0.0) == doctest::Approx(1.0).epsilon(1e-12));

    CHECK_THROWS(embedding_norm(K, std::vector<int>{}, g, 0.0));
}

TEST_CASE("embedding: tail fraction") {
    TorusGrid grid = TorusGrid::dim1(64);
    Window w{0, 0};
    std::mt19937_64 rng(11);
    TorusEmbedding K = random_band_limited(grid, 10, w, rng);
    CHECK(tail_fraction(K, 11) == 0.0);
    // white coefficients: cross-check the top band mass by direct sums
    TorusEmbedding Kw(grid, 20, w, {0});
    for (int g = 0; g < grid.size(); ++g) {
        auto k = grid.modes(g);
        if (std::abs(k[0]) <= 20) Kw.modes(0, g) = 1.0;
    }
    double frac = tail_fraction(Kw, 15);
    double direct = 0.0, total = 0.0;
    for (int g = 0; g < grid.size(); ++g) {
        auto k = grid.modes(g);
        if (std::abs(k[0]) <= 20) {
            total += 1.0;
            if (std::abs(k[0]) >= 15) direct += 1.0;
        }
    }
    CHECK(frac == doctest::Approx(direct / total).epsilon(1e-14));
}
