#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "latkam/cohomology.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace latkam;

namespace {
constexpr double two_pi = 2.0 * std::numbers::pi;
const double golden = (std::sqrt(5.0) - 1.0) / 2.0;

MatrixXcd random_zero_mean_modes(const TorusGrid& grid, int kmax, int rows, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    MatrixXcd m = MatrixXcd::Zero(rows, grid.size());
    for (int g = 0; g < grid.size(); ++g) {
        auto k = grid.modes(g);
        bool in = k[0] != 0 || k[1] != 0 || k[2] != 0;
        for (int j = 0; j < grid.l; ++j)
            if (std::abs(k[j]) > kmax) in = false;
        if (!in) continue;
        for (int r = 0; r < rows; ++r) m(r, g) = Cx(u(rng), u(rng));
    }
    band_limit(grid, m, kmax);
    return m;
}

} // namespace

TEST_CASE("diophantine: golden mean worst modes are Fibonacci denominators") {
    VectorXd omega = VectorXd::Constant(1, golden);
    DiophantineReport rep = measure_diophantine(omega, 1.0, 1000);
    CHECK(!rep.resonant);
    CHECK(std::isfinite(rep.kappa));
    // best rational approximations of the golden mean have Fibonacci
    // denominators; the scan's worst mode must be one of them
    std::vector<int> fib{1, 2, 3, 5, 8, 13, 21, 34, 55, 89, 144, 233, 377, 610, 987};
    int worst = std::abs(rep.worstMode[0]);
    bool isFib = false;
    for (int f : fib) isFib = isFib || worst == f;
    CHECK(isFib);
    // direct scan oracle for kappa
    double kappa = 0.0;
    for (int k = 1; k <= 1000; ++k) {
        double dist = std::abs(k * golden - std::round(k * golden));
        kappa = std::max(kappa, 1.0 / (std::pow(double(k), 1.0) * dist));
    }
    CHECK(rep.kappa == doctest::Approx(kappa).epsilon(1e-12));
}

TEST_CASE("diophantine: exact resonance reported") {
    VectorXd omega = VectorXd::Constant(1, 0.5);
    DiophantineReport rep = measure_diophantine(omega, 1.0, 10);
    CHECK(rep.resonant);
    CHECK(std::isinf(rep.kappa));
}

TEST_CASE("diophantine: larger nu can only decrease kappa") {
    VectorXd omega = VectorXd::Constant(1, golden);
    double k1 = measure_diophantine(omega, 1.0, 300).kappa;
    double k2 = measure_diophantine(omega, 2.0, 300).kappa;
    CHECK(k2 <= k1 + 1e-12);
}

TEST_CASE("cohomology: single-mode difference equation") {
    TorusGrid grid = TorusGrid::dim1(64);
    VectorXd omega = VectorXd::Constant(1, golden);
    MatrixXcd h = MatrixXcd::Zero(1, grid.size());
    h(0, 1) = Cx(0.5, 0.0); // cos(2 pi theta)
    h(0, 63) = Cx(0.5, 0.0);
    MatrixXcd v = solve_difference(grid, h, omega);
    Cx div = std::polar(1.0, two_pi * golden) - 1.0;
    CHECK(std::abs(v(0, 1) - h(0, 1) / div) < 1e-15);
    CHECK(std::abs(v(0, 0)) == 0.0);
    // forward residual on the grid
    MatrixXcd shifted = v;
    rotate_modes(grid, shifted, omega);
    MatrixXd resid = modes_to_grid(grid, (shifted - v - h).eval());
    CHECK(resid.cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("cohomology: nonzero average rejected") {
    TorusGrid grid = TorusGrid::dim1(16);
    MatrixXcd h = MatrixXcd::Zero(1, grid.size());
    h(0, 0) = 0.3;
    CHECK_THROWS_AS(solve_difference(grid, h, VectorXd::Constant(1, golden)), NonzeroAverage);
    CHECK_THROWS_AS(solve_directional(grid, h, VectorXd::Constant(1, golden)), NonzeroAverage);
}

TEST_CASE("cohomology: resonant mode inside the band rejected") {
    TorusGrid grid = TorusGrid::dim1(16);
    MatrixXcd h = MatrixXcd::Zero(1, grid.size());
    h(0, 3) = 1.0;
    CHECK_THROWS_AS(solve_difference(grid, h, VectorXd::Constant(1, 0.25)), ResonantMode);
}

TEST_CASE("cohomology: round trip and linearity on random data") {
    TorusGrid grid = TorusGrid::dim1(512);
    VectorXd omega = VectorXd::Constant(1, golden);
    std::mt19937_64 rng(37);
    for (int trial = 0; trial < 20; ++trial) {
        MatrixXcd h = random_zero_mean_modes(grid, 200, 3, rng);
        MatrixXcd v = solve_difference(grid, h, omega);
        MatrixXcd shifted = v;
        rotate_modes(grid, shifted, omega);
        double rel = (shifted - v - h).cwiseAbs().maxCoeff() / h.cwiseAbs().maxCoeff();
        CHECK(rel < 1e-12);
    }
    // linearity
    MatrixXcd h1 = random_zero_mean_modes(grid, 40, 1, rng);
    MatrixXcd h2 = random_zero_mean_modes(grid, 40, 1, rng);
    MatrixXcd lhs = solve_difference(grid, (0.3 * h1 + 1.7 * h2).eval(), omega);
    MatrixXcd rhs = 0.3 * solve_difference(grid, h1, omega) + 1.7 * solve_difference(grid, h2, omega);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("cohomology: translation equivariance") {
    TorusGrid grid = TorusGrid::dim1(128);
    VectorXd omega = VectorXd::Constant(1, golden);
    std::mt19937_64 rng(41);
    MatrixXcd h = random_zero_mean_modes(grid, 30, 1, rng);
    VectorXd sigma = VectorXd::Constant(1, 0.2137);
    MatrixXcd hshift = h;
    rotate_modes(grid, hshift, sigma);
    MatrixXcd a = solve_difference(grid, hshift, omega);
    MatrixXcd b = solve_difference(grid, h, omega);
    rotate_modes(grid, b, sigma);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("cohomology: directional derivative solver") {
    TorusGrid grid = TorusGrid::dim1(64);
    double w0 = 0.7310585;
    VectorXd omega = VectorXd::Constant(1, w0);
    // h = sin(2 pi theta)  =>  v = -cos(2 pi theta) / (2 pi w)
    MatrixXcd h = MatrixXcd::Zero(1, grid.size());
    h(0, 1) = Cx(0.0, -0.5);
    h(0, 63) = Cx(0.0, 0.5);
    MatrixXcd v = solve_directional(grid, h, omega);
    MatrixXd vg = modes_to_grid(grid, v);
    for (int g = 0; g < grid.size(); ++g) {
        double th = double(g) / grid.m[0];
        CHECK(vg(0, g) == doctest::Approx(-std::cos(two_pi * th) / (two_pi * w0)).epsilon(1e-12));
    }
    // round trip at random data: apply d/d(omega) spectrally
    std::mt19937_64 rng(43);
    MatrixXcd hr = random_zero_mean_modes(grid, 20, 1, rng);
    MatrixXcd vr = solve_directional(grid, hr, omega);
    MatrixXcd dv = vr;
    derivative_modes(grid, dv, 0);
    CHECK(((w0 * dv) - hr).cwiseAbs().maxCoeff() / hr.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("cohomology: sequence checks") {
    VectorXd g1 = VectorXd::Constant(1, golden);
    VectorXd s1 = VectorXd::Constant(1, std::sqrt(2.0) - 1.0);
    auto reps = check_sequence({g1, s1}, {1.5, 2.5}, {200, 200});
    REQUIRE(reps.size() == 2);
    CHECK(!reps[0].resonant);
    CHECK(!reps[1].resonant);
    CHECK(std::isfinite(reps[0].kappa));
    CHECK(std::isfinite(reps[1].kappa));

    // repeated frequency: resonant at k = (1, -1)
    auto bad = check_sequence({g1, g1}, {1.5, 2.5}, {50, 50});
    CHECK(bad[1].resonant);

    // single-entry sequence reduces to measure_diophantine
    auto single = check_sequence({g1}, {1.5}, {100});
    DiophantineReport direct = measure_diophantine(g1, 1.5, 100);
    CHECK(single[0].kappa == doctest::Approx(direct.kappa).epsilon(1e-15));

    CHECK_THROWS(check_sequence({g1, s1}, {0.5, 2.5}, {50, 50})); // nu_r <= r l
}

TEST_CASE("cohomology: min divisor over the band") {
    TorusGrid grid = TorusGrid::dim1(64);
    VectorXd omega = VectorXd::Constant(1, golden);
    double d = min_divisor(grid, omega, 64);
    double oracle = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= 64; ++k)
        oracle = std::min(oracle, std::abs(std::polar(1.0, two_pi * k * golden) - Cx(1.0, 0.0)));
    CHECK(d == doctest::Approx(oracle).epsilon(1e-12));
}
