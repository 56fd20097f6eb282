#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "latkam/fourier.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace latkam;

namespace {
constexpr double two_pi = 2.0 * std::numbers::pi;
}

TEST_CASE("fourier: transform round trip") {
    TorusGrid grid = TorusGrid::dim1(64);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    MatrixXd vals(5, grid.size());
    for (int r = 0; r < 5; ++r)
        for (int g = 0; g < grid.size(); ++g) vals(r, g) = u(rng);
    MatrixXd back = modes_to_grid(grid, grid_to_modes(grid, vals));
    CHECK((back - vals).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("fourier: 2d rotation matches pointwise evaluation") {
    TorusGrid grid(2, {24, 18, 1});
    MatrixXd vals(1, grid.size());
    auto f = [](double t0, double t1) {
        return std::sin(two_pi * t0) + 0.3 * std::cos(two_pi * (2 * t0 - t1));
    };
    for (int g = 0; g < grid.size(); ++g) {
        auto idx = grid.unflatten(g);
        vals(0, g) = f(double(idx[0]) / grid.m[0], double(idx[1]) / grid.m[1]);
    }
    VectorXd omega(2);
    omega << 0.137, 0.614;
    MatrixXcd modes = grid_to_modes(grid, vals);
    rotate_modes(grid, modes, omega);
    MatrixXd rotated = modes_to_grid(grid, modes);
    for (int g = 0; g < grid.size(); ++g) {
        auto idx = grid.unflatten(g);
        double expect =
            f(double(idx[0]) / grid.m[0] + omega[0], double(idx[1]) / grid.m[1] + omega[1]);
        CHECK(rotated(0, g) == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("fourier: derivative multiplier") {
    TorusGrid grid = TorusGrid::dim1(32);
    MatrixXd vals(1, grid.size());
    for (int g = 0; g < grid.size(); ++g) vals(0, g) = std::sin(two_pi * g / grid.m[0]);
    MatrixXcd modes = grid_to_modes(grid, vals);
    derivative_modes(grid, modes, 0);
    MatrixXd dv = modes_to_grid(grid, modes);
    for (int g = 0; g < grid.size(); ++g)
        CHECK(dv(0, g) == doctest::Approx(two_pi * std::cos(two_pi * g / grid.m[0])).epsilon(1e-11));
}

TEST_CASE("fourier: band limit and majorant") {
    TorusGrid grid = TorusGrid::dim1(32);
    MatrixXcd modes = MatrixXcd::Zero(1, grid.size());
    modes(0, 1) = Cx(0.5, 0.0);  // k = 1
    modes(0, 31) = Cx(0.5, 0.0); // k = -1
    modes(0, 9) = Cx(0.0, 0.2);  // k = 9, dropped at kmax 4
    band_limit(grid, modes, 4);
    CHECK(std::abs(modes(0, 9)) == 0.0);
    // majorant of cos(2 pi theta): two modes of 1/2, e^{2 pi rho} factor
    VectorXd maj0 = majorant_rows(grid, modes, 0.0);
    CHECK(maj0[0] == doctest::Approx(1.0).epsilon(1e-14));
    VectorXd maj = majorant_rows(grid, modes, 0.1);
    CHECK(maj[0] == doctest::Approx(std::exp(two_pi * 0.1)).epsilon(1e-13));
}

TEST_CASE("fourier: tail fraction") {
    TorusGrid grid = TorusGrid::dim1(16);
    MatrixXcd modes = MatrixXcd::Zero(1, grid.size());
    modes(0, 1) = 1.0;
    modes(0, 15) = 1.0;
    CHECK(tail_fraction_modes(grid, modes, 3) == 0.0);
    modes(0, 5) = 2.0; // |k| = 5 >= 3
    CHECK(tail_fraction_modes(grid, modes, 3) == doctest::Approx(0.5).epsilon(1e-14));
}
