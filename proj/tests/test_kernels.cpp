#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "latkam/kernels.hpp"

#include <random>

using namespace latkam;

namespace {

ModelConfig small_model() {
    ModelConfig cfg;
    cfg.couplings.push_back({1, 1.0, 0.0});
    cfg.epsilon = 0.04;
    cfg.stepSize = 0.25;
    cfg.substeps = 4;
    cfg.window = Window{-5, 5};
    return cfg;
}

} // namespace

TEST_CASE("kernels: FFT rotation against the naive DFT reference") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (const TorusGrid& grid : {TorusGrid::dim1(24), TorusGrid(2, {12, 10, 1})}) {
        MatrixXd stack(7, grid.size());
        for (int r = 0; r < stack.rows(); ++r)
            for (int g = 0; g < grid.size(); ++g) stack(r, g) = u(rng);
        VectorXd omega(grid.l);
        for (int j = 0; j < grid.l; ++j) omega[j] = u(rng);
        MatrixXd fast = kernels::rotate_stack(grid, stack, omega);
        MatrixXd slow = ref::rotate_stack(grid, stack, omega);
        CHECK((fast - slow).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("kernels: pointwise apply agreement") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    TorusGrid grid = TorusGrid::dim1(20);
    std::vector<MatrixXd> A(grid.size());
    MatrixXd x(6, grid.size());
    for (int g = 0; g < grid.size(); ++g) {
        A[g] = MatrixXd::NullaryExpr(6, 6, [&]() { return u(rng); });
        for (int r = 0; r < 6; ++r) x(r, g) = u(rng);
    }
    MatrixXd fast = kernels::apply_pointwise(A, x);
    MatrixXd slow = ref::apply_pointwise(A, x);
    CHECK((fast - slow).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("kernels: jacobian grid agreement (dense accumulation vs block factors)") {
    ModelConfig cfg = small_model();
    TorusGrid grid = TorusGrid::dim1(12);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-0.4, 0.4);
    GridField X(grid, cfg.window);
    for (int r = 0; r < X.values.rows(); ++r)
        for (int g = 0; g < grid.size(); ++g) X.values(r, g) = u(rng);
    auto fast = kernels::jacobian_grid(cfg, X);
    auto slow = ref::jacobian_grid(cfg, X);
    double worst = 0.0;
    for (int g = 0; g < grid.size(); ++g)
        worst = std::max(worst, (fast[g] - slow[g]).cwiseAbs().maxCoeff());
    CHECK(worst < 1e-13);
}

TEST_CASE("kernels: map grid agreement") {
    ModelConfig cfg = small_model();
    TorusGrid grid = TorusGrid::dim1(16);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-0.4, 0.4);
    GridField X(grid, cfg.window);
    for (int r = 0; r < X.values.rows(); ++r)
        for (int g = 0; g < grid.size(); ++g) X.values(r, g) = u(rng);
    GridField fast = kernels::map_grid(cfg, X);
    GridField slow = ref::map_grid(cfg, X);
    CHECK((fast.values - slow.values).cwiseAbs().maxCoeff() == 0.0);
}
