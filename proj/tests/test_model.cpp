#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "latkam/model.hpp"
#include "latkam/splitting.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace latkam;

namespace {

ModelConfig test_model(double eps, int radius = 8) {
    ModelConfig cfg;
    cfg.couplings.push_back({1, 1.0, 0.0});
    cfg.epsilon = eps;
    cfg.stepSize = 0.1;
    cfg.substeps = 5;
    cfg.window = Window{-radius, radius};
    return cfg;
}

PhaseField random_field(const Window& w, double amp, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-amp, amp);
    PhaseField x(w);
    for (int i = 0; i < 2 * w.size(); ++i) x.v[i] = u(rng);
    return x;
}

} // namespace

TEST_CASE("model: force at the fixed point and the uncoupled pendulum") {
    ModelConfig cfg = test_model(0.0);
    VectorXd q = VectorXd::Zero(cfg.window.size());
    CHECK(force(cfg, q).cwiseAbs().maxCoeff() == 0.0);

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int i = 0; i < cfg.window.size(); ++i) q[i] = u(rng);
    VectorXd f = force(cfg, q);
    for (int i = 0; i < cfg.window.size(); ++i)
        CHECK(f[i] == doctest::Approx(std::sin(q[i])).epsilon(1e-15));
}

TEST_CASE("model: nearest-neighbor quadratic coupling force") {
    ModelConfig cfg = test_model(0.02, 4);
    double gamma = cfg.couplings[0].quad;
    VectorXd q(cfg.window.size());
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < q.size(); ++i) q[i] = u(rng);
    VectorXd f = force(cfg, q);
    for (int i = 1; i + 1 < q.size(); ++i) {
        double expect = std::sin(q[i]) + cfg.epsilon * gamma * (q[i + 1] + q[i - 1] - 2 * q[i]);
        CHECK(f[i] == doctest::Approx(expect).epsilon(1e-14));
    }
}

TEST_CASE("model: map fixes the origin") {
    ModelConfig cfg = test_model(0.05);
    PhaseField zero(cfg.window);
    CHECK(map_F(cfg, zero).v.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("model: elliptic rotation of the one-step linearization") {
    // at q = pi the Verlet one-step matrix rotates by 2 asin(h/2); the map is
    // `substeps` of them, so the rotation number is substeps*2asin(h/2)/(2 pi)
    ModelConfig cfg = test_model(0.0);
    double thetaStep = 2.0 * std::asin(cfg.stepSize / 2.0);
    double expect = cfg.substeps * thetaStep / (2.0 * std::numbers::pi);
    double measured = rotation_number(cfg, std::numbers::pi + 1e-4, 40000);
    CHECK(measured == doctest::Approx(expect).epsilon(1e-6));
    // the h -> 0 value (substeps*h)/(2 pi) is approached within O(h^2)
    CHECK(std::abs(measured - cfg.map_time() / (2.0 * std::numbers::pi)) < 2e-3);
}

TEST_CASE("model: jacobian against central differences") {
    ModelConfig cfg = test_model(0.07, 5);
    std::mt19937_64 rng(11);
    PhaseField x = random_field(cfg.window, 0.4, rng);
    MatrixXd D = dF_dense(cfg, x);
    const int n = 2 * cfg.window.size();
    const double h = 1e-5;
    double worst = 0.0;
    for (int j = 0; j < n; ++j) {
        PhaseField xp = x, xm = x;
        xp.v[j] += h;
        xm.v[j] -= h;
        VectorXd col = (map_F(cfg, xp).v - map_F(cfg, xm).v) / (2.0 * h);
        worst = std::max(worst, (D.col(j) - col).cwiseAbs().maxCoeff());
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("model: block-factor jacobian matches the dense accumulation") {
    ModelConfig cfg = test_model(0.02, 6);
    std::mt19937_64 rng(13);
    PhaseField x = random_field(cfg.window, 0.5, rng);
    MatrixXd a = dF_dense(cfg, x);
    MatrixXd b = dF(cfg, x).dense();
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("model: exact symplecticity of the Verlet composition") {
    ModelConfig cfg = test_model(0.02, 16);
    MatrixXd J = symplectic_J(cfg.window);
    std::mt19937_64 rng(17);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        PhaseField x = random_field(cfg.window, 0.6, rng);
        MatrixXd D = dF_dense(cfg, x);
        worst = std::max(worst, (D.transpose() * J * D - J).cwiseAbs().maxCoeff());
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("model: one-site multipliers at the hyperbolic point") {
    ModelConfig cfg = test_model(0.0);
    cfg.window = Window{0, 0};
    PhaseField origin(cfg.window);
    Eigen::Matrix2d M = dF_dense(cfg, origin);
    CHECK(M.determinant() == doctest::Approx(1.0).epsilon(1e-13));
    double tr = M.trace();
    CHECK(tr > 2.0);
    double lp = tr / 2.0 + std::sqrt(tr * tr / 4.0 - 1.0);
    CHECK(lp > 1.0);
    CHECK(lp * (tr - lp) == doctest::Approx(1.0).epsilon(1e-12)); // mu+ mu- = 1
}

TEST_CASE("model: momentum translation family") {
    ModelConfig cfg = test_model(0.03, 6);
    std::mt19937_64 rng(23);
    PhaseField x = random_field(cfg.window, 0.3, rng);
    std::vector<int> centers{0};
    VectorXd lam0 = VectorXd::Zero(1);
    CHECK((map_F_lambda(cfg, centers, lam0, x).v - map_F(cfg, x).v).cwiseAbs().maxCoeff() == 0.0);
    VectorXd lam(1);
    lam << 0.37;
    PhaseField y = map_F_lambda(cfg, centers, lam, x);
    PhaseField y0 = map_F(cfg, x);
    CHECK(y.p(0) - y0.p(0) == doctest::Approx(0.37));
    CHECK_THROWS(map_F_lambda(cfg, centers, VectorXd::Zero(2), x));

    // translation preserves dq^dp, so the family stays symplectic
    MatrixXd J = symplectic_J(cfg.window);
    MatrixXd D = dF_dense(cfg, x); // the translation has identity Jacobian
    CHECK((D.transpose() * J * D - J).cwiseAbs().maxCoeff() <= 1e-12);

    // the loop integral of p dq along a q-winding cycle through the center
    // site changes by 2 pi lambda: exactness fails for lambda != 0
    const int M = 512;
    double loop0 = 0.0, loop1 = 0.0;
    for (int g = 0; g < M; ++g) {
        double t0 = double(g) / M, t1 = double(g + 1) / M;
        PhaseField a(cfg.window), b(cfg.window);
        a.q(0) = 2.0 * std::numbers::pi * t0;
        b.q(0) = 2.0 * std::numbers::pi * t1;
        PhaseField Fa = map_F_lambda(cfg, centers, lam0, a);
        PhaseField Fb = map_F_lambda(cfg, centers, lam, a);
        double dq = b.q(0) - a.q(0);
        loop0 += Fa.p(0) * dq;
        loop1 += Fb.p(0) * dq;
    }
    CHECK(loop1 - loop0 == doctest::Approx(lam[0] * 2.0 * std::numbers::pi).epsilon(1e-10));
}

TEST_CASE("model: flow conservation and group property") {
    ModelConfig cfg = test_model(0.0);
    cfg.window = Window{0, 0};
    PhaseField x(cfg.window);
    x.q(0) = 2.5;
    double e0 = energy(cfg, x);
    PhaseField y = flow(cfg, x, 1000.0, 1e-13);
    CHECK(std::abs(energy(cfg, y) - e0) < 1e-10);

    PhaseField zero(cfg.window);
    CHECK(flow(cfg, zero, 5.0).v.cwiseAbs().maxCoeff() == 0.0);

    PhaseField a = flow(cfg, flow(cfg, x, 1.7), 2.4);
    PhaseField b = flow(cfg, x, 4.1);
    CHECK((a.v - b.v).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("model: translation equivariance on interior sites") {
    ModelConfig cfg = test_model(0.05, 10);
    PhaseField x(cfg.window);
    for (int s = -3; s <= 3; ++s) {
        x.q(s) = 0.3 * std::exp(-std::abs(s));
        x.p(s) = -0.1 * std::exp(-std::abs(s));
    }
    PhaseField xs(cfg.window); // shifted by 2
    for (int s = -1; s <= 5; ++s) {
        xs.q(s) = x.q(s - 2);
        xs.p(s) = x.p(s - 2);
    }
    PhaseField y = map_F(cfg, x), ys = map_F(cfg, xs);
    for (int s = -6; s <= 6; ++s) {
        CHECK(ys.q(s + 2) == doctest::Approx(y.q(s)).epsilon(1e-12));
        CHECK(ys.p(s + 2) == doctest::Approx(y.p(s)).epsilon(1e-12));
    }
}

TEST_CASE("model: config validation") {
    ModelConfig good = test_model(0.0);
    CHECK_NOTHROW(good.validate());
    ModelConfig bad = good;
    bad.onsite = ModelConfig::Onsite::polynomial;
    bad.poly = {+0.5}; // W''(0) > 0: not hyperbolic
    CHECK_THROWS(bad.validate());
    ModelConfig ok2 = good;
    ok2.onsite = ModelConfig::Onsite::polynomial;
    ok2.poly = {-0.5, 0.0, 0.25};
    CHECK_NOTHROW(ok2.validate());
}
