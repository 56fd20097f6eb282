#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "latkam/decay.hpp"
#include "latkam/decay_operator.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace latkam;

TEST_CASE("decay: weight formula") {
    double a = 0.014;
    DecayFunction g(2.0, 0.0, a, 1);
    CHECK(g(0) == a);
    CHECK(g(2) == doctest::Approx(a / 4.0).epsilon(1e-15));
    // nonincreasing in |i|
    DecayFunction g2(2.5, 0.3, 0.01, 1);
    for (int i = 1; i < 50; ++i) CHECK(g2(i + 1) <= g2(i));
    CHECK(g2(3) <= g2(2));
}

TEST_CASE("decay: prefactor bound against the direct lattice sum") {
    // oracle: K_{1,2} = 2 * zeta(2) = pi^2 / 3, then the closed-form bound
    double K12 = std::numbers::pi * std::numbers::pi / 3.0;
    double a0_oracle = 1.0 / (std::pow(2.0, 3.0) * K12 + 2.0);
    CHECK(a0_oracle == doctest::Approx(0.035313).epsilon(1e-4));
    CHECK(single_scale_prefactor(2.0, 1) == doctest::Approx(a0_oracle).epsilon(1e-6));

    // the returned prefactor is the two-scale minimum: a0(2 alpha) with
    // K_{1,4} = 2 * zeta(4) = pi^4 / 45
    double K14 = std::pow(std::numbers::pi, 4.0) / 45.0;
    double a0_4 = 1.0 / (std::pow(2.0, 5.0) * K14 + 2.0);
    double a = max_prefactor(2.0, 0.0, 1);
    CHECK(a == doctest::Approx(std::min(a0_oracle, a0_4)).epsilon(1e-6));
    CHECK(a <= 0.5); // axiom 1 with at least two sites forces a <= 1/2
}

TEST_CASE("decay: axiom scan passes for constructed weights") {
    for (double rate : {0.0, 0.25, 0.5}) {
        double a = max_prefactor(2.0, rate, 1);
        DecayFunction g(2.0, rate, a, 1);
        AxiomReport rep = check_axioms(g, 1000);
        CHECK(rep.pass);
        CHECK(rep.sumTotal <= 1.0);
        CHECK(rep.worstConvolutionRatio <= 1.0);
    }
}

TEST_CASE("decay: alpha=3 passes and stays safe") {
    double a = max_prefactor(3.0, 0.0, 1);
    DecayFunction g(3.0, 0.0, a, 1);
    CHECK(check_axioms(g, 500).pass);
}

TEST_CASE("decay: pure exponential fails the convolution axiom") {
    // Gamma(i) = 0.1 e^{-|i|} realized as alpha -> 0 limit is rejected by the
    // constructor, so emulate with a tiny alpha and compensating prefactor.
    DecayFunction g(1.0 + 1e-9, 1.0, 0.1, 1);
    AxiomReport rep = check_axioms(g, 200);
    CHECK(rep.sumTotal <= 1.0);
    CHECK(rep.worstConvolutionRatio > 1.0);
    CHECK_FALSE(rep.pass);
}

TEST_CASE("decay: oversized prefactor fails axiom 1") {
    double a = max_prefactor(1.2, 0.0, 1);
    DecayFunction g(1.2, 0.0, 10.0 * a, 1);
    AxiomReport rep = check_axioms(g, 300);
    CHECK_FALSE(rep.pass);
}

TEST_CASE("decay: N=2 axiom scan") {
    double a = max_prefactor(3.0, 0.0, 2);
    DecayFunction g(3.0, 0.0, a, 2);
    AxiomReport rep = check_axioms(g, 100);
    CHECK(rep.pass);
}

TEST_CASE("decay: ordered family dominance") {
    double a = max_prefactor(2.0, 0.0, 1);
    DecayFunction gb(2.0, 0.5, a, 1);        // beta
    DecayFunction gbp = gb.with_rate(0.25);  // beta' < beta
    double prev = 1.0;
    for (int i = 1; i <= 60; ++i) {
        double ratio = gb(i) / gbp(i);
        CHECK(ratio <= prev + 1e-15);
        prev = ratio;
    }
    CHECK(prev < 1e-6);
}

namespace {

DecayOperator random_bounded_operator(Window w, const DecayFunction& g, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    DecayOperator A = DecayOperator::zero(w);
    for (int i = 0; i < w.size(); ++i)
        for (int j = 0; j < w.size(); ++j) {
            Eigen::Matrix2d b;
            b << u(rng), u(rng), u(rng), u(rng);
            double bn = block_2norm(b);
            if (bn > 0.0) b *= g(std::abs(i - j)) * std::abs(u(rng)) / bn;
            A.dense().block<2, 2>(2 * i, 2 * j) = b;
        }
    return A;
}

} // namespace

TEST_CASE("decay operators: algebra and ideal properties") {
    Window w{0, 63};
    double a = max_prefactor(2.0, 0.25, 1);
    DecayFunction g(2.0, 0.25, a, 1);
    std::mt19937_64 rng(12345);

    DecayOperator I = DecayOperator::identity_blocks(w);
    CHECK(operator_norm(I, g) == doctest::Approx(1.0 / a).epsilon(1e-12));

    DecayOperator Z = DecayOperator::zero(w);
    CHECK(operator_norm(Z, g) == 0.0);
    CHECK(operator_norm(compose(Z, I), g) == 0.0);

    for (int trial = 0; trial < 100; ++trial) {
        DecayOperator A = random_bounded_operator(w, g, rng);
        DecayOperator B = random_bounded_operator(w, g, rng);
        double na = operator_norm(A, g), nb = operator_norm(B, g);
        double nab = operator_norm(compose(A, B), g);
        CHECK(nab <= na * nb * (1.0 + 1e-12));
        double nsum = operator_norm(A + B, g);
        CHECK(nsum <= (na + nb) * (1.0 + 1e-12));
    }
    // identity composes neutrally
    DecayOperator A = random_bounded_operator(w, g, rng);
    CHECK((compose(I, A).dense() - A.dense()).cwiseAbs().maxCoeff() == 0.0);

    // ideal property: localized times general stays localized
    std::vector<int> centers{10};
    for (int trial = 0; trial < 20; ++trial) {
        DecayOperator A = random_bounded_operator(w, g, rng);
        // localize A's rows around the center
        for (int i = 0; i < w.size(); ++i)
            for (int j = 0; j < w.size(); ++j)
                A.dense().block<2, 2>(2 * i, 2 * j) *= g(std::abs(i - 10));
        DecayOperator B = random_bounded_operator(w, g, rng);
        double lhs = compose(A, B).localized_norm(g, centers);
        double rhs = A.localized_norm(g, centers) * operator_norm(B, g);
        CHECK(lhs <= rhs * (1.0 + 1e-12));
    }
}

TEST_CASE("decay operators: window mismatch rejected") {
    DecayOperator A = DecayOperator::zero(Window{0, 5});
    DecayOperator B = DecayOperator::zero(Window{0, 6});
    CHECK_THROWS(compose(A, B));
}
