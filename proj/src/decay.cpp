#include "latkam/decay.hpp"

#include <algorithm>
#include <cmath>

namespace latkam {

DecayFunction::DecayFunction(double alpha, double rate, double prefactor, int dim)
    : alpha_(alpha), rate_(rate), prefactor_(prefactor), dim_(dim) {
    if (dim != 1 && dim != 2)
        throw std::invalid_argument("DecayFunction: dim must be 1 or 2");
    if (alpha <= dim)
        throw std::invalid_argument("DecayFunction: need alpha > dim for summability");
    if (rate < 0.0 || prefactor <= 0.0)
        throw std::invalid_argument("DecayFunction: rate >= 0 and prefactor > 0 required");
}

double DecayFunction::operator()(int dist) const {
    if (dist == 0) return prefactor_;
    double d = static_cast<double>(dist);
    return prefactor_ * std::pow(d, -alpha_) * std::exp(-rate_ * d);
}

// Number of sites of Z^dim at 1-norm distance n >= 1.
static double shell_count(int dim, int n) {
    return dim == 1 ? 2.0 : 4.0 * n;
}

// sum_{|j| >= 1} |j|^(-s) with integral tail bound past `radius`.
static double lattice_zeta(double s, int dim, int radius) {
    double sum = 0.0;
    for (int n = 1; n <= radius; ++n)
        sum += shell_count(dim, n) * std::pow(static_cast<double>(n), -s);
    // shells beyond radius: count grows like 2 (d=1) or 4n (d=2); bound the sum
    // by the integral of the monotone envelope from radius.
    double R = static_cast<double>(radius);
    double tail;
    if (dim == 1)
        tail = 2.0 * std::pow(R, 1.0 - s) / (s - 1.0);
    else
        tail = 4.0 * std::pow(R, 2.0 - s) / (s - 2.0);
    return sum + tail;
}

double single_scale_prefactor(double alpha, int dim, int radius) {
    if (alpha <= dim)
        throw std::invalid_argument("single_scale_prefactor: alpha <= dim, sum diverges");
    double K = lattice_zeta(alpha, dim, radius);
    return 1.0 / (std::pow(2.0, alpha + 1.0) * K + 2.0);
}

double max_prefactor(double alpha, double /*rate*/, int dim, int radius) {
    // The exponential factor only shrinks the sums, so the rate-free bound is
    // safe for every rate >= 0.
    return std::min(single_scale_prefactor(alpha, dim, radius),
                    single_scale_prefactor(2.0 * alpha, dim, radius));
}

double lattice_sum(const DecayFunction& gamma, int radius) {
    double sum = gamma(0);
    for (int n = 1; n <= radius; ++n)
        sum += shell_count(gamma.dim(), n) * gamma(n);
    // Tail: Gamma is nonincreasing in |i|; bound shells past radius by the
    // rate-0 integral (the exponential factor at distance > radius only helps).
    double R = static_cast<double>(radius);
    double damp = std::exp(-gamma.rate() * R);
    double tail;
    if (gamma.dim() == 1)
        tail = 2.0 * gamma.prefactor() * damp * std::pow(R, 1.0 - gamma.alpha()) / (gamma.alpha() - 1.0);
    else
        tail = 4.0 * gamma.prefactor() * damp * std::pow(R, 2.0 - gamma.alpha()) / (gamma.alpha() - 2.0);
    return sum + tail;
}

// Convolution scan for dim 1: by translation invariance the ratio depends only
// on d = |i-k|.  The j-sum is truncated at scanR with a crude tail bound using
// axiom 1 (monitored, not assumed: sumTotal is reported alongside).
static double convolution_worst_1d(const DecayFunction& g, int radius, double sumTotal) {
    int scanR = 2 * radius + 64;
    std::vector<double> tab(2 * scanR + 1);
    for (int n = 0; n <= 2 * scanR; ++n) tab[n] = g(n);
    double worst = 0.0;
#pragma omp parallel for schedule(static) reduction(max : worst)
    for (int d = 0; d <= radius; ++d) {
        double conv = 0.0;
        for (int j = -scanR; j <= scanR; ++j)
            conv += tab[std::abs(d - j)] * tab[std::abs(j)];
        // beyond the scan every factor Gamma(j) is <= Gamma(scanR - d) by
        // monotonicity; the other factor sums to at most sumTotal.
        conv += tab[scanR - d] * sumTotal;
        worst = std::max(worst, conv / tab[d]);
    }
    return worst;
}

static double convolution_worst_2d(const DecayFunction& g, int radius, double sumTotal) {
    int scanR = 2 * radius + 32;
    std::vector<double> tab(4 * scanR + 1);
    for (int n = 0; n <= 4 * scanR; ++n) tab[n] = g(n);
    double worst = 0.0;
    // ratio depends on (d1, d2) up to symmetry; restrict to 0 <= d2 <= d1.
#pragma omp parallel for schedule(dynamic) reduction(max : worst)
    for (int d1 = 0; d1 <= radius; ++d1) {
        double local = 0.0;
        for (int d2 = 0; d2 <= std::min(d1, radius - d1); ++d2) {
            double conv = 0.0;
            for (int j1 = -scanR; j1 <= scanR; ++j1) {
                int rem = scanR - std::abs(j1);
                int a1 = std::abs(d1 - j1), a2base = std::abs(j1);
                for (int j2 = -rem; j2 <= rem; ++j2)
                    conv += tab[a1 + std::abs(d2 - j2)] * tab[a2base + std::abs(j2)];
            }
            conv += tab[scanR - d1 - d2] * sumTotal;
            local = std::max(local, conv / tab[d1 + d2]);
        }
        worst = std::max(worst, local);
    }
    return worst;
}

AxiomReport check_axioms(const DecayFunction& gamma, int radius) {
    if (radius < 10)
        throw std::invalid_argument("check_axioms: radius >= 10 required");
    AxiomReport rep;
    rep.sumTotal = lattice_sum(gamma, radius);
    rep.worstConvolutionRatio =
        gamma.dim() == 1 ? convolution_worst_1d(gamma, radius, rep.sumTotal)
                         : convolution_worst_2d(gamma, radius, rep.sumTotal);
    rep.pass = rep.sumTotal <= 1.0 && rep.worstConvolutionRatio <= 1.0;
    return rep;
}

} // namespace latkam
