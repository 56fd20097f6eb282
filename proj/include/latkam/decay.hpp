#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace latkam {

/// Lattice site in up to 3 dimensions. Unused coordinates stay zero.
struct Site {
    int x = 0, y = 0, z = 0;

    friend Site operator-(Site a, Site b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend Site operator+(Site a, Site b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend bool operator==(Site a, Site b) { return a.x == b.x && a.y == b.y && a.z == b.z; }
};

inline int norm1(Site s) { return std::abs(s.x) + std::abs(s.y) + std::abs(s.z); }

/// Weight Gamma(i) = a |i|^(-alpha) e^(-rate |i|), Gamma(0) = a, with |i| the
/// 1-norm on Z^dim.  Requires alpha > dim so that the lattice sum converges.
/// Fixing (alpha, prefactor) and varying `rate` gives an ordered family of
/// weights: larger rate means faster decay.
class DecayFunction {
  public:
    DecayFunction(double alpha, double rate, double prefactor, int dim);

    double operator()(int dist) const;       // dist = |i| in the 1-norm
    double operator()(Site s) const { return (*this)(norm1(s)); }

    double alpha() const { return alpha_; }
    double rate() const { return rate_; }
    double prefactor() const { return prefactor_; }
    int dim() const { return dim_; }

    /// Same alpha/prefactor, different exponential rate (ordered family member).
    DecayFunction with_rate(double rate) const { return {alpha_, rate, prefactor_, dim_}; }

  private:
    double alpha_, rate_, prefactor_;
    int dim_;
};

/// Largest safe prefactor for the weight family: min(a0(alpha), a0(2*alpha))
/// with a0(s) = (2^(s+1) K_{dim,s} + 2)^(-1) and K_{dim,s} the lattice sum of
/// |j|^(-s), evaluated by direct summation up to `radius` plus an integral
/// tail bound.  The result makes both decay-function axioms hold for every
/// rate >= 0.
double max_prefactor(double alpha, double rate, int dim, int radius = 2000);

/// a0(s) alone (the single-scale bound); exposed for tests and diagnostics.
double single_scale_prefactor(double alpha, int dim, int radius = 2000);

struct AxiomReport {
    double sumTotal = 0.0;              // truncated lattice sum plus tail bound
    double worstConvolutionRatio = 0.0; // max over |i-k| <= radius
    bool pass = false;
};

/// Checks the two decay-function axioms on a finite scan with analytic tail
/// bounds: (1) sum of Gamma over Z^dim <= 1, (2) convolution inequality
/// sum_j Gamma(i-j) Gamma(j-k) <= Gamma(i-k) for all |i-k| <= radius.
AxiomReport check_axioms(const DecayFunction& gamma, int radius);

/// Sum of Gamma over the whole lattice: direct sum to `radius` plus tail bound.
double lattice_sum(const DecayFunction& gamma, int radius);

} // namespace latkam
