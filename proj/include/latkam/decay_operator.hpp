#pragma once

#include "latkam/decay.hpp"

#include <Eigen/Dense>

namespace latkam {

/// Contiguous range of active lattice sites [lo, hi] on Z (the 1-D window).
struct Window {
    int lo = 0, hi = 0;
    int size() const { return hi - lo + 1; }
    int index(int site) const { return site - lo; }
    bool contains(int site) const { return site >= lo && site <= hi; }
    bool operator==(const Window& o) const { return lo == o.lo && hi == o.hi; }
};

/// Block matrix over the sites of a window, with 2x2 real blocks per site pair
/// (phase dimension 2 per site: one (q,p) pair).  Carries the weighted norm
/// ||A||_Gamma = sup_{i,j} |A_ij| / Gamma(i-j), with |.| the block 2-norm.
class DecayOperator {
  public:
    DecayOperator() = default;
    DecayOperator(Window w, Eigen::MatrixXd dense);
    static DecayOperator zero(Window w);
    static DecayOperator identity_blocks(Window w);

    const Window& window() const { return win_; }
    const Eigen::MatrixXd& dense() const { return mat_; }
    Eigen::MatrixXd& dense() { return mat_; }

    Eigen::Block<const Eigen::MatrixXd, 2, 2> block(int i, int j) const {
        return mat_.block<2, 2>(2 * win_.index(i), 2 * win_.index(j));
    }

    double gamma_norm(const DecayFunction& gamma) const;

    /// sup_i min_c |A_ij| weighted by both Gamma(i - c) over the centers and
    /// Gamma(i - j): the localized-operator norm ||A||_{c,Gamma}.
    double localized_norm(const DecayFunction& gamma, const std::vector<int>& centers) const;

    /// Drop blocks whose 2-norm is below `threshold` or with |i-j| beyond
    /// `bandwidth` (bandwidth < 0 keeps all offsets).
    void sparsify(double threshold, int bandwidth = -1);

    DecayOperator operator+(const DecayOperator& other) const;
    friend DecayOperator compose(const DecayOperator& a, const DecayOperator& b);

  private:
    Window win_;
    Eigen::MatrixXd mat_; // (2W x 2W), interleaved (q_i, p_i) per site
};

double operator_norm(const DecayOperator& a, const DecayFunction& gamma);
DecayOperator compose(const DecayOperator& a, const DecayOperator& b);

/// Largest singular value of a 2x2 block, in closed form.
double block_2norm(const Eigen::Matrix2d& b);

} // namespace latkam
