#include "latkam/decay_operator.hpp"

#include <cmath>

namespace latkam {

double block_2norm(const Eigen::Matrix2d& b) {
    // sigma_max^2 = (f + sqrt(f^2 - 4 det^2)) / 2 with f = ||b||_F^2
    double f = b.squaredNorm();
    double det = b(0, 0) * b(1, 1) - b(0, 1) * b(1, 0);
    double disc = f * f - 4.0 * det * det;
    if (disc < 0.0) disc = 0.0;
    return std::sqrt(0.5 * (f + std::sqrt(disc)));
}

DecayOperator::DecayOperator(Window w, Eigen::MatrixXd dense) : win_(w), mat_(std::move(dense)) {
    if (mat_.rows() != 2 * w.size() || mat_.cols() != 2 * w.size())
        throw std::invalid_argument("DecayOperator: matrix size does not match window");
}

DecayOperator DecayOperator::zero(Window w) {
    return DecayOperator(w, Eigen::MatrixXd::Zero(2 * w.size(), 2 * w.size()));
}

DecayOperator DecayOperator::identity_blocks(Window w) {
    return DecayOperator(w, Eigen::MatrixXd::Identity(2 * w.size(), 2 * w.size()));
}

double DecayOperator::gamma_norm(const DecayFunction& gamma) const {
    const int W = win_.size();
    double worst = 0.0;
#pragma omp parallel for schedule(static) reduction(max : worst)
    for (int i = 0; i < W; ++i)
        for (int j = 0; j < W; ++j) {
            double b = block_2norm(mat_.block<2, 2>(2 * i, 2 * j));
            if (b == 0.0) continue;
            worst = std::max(worst, b / gamma(std::abs(i - j)));
        }
    return worst;
}

double DecayOperator::localized_norm(const DecayFunction& gamma, const std::vector<int>& centers) const {
    const int W = win_.size();
    double worst = 0.0;
    for (int i = 0; i < W; ++i) {
        double gc = 0.0;
        for (int c : centers) gc = std::max(gc, gamma(std::abs(i + win_.lo - c)));
        for (int j = 0; j < W; ++j) {
            double b = block_2norm(mat_.block<2, 2>(2 * i, 2 * j));
            if (b == 0.0) continue;
            worst = std::max(worst, b / std::min(gc, gamma(std::abs(i - j))));
        }
    }
    return worst;
}

void DecayOperator::sparsify(double threshold, int bandwidth) {
    const int W = win_.size();
    for (int i = 0; i < W; ++i)
        for (int j = 0; j < W; ++j) {
            bool drop = bandwidth >= 0 && std::abs(i - j) > bandwidth;
            if (!drop && block_2norm(mat_.block<2, 2>(2 * i, 2 * j)) < threshold) drop = true;
            if (drop) mat_.block<2, 2>(2 * i, 2 * j).setZero();
        }
}

DecayOperator DecayOperator::operator+(const DecayOperator& other) const {
    if (!(win_ == other.win_)) throw std::invalid_argument("DecayOperator: window mismatch");
    return DecayOperator(win_, mat_ + other.mat_);
}

double operator_norm(const DecayOperator& a, const DecayFunction& gamma) {
    return a.gamma_norm(gamma);
}

DecayOperator compose(const DecayOperator& a, const DecayOperator& b) {
    if (!(a.win_ == b.win_)) throw std::invalid_argument("compose: window mismatch");
    return DecayOperator(a.win_, a.mat_ * b.mat_);
}

} // namespace latkam
