#include "latkam/model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace latkam {

namespace {
constexpr double two_pi = 2.0 * std::numbers::pi;
}

double ModelConfig::onsiteW(double q) const {
    if (onsite == Onsite::pendulum) return std::cos(q) - 1.0;
    double s = 0.0, qp = q * q;
    for (double c : poly) {
        s += c * qp;
        qp *= q;
    }
    return s;
}

double ModelConfig::onsiteWp(double q) const {
    if (onsite == Onsite::pendulum) return -std::sin(q);
    double s = 0.0, qp = q;
    for (std::size_t j = 0; j < poly.size(); ++j) {
        s += poly[j] * (double(j) + 2.0) * qp;
        qp *= q;
    }
    return s;
}

double ModelConfig::onsiteWpp(double q) const {
    if (onsite == Onsite::pendulum) return -std::cos(q);
    double s = 0.0, qp = 1.0;
    for (std::size_t j = 0; j < poly.size(); ++j) {
        s += poly[j] * (double(j) + 2.0) * (double(j) + 1.0) * qp;
        qp *= q;
    }
    return s;
}

int ModelConfig::coupling_range() const {
    int r = 0;
    for (const auto& c : couplings) r = std::max(r, c.offset);
    return r;
}

void ModelConfig::validate(const DecayFunction* gamma) const {
    if (stepSize <= 0.0 || substeps < 1) throw std::invalid_argument("model: bad step settings");
    if (std::abs(onsiteWp(0.0)) > 1e-14) throw std::invalid_argument("model: W'(0) != 0");
    if (onsiteWpp(0.0) >= 0.0)
        throw std::invalid_argument("model: W''(0) >= 0, fixed point not hyperbolic");
    for (const auto& c : couplings)
        if (c.offset < 1) throw std::invalid_argument("model: coupling offset < 1");
    if (gamma) {
        // report-style check: strengths below C_V Gamma(k) with C_V from k=1
        double cv = 0.0;
        for (const auto& c : couplings)
            cv = std::max(cv, (std::abs(c.quad) + std::abs(c.quart)) / (*gamma)(c.offset));
        for (const auto& c : couplings)
            if (std::abs(c.quad) + std::abs(c.quart) > cv * (*gamma)(c.offset) * (1.0 + 1e-12))
                throw std::invalid_argument("model: coupling strengths violate decay bound");
    }
}

VectorXd force(const ModelConfig& cfg, const VectorXd& q) {
    const int W = cfg.window.size();
    VectorXd f(W);
#pragma omp parallel for schedule(static) if (W >= 256)
    for (int i = 0; i < W; ++i) {
        double acc = -cfg.onsiteWp(q[i]);
        for (const auto& c : cfg.couplings) {
            double qr = i + c.offset < W ? q[i + c.offset] : 0.0;
            double ql = i - c.offset >= 0 ? q[i - c.offset] : 0.0;
            double sr = q[i] - qr; // V_k'(q_i - q_{i+k})
            double sl = ql - q[i]; // V_k'(q_{i-k} - q_i)
            double vpr = c.quad * sr + c.quart * sr * sr * sr;
            double vpl = c.quad * sl + c.quart * sl * sl * sl;
            acc -= cfg.epsilon * (vpr - vpl);
        }
        f[i] = acc;
    }
    return f;
}

MatrixXd force_jacobian(const ModelConfig& cfg, const VectorXd& q) {
    const int W = cfg.window.size();
    MatrixXd J = MatrixXd::Zero(W, W);
    for (int i = 0; i < W; ++i) {
        J(i, i) = -cfg.onsiteWpp(q[i]);
        for (const auto& c : cfg.couplings) {
            double qr = i + c.offset < W ? q[i + c.offset] : 0.0;
            double ql = i - c.offset >= 0 ? q[i - c.offset] : 0.0;
            double vppr = c.quad + 3.0 * c.quart * (q[i] - qr) * (q[i] - qr);
            double vppl = c.quad + 3.0 * c.quart * (ql - q[i]) * (ql - q[i]);
            J(i, i) -= cfg.epsilon * (vppr + vppl);
            if (i + c.offset < W) J(i, i + c.offset) += cfg.epsilon * vppr;
            if (i - c.offset >= 0) J(i, i - c.offset) += cfg.epsilon * vppl;
        }
    }
    return J;
}

double energy(const ModelConfig& cfg, const PhaseField& x) {
    const int W = cfg.window.size();
    double e = 0.0;
    for (int i = 0; i < W; ++i) {
        double q = x.v[2 * i], p = x.v[2 * i + 1];
        e += 0.5 * p * p + cfg.onsiteW(q);
        for (const auto& c : cfg.couplings) {
            double qr = i + c.offset < W ? x.v[2 * (i + c.offset)] : 0.0;
            double s = q - qr;
            e += cfg.epsilon * (0.5 * c.quad * s * s + 0.25 * c.quart * s * s * s * s);
            if (i - c.offset < 0) { // boundary pair with the frozen site on the left
                double s2 = 0.0 - q;
                e += cfg.epsilon * (0.5 * c.quad * s2 * s2 + 0.25 * c.quart * s2 * s2 * s2 * s2);
            }
        }
    }
    return e;
}

PhaseField map_F(const ModelConfig& cfg, const PhaseField& x) {
    const int W = cfg.window.size();
    VectorXd q(W), p(W);
    for (int i = 0; i < W; ++i) {
        q[i] = x.v[2 * i];
        p[i] = x.v[2 * i + 1];
    }
    const double h = cfg.stepSize;
    for (int s = 0; s < cfg.substeps; ++s) {
        p += 0.5 * h * force(cfg, q);
        q += h * p;
        p += 0.5 * h * force(cfg, q);
    }
    PhaseField out(x.window);
    for (int i = 0; i < W; ++i) {
        out.v[2 * i] = q[i];
        out.v[2 * i + 1] = p[i];
    }
    return out;
}

// Accumulates the chain rule in place: kicks and drifts act on the rows of a
// running (2W x 2W) matrix, so each substep costs O(W^2 range) instead of a
// banded product.
MatrixXd dF_dense(const ModelConfig& cfg, const PhaseField& x) {
    const int W = cfg.window.size();
    const int n = 2 * W;
    const double h = cfg.stepSize;
    VectorXd q(W), p(W);
    for (int i = 0; i < W; ++i) {
        q[i] = x.v[2 * i];
        p[i] = x.v[2 * i + 1];
    }
    MatrixXd D = MatrixXd::Identity(n, n);
    auto kick = [&](double coef) {
        MatrixXd Jf = force_jacobian(cfg, q);
        const int r = cfg.coupling_range();
        for (int i = 0; i < W; ++i)
            for (int j = std::max(0, i - r); j <= std::min(W - 1, i + r); ++j)
                if (Jf(i, j) != 0.0) D.row(2 * i + 1) += coef * Jf(i, j) * D.row(2 * j);
    };
    for (int s = 0; s < cfg.substeps; ++s) {
        kick(0.5 * h);
        p += 0.5 * h * force(cfg, q);
        for (int i = 0; i < W; ++i) D.row(2 * i) += h * D.row(2 * i + 1);
        q += h * p;
        kick(0.5 * h);
        p += 0.5 * h * force(cfg, q);
    }
    return D;
}

DecayOperator dF(const ModelConfig& cfg, const PhaseField& x) {
    const int W = cfg.window.size();
    const double h = cfg.stepSize;
    VectorXd q(W), p(W);
    for (int i = 0; i < W; ++i) {
        q[i] = x.v[2 * i];
        p[i] = x.v[2 * i + 1];
    }
    DecayOperator acc = DecayOperator::identity_blocks(cfg.window);
    auto kick_factor = [&]() {
        DecayOperator K = DecayOperator::identity_blocks(cfg.window);
        MatrixXd Jf = force_jacobian(cfg, q);
        for (int i = 0; i < W; ++i)
            for (int j = 0; j < W; ++j)
                if (Jf(i, j) != 0.0) K.dense()(2 * i + 1, 2 * j) = 0.5 * h * Jf(i, j);
        return K;
    };
    auto drift_factor = [&]() {
        DecayOperator D = DecayOperator::identity_blocks(cfg.window);
        for (int i = 0; i < W; ++i) D.dense()(2 * i, 2 * i + 1) = h;
        return D;
    };
    for (int s = 0; s < cfg.substeps; ++s) {
        acc = compose(kick_factor(), acc);
        p += 0.5 * h * force(cfg, q);
        acc = compose(drift_factor(), acc);
        q += h * p;
        acc = compose(kick_factor(), acc);
        p += 0.5 * h * force(cfg, q);
    }
    return acc;
}

PhaseField map_F_lambda(const ModelConfig& cfg, const std::vector<int>& centers,
                        const VectorXd& lambda, const PhaseField& x) {
    if (static_cast<int>(centers.size()) != lambda.size())
        throw std::invalid_argument("map_F_lambda: lambda/center length mismatch");
    PhaseField out = map_F(cfg, x);
    for (std::size_t j = 0; j < centers.size(); ++j) out.p(centers[j]) += lambda[j];
    return out;
}

VectorXd dF_dlambda(const Window& w, int center) {
    VectorXd v = VectorXd::Zero(2 * w.size());
    v[2 * w.index(center) + 1] = 1.0;
    return v;
}

namespace {

// Dormand-Prince 5(4) coefficients.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

VectorXd dopri5(const std::function<VectorXd(const VectorXd&)>& rhs, VectorXd y, double t,
                double rtol) {
    if (t == 0.0) return y;
    double dir = t > 0.0 ? 1.0 : -1.0;
    double remaining = std::abs(t);
    double h = std::min(0.1, remaining);
    VectorXd k1 = rhs(y);
    int rejects_in_a_row = 0;
    while (remaining > 0.0) {
        h = std::min(h, remaining);
        double hd = dir * h;
        VectorXd k2 = rhs(y + hd * (a21 * k1));
        VectorXd k3 = rhs(y + hd * (a31 * k1 + a32 * k2));
        VectorXd k4 = rhs(y + hd * (a41 * k1 + a42 * k2 + a43 * k3));
        VectorXd k5 = rhs(y + hd * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        VectorXd k6 = rhs(y + hd * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        VectorXd ynew = y + hd * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        VectorXd k7 = rhs(ynew);
        VectorXd err = hd * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        double scale = std::max(1.0, std::max(y.cwiseAbs().maxCoeff(), ynew.cwiseAbs().maxCoeff()));
        double enorm = err.cwiseAbs().maxCoeff() / (rtol * scale);
        if (enorm <= 1.0) {
            y = ynew;
            k1 = k7;
            remaining -= h;
            rejects_in_a_row = 0;
        } else if (++rejects_in_a_row > 60) {
            throw std::runtime_error("flow: step-size underflow");
        }
        double fac = 0.9 * std::pow(std::max(enorm, 1e-10), -0.2);
        h *= std::min(5.0, std::max(0.2, fac));
        if (h < 1e-14) throw std::runtime_error("flow: step-size underflow");
    }
    return y;
}

} // namespace

PhaseField flow(const ModelConfig& cfg, const PhaseField& x0, double t, double rtol) {
    const int W = cfg.window.size();
    auto rhs = [&](const VectorXd& y) {
        VectorXd q(W);
        for (int i = 0; i < W; ++i) q[i] = y[2 * i];
        VectorXd f = force(cfg, q);
        VectorXd dy(2 * W);
        for (int i = 0; i < W; ++i) {
            dy[2 * i] = y[2 * i + 1];
            dy[2 * i + 1] = f[i];
        }
        return dy;
    };
    PhaseField out = x0;
    out.v = dopri5(rhs, x0.v, t, rtol);
    return out;
}

void flow_variational(const ModelConfig& cfg, PhaseField& x, MatrixXd& DS, double t, double rtol) {
    const int W = cfg.window.size();
    const int n = 2 * W;
    if (DS.rows() != n || DS.cols() != n) DS = MatrixXd::Identity(n, n);
    VectorXd y(n + n * n);
    y.head(n) = x.v;
    for (int c = 0; c < n; ++c) y.segment(n + c * n, n) = DS.col(c);
    auto rhs = [&](const VectorXd& yy) {
        VectorXd q(W);
        for (int i = 0; i < W; ++i) q[i] = yy[2 * i];
        VectorXd f = force(cfg, q);
        MatrixXd Jf = force_jacobian(cfg, q);
        VectorXd dy(yy.size());
        for (int i = 0; i < W; ++i) {
            dy[2 * i] = yy[2 * i + 1];
            dy[2 * i + 1] = f[i];
        }
        for (int c = 0; c < n; ++c) {
            auto col = yy.segment(n + c * n, n);
            auto dcol = dy.segment(n + c * n, n);
            for (int i = 0; i < W; ++i) {
                dcol[2 * i] = col[2 * i + 1];
                double acc = 0.0;
                for (int j = 0; j < W; ++j)
                    if (Jf(i, j) != 0.0) acc += Jf(i, j) * col[2 * j];
                dcol[2 * i + 1] = acc;
            }
        }
        return dy;
    };
    y = dopri5(rhs, y, t, rtol);
    x.v = y.head(n);
    for (int c = 0; c < n; ++c) DS.col(c) = y.segment(n + c * n, n);
}

double rotation_number(const ModelConfig& cfg, double q0, int n) {
    // scalar one-site Verlet; this path runs tens of millions of substeps
    // inside the amplitude bisection
    const double h = cfg.stepSize;
    const double pi = std::numbers::pi;
    double q = q0, p = 0.0;
    double prev = std::atan2(p, q - pi);
    double wsum = 0.0, asum = 0.0;
    for (int i = 1; i <= n; ++i) {
        for (int s = 0; s < cfg.substeps; ++s) {
            p -= 0.5 * h * cfg.onsiteWp(q);
            q += h * p;
            p -= 0.5 * h * cfg.onsiteWp(q);
        }
        double ang = std::atan2(p, q - pi);
        // libration runs clockwise and advances less than a full turn per
        // map, so the increment unwraps into (-2 pi, 0]
        double d = ang - prev;
        d -= two_pi * std::ceil(d / two_pi);
        prev = ang;
        double tt = double(i) / double(n + 1);
        double w = std::exp(-1.0 / (tt * (1.0 - tt)));
        wsum += w;
        asum += w * d;
    }
    return -(asum / wsum) / two_pi;
}

double amplitude_for_rotation(const ModelConfig& cfg, double omega, double tol) {
    const double pi = std::numbers::pi;
    // rotation number decreases with amplitude: bracket [near-elliptic, near-separatrix]
    double lo = pi + 1e-3, hi = pi + 3.05;
    double rlo = rotation_number(cfg, lo), rhi = rotation_number(cfg, hi);
    if (!(omega <= rlo && omega >= rhi))
        throw std::runtime_error("amplitude_for_rotation: target rotation number not attainable");
    for (int it = 0; it < 80; ++it) {
        double mid = 0.5 * (lo + hi);
        double r = rotation_number(cfg, mid);
        if (std::abs(r - omega) < tol) return mid;
        (r > omega ? lo : hi) = mid;
        if (hi - lo < 1e-14) break;
    }
    return 0.5 * (lo + hi);
}

} // namespace latkam
