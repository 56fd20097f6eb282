#include "latkam/splitting.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace latkam {

MatrixXd SplittingBundle::flatten() const {
    const int n = dim();
    MatrixXd flat(n * n, static_cast<int>(S.size()));
    for (std::size_t g = 0; g < S.size(); ++g)
        flat.col(static_cast<int>(g)) = Eigen::Map<const VectorXd>(S[g].data(), n * n);
    return flat;
}

std::vector<MatrixXd> SplittingBundle::unflatten(const TorusGrid& grid, int n, const MatrixXd& flat) {
    std::vector<MatrixXd> out(grid.size());
    for (int g = 0; g < grid.size(); ++g)
        out[g] = Eigen::Map<const MatrixXd>(flat.col(g).data(), n, n);
    return out;
}

MatrixXd symplectic_J(const Window& w) {
    const int W = w.size();
    MatrixXd J = MatrixXd::Zero(2 * W, 2 * W);
    for (int i = 0; i < W; ++i) {
        J(2 * i, 2 * i + 1) = -1.0;
        J(2 * i + 1, 2 * i) = 1.0;
    }
    return J;
}

SplittingBundle initial_splitting(const ModelConfig& cfg, const TorusEmbedding& K) {
    const Window w = K.window;
    const int W = w.size();
    const int R = static_cast<int>(K.centers.size());

    // one-site linearization of the uncoupled map at the fixed point
    ModelConfig one = cfg;
    one.window = Window{0, 0};
    one.epsilon = 0.0;
    PhaseField origin(one.window);
    Eigen::Matrix2d M2 = dF_dense(one, origin);
    double tr = M2.trace();
    if (std::abs(tr) <= 2.0)
        throw std::runtime_error("initial_splitting: one-site linearization not hyperbolic");
    double disc = std::sqrt(tr * tr / 4.0 - 1.0); // det = 1
    double lp = tr / 2.0 + disc;
    double lm = tr / 2.0 - disc;
    if (std::abs(lp) < std::abs(lm)) std::swap(lp, lm);
    auto eigvec = [&](double lam) {
        Eigen::Vector2d v(M2(0, 1), lam - M2(0, 0));
        if (v.norm() < 1e-12) v = Eigen::Vector2d(lam - M2(1, 1), M2(1, 0));
        return v.normalized();
    };
    Eigen::Vector2d vu = eigvec(lp), vs = eigvec(lm);

    SplittingBundle b;
    b.grid = K.grid;
    b.window = w;
    b.nc = 2 * R;
    b.ns = b.nu = W - R;
    std::vector<bool> excited(W, false);
    for (int c : K.centers) excited[w.index(c)] = true;

    MatrixXd S0 = MatrixXd::Zero(2 * W, 2 * W);
    int cs = 0, cc = b.ns, cu = b.ns + b.nc;
    for (int i = 0; i < W; ++i) {
        if (excited[i]) {
            S0(2 * i, cc) = 1.0;
            S0(2 * i + 1, cc + 1) = 1.0;
            cc += 2;
        } else {
            S0.block<2, 1>(2 * i, cs++) = vs;
            S0.block<2, 1>(2 * i, cu++) = vu;
        }
    }
    b.S.assign(K.grid.size(), S0);
    b.mu1 = std::abs(lm);
    b.mu2 = std::abs(lm); // inverse cocycle contracts at the same rate
    b.mu3 = 1.0;
    b.Ch = 1.0;
    return b;
}

namespace {

// Orthonormalize the columns of each block, fixing signs so that a smooth
// family stays smooth (diagonal of R positive).
MatrixXd orthonormalize(const MatrixXd& B) {
    Eigen::HouseholderQR<MatrixXd> qr(B);
    MatrixXd Q = qr.householderQ() * MatrixXd::Identity(B.rows(), B.cols());
    MatrixXd R = qr.matrixQR().topRows(B.cols()).triangularView<Eigen::Upper>();
    for (int c = 0; c < B.cols(); ++c)
        if (R(c, c) < 0.0) Q.col(c) = -Q.col(c);
    return Q;
}

struct CocycleGrids {
    // forward cocycle in frame coordinates: C_F(theta) = S(theta+w)^-1 DF(K(theta)) S(theta)
    std::vector<MatrixXd> CF;
    // inverse cocycle: C_G(theta) = S(theta-w)^-1 DF(K(theta-w))^-1 S(theta)
    std::vector<MatrixXd> CG;
};

CocycleGrids assemble_cocycles(const SplittingBundle& b, const ModelConfig& cfg,
                               const TorusEmbedding& K, const VectorXd& omega) {
    const int ng = b.grid.size();
    const int n = b.dim();
    GridField Kg = evaluate_grid(K);
    GridField KgM = evaluate_grid(rotate(K, -omega));
    std::vector<MatrixXd> DF = kernels::jacobian_grid(cfg, Kg);
    std::vector<MatrixXd> DFm = kernels::jacobian_grid(cfg, KgM);
    MatrixXd flat = b.flatten();
    auto Srot = SplittingBundle::unflatten(b.grid, n, kernels::rotate_stack(b.grid, flat, omega));
    auto SrotM = SplittingBundle::unflatten(b.grid, n, kernels::rotate_stack(b.grid, flat, -omega));

    CocycleGrids out;
    out.CF.resize(ng);
    out.CG.resize(ng);
#pragma omp parallel for schedule(dynamic)
    for (int g = 0; g < ng; ++g) {
        out.CF[g] = Srot[g].partialPivLu().solve(DF[g] * b.S[g]);
        out.CG[g] = (DFm[g] * SrotM[g]).partialPivLu().solve(b.S[g]);
    }
    return out;
}

// N-step cocycle: C^(N)(theta) = C(theta+(N-1)w) ... C(theta).
std::vector<MatrixXd> cocycle_power(const TorusGrid& grid, const std::vector<MatrixXd>& C,
                                    const VectorXd& omega, int N) {
    const int ng = grid.size();
    const int n = C[0].rows();
    std::vector<MatrixXd> acc = C;
    MatrixXd flat(n * n, ng);
    for (int step = 1; step < N; ++step) {
        for (int g = 0; g < ng; ++g)
            flat.col(g) = Eigen::Map<const VectorXd>(acc[g].data(), n * n);
        MatrixXd rot = kernels::rotate_stack(grid, flat, -omega * double(step) * 0.0 + omega);
        // rotate acc by omega: value at theta becomes acc(theta+omega)
#pragma omp parallel for schedule(static)
        for (int g = 0; g < ng; ++g) {
            MatrixXd shifted = Eigen::Map<const MatrixXd>(rot.col(g).data(), n, n);
            acc[g] = shifted * C[g];
        }
    }
    return acc;
}

// Fixed-point iteration for the graph of a dominated sub-bundle:
//   u <- a22^-1 [ u o T_eff (a11 + a12 u) - a21 ]
// with blocks taken w.r.t. the index split (rows1 | rows2) of the cocycle C
// over the effective rotation (omega for the forward cocycle, -omega for the
// inverse one).  Returns u as a (n2 x n1) stack.
std::vector<MatrixXd> graph_fixpoint(const TorusGrid& grid, const std::vector<MatrixXd>& C,
                                     const VectorXd& eff_omega, int off1, int n1, int off2, int n2,
                                     const GraphRefineOptions& opt, const char* tag = "") {
    const bool debug = std::getenv("LATKAM_GRAPH_DEBUG") != nullptr;
    const int ng = grid.size();
    std::vector<Eigen::PartialPivLU<MatrixXd>> a22lu(ng);
    std::vector<MatrixXd> a11(ng), a12(ng), a21(ng);
#pragma omp parallel for schedule(static)
    for (int g = 0; g < ng; ++g) {
        a11[g] = C[g].block(off1, off1, n1, n1);
        a12[g] = C[g].block(off1, off2, n1, n2);
        a21[g] = C[g].block(off2, off1, n2, n1);
        a22lu[g].compute(C[g].block(off2, off2, n2, n2));
    }
    std::vector<MatrixXd> u(ng, MatrixXd::Zero(n2, n1));
    MatrixXd flat = MatrixXd::Zero(n2 * n1, ng);
    for (int it = 0; it < opt.maxInner; ++it) {
        MatrixXd rot = kernels::rotate_stack(grid, flat, eff_omega);
        double change = 0.0, unorm = 0.0;
#pragma omp parallel for schedule(static) reduction(max : change, unorm)
        for (int g = 0; g < ng; ++g) {
            MatrixXd urot = Eigen::Map<const MatrixXd>(rot.col(g).data(), n2, n1);
            MatrixXd unew = a22lu[g].solve(urot * (a11[g] + a12[g] * u[g]) - a21[g]);
            change = std::max(change, (unew - u[g]).cwiseAbs().maxCoeff());
            u[g] = unew;
            unorm = std::max(unorm, u[g].cwiseAbs().maxCoeff());
            flat.col(g) = Eigen::Map<const VectorXd>(u[g].data(), n2 * n1);
        }
        if (debug) std::fprintf(stderr, "    graph[%s] it=%d unorm=%.3e change=%.3e\n", tag, it, unorm, change);
        if (unorm > 10.0)
            throw ContractionFailure("graph_fixpoint: iterate left the unit graph ball");
        if (change < opt.innerTol) return u;
    }
    throw ContractionFailure("graph_fixpoint: no convergence within maxInner");
}

} // namespace

double invariance_defect(const SplittingBundle& b, const ModelConfig& cfg,
                         const TorusEmbedding& K, const VectorXd& omega) {
    const int ng = b.grid.size();
    const int n = b.dim();
    GridField Kg = evaluate_grid(K);
    std::vector<MatrixXd> DF = kernels::jacobian_grid(cfg, Kg);
    auto Srot = SplittingBundle::unflatten(b.grid, n,
                                           kernels::rotate_stack(b.grid, b.flatten(), omega));
    double worst = 0.0;
#pragma omp parallel for schedule(dynamic) reduction(max : worst)
    for (int g = 0; g < ng; ++g) {
        Eigen::PartialPivLU<MatrixXd> lu(Srot[g]);
        MatrixXd image = DF[g] * b.S[g];
        MatrixXd coords = lu.solve(image);
        auto block_defect = [&](int off, int cols) {
            for (int c = off; c < off + cols; ++c) {
                double total = coords.col(c).norm();
                VectorXd outside = coords.col(c);
                outside.segment(off, cols).setZero();
                if (total > 0.0) worst = std::max(worst, outside.norm() / total);
            }
        };
        block_defect(0, b.ns);
        block_defect(b.ns, b.nc);
        block_defect(b.ns + b.nc, b.nu);
    }
    return worst;
}

SplittingBundle graph_refine(const SplittingBundle& b0, const ModelConfig& cfg,
                             const TorusEmbedding& K, const VectorXd& omega,
                             const GraphRefineOptions& opt) {
    SplittingBundle b = b0;
    const int ng = b.grid.size();
    const int n = b.dim();
    const int ns = b.ns, nc = b.nc, nu = b.nu;

    for (int outer = 0; outer < opt.maxOuter; ++outer) {
        b.defect = invariance_defect(b, cfg, K, omega);
        if (opt.verbose) std::fprintf(stderr, "  graph_refine pass %d: defect %.3e\n", outer, b.defect);
        if (b.defect < opt.tol) return b;

        CocycleGrids co = assemble_cocycles(b, cfg, K, omega);
        std::vector<MatrixXd> CF = co.CF, CG = co.CG;
        VectorXd womega = omega, momega = -omega;
        int N = opt.npower;
        for (int attempt = 0;; ++attempt) {
            try {
                if (N > 1) {
                    CF = cocycle_power(b.grid, co.CF, omega, N);
                    CG = cocycle_power(b.grid, co.CG, momega, N);
                    womega = omega * double(N);
                    momega = -omega * double(N);
                }
                // graphs over the current frame: indices [0,ns) stable,
                // [ns,ns+nc) center, [ns+nc,n) unstable
                auto u_s = graph_fixpoint(b.grid, CF, womega, 0, ns, ns, nc + nu, opt, "s");
                auto u_cs = graph_fixpoint(b.grid, CF, womega, 0, ns + nc, ns + nc, nu, opt, "cs");
                auto u_u = graph_fixpoint(b.grid, CG, momega, ns + nc, nu, 0, ns + nc, opt, "u");
                auto u_cu = graph_fixpoint(b.grid, CG, momega, ns, nc + nu, 0, ns, opt, "cu");

                std::vector<MatrixXd> Snew(ng);
#pragma omp parallel for schedule(dynamic)
                for (int g = 0; g < ng; ++g) {
                    const MatrixXd& S = b.S[g];
                    MatrixXd Bsn = S.leftCols(ns) + S.rightCols(nc + nu) * u_s[g];
                    MatrixXd Bcs = S.leftCols(ns + nc) + S.rightCols(nu) * u_cs[g];
                    MatrixXd Bun = S.rightCols(nu) + S.leftCols(ns + nc) * u_u[g];
                    MatrixXd Bcu = S.rightCols(nc + nu) + S.leftCols(ns) * u_cu[g];
                    // E^c = E^cs \cap E^cu via the nullspace of [Bcs, -Bcu]
                    MatrixXd pencil(S.rows(), Bcs.cols() + Bcu.cols());
                    pencil << Bcs, -Bcu;
                    Eigen::JacobiSVD<MatrixXd> svd(pencil, Eigen::ComputeFullV);
                    MatrixXd null = svd.matrixV().rightCols(nc);
                    MatrixXd Bcn = Bcs * null.topRows(Bcs.cols());
                    // keep the frame smooth: express the old center frame in
                    // the new subspace, then orthonormalize
                    Eigen::HouseholderQR<MatrixXd> qr(Bcn);
                    MatrixXd Qc = qr.householderQ() * MatrixXd::Identity(S.rows(), nc);
                    MatrixXd Bc_old = S.middleCols(ns, nc);
                    MatrixXd Bc = orthonormalize(Qc * (Qc.transpose() * Bc_old));
                    Snew[g] = MatrixXd(S.rows(), n);
                    Snew[g] << orthonormalize(Bsn), Bc, orthonormalize(Bun);
                }
                b.S = std::move(Snew);
                break;
            } catch (const ContractionFailure&) {
                if (N >= 8 || attempt >= 3) throw;
                N *= 2; // escalate to the N-step criterion
            }
        }
    }
    b.defect = invariance_defect(b, cfg, K, omega);
    if (b.defect >= opt.tol)
        throw ContractionFailure("graph_refine: defect did not reach tolerance");
    return b;
}

namespace {

double weighted_stack_norm(const Window& w, const MatrixXd& stack, int ncols,
                           const DecayFunction& gamma, const std::vector<int>& centers) {
    // stack rows hold ncols columns of 2W-vectors; weighted sup over sites
    const int W = w.size();
    double worst = 0.0;
    for (int c = 0; c < ncols; ++c) {
        for (int s = 0; s < W; ++s) {
            double gw = 0.0;
            for (int cc : centers) gw = std::max(gw, gamma(std::abs(s + w.lo - cc)));
            for (int g = 0; g < stack.cols(); ++g) {
                double mag = std::hypot(stack(c * 2 * W + 2 * s, g), stack(c * 2 * W + 2 * s + 1, g));
                worst = std::max(worst, mag / gw);
            }
        }
    }
    return worst;
}

} // namespace

RateEstimate measure_rates(const SplittingBundle& b, const ModelConfig& cfg,
                           const TorusEmbedding& K, const VectorXd& omega,
                           const DecayFunction& gamma, const std::vector<int>& centers, int nmax) {
    const int ng = b.grid.size();
    const int n = b.dim();
    GridField KgM = evaluate_grid(rotate(K, -omega));
    GridField Kg = evaluate_grid(K);
    std::vector<MatrixXd> DFm = kernels::jacobian_grid(cfg, KgM); // DF(K(theta-omega))
    std::vector<MatrixXd> DFinv(ng);
    std::vector<Eigen::PartialPivLU<MatrixXd>> Slu(ng);
#pragma omp parallel for schedule(dynamic)
    for (int g = 0; g < ng; ++g) {
        PhaseField x(b.window);
        x.v = Kg.values.col(g);
        DFinv[g] = dF_dense(cfg, x).partialPivLu().inverse();
        Slu[g].compute(b.S[g]);
    }

    // forward products ending at theta: z_k = DF(K(theta-omega)) z_{k-1}(theta-omega);
    // after each application the columns are projected back onto their
    // sub-bundle, which stops roundoff in the expanding complement from
    // contaminating the contracting rates.
    auto growth = [&](const std::vector<MatrixXd>& M, const VectorXd& shift, MatrixXd stack,
                      int off, int ncols) {
        std::vector<double> norms;
        double n0 = weighted_stack_norm(b.window, stack, ncols, gamma, centers);
        for (int k = 1; k <= nmax; ++k) {
            MatrixXd rot = kernels::rotate_stack(b.grid, stack, shift);
#pragma omp parallel for schedule(static)
            for (int g = 0; g < ng; ++g)
                for (int c = 0; c < ncols; ++c) {
                    auto seg = rot.col(g).segment(c * 2 * b.window.size(), 2 * b.window.size());
                    VectorXd coords = Slu[g].solve((M[g] * seg.eval()).eval());
                    VectorXd kept = VectorXd::Zero(n);
                    kept.segment(off, ncols) = coords.segment(off, ncols);
                    seg = b.S[g] * kept;
                }
            stack = rot;
            norms.push_back(weighted_stack_norm(b.window, stack, ncols, gamma, centers) / n0);
        }
        // geometric fit: slope of log norms vs k
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (int k = 1; k <= nmax; ++k) {
            double x = k, y = std::log(norms[k - 1]);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        double slope = (nmax * sxy - sx * sy) / (nmax * sxx - sx * sx);
        double mu = std::exp(slope);
        double ch = 1.0;
        for (int k = 1; k <= nmax; ++k) ch = std::max(ch, norms[k - 1] / std::pow(mu, k));
        return std::pair<double, double>(mu, ch);
    };

    auto stack_of = [&](int off, int cols) {
        MatrixXd stack(cols * 2 * b.window.size(), ng);
        for (int g = 0; g < ng; ++g)
            for (int c = 0; c < cols; ++c)
                stack.col(g).segment(c * 2 * b.window.size(), 2 * b.window.size()) =
                    b.S[g].col(off + c);
        return stack;
    };

    VectorXd momega = -omega;
    auto [m1, c1] = growth(DFm, momega, stack_of(0, b.ns), 0, b.ns);
    auto [m2, c2] = growth(DFinv, omega, stack_of(b.ns + b.nc, b.nu), b.ns + b.nc, b.nu);
    auto [m3f, c3f] = growth(DFm, momega, stack_of(b.ns, b.nc), b.ns, b.nc);
    auto [m3b, c3b] = growth(DFinv, omega, stack_of(b.ns, b.nc), b.ns, b.nc);

    RateEstimate r;
    r.mu1 = m1;
    r.mu2 = m2;
    r.mu3 = std::max(m3f, m3b);
    r.Ch = std::max(std::max(c1, c2), std::max(c3f, c3b));
    return r;
}

std::array<GridField, 3> project(const SplittingBundle& b, const GridField& G) {
    const int ng = b.grid.size();
    std::array<GridField, 3> out{GridField(b.grid, b.window), GridField(b.grid, b.window),
                                 GridField(b.grid, b.window)};
#pragma omp parallel for schedule(static)
    for (int g = 0; g < ng; ++g) {
        VectorXd coords = b.S[g].partialPivLu().solve(G.values.col(g));
        out[0].values.col(g) = b.S[g].leftCols(b.ns) * coords.head(b.ns);
        out[1].values.col(g) = b.S[g].middleCols(b.ns, b.nc) * coords.segment(b.ns, b.nc);
        out[2].values.col(g) = b.S[g].rightCols(b.nu) * coords.tail(b.nu);
    }
    return out;
}

std::array<GridField, 3> project_shifted(const SplittingBundle& b, const GridField& G,
                                         const VectorXd& shift) {
    const int ng = b.grid.size();
    auto Ss = SplittingBundle::unflatten(b.grid, b.dim(),
                                         kernels::rotate_stack(b.grid, b.flatten(), shift));
    std::array<GridField, 3> out{GridField(b.grid, b.window), GridField(b.grid, b.window),
                                 GridField(b.grid, b.window)};
#pragma omp parallel for schedule(static)
    for (int g = 0; g < ng; ++g) {
        VectorXd coords = Ss[g].partialPivLu().solve(G.values.col(g));
        out[0].values.col(g) = Ss[g].leftCols(b.ns) * coords.head(b.ns);
        out[1].values.col(g) = Ss[g].middleCols(b.ns, b.nc) * coords.segment(b.ns, b.nc);
        out[2].values.col(g) = Ss[g].rightCols(b.nu) * coords.tail(b.nu);
    }
    return out;
}

double symplectic_orthogonality_residual(const SplittingBundle& b) {
    MatrixXd J = symplectic_J(b.window);
    double worst = 0.0;
    for (std::size_t g = 0; g < b.S.size(); ++g) {
        const auto& S = b.S[g];
        MatrixXd Bs = S.leftCols(b.ns), Bc = S.middleCols(b.ns, b.nc), Bu = S.rightCols(b.nu);
        auto pairing = [&](const MatrixXd& A, const MatrixXd& B) {
            if (A.cols() == 0 || B.cols() == 0) return 0.0;
            return (A.transpose() * J * B).cwiseAbs().maxCoeff();
        };
        worst = std::max({worst, pairing(Bs, Bs), pairing(Bu, Bu), pairing(Bs, Bc), pairing(Bu, Bc)});
    }
    return worst;
}

} // namespace latkam
