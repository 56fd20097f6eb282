#include "latkam/kam.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <cstdio>
#include <limits>

namespace latkam {

namespace {

struct StepWorkspace {
    GridField Kg;
    GridField KgRotM;                 // K o T_{-omega}
    std::vector<MatrixXd> DF;         // DF(K(theta))
    std::vector<MatrixXd> DFrotM;     // DF(K(theta-omega))
    std::vector<MatrixXd> DFinv;      // DF(K(theta))^{-1}
    MatrixXd DKstack;                 // (2W l x Ng)
    MatrixXd DKrotStack;              // derivative of K o T_omega
    std::vector<MatrixXd> Srot;       // bundle frames at theta+omega
    bool haveInv = false;
};

StepWorkspace make_workspace(const ModelConfig& cfg, const KamState& st, bool needInverse) {
    StepWorkspace w;
    w.Kg = evaluate_grid(st.K);
    TorusEmbedding KrotM = rotate(st.K, (-st.omega).eval());
    w.KgRotM = evaluate_grid(KrotM);
    w.DF = kernels::jacobian_grid(cfg, w.Kg);
    w.DFrotM = kernels::jacobian_grid(cfg, w.KgRotM);
    w.DKstack = derivative_grid(st.K);
    w.DKrotStack = derivative_grid(rotate(st.K, st.omega));
    w.Srot = SplittingBundle::unflatten(st.bundle.grid, st.bundle.dim(),
                                        kernels::rotate_stack(st.bundle.grid, st.bundle.flatten(),
                                                              st.omega));
    if (needInverse) {
        const int ng = st.K.grid.size();
        w.DFinv.resize(ng);
#pragma omp parallel for schedule(dynamic)
        for (int g = 0; g < ng; ++g) w.DFinv[g] = w.DF[g].partialPivLu().inverse();
        w.haveInv = true;
    }
    return w;
}

MatrixXd dlambda_matrix(const Window& w, const std::vector<int>& centers) {
    MatrixXd D = MatrixXd::Zero(2 * w.size(), static_cast<int>(centers.size()));
    for (std::size_t j = 0; j < centers.size(); ++j) D.col(j) = dF_dlambda(w, centers[j]);
    return D;
}

MatrixXd orthonormal_cols(const MatrixXd& B) {
    Eigen::HouseholderQR<MatrixXd> qr(B);
    MatrixXd Q = qr.householderQ() * MatrixXd::Identity(B.rows(), B.cols());
    MatrixXd R = qr.matrixQR().topRows(B.cols()).triangularView<Eigen::Upper>();
    for (int c = 0; c < B.cols(); ++c)
        if (R(c, c) < 0.0) Q.col(c) = -Q.col(c);
    return Q;
}

CenterGeometry center_geometry_ws(const ModelConfig& cfg, const KamState& st,
                                  const SolverOptions& opt, const StepWorkspace& w) {
    const int ng = st.K.grid.size();
    const int l = st.K.l();
    const int n = 2 * st.K.window.size();
    const int ns = st.bundle.ns, nc = st.bundle.nc;

    CenterGeometry geo;
    geo.Mt.resize(ng);
    geo.MtJcMt.resize(ng);
    geo.A.resize(ng);
    geo.Q.resize(ng);
    geo.L.resize(ng);
    geo.H.resize(ng);
    geo.VinvRot.resize(ng);
    geo.MtRotT_Jc.resize(ng);
    geo.DKrotT_Jc.resize(ng);
    geo.dLambdaF = dlambda_matrix(st.K.window, st.K.centers);

    const MatrixXd J = symplectic_J(st.K.window);
    double normN = 0.0, normL = 0.0;
    bool degenerate = false;

#pragma omp parallel for schedule(dynamic) reduction(max : normN, normL)
    for (int g = 0; g < ng; ++g) {
        if (degenerate) continue;
        MatrixXd DK(n, l), DKrot(n, l);
        for (int j = 0; j < l; ++j) {
            DK.col(j) = w.DKstack.col(g).segment(j * n, n);
            DKrot.col(j) = w.DKrotStack.col(g).segment(j * n, n);
        }
        Eigen::PartialPivLU<MatrixXd> luS(st.bundle.S[g]);
        Eigen::PartialPivLU<MatrixXd> luSrot(w.Srot[g]);
        MatrixXd Bc = st.bundle.S[g].middleCols(ns, nc);
        MatrixXd BcRot = orthonormal_cols(w.Srot[g].middleCols(ns, nc));

        MatrixXd NtN = DK.transpose() * DK;
        Eigen::FullPivLU<MatrixXd> luN(NtN);
        MatrixXd NtNrot = DKrot.transpose() * DKrot;
        Eigen::FullPivLU<MatrixXd> luNrot(NtNrot);
        if (!luN.isInvertible() || !luNrot.isInvertible()) {
            degenerate = true;
            continue;
        }
        MatrixXd N = luN.inverse();
        MatrixXd Nrot = luNrot.inverse();
        normN = std::max(normN, N.norm());

        MatrixXd Jc = Bc.transpose() * J * Bc;          // 2l x 2l, antisymmetric
        MatrixXd JcRot = BcRot.transpose() * J * BcRot;
        MatrixXd JcInv = Jc.inverse();
        MatrixXd JcRotInv = JcRot.inverse();

        auto jc_inv_apply = [&](const MatrixXd& X) { return (Bc * (JcInv * (Bc.transpose() * X))).eval(); };
        auto jc_rot_inv_apply = [&](const MatrixXd& X) {
            return (BcRot * (JcRotInv * (BcRot.transpose() * X))).eval();
        };
        MatrixXd JcApplyRot = BcRot * JcRot * BcRot.transpose(); // ambient (2W x 2W), rank 2l

        MatrixXd PiC_DK = Bc * luS.solve(DK).middleRows(ns, nc);
        MatrixXd PiC_DKrot = BcRot * luSrot.solve(DKrot).middleRows(ns, nc);

        geo.Mt[g] = MatrixXd(n, 2 * l);
        geo.Mt[g] << PiC_DK, jc_inv_apply(PiC_DK * N);
        MatrixXd MtRot(n, 2 * l);
        MtRot << PiC_DKrot, jc_rot_inv_apply(PiC_DKrot * Nrot);

        MatrixXd JcApply = Bc * Jc * Bc.transpose();
        geo.MtJcMt[g] = geo.Mt[g].transpose() * JcApply * geo.Mt[g];

        MatrixXd P = DK * N;
        MatrixXd Prot = DKrot * Nrot;
        geo.A[g] = Prot.transpose() * (w.DF[g] * jc_inv_apply(P) - jc_rot_inv_apply(Prot));
        geo.Q[g] = DKrot.transpose() * (JcApplyRot * geo.dLambdaF);
        geo.L[g] = DK.transpose() * J * DK;
        normL = std::max(normL, geo.L[g].cwiseAbs().maxCoeff());

        // V(theta+omega)^{-1} = [[s22, -I],[I, 0]] with
        // s22 = -N^T (Bc^T DK)^T Jc^{-1} (Bc^T DK) N at theta+omega.
        MatrixXd CDrot = BcRot.transpose() * DKrot;
        MatrixXd s22 = -(Nrot.transpose() * CDrot.transpose() * JcRotInv * CDrot * Nrot);
        geo.VinvRot[g] = MatrixXd::Zero(2 * l, 2 * l);
        geo.VinvRot[g].topLeftCorner(l, l) = s22;
        geo.VinvRot[g].topRightCorner(l, l) = -MatrixXd::Identity(l, l);
        geo.VinvRot[g].bottomLeftCorner(l, l) = MatrixXd::Identity(l, l);

        geo.MtRotT_Jc[g] = MtRot.transpose() * JcApplyRot;
        geo.DKrotT_Jc[g] = DKrot.transpose() * JcApplyRot;
        geo.H[g] = geo.VinvRot[g] * (geo.MtRotT_Jc[g] * geo.dLambdaF);
    }
    if (degenerate) throw DegenerateEmbedding("center_geometry: DK^T DK singular on the grid");

    geo.avgA = MatrixXd::Zero(l, l);
    geo.avgQ = MatrixXd::Zero(l, l);
    for (int g = 0; g < ng; ++g) {
        geo.avgA += geo.A[g];
        geo.avgQ += geo.Q[g];
    }
    geo.avgA /= double(ng);
    geo.avgQ /= double(ng);
    geo.normN = normN;
    geo.normL = normL;

    if (std::abs(geo.avgA.determinant()) < opt.twistFloor)
        throw DegenerateTwist("center_geometry: avg(A) below the twist floor");
    return geo;
}

double inv_sigma_min(const MatrixXd& A) {
    Eigen::JacobiSVD<MatrixXd> svd(A);
    double smin = svd.singularValues().minCoeff();
    return smin > 0.0 ? 1.0 / smin : std::numeric_limits<double>::infinity();
}

} // namespace

GridField invariance_error(const ModelConfig& cfg, const KamState& st) {
    GridField Kg = evaluate_grid(st.K);
    GridField FK = kernels::map_grid(cfg, Kg);
    for (std::size_t j = 0; j < st.K.centers.size(); ++j)
        FK.values.row(2 * st.K.window.index(st.K.centers[j]) + 1).array() += st.lambda[j];
    GridField Krot = evaluate_grid(rotate(st.K, st.omega));
    GridField E(st.K.grid, st.K.window);
    E.values = FK.values - Krot.values;
    return E;
}

double grid_sup(const GridField& G) {
    return G.values.size() == 0 ? 0.0 : G.values.cwiseAbs().maxCoeff();
}

CenterGeometry center_geometry(const ModelConfig& cfg, const KamState& st,
                               const SolverOptions& opt) {
    StepWorkspace w = make_workspace(cfg, st, false);
    return center_geometry_ws(cfg, st, opt, w);
}

CenterSolution solve_center(const ModelConfig& cfg, const KamState& st, const CenterGeometry& geo,
                            const GridField& Ec, const SolverOptions& opt) {
    (void)cfg;
    const int ng = st.K.grid.size();
    const int l = st.K.l();

    // average obstruction that the counterterm is meant to absorb
    VectorXd avgRhs = VectorXd::Zero(l);
    for (int g = 0; g < ng; ++g) avgRhs += geo.DKrotT_Jc[g] * Ec.values.col(g);
    avgRhs /= double(ng);

    bool invertibleQ = inv_sigma_min(geo.avgQ) < 1e8 / std::max(1.0, geo.avgQ.norm());
    bool useLambda;
    switch (opt.counterterm) {
        case CountertermMode::always:
            if (!invertibleQ)
                throw DegenerateParameter("solve_center: avg(Q) singular (zero-winding torus?)");
            useLambda = true;
            break;
        case CountertermMode::never:
            useLambda = false;
            break;
        default:
            useLambda = invertibleQ;
    }
    CenterSolution out;
    out.countertermActive = useLambda;
    VectorXd Lambda =
        useLambda ? VectorXd(-geo.avgQ.fullPivLu().solve(avgRhs)) : VectorXd(VectorXd::Zero(l));

    MatrixXd T(2 * l, ng);
#pragma omp parallel for schedule(static)
    for (int g = 0; g < ng; ++g) {
        VectorXd p1 = -(geo.VinvRot[g] * (geo.MtRotT_Jc[g] * Ec.values.col(g)));
        T.col(g) = p1 - geo.H[g] * Lambda;
    }
    MatrixXd T1 = T.topRows(l), T2 = T.bottomRows(l);

    // On the frozen branch the mean of T2 is not killed by Lambda; for an
    // exact-symplectic map on a contractible torus it is quadratically small
    // (the vanishing-lemma cancellation), so it is projected out and reported.
    VectorXd meanT2 = T2.rowwise().mean();
    out.droppedAverage = meanT2.cwiseAbs().maxCoeff();
    T2.colwise() -= meanT2;

    CohomologySettings cs;
    cs.divisorFloor = opt.divisorFloor;
    cs.zeroAvgTol = std::max(1e-12, 1e-11 * T.cwiseAbs().maxCoeff());

    // v2(theta) = v2(theta+omega) + T2(theta)
    MatrixXcd h2 = grid_to_modes(st.K.grid, (-T2).eval());
    MatrixXd v2perp = modes_to_grid(st.K.grid, solve_difference(st.K.grid, h2, st.omega, cs));

    VectorXd avgT1 = VectorXd::Zero(l), avgAv2 = VectorXd::Zero(l);
    for (int g = 0; g < ng; ++g) {
        avgT1 += T1.col(g);
        avgAv2 += geo.A[g] * v2perp.col(g);
    }
    avgT1 /= double(ng);
    avgAv2 /= double(ng);
    VectorXd avgV2 = geo.avgA.fullPivLu().solve(avgT1 - avgAv2);
    MatrixXd v2 = v2perp.colwise() + avgV2;

    // v1(theta+omega) - v1(theta) = A v2 - T1, zero average (phase gauge)
    MatrixXd rhs1(l, ng);
    for (int g = 0; g < ng; ++g) rhs1.col(g) = geo.A[g] * v2.col(g) - T1.col(g);
    MatrixXcd h1 = grid_to_modes(st.K.grid, rhs1);
    MatrixXd v1 = modes_to_grid(st.K.grid, solve_difference(st.K.grid, h1, st.omega, cs));

    out.DeltaC = GridField(st.K.grid, st.K.window);
#pragma omp parallel for schedule(static)
    for (int g = 0; g < ng; ++g) {
        VectorXd W(2 * l);
        W.head(l) = v1.col(g);
        W.tail(l) = v2.col(g);
        out.DeltaC.values.col(g) = geo.Mt[g] * W;
    }
    out.Lambda = Lambda;
    return out;
}

namespace {

// Cocycle series with every term re-projected onto its sub-bundle: the terms
// live there analytically, and the projection keeps roundoff leaked into the
// expanding complement from being amplified.
GridField series_sum(const SplittingBundle& b, const std::vector<Eigen::PartialPivLU<MatrixXd>>& Slu,
                     int off, int cols, const GridField& first, const std::vector<MatrixXd>& M,
                     const VectorXd& shift, const SolverOptions& opt,
                     const std::vector<int>& centers) {
    const TorusGrid& grid = first.grid;
    const int ng = grid.size();
    const int n = b.dim();
    GridField acc = first;
    GridField term = first;
    const double base = std::max(field_norm(first, centers, opt.gamma), 1e-300);
    double prev = base;
    int flat = 0;
    for (int k = 1; k < 4000; ++k) {
        MatrixXd rot = kernels::rotate_stack(grid, term.values, shift);
#pragma omp parallel for schedule(static)
        for (int g = 0; g < ng; ++g) {
            VectorXd coords = Slu[g].solve((M[g] * rot.col(g)).eval());
            VectorXd kept = VectorXd::Zero(n);
            kept.segment(off, cols) = coords.segment(off, cols);
            term.values.col(g) = b.S[g] * kept;
        }
        acc.values += term.values;
        double nrm = field_norm(term, centers, opt.gamma);
        if (nrm < opt.seriesTol * base) return acc;
        if (nrm >= prev) {
            if (++flat > 25) throw SeriesDivergence("hyperbolic series is not contracting");
        } else {
            flat = 0;
        }
        prev = nrm;
    }
    throw SeriesDivergence("hyperbolic series needed too many terms");
}

} // namespace

std::pair<GridField, GridField> solve_hyperbolic(const ModelConfig& cfg, const KamState& st,
                                                 const GridField& E, const VectorXd& Lambda,
                                                 const SolverOptions& opt) {
    StepWorkspace w = make_workspace(cfg, st, true);
    const TorusGrid& grid = st.K.grid;
    MatrixXd dlam = dlambda_matrix(st.K.window, st.K.centers);

    GridField G(grid, st.K.window);
    G.values = E.values + (dlam * Lambda).replicate(1, grid.size());

    const int ng = grid.size();
    std::vector<Eigen::PartialPivLU<MatrixXd>> Slu(ng);
#pragma omp parallel for schedule(static)
    for (int g = 0; g < ng; ++g) Slu[g].compute(st.bundle.S[g]);
    const int offS = 0, offU = st.bundle.ns + st.bundle.nc;

    // stable: Etilde^s(theta') = Pi^s_{theta'} G(theta' - omega)
    GridField GrotM(grid, st.K.window);
    GrotM.values = kernels::rotate_stack(grid, G.values, (-st.omega).eval());
    GridField Es = project(st.bundle, GrotM)[0];
    GridField DeltaS = series_sum(st.bundle, Slu, offS, st.bundle.ns, Es, w.DFrotM,
                                  (-st.omega).eval(), opt, st.K.centers);

    // unstable: u_0(theta) = DF^{-1}(theta) Pi^u_{theta+omega} G(theta)
    GridField EuShift = project_shifted(st.bundle, G, st.omega)[2];
    GridField u0(grid, st.K.window);
#pragma omp parallel for schedule(static)
    for (int g = 0; g < ng; ++g) {
        VectorXd coords = Slu[g].solve((w.DFinv[g] * EuShift.values.col(g)).eval());
        VectorXd kept = VectorXd::Zero(st.bundle.dim());
        kept.segment(offU, st.bundle.nu) = coords.segment(offU, st.bundle.nu);
        u0.values.col(g) = st.bundle.S[g] * kept;
    }
    GridField DeltaU =
        series_sum(st.bundle, Slu, offU, st.bundle.nu, u0, w.DFinv, st.omega, opt, st.K.centers);
    DeltaU.values = -DeltaU.values;

    // residual of the defining equations, relative to the data size
    double scale = std::max(1.0, grid_sup(G));
    GridField r1(grid, st.K.window);
    r1.values = kernels::apply_pointwise(
                    w.DFrotM, kernels::rotate_stack(grid, DeltaS.values, (-st.omega).eval())) -
                DeltaS.values + Es.values;
    GridField r2(grid, st.K.window);
    r2.values = kernels::apply_pointwise(
                    w.DFrotM, kernels::rotate_stack(grid, DeltaU.values, (-st.omega).eval())) -
                DeltaU.values;
    // Etilde^u(theta') = Pi^u_{theta'} G(theta'-omega) = EuShift o T_{-omega}
    r2.values += kernels::rotate_stack(grid, EuShift.values, (-st.omega).eval());
    if (grid_sup(r1) > 1e-8 * scale || grid_sup(r2) > 1e-8 * scale)
        throw SeriesDivergence("hyperbolic solve residual check failed");
    return {DeltaS, DeltaU};
}

GridField apply_linearized(const ModelConfig& cfg, const KamState& st, const GridField& Delta,
                           const VectorXd& Lambda) {
    GridField Kg = evaluate_grid(st.K);
    std::vector<MatrixXd> DF = kernels::jacobian_grid(cfg, Kg);
    MatrixXd dlam = dlambda_matrix(st.K.window, st.K.centers);
    GridField out(st.K.grid, st.K.window);
    out.values = kernels::apply_pointwise(DF, Delta.values) -
                 kernels::rotate_stack(st.K.grid, Delta.values, st.omega);
    out.values.colwise() += (dlam * Lambda).eval();
    return out;
}

void refresh_diagnostics(const ModelConfig& cfg, KamState& st, const SolverOptions& opt,
                         bool withRates) {
    GridField E = invariance_error(cfg, st);
    st.diag.errSup = grid_sup(E);
    TorusEmbedding Ek = from_grid(E, st.K.kmax, st.K.centers);
    st.diag.errWeighted = embedding_norm(Ek, opt.gamma, opt.rho);
    st.diag.lambdaNorm = st.lambda.size() ? st.lambda.cwiseAbs().maxCoeff() : 0.0;
    CenterGeometry geo = center_geometry(cfg, st, opt);
    st.diag.isotropy = geo.normL;
    st.diag.normN = geo.normN;
    st.diag.invAvgA = inv_sigma_min(geo.avgA);
    st.diag.invAvgQ = inv_sigma_min(geo.avgQ);
    st.diag.bundleDefect = invariance_defect(st.bundle, cfg, st.K, st.omega);
    st.diag.tailFrac = tail_fraction(st.K, std::max(1, st.K.kmax / 2));
    if (withRates) {
        RateEstimate r =
            measure_rates(st.bundle, cfg, st.K, st.omega, opt.gamma, st.K.centers, opt.rateNmax);
        st.diag.mu1 = r.mu1;
        st.diag.mu2 = r.mu2;
        st.diag.mu3 = r.mu3;
        st.bundle.mu1 = r.mu1;
        st.bundle.mu2 = r.mu2;
        st.bundle.mu3 = r.mu3;
        st.bundle.Ch = r.Ch;
    } else {
        st.diag.mu1 = st.bundle.mu1;
        st.diag.mu2 = st.bundle.mu2;
        st.diag.mu3 = st.bundle.mu3;
    }
}

KamState newton_step(const ModelConfig& cfg, const KamState& st0, const SolverOptions& opt) {
    KamState st = st0;

    double defect = invariance_defect(st.bundle, cfg, st.K, st.omega);
    if (defect > opt.bundleRefreshDefect) {
        GraphRefineOptions gopt = opt.graph;
        gopt.tol = std::min(opt.bundleRefreshDefect, gopt.tol);
        st.bundle = graph_refine(st.bundle, cfg, st.K, st.omega, gopt);
        defect = st.bundle.defect;
    }

    StepWorkspace w = make_workspace(cfg, st, true);
    GridField E = invariance_error(cfg, st);

    IterationRecord rec;
    rec.iter = static_cast<int>(st.history.size());
    rec.errSup = grid_sup(E);
    rec.errWeighted = embedding_norm(from_grid(E, st.K.kmax, st.K.centers), opt.gamma, opt.rho);
    rec.lambdaNorm = st.lambda.size() ? st.lambda.cwiseAbs().maxCoeff() : 0.0;
    rec.bundleDefect = defect;
    rec.tailFrac = tail_fraction(st.K, std::max(1, st.K.kmax / 2));

    CenterGeometry geo = center_geometry_ws(cfg, st, opt, w);
    rec.isotropy = geo.normL;
    rec.normN = geo.normN;
    rec.invAvgA = inv_sigma_min(geo.avgA);
    rec.invAvgQ = inv_sigma_min(geo.avgQ);
    if (opt.measureRatesEachIter) {
        RateEstimate r =
            measure_rates(st.bundle, cfg, st.K, st.omega, opt.gamma, st.K.centers, opt.rateNmax);
        rec.mu1 = r.mu1;
        rec.mu2 = r.mu2;
        rec.mu3 = r.mu3;
    } else {
        rec.mu1 = st.bundle.mu1;
        rec.mu2 = st.bundle.mu2;
        rec.mu3 = st.bundle.mu3;
    }
    GridField Ec = project_shifted(st.bundle, E, st.omega)[1];
    CenterSolution center = solve_center(cfg, st, geo, Ec, opt);
    rec.obstruction = center.droppedAverage;
    st.history.push_back(rec);
    auto [DeltaS, DeltaU] = solve_hyperbolic(cfg, st, E, center.Lambda, opt);

    GridField Delta(st.K.grid, st.K.window);
    Delta.values = center.DeltaC.values + DeltaS.values + DeltaU.values;

    st.K.modes += grid_to_modes(st.K.grid, Delta.values);
    band_limit(st.K.grid, st.K.modes, st.K.kmax);
    st.lambda += center.Lambda;
    st.diag = rec;
    return st;
}

KamState solve(const ModelConfig& cfg, KamState st, const SolverOptions& opt) {
    if (!std::isfinite(opt.tol) && opt.tol > 0) return st; // tol = inf: nothing to do
    double prevErr = std::numeric_limits<double>::infinity();
    int increases = 0;
    for (int it = 0; it < opt.maxIter; ++it) {
        GridField E = invariance_error(cfg, st);
        double err = grid_sup(E);
        if (opt.verbose)
            std::fprintf(stderr, "  newton iter %d: |E|_sup = %.3e, |lambda| = %.3e\n", it, err,
                         st.lambda.size() ? st.lambda.cwiseAbs().maxCoeff() : 0.0);
        if (err < opt.tol) {
            refresh_diagnostics(cfg, st, opt, true);
            return st;
        }
        if (err >= prevErr) {
            if (++increases >= 2)
                throw NoConvergence("newton iteration diverging (two consecutive error increases)");
        } else {
            increases = 0;
        }
        prevErr = err;
        st = newton_step(cfg, st, opt);
    }
    GridField E = invariance_error(cfg, st);
    if (grid_sup(E) < opt.tol) {
        refresh_diagnostics(cfg, st, opt, true);
        return st;
    }
    throw NoConvergence("newton iteration exceeded maxIter");
}

std::pair<GridField, VectorXd> direct_newton_oracle(const ModelConfig& cfg, const KamState& st) {
    const TorusGrid& grid = st.K.grid;
    if (grid.l != 1) throw std::invalid_argument("direct_newton_oracle: one-frequency tori only");
    const int ng = grid.size();
    const int n = 2 * st.K.window.size();
    const int ntot = n * ng + 1;
    if (ntot > 4001) throw std::invalid_argument("direct_newton_oracle: instance too large");

    GridField Kg = evaluate_grid(st.K);
    std::vector<MatrixXd> DF = kernels::jacobian_grid(cfg, Kg);
    GridField E = invariance_error(cfg, st);
    MatrixXd DKstack = derivative_grid(st.K);
    MatrixXd dlam = dlambda_matrix(st.K.window, st.K.centers);

    // interpolation weights: B(r, g) = w_r(theta_g + omega)
    MatrixXd B = kernels::rotate_stack(grid, MatrixXd::Identity(ng, ng), st.omega);

    MatrixXd A = MatrixXd::Zero(ntot, ntot);
    VectorXd rhs = VectorXd::Zero(ntot);
    for (int g = 0; g < ng; ++g) {
        for (int i = 0; i < n; ++i) {
            int row = g * n + i;
            for (int j = 0; j < n; ++j) A(row, g * n + j) += DF[g](i, j);
            for (int gp = 0; gp < ng; ++gp) A(row, gp * n + i) -= B(gp, g);
            A(row, n * ng) += dlam(i, 0);
            rhs(row) = -E.values(i, g);
        }
    }
    // gauge: zero average tangential component
    for (int g = 0; g < ng; ++g)
        for (int i = 0; i < n; ++i) A(n * ng, g * n + i) = DKstack(i, g) / double(ng);

    // The pairing of the momentum-translation column with a zero-winding torus
    // is degenerate: (Delta_lambda, 1) is a near-kernel of the square system.
    // Detect that and fall back to the frozen-lambda least-squares system,
    // matching the structured solver's convention.
    Eigen::BDCSVD<MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    bool degenerate = sv(sv.size() - 1) < 1e-7 * sv(0);
    GridField Delta(grid, st.K.window);
    VectorXd Lambda = VectorXd::Zero(1);
    if (!degenerate) {
        VectorXd x = svd.solve(rhs);
        for (int g = 0; g < ng; ++g) Delta.values.col(g) = x.segment(g * n, n);
        Lambda[0] = x[n * ng];
    } else {
        MatrixXd Afrozen = A.leftCols(n * ng);
        VectorXd x = Afrozen.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(rhs);
        for (int g = 0; g < ng; ++g) Delta.values.col(g) = x.segment(g * n, n);
    }
    return {Delta, Lambda};
}

std::pair<VectorXd, double> align_phase(const TorusEmbedding& K1, const TorusEmbedding& K2) {
    const TorusGrid& grid = K1.grid;
    const int ng = grid.size();
    GridField G2 = evaluate_grid(K2);
    auto distance_at = [&](const VectorXd& tau) {
        TorusEmbedding Kr = rotate(K1, tau);
        GridField G1 = evaluate_grid(Kr);
        return (G1.values - G2.values).cwiseAbs().maxCoeff();
    };
    // coarse scan on the grid lattice
    VectorXd best = VectorXd::Zero(grid.l);
    double bestd = distance_at(best);
    for (int g = 0; g < ng; ++g) {
        auto idx = grid.unflatten(g);
        VectorXd tau(grid.l);
        for (int j = 0; j < grid.l; ++j) tau[j] = double(idx[j]) / grid.m[j];
        double d = distance_at(tau);
        if (d < bestd) {
            bestd = d;
            best = tau;
        }
    }
    // golden-section refinement per coordinate
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int sweep = 0; sweep < 4; ++sweep)
        for (int j = 0; j < grid.l; ++j) {
            double span = 1.5 / grid.m[j];
            double a = best[j] - span, b = best[j] + span;
            double c = b - gr * (b - a), d = a + gr * (b - a);
            VectorXd tc = best, td = best;
            for (int it = 0; it < 60; ++it) {
                tc[j] = c;
                td[j] = d;
                if (distance_at(tc) < distance_at(td)) {
                    b = d;
                } else {
                    a = c;
                }
                c = b - gr * (b - a);
                d = a + gr * (b - a);
            }
            best[j] = 0.5 * (a + b);
            bestd = distance_at(best);
        }
    return {best, bestd};
}

} // namespace latkam
