#include "latkam/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace latkam {

TorusEmbedding rewindow(const TorusEmbedding& K, Window w) {
    TorusEmbedding out(K.grid, K.kmax, w, K.centers);
    out.winding = Eigen::MatrixXi::Zero(w.size(), K.grid.l);
    for (int site = std::max(w.lo, K.window.lo); site <= std::min(w.hi, K.window.hi); ++site) {
        out.modes.middleRows(2 * w.index(site), 2) = K.modes.middleRows(2 * K.window.index(site), 2);
        out.winding.row(w.index(site)) = K.winding.row(K.window.index(site));
    }
    return out;
}

TorusEmbedding translate(const TorusEmbedding& K, int m) {
    Window w{K.window.lo - m, K.window.hi - m};
    std::vector<int> centers;
    for (int c : K.centers) centers.push_back(c - m);
    TorusEmbedding out(K.grid, K.kmax, w, centers);
    out.modes = K.modes;
    out.winding = K.winding;
    return out;
}

TorusEmbedding superpose(const TorusEmbedding& K1, const TorusEmbedding& K2, int m,
                         const TorusGrid& outGrid, int kmaxOut) {
    if (K2.l() != 1) throw std::invalid_argument("superpose: second factor must be a 1-torus");
    if (outGrid.l != K1.l() + 1) throw std::invalid_argument("superpose: output torus dimension");
    TorusEmbedding K2s = translate(K2, m);
    Window w{std::min(K1.window.lo, K2s.window.lo), std::max(K1.window.hi, K2s.window.hi)};
    std::vector<int> centers = K1.centers;
    centers.insert(centers.end(), K2s.centers.begin(), K2s.centers.end());
    TorusEmbedding out(outGrid, kmaxOut, w, centers);

    // K1 modes at (k_1..k_r, 0)
    const int ng1 = K1.grid.size();
    for (int g = 0; g < ng1; ++g) {
        auto k = K1.grid.modes(g);
        bool ok = true;
        std::array<int, 3> idx{0, 0, 0};
        for (int j = 0; j < K1.l(); ++j) {
            if (std::abs(k[j]) > kmaxOut) ok = false;
            idx[j] = k[j] >= 0 ? k[j] : outGrid.m[j] + k[j];
        }
        if (!ok) continue;
        int go = outGrid.flatten(idx);
        for (int site = K1.window.lo; site <= K1.window.hi; ++site)
            out.modes.middleRows(2 * w.index(site), 2).col(go) +=
                K1.modes.middleRows(2 * K1.window.index(site), 2).col(g);
    }
    // K2 modes at (0,...,0, k)
    const int ng2 = K2s.grid.size();
    const int jlast = outGrid.l - 1;
    for (int g = 0; g < ng2; ++g) {
        auto k = K2s.grid.modes(g);
        if (std::abs(k[0]) > kmaxOut) continue;
        std::array<int, 3> idx{0, 0, 0};
        idx[jlast] = k[0] >= 0 ? k[0] : outGrid.m[jlast] + k[0];
        int go = outGrid.flatten(idx);
        for (int site = K2s.window.lo; site <= K2s.window.hi; ++site)
            out.modes.middleRows(2 * w.index(site), 2).col(go) +=
                K2s.modes.middleRows(2 * K2s.window.index(site), 2).col(g);
    }
    band_limit(out.grid, out.modes, kmaxOut);
    return out;
}

KamState coupled_state(const ModelConfig& cfg, const KamState& s1, const KamState& s2, int m,
                       int kmaxOut, int gridOut) {
    TorusGrid outGrid;
    outGrid.l = s1.K.l() + 1;
    int mAngle = gridOut > 0 ? gridOut : grid_size_for(kmaxOut, 1.5);
    for (int j = 0; j < s1.K.l(); ++j) outGrid.m[j] = std::min(s1.K.grid.m[j], mAngle);
    outGrid.m[outGrid.l - 1] = mAngle;
    TorusEmbedding K12 = superpose(s1.K, s2.K, -m, outGrid, kmaxOut);

    ModelConfig cfg12 = cfg;
    cfg12.window = K12.window;
    KamState st;
    st.model = cfg12;
    st.K = K12;
    st.lambda = VectorXd::Zero(static_cast<int>(K12.centers.size()));
    st.omega = VectorXd(outGrid.l);
    st.omega.head(s1.omega.size()) = s1.omega;
    st.omega[outGrid.l - 1] = s2.omega[0];
    return st;
}

CouplingScan coupling_scan(const ModelConfig& cfg, const KamState& s1, const KamState& s2,
                           const std::vector<int>& distances, double betaTilde,
                           const SolverOptions& opt, int kmaxOut, int gridOut) {
    if (betaTilde >= opt.gamma.rate())
        throw std::invalid_argument("coupling_scan: betaTilde must be below the factor rate");
    DecayFunction gammaTilde = opt.gamma.with_rate(betaTilde);
    CouplingScan scan;
    for (int m : distances) {
        KamState st = coupled_state(cfg, s1, s2, m, kmaxOut, gridOut);
        GridField E = invariance_error(st.model, st);
        ScanRow row;
        row.m = m;
        row.errSup = grid_sup(E);
        row.errWeighted = field_norm(E, st.K.centers, gammaTilde);
        scan.rows.push_back(row);
    }
    // least-squares slope of log(err) vs m
    int n = static_cast<int>(scan.rows.size());
    if (n >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (const auto& r : scan.rows) {
            double x = r.m, y = std::log(std::max(r.errWeighted, 1e-300));
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        scan.fittedRate = -(n * sxy - sx * sy) / (n * sxx - sx * sx);
    }
    return scan;
}

bool check_nonresonant(const std::vector<Site>& centers, int margin) {
    if (centers.size() <= 2) return true;
    int lox = centers[0].x, hix = centers[0].x, loy = centers[0].y, hiy = centers[0].y;
    bool flat = true;
    for (const auto& c : centers) {
        lox = std::min(lox, c.x);
        hix = std::max(hix, c.x);
        loy = std::min(loy, c.y);
        hiy = std::max(hiy, c.y);
        if (c.y != 0 || c.z != 0) flat = false;
    }
    int span = std::max(hix - lox, hiy - loy) + 2 * margin;
    auto count_at = [&](Site i) {
        std::map<int, int> dist_count;
        int worst = 0;
        for (const auto& c : centers) worst = std::max(worst, ++dist_count[norm1(i - c)]);
        return worst;
    };
    if (flat) {
        for (int x = lox - margin; x <= lox + span; ++x)
            if (count_at({x, 0, 0}) > 2) return false;
        return true;
    }
    for (int x = lox - margin; x <= lox + span; ++x)
        for (int y = loy - margin; y <= loy + span; ++y)
            if (count_at({x, y, 0}) > 2) return false;
    return true;
}

void CascadePlan::validate() const {
    const std::size_t R = frequencies.size();
    if (R == 0) throw std::invalid_argument("cascade: empty plan");
    if (separations.size() + 1 < R || decaySchedule.size() < R || bandSchedule.size() < R ||
        tolSchedule.size() < R)
        throw std::invalid_argument("cascade: schedules shorter than the plan");
    for (std::size_t r = 1; r < R; ++r)
        if (decaySchedule[r] >= decaySchedule[r - 1])
            throw std::invalid_argument("cascade: decay schedule must decrease");
}

CascadeResult cascade(const ModelConfig& cfg, const CascadePlan& plan, const SolverOptions& opt,
                      const std::function<KamState(double, int, double)>& makeSingle) {
    plan.validate();
    const int R = static_cast<int>(plan.frequencies.size());

    {
        std::vector<VectorXd> oms;
        std::vector<double> nus = plan.nuSchedule;
        std::vector<int> kms;
        for (int r = 0; r < R; ++r) {
            VectorXd o(1);
            o[0] = plan.frequencies[r];
            oms.push_back(o);
            if (static_cast<int>(nus.size()) <= r) nus.push_back(double(r + 1) + 0.5);
            kms.push_back(plan.kmaxDiophantine);
        }
        auto reports = check_sequence(oms, nus, kms);
        for (const auto& rep : reports)
            if (rep.resonant)
                throw std::invalid_argument("cascade: resonant frequency truncation");
    }

    CascadeResult out;
    out.stages.push_back(makeSingle(plan.frequencies[0], plan.bandSchedule[0], plan.tolSchedule[0]));

    for (int r = 1; r < R; ++r) {
        KamState base = out.stages.back();
        KamState fresh = makeSingle(plan.frequencies[r], plan.bandSchedule[r], plan.tolSchedule[r]);
        DecayFunction gammaTilde = opt.gamma.with_rate(plan.betaTilde);
        int m = plan.separations[r - 1];
        bool done = false;
        for (int attempt = 0; attempt <= plan.maxSeparationDoublings && !done; ++attempt, m *= 2) {
            int place = *std::max_element(base.K.centers.begin(), base.K.centers.end()) + m;
            TorusGrid outGrid;
            outGrid.l = base.K.l() + 1;
            int mAngle = plan.gridSchedule.size() > std::size_t(r) && plan.gridSchedule[r] > 0
                             ? plan.gridSchedule[r]
                             : grid_size_for(plan.bandSchedule[r], 1.5);
            for (int j = 0; j < base.K.l(); ++j) outGrid.m[j] = std::min(base.K.grid.m[j], mAngle);
            outGrid.m[outGrid.l - 1] = mAngle;
            TorusEmbedding K12 = superpose(base.K, fresh.K, -place, outGrid, plan.bandSchedule[r]);

            ModelConfig cfg12 = cfg;
            cfg12.window = K12.window;
            KamState st;
            st.model = cfg12;
            st.K = K12;
            st.lambda = VectorXd::Zero(static_cast<int>(K12.centers.size()));
            st.omega = VectorXd(outGrid.l);
            st.omega.head(base.omega.size()) = base.omega;
            st.omega[outGrid.l - 1] = fresh.omega[0];

            GridField E0 = invariance_error(cfg12, st);
            double gate = field_norm(E0, st.K.centers, gammaTilde);
            if (gate > plan.smallnessCap) continue;

            std::vector<Site> siteCenters;
            for (int c : st.K.centers) siteCenters.push_back({c, 0, 0});
            if (!check_nonresonant(siteCenters)) continue;

            try {
                st.bundle = initial_splitting(cfg12, st.K);
                SolverOptions sopt = opt;
                sopt.tol = plan.tolSchedule[r];
                sopt.gamma = opt.gamma.with_rate(plan.decaySchedule[r]);
                KamState solved = solve(cfg12, st, sopt);
                // increment at the first center, against the extended previous stage
                TorusEmbedding prevExt =
                    superpose(base.K, constant_embedding(fresh.K.grid, fresh.K.kmax,
                                                         fresh.K.window, fresh.K.centers),
                              -place, outGrid, plan.bandSchedule[r]);
                TorusEmbedding prevRe = rewindow(prevExt, solved.K.window);
                GridField diff = evaluate_grid(solved.K);
                diff.values -= evaluate_grid(prevRe).values;
                int idx = solved.K.window.index(out.stages.front().K.centers[0]);
                double inc = diff.values.middleRows(2 * idx, 2).cwiseAbs().maxCoeff();
                out.interiorIncrement.push_back(inc);
                out.usedSeparations.push_back(m);
                out.stages.push_back(solved);
                done = true;
            } catch (const NoConvergence&) {
                continue;
            } catch (const ContractionFailure&) {
                continue;
            }
        }
        if (!done) throw NoConvergence("cascade: stage failed after separation retries");
    }
    return out;
}

} // namespace latkam
