#include "latkam/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

using nlohmann::json;

namespace latkam {

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw std::runtime_error("config: unknown key '" + it.key() + "' in " + where);
}

} // namespace

double frequency_preset(const std::string& name) {
    if (name == "golden") return (std::sqrt(5.0) - 1.0) / 2.0;
    if (name == "silver") return std::sqrt(2.0) - 1.0;
    throw std::runtime_error("config: unknown frequency preset '" + name + "'");
}

DecayFunction ExperimentConfig::decay() const {
    double a = prefactor > 0.0 ? prefactor : max_prefactor(alpha, beta, decayDim);
    return DecayFunction(alpha, beta, a, decayDim);
}

SolverOptions ExperimentConfig::solver_options() const {
    SolverOptions opt(decay());
    opt.rho = rho;
    opt.tol = tol;
    opt.maxIter = maxIter;
    opt.seriesTol = seriesTol;
    opt.divisorFloor = divisorFloor;
    return opt;
}

ExperimentConfig config_from_json(const json& j) {
    check_keys(j, {"schemaVersion", "model", "solver", "frequency", "decay", "experiment"}, "top level");
    if (j.value("schemaVersion", 1) != 1) throw std::runtime_error("config: unsupported schemaVersion");
    ExperimentConfig cfg;
    cfg.raw = j;

    const json& m = j.at("model");
    check_keys(m,
               {"onsite", "polynomial", "epsilon", "gamma", "step", "substeps", "window_radius",
                "coupling_range", "couplings"},
               "model");
    std::string onsite = m.value("onsite", "pendulum");
    if (onsite == "pendulum") {
        cfg.model.onsite = ModelConfig::Onsite::pendulum;
    } else if (onsite == "polynomial") {
        cfg.model.onsite = ModelConfig::Onsite::polynomial;
        cfg.model.poly = m.at("polynomial").get<std::vector<double>>();
    } else {
        throw std::runtime_error("config: onsite must be 'pendulum' or 'polynomial'");
    }
    cfg.model.epsilon = m.value("epsilon", 0.0);
    cfg.model.stepSize = m.value("step", 0.1);
    cfg.model.substeps = m.value("substeps", 5);
    int radius = m.value("window_radius", 16);
    cfg.model.window = Window{-radius, radius};
    int range = m.value("coupling_range", 1);
    if (m.contains("couplings")) {
        for (const auto& c : m.at("couplings"))
            cfg.model.couplings.push_back(
                {c.at(0).get<int>(), c.at(1).get<double>(), c.at(2).get<double>()});
    } else {
        if (range != 1)
            throw std::runtime_error("config: coupling_range != 1 needs an explicit couplings list");
        cfg.model.couplings.push_back({1, m.value("gamma", 1.0), 0.0});
    }
    cfg.model.validate();

    const json& s = j.at("solver");
    check_keys(s, {"tol", "max_iter", "kmax", "grid", "rho", "series_tol", "divisor_floor"},
               "solver");
    cfg.tol = s.value("tol", 1e-11);
    cfg.maxIter = s.value("max_iter", 25);
    cfg.kmax = s.value("kmax", 64);
    cfg.gridM = s.value("grid", 0);
    cfg.rho = s.value("rho", 0.05);
    cfg.seriesTol = s.value("series_tol", 1e-14);
    cfg.divisorFloor = s.value("divisor_floor", 1e-13);

    const json& f = j.at("frequency");
    check_keys(f, {"omega", "preset"}, "frequency");
    if (f.contains("omega"))
        for (const auto& o : f.at("omega")) cfg.omegas.push_back(o.get<double>());
    if (f.contains("preset")) {
        if (f.at("preset").is_string())
            cfg.omegas.push_back(frequency_preset(f.at("preset").get<std::string>()));
        else
            for (const auto& p : f.at("preset")) cfg.omegas.push_back(frequency_preset(p.get<std::string>()));
    }
    if (cfg.omegas.empty()) throw std::runtime_error("config: no frequencies given");

    const json& d = j.at("decay");
    check_keys(d, {"alpha", "beta", "beta_tilde", "prefactor", "dim"}, "decay");
    cfg.alpha = d.value("alpha", 2.0);
    cfg.beta = d.value("beta", 0.5);
    cfg.betaTilde = d.value("beta_tilde", 0.25);
    cfg.prefactor = d.value("prefactor", 0.0);
    cfg.decayDim = d.value("dim", 1);

    cfg.experiment = j.value("experiment", json::object());
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    json j;
    in >> j;
    return config_from_json(j);
}

namespace {

// Period of the one-site libration through (q0, 0) with q0 > pi: the orbit
// leaves with p < 0 and returns to the right turning point where p crosses
// zero from above.  March with a fixed stride, then bisect the crossing.
double libration_period(const ModelConfig& cfg, double q0) {
    ModelConfig one = cfg;
    one.window = Window{0, 0};
    one.epsilon = 0.0;
    PhaseField x(one.window);
    x.q(0) = q0;
    const double pi = std::numbers::pi;
    double dt = 0.05;
    double t = 0.0;
    PhaseField cur = x;
    double prevP = 0.0;
    for (int step = 0; step < 200000; ++step) {
        PhaseField nxt = flow(one, cur, dt);
        t += dt;
        if (prevP > 0.0 && nxt.p(0) <= 0.0 && nxt.q(0) > pi) {
            double lo = t - dt, hi = t;
            PhaseField base = cur;
            for (int it = 0; it < 60; ++it) {
                double mid = 0.5 * (lo + hi);
                PhaseField probe = flow(one, base, mid - (t - dt));
                (probe.p(0) > 0.0 ? lo : hi) = mid;
            }
            return 0.5 * (lo + hi);
        }
        prevP = nxt.p(0);
        cur = nxt;
    }
    throw std::runtime_error("libration_period: no return detected");
}

} // namespace

KamState single_site_guess(const ExperimentConfig& cfg, double omega) {
    ModelConfig model = cfg.model;
    model.epsilon = 0.0;

    double q0 = amplitude_for_rotation(model, omega);
    double T = libration_period(model, q0);

    int M = cfg.gridM > 0 ? cfg.gridM : grid_size_for(cfg.kmax);
    TorusGrid grid = TorusGrid::dim1(M);

    ModelConfig one = model;
    one.window = Window{0, 0};
    PhaseField cur(one.window);
    cur.q(0) = std::numbers::pi; // placeholder, set below
    cur.q(0) = q0;

    GridField G(grid, model.window);
    int c = model.window.index(0);
    double tprev = 0.0;
    for (int g = 0; g < M; ++g) {
        double tg = T * double(g) / double(M);
        cur = flow(one, cur, tg - tprev);
        tprev = tg;
        G.values(2 * c, g) = cur.q(0);
        G.values(2 * c + 1, g) = cur.p(0);
    }
    // the periodic deviation from the fixed point keeps the background at 0,
    // but the sampled q oscillates around pi: no winding, plain Fourier data
    KamState st;
    st.model = model;
    st.K = from_grid(G, cfg.kmax, {0});
    st.omega = VectorXd::Constant(1, omega);
    st.lambda = VectorXd::Zero(1);
    st.bundle = initial_splitting(model, st.K);
    return st;
}

KamState run_single_site(const ExperimentConfig& cfg, double omega) {
    SolverOptions opt = cfg.solver_options();
    TorusGrid probeGrid = TorusGrid::dim1(cfg.gridM > 0 ? cfg.gridM : grid_size_for(cfg.kmax));
    if (min_divisor(probeGrid, VectorXd::Constant(1, omega), cfg.kmax) < opt.divisorFloor)
        throw ResonantMode("run_single_site: frequency fails the divisor floor at this kmax");
    KamState guess = single_site_guess(cfg, omega);
    return solve(guess.model, guess, opt);
}

KamState continue_in_epsilon(const ExperimentConfig& cfg, const KamState& from, double eps) {
    SolverOptions opt = cfg.solver_options();
    KamState st = from;
    double cur = st.model.epsilon;
    if (eps == cur) return st;
    // One map application amplifies a warm-start discrepancy by the unstable
    // multiplier, so the epsilon step is chosen by capping the predicted
    // invariance error of the warm start.
    const double basinCap = 0.2;
    double step = eps - cur;
    int guard = 0;
    while (cur != eps) {
        if (++guard > 500) throw NoConvergence("continuation stalled near eps = " + std::to_string(cur));
        double trial = (step > 0) ? std::min(cur + step, eps) : std::max(cur + step, eps);
        ModelConfig m = cfg.model;
        m.epsilon = trial;
        KamState probe = st;
        probe.model = m;
        double e0 = grid_sup(invariance_error(m, probe));
        if (e0 > basinCap) {
            step *= 0.5;
            if (std::abs(step) < 1e-8)
                throw NoConvergence("continuation breakdown; last good eps = " + std::to_string(cur));
            continue;
        }
        try {
            st = solve(m, probe, opt);
            cur = trial;
            step *= 2.0;
        } catch (const NoConvergence&) {
            step *= 0.5;
            if (std::abs(step) < 1e-8)
                throw NoConvergence("continuation breakdown; last good eps = " + std::to_string(cur));
        }
    }
    return st;
}

double decay_slope(const TorusEmbedding& K) {
    // per-site sup amplitude against distance to the nearest center
    std::vector<std::pair<double, double>> pts;
    for (int site = K.window.lo; site <= K.window.hi; ++site) {
        double amp = majorant_norm(K, site, 0.0);
        int dist = std::numeric_limits<int>::max();
        for (int c : K.centers) dist = std::min(dist, std::abs(site - c));
        if (dist >= 1 && amp > 1e-14) pts.push_back({double(dist), std::log(amp)});
    }
    if (pts.size() < 2) return 0.0;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (auto [x, y] : pts) {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    double n = double(pts.size());
    return -(n * sxy - sx * sy) / (n * sxx - sx * sx);
}

void write_history_csv(const std::vector<IterationRecord>& history, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "schemaVersion,iter,errorNorm,errorWeighted,lambda,isotropy,normN,invAvgA,invAvgQ,"
           "obstruction,mu1,mu2,mu3,bundleDefect,tailFrac\n";
    char line[512];
    for (const auto& r : history) {
        std::snprintf(line, sizeof(line),
                      "1,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                      "%.17g,%.17g\n",
                      r.iter, r.errSup, r.errWeighted, r.lambdaNorm, r.isotropy, r.normN, r.invAvgA,
                      r.invAvgQ, r.obstruction, r.mu1, r.mu2, r.mu3, r.bundleDefect, r.tailFrac);
        out << line;
    }
}

namespace {

std::filesystem::path ensure_dir(const std::string& outDir) {
    std::filesystem::path p(outDir);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace

int cmd_single_site(const ExperimentConfig& cfg, const std::string& outDir, std::uint64_t) {
    auto dir = ensure_dir(outDir);
    KamState st = run_single_site(cfg, cfg.omegas.at(0));
    std::vector<IterationRecord> hist = st.history;
    hist.push_back(st.diag);
    write_history_csv(hist, (dir / "single_site_diagnostics.csv").string());
    save_state(st, (dir / "single_site_state.json").string(), cfg.raw);
    return st.diag.errSup < cfg.tol ? 0 : 1;
}

int cmd_continue(const ExperimentConfig& cfg, const std::string& outDir, std::uint64_t) {
    auto dir = ensure_dir(outDir);
    std::vector<double> schedule = cfg.experiment.value("eps_schedule", std::vector<double>{});
    if (schedule.empty()) throw std::runtime_error("continue: experiment.eps_schedule required");

    KamState st = run_single_site(cfg, cfg.omegas.at(0));
    std::ofstream summary(dir / "continue_summary.csv");
    summary << "schemaVersion,eps,errorNorm,lambda,iterations,decaySlope,invAvgA\n";
    char line[256];
    int idx = 0;
    for (double eps : schedule) {
        if (eps != 0.0) st = continue_in_epsilon(cfg, st, eps);
        std::snprintf(line, sizeof(line), "1,%.17g,%.17g,%.17g,%d,%.17g,%.17g\n", eps,
                      st.diag.errSup, st.diag.lambdaNorm, int(st.history.size()),
                      decay_slope(st.K), st.diag.invAvgA);
        summary << line;
        char name[64];
        std::snprintf(name, sizeof(name), "continue_state_%02d.json", idx++);
        save_state(st, (dir / name).string(), cfg.raw);
    }
    return 0;
}

int cmd_couple(const ExperimentConfig& cfg, const std::string& outDir, std::uint64_t) {
    auto dir = ensure_dir(outDir);
    if (cfg.omegas.size() < 2) throw std::runtime_error("couple: two frequencies required");
    std::vector<int> distances = cfg.experiment.value("distances", std::vector<int>{8, 16, 24, 32});
    int mSolve = cfg.experiment.value("solve_separation", 24);
    double tol2 = cfg.experiment.value("tol", 1e-9);

    std::vector<double> schedule =
        cfg.experiment.value("eps_schedule", std::vector<double>{cfg.model.epsilon});

    auto make = [&](double omega) {
        KamState st = run_single_site(cfg, omega);
        for (double eps : schedule)
            if (eps != 0.0) st = continue_in_epsilon(cfg, st, eps);
        return st;
    };
    KamState s1 = make(cfg.omegas[0]);
    KamState s2 = make(cfg.omegas[1]);

    int coupleKmax = cfg.experiment.value("couple_kmax", 16);
    int coupleGrid = cfg.experiment.value("couple_grid", 0);

    SolverOptions opt = cfg.solver_options();
    CouplingScan scan =
        coupling_scan(cfg.model, s1, s2, distances, cfg.betaTilde, opt, coupleKmax, coupleGrid);
    {
        std::ofstream out(dir / "coupling_scan.csv");
        out << "schemaVersion,m,errorSup,errorWeighted\n";
        char line[160];
        for (const auto& r : scan.rows) {
            std::snprintf(line, sizeof(line), "1,%d,%.17g,%.17g\n", r.m, r.errSup, r.errWeighted);
            out << line;
        }
    }

    // re-converge from the chosen separation
    KamState st = coupled_state(cfg.model, s1, s2, mSolve, coupleKmax, coupleGrid);
    st.bundle = initial_splitting(st.model, st.K);
    SolverOptions opt2 = cfg.solver_options();
    opt2.tol = tol2;
    KamState coupled = solve(st.model, st, opt2);

    std::vector<IterationRecord> hist = coupled.history;
    hist.push_back(coupled.diag);
    write_history_csv(hist, (dir / "couple_diagnostics.csv").string());
    save_state(coupled, (dir / "couple_state.json").string(), cfg.raw);
    return coupled.diag.errSup < tol2 ? 0 : 1;
}

int cmd_cascade(const ExperimentConfig& cfg, const std::string& outDir, std::uint64_t) {
    auto dir = ensure_dir(outDir);
    CascadePlan plan;
    plan.frequencies = cfg.omegas;
    plan.separations = cfg.experiment.value("separations", std::vector<int>{16, 16});
    plan.decaySchedule = cfg.experiment.value("decay_schedule", std::vector<double>{});
    plan.bandSchedule = cfg.experiment.value("band_schedule", std::vector<int>{});
    plan.tolSchedule = cfg.experiment.value("tol_schedule", std::vector<double>{});
    plan.gridSchedule = cfg.experiment.value("grid_schedule", std::vector<int>{});
    plan.betaTilde = cfg.betaTilde;
    plan.smallnessCap = cfg.experiment.value("smallness_cap", 5e-2);
    plan.kmaxDiophantine = cfg.experiment.value("kmax_diophantine", 200);
    const int R = static_cast<int>(plan.frequencies.size());
    for (int r = static_cast<int>(plan.decaySchedule.size()); r < R; ++r)
        plan.decaySchedule.push_back(cfg.beta * std::pow(0.8, r));
    for (int r = static_cast<int>(plan.bandSchedule.size()); r < R; ++r)
        plan.bandSchedule.push_back(std::max(6, cfg.kmax >> (2 * r)));
    for (int r = static_cast<int>(plan.tolSchedule.size()); r < R; ++r)
        plan.tolSchedule.push_back(std::max(cfg.tol, 1e-9));

    std::vector<double> schedule =
        cfg.experiment.value("eps_schedule", std::vector<double>{cfg.model.epsilon});
    auto makeSingle = [&](double omega, int kmax, double tolStage) {
        ExperimentConfig c1 = cfg;
        c1.kmax = kmax;
        c1.gridM = 0;
        c1.tol = std::min(tolStage, cfg.tol);
        KamState st = run_single_site(c1, omega);
        for (double eps : schedule)
            if (eps != 0.0) st = continue_in_epsilon(c1, st, eps);
        return st;
    };

    SolverOptions opt = cfg.solver_options();
    CascadeResult res = cascade(cfg.model, plan, opt, makeSingle);

    std::ofstream summary(dir / "cascade_summary.csv");
    summary << "schemaVersion,stage,errorNorm,lambda,interiorIncrement,separation\n";
    char line[240];
    for (std::size_t r = 0; r < res.stages.size(); ++r) {
        double inc = r >= 1 ? res.interiorIncrement[r - 1] : 0.0;
        int sep = r >= 1 ? res.usedSeparations[r - 1] : 0;
        std::snprintf(line, sizeof(line), "1,%d,%.17g,%.17g,%.17g,%d\n", int(r + 1),
                      res.stages[r].diag.errSup, res.stages[r].diag.lambdaNorm, inc, sep);
        summary << line;
        char name[64];
        std::snprintf(name, sizeof(name), "cascade_state_%02d.json", int(r + 1));
        save_state(res.stages[r], (dir / name).string(), cfg.raw);
    }
    return 0;
}

int cmd_check_frequency(const ExperimentConfig& cfg, const std::string& outDir) {
    double nu = cfg.experiment.value("nu", 1.0);
    int kmax = cfg.experiment.value("kmax", 1000);
    std::string flavor = cfg.experiment.value("flavor", "map");
    VectorXd omega(cfg.omegas.size());
    for (std::size_t i = 0; i < cfg.omegas.size(); ++i) omega[i] = cfg.omegas[i];
    DiophantineReport rep = measure_diophantine(
        omega, nu, kmax, flavor == "flow" ? DiophantineFlavor::flow : DiophantineFlavor::map);
    json j;
    j["schemaVersion"] = 1;
    j["omega"] = cfg.omegas;
    j["nu"] = rep.nu;
    j["kmax"] = rep.kmax;
    j["kappa"] = rep.kappa;
    j["worstMode"] = rep.worstMode;
    j["resonant"] = rep.resonant;
    std::string text = j.dump(1);
    std::printf("%s\n", text.c_str());
    if (!outDir.empty()) {
        auto dir = ensure_dir(outDir);
        std::ofstream out(dir / "frequency_report.json");
        out << text << "\n";
    }
    return rep.resonant ? 1 : 0;
}

int cmd_check_decay(const ExperimentConfig& cfg, const std::string& outDir) {
    int radius = cfg.experiment.value("radius", cfg.decayDim == 1 ? 1000 : 100);
    DecayFunction g = cfg.decay();
    AxiomReport rep = check_axioms(g, radius);
    json j;
    j["schemaVersion"] = 1;
    j["alpha"] = g.alpha();
    j["rate"] = g.rate();
    j["prefactor"] = g.prefactor();
    j["dim"] = g.dim();
    j["radius"] = radius;
    j["sumTotal"] = rep.sumTotal;
    j["worstConvolutionRatio"] = rep.worstConvolutionRatio;
    j["pass"] = rep.pass;
    std::string text = j.dump(1);
    std::printf("%s\n", text.c_str());
    if (!outDir.empty()) {
        auto dir = ensure_dir(outDir);
        std::ofstream out(dir / "decay_report.json");
        out << text << "\n";
    }
    return rep.pass ? 0 : 1;
}

int cmd_diagnose(const std::string& stateFile, const std::string& outDir) {
    json rawConfig;
    KamState st = load_state(stateFile, &rawConfig);
    ExperimentConfig cfg = config_from_json(rawConfig);
    SolverOptions opt = cfg.solver_options();

    json flags = json::array();
    json j;
    j["schemaVersion"] = 1;
    j["stateFile"] = stateFile;
    j["realityDefect"] = reality_defect(st.K);
    if (j["realityDefect"].get<double>() > 1e-10) flags.push_back("reality-violation");

    bool degenerate = false;
    try {
        st.bundle = initial_splitting(st.model, st.K);
        GraphRefineOptions gopt;
        gopt.tol = 1e-9;
        st.bundle = graph_refine(st.bundle, st.model, st.K, st.omega, gopt);
        refresh_diagnostics(st.model, st, opt, true);
    } catch (const DegenerateEmbedding&) {
        degenerate = true;
        flags.push_back("degenerate-embedding");
        GridField E = invariance_error(st.model, st);
        st.diag.errSup = grid_sup(E);
    } catch (const ContractionFailure&) {
        flags.push_back("splitting-refinement-failed");
        refresh_diagnostics(st.model, st, opt, false);
    }

    j["errorSup"] = st.diag.errSup;
    j["errorWeighted"] = st.diag.errWeighted;
    j["lambda"] = st.diag.lambdaNorm;
    j["isotropy"] = st.diag.isotropy;
    if (!degenerate) {
        j["normN"] = st.diag.normN;
        j["invAvgA"] = st.diag.invAvgA;
        j["invAvgQ"] = st.diag.invAvgQ;
        j["mu1"] = st.diag.mu1;
        j["mu2"] = st.diag.mu2;
        j["mu3"] = st.diag.mu3;
        j["bundleDefect"] = st.diag.bundleDefect;
        if (st.diag.mu1 * st.diag.mu3 >= 1.0 || st.diag.mu2 * st.diag.mu3 >= 1.0)
            flags.push_back("hyperbolicity-margin-violation");
    }
    VectorXd omega = st.omega;
    DiophantineReport rep = measure_diophantine(omega, 1.0 + omega.size(), 200);
    j["diophantineKappa"] = rep.kappa;
    if (rep.resonant) flags.push_back("resonant-frequency");
    double tolScale = std::max(1e-9, 100.0 * cfg.tol);
    if (st.diag.errSup > tolScale) flags.push_back("invariance-error-above-tolerance");
    j["flags"] = flags;
    j["allGreen"] = flags.empty();

    std::string text = j.dump(1);
    std::printf("%s\n", text.c_str());
    if (!outDir.empty()) {
        auto dir = ensure_dir(outDir);
        std::ofstream out(dir / "diagnose_report.json");
        out << text << "\n";
    }
    return flags.empty() ? 0 : 1;
}

} // namespace latkam
