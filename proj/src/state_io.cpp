#include "latkam/state_io.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

using nlohmann::json;

namespace latkam {

std::string double_to_hex(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%a", x);
    return buf;
}

double hex_to_double(const std::string& s) {
    return std::strtod(s.c_str(), nullptr);
}

std::string model_hash(const ModelConfig& cfg) {
    json j;
    j["onsite"] = cfg.onsite == ModelConfig::Onsite::pendulum ? "pendulum" : "polynomial";
    for (double c : cfg.poly) j["poly"].push_back(double_to_hex(c));
    for (const auto& c : cfg.couplings)
        j["couplings"].push_back({c.offset, double_to_hex(c.quad), double_to_hex(c.quart)});
    j["epsilon"] = double_to_hex(cfg.epsilon);
    j["step"] = double_to_hex(cfg.stepSize);
    j["substeps"] = cfg.substeps;
    j["window"] = {cfg.window.lo, cfg.window.hi};
    j["dim"] = cfg.dim;
    std::string s = j.dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

json vec_to_json(const VectorXd& v) {
    json a = json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(double_to_hex(v[i]));
    return a;
}

VectorXd json_to_vec(const json& a) {
    VectorXd v(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) v[i] = hex_to_double(a[i].get<std::string>());
    return v;
}

json diag_to_json(const IterationRecord& d) {
    json j;
    j["errSup"] = double_to_hex(d.errSup);
    j["errWeighted"] = double_to_hex(d.errWeighted);
    j["lambdaNorm"] = double_to_hex(d.lambdaNorm);
    j["isotropy"] = double_to_hex(d.isotropy);
    j["normN"] = double_to_hex(d.normN);
    j["invAvgA"] = double_to_hex(d.invAvgA);
    j["invAvgQ"] = double_to_hex(d.invAvgQ);
    j["mu1"] = double_to_hex(d.mu1);
    j["mu2"] = double_to_hex(d.mu2);
    j["mu3"] = double_to_hex(d.mu3);
    j["bundleDefect"] = double_to_hex(d.bundleDefect);
    j["tailFrac"] = double_to_hex(d.tailFrac);
    j["iter"] = d.iter;
    return j;
}

IterationRecord diag_from_json(const json& j) {
    IterationRecord d;
    d.errSup = hex_to_double(j.at("errSup"));
    d.errWeighted = hex_to_double(j.at("errWeighted"));
    d.lambdaNorm = hex_to_double(j.at("lambdaNorm"));
    d.isotropy = hex_to_double(j.at("isotropy"));
    d.normN = hex_to_double(j.at("normN"));
    d.invAvgA = hex_to_double(j.at("invAvgA"));
    d.invAvgQ = hex_to_double(j.at("invAvgQ"));
    d.mu1 = hex_to_double(j.at("mu1"));
    d.mu2 = hex_to_double(j.at("mu2"));
    d.mu3 = hex_to_double(j.at("mu3"));
    d.bundleDefect = hex_to_double(j.at("bundleDefect"));
    d.tailFrac = hex_to_double(j.at("tailFrac"));
    d.iter = j.at("iter").get<int>();
    return d;
}

json model_to_json(const ModelConfig& cfg) {
    json j;
    j["onsite"] = cfg.onsite == ModelConfig::Onsite::pendulum ? "pendulum" : "polynomial";
    j["poly"] = json::array();
    for (double c : cfg.poly) j["poly"].push_back(double_to_hex(c));
    j["couplings"] = json::array();
    for (const auto& c : cfg.couplings)
        j["couplings"].push_back(
            {{"offset", c.offset}, {"quad", double_to_hex(c.quad)}, {"quart", double_to_hex(c.quart)}});
    j["epsilon"] = double_to_hex(cfg.epsilon);
    j["step"] = double_to_hex(cfg.stepSize);
    j["substeps"] = cfg.substeps;
    j["window"] = {cfg.window.lo, cfg.window.hi};
    j["dim"] = cfg.dim;
    return j;
}

ModelConfig model_from_json(const json& j) {
    ModelConfig cfg;
    cfg.onsite = j.at("onsite") == "pendulum" ? ModelConfig::Onsite::pendulum
                                              : ModelConfig::Onsite::polynomial;
    for (const auto& c : j.at("poly")) cfg.poly.push_back(hex_to_double(c.get<std::string>()));
    cfg.couplings.clear();
    for (const auto& c : j.at("couplings"))
        cfg.couplings.push_back({c.at("offset").get<int>(),
                                 hex_to_double(c.at("quad").get<std::string>()),
                                 hex_to_double(c.at("quart").get<std::string>())});
    cfg.epsilon = hex_to_double(j.at("epsilon").get<std::string>());
    cfg.stepSize = hex_to_double(j.at("step").get<std::string>());
    cfg.substeps = j.at("substeps").get<int>();
    cfg.window = Window{j.at("window")[0].get<int>(), j.at("window")[1].get<int>()};
    cfg.dim = j.at("dim").get<int>();
    return cfg;
}

} // namespace

void save_state(const KamState& st, const std::string& path, const json& config) {
    json j;
    j["schemaVersion"] = 1;
    j["kind"] = "latkam-state";
    j["config"] = config;
    j["model"] = model_to_json(st.model);
    j["modelHash"] = model_hash(st.model);
    j["omega"] = vec_to_json(st.omega);
    j["lambda"] = vec_to_json(st.lambda);
    j["centers"] = st.K.centers;
    j["window"] = {st.K.window.lo, st.K.window.hi};
    j["grid"] = {{"l", st.K.grid.l}, {"m", {st.K.grid.m[0], st.K.grid.m[1], st.K.grid.m[2]}}};
    j["kmax"] = st.K.kmax;
    json wj = json::array();
    for (int s = 0; s < st.K.winding.rows(); ++s) {
        json row = json::array();
        for (int c = 0; c < st.K.winding.cols(); ++c) row.push_back(st.K.winding(s, c));
        wj.push_back(row);
    }
    j["winding"] = wj;
    json re = json::array(), im = json::array();
    for (int r = 0; r < st.K.modes.rows(); ++r) {
        json rowr = json::array(), rowi = json::array();
        for (int c = 0; c < st.K.modes.cols(); ++c) {
            rowr.push_back(double_to_hex(st.K.modes(r, c).real()));
            rowi.push_back(double_to_hex(st.K.modes(r, c).imag()));
        }
        re.push_back(rowr);
        im.push_back(rowi);
    }
    j["modesRe"] = re;
    j["modesIm"] = im;
    j["diagnostics"] = diag_to_json(st.diag);
    json hist = json::array();
    for (const auto& rec : st.history) hist.push_back(diag_to_json(rec));
    j["history"] = hist;

    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_state: cannot open " + path);
    out << j.dump(1) << "\n";
}

KamState load_state(const std::string& path, json* configOut) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_state: cannot open " + path);
    json j;
    in >> j;
    if (!j.contains("kind") || j.at("kind") != "latkam-state")
        throw std::runtime_error("load_state: not a state file");
    if (j.at("schemaVersion").get<int>() != 1)
        throw std::runtime_error("load_state: unsupported schema version");

    KamState st;
    st.model = model_from_json(j.at("model"));
    if (j.contains("modelHash") && j.at("modelHash") != model_hash(st.model))
        throw std::runtime_error("load_state: model hash mismatch (corrupted file?)");
    st.omega = json_to_vec(j.at("omega"));
    st.lambda = json_to_vec(j.at("lambda"));

    TorusGrid grid;
    grid.l = j.at("grid").at("l").get<int>();
    for (int d = 0; d < 3; ++d) grid.m[d] = j.at("grid").at("m")[d].get<int>();
    Window w{j.at("window")[0].get<int>(), j.at("window")[1].get<int>()};
    std::vector<int> centers = j.at("centers").get<std::vector<int>>();
    st.K = TorusEmbedding(grid, j.at("kmax").get<int>(), w, centers);
    const auto& wj = j.at("winding");
    for (int s = 0; s < st.K.winding.rows(); ++s)
        for (int c = 0; c < st.K.winding.cols(); ++c) st.K.winding(s, c) = wj[s][c].get<int>();
    const auto& re = j.at("modesRe");
    const auto& im = j.at("modesIm");
    for (int r = 0; r < st.K.modes.rows(); ++r)
        for (int c = 0; c < st.K.modes.cols(); ++c)
            st.K.modes(r, c) = Cx(hex_to_double(re[r][c].get<std::string>()),
                                  hex_to_double(im[r][c].get<std::string>()));
    st.diag = diag_from_json(j.at("diagnostics"));
    for (const auto& rec : j.at("history")) st.history.push_back(diag_from_json(rec));
    if (configOut) *configOut = j.at("config");
    return st;
}

} // namespace latkam
