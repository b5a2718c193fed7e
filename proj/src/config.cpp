#include "moco/config.hpp"

#include "moco/optim.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace moco {

using nlohmann::json;

const char* family_name(MotionFamily f) {
    switch (f) {
        case MotionFamily::in_plane: return "in_plane";
        case MotionFamily::out_plane: return "out_plane";
        case MotionFamily::mixed: return "mixed";
    }
    return "?";
}

MotionFamily family_from_name(const std::string& name) {
    if (name == "in_plane") return MotionFamily::in_plane;
    if (name == "out_plane") return MotionFamily::out_plane;
    if (name == "mixed") return MotionFamily::mixed;
    throw std::invalid_argument("unknown motion family: " + name);
}

GridSpec Config::slice_grid() const {
    GridSpec g = volume_grid;
    g.nz = 1;
    g.origin.z() = 0.0;
    return g;
}

void Config::validate() const {
    geometry.validate();
    phantom.validate();
    volume_grid.validate();
    if (simulate.n_nodes < 5) throw std::invalid_argument("simulate.n_nodes: need >= 5 (Akima)");
    if (estimate.kind != SplineKind::pchip)
        throw std::invalid_argument("estimate.kind: estimation must use pchip (simulation owns akima)");
    if (methods.empty()) throw std::invalid_argument("methods: need at least one method");
    if (train.n_samples < 50) throw std::invalid_argument("train.n_samples: need >= 50");
    if (train.val_fraction < 0.2) throw std::invalid_argument("train.val_fraction: need >= 0.2");
}

Config default_config() {
    Config cfg;
    cfg.geometry.sid = 625.0;
    cfg.geometry.sdd = 1000.0;
    cfg.geometry.n_views = 180;
    cfg.geometry.angular_range = 2.0 * EIGEN_PI;
    // wide enough that every voxel of the 128^2 x 1.25 mm grid stays on the
    // detector in all views (no interior truncation)
    cfg.geometry.detector = {178, 76, 2.5, 2.5, 88.5, 37.5};
    cfg.phantom = default_head_phantom();
    cfg.volume_grid = GridSpec::centered(128, 128, 65, {1.25, 1.25, 1.25});
    cfg.methods = {MethodConfig{}};
    return cfg;
}

namespace {

double radians(double deg) { return deg * EIGEN_PI / 180.0; }

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<T>();
}

Phantom phantom_from_json(const json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() == "default") return default_head_phantom();
        throw std::invalid_argument("phantom: unknown preset '" + j.get<std::string>() + "'");
    }
    Phantom ph;
    for (const auto& e : j.at("ellipsoids")) {
        Ellipsoid el;
        auto c = e.at("center");
        el.center = {c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>()};
        auto a = e.at("semi_axes");
        el.semi_axes = {a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>()};
        if (e.contains("euler_deg")) {
            auto r = e.at("euler_deg");
            el.rotation = se3_from_params(radians(r.at(0).get<double>()), radians(r.at(1).get<double>()),
                                          radians(r.at(2).get<double>()), 0, 0, 0).rotation();
        }
        el.density = e.at("density").get<double>();
        ph.ellipsoids.push_back(el);
    }
    return ph;
}

json phantom_to_json(const Phantom& ph) {
    json out;
    out["ellipsoids"] = json::array();
    for (const auto& e : ph.ellipsoids) {
        json je;
        je["center"] = {e.center.x(), e.center.y(), e.center.z()};
        je["semi_axes"] = {e.semi_axes.x(), e.semi_axes.y(), e.semi_axes.z()};
        je["density"] = e.density;
        if (!e.rotation.isApprox(Eigen::Matrix3d::Identity())) {
            Eigen::Vector3d ypr = e.rotation.eulerAngles(2, 1, 0); // rz, ry, rx
            je["euler_deg"] = {ypr.z() * 180.0 / EIGEN_PI, ypr.y() * 180.0 / EIGEN_PI,
                               ypr.x() * 180.0 / EIGEN_PI};
        }
        out["ellipsoids"].push_back(je);
    }
    return out;
}

std::array<bool, kNumTracks> active_from_json(const json& j) {
    if (j.is_string()) {
        std::string s = j.get<std::string>();
        if (s == "all") return family_mask(MotionFamily::mixed);
        return family_mask(family_from_name(s));
    }
    std::array<bool, kNumTracks> mask{};
    for (const auto& name : j) {
        std::string s = name.get<std::string>();
        bool found = false;
        for (int t = 0; t < kNumTracks; ++t)
            if (s == kTrackNames[t]) { mask[t] = true; found = true; }
        if (!found) throw std::invalid_argument("estimate.active: unknown track '" + s + "'");
    }
    return mask;
}

std::string active_to_name(const std::array<bool, kNumTracks>& a) {
    if (a == family_mask(MotionFamily::mixed)) return "all";
    if (a == family_mask(MotionFamily::in_plane)) return "in_plane";
    if (a == family_mask(MotionFamily::out_plane)) return "out_plane";
    return "";
}

} // namespace

Config load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config: " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("config parse error in " + path + ": " + e.what());
    }

    Config cfg = default_config();
    try {
        cfg.name = get_or<std::string>(j, "name", cfg.name);
        cfg.seed = get_or<uint64_t>(j, "seed", cfg.seed);
        cfg.deterministic = get_or<bool>(j, "deterministic", cfg.deterministic);
        if (j.contains("geometry")) {
            const json& g = j.at("geometry");
            cfg.geometry.sid = get_or(g, "sid", cfg.geometry.sid);
            cfg.geometry.sdd = get_or(g, "sdd", cfg.geometry.sdd);
            cfg.geometry.n_views = get_or(g, "n_views", cfg.geometry.n_views);
            if (g.contains("angular_range_deg"))
                cfg.geometry.angular_range = radians(g.at("angular_range_deg").get<double>());
            if (g.contains("detector")) {
                const json& d = g.at("detector");
                DetectorSpec& det = cfg.geometry.detector;
                det.nu = get_or(d, "nu", det.nu);
                det.nv = get_or(d, "nv", det.nv);
                det.du = get_or(d, "du", det.du);
                det.dv = get_or(d, "dv", det.dv);
                det.u0 = get_or(d, "u0", 0.5 * (det.nu - 1));
                det.v0 = get_or(d, "v0", 0.5 * (det.nv - 1));
            }
        }
        if (j.contains("phantom")) cfg.phantom = phantom_from_json(j.at("phantom"));
        if (j.contains("grid")) {
            const json& g = j.at("grid");
            int nx = get_or(g, "nx", cfg.volume_grid.nx);
            int ny = get_or(g, "ny", cfg.volume_grid.ny);
            int nz = get_or(g, "nz", cfg.volume_grid.nz);
            double sp = get_or(g, "spacing", cfg.volume_grid.spacing.x());
            cfg.volume_grid = GridSpec::centered(nx, ny, nz, {sp, sp, sp});
        }
        if (j.contains("simulate")) {
            const json& s = j.at("simulate");
            cfg.simulate.amplitude_mm = get_or(s, "amplitude_mm", cfg.simulate.amplitude_mm);
            cfg.simulate.amplitude_deg = get_or(s, "amplitude_deg", cfg.simulate.amplitude_deg);
            if (s.contains("family")) cfg.simulate.family = family_from_name(s.at("family").get<std::string>());
            cfg.simulate.n_nodes = get_or(s, "n_nodes", cfg.simulate.n_nodes);
            cfg.simulate.noise_sigma = get_or(s, "noise_sigma", cfg.simulate.noise_sigma);
            cfg.simulate.supersample = get_or(s, "supersample", cfg.simulate.supersample);
        }
        if (j.contains("estimate")) {
            const json& e = j.at("estimate");
            cfg.estimate.n_nodes = get_or(e, "n_nodes", cfg.estimate.n_nodes);
            if (e.contains("active")) cfg.estimate.active = active_from_json(e.at("active"));
            cfg.estimate.block_size = get_or(e, "block_size", cfg.estimate.block_size);
            cfg.estimate.max_sweeps = get_or(e, "max_sweeps", cfg.estimate.max_sweeps);
            cfg.estimate.epsilon = get_or(e, "epsilon", cfg.estimate.epsilon);
            cfg.estimate.nm.tol = get_or(e, "nm_tol", cfg.estimate.nm.tol);
            cfg.estimate.nm.max_evals = get_or(e, "nm_max_evals", cfg.estimate.nm.max_evals);
        }
        if (j.contains("ecc")) {
            const json& e = j.at("ecc");
            cfg.ecc.stride = get_or(e, "stride", cfg.ecc.stride);
            if (e.contains("max_separation_deg"))
                cfg.ecc.max_separation = radians(e.at("max_separation_deg").get<double>());
            cfg.ecc.n_kappa = get_or(e, "n_kappa", cfg.ecc.n_kappa);
        }
        if (j.contains("methods")) {
            cfg.methods.clear();
            for (const auto& m : j.at("methods")) {
                MethodConfig mc;
                mc.iqm = iqm_from_name(m.at("iqm").get<std::string>());
                mc.name = get_or<std::string>(m, "name", iqm_name(mc.iqm));
                if (m.contains("lambda")) {
                    if (m.at("lambda").is_string()) {
                        if (m.at("lambda").get<std::string>() != "auto")
                            throw std::invalid_argument("methods.lambda: number or \"auto\"");
                        mc.lambda = -1.0;
                    } else {
                        mc.lambda = m.at("lambda").get<double>();
                    }
                }
                cfg.methods.push_back(mc);
            }
        }
        cfg.model_file = get_or<std::string>(j, "model", cfg.model_file);
        if (j.contains("train")) {
            const json& t = j.at("train");
            cfg.train.n_samples = get_or(t, "n_samples", cfg.train.n_samples);
            cfg.train.epochs = get_or(t, "epochs", cfg.train.epochs);
            cfg.train.batch = get_or(t, "batch", cfg.train.batch);
            cfg.train.lr = get_or(t, "lr", cfg.train.lr);
            cfg.train.val_fraction = get_or(t, "val_fraction", cfg.train.val_fraction);
            cfg.train.amp_mm_min = get_or(t, "amp_mm_min", cfg.train.amp_mm_min);
            cfg.train.amp_mm_max = get_or(t, "amp_mm_max", cfg.train.amp_mm_max);
            cfg.train.amp_deg_min = get_or(t, "amp_deg_min", cfg.train.amp_deg_min);
            cfg.train.amp_deg_max = get_or(t, "amp_deg_max", cfg.train.amp_deg_max);
            cfg.train.n_nodes = get_or(t, "n_nodes", cfg.train.n_nodes);
            if (t.contains("family")) cfg.train.family = family_from_name(t.at("family").get<std::string>());
        }
    } catch (const json::exception& e) {
        throw std::runtime_error("config error in " + path + ": " + e.what());
    }
    cfg.validate();
    return cfg;
}

std::string config_to_json(const Config& cfg) {
    json j;
    j["name"] = cfg.name;
    j["seed"] = cfg.seed;
    j["deterministic"] = cfg.deterministic;
    j["geometry"] = {
        {"sid", cfg.geometry.sid},
        {"sdd", cfg.geometry.sdd},
        {"n_views", cfg.geometry.n_views},
        {"angular_range_deg", cfg.geometry.angular_range * 180.0 / EIGEN_PI},
        {"detector",
         {{"nu", cfg.geometry.detector.nu},
          {"nv", cfg.geometry.detector.nv},
          {"du", cfg.geometry.detector.du},
          {"dv", cfg.geometry.detector.dv},
          {"u0", cfg.geometry.detector.u0},
          {"v0", cfg.geometry.detector.v0}}},
    };
    j["phantom"] = phantom_to_json(cfg.phantom);
    j["grid"] = {{"nx", cfg.volume_grid.nx}, {"ny", cfg.volume_grid.ny}, {"nz", cfg.volume_grid.nz},
                 {"spacing", cfg.volume_grid.spacing.x()}};
    j["simulate"] = {{"amplitude_mm", cfg.simulate.amplitude_mm},
                     {"amplitude_deg", cfg.simulate.amplitude_deg},
                     {"family", family_name(cfg.simulate.family)},
                     {"n_nodes", cfg.simulate.n_nodes},
                     {"noise_sigma", cfg.simulate.noise_sigma},
                     {"supersample", cfg.simulate.supersample}};
    json est = {{"n_nodes", cfg.estimate.n_nodes},
                {"block_size", cfg.estimate.block_size},
                {"max_sweeps", cfg.estimate.max_sweeps},
                {"epsilon", cfg.estimate.epsilon},
                {"nm_tol", cfg.estimate.nm.tol},
                {"nm_max_evals", cfg.estimate.nm.max_evals}};
    std::string act = active_to_name(cfg.estimate.active);
    if (!act.empty()) est["active"] = act;
    else {
        json list = json::array();
        for (int t = 0; t < kNumTracks; ++t)
            if (cfg.estimate.active[t]) list.push_back(kTrackNames[t]);
        est["active"] = list;
    }
    j["estimate"] = est;
    j["ecc"] = {{"stride", cfg.ecc.stride},
                {"max_separation_deg", cfg.ecc.max_separation * 180.0 / EIGEN_PI},
                {"n_kappa", cfg.ecc.n_kappa}};
    j["methods"] = json::array();
    for (const auto& m : cfg.methods) {
        json jm = {{"name", m.name}, {"iqm", iqm_name(m.iqm)}};
        if (m.lambda < 0) jm["lambda"] = "auto";
        else jm["lambda"] = m.lambda;
        j["methods"].push_back(jm);
    }
    j["model"] = cfg.model_file;
    j["train"] = {{"n_samples", cfg.train.n_samples}, {"epochs", cfg.train.epochs},
                  {"batch", cfg.train.batch},         {"lr", cfg.train.lr},
                  {"val_fraction", cfg.train.val_fraction},
                  {"amp_mm_min", cfg.train.amp_mm_min}, {"amp_mm_max", cfg.train.amp_mm_max},
                  {"amp_deg_min", cfg.train.amp_deg_min}, {"amp_deg_max", cfg.train.amp_deg_max},
                  {"n_nodes", cfg.train.n_nodes},       {"family", family_name(cfg.train.family)}};
    return j.dump(2);
}

uint64_t config_hash(const Config& cfg) {
    std::string s = config_to_json(cfg);
    return fnv1a_hash(s.data(), s.size());
}

} // namespace moco
