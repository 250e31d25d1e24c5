#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pvx/dynamics.hpp"

namespace pvx {

using Json = nlohmann::json;

struct SamplerSpec {
    int n = 1;
    std::size_t count = 1;
    std::vector<double> masses;
};

struct RunConfig {
    DomainModel domain = DomainModel::disk();
    std::optional<VortexConfiguration> vortices;
    std::optional<SamplerSpec> sampler;
    IntegratorOptions integrator;
    bool integrator_given = false;

    bool regularized = false;
    double epsilon = 1e-2;
    double eta = 0.1;
    bool phi_series = false;

    double horizon = 1.0;
    std::vector<double> delta_grid;
    double kappa = 0.5;
    std::vector<std::size_t> levels;
    std::vector<double> epsilon_grid;
    std::size_t sample_count = 2000;

    std::string trajectory_path;
    std::string summary_path;
    std::string collapse_csv_path;
    std::uint64_t seed = 0;

    std::string config_hash;
    Json echo;
};

namespace detail {

inline void require_keys(const Json& obj, const std::string& where,
                         std::initializer_list<const char*> allowed) {
    if (!obj.is_object())
        throw ConfigurationInvalid(where + ": expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) known = true;
        if (!known)
            throw ConfigurationInvalid(where + ": unknown key '" + it.key() + "'");
    }
}

template <class T>
T fetch(const Json& obj, const std::string& where, const char* key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const Json::exception&) {
        throw ConfigurationInvalid(where + "." + key + ": wrong type");
    }
}

template <class T>
T fetch_required(const Json& obj, const std::string& where, const char* key) {
    if (!obj.contains(key))
        throw ConfigurationInvalid(where + ": missing required key '" + std::string(key) + "'");
    try {
        return obj.at(key).get<T>();
    } catch (const Json::exception&) {
        throw ConfigurationInvalid(where + "." + key + ": wrong type");
    }
}

inline Vec2 parse_vec2(const Json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw ConfigurationInvalid(where + ": expected [x, y]");
    return Vec2{j[0].get<double>(), j[1].get<double>()};
}

inline HolomorphicMap parse_map(const Json& j, const std::string& where) {
    require_keys(j, where, {"kind", "a", "theta", "c", "image"});
    std::string kind = fetch_required<std::string>(j, where, "kind");
    HolomorphicMap m = HolomorphicMap::identity();
    if (kind == "identity") {
        m = HolomorphicMap::identity();
    } else if (kind == "automorphism") {
        Vec2 a = j.contains("a") ? parse_vec2(j.at("a"), where + ".a") : Vec2{0.0, 0.0};
        double theta = fetch<double>(j, where, "theta", 0.0);
        m = HolomorphicMap::disk_automorphism(a, theta);
    } else if (kind == "polynomial") {
        Vec2 c = parse_vec2(j.contains("c") ? j.at("c") : Json::array({0.0, 0.0}), where + ".c");
        m = HolomorphicMap::polynomial(c);
    } else if (kind == "inversion") {
        m = HolomorphicMap::inversion();
    } else {
        throw ConfigurationInvalid(where + ".kind: unknown map kind '" + kind + "'");
    }
    if (fetch<bool>(j, where, "image", false)) m = HolomorphicMap::inverse_of(m);
    return m;
}

inline DomainModel parse_domain(const Json& j, const std::string& where) {
    require_keys(j, where, {"kind", "rho", "map", "exterior"});
    std::string kind = fetch_required<std::string>(j, where, "kind");
    if (kind == "disk") return DomainModel::disk();
    if (kind == "exterior") return DomainModel::exterior_disk();
    if (kind == "annulus") {
        double rho = fetch_required<double>(j, where, "rho");
        if (!(rho > 0.0 && rho < 1.0))
            throw ConfigurationInvalid(where + ".rho: annulus requires 0 < rho < 1");
        return DomainModel::annulus(rho);
    }
    if (kind == "mapped") {
        if (!j.contains("map"))
            throw ConfigurationInvalid(where + ": mapped domain needs a 'map' object");
        HolomorphicMap m = parse_map(j.at("map"), where + ".map");
        return DomainModel::mapped(m, fetch<bool>(j, where, "exterior", false));
    }
    throw ConfigurationInvalid(where + ".kind: unknown domain kind '" + kind + "'");
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace detail

inline RunConfig parse_config(const Json& root) {
    detail::require_keys(root, "config",
                         {"domain", "vortices", "integrator", "regularization", "run", "output",
                          "seed"});
    RunConfig cfg;
    cfg.echo = root;
    {
        std::ostringstream hex;
        hex << std::hex << detail::fnv1a(root.dump());
        cfg.config_hash = hex.str();
    }
    if (!root.contains("domain"))
        throw ConfigurationInvalid("config: missing required key 'domain'");
    cfg.domain = detail::parse_domain(root.at("domain"), "domain");

    if (root.contains("vortices")) {
        const Json& v = root.at("vortices");
        detail::require_keys(v, "vortices",
                             {"positions", "masses", "circulations", "sampler"});
        if (v.contains("sampler")) {
            const Json& s = v.at("sampler");
            detail::require_keys(s, "vortices.sampler", {"n", "count", "masses"});
            SamplerSpec spec;
            spec.n = detail::fetch_required<int>(s, "vortices.sampler", "n");
            spec.count = detail::fetch_required<std::size_t>(s, "vortices.sampler", "count");
            spec.masses = detail::fetch<std::vector<double>>(
                s, "vortices.sampler", "masses",
                std::vector<double>(static_cast<std::size_t>(std::max(spec.n, 0)), 1.0));
            if (spec.n < 1 || spec.masses.size() != static_cast<std::size_t>(spec.n))
                throw ConfigurationInvalid("vortices.sampler: masses length must equal n");
            cfg.sampler = spec;
        } else {
            VortexConfiguration X;
            const Json& pts = v.contains("positions") ? v.at("positions") : Json::array();
            if (!pts.is_array() || pts.empty())
                throw ConfigurationInvalid("vortices.positions: expected a non-empty array");
            for (std::size_t i = 0; i < pts.size(); ++i)
                X.positions.push_back(detail::parse_vec2(pts[i], "vortices.positions"));
            X.masses = detail::fetch<std::vector<double>>(
                v, "vortices", "masses", std::vector<double>(X.positions.size(), 1.0));
            X.circulations = detail::fetch<std::vector<double>>(
                v, "vortices", "circulations",
                std::vector<double>(static_cast<std::size_t>(cfg.domain.hole_count()), 0.0));
            cfg.vortices = X;
        }
    }

    if (root.contains("integrator")) {
        cfg.integrator_given = true;
        const Json& j = root.at("integrator");
        detail::require_keys(j, "integrator",
                             {"method", "rel_tol", "abs_tol", "delta_stop", "initial_step",
                              "fixed_step", "max_step"});
        std::string method = detail::fetch<std::string>(j, "integrator", "method", "rk45");
        if (method == "rk45")
            cfg.integrator.method = IntegratorMethod::AdaptiveRK;
        else if (method == "implicit_midpoint")
            cfg.integrator.method = IntegratorMethod::ImplicitMidpoint;
        else
            throw ConfigurationInvalid("integrator.method: unknown method '" + method + "'");
        cfg.integrator.rel_tol = detail::fetch<double>(j, "integrator", "rel_tol", 1e-10);
        cfg.integrator.abs_tol = detail::fetch<double>(j, "integrator", "abs_tol", 1e-12);
        cfg.integrator.delta_stop = detail::fetch<double>(j, "integrator", "delta_stop", 1e-4);
        cfg.integrator.initial_step =
            detail::fetch<double>(j, "integrator", "initial_step", 1e-3);
        cfg.integrator.fixed_step = detail::fetch<double>(j, "integrator", "fixed_step", 1e-3);
        cfg.integrator.max_step = detail::fetch<double>(j, "integrator", "max_step", 0.1);
    }

    if (root.contains("regularization")) {
        const Json& j = root.at("regularization");
        detail::require_keys(j, "regularization", {"enabled", "epsilon", "eta"});
        cfg.regularized = detail::fetch<bool>(j, "regularization", "enabled", false);
        cfg.epsilon = detail::fetch<double>(j, "regularization", "epsilon", 1e-2);
        cfg.eta = detail::fetch<double>(j, "regularization", "eta", 0.1);
        if (cfg.regularized && !(cfg.epsilon > 0.0 && cfg.epsilon < 1.0))
            throw ConfigurationInvalid("regularization.epsilon: must lie in (0, 1)");
    }

    if (root.contains("run")) {
        const Json& j = root.at("run");
        detail::require_keys(j, "run",
                             {"horizon", "delta_grid", "kappa", "levels", "epsilon_grid",
                              "sample_count"});
        cfg.horizon = detail::fetch<double>(j, "run", "horizon", 1.0);
        cfg.delta_grid =
            detail::fetch<std::vector<double>>(j, "run", "delta_grid", {});
        cfg.kappa = detail::fetch<double>(j, "run", "kappa", 0.5);
        cfg.levels = detail::fetch<std::vector<std::size_t>>(j, "run", "levels", {});
        cfg.epsilon_grid =
            detail::fetch<std::vector<double>>(j, "run", "epsilon_grid", {});
        cfg.sample_count = detail::fetch<std::size_t>(j, "run", "sample_count", 2000);
    }

    if (root.contains("output")) {
        const Json& j = root.at("output");
        detail::require_keys(j, "output",
                             {"trajectory", "summary", "collapse_csv", "phi_series"});
        cfg.trajectory_path = detail::fetch<std::string>(j, "output", "trajectory", "");
        cfg.summary_path = detail::fetch<std::string>(j, "output", "summary", "");
        cfg.collapse_csv_path = detail::fetch<std::string>(j, "output", "collapse_csv", "");
        cfg.phi_series = detail::fetch<bool>(j, "output", "phi_series", false);
    }

    cfg.seed = detail::fetch<std::uint64_t>(root, "config", "seed", 0);
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigurationInvalid("cannot open config file '" + path + "'");
    Json root;
    try {
        root = Json::parse(in);
    } catch (const Json::exception& e) {
        throw ConfigurationInvalid("config file '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_config(root);
}

}  // namespace pvx
