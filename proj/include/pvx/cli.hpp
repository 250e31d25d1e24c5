#pragma once

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pvx/config.hpp"
#include "pvx/measure.hpp"

namespace pvx {

inline constexpr const char* kToolVersion = "0.1.0";

namespace cli_detail {

inline double fault_bias() {
    const char* f = std::getenv("PVX_FAULT");
    return (f && std::string(f) == "kernel") ? 1.0 : 0.0;
}

inline void write_json(const std::string& path, const Json& j) {
    if (path.empty()) {
        std::cout << j.dump(2) << "\n";
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigurationInvalid("cannot write to '" + path + "'");
    out << j.dump(2) << "\n";
}

inline std::string termination_cause(const Termination& t) {
    if (t.kind == TerminationKind::HorizonReached) return "horizon";
    switch (t.event) {
        case EventKind::Separation:
            return "separation";
        case EventKind::Stiffness:
            return "stiffness";
        case EventKind::Threshold:
            return "threshold";
        default:
            return "event";
    }
}

inline Json base_summary(const RunConfig& cfg, double wall_seconds) {
    Json s;
    s["tool_version"] = kToolVersion;
    s["config_hash"] = cfg.config_hash;
    s["seed"] = cfg.seed;
    s["wall_clock_seconds"] = wall_seconds;
    s["config"] = cfg.echo;
    return s;
}

inline VortexConfiguration initial_state(const RunConfig& cfg) {
    if (cfg.vortices) return *cfg.vortices;
    if (cfg.sampler) {
        auto cfgs = sample_configurations(cfg.domain, cfg.sampler->n, 1, cfg.seed);
        cfgs[0].masses = cfg.sampler->masses;
        return cfgs[0];
    }
    throw ConfigurationInvalid("config: 'vortices' must give positions or a sampler");
}

inline Trajectory integrate_regularized(const RegularizedKernels& kern,
                                        const VortexConfiguration& X0, double horizon,
                                        const IntegratorOptions& opts) {
    validate_configuration(kern.domain, X0);
    detail::EventDriver drv;
    drv.f = detail::regularized_rhs(kern, X0);
    drv.opts = opts;
    drv.stop = [&kern, &X0, &opts](const detail::State& y) {
        return min_separation(kern.domain, detail::with_positions(X0, y)) - opts.delta_stop;
    };
    auto out = drv.run(0.0, detail::pack(X0.positions), horizon, EventKind::Separation);
    Trajectory traj;
    traj.times = out.times;
    traj.termination = out.termination;
    for (const auto& y : out.states) {
        VortexConfiguration X = detail::with_positions(X0, y);
        traj.states.push_back(X);
        traj.min_separation_series.push_back(min_separation(kern.domain, X));
        double h = std::numeric_limits<double>::quiet_NaN();
        try {
            h = hamiltonian(kern.domain, X);
        } catch (const std::exception&) {
        }
        traj.hamiltonian_series.push_back(h);
    }
    return traj;
}

inline int cmd_simulate(const RunConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    VortexConfiguration X0 = initial_state(cfg);

    Trajectory traj;
    std::unique_ptr<RegularizedKernels> kern;
    if (cfg.regularized) {
        kern = std::make_unique<RegularizedKernels>(cfg.domain, cfg.epsilon);
        traj = integrate_regularized(*kern, X0, cfg.horizon, cfg.integrator);
    } else {
        traj = integrate(cfg.domain, X0, cfg.horizon, cfg.integrator);
    }

    if (!cfg.trajectory_path.empty()) {
        std::ofstream out(cfg.trajectory_path, std::ios::binary);
        if (!out)
            throw ConfigurationInvalid("cannot write to '" + cfg.trajectory_path + "'");
        FunctionalParams params;
        params.eta = cfg.eta;
        for (std::size_t i = 0; i < traj.times.size(); ++i) {
            Json rec;
            rec["t"] = traj.times[i];
            Json xs = Json::array();
            for (const Vec2& p : traj.states[i].positions) {
                xs.push_back(p.x);
                xs.push_back(p.y);
            }
            rec["x"] = xs;
            rec["H"] = traj.hamiltonian_series[i];
            rec["d"] = traj.min_separation_series[i];
            if (cfg.regularized && cfg.phi_series)
                rec["phi_eps"] = phi_eps(*kern, params, traj.states[i]);
            out << rec.dump() << "\n";
        }
    }

    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    Json summary = base_summary(cfg, wall);
    summary["termination"] = termination_cause(traj.termination);
    summary["termination_time"] = traj.termination.time;
    summary["steps"] = traj.times.size();
    summary["final_min_separation"] = traj.min_separation_series.back();
    write_json(cfg.summary_path, summary);
    return 0;
}

inline int cmd_ensemble(const RunConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    if (!cfg.sampler)
        throw ConfigurationInvalid("config: 'ensemble' needs vortices.sampler");
    std::vector<double> deltas = cfg.delta_grid;
    if (deltas.empty()) deltas = {1e-1, 3e-2, 1e-2, 3e-3};
    IntegratorOptions opts = cfg.integrator_given ? cfg.integrator : ensemble_options();
    EnsembleReport rep =
        ensemble_statistics(cfg.domain, cfg.sampler->n, cfg.sampler->masses,
                            cfg.sampler->count, cfg.horizon, deltas, cfg.seed, opts);

    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    Json summary = base_summary(cfg, wall);
    summary["termination"] = "completed";
    summary["sample_count"] = rep.sample_count;
    summary["error_count"] = rep.error_count;
    summary["horizon"] = rep.horizon;
    summary["delta_grid"] = rep.delta_grid;
    Json curve = Json::array();
    for (const auto& st : rep.collapse_fraction) {
        Json row;
        row["delta"] = st.delta;
        row["fraction"] = st.fraction;
        row["ci_low"] = st.ci_low;
        row["ci_high"] = st.ci_high;
        curve.push_back(row);
    }
    summary["collapse_fraction"] = curve;
    summary["tau_eps_histogram"] = rep.tau_eps_histogram;
    write_json(cfg.summary_path, summary);

    if (!cfg.collapse_csv_path.empty()) {
        std::ofstream csv(cfg.collapse_csv_path, std::ios::binary);
        if (!csv)
            throw ConfigurationInvalid("cannot write to '" + cfg.collapse_csv_path + "'");
        csv << "delta,fraction,ci_low,ci_high\n";
        for (const auto& st : rep.collapse_fraction)
            csv << st.delta << "," << st.fraction << "," << st.ci_low << "," << st.ci_high
                << "\n";
    }
    return 0;
}

inline int cmd_verify_greens(const RunConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    double bias = fault_bias();
    const DomainModel& dom = cfg.domain;
    Rng rng(mix_seed(cfg.seed, 17));

    // The corrupted kernel perturbs one side of each comparison.
    auto corrupted = [&](const Vec2& x, const Vec2& y) {
        return green(dom, x, y) + bias * (1.0 + x.x * x.x);
    };

    double worst_symmetry = 0.0;
    double worst_boundary = 0.0;
    double worst_gradient = 0.0;
    auto interior = [&]() {
        for (;;) {
            Vec2 p = sample_point(dom, rng);
            if (dom.boundary_distance(p) > 0.05) return p;
        }
    };
    for (int i = 0; i < 200; ++i) {
        Vec2 x = interior();
        Vec2 y = interior();
        if ((x - y).norm() < 1e-3) continue;
        worst_symmetry = std::max(worst_symmetry, std::abs(corrupted(x, y) - green(dom, y, x)));
        Vec2 g = grad_green(dom, x, y);
        double h = 1e-6;
        double gx = (corrupted(Vec2{x.x + h, x.y}, y) - corrupted(Vec2{x.x - h, x.y}, y)) /
                    (2.0 * h);
        double gy = (corrupted(Vec2{x.x, x.y + h}, y) - corrupted(Vec2{x.x, x.y - h}, y)) /
                    (2.0 * h);
        worst_gradient =
            std::max(worst_gradient, std::hypot(gx - g.x, gy - g.y) / (1.0 + g.norm()));
        double th = rng.uniform(0.0, kTwoPi);
        Vec2 b = dom.boundary_point(th);
        worst_boundary = std::max(worst_boundary, std::abs(corrupted(b, y)));
    }

    bool ok = worst_symmetry < 1e-9 && worst_boundary < 1e-7 && worst_gradient < 1e-4;
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    Json summary = base_summary(cfg, wall);
    summary["termination"] = ok ? "verified" : "violation";
    summary["max_symmetry_residual"] = worst_symmetry;
    summary["max_boundary_residual"] = worst_boundary;
    summary["max_gradient_residual"] = worst_gradient;
    write_json(cfg.summary_path, summary);
    if (!ok) {
        std::cerr << "verify-greens: kernel identities violated\n";
        return 3;
    }
    return 0;
}

inline int cmd_verify_inequalities(const RunConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    std::vector<std::size_t> levels = cfg.levels;
    if (levels.empty()) levels = {80000, 320000, 1280000};
    std::vector<double> eps_grid = cfg.epsilon_grid;
    if (eps_grid.empty()) eps_grid = {1e-2, 1e-3, 1e-4};
    FunctionalParams params;
    params.eta = cfg.eta;
    InequalityReport rep =
        verify_inequality_suite(cfg.domain, cfg.kappa, levels, eps_grid, cfg.seed, params);

    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    Json summary = base_summary(cfg, wall);
    summary["termination"] = rep.verdict;
    summary["kappa"] = rep.kappa;
    summary["quadrature_levels"] = rep.quadrature_levels;
    summary["diagonal_estimates"] = rep.diagonal_estimates;
    summary["boundary_estimates"] = rep.boundary_estimates;
    summary["epsilon_grid"] = rep.epsilon_grid;
    summary["diagonal_regularized"] = rep.diagonal_reg;
    summary["boundary_regularized"] = rep.boundary_reg;
    summary["primitive_diagonal"] = rep.primitive_diagonal;
    summary["primitive_mixed"] = rep.primitive_mixed;
    summary["primitive_shell"] = rep.primitive_shell;
    summary["phi_integrals"] = rep.phi_integrals;
    summary["verdict"] = rep.verdict;
    write_json(cfg.summary_path, summary);
    if (rep.verdict != "convergent") {
        std::cerr << "verify-inequalities: estimates did not stabilize\n";
        return 3;
    }
    return 0;
}

inline int cmd_verify_bounds(const RunConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    PointwiseReport rep =
        verify_pointwise_bounds(cfg.domain, std::max<std::size_t>(cfg.sample_count, 1000),
                                cfg.seed, fault_bias());

    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    Json summary = base_summary(cfg, wall);
    summary["termination"] = "verified";
    summary["sample_count"] = rep.sample_count;
    summary["max_gap"] = rep.max_gap;
    summary["max_grad_robin_distance"] = rep.max_grad_robin_distance;
    summary["max_field_coupling"] = rep.max_field_coupling;
    Json fits = Json::array();
    for (const auto& fit : rep.concentration) {
        Json f;
        f["k"] = fit.k;
        f["epsilon"] = fit.epsilon;
        f["max_separation"] = fit.max_separation;
        f["max_distance"] = fit.max_distance;
        f["c_separation"] = fit.c_separation;
        f["c_distance"] = fit.c_distance;
        f["qualifying"] = fit.qualifying;
        fits.push_back(f);
    }
    summary["concentration"] = fits;
    write_json(cfg.summary_path, summary);
    return 0;
}

inline int cmd_report(const std::string& input) {
    std::ifstream in(input);
    if (!in) throw ConfigurationInvalid("cannot open report file '" + input + "'");
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::exception& e) {
        throw ConfigurationInvalid("report file '" + input + "' is not valid JSON: " + e.what());
    }
    std::cout << "tool version : " << j.value("tool_version", std::string("?")) << "\n";
    std::cout << "config hash  : " << j.value("config_hash", std::string("?")) << "\n";
    std::cout << "seed         : " << j.value("seed", 0ull) << "\n";
    std::cout << "wall clock   : " << j.value("wall_clock_seconds", 0.0) << " s\n";
    std::cout << "termination  : " << j.value("termination", std::string("?")) << "\n";
    if (j.contains("collapse_fraction")) {
        std::cout << "collapse curve:\n";
        for (const auto& row : j.at("collapse_fraction"))
            std::cout << "  delta " << row.value("delta", 0.0) << " -> "
                      << row.value("fraction", 0.0) << " [" << row.value("ci_low", 0.0) << ", "
                      << row.value("ci_high", 0.0) << "]\n";
    }
    if (j.contains("verdict"))
        std::cout << "verdict      : " << j.at("verdict").get<std::string>() << "\n";
    return 0;
}

}  // namespace cli_detail

inline int run_cli(int argc, const char* const* argv) {
    CLI::App app{"point-vortex dynamics in bounded planar domains"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    std::string config_path;
    std::string report_input;
    bool flag_regularized = false;
    double flag_epsilon = -1.0;
    double flag_eta = -1.0;
    std::int64_t flag_seed = -1;

    auto add_config = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "path to the JSON run configuration")
            ->required();
        sub->add_option("--seed", flag_seed, "override the configured seed");
    };

    CLI::App* simulate = app.add_subcommand("simulate", "integrate one vortex configuration");
    add_config(simulate);
    simulate->add_flag("--regularized", flag_regularized, "use the regularized dynamics");
    simulate->add_option("--epsilon", flag_epsilon, "regularization scale");
    simulate->add_option("--eta", flag_eta, "exponent used by the phi diagnostic");

    CLI::App* ensemble = app.add_subcommand("ensemble", "sample and integrate an ensemble");
    add_config(ensemble);

    CLI::App* vgreens = app.add_subcommand("verify-greens", "check kernel identities");
    add_config(vgreens);

    CLI::App* vineq =
        app.add_subcommand("verify-inequalities", "estimate the singular integrals");
    add_config(vineq);

    CLI::App* vbounds = app.add_subcommand("verify-bounds", "check pointwise bounds");
    add_config(vbounds);

    CLI::App* report = app.add_subcommand("report", "print a saved summary");
    report->add_option("--input", report_input, "path to a summary JSON file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (report->parsed()) return cli_detail::cmd_report(report_input);

        RunConfig cfg = load_config(config_path);
        if (flag_seed >= 0) cfg.seed = static_cast<std::uint64_t>(flag_seed);
        if (flag_regularized) cfg.regularized = true;
        if (flag_epsilon > 0.0) cfg.epsilon = flag_epsilon;
        if (flag_eta > 0.0) cfg.eta = flag_eta;
        if (cfg.regularized && !(cfg.epsilon > 0.0 && cfg.epsilon < 1.0))
            throw ConfigurationInvalid("regularization.epsilon: must lie in (0, 1)");

        if (simulate->parsed()) return cli_detail::cmd_simulate(cfg);
        if (ensemble->parsed()) return cli_detail::cmd_ensemble(cfg);
        if (vgreens->parsed()) return cli_detail::cmd_verify_greens(cfg);
        if (vineq->parsed()) return cli_detail::cmd_verify_inequalities(cfg);
        if (vbounds->parsed()) return cli_detail::cmd_verify_bounds(cfg);
        return 2;
    } catch (const ConfigurationInvalid& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ParameterError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const MapRejected& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const InvariantViolation& e) {
        std::cerr << "invariant violation: " << e.what() << "\n";
        return 3;
    } catch (const GeometryError& e) {
        std::cerr << "invariant violation: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace pvx
