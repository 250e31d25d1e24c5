#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "pvx/greens.hpp"

namespace pvx {

struct VortexConfiguration {
    std::vector<Vec2> positions;
    std::vector<double> masses;        // intensities a_i
    std::vector<double> circulations;  // xi_j, one per hole

    std::size_t size() const { return positions.size(); }
};

inline void validate_configuration(const DomainModel& dom, const VortexConfiguration& X) {
    std::size_t n = X.positions.size();
    if (n < 1) throw ConfigurationInvalid("need at least one vortex");
    if (X.masses.size() != n) throw ConfigurationInvalid("masses/positions length mismatch");
    if (X.circulations.size() != static_cast<std::size_t>(dom.hole_count()))
        throw ConfigurationInvalid("circulations length must equal the hole count");
    for (std::size_t i = 0; i < n; ++i) {
        if (!dom.contains(X.positions[i]))
            throw ConfigurationInvalid("vortex position not strictly interior");
        for (std::size_t j = i + 1; j < n; ++j)
            if (dist(X.positions[i], X.positions[j]) == 0.0)
                throw ConfigurationInvalid("coincident vortex positions");
    }
}

// d(X): smallest of the pairwise separations and the boundary distances.
inline double min_separation(const DomainModel& dom, const VortexConfiguration& X) {
    double d = std::numeric_limits<double>::infinity();
    std::size_t n = X.positions.size();
    for (std::size_t i = 0; i < n; ++i) {
        d = std::min(d, dom.boundary_distance(X.positions[i]));
        for (std::size_t j = i + 1; j < n; ++j)
            d = std::min(d, dist(X.positions[i], X.positions[j]));
    }
    return d;
}

// c_j = xi_j + sum_k a_k w_j(x_k). Constant in time by Kelvin's theorem; the
// drift along computed trajectories is reported by tests, not assumed.
inline std::vector<double> circulation_coefficients(const DomainModel& dom,
                                                    const VortexConfiguration& X) {
    std::vector<double> c(X.circulations);
    for (int j = 0; j < dom.hole_count(); ++j)
        for (std::size_t k = 0; k < X.positions.size(); ++k)
            c[j] += X.masses[k] * harmonic_measure(dom, j + 1, X.positions[k]);
    return c;
}

// Right-hand side of the point-vortex system,
//   dx_i/dt = sum_{j != i} a_j grad_x^perp G(x_i, x_j)
//             + (a_i/2) grad^perp robin(x_i) + sum_j c_j beta_j(x_i).
inline std::vector<Vec2> vortex_velocity(const DomainModel& dom,
                                         const VortexConfiguration& X) {
    validate_configuration(dom, X);
    std::size_t n = X.positions.size();
    std::vector<double> c = circulation_coefficients(dom, X);
    std::vector<Vec2> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        Vec2 u{0, 0};
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            u += X.masses[j] * grad_green(dom, X.positions[i], X.positions[j]).perp();
        }
        u += (X.masses[i] / 2.0) * grad_robin(dom, X.positions[i]).perp();
        for (int j = 0; j < dom.hole_count(); ++j)
            u += c[j] * harmonic_field(dom, j + 1, X.positions[i]);
        v[i] = u;
    }
    return v;
}

// Kirchhoff-Routh energy. The hole terms are normalized so that
// (1/a_i) grad_{x_i}^perp H reproduces vortex_velocity exactly; a
// finite-difference test pins this down.
inline double hamiltonian(const DomainModel& dom, const VortexConfiguration& X) {
    validate_configuration(dom, X);
    std::size_t n = X.positions.size();
    double h = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        h += 0.5 * X.masses[i] * X.masses[i] * robin(dom, X.positions[i]);
        for (std::size_t j = i + 1; j < n; ++j)
            h += X.masses[i] * X.masses[j] * green(dom, X.positions[i], X.positions[j]);
    }
    for (int j = 0; j < dom.hole_count(); ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k)
            s += X.masses[k] * harmonic_measure(dom, j + 1, X.positions[k]);
        h += X.circulations[j] * s + 0.5 * s * s;
    }
    return h;
}

enum class TerminationKind { HorizonReached, CollisionEvent };
enum class EventKind { None, Separation, Stiffness, Threshold };

struct Termination {
    TerminationKind kind = TerminationKind::HorizonReached;
    double time = 0.0;
    EventKind event = EventKind::None;
    int detail = 0;  // threshold condition index when event == Threshold
};

struct Trajectory {
    std::vector<double> times;
    std::vector<VortexConfiguration> states;
    std::vector<double> hamiltonian_series;
    std::vector<double> min_separation_series;
    Termination termination;
};

enum class IntegratorMethod { AdaptiveRK, ImplicitMidpoint };

struct IntegratorOptions {
    IntegratorMethod method = IntegratorMethod::AdaptiveRK;
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    double delta_stop = 1e-4;
    double initial_step = 1e-3;
    double fixed_step = 1e-3;  // implicit midpoint
    double max_step = 0.1;
};

namespace detail {

using State = std::vector<double>;

// f(t, y, dy) -> false when y left the admissible set (step gets rejected).
using Rhs = std::function<bool(double, const State&, State&)>;

struct StepResult {
    bool ok = false;
    State y;
    double error = 0.0;
};

// Dormand-Prince 5(4) pair.
inline StepResult rk45_step(const Rhs& f, double t, const State& y, double h,
                            const State& k1) {
    static const double a21 = 1.0 / 5;
    static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
    static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                        b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static const double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

    std::size_t n = y.size();
    State k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n);
    StepResult r;
    auto stage = [&](State& k, double c, auto&&... terms) {
        auto add = [&](double w, const State& src) {
            for (std::size_t i = 0; i < n; ++i) tmp[i] += h * w * src[i];
        };
        tmp = y;
        (add(terms.first, *terms.second), ...);
        return f(t + c * h, tmp, k);
    };
    using P = std::pair<double, const State*>;
    if (!stage(k2, 1.0 / 5, P{a21, &k1})) return r;
    if (!stage(k3, 3.0 / 10, P{a31, &k1}, P{a32, &k2})) return r;
    if (!stage(k4, 4.0 / 5, P{a41, &k1}, P{a42, &k2}, P{a43, &k3})) return r;
    if (!stage(k5, 8.0 / 9, P{a51, &k1}, P{a52, &k2}, P{a53, &k3}, P{a54, &k4})) return r;
    if (!stage(k6, 1.0, P{a61, &k1}, P{a62, &k2}, P{a63, &k3}, P{a64, &k4}, P{a65, &k5}))
        return r;

    r.y.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        r.y[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
    if (!f(t + h, r.y, k7)) return r;

    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                        e7 * k7[i]);
        err = std::max(err, std::abs(e));
    }
    r.error = err;
    r.ok = true;
    return r;
}

struct IntegrationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Integrates y' = f(t,y) from (t0,y0) to t1 without event handling. Throws
// IntegrationError on step-size underflow.
inline State solve_to(const Rhs& f, double t0, State y, double t1,
                      const IntegratorOptions& opts) {
    if (t1 == t0) return y;
    double t = t0;
    double dir = t1 > t0 ? 1.0 : -1.0;
    if (opts.method == IntegratorMethod::ImplicitMidpoint) {
        std::size_t n = y.size();
        State mid(n), k(n), ynew(n);
        while (dir * (t1 - t) > 1e-15) {
            double h = dir * std::min(opts.fixed_step, dir * (t1 - t));
            ynew = y;
            for (int it = 0; it < 100; ++it) {
                for (std::size_t i = 0; i < n; ++i) mid[i] = 0.5 * (y[i] + ynew[i]);
                if (!f(t + 0.5 * h, mid, k))
                    throw IntegrationError("midpoint state left the domain");
                double delta = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    double v = y[i] + h * k[i];
                    delta = std::max(delta, std::abs(v - ynew[i]));
                    ynew[i] = v;
                }
                if (delta < 1e-14) break;
            }
            y = ynew;
            t += h;
        }
        return y;
    }

    double h = dir * std::min(opts.initial_step, std::abs(t1 - t0));
    double err_prev = 1.0;
    State k1(y.size());
    while (dir * (t1 - t) > 1e-15) {
        if (dir * h > dir * (t1 - t)) h = t1 - t;
        if (!f(t, y, k1)) throw IntegrationError("state left the domain");
        StepResult s = rk45_step(f, t, y, h, k1);
        double scale = opts.abs_tol + opts.rel_tol * 1.0;
        double err = s.ok ? s.error / scale : 2.0;
        if (s.ok && err <= 1.0) {
            t += h;
            y = std::move(s.y);
            double fac = 0.9 * std::pow(std::max(err, 1e-10), -0.7 / 5.0) *
                         std::pow(std::max(err_prev, 1e-10), 0.4 / 5.0);
            h *= std::min(5.0, std::max(0.2, fac));
            err_prev = std::max(err, 1e-10);
        } else {
            h *= std::max(0.1, 0.9 * std::pow(err, -0.2));
        }
        if (std::abs(h) > opts.max_step) h = dir * opts.max_step;
        if (std::abs(h) < 1e-14 * std::max(1.0, std::abs(t)))
            throw IntegrationError("step-size underflow");
    }
    return y;
}

// Full event-aware driver. `stop` maps a state to a signed scalar; the run
// halts at the first zero crossing from positive to non-positive, located by
// bisected re-integration from the previous accepted step.
struct EventDriver {
    Rhs f;
    IntegratorOptions opts;
    std::function<double(const State&)> stop;  // > 0 while running

    struct Output {
        std::vector<double> times;
        std::vector<State> states;
        Termination termination;
    };

    Output run(double t0, State y0, double horizon, EventKind event_kind) const {
        Output out;
        out.times.push_back(t0);
        out.states.push_back(y0);
        if (stop && stop(y0) <= 0.0) {
            out.termination = {TerminationKind::CollisionEvent, t0, event_kind, 0};
            return out;
        }

        double t = t0;
        State y = y0;
        double h = opts.initial_step;
        double err_prev = 1.0;
        State k1(y.size());

        auto underflow = [&](double tt) {
            out.termination = {TerminationKind::CollisionEvent, tt, EventKind::Stiffness, 0};
        };

        if (opts.method == IntegratorMethod::ImplicitMidpoint) {
            std::size_t n = y.size();
            State mid(n), k(n), ynew(n);
            while (t < horizon - 1e-15) {
                double hh = std::min(opts.fixed_step, horizon - t);
                ynew = y;
                bool ok = true;
                for (int it = 0; it < 100; ++it) {
                    for (std::size_t i = 0; i < n; ++i) mid[i] = 0.5 * (y[i] + ynew[i]);
                    if (!f(t + 0.5 * hh, mid, k)) {
                        ok = false;
                        break;
                    }
                    double delta = 0.0;
                    for (std::size_t i = 0; i < n; ++i) {
                        double v = y[i] + hh * k[i];
                        delta = std::max(delta, std::abs(v - ynew[i]));
                        ynew[i] = v;
                    }
                    if (delta < 1e-14) break;
                }
                if (!ok) {
                    underflow(t);
                    return out;
                }
                if (stop && stop(ynew) <= 0.0) {
                    locate_event(t, y, hh, out, event_kind);
                    return out;
                }
                t += hh;
                y = ynew;
                out.times.push_back(t);
                out.states.push_back(y);
            }
            out.termination = {TerminationKind::HorizonReached, horizon, EventKind::None, 0};
            return out;
        }

        while (t < horizon - 1e-15) {
            if (h > horizon - t) h = horizon - t;
            if (!f(t, y, k1)) {
                underflow(t);
                return out;
            }
            StepResult s = rk45_step(f, t, y, h, k1);
            double scale = opts.abs_tol + opts.rel_tol * 1.0;
            double err = s.ok ? s.error / scale : 2.0;
            if (s.ok && err <= 1.0) {
                if (stop && stop(s.y) <= 0.0) {
                    locate_event(t, y, h, out, event_kind);
                    return out;
                }
                t += h;
                y = std::move(s.y);
                out.times.push_back(t);
                out.states.push_back(y);
                double fac = 0.9 * std::pow(std::max(err, 1e-10), -0.7 / 5.0) *
                             std::pow(std::max(err_prev, 1e-10), 0.4 / 5.0);
                h *= std::min(5.0, std::max(0.2, fac));
                err_prev = std::max(err, 1e-10);
            } else {
                h *= std::max(0.1, 0.9 * std::pow(err, -0.2));
            }
            if (h > opts.max_step) h = opts.max_step;
            if (h < 1e-14 * std::max(1.0, std::abs(t))) {
                underflow(t);
                return out;
            }
        }
        out.termination = {TerminationKind::HorizonReached, horizon, EventKind::None, 0};
        return out;
    }

  private:
    // The stop function crossed within [t, t+h]; bisect by re-integrating
    // from the step-start state until the window is below 1e-10.
    void locate_event(double t, const State& y, double h, Output& out,
                      EventKind event_kind) const {
        double lo = 0.0, hi = h;
        State at_hi;
        while (hi - lo > 1e-10) {
            double mid = 0.5 * (lo + hi);
            State ym;
            try {
                ym = solve_to(f, t, y, t + mid, opts);
            } catch (const IntegrationError&) {
                hi = mid;
                continue;
            }
            if (stop(ym) <= 0.0) {
                hi = mid;
                at_hi = std::move(ym);
            } else {
                lo = mid;
            }
        }
        if (at_hi.empty()) {
            try {
                at_hi = solve_to(f, t, y, t + hi, opts);
            } catch (const IntegrationError&) {
                at_hi = y;
            }
        }
        out.times.push_back(t + hi);
        out.states.push_back(at_hi);
        out.termination = {TerminationKind::CollisionEvent, t + hi, event_kind, 0};
    }
};

inline State pack(const std::vector<Vec2>& pts) {
    State y(2 * pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        y[2 * i] = pts[i].x;
        y[2 * i + 1] = pts[i].y;
    }
    return y;
}

inline std::vector<Vec2> unpack(const State& y) {
    std::vector<Vec2> p(y.size() / 2);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = {y[2 * i], y[2 * i + 1]};
    return p;
}

inline VortexConfiguration with_positions(const VortexConfiguration& base, const State& y) {
    VortexConfiguration X = base;
    X.positions = unpack(y);
    return X;
}

// RHS of the plain (singular) dynamics; refuses states that left Gamma.
inline Rhs plain_rhs(const DomainModel& dom, const VortexConfiguration& base) {
    return [&dom, base](double, const State& y, State& dy) {
        VortexConfiguration X = with_positions(base, y);
        for (const Vec2& p : X.positions)
            if (!dom.contains(p)) return false;
        for (std::size_t i = 0; i < X.positions.size(); ++i)
            for (std::size_t j = i + 1; j < X.positions.size(); ++j)
                if (dist(X.positions[i], X.positions[j]) < 1e-14) return false;
        std::vector<Vec2> v = vortex_velocity(dom, X);
        dy = pack(v);
        return true;
    };
}

}  // namespace detail

inline Trajectory integrate(const DomainModel& dom, const VortexConfiguration& X0,
                            double horizon, const IntegratorOptions& opts = {}) {
    validate_configuration(dom, X0);
    if (!(horizon > 0.0)) throw ParameterError("horizon must be positive");

    detail::EventDriver drv;
    drv.f = detail::plain_rhs(dom, X0);
    drv.opts = opts;
    drv.stop = [&dom, &X0, &opts](const detail::State& y) {
        return min_separation(dom, detail::with_positions(X0, y)) - opts.delta_stop;
    };
    auto out = drv.run(0.0, detail::pack(X0.positions), horizon, EventKind::Separation);

    Trajectory traj;
    traj.times = out.times;
    traj.termination = out.termination;
    traj.states.reserve(out.states.size());
    for (const auto& y : out.states) {
        VortexConfiguration X = detail::with_positions(X0, y);
        traj.states.push_back(X);
        traj.min_separation_series.push_back(min_separation(dom, X));
        double h = std::numeric_limits<double>::quiet_NaN();
        try {
            h = hamiltonian(dom, X);
        } catch (const std::exception&) {
        }
        traj.hamiltonian_series.push_back(h);
    }
    return traj;
}

namespace detail {

// Determinant by LU with partial pivoting; the matrices are tiny (2N x 2N).
inline double determinant(std::vector<std::vector<double>> m) {
    std::size_t n = m.size();
    double det = 1.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
        if (piv != col) {
            std::swap(m[piv], m[col]);
            det = -det;
        }
        if (m[col][col] == 0.0) return 0.0;
        det *= m[col][col];
        for (std::size_t r = col + 1; r < n; ++r) {
            double f = m[r][col] / m[col][col];
            for (std::size_t c = col; c < n; ++c) m[r][c] -= f * m[col][c];
        }
    }
    return det;
}

}  // namespace detail

// Determinant of the finite-difference Jacobian of X0 -> S_t X0. Equals 1 for
// the exact flow (the system is Hamiltonian, hence area preserving).
inline double flow_jacobian(const DomainModel& dom, const VortexConfiguration& X0, double t,
                            const IntegratorOptions& opts = {}) {
    validate_configuration(dom, X0);
    if (t == 0.0) return 1.0;
    const double h = 1e-6;
    detail::Rhs f = detail::plain_rhs(dom, X0);
    detail::State base = detail::pack(X0.positions);
    std::size_t n = base.size();
    std::vector<std::vector<double>> jac(n, std::vector<double>(n));
    for (std::size_t c = 0; c < n; ++c) {
        detail::State yp = base, ym = base;
        yp[c] += h;
        ym[c] -= h;
        detail::State up = detail::solve_to(f, 0.0, yp, t, opts);
        detail::State um = detail::solve_to(f, 0.0, ym, t, opts);
        for (std::size_t r = 0; r < n; ++r) jac[r][c] = (up[r] - um[r]) / (2 * h);
    }
    return detail::determinant(jac);
}

}  // namespace pvx
