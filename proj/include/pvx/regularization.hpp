#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "pvx/dynamics.hpp"

namespace pvx {

// Smooth odd cutoff f_eps: identity below A = |ln eps|/(2pi), constant L
// above A+1, joined by the standard C-infinity ramp
//   f'(A+t) = sigma(t) = g(1-t) / (g(1-t) + g(t)),  g(s) = exp(-1/s).
// The ramp integral is accumulated once by Gauss-Legendre panels and cached;
// f' is the exact derivative of the cached f.
class CutoffProfile {
  public:
    explicit CutoffProfile(double epsilon) : eps_(epsilon) {
        if (!(epsilon > 0.0 && epsilon < 1.0))
            throw ParameterError("cutoff requires 0 < epsilon < 1");
        a_ = std::abs(std::log(epsilon)) / kTwoPi;
        cum_.resize(kPanels + 1);
        cum_[0] = 0.0;
        for (int k = 0; k < kPanels; ++k)
            cum_[k + 1] =
                cum_[k] + panel(static_cast<double>(k) / kPanels,
                                static_cast<double>(k + 1) / kPanels);
        plateau_ = a_ + cum_[kPanels];
    }

    double epsilon() const { return eps_; }
    double threshold() const { return a_; }
    double plateau() const { return plateau_; }

    double f(double r) const {
        double s = r < 0 ? -1.0 : 1.0;
        double v = std::abs(r);
        if (v < a_) return r;
        if (v >= a_ + 1.0 || std::isinf(v)) return s * plateau_;
        double t = v - a_;
        int k = std::min(static_cast<int>(t * kPanels), kPanels - 1);
        double lo = static_cast<double>(k) / kPanels;
        return s * (a_ + cum_[k] + panel(lo, t));
    }

    double fprime(double r) const {
        double v = std::abs(r);
        if (v < a_) return 1.0;
        if (v >= a_ + 1.0 || std::isinf(v)) return 0.0;
        return sigma(v - a_);
    }

  private:
    static double g(double s) { return s > 0.0 ? std::exp(-1.0 / s) : 0.0; }

    static double sigma(double t) {
        double num = g(1.0 - t);
        return num / (num + g(t));
    }

    // 5-point Gauss-Legendre integral of sigma over [lo, hi].
    static double panel(double lo, double hi) {
        static const std::array<double, 5> xs = {-0.9061798459386640, -0.5384693101056831,
                                                 0.0, 0.5384693101056831,
                                                 0.9061798459386640};
        static const std::array<double, 5> ws = {0.2369268850561891, 0.4786286704993665,
                                                 0.5688888888888889, 0.4786286704993665,
                                                 0.2369268850561891};
        double c = 0.5 * (lo + hi), hw = 0.5 * (hi - lo);
        double acc = 0.0;
        for (int i = 0; i < 5; ++i) acc += ws[i] * sigma(c + hw * xs[i]);
        return acc * hw;
    }

    static constexpr int kPanels = 512;
    double eps_;
    double a_;
    double plateau_;
    std::vector<double> cum_;
};

inline CutoffProfile build_cutoff(double epsilon) { return CutoffProfile(epsilon); }

struct RegularizedKernels {
    DomainModel domain;
    CutoffProfile cutoff;

    RegularizedKernels(DomainModel dom, double epsilon)
        : domain(std::move(dom)), cutoff(epsilon) {}
};

// G_eps: f(G_free) + f(gamma) off the diagonal, 0 when either point is on the
// boundary, -L + f(robin) on the diagonal. Total on the closed domain.
inline double green_reg(const RegularizedKernels& k, const Vec2& x, const Vec2& y) {
    if (!k.domain.in_closure(x) || !k.domain.in_closure(y))
        throw DomainViolation("green_reg: point outside the domain closure");
    if (x.x == y.x && x.y == y.y) {
        if (!k.domain.contains(x)) return 0.0;
        return -k.cutoff.plateau() + k.cutoff.f(robin(k.domain, x));
    }
    if (!k.domain.contains(x) || !k.domain.contains(y)) return 0.0;
    return k.cutoff.f(green_free(x, y)) + k.cutoff.f(gamma(k.domain, x, y));
}

inline Vec2 grad_green_reg(const RegularizedKernels& k, const Vec2& x, const Vec2& y) {
    if (!k.domain.in_closure(x) || !k.domain.in_closure(y))
        throw DomainViolation("grad_green_reg: point outside the domain closure");
    if (x.x == y.x && x.y == y.y) {
        // f'(G_free) vanishes at the singularity; only the gamma term is left,
        // with grad_x gamma(x,x) = (1/2) grad robin(x).
        double fp = k.cutoff.fprime(robin(k.domain, x));
        if (fp == 0.0) return {0, 0};
        return grad_robin(k.domain, x) * (0.5 * fp);
    }
    Vec2 out{0, 0};
    double fp_free = k.cutoff.fprime(green_free(x, y));
    if (fp_free != 0.0) out += grad_green_free(x, y) * fp_free;
    double fp_gamma = k.cutoff.fprime(gamma(k.domain, x, y));
    if (fp_gamma != 0.0) out += grad_gamma(k.domain, x, y) * fp_gamma;
    return out;
}

inline double robin_reg(const RegularizedKernels& k, const Vec2& x) {
    if (!k.domain.in_closure(x))
        throw DomainViolation("robin_reg: point outside the domain closure");
    return k.cutoff.f(robin(k.domain, x));
}

inline Vec2 grad_robin_reg(const RegularizedKernels& k, const Vec2& x) {
    if (!k.domain.in_closure(x))
        throw DomainViolation("grad_robin_reg: point outside the domain closure");
    double fp = k.cutoff.fprime(robin(k.domain, x));
    if (fp == 0.0) return {0, 0};  // skip the (possibly infinite) gradient
    return grad_robin(k.domain, x) * fp;
}

// The regularized ODE right-hand side; finite on the whole closure, with
// coincident vortices allowed.
inline std::vector<Vec2> velocity_reg(const RegularizedKernels& k,
                                      const VortexConfiguration& X) {
    const DomainModel& dom = k.domain;
    std::size_t n = X.positions.size();
    if (X.masses.size() != n) throw ConfigurationInvalid("masses/positions length mismatch");
    if (X.circulations.size() != static_cast<std::size_t>(dom.hole_count()))
        throw ConfigurationInvalid("circulations length must equal the hole count");
    std::vector<double> c(X.circulations);
    for (int j = 0; j < dom.hole_count(); ++j)
        for (std::size_t i = 0; i < n; ++i)
            c[j] += X.masses[i] * harmonic_measure(dom, j + 1, X.positions[i]);
    std::vector<Vec2> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        Vec2 u{0, 0};
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            u += X.masses[j] * grad_green_reg(k, X.positions[i], X.positions[j]).perp();
        }
        u += (X.masses[i] / 2.0) * grad_robin_reg(k, X.positions[i]).perp();
        for (int j = 0; j < dom.hole_count(); ++j)
            u += c[j] * harmonic_field(dom, j + 1, X.positions[i]);
        v[i] = u;
    }
    return v;
}

struct FunctionalParams {
    double eta = 0.1;
};

inline void validate_params(const FunctionalParams& p) {
    if (!(p.eta > 0.0 && p.eta < 1.0)) throw ParameterError("eta must lie in (0,1)");
}

// phi_eps(X) = (1/2) sum_{i != j} exp(-eta G_eps(x_i,x_j))
//            + (1/2) sum_i exp(eta robin_eps(x_i)).
inline double phi_eps(const RegularizedKernels& k, const FunctionalParams& p,
                      const VortexConfiguration& X) {
    validate_params(p);
    std::size_t n = X.positions.size();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            acc += 0.5 * std::exp(-p.eta * green_reg(k, X.positions[i], X.positions[j]));
        }
        acc += 0.5 * std::exp(p.eta * robin_reg(k, X.positions[i]));
    }
    return acc;
}

// The six sums B_1..B_6 making up the analytic d/dt of phi_eps along the
// regularized flow at t=0, with F(r) = exp(-eta r). B_5 vanishes identically
// (grad robin_eps is orthogonal to its own perp) but is assembled literally.
inline std::array<double, 6> lambda_eps_terms(const RegularizedKernels& k,
                                              const FunctionalParams& p,
                                              const VortexConfiguration& X) {
    validate_params(p);
    const DomainModel& dom = k.domain;
    std::size_t n = X.positions.size();
    auto fprime = [&](double r) { return -p.eta * std::exp(-p.eta * r); };
    std::vector<double> c(X.circulations);
    for (int j = 0; j < dom.hole_count(); ++j)
        for (std::size_t i = 0; i < n; ++i)
            c[j] += X.masses[i] * harmonic_measure(dom, j + 1, X.positions[i]);
    std::array<double, 6> b{};
    for (std::size_t i = 0; i < n; ++i) {
        double rr = robin_reg(k, X.positions[i]);
        Vec2 gr = grad_robin_reg(k, X.positions[i]);
        Vec2 field{0, 0};
        for (int j = 0; j < dom.hole_count(); ++j)
            field += c[j] * harmonic_field(dom, j + 1, X.positions[i]);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double ge = green_reg(k, X.positions[i], X.positions[j]);
            Vec2 gg = grad_green_reg(k, X.positions[i], X.positions[j]);
            double fp = fprime(ge);
            for (std::size_t kk = 0; kk < n; ++kk) {
                if (kk == i) continue;
                b[0] += fp * X.masses[kk] *
                        gg.dot(grad_green_reg(k, X.positions[i], X.positions[kk]).perp());
            }
            b[1] += fp * 0.5 * X.masses[i] * gg.dot(gr.perp());
            b[2] += fp * gg.dot(field);
        }
        double fpr = fprime(-rr);
        Vec2 sum_g{0, 0};
        for (std::size_t kk = 0; kk < n; ++kk) {
            if (kk == i) continue;
            sum_g += X.masses[kk] * grad_green_reg(k, X.positions[i], X.positions[kk]).perp();
        }
        b[3] -= 0.5 * fpr * gr.dot(sum_g);
        b[4] -= 0.25 * fpr * X.masses[i] * gr.dot(gr.perp());
        b[5] -= 0.5 * fpr * gr.dot(field);
    }
    return b;
}

inline double lambda_eps(const RegularizedKernels& k, const FunctionalParams& p,
                         const VortexConfiguration& X) {
    auto b = lambda_eps_terms(k, p, X);
    return b[0] + b[1] + b[2] + b[3] + b[4] + b[5];
}

namespace detail {

inline Rhs regularized_rhs(const RegularizedKernels& k, const VortexConfiguration& base) {
    return [&k, base](double, const State& y, State& dy) {
        VortexConfiguration X = with_positions(base, y);
        for (const Vec2& p : X.positions)
            if (!k.domain.in_closure(p)) return false;
        dy = pack(velocity_reg(k, X));
        return true;
    };
}

// A - max of the three monitored families; non-positive once a threshold is
// reached. Condition order for tie-breaking: G_free, robin, gamma.
inline double threshold_margin(const RegularizedKernels& k, const VortexConfiguration& X,
                               int* which = nullptr) {
    double a = k.cutoff.threshold();
    double worst = -std::numeric_limits<double>::infinity();
    int cond = 0;
    std::size_t n = X.positions.size();
    for (std::size_t i = 0; i < n; ++i) {
        double v = std::abs(robin(k.domain, X.positions[i]));
        if (v > worst) {
            worst = v;
            cond = 2;
        }
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double gf = std::abs(green_free(X.positions[i], X.positions[j]));
            if (gf > worst) {
                worst = gf;
                cond = 1;
            }
            double gm = std::abs(gamma(k.domain, X.positions[i], X.positions[j]));
            if (gm > worst) {
                worst = gm;
                cond = 3;
            }
        }
    }
    if (which) *which = cond;
    return a - worst;
}

}  // namespace detail

struct TauResult {
    double tau = 0.0;
    bool hit = false;          // threshold reached before the horizon
    int condition = 0;         // 1: G_free, 2: robin, 3: gamma
    VortexConfiguration state;  // configuration at tau (or at the horizon)
    Trajectory trajectory;
};

// First time along the regularized flow at which any monitored quantity
// reaches A, bisected to 1e-10; horizon when no threshold is met; 0 when a
// threshold is already violated at t=0.
inline TauResult tau_eps(const DomainModel& dom, const VortexConfiguration& X0,
                         double epsilon, double horizon,
                         const IntegratorOptions& opts = {}) {
    validate_configuration(dom, X0);
    RegularizedKernels k(dom, epsilon);
    detail::EventDriver drv;
    drv.f = detail::regularized_rhs(k, X0);
    drv.opts = opts;
    drv.stop = [&k, &X0](const detail::State& y) {
        return detail::threshold_margin(k, detail::with_positions(X0, y));
    };
    auto out = drv.run(0.0, detail::pack(X0.positions), horizon, EventKind::Threshold);

    TauResult res;
    res.state = detail::with_positions(X0, out.states.back());
    res.trajectory.times = out.times;
    for (const auto& y : out.states)
        res.trajectory.states.push_back(detail::with_positions(X0, y));
    res.trajectory.termination = out.termination;
    if (out.termination.kind == TerminationKind::CollisionEvent &&
        out.termination.event == EventKind::Threshold) {
        res.hit = true;
        res.tau = out.termination.time;
        detail::threshold_margin(k, res.state, &res.condition);
    } else if (out.termination.kind == TerminationKind::CollisionEvent) {
        throw detail::IntegrationError("regularized integration failed");
    } else {
        res.tau = horizon;
    }
    return res;
}

// State of the regularized flow at time t (t may be negative).
inline VortexConfiguration flow_reg(const RegularizedKernels& k,
                                    const VortexConfiguration& X0, double t,
                                    const IntegratorOptions& opts = {}) {
    detail::Rhs f = detail::regularized_rhs(k, X0);
    detail::State y = detail::solve_to(f, 0.0, detail::pack(X0.positions), t, opts);
    return detail::with_positions(X0, y);
}

}  // namespace pvx
