#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "pvx/dynamics.hpp"
#include "pvx/regularization.hpp"

namespace pvx {

struct GeometryError : std::runtime_error {
    explicit GeometryError(const std::string& what) : std::runtime_error(what) {}
};

inline int worker_count() {
    if (const char* s = std::getenv("PVX_WORKERS")) {
        int n = std::atoi(s);
        if (n >= 1) return n;
    }
    unsigned n = std::thread::hardware_concurrency();
    return n > 0 ? static_cast<int>(n) : 1;
}

namespace detail {

// Runs jobs 0..job_count-1 on a small pool. Results are indexed by job id and
// reduced in index order by the caller, so nothing depends on the worker count.
template <class F>
void run_jobs(std::size_t job_count, F&& body) {
    if (job_count == 0) return;
    int workers = static_cast<int>(
        std::min<std::size_t>(static_cast<std::size_t>(worker_count()), job_count));
    if (workers <= 1) {
        for (std::size_t j = 0; j < job_count; ++j) body(j);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex mu;
    auto work = [&] {
        for (;;) {
            std::size_t j = next.fetch_add(1);
            if (j >= job_count) return;
            try {
                body(j);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

inline Vec2 sample_point(const DomainModel& dom, Rng& rng) {
    Vec2 lo, hi;
    dom.bounding_box(lo, hi);
    for (long draw = 0; draw < 1000000; ++draw) {
        Vec2 p{rng.uniform(lo.x, hi.x), rng.uniform(lo.y, hi.y)};
        if (dom.contains(p)) return p;
    }
    throw GeometryError("rejection sampling exceeded 1e6 draws per accepted point");
}

inline double domain_area(const DomainModel& dom) {
    switch (dom.kind()) {
        case DomainKind::Disk:
            return kPi;
        case DomainKind::Annulus:
            return kPi * (1.0 - dom.rho() * dom.rho());
        case DomainKind::MappedSimplyConnected: {
            // area(Omega) = integral over the unit disk of |(T^-1)'(w)|^2,
            // Gauss panels radially, uniform trapezoid in angle.
            static const double gx[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                                         0.5384693101056831, 0.9061798459386640};
            static const double gw[5] = {0.2369268850561891, 0.4786286704993665,
                                         0.5688888888888889, 0.4786286704993665,
                                         0.2369268850561891};
            const int panels = 64;
            const int angles = 128;
            const HolomorphicMap& map = dom.map();
            double acc = 0.0;
            for (int p = 0; p < panels; ++p) {
                double r0 = static_cast<double>(p) / panels;
                double r1 = static_cast<double>(p + 1) / panels;
                double hr = 0.5 * (r1 - r0);
                for (int g = 0; g < 5; ++g) {
                    double r = 0.5 * (r0 + r1) + hr * gx[g];
                    double wr = hr * gw[g] * r;
                    for (int a = 0; a < angles; ++a) {
                        double th = kTwoPi * a / angles;
                        Vec2 w{r * std::cos(th), r * std::sin(th)};
                        Vec2 x = map.inverse(w);
                        Complex tp = map.deriv(x);
                        acc += wr / std::norm(tp);
                    }
                }
            }
            return acc * kTwoPi / angles;
        }
        default:
            throw ParameterError("domain_area: domain is unbounded");
    }
}

inline std::vector<VortexConfiguration> sample_configurations(const DomainModel& dom, int n,
                                                              std::size_t count,
                                                              std::uint64_t seed) {
    if (n < 1) throw ParameterError("sample_configurations: n must be at least 1");
    if (count < 1) throw ParameterError("sample_configurations: count must be at least 1");
    std::vector<VortexConfiguration> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        Rng rng(mix_seed(seed, i));
        VortexConfiguration& cfg = out[i];
        cfg.masses.assign(static_cast<std::size_t>(n), 1.0);
        cfg.circulations.assign(static_cast<std::size_t>(dom.hole_count()), 0.0);
        cfg.positions.reserve(static_cast<std::size_t>(n));
        while (cfg.positions.size() < static_cast<std::size_t>(n)) {
            Vec2 p = sample_point(dom, rng);
            bool clash = false;
            for (const Vec2& q : cfg.positions)
                if ((p - q).norm() < 1e-14) clash = true;
            if (!clash) cfg.positions.push_back(p);
        }
    }
    return out;
}

struct CollapseStat {
    double delta = 0.0;
    double fraction = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

struct EnsembleReport {
    std::size_t sample_count = 0;
    double horizon = 0.0;
    std::vector<double> delta_grid;
    std::vector<CollapseStat> collapse_fraction;
    // First times at which a trajectory was stopped early (min separation
    // reached the stopping floor), binned uniformly over [0, horizon].
    std::vector<std::size_t> tau_eps_histogram;
    std::uint64_t seed = 0;
    std::size_t error_count = 0;
};

inline IntegratorOptions ensemble_options() {
    IntegratorOptions o;
    o.rel_tol = 1e-6;
    o.abs_tol = 1e-9;
    return o;
}

inline EnsembleReport ensemble_statistics(const DomainModel& dom, int n,
                                          const std::vector<double>& masses, std::size_t count,
                                          double horizon, const std::vector<double>& delta_grid,
                                          std::uint64_t seed,
                                          IntegratorOptions opts = ensemble_options()) {
    if (n < 1 || masses.size() != static_cast<std::size_t>(n))
        throw ParameterError("ensemble_statistics: masses length must equal n");
    EnsembleReport rep;
    rep.horizon = horizon;
    rep.delta_grid = delta_grid;
    rep.seed = seed;
    if (count == 0) return rep;
    if (!(horizon > 0.0)) throw ParameterError("ensemble_statistics: horizon must be positive");
    if (delta_grid.empty()) throw ParameterError("ensemble_statistics: empty delta grid");
    for (double d : delta_grid)
        if (!(d > 0.0)) throw ParameterError("ensemble_statistics: deltas must be positive");

    double delta_min = *std::min_element(delta_grid.begin(), delta_grid.end());
    opts.delta_stop = delta_min / 10.0;

    std::vector<VortexConfiguration> cfgs = sample_configurations(dom, n, count, seed);
    for (auto& cfg : cfgs) cfg.masses = masses;

    std::vector<double> min_d(count, std::numeric_limits<double>::infinity());
    std::vector<double> stop_t(count, std::numeric_limits<double>::quiet_NaN());
    std::vector<char> failed(count, 0);

    detail::run_jobs(count, [&](std::size_t i) {
        try {
            Trajectory tr = integrate(dom, cfgs[i], horizon, opts);
            min_d[i] = *std::min_element(tr.min_separation_series.begin(),
                                         tr.min_separation_series.end());
            if (tr.termination.kind == TerminationKind::CollisionEvent)
                stop_t[i] = tr.termination.time;
        } catch (const std::exception&) {
            failed[i] = 1;
        }
    });

    std::size_t ok = 0;
    for (std::size_t i = 0; i < count; ++i)
        if (!failed[i]) ++ok;
    rep.sample_count = ok;
    rep.error_count = count - ok;

    const std::size_t bins = 20;
    rep.tau_eps_histogram.assign(bins, 0);
    for (std::size_t i = 0; i < count; ++i) {
        if (failed[i] || !std::isfinite(stop_t[i])) continue;
        auto b = static_cast<std::size_t>(stop_t[i] / horizon * bins);
        rep.tau_eps_histogram[std::min(b, bins - 1)]++;
    }

    for (double delta : delta_grid) {
        std::size_t hits = 0;
        for (std::size_t i = 0; i < count; ++i)
            if (!failed[i] && min_d[i] < delta) ++hits;
        CollapseStat st;
        st.delta = delta;
        if (ok > 0) {
            double p = static_cast<double>(hits) / static_cast<double>(ok);
            double half = 1.96 * std::sqrt(std::max(p * (1.0 - p), 0.0) / static_cast<double>(ok));
            st.fraction = p;
            st.ci_low = std::max(0.0, p - half);
            st.ci_high = std::min(1.0, p + half);
        }
        rep.collapse_fraction.push_back(st);
    }
    return rep;
}

struct InequalityReport {
    double kappa = 0.0;
    std::vector<std::size_t> quadrature_levels;
    std::vector<double> diagonal_estimates;  // |h| / |x-y|^kappa, one per level
    std::vector<double> boundary_estimates;  // |h| / d(x)^kappa, one per level
    std::vector<double> epsilon_grid;
    std::vector<double> diagonal_reg;  // regularized kernels, one per epsilon
    std::vector<double> boundary_reg;
    double primitive_diagonal = 0.0;       // 1 / |x-y|^(1+kappa)
    double primitive_mixed = 0.0;          // 1 / (d(x)^kappa |x-y|)
    std::vector<double> primitive_shell;   // eps^kappa * integral over {d >= eps} of d^-(1+kappa)
    std::vector<double> phi_integrals;     // phi_eps over two-vortex states, one per epsilon
    std::string verdict = "suspect";
    std::uint64_t seed = 0;
};

namespace detail {

// Three-component mixture over pairs (x, y): both uniform, y concentrated
// near x with radial density ~ r^-kappa, or x concentrated near the boundary
// with density ~ (distance proxy)^-kappa. Combined with the balance heuristic
// so every estimator stays unbiased.
class PairSampler {
public:
    PairSampler(const DomainModel& dom, double kappa)
        : dom_(dom), kappa_(kappa), corner_(0.5 * (1.0 + kappa)), area_(domain_area(dom)) {
        Vec2 lo, hi;
        dom.bounding_box(lo, hi);
        range_ = std::hypot(hi.x - lo.x, hi.y - lo.y);
        if (dom.kind() == DomainKind::Annulus) {
            double rho = dom.rho();
            mid_ = 0.5 * (1.0 + rho);
            double so = 1.0 - mid_;
            double si = mid_ - rho;
            z_out_ = std::pow(so, 1.0 - kappa) / (1.0 - kappa) -
                     std::pow(so, 2.0 - kappa) / (2.0 - kappa);
            z_in_ = rho * std::pow(si, 1.0 - kappa) / (1.0 - kappa) +
                    std::pow(si, 2.0 - kappa) / (2.0 - kappa);
        }
    }

    double area() const { return area_; }

    void draw(Rng& rng, Vec2& x, Vec2& y, double& q) const {
        double u = rng.uniform();
        if (u < 0.25) {
            x = sample_point(dom_, rng);
            y = sample_point(dom_, rng);
        } else if (u < 0.5) {
            x = sample_point(dom_, rng);
            y = x + polar_offset(rng, range_, kappa_);
        } else if (u < 0.75) {
            x = boundary_sample(rng);
            y = sample_point(dom_, rng);
        } else {
            // Corner component: x near the boundary and y concentrated around
            // x with a steeper radial exponent. Tames pairs that are close to
            // the wall and to each other at the same time.
            x = boundary_sample(rng);
            y = x + polar_offset(rng, range_, corner_);
        }
        q = density(x, y);
    }

    double density(const Vec2& x, const Vec2& y) const {
        bool xin = dom_.contains(x);
        bool yin = dom_.contains(y);
        double q0 = (xin && yin) ? 1.0 / (area_ * area_) : 0.0;
        double r = (y - x).norm();
        double q1 = xin ? local_density(r, range_, kappa_) / area_ : 0.0;
        double qb = boundary_density(x);
        double q2 = yin ? qb / area_ : 0.0;
        double q3 = qb > 0.0 ? qb * local_density(r, range_, corner_) : 0.0;
        return (q0 + q1 + q2 + q3) / 4.0;
    }

private:
    // r distributed with density proportional to r^-lambda on (0, 1].
    double radial_pow(Rng& rng, double lambda) const {
        double u;
        do {
            u = rng.uniform();
        } while (u <= 0.0);
        return std::pow(u, 1.0 / (1.0 - lambda));
    }

    double radial_pow(Rng& rng) const { return radial_pow(rng, kappa_); }

    Vec2 polar_offset(Rng& rng, double scale, double lambda) const {
        double r = scale * radial_pow(rng, lambda);
        double th = rng.uniform(0.0, kTwoPi);
        return Vec2{r * std::cos(th), r * std::sin(th)};
    }

    // Planar density of x + polar_offset(scale, lambda) relative to x.
    double local_density(double r, double scale, double lambda) const {
        if (!(r > 0.0 && r < scale)) return 0.0;
        return (1.0 - lambda) * std::pow(r, -lambda) /
               (std::pow(scale, 1.0 - lambda) * kTwoPi * r);
    }

    Vec2 boundary_sample(Rng& rng) const {
        switch (dom_.kind()) {
            case DomainKind::Disk:
                return disk_boundary_sample(rng);
            case DomainKind::Annulus: {
                // Equal mixture of an outer band and an inner band.
                if (rng.uniform() < 0.5) {
                    double span = 1.0 - mid_;
                    for (;;) {
                        double s = span * radial_pow(rng);
                        double r = 1.0 - s;
                        if (s > 0.0 && rng.uniform() < r) {
                            double th = rng.uniform(0.0, kTwoPi);
                            return Vec2{r * std::cos(th), r * std::sin(th)};
                        }
                    }
                }
                double rho = dom_.rho();
                double span = mid_ - rho;
                for (;;) {
                    double s = span * radial_pow(rng);
                    double r = rho + s;
                    if (s > 0.0 && rng.uniform() < r) {
                        double th = rng.uniform(0.0, kTwoPi);
                        return Vec2{r * std::cos(th), r * std::sin(th)};
                    }
                }
            }
            case DomainKind::MappedSimplyConnected:
                for (;;) {
                    Vec2 w = disk_boundary_sample(rng);
                    Vec2 x = dom_.map().inverse(w);
                    if (dom_.contains(x)) return x;
                }
            default:
                throw ParameterError("boundary sampling needs a bounded domain");
        }
    }

    Vec2 disk_boundary_sample(Rng& rng) const {
        for (;;) {
            double s = radial_pow(rng);
            double r = 1.0 - s;
            if (s > 0.0 && rng.uniform() < r) {
                double th = rng.uniform(0.0, kTwoPi);
                return Vec2{r * std::cos(th), r * std::sin(th)};
            }
        }
    }

    double boundary_density(const Vec2& x) const {
        switch (dom_.kind()) {
            case DomainKind::Disk: {
                double r = x.norm();
                if (r >= 1.0) return 0.0;
                return (1.0 - kappa_) * (2.0 - kappa_) * std::pow(1.0 - r, -kappa_) / kTwoPi;
            }
            case DomainKind::Annulus: {
                double r = x.norm();
                double rho = dom_.rho();
                if (r <= rho || r >= 1.0) return 0.0;
                if (r >= mid_) return 0.5 * std::pow(1.0 - r, -kappa_) / (kTwoPi * z_out_);
                return 0.5 * std::pow(r - rho, -kappa_) / (kTwoPi * z_in_);
            }
            case DomainKind::MappedSimplyConnected: {
                if (!dom_.contains(x)) return 0.0;
                Vec2 w = dom_.map().forward(x);
                double r = w.norm();
                if (r >= 1.0) return 0.0;
                double qd = (1.0 - kappa_) * (2.0 - kappa_) * std::pow(1.0 - r, -kappa_) / kTwoPi;
                return qd * std::norm(dom_.map().deriv(x));
            }
            default:
                return 0.0;
        }
    }

    const DomainModel& dom_;
    double kappa_;
    double corner_ = 0.75;  // (1 + kappa) / 2, set in the constructor
    double area_;
    double range_ = 2.0;
    double mid_ = 0.0;
    double z_out_ = 1.0;
    double z_in_ = 1.0;
};

template <class G>
double estimate_pair_integral(const PairSampler& sampler, std::size_t n, std::uint64_t seed,
                              G&& integrand) {
    const std::size_t chunks = 64;
    std::size_t per = (n + chunks - 1) / chunks;
    std::vector<double> partial(chunks, 0.0);
    run_jobs(chunks, [&](std::size_t c) {
        Rng rng(mix_seed(seed, c));
        std::size_t lo = c * per;
        std::size_t hi = std::min(n, lo + per);
        double acc = 0.0;
        Vec2 x, y;
        double q;
        for (std::size_t i = lo; i < hi; ++i) {
            sampler.draw(rng, x, y, q);
            // Kernel intermediates can overflow when a sample lands within an
            // ulp of the wall; the weighted contribution there is negligible.
            double v = integrand(x, y);
            if (v != 0.0 && q > 0.0 && std::isfinite(v)) acc += v / q;
        }
        partial[c] = acc;
    });
    double total = 0.0;
    for (double p : partial) total += p;
    return total / static_cast<double>(n);
}

}  // namespace detail

inline InequalityReport verify_inequality_suite(const DomainModel& dom, double kappa,
                                                const std::vector<std::size_t>& levels,
                                                const std::vector<double>& epsilon_grid,
                                                std::uint64_t seed,
                                                const FunctionalParams& params = {}) {
    if (!(kappa > 0.0 && kappa < 1.0))
        throw ParameterError("verify_inequality_suite: kappa must lie in (0, 1)");
    if (levels.empty()) throw ParameterError("verify_inequality_suite: no quadrature levels");
    validate_params(params);

    InequalityReport rep;
    rep.kappa = kappa;
    rep.quadrature_levels = levels;
    rep.epsilon_grid = epsilon_grid;
    rep.seed = seed;

    detail::PairSampler sampler(dom, kappa);
    double area = sampler.area();

    auto in_pair = [&dom](const Vec2& x, const Vec2& y) {
        return dom.contains(x) && dom.contains(y) && (x - y).norm() > 0.0;
    };

    for (std::size_t li = 0; li < levels.size(); ++li) {
        std::size_t n = levels[li];
        rep.diagonal_estimates.push_back(detail::estimate_pair_integral(
            sampler, n, mix_seed(seed, 100 + li), [&](const Vec2& x, const Vec2& y) {
                if (!in_pair(x, y)) return 0.0;
                return std::abs(coupling(dom, x, y)) * std::pow((x - y).norm(), -kappa);
            }));
        rep.boundary_estimates.push_back(detail::estimate_pair_integral(
            sampler, n, mix_seed(seed, 200 + li), [&](const Vec2& x, const Vec2& y) {
                if (!in_pair(x, y)) return 0.0;
                return std::abs(coupling(dom, x, y)) * std::pow(dom.boundary_distance(x), -kappa);
            }));
    }

    std::size_t n_fine = levels.back();
    rep.primitive_diagonal = detail::estimate_pair_integral(
        sampler, n_fine, mix_seed(seed, 300), [&](const Vec2& x, const Vec2& y) {
            if (!in_pair(x, y)) return 0.0;
            return std::pow((x - y).norm(), -1.0 - kappa);
        });
    rep.primitive_mixed = detail::estimate_pair_integral(
        sampler, n_fine, mix_seed(seed, 301), [&](const Vec2& x, const Vec2& y) {
            if (!in_pair(x, y)) return 0.0;
            return std::pow(dom.boundary_distance(x), -kappa) / (x - y).norm();
        });

    for (std::size_t ei = 0; ei < epsilon_grid.size(); ++ei) {
        double eps = epsilon_grid[ei];
        RegularizedKernels kern(dom, eps);
        rep.diagonal_reg.push_back(detail::estimate_pair_integral(
            sampler, n_fine, mix_seed(seed, 400 + ei), [&](const Vec2& x, const Vec2& y) {
                if (!in_pair(x, y)) return 0.0;
                double h = grad_green_reg(kern, x, y).dot(grad_robin_reg(kern, x).perp());
                return std::abs(h) * std::pow((x - y).norm(), -kappa);
            }));
        rep.boundary_reg.push_back(detail::estimate_pair_integral(
            sampler, n_fine, mix_seed(seed, 500 + ei), [&](const Vec2& x, const Vec2& y) {
                if (!in_pair(x, y)) return 0.0;
                double h = grad_green_reg(kern, x, y).dot(grad_robin_reg(kern, x).perp());
                return std::abs(h) * std::pow(dom.boundary_distance(x), -kappa);
            }));
        rep.primitive_shell.push_back(
            std::pow(eps, kappa) *
            detail::estimate_pair_integral(
                sampler, n_fine, mix_seed(seed, 600 + ei), [&](const Vec2& x, const Vec2& y) {
                    if (!dom.contains(x) || !dom.contains(y)) return 0.0;
                    double d = dom.boundary_distance(x);
                    if (d < eps) return 0.0;
                    return std::pow(d, -1.0 - kappa) / area;
                }));
        rep.phi_integrals.push_back(detail::estimate_pair_integral(
            sampler, n_fine, mix_seed(seed, 700 + ei), [&](const Vec2& x, const Vec2& y) {
                if (!in_pair(x, y)) return 0.0;
                VortexConfiguration cfg;
                cfg.positions = {x, y};
                cfg.masses = {1.0, 1.0};
                cfg.circulations.assign(static_cast<std::size_t>(dom.hole_count()), 0.0);
                return phi_eps(kern, params, cfg);
            }));
    }

    if (levels.size() >= 2) {
        auto stable = [](const std::vector<double>& e) {
            double a = e[e.size() - 2];
            double b = e.back();
            return std::abs(b - a) < 0.05 * std::abs(b);
        };
        if (stable(rep.diagonal_estimates) && stable(rep.boundary_estimates))
            rep.verdict = "convergent";
    }
    return rep;
}

struct ConcentrationFit {
    double k = 0.0;
    std::vector<double> epsilon;
    std::vector<double> max_separation;  // over samples passing the gamma threshold
    std::vector<double> max_distance;
    double c_separation = 0.0;  // least-squares fit on log scale
    double c_distance = 0.0;
    std::size_t qualifying = 0;
};

struct PointwiseReport {
    std::size_t sample_count = 0;
    double max_gap = 0.0;                  // -2 pi robin - ln d
    double max_grad_robin_distance = 0.0;  // |grad robin| * d
    std::vector<double> max_field_coupling;  // per hole, |grad robin . beta_j|
    std::vector<ConcentrationFit> concentration;
    std::uint64_t seed = 0;
};

namespace detail {

inline Vec2 near_boundary_point(const DomainModel& dom, double s, double theta, bool inner_side) {
    switch (dom.kind()) {
        case DomainKind::Disk:
            return Vec2{(1.0 - s) * std::cos(theta), (1.0 - s) * std::sin(theta)};
        case DomainKind::ExteriorDisk:
            return Vec2{(1.0 + s) * std::cos(theta), (1.0 + s) * std::sin(theta)};
        case DomainKind::Annulus: {
            double r = inner_side ? dom.rho() + s : 1.0 - s;
            return Vec2{r * std::cos(theta), r * std::sin(theta)};
        }
        case DomainKind::MappedSimplyConnected:
            return dom.map().inverse(
                Vec2{(1.0 - s) * std::cos(theta), (1.0 - s) * std::sin(theta)});
        case DomainKind::MappedExterior:
            return dom.map().inverse(
                Vec2{(1.0 + s) * std::cos(theta), (1.0 + s) * std::sin(theta)});
    }
    throw ParameterError("near_boundary_point: unknown domain kind");
}

inline Vec2 bulk_point(const DomainModel& dom, Rng& rng) {
    if (dom.is_bounded()) return sample_point(dom, rng);
    // Unbounded domains: cover an annular collar around the obstacle instead.
    for (;;) {
        double r = std::sqrt(rng.uniform(1.0, 9.0));
        double th = rng.uniform(0.0, kTwoPi);
        Vec2 w{r * std::cos(th), r * std::sin(th)};
        Vec2 x = dom.kind() == DomainKind::ExteriorDisk ? w : dom.map().inverse(w);
        if (dom.contains(x)) return x;
    }
}

}  // namespace detail

// kernel_bias is a fault-injection hook: it offsets the Robin values before
// the sandwich check, so a nonzero bias must surface as a violation.
inline PointwiseReport verify_pointwise_bounds(const DomainModel& dom, std::size_t sample_count,
                                               std::uint64_t seed, double kernel_bias = 0.0) {
    if (sample_count < 1000)
        throw ParameterError("verify_pointwise_bounds: need at least 1000 samples");

    PointwiseReport rep;
    rep.seed = seed;
    rep.max_gap = -std::numeric_limits<double>::infinity();
    rep.max_field_coupling.assign(static_cast<std::size_t>(dom.hole_count()), 0.0);

    auto visit = [&](const Vec2& x) {
        if (!dom.contains(x)) return;
        double rb = robin(dom, x) + kernel_bias;
        double d = dom.boundary_distance(x);
        double gap = -kTwoPi * rb - std::log(d);
        if (gap < -1e-9)
            throw InvariantViolation("pointwise lower bound ln d <= -2 pi robin violated");
        rep.max_gap = std::max(rep.max_gap, gap);
        Vec2 g = grad_robin(dom, x);
        rep.max_grad_robin_distance = std::max(rep.max_grad_robin_distance, g.norm() * d);
        for (int j = 1; j <= dom.hole_count(); ++j) {
            double v = std::abs(g.dot(harmonic_field(dom, j, x)));
            auto idx = static_cast<std::size_t>(j - 1);
            rep.max_field_coupling[idx] = std::max(rep.max_field_coupling[idx], v);
        }
        rep.sample_count++;
    };

    Rng rng(mix_seed(seed, 1));
    for (std::size_t i = 0; i < sample_count; ++i) visit(detail::bulk_point(dom, rng));

    const double strata[] = {1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
    std::size_t per_stratum = std::max<std::size_t>(sample_count / 10, 200);
    for (double s : strata) {
        for (std::size_t i = 0; i < per_stratum; ++i) {
            double theta = kTwoPi * (static_cast<double>(i) + rng.uniform()) /
                           static_cast<double>(per_stratum);
            visit(detail::near_boundary_point(dom, s, theta, i % 2 == 0));
        }
    }

    // Concentration of gamma: samples with gamma above (k / 2 pi) |ln eps| - M
    // should sit within C eps^k of the boundary and of each other.
    const double big_m = 0.5;
    const std::vector<double> eps_grid = {1e-2, 1e-3, 1e-4};
    const double ks[] = {1.0, 0.5};
    std::vector<ConcentrationFit> fits;
    for (double k : ks) {
        ConcentrationFit fit;
        fit.k = k;
        fit.epsilon = eps_grid;
        fit.max_separation.assign(eps_grid.size(), 0.0);
        fit.max_distance.assign(eps_grid.size(), 0.0);
        fits.push_back(fit);
    }

    Rng prng(mix_seed(seed, 2));
    std::size_t pair_count = sample_count * 10;
    const double ln_lo = std::log(1e-7);
    const double ln_hi = std::log(0.3);
    for (std::size_t i = 0; i < pair_count; ++i) {
        double s = std::exp(prng.uniform(ln_lo, ln_hi));
        double theta = prng.uniform(0.0, kTwoPi);
        Vec2 x = detail::near_boundary_point(dom, s, theta, i % 2 == 0);
        if (!dom.contains(x)) continue;
        double off = std::exp(prng.uniform(ln_lo, ln_hi));
        double phi = prng.uniform(0.0, kTwoPi);
        Vec2 y = x + Vec2{off * std::cos(phi), off * std::sin(phi)};
        if (!dom.contains(y) || (x - y).norm() == 0.0) continue;
        double gv = gamma(dom, x, y);
        double sep = (x - y).norm();
        double dist = std::max(dom.boundary_distance(x), dom.boundary_distance(y));
        for (auto& fit : fits) {
            for (std::size_t ei = 0; ei < eps_grid.size(); ++ei) {
                double threshold = fit.k / kTwoPi * std::abs(std::log(eps_grid[ei])) - big_m;
                if (gv >= threshold) {
                    fit.max_separation[ei] = std::max(fit.max_separation[ei], sep);
                    fit.max_distance[ei] = std::max(fit.max_distance[ei], dist);
                    fit.qualifying++;
                }
            }
        }
    }

    for (auto& fit : fits) {
        double acc_sep = 0.0, acc_dist = 0.0;
        std::size_t used = 0;
        for (std::size_t ei = 0; ei < eps_grid.size(); ++ei) {
            if (fit.max_separation[ei] <= 0.0 || fit.max_distance[ei] <= 0.0) continue;
            acc_sep += std::log(fit.max_separation[ei]) - fit.k * std::log(eps_grid[ei]);
            acc_dist += std::log(fit.max_distance[ei]) - fit.k * std::log(eps_grid[ei]);
            used++;
        }
        if (used > 0) {
            fit.c_separation = std::exp(acc_sep / static_cast<double>(used));
            fit.c_distance = std::exp(acc_dist / static_cast<double>(used));
        }
        rep.concentration.push_back(fit);
    }
    return rep;
}

}  // namespace pvx
