#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "pvx/geometry.hpp"

namespace pvx {

enum class MapKind {
    Identity,
    DiskAutomorphism,      // z -> e^{i theta} (z - a) / (1 - conj(a) z)
    PolynomialPerturbation,  // z -> z + c z^2, |c| <= 1/2
    Inversion,             // z -> 1/z
    Composed,
    InverseOf,             // the inverse biholomorphism of a catalogue entry
};

struct MapRejected : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Region over which a map is declared valid and over which sanity sampling
// takes place. Annular with 0 inner radius for disk-like maps.
struct SampleRegion {
    double inner = 0.0;
    double outer = 1.0;

    bool contains(const Vec2& z, double slack = 1e-12) const {
        double r = z.norm();
        return r >= inner - slack && r <= outer + slack;
    }
};

// A biholomorphism with closed-form first and second derivatives, and a
// closed-form inverse for every catalogue entry.
class HolomorphicMap {
  public:
    static HolomorphicMap identity() { return HolomorphicMap(MapKind::Identity); }

    static HolomorphicMap disk_automorphism(Vec2 a, double theta = 0.0) {
        if (a.norm() >= 1.0) throw ParameterError("disk automorphism requires |a| < 1");
        HolomorphicMap m(MapKind::DiskAutomorphism);
        m.a_ = a.as_complex();
        m.theta_ = theta;
        m.region_ = {0.0, 1.0};
        return m;
    }

    // z + c z^2. Injective on the closed unit disk iff |c| <= 1/2; larger
    // coefficients are constructible so the sanity check can flag them.
    static HolomorphicMap polynomial(Vec2 c) {
        HolomorphicMap m(MapKind::PolynomialPerturbation);
        m.c_ = c.as_complex();
        m.region_ = {0.0, 1.0};
        return m;
    }

    static HolomorphicMap inversion() {
        HolomorphicMap m(MapKind::Inversion);
        m.region_ = {1.0, 3.0};
        return m;
    }

    static HolomorphicMap composed(HolomorphicMap outer, HolomorphicMap inner) {
        HolomorphicMap m(MapKind::Composed);
        m.region_ = inner.region_;
        m.outer_ = std::make_shared<HolomorphicMap>(std::move(outer));
        m.inner_ = std::make_shared<HolomorphicMap>(std::move(inner));
        return m;
    }

    // T = S^{-1} for a catalogue entry S; derivatives follow from the
    // inverse-function rule, so the wrapped map must have closed-form
    // inverse everywhere it is used.
    static HolomorphicMap inverse_of(HolomorphicMap s) {
        HolomorphicMap m(MapKind::InverseOf);
        // Image region is not annular in general; the sanity check delegates
        // to the wrapped map.
        m.region_ = s.region_;
        m.inner_ = std::make_shared<HolomorphicMap>(std::move(s));
        return m;
    }

    MapKind kind() const { return kind_; }
    const SampleRegion& sample_region() const { return region_; }

    bool in_domain(const Vec2& z) const {
        switch (kind_) {
            case MapKind::Identity:
                return true;
            case MapKind::DiskAutomorphism: {
                double lim = std::abs(a_) > 0 ? 1.0 / std::abs(a_) : 1e300;
                return z.norm() < lim * (1.0 - 1e-12) + 1e-9;
            }
            case MapKind::PolynomialPerturbation: {
                double lim = std::abs(c_) > 0 ? 0.5 / std::abs(c_) : 1e300;
                return z.norm() < lim + 1e-9;
            }
            case MapKind::Inversion:
                return z.norm() > 1e-12;
            case MapKind::Composed:
                return inner_->in_domain(z) && outer_->in_domain(inner_->forward_unchecked(z));
            case MapKind::InverseOf: {
                // Accept z when the wrapped map's inverse lands back on z.
                try {
                    Vec2 w = inner_->inverse(z);
                    if (!inner_->in_domain(w)) return false;
                    return dist(inner_->forward_unchecked(w), z) <= 1e-9 * (1.0 + z.norm());
                } catch (const std::exception&) {
                    return false;
                }
            }
        }
        return false;
    }

    Vec2 forward(const Vec2& z) const {
        require(z);
        return forward_unchecked(z);
    }

    Complex deriv(const Vec2& z) const {
        require(z);
        return deriv_unchecked(z);
    }

    Complex second_deriv(const Vec2& z) const {
        require(z);
        return second_deriv_unchecked(z);
    }

    Vec2 inverse(const Vec2& w) const {
        Complex v = w.as_complex();
        switch (kind_) {
            case MapKind::Identity:
                return w;
            case MapKind::DiskAutomorphism: {
                Complex u = v * std::exp(Complex(0.0, -theta_));
                return Vec2((u + a_) / (1.0 + std::conj(a_) * u));
            }
            case MapKind::PolynomialPerturbation: {
                if (std::abs(c_) == 0.0) return w;
                // Root of c z^2 + z - w = 0 on the branch through z = w at c = 0.
                Complex s = std::sqrt(1.0 + 4.0 * c_ * v);
                return Vec2((s - 1.0) / (2.0 * c_));
            }
            case MapKind::Inversion:
                if (std::abs(v) < 1e-300) throw DomainViolation("inversion of 0");
                return Vec2(1.0 / v);
            case MapKind::Composed:
                return inner_->inverse(outer_->inverse(w));
            case MapKind::InverseOf:
                return inner_->forward(w);
        }
        throw std::logic_error("unreachable");
    }

    Vec2 forward_unchecked(const Vec2& z) const {
        Complex v = z.as_complex();
        switch (kind_) {
            case MapKind::Identity:
                return z;
            case MapKind::DiskAutomorphism:
                return Vec2(std::exp(Complex(0.0, theta_)) * (v - a_) /
                            (1.0 - std::conj(a_) * v));
            case MapKind::PolynomialPerturbation:
                return Vec2(v + c_ * v * v);
            case MapKind::Inversion:
                return Vec2(1.0 / v);
            case MapKind::Composed:
                return outer_->forward_unchecked(inner_->forward_unchecked(z));
            case MapKind::InverseOf:
                return inner_->inverse(z);
        }
        throw std::logic_error("unreachable");
    }

    Complex deriv_unchecked(const Vec2& z) const {
        Complex v = z.as_complex();
        switch (kind_) {
            case MapKind::Identity:
                return 1.0;
            case MapKind::DiskAutomorphism: {
                Complex d = 1.0 - std::conj(a_) * v;
                return std::exp(Complex(0.0, theta_)) * (1.0 - std::norm(a_)) / (d * d);
            }
            case MapKind::PolynomialPerturbation:
                return 1.0 + 2.0 * c_ * v;
            case MapKind::Inversion:
                return -1.0 / (v * v);
            case MapKind::Composed: {
                Vec2 w = inner_->forward_unchecked(z);
                return outer_->deriv_unchecked(w) * inner_->deriv_unchecked(z);
            }
            case MapKind::InverseOf:
                return 1.0 / inner_->deriv_unchecked(inner_->inverse(z));
        }
        throw std::logic_error("unreachable");
    }

    Complex second_deriv_unchecked(const Vec2& z) const {
        Complex v = z.as_complex();
        switch (kind_) {
            case MapKind::Identity:
                return 0.0;
            case MapKind::DiskAutomorphism: {
                Complex d = 1.0 - std::conj(a_) * v;
                return std::exp(Complex(0.0, theta_)) * 2.0 * std::conj(a_) *
                       (1.0 - std::norm(a_)) / (d * d * d);
            }
            case MapKind::PolynomialPerturbation:
                return 2.0 * c_;
            case MapKind::Inversion:
                return 2.0 / (v * v * v);
            case MapKind::Composed: {
                Vec2 w = inner_->forward_unchecked(z);
                Complex di = inner_->deriv_unchecked(z);
                return outer_->second_deriv_unchecked(w) * di * di +
                       outer_->deriv_unchecked(w) * inner_->second_deriv_unchecked(z);
            }
            case MapKind::InverseOf: {
                Vec2 w = inner_->inverse(z);
                Complex sp = inner_->deriv_unchecked(w);
                return -inner_->second_deriv_unchecked(w) / (sp * sp * sp);
            }
        }
        throw std::logic_error("unreachable");
    }

    const HolomorphicMap* outer() const { return outer_.get(); }
    const HolomorphicMap* inner() const { return inner_.get(); }
    Complex mobius_center() const { return a_; }
    double mobius_rotation() const { return theta_; }
    Complex polynomial_coeff() const { return c_; }

  private:
    explicit HolomorphicMap(MapKind kind) : kind_(kind) {}

    void require(const Vec2& z) const {
        if (!in_domain(z)) throw DomainViolation("point outside the map's declared domain");
    }

    MapKind kind_;
    Complex a_{0.0, 0.0};
    double theta_ = 0.0;
    Complex c_{0.0, 0.0};
    SampleRegion region_{0.0, 1.0};
    std::shared_ptr<const HolomorphicMap> outer_;
    std::shared_ptr<const HolomorphicMap> inner_;
};

// Gradient of f composed with T at z, given g = grad f at T(z).
inline Vec2 pullback_gradient(const HolomorphicMap& map, const Vec2& z, const Vec2& g) {
    Complex tp = map.deriv(z);
    double t1 = tp.real(), t2 = tp.imag();
    return {t1 * g.x + t2 * g.y, -t2 * g.x + t1 * g.y};
}

// The bounded residual vector that appears when the Green-Robin coupling is
// transported through a conformal map.
inline Vec2 psi_correction(const HolomorphicMap& map, const Vec2& z) {
    Complex tp = map.deriv(z);
    Complex tpp = map.second_deriv(z);
    double t1 = tp.real(), t2 = tp.imag();
    double s1 = tpp.real(), s2 = tpp.imag();
    double inv2pi = 1.0 / kTwoPi;
    return {inv2pi * (-2.0 * t1 * t2 * s1 + (t1 * t1 - t2 * t2) * s2),
            inv2pi * ((t1 * t1 - t2 * t2) * s1 + 2.0 * t1 * t2 * s2)};
}

struct MapSanityReport {
    double m_lower = 0.0;        // inf |T'| over samples
    double M_upper = 0.0;        // sup of |T'| and |T''|
    double cr_residual_max = 0.0;
    int injectivity_violations = 0;

    bool accepted() const { return m_lower > 0.0 && injectivity_violations == 0; }
};

inline MapSanityReport map_sanity_report(const HolomorphicMap& map, int sample_count,
                                         std::uint64_t seed) {
    if (sample_count < 100) throw ParameterError("map sanity check needs >= 100 samples");
    if (map.kind() == MapKind::InverseOf) {
        // The image region is not annular; sample the wrapped direction, whose
        // conformality and injectivity are equivalent.
        return map_sanity_report(*map.inner(), sample_count, seed);
    }
    const SampleRegion& reg = map.sample_region();
    Rng rng(seed);

    std::vector<Vec2> pts;
    pts.reserve(static_cast<std::size_t>(sample_count));
    // Closure samples: interior draws plus boundary rings.
    int boundary = sample_count / 5;
    for (int i = 0; i < sample_count - boundary; ++i) {
        double r = std::sqrt(rng.uniform(reg.inner * reg.inner, reg.outer * reg.outer));
        double th = rng.uniform(0.0, kTwoPi);
        pts.push_back({r * std::cos(th), r * std::sin(th)});
    }
    for (int i = 0; i < boundary; ++i) {
        double th = rng.uniform(0.0, kTwoPi);
        double r = (i % 2 == 0 || reg.inner == 0.0) ? reg.outer : reg.inner;
        if (r == 0.0) r = reg.outer;
        pts.push_back({r * std::cos(th), r * std::sin(th)});
    }

    MapSanityReport rep;
    rep.m_lower = std::numeric_limits<double>::infinity();
    for (const Vec2& p : pts) {
        Complex tp = map.deriv_unchecked(p);
        Complex tpp = map.second_deriv_unchecked(p);
        rep.m_lower = std::min(rep.m_lower, std::abs(tp));
        rep.M_upper = std::max({rep.M_upper, std::abs(tp), std::abs(tpp)});
    }

    // Cauchy-Riemann residual by central differences at interior points.
    const double h = 1e-6;
    int checked = 0;
    for (const Vec2& p : pts) {
        double r = p.norm();
        if (r > reg.outer - 10 * h || (reg.inner > 0 && r < reg.inner + 10 * h)) continue;
        Vec2 fx1 = map.forward_unchecked({p.x + h, p.y});
        Vec2 fx0 = map.forward_unchecked({p.x - h, p.y});
        Vec2 fy1 = map.forward_unchecked({p.x, p.y + h});
        Vec2 fy0 = map.forward_unchecked({p.x, p.y - h});
        double d1t1 = (fx1.x - fx0.x) / (2 * h), d1t2 = (fx1.y - fx0.y) / (2 * h);
        double d2t1 = (fy1.x - fy0.x) / (2 * h), d2t2 = (fy1.y - fy0.y) / (2 * h);
        double scale = 1.0 + std::abs(map.deriv_unchecked(p));
        double res = std::max(std::abs(d1t1 - d2t2), std::abs(d1t2 + d2t1)) / scale;
        rep.cr_residual_max = std::max(rep.cr_residual_max, res);
        if (++checked >= 500) break;
    }

    // Pairwise collision scan. An injective conformal map on a compact closure
    // keeps |T(a)-T(b)| / |a-b| above inf |T'| along some path; a collapse of
    // the ratio flags non-injectivity.
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            double dz = dist(pts[i], pts[j]);
            if (dz < 1e-9) continue;
            double dw = dist(map.forward_unchecked(pts[i]), map.forward_unchecked(pts[j]));
            if (dw < 0.05 * dz) ++rep.injectivity_violations;
        }
    }
    return rep;
}

inline void require_sane_map(const HolomorphicMap& map, int sample_count = 500,
                             std::uint64_t seed = 1u) {
    MapSanityReport rep = map_sanity_report(map, sample_count, seed);
    if (!rep.accepted()) throw MapRejected("map failed the sanity check");
}

}  // namespace pvx
