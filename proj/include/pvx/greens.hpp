#pragma once

#include <cmath>

#include "pvx/domain.hpp"
#include "pvx/geometry.hpp"

namespace pvx {

struct NoSuchHole : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Free-space kernel (1/2pi) ln|x-y| and its x-gradient.
inline double green_free(const Vec2& x, const Vec2& y) {
    double r = dist(x, y);
    if (r == 0.0) throw CoincidentPoints("free-space kernel at coincident points");
    return std::log(r) / kTwoPi;
}

inline Vec2 grad_green_free(const Vec2& x, const Vec2& y) {
    Vec2 d = x - y;
    double r2 = d.norm2();
    if (r2 == 0.0) throw CoincidentPoints("free-space kernel at coincident points");
    return d / (kTwoPi * r2);
}

namespace detail {

// Kernels of the unit disk; the exterior of the disk shares the same
// expressions. |x - y^*||y| is evaluated as |x conj(y) - 1|, which is smooth
// through y = 0.
inline double disk_green(const Vec2& x, const Vec2& y) {
    Complex zx = x.as_complex(), zy = y.as_complex();
    double num = std::abs(zx - zy);
    if (num == 0.0) throw CoincidentPoints("Green's function at coincident points");
    return (std::log(num) - std::log(std::abs(zx * std::conj(zy) - 1.0))) / kTwoPi;
}

inline double disk_gamma(const Vec2& x, const Vec2& y) {
    Complex zx = x.as_complex(), zy = y.as_complex();
    return -std::log(std::abs(zx * std::conj(zy) - 1.0)) / kTwoPi;
}

inline double disk_robin(const Vec2& x) {
    return -std::log(std::abs(x.norm2() - 1.0)) / kTwoPi;
}

inline Vec2 disk_grad_gamma(const Vec2& x, const Vec2& y) {
    Complex zx = x.as_complex(), zy = y.as_complex();
    // grad_x of -(1/2pi) ln|x conj(y) - 1|
    Complex logderiv = std::conj(zy) / (zx * std::conj(zy) - 1.0);
    return holo_grad(logderiv) * (-1.0 / kTwoPi);
}

inline Vec2 disk_grad_green(const Vec2& x, const Vec2& y) {
    return grad_green_free(x, y) + disk_grad_gamma(x, y);
}

inline Vec2 disk_grad_robin(const Vec2& x) {
    return x / (kPi * (1.0 - x.norm2()));
}

// Annulus rho < |z| < 1. The Green's function is assembled from the
// convergent product
//   P(zeta) = (1 - zeta) prod_{k>=1} (1 - rho^{2k} zeta)(1 - rho^{2k}/zeta)
// as
//   G(z,w) = (1/2pi) [ ln|P(z/w)| - ln|P(z conj(w))| + ln|w|
//                      - ln|z| ln|w| / ln rho ],
// which vanishes on both circles and is symmetric. Truncation keeps every
// factor with rho^{2k} >= 1e-16.
struct AnnulusKernel {
    double rho;
    double log_rho;
    int terms;
    double log_s1;  // ln prod (1-rho^{2k})^2

    explicit AnnulusKernel(double rho_) : rho(rho_), log_rho(std::log(rho_)) {
        terms = 1;
        double q = rho * rho;
        double qk = q;
        log_s1 = 0.0;
        while (qk >= 1e-16 && terms < 10000) {
            log_s1 += 2.0 * std::log1p(-qk);
            qk *= q;
            ++terms;
        }
    }

    double log_abs_p(const Complex& zeta) const {
        double acc = std::log(std::abs(1.0 - zeta));
        double q = rho * rho;
        double qk = q;
        for (int k = 1; k < terms; ++k) {
            acc += std::log(std::abs(1.0 - qk * zeta));
            acc += std::log(std::abs(1.0 - qk / zeta));
            qk *= q;
        }
        return acc;
    }

    // ln|P(zeta)| - ln|1 - zeta|, finite at zeta = 1.
    double log_abs_s(const Complex& zeta) const {
        return log_abs_p(zeta) - std::log(std::abs(1.0 - zeta));
    }

    Complex logderiv_p(const Complex& zeta) const {
        Complex acc = -1.0 / (1.0 - zeta);
        double q = rho * rho;
        double qk = q;
        for (int k = 1; k < terms; ++k) {
            acc += -qk / (1.0 - qk * zeta);
            acc += qk / (zeta * (zeta - qk));
            qk *= q;
        }
        return acc;
    }

    // P'(zeta)/P(zeta) without the (1 - zeta) factor.
    Complex logderiv_s(const Complex& zeta) const {
        return logderiv_p(zeta) + 1.0 / (1.0 - zeta);
    }

    double green(const Vec2& x, const Vec2& y) const {
        Complex z = x.as_complex(), w = y.as_complex();
        if (z == w) throw CoincidentPoints("Green's function at coincident points");
        double lz = std::log(std::abs(z)), lw = std::log(std::abs(w));
        return (log_abs_p(z / w) - log_abs_p(z * std::conj(w)) + lw - lz * lw / log_rho) /
               kTwoPi;
    }

    Vec2 grad_green(const Vec2& x, const Vec2& y) const {
        Complex z = x.as_complex(), w = y.as_complex();
        double lw = std::log(std::abs(w));
        Complex t = logderiv_p(z / w) / w - std::conj(w) * logderiv_p(z * std::conj(w));
        Vec2 g = holo_grad(t);
        g += x * (-lw / (log_rho * x.norm2()));
        return g / kTwoPi;
    }

    // Regular part; the ln|x-y| singularity cancels analytically on the
    // diagonal (see robin).
    double gamma(const Vec2& x, const Vec2& y) const {
        if (x.x == y.x && x.y == y.y) return robin(x);
        return green(x, y) - green_free(x, y);
    }

    double robin(const Vec2& x) const {
        double r2 = x.norm2();
        double lr = 0.5 * std::log(r2);
        return (log_s1 - log_abs_p(Complex(r2, 0.0)) - lr * lr / log_rho) / kTwoPi;
    }

    Vec2 grad_robin(const Vec2& x) const {
        double r2 = x.norm2();
        double r = std::sqrt(r2);
        double lr = std::log(r);
        double dp = logderiv_p(Complex(r2, 0.0)).real();
        double ddr = (-dp * 2.0 * r - 2.0 * lr / (r * log_rho)) / kTwoPi;
        return x * (ddr / r);
    }
};

}  // namespace detail

// Dirichlet Green's function of the domain. Defined on the closure; vanishes
// when either argument is on the boundary.
inline double green(const DomainModel& dom, const Vec2& x, const Vec2& y) {
    if (!dom.in_closure(x) || !dom.in_closure(y))
        throw DomainViolation("green: point outside the domain closure");
    switch (dom.kind()) {
        case DomainKind::Disk:
        case DomainKind::ExteriorDisk:
            return detail::disk_green(x, y);
        case DomainKind::MappedSimplyConnected:
        case DomainKind::MappedExterior:
            return detail::disk_green(dom.map().forward(x), dom.map().forward(y));
        case DomainKind::Annulus:
            return detail::AnnulusKernel(dom.rho()).green(x, y);
    }
    throw std::logic_error("unreachable");
}

inline Vec2 grad_green(const DomainModel& dom, const Vec2& x, const Vec2& y) {
    if (!dom.in_closure(x) || !dom.in_closure(y))
        throw DomainViolation("grad_green: point outside the domain closure");
    switch (dom.kind()) {
        case DomainKind::Disk:
        case DomainKind::ExteriorDisk:
            return detail::disk_grad_green(x, y);
        case DomainKind::MappedSimplyConnected:
        case DomainKind::MappedExterior: {
            Vec2 g = detail::disk_grad_green(dom.map().forward(x), dom.map().forward(y));
            return pullback_gradient(dom.map(), x, g);
        }
        case DomainKind::Annulus:
            return detail::AnnulusKernel(dom.rho()).grad_green(x, y);
    }
    throw std::logic_error("unreachable");
}

// Regular part of the Green's function; continuous through x = y where it
// equals the Robin function.
inline double gamma(const DomainModel& dom, const Vec2& x, const Vec2& y);
inline double robin(const DomainModel& dom, const Vec2& x);

inline double robin(const DomainModel& dom, const Vec2& x) {
    if (!dom.in_closure(x)) throw DomainViolation("robin: point outside the domain closure");
    switch (dom.kind()) {
        case DomainKind::Disk:
        case DomainKind::ExteriorDisk:
            return detail::disk_robin(x);
        case DomainKind::MappedSimplyConnected:
        case DomainKind::MappedExterior: {
            double base = detail::disk_robin(dom.map().forward(x));
            return base + std::log(std::abs(dom.map().deriv_unchecked(x))) / kTwoPi;
        }
        case DomainKind::Annulus:
            return detail::AnnulusKernel(dom.rho()).robin(x);
    }
    throw std::logic_error("unreachable");
}

inline double gamma(const DomainModel& dom, const Vec2& x, const Vec2& y) {
    if (!dom.in_closure(x) || !dom.in_closure(y))
        throw DomainViolation("gamma: point outside the domain closure");
    if (x.x == y.x && x.y == y.y) return robin(dom, x);
    switch (dom.kind()) {
        case DomainKind::Disk:
        case DomainKind::ExteriorDisk:
            return detail::disk_gamma(x, y);
        case DomainKind::MappedSimplyConnected:
        case DomainKind::MappedExterior: {
            Vec2 tx = dom.map().forward(x), ty = dom.map().forward(y);
            return detail::disk_gamma(tx, ty) +
                   (std::log(dist(tx, ty)) - std::log(dist(x, y))) / kTwoPi;
        }
        case DomainKind::Annulus:
            return detail::AnnulusKernel(dom.rho()).gamma(x, y);
    }
    throw std::logic_error("unreachable");
}

inline Vec2 grad_robin(const DomainModel& dom, const Vec2& x) {
    if (!dom.in_closure(x))
        throw DomainViolation("grad_robin: point outside the domain closure");
    switch (dom.kind()) {
        case DomainKind::Disk:
        case DomainKind::ExteriorDisk:
            return detail::disk_grad_robin(x);
        case DomainKind::MappedSimplyConnected:
        case DomainKind::MappedExterior: {
            Vec2 g = pullback_gradient(dom.map(), x,
                                       detail::disk_grad_robin(dom.map().forward(x)));
            Complex tp = dom.map().deriv_unchecked(x);
            Complex tpp = dom.map().second_deriv_unchecked(x);
            return g + holo_grad(tpp / tp) / kTwoPi;
        }
        case DomainKind::Annulus:
            return detail::AnnulusKernel(dom.rho()).grad_robin(x);
    }
    throw std::logic_error("unreachable");
}

// x-gradient of the regular part. Defined on the diagonal, where the symmetry
// of gamma gives grad_x gamma(x,x) = (1/2) grad robin(x).
inline Vec2 grad_gamma(const DomainModel& dom, const Vec2& x, const Vec2& y) {
    if (x.x == y.x && x.y == y.y) return grad_robin(dom, x) * 0.5;
    switch (dom.kind()) {
        case DomainKind::Disk:
        case DomainKind::ExteriorDisk:
            return detail::disk_grad_gamma(x, y);
        default:
            return grad_green(dom, x, y) - grad_green_free(x, y);
    }
}

inline void require_hole(const DomainModel& dom, int j) {
    if (dom.hole_count() == 0 || j < 1 || j > dom.hole_count())
        throw NoSuchHole("domain has no hole with that index");
}

// Harmonic measure of the j-th hole (annulus: w_1 = ln|x| / ln rho).
inline double harmonic_measure(const DomainModel& dom, int j, const Vec2& x) {
    require_hole(dom, j);
    return std::log(x.norm()) / std::log(dom.rho());
}

// Harmonic vector field beta_j = perp-gradient of w_j.
inline Vec2 harmonic_field(const DomainModel& dom, int j, const Vec2& x) {
    require_hole(dom, j);
    return x.perp() / (x.norm2() * std::log(dom.rho()));
}

// h(x,y) = grad_x G(x,y) . perp-grad robin(x), the coupling whose weighted
// integrals stay finite up to the boundary.
inline double coupling(const DomainModel& dom, const Vec2& x, const Vec2& y) {
    return grad_green(dom, x, y).dot(grad_robin(dom, x).perp());
}

}  // namespace pvx
