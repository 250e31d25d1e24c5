#pragma once

#include <algorithm>
#include <limits>
#include <memory>
#include <vector>

#include "pvx/conformal.hpp"
#include "pvx/geometry.hpp"

namespace pvx {

enum class DomainKind {
    Disk,
    ExteriorDisk,
    MappedSimplyConnected,  // T maps the domain onto the unit disk
    MappedExterior,         // T maps the domain onto the exterior of the disk
    Annulus,                // rho < |z| < 1
};

inline const char* to_string(DomainKind k) {
    switch (k) {
        case DomainKind::Disk: return "disk";
        case DomainKind::ExteriorDisk: return "exterior_disk";
        case DomainKind::MappedSimplyConnected: return "mapped_simply_connected";
        case DomainKind::MappedExterior: return "mapped_exterior";
        case DomainKind::Annulus: return "annulus";
    }
    return "?";
}

struct BoundaryNormal {
    Vec2 value;
    bool degenerate = false;
};

// A closed description of the fluid domain. Immutable after construction;
// mapped kinds carry a map that passed its sanity check, plus a cached
// discretization of the boundary for distance queries.
class DomainModel {
  public:
    static DomainModel disk() { return DomainModel(DomainKind::Disk); }

    static DomainModel exterior_disk() { return DomainModel(DomainKind::ExteriorDisk); }

    static DomainModel annulus(double rho) {
        if (!(rho > 0.0 && rho < 1.0)) throw ParameterError("annulus requires 0 < rho < 1");
        DomainModel d(DomainKind::Annulus);
        d.rho_ = rho;
        return d;
    }

    static DomainModel mapped(HolomorphicMap map, bool exterior = false) {
        require_sane_map(map);
        DomainModel d(exterior ? DomainKind::MappedExterior
                               : DomainKind::MappedSimplyConnected);
        d.map_ = std::make_shared<HolomorphicMap>(std::move(map));
        d.boundary_ = std::make_shared<std::vector<Vec2>>(trace_boundary(*d.map_));
        return d;
    }

    DomainKind kind() const { return kind_; }
    double rho() const { return rho_; }
    int hole_count() const { return kind_ == DomainKind::Annulus ? 1 : 0; }
    const HolomorphicMap& map() const { return *map_; }
    bool is_mapped() const {
        return kind_ == DomainKind::MappedSimplyConnected ||
               kind_ == DomainKind::MappedExterior;
    }
    bool is_exterior() const {
        return kind_ == DomainKind::ExteriorDisk || kind_ == DomainKind::MappedExterior;
    }
    bool is_bounded() const { return !is_exterior(); }

    bool contains(const Vec2& x) const {
        switch (kind_) {
            case DomainKind::Disk:
                return x.norm() < 1.0;
            case DomainKind::ExteriorDisk:
                return x.norm() > 1.0;
            case DomainKind::Annulus: {
                double r = x.norm();
                return r > rho_ && r < 1.0;
            }
            case DomainKind::MappedSimplyConnected:
                return map_->in_domain(x) && map_->forward_unchecked(x).norm() < 1.0;
            case DomainKind::MappedExterior:
                return map_->in_domain(x) && map_->forward_unchecked(x).norm() > 1.0;
        }
        return false;
    }

    bool in_closure(const Vec2& x, double tol = 1e-9) const {
        if (contains(x)) return true;
        return boundary_distance(x) <= tol;
    }

    void require_interior(const Vec2& x) const {
        if (!contains(x)) throw DomainViolation("point outside the domain");
    }

    // Distance to the full boundary. Closed form for circular boundaries,
    // discretized boundary with golden-section refinement for mapped kinds.
    double boundary_distance(const Vec2& x) const {
        switch (kind_) {
            case DomainKind::Disk:
                return std::abs(1.0 - x.norm());
            case DomainKind::ExteriorDisk:
                return std::abs(x.norm() - 1.0);
            case DomainKind::Annulus:
                return std::min(std::abs(1.0 - x.norm()), std::abs(x.norm() - rho_));
            case DomainKind::MappedSimplyConnected:
            case DomainKind::MappedExterior:
                return mapped_boundary_distance(x);
        }
        return 0.0;
    }

    // Extended exterior-normal field. Unit length on the true boundary.
    BoundaryNormal boundary_normal(const Vec2& x) const {
        switch (kind_) {
            case DomainKind::Disk:
                return {x, x.norm() < 1e-14};
            case DomainKind::ExteriorDisk:
                return {-x, false};
            case DomainKind::Annulus: {
                // Field of the nearest circle; outer uses the disk extension,
                // inner the exterior-of-disk extension rescaled to unit length
                // on |x| = rho.
                double r = x.norm();
                if (1.0 - r <= r - rho_) return {x, false};
                return {-x / rho_, false};
            }
            case DomainKind::MappedSimplyConnected:
            case DomainKind::MappedExterior: {
                Vec2 w = map_->forward(x);
                Vec2 n = (kind_ == DomainKind::MappedSimplyConnected) ? w : -w;
                Complex tp = map_->deriv_unchecked(x);
                double t1 = tp.real(), t2 = tp.imag();
                double mag = std::abs(tp);
                Vec2 val{(t1 * n.x + t2 * n.y) / mag, (t1 * n.y - t2 * n.x) / mag};
                return {val, n.norm() < 1e-14};
            }
        }
        return {{0, 0}, true};
    }

    // A point of the boundary at parameter theta (angle in the model disk).
    Vec2 boundary_point(double theta) const {
        Vec2 e{std::cos(theta), std::sin(theta)};
        switch (kind_) {
            case DomainKind::Disk:
            case DomainKind::ExteriorDisk:
            case DomainKind::Annulus:
                return e;
            default:
                return map_->inverse(e);
        }
    }

    // Axis-aligned bounding box of the closure (bounded kinds only).
    void bounding_box(Vec2& lo, Vec2& hi) const {
        if (is_exterior()) throw ParameterError("exterior domains are unbounded");
        if (!is_mapped()) {
            lo = {-1.0, -1.0};
            hi = {1.0, 1.0};
            return;
        }
        lo = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
        hi = {-lo.x, -lo.y};
        for (const Vec2& p : *boundary_) {
            lo.x = std::min(lo.x, p.x);
            lo.y = std::min(lo.y, p.y);
            hi.x = std::max(hi.x, p.x);
            hi.y = std::max(hi.y, p.y);
        }
    }

  private:
    explicit DomainModel(DomainKind kind) : kind_(kind) {}

    static std::vector<Vec2> trace_boundary(const HolomorphicMap& map) {
        const int n = 1024;
        std::vector<Vec2> pts;
        pts.reserve(n);
        for (int i = 0; i < n; ++i) {
            double th = kTwoPi * i / n;
            pts.push_back(map.inverse({std::cos(th), std::sin(th)}));
        }
        return pts;
    }

    double mapped_boundary_distance(const Vec2& x) const {
        const std::vector<Vec2>& b = *boundary_;
        const int n = static_cast<int>(b.size());
        int best = 0;
        double bestd = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
            double d = dist(x, b[i]);
            if (d < bestd) {
                bestd = d;
                best = i;
            }
        }
        // Golden-section refinement of theta -> |x - T^{-1}(e^{i theta})|
        // around the best discrete sample.
        auto f = [&](double th) { return dist(x, map_->inverse({std::cos(th), std::sin(th)})); };
        double step = kTwoPi / n;
        double a = step * (best - 1), c = step * (best + 1);
        const double g = 0.6180339887498949;
        double x1 = c - g * (c - a), x2 = a + g * (c - a);
        double f1 = f(x1), f2 = f(x2);
        for (int it = 0; it < 60 && (c - a) > 1e-13; ++it) {
            if (f1 < f2) {
                c = x2;
                x2 = x1;
                f2 = f1;
                x1 = c - g * (c - a);
                f1 = f(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + g * (c - a);
                f2 = f(x2);
            }
        }
        return std::min(bestd, std::min(f1, f2));
    }

    DomainKind kind_;
    double rho_ = 0.0;
    std::shared_ptr<const HolomorphicMap> map_;
    std::shared_ptr<const std::vector<Vec2>> boundary_;
};

}  // namespace pvx
