#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "pvx/greens.hpp"

using namespace pvx;

namespace {

DomainModel mapped_poly() {
    return DomainModel::mapped(HolomorphicMap::polynomial({0.25, 0.0}));
}

DomainModel mapped_image() {
    return DomainModel::mapped(
        HolomorphicMap::inverse_of(HolomorphicMap::polynomial({0.25, 0.0})));
}

DomainModel mapped_exterior() {
    // 1/M(1/z) for a disk automorphism M maps an exterior domain onto the
    // exterior of the unit disk.
    auto t = HolomorphicMap::composed(
        HolomorphicMap::inversion(),
        HolomorphicMap::composed(HolomorphicMap::disk_automorphism({0.2, 0.1}),
                                 HolomorphicMap::inversion()));
    return DomainModel::mapped(t, true);
}

// An interior point away from the boundary, drawn through the domain model.
Vec2 draw_point(const DomainModel& dom, Rng& rng) {
    for (int tries = 0; tries < 10000; ++tries) {
        Vec2 p;
        switch (dom.kind()) {
            case DomainKind::Disk:
                p = rng.in_unit_disk() * 0.9;
                break;
            case DomainKind::ExteriorDisk:
                p = Vec2{0, 0} + rng.in_unit_disk() * 1.5 + Vec2{2.2, 0.0};
                break;
            case DomainKind::Annulus:
                p = rng.in_unit_disk();
                break;
            default: {
                Vec2 w = rng.in_unit_disk() * 0.9;
                if (dom.is_exterior()) w = w / w.norm2() * 0.81;
                p = dom.map().inverse(w);
                break;
            }
        }
        if (dom.contains(p) && dom.boundary_distance(p) > 0.05) return p;
    }
    throw std::runtime_error("draw_point failed");
}

std::vector<DomainModel> all_domains() {
    std::vector<DomainModel> v;
    v.push_back(DomainModel::disk());
    v.push_back(DomainModel::exterior_disk());
    v.push_back(DomainModel::annulus(0.5));
    v.push_back(mapped_poly());
    v.push_back(mapped_image());
    v.push_back(mapped_exterior());
    return v;
}

double laplacian5(const std::function<double(const Vec2&)>& f, const Vec2& x, double h) {
    return (f({x.x + h, x.y}) + f({x.x - h, x.y}) + f({x.x, x.y + h}) + f({x.x, x.y - h}) -
            4.0 * f(x)) /
           (h * h);
}

}  // namespace

TEST_CASE("disk closed forms") {
    auto disk = DomainModel::disk();
    Vec2 x{0.5, 0.0}, y{-0.5, 0.0};

    CHECK(green(disk, x, y) == Catch::Approx(-std::log(1.25) / kTwoPi).epsilon(1e-12));
    CHECK(dist(grad_green(disk, x, y), {0.6 / kTwoPi, 0.0}) < 1e-12);
    CHECK(robin(disk, x) == Catch::Approx(-std::log(0.75) / kTwoPi).epsilon(1e-12));
    CHECK(dist(grad_robin(disk, x), {0.5 / (kPi * 0.75), 0.0}) < 1e-12);
    CHECK(gamma(disk, x, y) == Catch::Approx(-std::log(1.25) / kTwoPi).epsilon(1e-12));
    CHECK(gamma(disk, x, x) == robin(disk, x));

    // Image-point form (1/2pi) ln(|x-y| / (|x - y/|y|^2| |y|)), y != 0.
    Rng rng(21);
    for (int i = 0; i < 1000; ++i) {
        Vec2 a = rng.in_unit_disk() * 0.98;
        Vec2 b = rng.in_unit_disk() * 0.98;
        if (dist(a, b) < 1e-6 || b.norm() < 1e-3) continue;
        Vec2 bi = b / b.norm2();
        double ref = (std::log(dist(a, b)) - std::log(dist(a, bi) * b.norm())) / kTwoPi;
        CHECK(std::abs(green(disk, a, b) - ref) < 1e-12);
    }

    CHECK(std::abs(green(disk, {1.0, 0.0}, y)) < 1e-12);
    CHECK_THROWS_AS(green(disk, x, x), CoincidentPoints);
    CHECK_THROWS_AS(green(disk, {1.5, 0.0}, y), DomainViolation);
}

TEST_CASE("exterior disk closed forms") {
    auto ext = DomainModel::exterior_disk();
    CHECK(green(ext, {2.0, 0.0}, {3.0, 0.0}) ==
          Catch::Approx(-std::log(5.0) / kTwoPi).epsilon(1e-12));
    CHECK(std::abs(green(ext, {1.0, 0.0}, {2.0, 0.0})) < 1e-12);
    CHECK(robin(ext, {2.0, 0.0}) == Catch::Approx(-std::log(3.0) / kTwoPi).epsilon(1e-12));
}

TEST_CASE("symmetry of the Green's function") {
    Rng rng(31);
    for (const auto& dom : all_domains()) {
        for (int i = 0; i < 100; ++i) {
            Vec2 a = draw_point(dom, rng), b = draw_point(dom, rng);
            if (dist(a, b) < 1e-3) continue;
            CHECK(std::abs(green(dom, a, b) - green(dom, b, a)) < 1e-12);
        }
    }
}

TEST_CASE("boundary vanishing") {
    auto ann = DomainModel::annulus(0.5);
    Rng rng(41);
    for (int i = 0; i < 50; ++i) {
        double th = rng.uniform(0.0, kTwoPi);
        Vec2 y = draw_point(ann, rng);
        CHECK(std::abs(green(ann, {std::cos(th), std::sin(th)}, y)) < 1e-10);
        CHECK(std::abs(green(ann, {0.5 * std::cos(th), 0.5 * std::sin(th)}, y)) < 1e-10);
    }
    for (const auto& dom : {mapped_poly(), mapped_image()}) {
        for (int i = 0; i < 50; ++i) {
            Vec2 x = dom.boundary_point(rng.uniform(0.0, kTwoPi));
            Vec2 y = draw_point(dom, rng);
            CHECK(std::abs(green(dom, x, y)) < 1e-8);
        }
    }
}

TEST_CASE("gradients agree with finite differences") {
    Rng rng(51);
    const double h = 1e-6;
    for (const auto& dom : all_domains()) {
        for (int i = 0; i < 25; ++i) {
            Vec2 a = draw_point(dom, rng), b = draw_point(dom, rng);
            if (dist(a, b) < 0.2) continue;
            auto g = [&](const Vec2& p) { return green(dom, p, b); };
            Vec2 fd{(g({a.x + h, a.y}) - g({a.x - h, a.y})) / (2 * h),
                    (g({a.x, a.y + h}) - g({a.x, a.y - h})) / (2 * h)};
            CHECK(dist(grad_green(dom, a, b), fd) < 1e-6);

            auto r = [&](const Vec2& p) { return robin(dom, p); };
            Vec2 fdr{(r({a.x + h, a.y}) - r({a.x - h, a.y})) / (2 * h),
                     (r({a.x, a.y + h}) - r({a.x, a.y - h})) / (2 * h)};
            CHECK(dist(grad_robin(dom, a), fdr) < 1e-6);

            auto gm = [&](const Vec2& p) { return gamma(dom, p, b); };
            Vec2 fdg{(gm({a.x + h, a.y}) - gm({a.x - h, a.y})) / (2 * h),
                     (gm({a.x, a.y + h}) - gm({a.x, a.y - h})) / (2 * h)};
            CHECK(dist(grad_gamma(dom, a, b), fdg) < 1e-6);
        }
    }
}

TEST_CASE("harmonicity away from the pole") {
    Rng rng(61);
    for (const auto& dom : all_domains()) {
        for (int i = 0; i < 15; ++i) {
            Vec2 a = draw_point(dom, rng), b = draw_point(dom, rng);
            if (dist(a, b) < 0.3) continue;
            auto g = [&](const Vec2& p) { return green(dom, p, b); };
            CHECK(std::abs(laplacian5(g, a, 1e-3)) < 1e-3);
            auto gm = [&](const Vec2& p) { return gamma(dom, p, b); };
            CHECK(std::abs(laplacian5(gm, a, 1e-3)) < 1e-3);
        }
    }
}

TEST_CASE("Mobius invariance in the disk") {
    auto disk = DomainModel::disk();
    Rng rng(71);
    for (int k = 0; k < 10; ++k) {
        auto m = HolomorphicMap::disk_automorphism(rng.in_unit_disk() * 0.8,
                                                   rng.uniform(0.0, kTwoPi));
        for (int i = 0; i < 100; ++i) {
            Vec2 a = rng.in_unit_disk() * 0.95, b = rng.in_unit_disk() * 0.95;
            if (dist(a, b) < 1e-3) continue;
            CHECK(std::abs(green(disk, a, b) - green(disk, m.forward(a), m.forward(b))) <
                  1e-12);
        }
    }
}

TEST_CASE("Mobius-mapped disk reproduces the disk kernels") {
    auto disk = DomainModel::disk();
    auto dom = DomainModel::mapped(HolomorphicMap::disk_automorphism({0.3, -0.2}, 0.7));
    Rng rng(81);
    for (int i = 0; i < 100; ++i) {
        Vec2 a = rng.in_unit_disk() * 0.9, b = rng.in_unit_disk() * 0.9;
        if (dist(a, b) < 1e-3) continue;
        CHECK(std::abs(green(dom, a, b) - green(disk, a, b)) < 1e-12);
        CHECK(std::abs(robin(dom, a) - robin(disk, a)) < 1e-12);
        CHECK(dist(grad_green(dom, a, b), grad_green(disk, a, b)) < 1e-11);
        CHECK(dist(grad_robin(dom, a), grad_robin(disk, a)) < 1e-11);
    }
}

TEST_CASE("regular part is continuous through the diagonal") {
    Rng rng(91);
    for (const auto& dom : all_domains()) {
        for (int i = 0; i < 20; ++i) {
            Vec2 a = draw_point(dom, rng);
            double delta = 1e-7;
            Vec2 b{a.x + delta, a.y};
            double near_diag = green(dom, a, b) - std::log(delta) / kTwoPi;
            CHECK(std::abs(near_diag - robin(dom, a)) < 1e-5);
            CHECK(std::abs(gamma(dom, a, b) - robin(dom, a)) < 1e-5);
            CHECK(dist(grad_gamma(dom, a, a), grad_robin(dom, a) * 0.5) < 1e-12);
        }
    }
}

TEST_CASE("annulus harmonic measure and field") {
    auto ann = DomainModel::annulus(0.5);
    CHECK(harmonic_measure(ann, 1, {0.5, 0.0}) == Catch::Approx(1.0).margin(1e-14));
    CHECK(harmonic_measure(ann, 1, {1.0, 0.0}) == Catch::Approx(0.0).margin(1e-14));
    CHECK(harmonic_measure(ann, 1, {0.75, 0.0}) ==
          Catch::Approx(std::log(0.75) / std::log(0.5)).epsilon(1e-14));

    Vec2 beta = harmonic_field(ann, 1, {0.75, 0.0});
    CHECK(std::abs(beta.x) < 1e-14);
    CHECK(beta.y == Catch::Approx(-1.9235933).margin(1e-6));

    Rng rng(101);
    for (int i = 0; i < 20; ++i) {
        Vec2 a = draw_point(ann, rng);
        auto w = [&](const Vec2& p) { return harmonic_measure(ann, 1, p); };
        CHECK(std::abs(laplacian5(w, a, 1e-3)) < 1e-3);
        // beta is the perpendicular gradient of w.
        double h = 1e-6;
        Vec2 gw{(w({a.x + h, a.y}) - w({a.x - h, a.y})) / (2 * h),
                (w({a.x, a.y + h}) - w({a.x, a.y - h})) / (2 * h)};
        CHECK(dist(harmonic_field(ann, 1, a), gw.perp()) < 1e-6);
    }
    // Tangent to both circles.
    for (int i = 0; i < 20; ++i) {
        double th = rng.uniform(0.0, kTwoPi);
        Vec2 outer{std::cos(th), std::sin(th)};
        CHECK(std::abs(harmonic_field(ann, 1, outer).dot(outer)) < 1e-14);
        Vec2 inner = outer * 0.5;
        CHECK(std::abs(harmonic_field(ann, 1, inner).dot(inner)) < 1e-14);
    }

    CHECK_THROWS_AS(harmonic_measure(DomainModel::disk(), 1, {0.5, 0.0}), NoSuchHole);
    CHECK_THROWS_AS(harmonic_field(ann, 2, {0.75, 0.0}), NoSuchHole);
}

TEST_CASE("disk Robin sandwich") {
    auto disk = DomainModel::disk();
    Rng rng(111);
    for (int i = 0; i < 200; ++i) {
        Vec2 a = rng.in_unit_disk() * 0.999999;
        double d = disk.boundary_distance(a);
        double v = -kTwoPi * robin(disk, a);
        CHECK(std::log(d) <= v + 1e-12);
        CHECK(v - std::log(d) <= std::log(2.0) + 1e-12);
    }
}

TEST_CASE("coupling transport identity") {
    auto disk = DomainModel::disk();
    Rng rng(121);
    for (const auto& dom : {mapped_poly(), mapped_image()}) {
        const auto& t = dom.map();
        for (int i = 0; i < 100; ++i) {
            Vec2 a = draw_point(dom, rng), b = draw_point(dom, rng);
            if (dist(a, b) < 0.05) continue;
            double lhs = coupling(dom, a, b);
            double jac = std::norm(t.deriv(a));
            Vec2 g1 = grad_green(disk, t.forward(a), t.forward(b));
            double rhs = jac * coupling(disk, t.forward(a), t.forward(b)) +
                         g1.dot(psi_correction(t, a)) / jac;
            CHECK(std::abs(lhs - rhs) < 1e-8);
        }
    }
}

TEST_CASE("coupling stays bounded near the boundary") {
    auto disk = DomainModel::disk();
    Vec2 y{0.3, 0.1};
    for (double d : {1e-2, 1e-4, 1e-6, 1e-8}) {
        Vec2 x{1.0 - d, 0.0};
        double h = coupling(disk, x, y);
        CHECK(std::isfinite(h));
        CHECK(std::abs(h) < 5.0);
    }
}
