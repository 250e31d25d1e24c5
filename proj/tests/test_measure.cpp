#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>

#include "pvx/measure.hpp"

using namespace pvx;

TEST_CASE("uniform disk samples have the right second moment") {
    DomainModel disk = DomainModel::disk();
    auto cfgs = sample_configurations(disk, 1, 100000, 42);
    double acc = 0.0;
    for (const auto& c : cfgs) acc += c.positions[0].dot(c.positions[0]);
    double mean = acc / static_cast<double>(cfgs.size());
    // Var(|x|^2) = 1/12 for the uniform unit disk, so 3 sigma of the mean
    // is about 0.0027.
    CHECK(std::abs(mean - 0.5) < 0.003);
    for (const auto& c : cfgs) REQUIRE(disk.contains(c.positions[0]));
}

TEST_CASE("annulus occupies three quarters of the unit disk") {
    DomainModel ann = DomainModel::annulus(0.5);
    Rng rng(7);
    int hits = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i)
        if (ann.contains(rng.in_unit_disk())) ++hits;
    double rate = static_cast<double>(hits) / n;
    CHECK(std::abs(rate - 0.75) < 0.01);
}

TEST_CASE("sampling is deterministic in the seed") {
    DomainModel ann = DomainModel::annulus(0.4);
    auto a = sample_configurations(ann, 3, 25, 123);
    auto b = sample_configurations(ann, 3, 25, 123);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (int k = 0; k < 3; ++k) {
            CHECK(a[i].positions[k].x == b[i].positions[k].x);
            CHECK(a[i].positions[k].y == b[i].positions[k].y);
        }
    auto c = sample_configurations(ann, 3, 25, 124);
    CHECK(c[0].positions[0].x != a[0].positions[0].x);
}

TEST_CASE("sampling rejects bad arguments and unbounded domains") {
    DomainModel disk = DomainModel::disk();
    CHECK_THROWS_AS(sample_configurations(disk, 0, 5, 1), ParameterError);
    CHECK_THROWS_AS(sample_configurations(disk, 1, 0, 1), ParameterError);
    DomainModel ext = DomainModel::exterior_disk();
    CHECK_THROWS_AS(sample_configurations(ext, 1, 5, 1), ParameterError);
}

TEST_CASE("domain area matches closed forms") {
    CHECK(domain_area(DomainModel::disk()) == Catch::Approx(kPi));
    CHECK(domain_area(DomainModel::annulus(0.5)) == Catch::Approx(kPi * 0.75));
    // Omega = S(D) with S(z) = z + c z^2 has area pi (1 + 2 |c|^2).
    DomainModel mapped =
        DomainModel::mapped(HolomorphicMap::inverse_of(HolomorphicMap::polynomial({0.25, 0.0})));
    CHECK(domain_area(mapped) == Catch::Approx(kPi * 1.125).epsilon(1e-6));
}

TEST_CASE("single vortex never approaches the wall") {
    DomainModel disk = DomainModel::disk();
    std::uint64_t seed = 11;
    std::size_t count = 40;
    auto cfgs = sample_configurations(disk, 1, count, seed);
    double dmin = 1e300;
    for (const auto& c : cfgs) dmin = std::min(dmin, disk.boundary_distance(c.positions[0]));
    double delta = 0.9 * dmin;
    auto rep = ensemble_statistics(disk, 1, {1.0}, count, 1.0, {delta}, seed);
    REQUIRE(rep.sample_count == count);
    CHECK(rep.error_count == 0);
    REQUIRE(rep.collapse_fraction.size() == 1);
    CHECK(rep.collapse_fraction[0].fraction == 0.0);
}

TEST_CASE("collapse fractions are monotone in delta") {
    DomainModel disk = DomainModel::disk();
    auto rep =
        ensemble_statistics(disk, 2, {1.0, 1.0}, 200, 2.0, {1e-1, 3e-2, 1e-2, 3e-3}, 99);
    REQUIRE(rep.collapse_fraction.size() == 4);
    for (std::size_t i = 1; i < 4; ++i)
        CHECK(rep.collapse_fraction[i].fraction <= rep.collapse_fraction[i - 1].fraction);
    for (const auto& st : rep.collapse_fraction) {
        CHECK(st.fraction >= st.ci_low);
        CHECK(st.fraction <= st.ci_high);
        CHECK(st.ci_high <= 1.0);
        CHECK(st.ci_low >= 0.0);
    }
}

TEST_CASE("empty ensemble yields an empty report") {
    DomainModel disk = DomainModel::disk();
    auto rep = ensemble_statistics(disk, 2, {1.0, 1.0}, 0, 1.0, {1e-2}, 5);
    CHECK(rep.sample_count == 0);
    CHECK(rep.collapse_fraction.empty());
    CHECK(rep.tau_eps_histogram.empty());
}

TEST_CASE("ensemble results do not depend on the worker count") {
    DomainModel disk = DomainModel::disk();
    setenv("PVX_WORKERS", "1", 1);
    auto a = ensemble_statistics(disk, 2, {1.0, 1.0}, 60, 1.0, {3e-2, 1e-2}, 77);
    setenv("PVX_WORKERS", "4", 1);
    auto b = ensemble_statistics(disk, 2, {1.0, 1.0}, 60, 1.0, {3e-2, 1e-2}, 77);
    unsetenv("PVX_WORKERS");
    REQUIRE(a.collapse_fraction.size() == b.collapse_fraction.size());
    for (std::size_t i = 0; i < a.collapse_fraction.size(); ++i)
        CHECK(a.collapse_fraction[i].fraction == b.collapse_fraction[i].fraction);
    CHECK(a.tau_eps_histogram == b.tau_eps_histogram);
}

TEST_CASE("kappa at or above one is rejected") {
    DomainModel disk = DomainModel::disk();
    CHECK_THROWS_AS(verify_inequality_suite(disk, 1.0, {1000}, {}, 1), ParameterError);
    CHECK_THROWS_AS(verify_inequality_suite(disk, 1.5, {1000}, {}, 1), ParameterError);
    CHECK_THROWS_AS(verify_inequality_suite(disk, 0.0, {1000}, {}, 1), ParameterError);
}

TEST_CASE("coupling integrals stabilize on the disk") {
    DomainModel disk = DomainModel::disk();
    auto rep = verify_inequality_suite(disk, 0.5, {80000, 320000, 1280000},
                                       {1e-2, 1e-3, 1e-4}, 31);
    CHECK(rep.verdict == "convergent");
    REQUIRE(rep.diagonal_estimates.size() == 3);
    for (double e : rep.diagonal_estimates) CHECK(e > 0.0);
    for (double e : rep.boundary_estimates) CHECK(e > 0.0);
    CHECK(rep.primitive_diagonal > 0.0);
    CHECK(rep.primitive_mixed > 0.0);

    // Regularized variants stay within a factor of two across the grid.
    REQUIRE(rep.diagonal_reg.size() == 3);
    auto spread = [](const std::vector<double>& v) {
        double lo = *std::min_element(v.begin(), v.end());
        double hi = *std::max_element(v.begin(), v.end());
        return hi / lo;
    };
    CHECK(spread(rep.diagonal_reg) < 2.0);
    CHECK(spread(rep.boundary_reg) < 2.0);
    CHECK(spread(rep.phi_integrals) < 2.0);
    for (double s : rep.primitive_shell) CHECK(s > 0.0);
}

TEST_CASE("exact primitive on the disk: shell integral scaling") {
    // integral over {d >= eps} of d^{-3/2} = 2 pi int_0^{1-eps} (1-r)^{-3/2} r dr,
    // whose eps^{1/2}-scaled value tends to 4 pi.
    DomainModel disk = DomainModel::disk();
    auto rep = verify_inequality_suite(disk, 0.5, {200000}, {1e-3}, 8);
    REQUIRE(rep.primitive_shell.size() == 1);
    double eps = 1e-3;
    // Substituting s = 1 - r: 2 pi int_eps^1 s^{-3/2} (1 - s) ds.
    double exact = kTwoPi * (2.0 / std::sqrt(eps) - 4.0 + 2.0 * std::sqrt(eps));
    CHECK(rep.primitive_shell[0] == Catch::Approx(std::sqrt(eps) * exact).epsilon(0.1));
}

TEST_CASE("pointwise bounds hold on the disk") {
    DomainModel disk = DomainModel::disk();
    auto rep = verify_pointwise_bounds(disk, 2000, 3);
    CHECK(rep.sample_count >= 2000);
    // Gap is ln(1 + |x|) on the disk, at most ln 2.
    CHECK(rep.max_gap <= std::log(2.0) + 1e-9);
    CHECK(rep.max_gap > 0.5);
    CHECK(rep.max_grad_robin_distance <= 1.0 / kTwoPi + 1e-6);
    CHECK(rep.max_field_coupling.empty());
    REQUIRE(rep.concentration.size() == 2);
    for (const auto& fit : rep.concentration) {
        CHECK(fit.qualifying > 0);
        CHECK(fit.c_separation > 0.0);
        CHECK(fit.c_distance > 0.0);
        for (std::size_t ei = 0; ei < fit.epsilon.size(); ++ei) {
            double scale = fit.c_separation * std::pow(fit.epsilon[ei], fit.k);
            CHECK(fit.max_separation[ei] <= 10.0 * scale);
            CHECK(fit.max_separation[ei] >= 0.1 * scale);
        }
    }
}

TEST_CASE("pointwise bounds hold on the annulus and exterior") {
    DomainModel ann = DomainModel::annulus(0.5);
    auto rep = verify_pointwise_bounds(ann, 1500, 4);
    CHECK(rep.max_gap > 0.0);
    REQUIRE(rep.max_field_coupling.size() == 1);
    CHECK(rep.max_field_coupling[0] > 0.0);
    CHECK(rep.max_field_coupling[0] < 100.0);

    DomainModel ext = DomainModel::exterior_disk();
    auto erep = verify_pointwise_bounds(ext, 1000, 5);
    CHECK(erep.sample_count >= 1000);
    CHECK(std::isfinite(erep.max_gap));
}

TEST_CASE("pointwise bounds hold on a mapped domain") {
    DomainModel dom =
        DomainModel::mapped(HolomorphicMap::inverse_of(HolomorphicMap::polynomial({0.2, 0.0})));
    auto rep = verify_pointwise_bounds(dom, 1000, 6);
    CHECK(rep.sample_count >= 1000);
    CHECK(std::isfinite(rep.max_gap));
    CHECK(rep.max_grad_robin_distance < 1.0);
}

TEST_CASE("pointwise verification needs a minimum sample budget") {
    DomainModel disk = DomainModel::disk();
    CHECK_THROWS_AS(verify_pointwise_bounds(disk, 999, 1), ParameterError);
}
