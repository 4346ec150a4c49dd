#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "test_helpers.hpp"
#include "uarc/geometry.hpp"

using namespace uarc;

TEST_CASE("wrap_angle maps to (-pi, pi]") {
    CHECK(wrap_angle(0.0) == 0.0);
    CHECK(wrap_angle(M_PI) == Catch::Approx(M_PI));
    CHECK(wrap_angle(-M_PI) == Catch::Approx(M_PI));
    CHECK(wrap_angle(3.0 * M_PI) == Catch::Approx(M_PI));
    CHECK(wrap_angle(2.0 * M_PI + 0.1) == Catch::Approx(0.1));
    CHECK(wrap_angle(-2.0 * M_PI - 0.1) == Catch::Approx(-0.1));
}

TEST_CASE("integrate_curve: straight line") {
    std::vector<double> steps(10, 0.1);
    auto poses = integrate_curve(PlanarPose{0, 0, 0}, [](double) { return 0.0; }, steps);
    REQUIRE(poses.size() == 11);
    CHECK(poses.back().x == Catch::Approx(1.0).margin(1e-12));
    CHECK(poses.back().y == Catch::Approx(0.0).margin(1e-12));
    CHECK(poses.back().alpha == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("integrate_curve: empty steps returns only start") {
    auto poses = integrate_curve(PlanarPose{0.3, 1.0, 2.0}, [](double) { return 1.0; }, {});
    REQUIRE(poses.size() == 1);
    CHECK(poses[0].alpha == Catch::Approx(0.3));
    CHECK(poses[0].x == Catch::Approx(1.0));
}

TEST_CASE("integrate_curve: half circle against analytic solution") {
    // Analytic circle: x = R sin(s/R), y = R (1 - cos(s/R)). Endpoint error of
    // the midpoint rule, verified numerically: 4.44e-4 at dl = 0.04 (second
    // order; the heading itself is exact for constant curvature).
    const double R = 0.3;
    auto run = [&](double dl) {
        const double total = M_PI * R;
        int n = static_cast<int>(std::floor(total / dl));
        std::vector<double> steps(n, dl);
        const double rem = total - n * dl;
        if (rem > 1e-12) steps.push_back(rem);
        auto poses = integrate_curve(PlanarPose{0, 0, 0}, [&](double) { return 1.0 / R; }, steps);
        return poses.back();
    };
    auto p = run(0.04);
    CHECK(std::abs(p.alpha - M_PI) < 1e-12);
    CHECK(std::hypot(p.x - 0.0, p.y - 2.0 * R) < 5e-4);

    // halving the step shrinks the endpoint error by >= 3.5x
    auto p2 = run(0.02);
    const double e1 = std::hypot(p.x, p.y - 2.0 * R);
    const double e2 = std::hypot(p2.x, p2.y - 2.0 * R);
    CHECK(e1 / e2 >= 3.5);
}

TEST_CASE("integrate_curve: non-finite curvature reported with arc length") {
    std::vector<double> steps(5, 0.1);
    auto bad = [](double s) { return s > 0.25 ? std::numeric_limits<double>::quiet_NaN() : 0.0; };
    CHECK_THROWS_AS(integrate_curve(PlanarPose{}, bad, steps), std::domain_error);
}

TEST_CASE("discrete_curvature: collinear points give zero") {
    std::vector<Vec2> pts;
    for (int i = 0; i < 20; ++i) pts.emplace_back(0.05 * i, 0.02 * i);
    auto k = discrete_curvature(Polyline(pts));
    for (double v : k) CHECK(std::abs(v) < 1e-9);
}

TEST_CASE("discrete_curvature: circle R=0.3 sampled every 4 cm") {
    auto pts = oracle::circle_points(0.3, 0.04, 2.0);
    auto k = discrete_curvature(Polyline(pts));
    for (std::size_t i = 1; i + 1 < k.size(); ++i)
        CHECK(k[i] == Catch::Approx(1.0 / 0.3).margin(0.05));
}

TEST_CASE("discrete_curvature: clockwise circle has negative curvature") {
    auto pts = oracle::circle_points(0.5, 0.04, 1.5, /*ccw=*/false);
    auto k = discrete_curvature(Polyline(pts));
    CHECK(k[k.size() / 2] == Catch::Approx(-2.0).margin(0.05));
}

TEST_CASE("discrete_curvature: fewer than 3 points rejected") {
    Polyline two({Vec2(0, 0), Vec2(1, 0)});
    CHECK_THROWS_AS(discrete_curvature(two), std::invalid_argument);
}

TEST_CASE("discrete_curvature recovers smooth curvature from integrate_curve") {
    auto kappa = [](double s) { return 1.5 * std::sin(0.8 * s); };
    std::vector<double> steps(100, 0.04);
    auto poses = integrate_curve(PlanarPose{0.2, 0, 0}, kappa, steps);
    std::vector<Vec2> pts;
    for (const auto& p : poses) pts.emplace_back(p.x, p.y);
    Polyline line(pts);
    auto k = discrete_curvature(line);
    for (std::size_t i = 2; i + 2 < k.size(); ++i)
        CHECK(std::abs(k[i] - kappa(line.cum_arc[i])) < 0.05);
}

TEST_CASE("hausdorff_distance: basic values") {
    Polyline a({Vec2(0, 0), Vec2(1, 0), Vec2(2, 0)});
    CHECK(hausdorff_distance(a, a) == 0.0);

    Polyline p({Vec2(0, 0)});
    Polyline q({Vec2(3, 4)});
    CHECK(hausdorff_distance(p, q) == Catch::Approx(5.0));

    // two parallel straight polylines offset by 0.07, same s-range
    std::vector<Vec2> u, v;
    for (int i = 0; i <= 50; ++i) {
        u.emplace_back(0.04 * i, 0.0);
        v.emplace_back(0.04 * i, 0.07);
    }
    CHECK(hausdorff_distance(Polyline(u), Polyline(v)) ==
          Catch::Approx(oracle::hausdorff(u, v)).epsilon(1e-12));
    CHECK(hausdorff_distance(Polyline(u), Polyline(v)) == Catch::Approx(0.07));
}

TEST_CASE("hausdorff_distance: empty input rejected") {
    Polyline a({Vec2(0, 0)});
    CHECK_THROWS_AS(hausdorff_distance(a, Polyline{}), std::invalid_argument);
}

TEST_CASE("hausdorff_distance: matches brute-force oracle on random polylines") {
    oracle::Rng rng(42);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<Vec2> a, b;
        const int na = 1 + static_cast<int>(rng.uniform(0, 200));
        const int nb = 1 + static_cast<int>(rng.uniform(0, 200));
        for (int i = 0; i < na; ++i) a.emplace_back(rng.uniform(-2, 2), rng.uniform(-2, 2));
        for (int i = 0; i < nb; ++i) b.emplace_back(rng.uniform(-2, 2), rng.uniform(-2, 2));
        const double got = hausdorff_distance(Polyline(a), Polyline(b));
        CHECK(got == Catch::Approx(oracle::hausdorff(a, b)).margin(1e-12));
    }
}

TEST_CASE("hausdorff_distance: metric properties on random triples") {
    oracle::Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        auto mk = [&](int n) {
            std::vector<Vec2> v;
            for (int i = 0; i < n; ++i) v.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1));
            return Polyline(v);
        };
        Polyline a = mk(5 + trial), b = mk(8), c = mk(11);
        const double dab = hausdorff_distance(a, b);
        const double dba = hausdorff_distance(b, a);
        const double dac = hausdorff_distance(a, c);
        const double dcb = hausdorff_distance(c, b);
        CHECK(dab == Catch::Approx(dba).margin(1e-15));  // symmetry
        CHECK(dab >= 0.0);
        CHECK(dab <= dac + dcb + 1e-12);  // triangle inequality
        CHECK(hausdorff_distance(a, a) == 0.0);
    }
}
