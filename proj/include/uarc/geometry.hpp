#pragma once
// Planar curve primitives: arc-length curve integration, discrete curvature,
// point-set Hausdorff distance and small angle/segment utilities.
// All functions here are pure; no shared state.

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace uarc {

using Vec2 = Eigen::Vector2d;

// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
    double r = std::remainder(a, 2.0 * M_PI);  // in [-pi, pi]
    if (r <= -M_PI) r += 2.0 * M_PI;
    return r;
}

// Difference a - b wrapped to (-pi, pi], branch-cut safe.
inline double angle_diff(double a, double b) {
    double d = a - b;
    return std::atan2(std::sin(d), std::cos(d));
}

// Tangent angle plus position of a point on a planar curve.
struct PlanarPose {
    double alpha{0.0};  // tangent angle, rad, in (-pi, pi]
    double x{0.0};      // m
    double y{0.0};      // m

    Vec2 position() const { return Vec2(x, y); }
};

// Ordered planar point chain with cumulative arc length. Arc length between
// consecutive points is approximated by their Euclidean distance.
struct Polyline {
    std::vector<Vec2> points;
    std::vector<double> cum_arc;  // same length as points, cum_arc[0] == 0

    Polyline() = default;

    explicit Polyline(std::vector<Vec2> pts) : points(std::move(pts)) {
        cum_arc.resize(points.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (i > 0) acc += (points[i] - points[i - 1]).norm();
            cum_arc[i] = acc;
        }
    }

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
    double length() const { return cum_arc.empty() ? 0.0 : cum_arc.back(); }
};

// Position (s), signed lateral offset (eta, positive left of the tangent) and
// heading error (phi) relative to a reference curve.
struct FrenetCoord {
    double s{0.0};
    double eta{0.0};
    double phi{0.0};
};

// Integrates the planar curve ODE (alpha' = kappa, x' = cos alpha,
// y' = sin alpha) with the explicit midpoint rule:
//   alpha_{k+1} = alpha_k + kappa(s_k + dl/2) * dl
//   x/y advanced along the mean heading (alpha_k + alpha_{k+1}) / 2.
// Heading is exact for constant curvature; position error is O(dl^2).
// Returns N+1 poses for N increments, pose 0 == start, angles wrapped.
template <class KappaFn>
std::vector<PlanarPose> integrate_curve(const PlanarPose& start, KappaFn&& kappa,
                                        const std::vector<double>& steps) {
    std::vector<PlanarPose> out;
    out.reserve(steps.size() + 1);
    PlanarPose p = start;
    p.alpha = wrap_angle(p.alpha);
    out.push_back(p);
    double s = 0.0;
    for (double dl : steps) {
        if (!(dl > 0.0))
            throw std::invalid_argument("integrate_curve: nonpositive arc increment");
        const double k = kappa(s + 0.5 * dl);
        if (!std::isfinite(k))
            throw std::domain_error("integrate_curve: non-finite curvature at arc length " +
                                    std::to_string(s + 0.5 * dl));
        const double alpha_next = p.alpha + k * dl;
        const double mean = 0.5 * (p.alpha + alpha_next);
        p.x += std::cos(mean) * dl;
        p.y += std::sin(mean) * dl;
        p.alpha = wrap_angle(alpha_next);
        out.push_back(p);
        s += dl;
    }
    return out;
}

// Curvature at each point of a polyline from central finite differences of
// x(s), y(s) over (possibly nonuniform) arc length:
//   kappa = (x' y'' - y' x'') / (x'^2 + y'^2)^(3/2).
// Endpoints copy the nearest interior value.
inline std::vector<double> discrete_curvature(const Polyline& line) {
    const std::size_t n = line.size();
    if (n < 3)
        throw std::invalid_argument("discrete_curvature: need at least 3 points");
    std::vector<double> kappa(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double h1 = line.cum_arc[i] - line.cum_arc[i - 1];
        const double h2 = line.cum_arc[i + 1] - line.cum_arc[i];
        if (!(h1 > 0.0) || !(h2 > 0.0))
            throw std::invalid_argument("discrete_curvature: repeated points");
        const Vec2 d1 = (line.points[i + 1] - line.points[i - 1]) / (h1 + h2);
        const Vec2 d2 = 2.0 *
                        ((line.points[i + 1] - line.points[i]) / h2 -
                         (line.points[i] - line.points[i - 1]) / h1) /
                        (h1 + h2);
        const double speed2 = d1.squaredNorm();
        kappa[i] = (d1.x() * d2.y() - d1.y() * d2.x()) / std::pow(speed2, 1.5);
    }
    kappa[0] = kappa[1];
    kappa[n - 1] = kappa[n - 2];
    return kappa;
}

// Point-set Hausdorff distance over the polyline vertex sets. With vertex
// spacing <= 4 cm the vertex approximation is within 2 cm of the
// segment-interior metric, which is below every threshold used here.
inline double hausdorff_distance(const Polyline& a, const Polyline& b) {
    if (a.empty() || b.empty())
        throw std::invalid_argument("hausdorff_distance: empty point set");
    auto directed = [](const Polyline& from, const Polyline& to) {
        double worst = 0.0;
        for (const Vec2& p : from.points) {
            double best = std::numeric_limits<double>::infinity();
            for (const Vec2& q : to.points) {
                best = std::min(best, (p - q).squaredNorm());
                if (best == 0.0) break;
            }
            worst = std::max(worst, best);
        }
        return worst;
    };
    return std::sqrt(std::max(directed(a, b), directed(b, a)));
}

// Squared distance from point p to segment [a, b]; t_out in [0, 1] is the
// parameter of the closest point.
inline double point_segment_dist2(const Vec2& p, const Vec2& a, const Vec2& b, double* t_out = nullptr) {
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    if (t_out) *t_out = t;
    return (a + t * ab - p).squaredNorm();
}

// Distance from a point to a polyline (segment interiors included).
inline double point_polyline_distance(const Vec2& p, const Polyline& line) {
    if (line.empty())
        throw std::invalid_argument("point_polyline_distance: empty polyline");
    if (line.size() == 1) return (p - line.points[0]).norm();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < line.size(); ++i)
        best = std::min(best, point_segment_dist2(p, line.points[i], line.points[i + 1]));
    return std::sqrt(best);
}

}  // namespace uarc
