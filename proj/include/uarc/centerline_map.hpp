#pragma once
// Centerline map: ordered (alpha, x, y) reconstruction on an arc-length grid,
// always generated from its own curvature model through curve integration,
// plus closest-point projection and the curvilinear <-> Cartesian state
// conversions against it.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "uarc/curvature_model.hpp"
#include "uarc/geometry.hpp"
#include "uarc/vehicle.hpp"

namespace uarc {

class CenterlineMap {
public:
    CenterlineMap() = default;

    // The only way to build a map: integrate the model from the anchor over
    // the given arc-length increments. Keeps the reconstruction and the model
    // consistent by construction.
    static CenterlineMap build(const PlanarPose& anchor, CurvatureModel model,
                               const std::vector<double>& steps, double s_origin = 0.0) {
        CenterlineMap m;
        m.model_ = std::move(model);
        m.s_origin_ = s_origin;
        m.poses_ = integrate_curve(anchor, [&](double s) { return m.model_.evaluate(s); }, steps);
        m.cum_arc_.resize(m.poses_.size());
        m.cum_arc_[0] = 0.0;
        for (std::size_t i = 0; i < steps.size(); ++i) m.cum_arc_[i + 1] = m.cum_arc_[i] + steps[i];
        return m;
    }

    const std::vector<PlanarPose>& poses() const { return poses_; }
    const std::vector<double>& grid() const { return cum_arc_; }
    const CurvatureModel& model() const { return model_; }
    double s_origin() const { return s_origin_; }
    double length() const { return cum_arc_.empty() ? 0.0 : cum_arc_.back(); }
    std::size_t size() const { return poses_.size(); }
    bool empty() const { return poses_.empty(); }

    double kappa_at(double s) const { return model_.evaluate(s); }

    Polyline polyline() const {
        std::vector<Vec2> pts;
        pts.reserve(poses_.size());
        for (const auto& p : poses_) pts.emplace_back(p.x, p.y);
        return Polyline(std::move(pts));
    }

    // Linearly interpolated pose at arc length s in [0, length].
    PlanarPose pose_at(double s) const {
        require_range(s);
        const auto [i, t] = locate(s);
        const PlanarPose& a = poses_[i];
        const PlanarPose& b = poses_[i + 1];
        PlanarPose p;
        p.x = a.x + t * (b.x - a.x);
        p.y = a.y + t * (b.y - a.y);
        p.alpha = wrap_angle(a.alpha + t * angle_diff(b.alpha, a.alpha));
        return p;
    }

    // Closest-point projection of a world point: coarse scan over the grid
    // segments, then Newton on the tangent-orthogonality residual
    // h(s) = (c - gamma(s)) . t(alpha(s)), at most 10 iterations.
    FrenetCoord project(const Vec2& c) const {
        if (size() < 2) throw std::invalid_argument("CenterlineMap::project: map too short");

        const std::size_t nseg = poses_.size() - 1;
        std::vector<double> seg_d2(nseg), seg_s(nseg);
        std::size_t best_i = 0;
        for (std::size_t i = 0; i < nseg; ++i) {
            double t;
            const Vec2 a(poses_[i].x, poses_[i].y), b(poses_[i + 1].x, poses_[i + 1].y);
            seg_d2[i] = point_segment_dist2(c, a, b, &t);
            seg_s[i] = cum_arc_[i] + t * (cum_arc_[i + 1] - cum_arc_[i]);
            if (seg_d2[i] < seg_d2[best_i]) best_i = i;
        }
        const double best_s0 = seg_s[best_i];
        double rival_d2 = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < nseg; ++i)
            if (std::abs(seg_s[i] - best_s0) > ambiguity_sep_) rival_d2 = std::min(rival_d2, seg_d2[i]);
        if (std::isfinite(rival_d2) &&
            std::sqrt(rival_d2) - std::sqrt(seg_d2[best_i]) < ambiguity_tol_)
            throw std::domain_error("CenterlineMap::project: ambiguous projection");

        double s = best_s0;
        for (int it = 0; it < 10; ++it) {
            const auto [i, t] = locate(s);
            const double h_len = cum_arc_[i + 1] - cum_arc_[i];
            const Vec2 a(poses_[i].x, poses_[i].y), b(poses_[i + 1].x, poses_[i + 1].y);
            const Vec2 gamma = a + t * (b - a);
            const Vec2 dgamma = (b - a) / h_len;
            const double dalpha = angle_diff(poses_[i + 1].alpha, poses_[i].alpha) / h_len;
            const double alpha = poses_[i].alpha + t * h_len * dalpha;
            const Vec2 tan(std::cos(alpha), std::sin(alpha));
            const Vec2 nrm(-std::sin(alpha), std::cos(alpha));
            const Vec2 res = c - gamma;
            const double h = res.dot(tan);
            if (std::abs(h) < 1e-12) break;
            const double dh = -dgamma.dot(tan) + res.dot(nrm) * dalpha;
            if (dh == 0.0) break;
            s = std::clamp(s - h / dh, 0.0, length());
        }

        const auto [i, t] = locate(s);
        const Vec2 a(poses_[i].x, poses_[i].y), b(poses_[i + 1].x, poses_[i + 1].y);
        const Vec2 gamma = a + t * (b - a);
        const double alpha =
            poses_[i].alpha + t * angle_diff(poses_[i + 1].alpha, poses_[i].alpha);
        FrenetCoord f;
        f.s = s;
        f.eta = (c - gamma).dot(Vec2(-std::sin(alpha), std::cos(alpha)));
        f.phi = 0.0;
        const double ek = f.eta * model_.evaluate(s);
        if (std::abs(ek) >= 1.0)
            throw std::domain_error("CenterlineMap::project: outside curvilinear validity tube");
        return f;
    }

    friend FrenetState cartesian_to_frenet(const CartesianState& x, const CenterlineMap& map);
    friend CartesianState frenet_to_cartesian(const FrenetState& x, const CenterlineMap& map);

private:
    std::pair<std::size_t, double> locate(double s) const {
        const auto it = std::upper_bound(cum_arc_.begin(), cum_arc_.end(), s);
        std::size_t i = it == cum_arc_.begin() ? 0 : (it - cum_arc_.begin()) - 1;
        if (i + 1 >= cum_arc_.size()) i = cum_arc_.size() - 2;
        const double h = cum_arc_[i + 1] - cum_arc_[i];
        return {i, std::clamp((s - cum_arc_[i]) / h, 0.0, 1.0)};
    }

    void require_range(double s) const {
        if (size() < 2 || s < -1e-12 || s > length() + 1e-12)
            throw std::out_of_range("CenterlineMap: arc length outside map");
    }

    std::vector<PlanarPose> poses_;
    std::vector<double> cum_arc_;
    CurvatureModel model_;
    double s_origin_{0.0};
    static constexpr double ambiguity_tol_ = 1e-3;   // m, distance tie
    static constexpr double ambiguity_sep_ = 0.5;    // m, arc separation of competing minima
};

inline CartesianState frenet_to_cartesian(const FrenetState& x, const CenterlineMap& map) {
    const PlanarPose ref = map.pose_at(x.s);
    CartesianState c;
    c.x = ref.x - x.eta * std::sin(ref.alpha);
    c.y = ref.y + x.eta * std::cos(ref.alpha);
    c.psi = wrap_angle(x.phi + ref.alpha);
    c.vx = x.vx;
    c.vy = x.vy;
    c.r = x.r;
    c.delta = x.delta;
    c.tau = x.tau;
    return c;
}

inline FrenetState cartesian_to_frenet(const CartesianState& x, const CenterlineMap& map) {
    const FrenetCoord f = map.project(Vec2(x.x, x.y));
    const PlanarPose ref = map.pose_at(f.s);
    FrenetState out;
    out.s = f.s;
    out.eta = f.eta;
    out.phi = angle_diff(x.psi, ref.alpha);
    out.vx = x.vx;
    out.vy = x.vy;
    out.r = x.r;
    out.delta = x.delta;
    out.tau = x.tau;
    return out;
}

}  // namespace uarc
