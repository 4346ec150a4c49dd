#pragma once
// Ground-truth closed circuits assembled from straights and constant-
// curvature arcs, with exact analytic geometry: pose, curvature and
// closest-point projection are all closed-form per segment. Includes the
// two built-in circuits and the extraction of local reference windows as
// centerline maps for the controller.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "uarc/centerline_map.hpp"
#include "uarc/curvature_model.hpp"
#include "uarc/geometry.hpp"

namespace uarc {

struct TrackSegment {
    double length{0.0};     // m
    double curvature{0.0};  // 1/m
};

class Track {
public:
    Track(std::vector<TrackSegment> segments, double width, PlanarPose start = PlanarPose{})
        : segments_(std::move(segments)), width_(width), start_(start) {
        poses_.push_back(start_);
        arcs_.push_back(0.0);
        for (const auto& seg : segments_) {
            poses_.push_back(advance(poses_.back(), seg, seg.length));
            arcs_.push_back(arcs_.back() + seg.length);
        }
    }

    double length() const { return arcs_.back(); }
    double width() const { return width_; }
    const PlanarPose& start_pose() const { return start_; }
    const std::vector<TrackSegment>& segments() const { return segments_; }

    double closure_error() const {
        const PlanarPose& e = poses_.back();
        return std::hypot(e.x - start_.x, e.y - start_.y);
    }

    double heading_winding() const {
        double total = 0.0;
        for (const auto& seg : segments_) total += seg.length * seg.curvature;
        return total;
    }

    double max_curvature() const {
        double k = 0.0;
        for (const auto& seg : segments_) k = std::max(k, std::abs(seg.curvature));
        return k;
    }

    double kappa_at(double s) const {
        const auto [i, local] = locate(wrap(s));
        (void)local;
        return segments_[i].curvature;
    }

    PlanarPose pose_at(double s) const {
        const auto [i, local] = locate(wrap(s));
        return advance(poses_[i], segments_[i], local);
    }

    // Exact closest-point projection onto the circuit; returns the wrapped
    // arc length and distance.
    std::pair<double, double> project(const Vec2& p) const {
        double best_d = std::numeric_limits<double>::infinity();
        double best_s = 0.0;
        for (std::size_t i = 0; i < segments_.size(); ++i) {
            const auto& seg = segments_[i];
            const PlanarPose& a = poses_[i];
            double local, d;
            if (std::abs(seg.curvature) < 1e-12) {
                const Vec2 dir(std::cos(a.alpha), std::sin(a.alpha));
                local = std::clamp((p - a.position()).dot(dir), 0.0, seg.length);
                d = (a.position() + local * dir - p).norm();
            } else {
                const double R = 1.0 / seg.curvature;
                const Vec2 center = a.position() + R * Vec2(-std::sin(a.alpha), std::cos(a.alpha));
                const Vec2 rel = p - center;
                // angle of p around the center, measured from the segment start
                const double ang0 = std::atan2(a.position().y() - center.y(),
                                               a.position().x() - center.x());
                double dang = angle_diff(std::atan2(rel.y(), rel.x()), ang0);
                if (seg.curvature < 0.0) dang = -dang;
                const double span = seg.length * std::abs(seg.curvature);
                dang = std::clamp(dang < -0.5 * (2.0 * M_PI - span) ? dang + 2.0 * M_PI : dang,
                                  0.0, span);
                local = dang / std::abs(seg.curvature);
                d = (advance(a, seg, local).position() - p).norm();
            }
            if (d < best_d) {
                best_d = d;
                best_s = arcs_[i] + local;
            }
        }
        return {wrap(best_s), best_d};
    }

    double wrap(double s) const {
        const double L = length();
        double r = std::fmod(s, L);
        if (r < 0.0) r += L;
        return r;
    }

private:
    std::pair<std::size_t, double> locate(double s) const {
        std::size_t i = 0;
        while (i + 1 < segments_.size() && arcs_[i + 1] <= s) ++i;
        return {i, s - arcs_[i]};
    }

    static PlanarPose advance(const PlanarPose& p, const TrackSegment& seg, double ds) {
        PlanarPose out;
        if (std::abs(seg.curvature) < 1e-12) {
            out.alpha = p.alpha;
            out.x = p.x + ds * std::cos(p.alpha);
            out.y = p.y + ds * std::sin(p.alpha);
        } else {
            const double R = 1.0 / seg.curvature;
            out.alpha = wrap_angle(p.alpha + seg.curvature * ds);
            out.x = p.x + R * (std::sin(p.alpha + seg.curvature * ds) - std::sin(p.alpha));
            out.y = p.y - R * (std::cos(p.alpha + seg.curvature * ds) - std::cos(p.alpha));
        }
        return out;
    }

    std::vector<TrackSegment> segments_;
    double width_;
    PlanarPose start_;
    std::vector<PlanarPose> poses_;  // segment start poses + final endpoint
    std::vector<double> arcs_;
};

// Sampled centerline with the true curvature attached per point.
struct TrackCenterline {
    Polyline line;
    std::vector<double> kappa;
    std::vector<double> arc;  // track arc of each point
};

inline TrackCenterline track_centerline(const Track& track, double spacing) {
    if (!(spacing > 0.0)) throw std::invalid_argument("track_centerline: spacing must be positive");
    if (track.closure_error() > 1e-6)
        throw std::invalid_argument("track_centerline: track does not close");
    TrackCenterline out;
    std::vector<Vec2> pts;
    const int n = static_cast<int>(std::round(track.length() / spacing));
    for (int i = 0; i < n; ++i) {
        const double s = i * track.length() / n;
        pts.push_back(track.pose_at(s).position());
        out.kappa.push_back(track.kappa_at(s + 1e-9));
        out.arc.push_back(s);
    }
    out.line = Polyline(std::move(pts));
    return out;
}

namespace detail {

// a closed circuit is two copies of a half with a net turn of pi; closure is
// then exact by point symmetry
inline std::vector<TrackSegment> mirror_closed(std::vector<TrackSegment> half) {
    double turn = 0.0;
    for (const auto& s : half) turn += s.length * s.curvature;
    if (std::abs(turn - M_PI) > 1e-9)
        throw std::logic_error("mirror_closed: half-turn must be pi");
    std::vector<TrackSegment> full = half;
    full.insert(full.end(), half.begin(), half.end());
    return full;
}

}  // namespace detail

// Built-in circuit analogues. Curvature levels 0, +-2, +-3.33 1/m, sharp
// turns and frequent transitions, lengths around 10-12 m, width 0.5 m.
inline Track track_a(double width = 0.5) {
    const double k1 = 3.33, k2 = 2.0;
    std::vector<TrackSegment> half = {
        {2.0, 0.0},
        {0.5 * M_PI / k1, k1},   // left 90
        {0.8, 0.0},
        {0.25 * M_PI / k2, -k2},  // right 45
        {0.25 * M_PI / k2, k2},   // left 45
        {0.9, 0.0},
        {0.5 * M_PI / k1, k1},   // left 90
    };
    return Track(detail::mirror_closed(std::move(half)), width);
}

inline Track track_b(double width = 0.5) {
    const double k1 = 3.33, k2 = 2.0;
    std::vector<TrackSegment> half = {
        {1.0, 0.0},
        {0.5 * M_PI / k1, k1},    // left 90
        {0.3, 0.0},
        {0.5 * M_PI / k1, -k1},   // right 90
        {0.3, 0.0},
        {0.5 * M_PI / k1, k1},    // left 90
        {0.4, 0.0},
        {0.25 * M_PI / k2, k2},   // left 45
        {0.3, 0.0},
        {0.25 * M_PI / k2, k2},   // left 45
        {0.5, 0.0},
    };
    return Track(detail::mirror_closed(std::move(half)), width);
}

inline Track track_by_name(const std::string& name, double width = 0.5) {
    if (name == "trackA" || name == "circleA" || name == "a") return track_a(width);
    if (name == "trackB" || name == "b") return track_b(width);
    if (name == "circle") {
        const double R = 0.75;
        return Track({{2.0 * M_PI * R, 1.0 / R}}, width);
    }
    throw std::invalid_argument("unknown track: " + name);
}

// Local reference window of the true track as a centerline map: curvature
// steps become steep sigmoids and the integration grid is refined around
// each transition so the reconstruction tracks the analytic geometry to
// sub-millimeter accuracy.
inline CenterlineMap track_reference_window(const Track& track, double s_start, double window_len,
                                            double steepness = 2000.0, double base_step = 0.04) {
    window_len = std::clamp(window_len, 0.2, track.length());
    CurvatureModel model;
    model.kappa_min = -4.0;
    model.kappa_max = 4.0;
    model.kappa0 = track.kappa_at(s_start + 1e-9);

    std::vector<double> transition_at;
    double prev_kappa = model.kappa0;
    // walk the segment boundaries inside the window
    double acc = 0.0;
    {
        const double L = track.length();
        double s = track.wrap(s_start);
        double remaining = window_len;
        while (remaining > 1e-12) {
            // distance to the next boundary from s
            double to_boundary = L;
            double walked = 0.0;
            for (const auto& seg : track.segments()) {
                walked += seg.length;
                const double d = walked - s;
                if (d > 1e-9) {
                    to_boundary = d;
                    break;
                }
            }
            const double hop = std::min(to_boundary, remaining);
            acc += hop;
            remaining -= hop;
            s = track.wrap(s + hop);
            if (remaining > 1e-12) {
                const double k_next = track.kappa_at(s + 1e-9);
                if (std::abs(k_next - prev_kappa) > 1e-12) {
                    transition_at.push_back(acc);
                    model.sigmoids.push_back({k_next - prev_kappa, acc, steepness});
                    prev_kappa = k_next;
                }
            }
        }
    }

    // grid: base steps plus 1 mm refinement within 3 cm of each transition
    std::vector<double> knots{0.0, window_len};
    for (double s = base_step; s < window_len; s += base_step) knots.push_back(s);
    for (double b : transition_at)
        for (double s = b - 0.03; s <= b + 0.03; s += 0.001)
            if (s > 0.0 && s < window_len) knots.push_back(s);
    std::sort(knots.begin(), knots.end());
    std::vector<double> steps;
    for (std::size_t i = 1; i < knots.size(); ++i) {
        const double d = knots[i] - knots[i - 1];
        if (d > 1e-9) steps.push_back(d);
    }

    const PlanarPose anchor = track.pose_at(s_start);
    return CenterlineMap::build(anchor, std::move(model), steps, s_start);
}

}  // namespace uarc
