#pragma once
// Synthetic forward-looking centerline sensor. Stands in for the camera
// pipeline: returns the contiguous stretch of true centerline points ahead
// of the car that falls inside the field-of-view cone, sampled at the
// configured spacing and perturbed by range-dependent truncated Gaussian
// noise. Deterministic per (seed, tick).

#include <cmath>
#include <cstdint>
#include <vector>

#include "uarc/estimation.hpp"
#include "uarc/geometry.hpp"
#include "uarc/rng.hpp"
#include "uarc/track.hpp"
#include "uarc/vehicle.hpp"

namespace uarc {

struct SensorConfig {
    double fov_half_angle{M_PI / 6.0};  // rad
    double max_range{3.5};              // m
    double min_range{0.1};              // m
    double sample_spacing{0.04};        // m along the road
    double noise_sigma0{0.002};         // m
    double noise_sigma_slope{0.005};    // m per m of range
    double noise_truncation{3.0};       // sigma multiples, on the 2D offset norm
    std::uint64_t seed{0};
};

inline Measurement sense(const CartesianState& car, const Track& track, const SensorConfig& cfg,
                         int tick) {
    Measurement out;
    out.time_index = tick;
    if (!std::isfinite(car.x) || !std::isfinite(car.y) || !std::isfinite(car.psi)) return out;

    const Vec2 eye(car.x, car.y);
    const auto [s_car, dist_to_track] = track.project(eye);
    (void)dist_to_track;

    auto visible = [&](const Vec2& p) {
        const Vec2 rel = p - eye;
        const double range = rel.norm();
        if (range < cfg.min_range || range > cfg.max_range) return false;
        return std::abs(angle_diff(std::atan2(rel.y(), rel.x()), car.psi)) <= cfg.fov_half_angle;
    };

    Rng rng = Rng::stream(cfg.seed, 0x5eed0000ULL + static_cast<std::uint64_t>(tick));
    std::vector<Vec2> pts;
    bool started = false;
    const double search_limit = std::min(track.length(), 2.5 * cfg.max_range);
    for (double u = 0.0; u <= search_limit; u += cfg.sample_spacing) {
        const Vec2 p = track.pose_at(s_car + u).position();
        if (visible(p)) {
            started = true;
            const double range = (p - eye).norm();
            const double sigma = cfg.noise_sigma0 + cfg.noise_sigma_slope * range;
            double nx = 0.0, ny = 0.0;
            for (int tries = 0; tries < 64; ++tries) {
                nx = sigma * rng.normal();
                ny = sigma * rng.normal();
                if (nx * nx + ny * ny <=
                    cfg.noise_truncation * cfg.noise_truncation * sigma * sigma)
                    break;
                nx = ny = 0.0;
            }
            pts.emplace_back(p.x() + nx, p.y() + ny);
        } else if (started) {
            break;  // keep only the contiguous visible stretch
        }
    }
    out.points = Polyline(std::move(pts));
    return out;
}

}  // namespace uarc
