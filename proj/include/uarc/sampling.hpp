#pragma once
// Centerline realization sampling: Gaussian perturbation of the curvature
// parameters, reconstruction over the map's own grid from its anchor, and
// acceptance of realizations whose Hausdorff distance to the estimate stays
// strictly inside the budget. Scenario selection picks the m realizations
// used by the uncertainty-aware controller.

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "uarc/centerline_map.hpp"
#include "uarc/curvature_model.hpp"
#include "uarc/estimation.hpp"
#include "uarc/geometry.hpp"
#include "uarc/rng.hpp"

namespace uarc {

enum class SelectStrategy { farthest_from_estimate, max_diversity };

struct SamplingConfig {
    double sigma_theta{0.1};        // std-dev scale on (kappa0, a_i); c_i untouched
    double center_sigma_scale{0.25};  // meters of center jitter per unit sigma_theta
    double distance_budget{0.10};   // D, m
    int n_rep{100};
    int m{10};                      // scenario count including the estimate
    std::uint64_t seed{0};
    SelectStrategy strategy{SelectStrategy::farthest_from_estimate};
};

struct ScenarioSet {
    std::vector<CurvatureModel> models;  // index 0 = the estimate itself
    PlanarPose anchor;
    std::vector<double> grid;  // shared arc grid (cumulative)
    double s_max{0.0};
    bool shortfall{false};  // fewer candidates than requested scenarios

    std::size_t size() const { return models.size(); }

    CenterlineMap reconstruct(std::size_t i) const {
        std::vector<double> steps;
        steps.reserve(grid.size() - 1);
        for (std::size_t k = 1; k < grid.size(); ++k) steps.push_back(grid[k] - grid[k - 1]);
        return CenterlineMap::build(anchor, models.at(i), steps);
    }
};

struct Candidate {
    CurvatureModel model;
    double distance{0.0};  // Hausdorff distance to the estimate polyline
};

// One perturb-reconstruct-filter pass, exactly n_rep attempts. Accepted
// candidates satisfy the strict distance test and the full parameter
// constraint set (an invalid scenario would break the curvilinear frame
// inside the controller). Deterministic per (seed, attempt index).
inline std::vector<Candidate> sample_realizations(const CenterlineMap& map,
                                                  const SamplingConfig& cfg) {
    if (map.size() < 2) throw std::invalid_argument("sample_realizations: map too short");
    const Polyline base = map.polyline();
    std::vector<double> steps;
    for (std::size_t k = 1; k < map.grid().size(); ++k)
        steps.push_back(map.grid()[k] - map.grid()[k - 1]);

    std::vector<Candidate> out;
    for (int attempt = 0; attempt < cfg.n_rep; ++attempt) {
        Rng rng = Rng::stream(cfg.seed, static_cast<std::uint64_t>(attempt));
        CurvatureModel pert = map.model();
        pert.kappa0 += cfg.sigma_theta * rng.normal();
        for (auto& sg : pert.sigmoids) {
            sg.amplitude += cfg.sigma_theta * rng.normal();
            sg.center += cfg.sigma_theta * cfg.center_sigma_scale * rng.normal();
        }
        if (!pert.check_constraints(map.length(), 0.04).ok()) continue;
        auto poses = integrate_curve(map.poses().front(),
                                     [&](double s) { return pert.evaluate(s); }, steps);
        std::vector<Vec2> pts;
        pts.reserve(poses.size());
        for (const auto& p : poses) pts.emplace_back(p.x, p.y);
        const double d = hausdorff_distance(Polyline(std::move(pts)), base);
        if (d < cfg.distance_budget) out.push_back({std::move(pert), d});
    }
    return out;
}

// Assembles the scenario set: slot 0 is always the estimate, the rest come
// from the candidates by the configured strategy. Too few candidates are
// padded with copies of the estimate and flagged.
inline ScenarioSet select_scenarios(const std::vector<Candidate>& candidates,
                                    const CenterlineMap& map, const SamplingConfig& cfg) {
    ScenarioSet set;
    set.anchor = map.poses().front();
    set.grid = map.grid();
    set.s_max = map.length();
    set.models.push_back(map.model());

    const int wanted = std::max(0, cfg.m - 1);
    std::vector<std::size_t> order(candidates.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    if (cfg.strategy == SelectStrategy::farthest_from_estimate) {
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return candidates[a].distance > candidates[b].distance;
        });
        for (int k = 0; k < wanted && k < static_cast<int>(order.size()); ++k)
            set.models.push_back(candidates[order[k]].model);
    } else {
        // greedy max-diversity: repeatedly add the candidate maximizing the
        // minimum Hausdorff distance to everything already chosen
        std::vector<Polyline> chosen_lines{map.polyline()};
        std::vector<Polyline> cand_lines;
        cand_lines.reserve(candidates.size());
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            std::vector<double> steps;
            for (std::size_t k = 1; k < set.grid.size(); ++k)
                steps.push_back(set.grid[k] - set.grid[k - 1]);
            auto poses = integrate_curve(set.anchor,
                                         [&](double s) { return candidates[i].model.evaluate(s); },
                                         steps);
            std::vector<Vec2> pts;
            for (const auto& p : poses) pts.emplace_back(p.x, p.y);
            cand_lines.emplace_back(std::move(pts));
        }
        std::vector<bool> used(candidates.size(), false);
        for (int k = 0; k < wanted && k < static_cast<int>(candidates.size()); ++k) {
            double best_score = -1.0;
            std::size_t best_i = 0;
            for (std::size_t i = 0; i < candidates.size(); ++i) {
                if (used[i]) continue;
                double min_d = std::numeric_limits<double>::infinity();
                for (const auto& line : chosen_lines)
                    min_d = std::min(min_d, hausdorff_distance(cand_lines[i], line));
                if (min_d > best_score) {
                    best_score = min_d;
                    best_i = i;
                }
            }
            used[best_i] = true;
            chosen_lines.push_back(cand_lines[best_i]);
            set.models.push_back(candidates[best_i].model);
        }
    }

    while (static_cast<int>(set.models.size()) < cfg.m) {
        set.models.push_back(map.model());
        set.shortfall = true;
    }
    return set;
}

inline ScenarioSet sample_scenarios(const CenterlineMap& map, const SamplingConfig& cfg) {
    return select_scenarios(sample_realizations(map, cfg), map, cfg);
}

}  // namespace uarc
