#pragma once
// Sigmoid-sum road curvature model
//   kappa(s) = kappa0 + sum_i a_i / (1 + exp(-c_i (s - b_i)))
// with exact derivatives, validity checking against the parameter/curvature
// constraints, and pruning of negligible terms. Immutable value type, safe to
// share across threads.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace uarc {

// One curvature transition: amplitude = change in curvature level (1/m),
// center = transition arc length (m), steepness = transition sharpness (1/m).
struct SigmoidParams {
    double amplitude{0.0};
    double center{0.0};
    double steepness{30.0};
};

struct ConstraintViolation {
    std::string constraint;  // which rule failed
    std::size_t index;       // sigmoid or grid index
    double location;         // arc length (m) where it failed, if applicable
    double value;            // offending value
};

struct ConstraintReport {
    std::vector<ConstraintViolation> violations;
    // Worst possible curvature-bound violation between grid samples,
    // |dkappa/ds|_max * step / 2. Reported alongside the grid check.
    double grid_gap_bound{0.0};
    bool ok() const { return violations.empty(); }
};

struct CurvatureGradient {
    double d_kappa0{1.0};
    std::vector<double> d_amplitude;
    std::vector<double> d_center;
    std::vector<double> d_steepness;
    double d_s{0.0};
};

namespace detail {
// Unit sigmoid with hard saturation beyond |arg| = 500 to avoid exp overflow;
// the truncation error is below representable precision long before that.
inline double unit_sigmoid(double arg) {
    if (arg < -500.0) return 0.0;
    if (arg > 500.0) return 1.0;
    return 1.0 / (1.0 + std::exp(-arg));
}
}  // namespace detail

struct CurvatureModel {
    double kappa0{0.0};
    std::vector<SigmoidParams> sigmoids;
    double kappa_min{-4.0};
    double kappa_max{4.0};

    std::size_t size() const { return sigmoids.size(); }

    double evaluate(double s) const {
        double k = kappa0;
        for (const auto& sg : sigmoids)
            k += sg.amplitude * detail::unit_sigmoid(sg.steepness * (s - sg.center));
        return k;
    }

    // d kappa / d s; closed form sum of a_i c_i sig (1 - sig).
    double evaluate_rate(double s) const {
        double r = 0.0;
        for (const auto& sg : sigmoids) {
            const double u = detail::unit_sigmoid(sg.steepness * (s - sg.center));
            r += sg.amplitude * sg.steepness * u * (1.0 - u);
        }
        return r;
    }

    CurvatureGradient gradient(double s) const {
        CurvatureGradient g;
        const std::size_t n = sigmoids.size();
        g.d_amplitude.resize(n);
        g.d_center.resize(n);
        g.d_steepness.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& sg = sigmoids[i];
            const double u = detail::unit_sigmoid(sg.steepness * (s - sg.center));
            const double bell = u * (1.0 - u);
            g.d_amplitude[i] = u;
            g.d_center[i] = -sg.amplitude * sg.steepness * bell;
            g.d_steepness[i] = sg.amplitude * (s - sg.center) * bell;
            g.d_s += sg.amplitude * sg.steepness * bell;
        }
        return g;
    }

    // Constructive bound on sup |dkappa/ds|: each sigmoid's slope peaks at
    // |a| c / 4.
    double lipschitz_bound() const {
        double b = 0.0;
        for (const auto& sg : sigmoids) b += std::abs(sg.amplitude) * sg.steepness / 4.0;
        return b;
    }

    // Checks: center ordering (strict), center nonnegativity, last center
    // within [0, length], amplitude bounds, and grid-sampled curvature bounds
    // over [0, length].
    ConstraintReport check_constraints(double length, double grid_step) const {
        ConstraintReport rep;
        for (std::size_t i = 0; i < sigmoids.size(); ++i) {
            const auto& sg = sigmoids[i];
            if (i + 1 < sigmoids.size() && !(sg.center < sigmoids[i + 1].center))
                rep.violations.push_back({"center_ordering", i, sg.center, sigmoids[i + 1].center});
            if (sg.center < 0.0)
                rep.violations.push_back({"center_nonnegative", i, sg.center, sg.center});
            if (sg.center > length)
                rep.violations.push_back({"center_within_range", i, sg.center, sg.center});
            if (sg.amplitude < kappa_min || sg.amplitude > kappa_max)
                rep.violations.push_back({"amplitude_bounds", i, sg.center, sg.amplitude});
        }
        rep.grid_gap_bound = lipschitz_bound() * grid_step / 2.0;
        std::size_t j = 0;
        for (double s = 0.0;; s += grid_step, ++j) {
            if (s > length + 1e-12) break;
            const double k = evaluate(std::min(s, length));
            if (k < kappa_min - 1e-12 || k > kappa_max + 1e-12)
                rep.violations.push_back({"curvature_bounds", j, s, k});
        }
        return rep;
    }

    // Drops sigmoids with |amplitude| < threshold; the curvature change over
    // the validity range is bounded by the sum of removed amplitudes.
    CurvatureModel prune(double amplitude_threshold) const {
        CurvatureModel out = *this;
        out.sigmoids.clear();
        for (const auto& sg : sigmoids)
            if (std::abs(sg.amplitude) >= amplitude_threshold) out.sigmoids.push_back(sg);
        return out;
    }
};

}  // namespace uarc
