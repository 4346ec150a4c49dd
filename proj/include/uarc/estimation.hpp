#pragma once
// Optimization-based centerline estimation. Fits the sigmoid-sum curvature
// model to ordered centerline points by nonlinear least squares on the
// integrated curve, subject to the parameter/curvature constraints; updates
// an existing map against new measurements behind an overlap gate.
//
// Solver: Gauss-Newton with Levenberg damping inside an augmented-Lagrangian
// outer loop for the inequality constraints. Map points are eliminated
// through the curve-integration recursion, so the free variables are only
// (alpha0, kappa0, amplitudes, centers); equivalent to posing the map points
// as decision variables with equality constraints, but far smaller. All of
// it is deterministic; there is no RNG anywhere in this module.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "uarc/centerline_map.hpp"
#include "uarc/curvature_model.hpp"
#include "uarc/geometry.hpp"
#include "uarc/vehicle.hpp"

namespace uarc {

// Ordered centerline points observed at one time step, world frame.
struct Measurement {
    Polyline points;
    int time_index{0};
};

struct SolverConfig {
    double stationarity_tol{1e-6};
    double constraint_tol{1e-8};
    int max_outer_iters{50};
    int max_inner_iters{200};
};

struct EstimatorConfig {
    double delta_lambda{0.04};      // subsample spacing, m
    double kappa_min{-4.0};         // 1/m
    double kappa_max{4.0};          // 1/m
    double map_length_cap{3.5};     // m
    double overlap_dist{0.06};      // d_max for point correspondence, m
    int min_overlap_points{30};
    int min_new_points{30};
    double c_fixed{30.0};           // sigmoid steepness, 1/m
    double reg_weight{0.0};         // L1 weight on curvature levels; off by default
    double change_threshold{0.8};   // |mean jump| that counts as a transition, 1/m
    int detect_window{5};           // samples per windowed mean
    int max_sigmoids{12};
    // with initialization disabled only the sigmoid count survives from the
    // detector; levels and positions start from scratch
    bool init_enabled{true};
    SolverConfig solver;
};

struct OverlapReport {
    bool overlap{false};
    std::size_t map_first{0}, map_last{0};    // matched index range in the map
    std::size_t meas_first{0}, meas_last{0};  // matched index range in the measurement
    int matched{0};
    int new_points{0};
};

struct FitDiagnostics {
    int outer_iters{0};
    int inner_iters{0};
    double objective{0.0};
    double kkt_residual{0.0};
    double constraint_violation{0.0};
    std::vector<double> merit_history;  // exact-penalty merit per accepted outer iterate
    bool converged{false};
};

struct FitResult {
    CenterlineMap map;
    FitDiagnostics diag;
};

enum class EstimationStatus { initial, updated, unchanged_no_overlap, unchanged_failed, insufficient_data };

struct EstimationResult {
    CenterlineMap map;
    EstimationStatus status{EstimationStatus::initial};
    FitDiagnostics diag;
    OverlapReport overlap;
};

// Greedy subsampling: keep the first point, then repeatedly the point whose
// arc distance from the last kept one is closest to `spacing` (never below
// half of it unless nothing denser exists).
inline Polyline subsample(const Polyline& points, double spacing) {
    if (points.empty()) throw std::invalid_argument("subsample: empty input");
    if (!(spacing > 0.0)) throw std::invalid_argument("subsample: spacing must be positive");
    std::vector<Vec2> kept;
    kept.push_back(points.points[0]);
    std::size_t i = 0;
    while (i + 1 < points.size()) {
        std::size_t j = i + 1;
        while (j < points.size() && points.cum_arc[j] - points.cum_arc[i] < spacing) ++j;
        std::size_t pick;
        if (j == points.size()) {
            // tail shorter than the target spacing: keep the final point so
            // the full extent survives, then stop
            pick = points.size() - 1;
            if (points.cum_arc[pick] - points.cum_arc[i] <= 1e-12) break;
        } else {
            pick = j;
            if (j - 1 > i) {
                const double over = points.cum_arc[j] - points.cum_arc[i] - spacing;
                const double under = spacing - (points.cum_arc[j - 1] - points.cum_arc[i]);
                if (under < over && points.cum_arc[j - 1] - points.cum_arc[i] >= 0.5 * spacing)
                    pick = j - 1;
            }
        }
        kept.push_back(points.points[pick]);
        i = pick;
        if (pick == points.size() - 1) break;
    }
    return Polyline(std::move(kept));
}

// Transition detection by thresholding windowed means of the discrete
// curvature: a transition is a local maximum of |after-mean - before-mean|
// exceeding the change threshold. Returns a constraint-satisfying model with
// at least one sigmoid (zero amplitude mid-range when no change is found).
inline CurvatureModel initialize_model(const Polyline& points, const EstimatorConfig& cfg) {
    if (points.size() < 3) throw std::invalid_argument("initialize_model: need at least 3 points");
    const std::vector<double> kappa = discrete_curvature(points);
    const std::size_t n = kappa.size();
    const double length = points.length();
    const int W = std::max(2, cfg.detect_window);

    CurvatureModel model;
    model.kappa_min = cfg.kappa_min;
    model.kappa_max = cfg.kappa_max;

    std::vector<std::size_t> boundaries;
    if (n > static_cast<std::size_t>(2 * W)) {
        std::vector<double> jump(n, 0.0);
        for (std::size_t i = W; i + W <= n; ++i) {
            double before = 0.0, after = 0.0;
            for (int k = 1; k <= W; ++k) {
                before += kappa[i - k];
                after += kappa[i + k - 1];
            }
            jump[i] = (after - before) / W;
        }
        for (std::size_t i = W; i + W <= n; ++i) {
            if (std::abs(jump[i]) <= cfg.change_threshold) continue;
            bool is_peak = true;
            for (int k = -W; k <= W; ++k) {
                const std::size_t j = i + k;
                if (j < n && std::abs(jump[j]) > std::abs(jump[i])) is_peak = false;
            }
            if (!is_peak) continue;
            if (!boundaries.empty() && i - boundaries.back() < static_cast<std::size_t>(2 * W))
                continue;
            boundaries.push_back(i);
            if (boundaries.size() >= static_cast<std::size_t>(cfg.max_sigmoids)) break;
        }
    }

    // segment means between boundaries set the level sequence
    std::vector<double> seg_mean;
    std::size_t start = 0;
    for (std::size_t b : boundaries) {
        double acc = 0.0;
        for (std::size_t k = start; k < b; ++k) acc += kappa[k];
        seg_mean.push_back(acc / std::max<std::size_t>(1, b - start));
        start = b;
    }
    {
        double acc = 0.0;
        for (std::size_t k = start; k < n; ++k) acc += kappa[k];
        seg_mean.push_back(acc / std::max<std::size_t>(1, n - start));
    }

    if (cfg.init_enabled) {
        model.kappa0 = std::clamp(seg_mean[0], cfg.kappa_min, cfg.kappa_max);
        for (std::size_t j = 0; j < boundaries.size(); ++j) {
            SigmoidParams sg;
            sg.amplitude = std::clamp(seg_mean[j + 1] - seg_mean[j], cfg.kappa_min, cfg.kappa_max);
            sg.center = points.cum_arc[boundaries[j]];
            sg.steepness = cfg.c_fixed;
            model.sigmoids.push_back(sg);
        }
    } else {
        model.kappa0 = 0.0;
        const std::size_t n_sig = std::max<std::size_t>(1, boundaries.size());
        for (std::size_t j = 0; j < n_sig; ++j)
            model.sigmoids.push_back(
                {0.0, (j + 1) * length / static_cast<double>(n_sig + 1), cfg.c_fixed});
    }
    if (model.sigmoids.empty())
        model.sigmoids.push_back({0.0, 0.5 * length, cfg.c_fixed});

    // repair pass: clamp centers into range, enforce strict ordering, shrink
    // amplitudes until the grid-sampled curvature respects the bounds
    for (auto& sg : model.sigmoids) sg.center = std::clamp(sg.center, 0.0, length);
    for (std::size_t j = 1; j < model.sigmoids.size(); ++j)
        if (model.sigmoids[j].center <= model.sigmoids[j - 1].center)
            model.sigmoids[j].center = model.sigmoids[j - 1].center + 1e-3;
    for (int guard = 0; guard < 200; ++guard) {
        if (model.check_constraints(length, cfg.delta_lambda).ok()) break;
        for (auto& sg : model.sigmoids) sg.amplitude *= 0.95;
        model.kappa0 = std::clamp(model.kappa0, cfg.kappa_min, cfg.kappa_max);
    }
    return model;
}

namespace detail {

// Least-squares fit of (alpha0, kappa0, a_i, b_i) to target points reached by
// integrating the curvature model over a fixed arc grid from a pinned anchor.
class SigmoidFit {
public:
    SigmoidFit(const Polyline& targets, CurvatureModel warm, double alpha0_warm,
               const EstimatorConfig& cfg)
        : targets_(targets), cfg_(cfg), model_(std::move(warm)) {
        if (targets_.size() < 2) throw std::invalid_argument("SigmoidFit: need at least 2 points");
        n_ = model_.sigmoids.size();
        dim_ = 2 + 2 * n_;
        length_ = targets_.length();
        z_.resize(dim_);
        z_[0] = alpha0_warm;
        z_[1] = model_.kappa0;
        for (std::size_t i = 0; i < n_; ++i) {
            z_[2 + i] = model_.sigmoids[i].amplitude;
            z_[2 + n_ + i] = model_.sigmoids[i].center;
        }
        // inequality multipliers: ordering (n-1), grid upper, grid lower
        const std::size_t g = targets_.size();
        mu_.assign((n_ > 0 ? n_ - 1 : 0) + 2 * g, 0.0);
    }

    FitDiagnostics solve() {
        FitDiagnostics diag;
        double rho = 10.0;
        double prev_viol = std::numeric_limits<double>::infinity();
        Eigen::VectorXd z_best = z_;
        double best_merit = std::numeric_limits<double>::infinity();

        for (int outer = 0; outer < cfg_.solver.max_outer_iters; ++outer) {
            diag.outer_iters = outer + 1;
            const double drop = run_inner(rho, diag);
            const bool progressed = drop > 1e-6 * std::max(1.0, objective(z_));

            const Eigen::VectorXd g = constraints(z_);
            double viol = 0.0;
            for (int k = 0; k < g.size(); ++k) viol = std::max(viol, g[k]);
            viol = std::max(viol, 0.0);

            const double merit = objective(z_) + 1e6 * viol;
            if (merit <= best_merit + 1e-15) {
                best_merit = merit;
                z_best = z_;
                diag.merit_history.push_back(merit);
            } else {
                z_ = z_best;  // keep the best accepted iterate, tighten instead
            }

            diag.constraint_violation = viol;
            diag.kkt_residual = std::max(projected_gradient_norm(rho), viol);
            const double scale = std::max(1.0, objective(z_));
            if (viol <= cfg_.solver.constraint_tol &&
                projected_gradient_norm(rho) <= cfg_.solver.stationarity_tol * scale) {
                diag.converged = true;
                break;
            }
            if (!progressed) {
                // no descent step exists at working precision; a feasible
                // iterate is accepted as (numerically) stationary, with the
                // achieved KKT residual reported as-is
                diag.converged = viol <= cfg_.solver.constraint_tol;
                if (diag.converged || rho >= 1e8) break;
                rho = std::min(rho * 10.0, 1e8);
                continue;
            }
            for (int k = 0; k < g.size(); ++k)
                mu_[k] = std::max(0.0, mu_[k] + rho * g[k]);
            if (viol > 0.5 * prev_viol) rho = std::min(rho * 5.0, 1e8);
            prev_viol = viol;
        }
        z_ = z_best;
        diag.objective = objective(z_);
        return diag;
    }

    // Final model with alpha wrapped and tiny amplitudes pruned.
    CurvatureModel model() const {
        CurvatureModel m = model_;
        m.kappa0 = z_[1];
        for (std::size_t i = 0; i < n_; ++i) {
            m.sigmoids[i].amplitude = z_[2 + i];
            m.sigmoids[i].center = z_[2 + n_ + i];
        }
        return m.prune(1e-3);
    }

    double alpha0() const { return wrap_angle(z_[0]); }

    double objective(const Eigen::VectorXd& z) const {
        Eigen::VectorXd r;
        residuals(z, r, nullptr);
        return r.squaredNorm() + regularizer(z);
    }

private:
    // forward integration of the curve and its Jacobian w.r.t. z
    void residuals(const Eigen::VectorXd& z, Eigen::VectorXd& r, Eigen::MatrixXd* J) const {
        const std::size_t m = targets_.size();
        r.resize(2 * (m - 1));
        if (J) J->setZero(2 * (m - 1), dim_);

        CurvatureModel mod = model_;
        mod.kappa0 = z[1];
        for (std::size_t i = 0; i < n_; ++i) {
            mod.sigmoids[i].amplitude = z[2 + i];
            mod.sigmoids[i].center = z[2 + n_ + i];
        }

        double alpha = z[0];
        double x = targets_.points[0].x(), y = targets_.points[0].y();
        Eigen::VectorXd ga = Eigen::VectorXd::Zero(dim_);
        ga[0] = 1.0;
        Eigen::VectorXd gx = Eigen::VectorXd::Zero(dim_), gy = Eigen::VectorXd::Zero(dim_);
        Eigen::VectorXd gk(dim_);

        for (std::size_t i = 1; i < m; ++i) {
            const double dl = targets_.cum_arc[i] - targets_.cum_arc[i - 1];
            const double smid = targets_.cum_arc[i - 1] + 0.5 * dl;
            const double k = mod.evaluate(smid);
            const double alpha_next = alpha + k * dl;
            const double mean = 0.5 * (alpha + alpha_next);
            const double c = std::cos(mean), s = std::sin(mean);

            if (J) {
                gk.setZero();
                const CurvatureGradient cg = mod.gradient(smid);
                gk[1] = 1.0;
                for (std::size_t q = 0; q < n_; ++q) {
                    gk[2 + q] = cg.d_amplitude[q];
                    gk[2 + n_ + q] = cg.d_center[q];
                }
                // mean-heading gradient = ga + dl/2 * gk
                gx += -s * dl * (ga + 0.5 * dl * gk);
                gy += c * dl * (ga + 0.5 * dl * gk);
                ga += dl * gk;
            }
            x += c * dl;
            y += s * dl;
            alpha = alpha_next;

            r[2 * (i - 1)] = x - targets_.points[i].x();
            r[2 * (i - 1) + 1] = y - targets_.points[i].y();
            if (J) {
                J->row(2 * (i - 1)) = gx;
                J->row(2 * (i - 1) + 1) = gy;
            }
        }
    }

    double regularizer(const Eigen::VectorXd& z) const {
        if (cfg_.reg_weight <= 0.0 || n_ == 0) return 0.0;
        const double w = cfg_.reg_weight / static_cast<double>(n_);
        auto smooth_abs = [](double v) { return std::sqrt(v * v + 1e-12); };
        double reg = smooth_abs(z[1]);
        for (std::size_t i = 0; i < n_; ++i) reg += smooth_abs(z[2 + i]);
        return w * reg;
    }

    void add_regularizer_derivatives(const Eigen::VectorXd& z, Eigen::VectorXd& grad,
                                     Eigen::MatrixXd& H) const {
        if (cfg_.reg_weight <= 0.0 || n_ == 0) return;
        const double w = cfg_.reg_weight / static_cast<double>(n_);
        auto add = [&](int idx) {
            const double v = z[idx];
            const double den = std::sqrt(v * v + 1e-12);
            grad[idx] += w * v / den;
            H(idx, idx) += w * 1e-12 / (den * den * den);
        };
        add(1);
        for (std::size_t i = 0; i < n_; ++i) add(2 + i);
    }

    // inequality constraints g(z) <= 0: center ordering with a minimal gap,
    // then curvature bounds on the target arc grid
    Eigen::VectorXd constraints(const Eigen::VectorXd& z) const {
        const std::size_t m = targets_.size();
        Eigen::VectorXd g((n_ > 0 ? n_ - 1 : 0) + 2 * m);
        std::size_t row = 0;
        for (std::size_t i = 0; i + 1 < n_; ++i)
            g[row++] = 1e-4 - (z[2 + n_ + i + 1] - z[2 + n_ + i]);
        CurvatureModel mod = model_;
        mod.kappa0 = z[1];
        for (std::size_t i = 0; i < n_; ++i) {
            mod.sigmoids[i].amplitude = z[2 + i];
            mod.sigmoids[i].center = z[2 + n_ + i];
        }
        for (std::size_t i = 0; i < m; ++i) {
            const double k = mod.evaluate(targets_.cum_arc[i]);
            g[row++] = k - cfg_.kappa_max;
            g[row++] = cfg_.kappa_min - k;
        }
        return g;
    }

    void constraint_jacobian_row(const Eigen::VectorXd& z, std::size_t row,
                                 Eigen::VectorXd& grad_out) const {
        grad_out.setZero(dim_);
        const std::size_t n_ord = n_ > 0 ? n_ - 1 : 0;
        if (row < n_ord) {
            // g = gap - (b_{i+1} - b_i): d/db_i = +1, d/db_{i+1} = -1
            grad_out[2 + n_ + row] = 1.0;
            grad_out[2 + n_ + row + 1] = -1.0;
            return;
        }
        const std::size_t k = (row - n_ord) / 2;
        const bool upper = ((row - n_ord) % 2) == 0;
        CurvatureModel mod = model_;
        mod.kappa0 = z[1];
        for (std::size_t i = 0; i < n_; ++i) {
            mod.sigmoids[i].amplitude = z[2 + i];
            mod.sigmoids[i].center = z[2 + n_ + i];
        }
        const CurvatureGradient cg = mod.gradient(targets_.cum_arc[k]);
        const double sign = upper ? 1.0 : -1.0;
        grad_out[1] = sign;
        for (std::size_t q = 0; q < n_; ++q) {
            grad_out[2 + q] = sign * cg.d_amplitude[q];
            grad_out[2 + n_ + q] = sign * cg.d_center[q];
        }
    }

    double al_merit(const Eigen::VectorXd& z, double rho) const {
        const Eigen::VectorXd g = constraints(z);
        double pen = 0.0;
        for (int k = 0; k < g.size(); ++k) {
            const double t = std::max(0.0, mu_[k] / rho + g[k]);
            pen += 0.5 * rho * t * t - 0.5 * mu_[k] * mu_[k] / rho;
        }
        return objective(z) + pen;
    }

    void project(Eigen::VectorXd& z) const {
        for (std::size_t i = 0; i < n_; ++i) {
            z[2 + i] = std::clamp(z[2 + i], cfg_.kappa_min, cfg_.kappa_max);
            z[2 + n_ + i] = std::clamp(z[2 + n_ + i], 0.0, length_);
        }
    }

    void al_gradient_hessian(const Eigen::VectorXd& z, double rho, Eigen::VectorXd& grad,
                             Eigen::MatrixXd& H) const {
        Eigen::VectorXd r;
        Eigen::MatrixXd J;
        residuals(z, r, &J);
        grad = 2.0 * J.transpose() * r;
        H = 2.0 * J.transpose() * J;
        add_regularizer_derivatives(z, grad, H);
        const Eigen::VectorXd g = constraints(z);
        Eigen::VectorXd gi(dim_);
        for (int k = 0; k < g.size(); ++k) {
            const double t = mu_[k] / rho + g[k];
            if (t <= 0.0) continue;
            constraint_jacobian_row(z, k, gi);
            grad += rho * t * gi;
            H += rho * gi * gi.transpose();
        }
    }

    double projected_norm(const Eigen::VectorXd& grad) const {
        double norm = 0.0;
        for (int i = 0; i < grad.size(); ++i) {
            double gi = grad[i];
            if (i >= 2 && i < 2 + static_cast<int>(n_)) {  // amplitude bounds
                if (z_[i] <= cfg_.kappa_min + 1e-12) gi = std::min(gi, 0.0);
                if (z_[i] >= cfg_.kappa_max - 1e-12) gi = std::max(gi, 0.0);
            } else if (i >= 2 + static_cast<int>(n_)) {  // center bounds
                if (z_[i] <= 1e-12) gi = std::min(gi, 0.0);
                if (z_[i] >= length_ - 1e-12) gi = std::max(gi, 0.0);
            }
            norm = std::max(norm, std::abs(gi));
        }
        return norm;
    }

    double projected_gradient_norm(double rho) const {
        Eigen::VectorXd grad;
        Eigen::MatrixXd H;
        al_gradient_hessian(z_, rho, grad, H);
        return projected_norm(grad);
    }

    // Levenberg-damped Gauss-Newton descent on the augmented-Lagrangian
    // merit; returns the total merit decrease achieved.
    double run_inner(double rho, FitDiagnostics& diag) {
        double lm = 1e-6;
        const double merit0 = al_merit(z_, rho);
        double merit = merit0;
        int tiny_steps = 0;
        for (int it = 0; it < cfg_.solver.max_inner_iters; ++it) {
            ++diag.inner_iters;
            Eigen::VectorXd grad;
            Eigen::MatrixXd H;
            al_gradient_hessian(z_, rho, grad, H);
            const double scale = std::max(1.0, objective(z_));
            if (projected_norm(grad) <= cfg_.solver.stationarity_tol * scale) break;

            bool accepted = false;
            for (int attempt = 0; attempt < 12; ++attempt) {
                Eigen::MatrixXd Hd = H;
                for (int d = 0; d < Hd.rows(); ++d)
                    Hd(d, d) += lm * std::max(1.0, H(d, d));
                Eigen::VectorXd step = Hd.ldlt().solve(-grad);
                Eigen::VectorXd z_try = z_ + step;
                project(z_try);
                const double m_try = al_merit(z_try, rho);
                if (m_try < merit - 1e-14) {
                    tiny_steps = (merit - m_try) <= 1e-8 * std::max(1.0, std::abs(merit))
                                     ? tiny_steps + 1
                                     : 0;
                    z_ = z_try;
                    merit = m_try;
                    lm = std::max(lm / 3.0, 1e-12);
                    accepted = true;
                    break;
                }
                lm *= 5.0;
            }
            if (!accepted || tiny_steps >= 3) break;
        }
        return merit0 - merit;
    }

    Polyline targets_;
    EstimatorConfig cfg_;
    CurvatureModel model_;  // carries steepness values and bounds
    std::size_t n_{0};
    std::size_t dim_{0};
    double length_{0.0};
    Eigen::VectorXd z_;
    std::vector<double> mu_;
};

inline std::vector<double> arc_steps(const Polyline& p) {
    std::vector<double> steps;
    steps.reserve(p.size() - 1);
    for (std::size_t i = 1; i < p.size(); ++i) steps.push_back(p.cum_arc[i] - p.cum_arc[i - 1]);
    return steps;
}

}  // namespace detail

// Solves the initial whole-measurement fit: the first map point is pinned to
// the first measurement point, every later map point follows from the curve
// recursion, and the objective is the sum of squared point distances plus the
// optional curvature-level regularizer.
inline FitResult fit_initial(const Measurement& measurement, const EstimatorConfig& cfg,
                             double s_origin = 0.0) {
    const Polyline& pts = measurement.points;
    if (pts.size() < 3) throw std::invalid_argument("fit_initial: need at least 3 points");
    CurvatureModel warm = initialize_model(pts, cfg);
    const Vec2 dir = pts.points[1] - pts.points[0];
    const double alpha_warm = std::atan2(dir.y(), dir.x());
    detail::SigmoidFit fit(pts, std::move(warm), alpha_warm, cfg);
    FitResult out;
    out.diag = fit.solve();
    const PlanarPose anchor{fit.alpha0(), pts.points[0].x(), pts.points[0].y()};
    out.map = CenterlineMap::build(anchor, fit.model(), detail::arc_steps(pts), s_origin);
    return out;
}

// Greedy in-order nearest-neighbour matching between the measurement and the
// map points; overlap holds when enough points coincide within d_max and
// enough measurement points extend past the matched range.
inline OverlapReport determine_overlap(const Measurement& measurement, const CenterlineMap& map,
                                       const EstimatorConfig& cfg) {
    const Polyline& meas = measurement.points;
    if (meas.empty() || map.empty())
        throw std::invalid_argument("determine_overlap: empty inputs");
    OverlapReport rep;
    const auto& poses = map.poses();
    std::size_t j = 0;  // next map point still available for matching
    bool first = true;
    for (std::size_t i = 0; i < meas.size() && j < poses.size(); ++i) {
        // nearest still-available map point, searched forward in order
        std::size_t best = j;
        double best_d2 = std::numeric_limits<double>::infinity();
        for (std::size_t k = j; k < poses.size(); ++k) {
            const double d2 = (meas.points[i] - poses[k].position()).squaredNorm();
            if (d2 < best_d2) {
                best_d2 = d2;
                best = k;
            }
        }
        if (std::sqrt(best_d2) < cfg.overlap_dist) {
            if (first) {
                rep.map_first = best;
                rep.meas_first = i;
                first = false;
            }
            rep.map_last = best;
            rep.meas_last = i;
            ++rep.matched;
            j = best + 1;  // each map point matches at most once, in order
        }
    }
    rep.new_points = rep.matched > 0 ? static_cast<int>(meas.size() - 1 - rep.meas_last) : 0;
    rep.overlap = rep.matched >= cfg.min_overlap_points && rep.new_points >= cfg.min_new_points;
    return rep;
}

struct RetainResult {
    Polyline retained_points;
    CurvatureModel retained_model;
    Polyline new_points;
    double s_origin{0.0};     // track-global arc of the first retained point
    double anchor_alpha{0.0};  // tangent at the first retained point
};

// Keeps the recent portion of the map: when at least two curvature
// transitions lie behind the car, the map is cut at the latest one; sigmoids
// whose transition completed before the cut are folded into the base
// curvature (their saturated contribution) and dropped. The length cap is
// enforced afterwards by trimming the oldest retained points.
inline RetainResult retain_map(const CartesianState& car, const Measurement& measurement,
                               const CenterlineMap& map, const OverlapReport& overlap,
                               const EstimatorConfig& cfg) {
    if (!overlap.overlap) throw std::logic_error("retain_map: called without overlap");

    double s_car = 0.0;
    try {
        s_car = map.project(Vec2(car.x, car.y)).s;
    } catch (const std::exception&) {
        s_car = 0.0;  // keep everything when the car cannot be located
    }

    const auto& sg = map.model().sigmoids;
    std::vector<double> behind;
    for (const auto& s : sg)
        if (s.center <= s_car) behind.push_back(s.center);
    double cutoff = 0.0;
    if (behind.size() >= 2) cutoff = behind.back();

    // collect new points and their arc extent first, then enforce the cap
    std::vector<Vec2> new_pts;
    for (std::size_t i = overlap.meas_last + 1; i < measurement.points.size(); ++i)
        new_pts.push_back(measurement.points.points[i]);
    double new_arc = 0.0;
    if (!new_pts.empty()) {
        new_arc = (new_pts.front() - map.poses().back().position()).norm();
        for (std::size_t i = 1; i < new_pts.size(); ++i)
            new_arc += (new_pts[i] - new_pts[i - 1]).norm();
    }
    // the cap trims the oldest points first, but never past the car (the car
    // must stay inside the map for the curvilinear conversion); whatever
    // still does not fit is dropped from the newest measurement points
    double cap_cutoff = (map.length() - cutoff) + new_arc - cfg.map_length_cap;
    cap_cutoff = cap_cutoff > 0.0
                     ? std::min({cutoff + cap_cutoff, std::max(cutoff, s_car - 0.2),
                                 std::max(0.0, map.length() - 0.2)})
                     : 0.0;

    // snap the curve-prior cut backward (keeps the boundary sigmoid center
    // inside the retained range) and the cap cut forward (cap is hard)
    const auto& grid = map.grid();
    std::size_t idx_prior = 0;
    while (idx_prior + 2 < grid.size() && grid[idx_prior + 1] <= cutoff + 1e-9) ++idx_prior;
    if (cutoff <= 1e-12) idx_prior = 0;
    std::size_t idx_cap = 0;
    while (idx_cap + 2 < grid.size() && grid[idx_cap] < cap_cutoff - 1e-9) ++idx_cap;
    const std::size_t cut_idx = std::max(idx_prior, idx_cap);
    const double cut_arc = grid[cut_idx];

    RetainResult out;
    std::vector<Vec2> retained;
    for (std::size_t i = cut_idx; i < map.size(); ++i) retained.push_back(map.poses()[i].position());

    // drop newest points that still do not fit under the cap
    const double retained_len = map.length() - grid[cut_idx];
    double budget = cfg.map_length_cap - retained_len;
    std::vector<Vec2> kept_new;
    Vec2 prev = retained.back();
    for (const auto& p : new_pts) {
        const double gap = (p - prev).norm();
        if (budget - gap < 0.0) break;
        budget -= gap;
        kept_new.push_back(p);
        prev = p;
    }

    out.retained_points = Polyline(std::move(retained));
    out.new_points = Polyline(std::move(kept_new));
    out.s_origin = map.s_origin() + cut_arc;
    out.anchor_alpha = map.poses()[cut_idx].alpha;

    CurvatureModel m;
    m.kappa_min = map.model().kappa_min;
    m.kappa_max = map.model().kappa_max;
    m.kappa0 = map.model().kappa0;
    for (const auto& s : sg) {
        const double shifted = s.center - cut_arc;
        if (shifted < 0.0) {
            // e^{-25} ~ 1e-11: folding error stays below the 1e-9 contract
            if (s.steepness * (-shifted) >= 25.0) {
                m.kappa0 += s.amplitude;  // fully saturated over the retained range
            } else {
                SigmoidParams kept = s;
                kept.center = 0.0;
                m.sigmoids.push_back(kept);
            }
        } else {
            SigmoidParams kept = s;
            kept.center = shifted;
            m.sigmoids.push_back(kept);
        }
    }
    out.retained_model = m;
    return out;
}

// Solves the map-update fit: the combined targets are the retained map points
// followed by the new measurement points, pinned at the first retained point
// and warm-started from the retained model plus transition detection on the
// new section.
inline FitResult fit_update(const Polyline& retained_points, const CurvatureModel& retained_model,
                            const Polyline& new_points, const EstimatorConfig& cfg,
                            double s_origin = 0.0, double anchor_alpha_warm = 0.0) {
    if (retained_points.empty()) throw std::invalid_argument("fit_update: empty retained points");
    if (static_cast<int>(new_points.size()) < cfg.min_new_points)
        throw std::invalid_argument("fit_update: too few new points");

    std::vector<Vec2> all = retained_points.points;
    for (const auto& p : new_points.points) all.push_back(p);
    Polyline targets(std::move(all));

    const double retained_len = retained_points.length();
    const double new_start = targets.cum_arc[retained_points.size()];

    CurvatureModel warm = retained_model;
    warm.kappa_min = cfg.kappa_min;
    warm.kappa_max = cfg.kappa_max;

    // transition detection on the new section, shifted into target arc
    if (new_points.size() >= 3) {
        CurvatureModel fresh = initialize_model(new_points, cfg);
        const double junction_diff = fresh.kappa0 - retained_model.evaluate(retained_len);
        if (std::abs(junction_diff) > cfg.change_threshold)
            warm.sigmoids.push_back({std::clamp(junction_diff, cfg.kappa_min, cfg.kappa_max),
                                     new_start, cfg.c_fixed});
        for (const auto& s : fresh.sigmoids)
            if (std::abs(s.amplitude) > 0.0)
                warm.sigmoids.push_back({s.amplitude, new_start + s.center, s.steepness});
    }
    if (warm.sigmoids.empty()) warm.sigmoids.push_back({0.0, 0.5 * targets.length(), cfg.c_fixed});

    std::sort(warm.sigmoids.begin(), warm.sigmoids.end(),
              [](const SigmoidParams& a, const SigmoidParams& b) { return a.center < b.center; });
    for (std::size_t i = 1; i < warm.sigmoids.size(); ++i)
        if (warm.sigmoids[i].center <= warm.sigmoids[i - 1].center + 1e-4)
            warm.sigmoids[i].center = warm.sigmoids[i - 1].center + 1e-3;
    while (static_cast<int>(warm.sigmoids.size()) > cfg.max_sigmoids) {
        auto smallest = std::min_element(warm.sigmoids.begin(), warm.sigmoids.end(),
                                         [](const SigmoidParams& a, const SigmoidParams& b) {
                                             return std::abs(a.amplitude) < std::abs(b.amplitude);
                                         });
        warm.sigmoids.erase(smallest);
    }
    for (auto& s : warm.sigmoids) s.center = std::clamp(s.center, 0.0, targets.length());

    detail::SigmoidFit fit(targets, std::move(warm), anchor_alpha_warm, cfg);
    FitResult out;
    out.diag = fit.solve();
    const PlanarPose anchor{fit.alpha0(), targets.points[0].x(), targets.points[0].y()};
    out.map = CenterlineMap::build(anchor, fit.model(), detail::arc_steps(targets), s_origin);
    return out;
}

// One step of the estimation pipeline: initial fit at the first measurement,
// afterwards overlap-gated retention and update. Never throws on solver
// trouble: a failed update hands back the previous map with diagnostics.
inline EstimationResult estimation_step(const CartesianState& car, const Measurement& measurement,
                                        const std::optional<CenterlineMap>& previous,
                                        const EstimatorConfig& cfg) {
    EstimationResult out;

    Polyline pts;
    if (!measurement.points.empty()) {
        pts = subsample(measurement.points, cfg.delta_lambda);
        // observation points beyond the map length cap are ignored
        while (!pts.cum_arc.empty() && pts.cum_arc.back() > cfg.map_length_cap) {
            pts.points.pop_back();
            pts.cum_arc.pop_back();
        }
    }

    if (!previous) {
        if (pts.size() < 10) {
            out.status = EstimationStatus::insufficient_data;
            return out;
        }
        Measurement sub{pts, measurement.time_index};
        FitResult fit = fit_initial(sub, cfg);
        out.diag = fit.diag;
        if (!fit.diag.converged) {
            out.status = EstimationStatus::insufficient_data;
            return out;
        }
        out.map = std::move(fit.map);
        out.status = EstimationStatus::initial;
        return out;
    }

    out.map = *previous;
    if (pts.size() < 3) {
        out.status = EstimationStatus::unchanged_no_overlap;
        return out;
    }

    Measurement sub{pts, measurement.time_index};
    out.overlap = determine_overlap(sub, *previous, cfg);
    if (!out.overlap.overlap) {
        out.status = EstimationStatus::unchanged_no_overlap;
        return out;
    }

    try {
        RetainResult ret = retain_map(car, sub, *previous, out.overlap, cfg);
        if (static_cast<int>(ret.new_points.size()) < cfg.min_new_points) {
            // the length cap admits too few of the new points right now;
            // hold the model until the car frees room at the map front
            out.status = EstimationStatus::unchanged_no_overlap;
            return out;
        }
        FitResult fit = fit_update(ret.retained_points, ret.retained_model, ret.new_points, cfg,
                                   ret.s_origin, ret.anchor_alpha);
        out.diag = fit.diag;
        if (!fit.diag.converged) {
            out.status = EstimationStatus::unchanged_failed;
            return out;
        }
        out.map = std::move(fit.map);
        out.status = EstimationStatus::updated;
    } catch (const std::exception&) {
        out.status = EstimationStatus::unchanged_failed;
    }
    return out;
}

}  // namespace uarc
