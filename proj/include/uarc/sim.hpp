#pragma once
// Closed-loop harness: per tick the car senses the road, updates its
// centerline estimate, optionally samples curvature realizations, solves the
// receding-horizon problem and applies the first input; the ground truth is
// integrated in Cartesian coordinates. Also the run metrics (estimation
// Hausdorff distance, curvature error, lateral deviation) and the ablation
// suite over the estimation variants.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "uarc/centerline_map.hpp"
#include "uarc/control.hpp"
#include "uarc/estimation.hpp"
#include "uarc/rng.hpp"
#include "uarc/sampling.hpp"
#include "uarc/sensor.hpp"
#include "uarc/track.hpp"
#include "uarc/vehicle.hpp"

namespace uarc {

enum class RunMode { ground_truth_reference, nominal_estimate, uncertainty_aware };

inline const char* to_string(RunMode m) {
    switch (m) {
        case RunMode::ground_truth_reference: return "ground-truth-reference";
        case RunMode::nominal_estimate: return "nominal-estimate";
        case RunMode::uncertainty_aware: return "uncertainty-aware";
    }
    return "?";
}

enum class EstimationMethod { sigmoid_fit, naive, smooth_naive };

inline const char* to_string(EstimationMethod m) {
    switch (m) {
        case EstimationMethod::sigmoid_fit: return "sigmoid-fit";
        case EstimationMethod::naive: return "naive";
        case EstimationMethod::smooth_naive: return "smooth-naive";
    }
    return "?";
}

struct SimConfig {
    RunMode mode{RunMode::ground_truth_reference};
    EstimationMethod method{EstimationMethod::sigmoid_fit};
    int laps{1};
    int max_ticks{6000};
    double dt{1.0 / 30.0};
    int truth_substeps{8};
    double initial_lateral{0.0};   // m, left of the start pose
    double initial_heading{0.0};   // rad, relative to the start tangent
    double initial_speed{0.5};     // m/s
    double initial_tau{0.15};
    double divergence_eta{1.0};    // m, 2 W by default
    std::uint64_t seed{0};
};

struct TickRecord {
    int tick{0};
    CartesianState car;
    double s_truth{0.0};   // wrapped track arc of the car
    double eta_truth{0.0};
    double phi_truth{0.0};
    double progress{0.0};  // unwrapped
    int solve_status{0};   // SolveStatus as int, -1 when no solve ran
    double solve_kkt{0.0};
    double solve_slack{0.0};
    double solve_cost{0.0};
    int sqp_iters{0};
    int est_status{0};     // EstimationStatus as int
};

// One centerline estimate used for the metric computation.
struct EstimateRecord {
    int tick{0};
    Polyline points;
    std::vector<double> kappa;  // per point
    double anchor_s{0.0};       // track arc of the first point
    std::optional<CurvatureModel> model;
};

struct RunLog {
    std::vector<TickRecord> ticks;
    std::vector<EstimateRecord> estimates;
    bool lap_complete{false};
    bool diverged{false};
    int solver_failures{0};
    double lap_time{0.0};
    double track_length{0.0};
};

struct RunMetrics {
    double mean_hausdorff{0.0};
    double worst_hausdorff{0.0};
    double kappa_mae{0.0};
    bool success{false};
    double mean_abs_eta{0.0};
    double max_eta{0.0};
    double lap_time{0.0};
    int solver_failures{0};
};

// Savitzky-Golay smoothing, window 5, order 2, applied per coordinate;
// endpoints keep their raw values.
inline Polyline savitzky_golay5(const Polyline& in) {
    if (in.size() < 5) return in;
    static const double w[5] = {-3.0 / 35.0, 12.0 / 35.0, 17.0 / 35.0, 12.0 / 35.0, -3.0 / 35.0};
    std::vector<Vec2> out = in.points;
    for (std::size_t i = 2; i + 2 < in.size(); ++i) {
        Vec2 acc(0.0, 0.0);
        for (int k = -2; k <= 2; ++k) acc += w[k + 2] * in.points[i + k];
        out[i] = acc;
    }
    return Polyline(std::move(out));
}

namespace detail {

struct ProgressTracker {
    double progress{0.0};
    double prev_s{0.0};
    bool started{false};

    double update(const Track& track, double s_now) {
        if (!started) {
            prev_s = s_now;
            started = true;
            return progress;
        }
        double ds = s_now - prev_s;
        const double L = track.length();
        if (ds > 0.5 * L) ds -= L;
        if (ds < -0.5 * L) ds += L;
        progress += ds;
        prev_s = s_now;
        return progress;
    }
};

}  // namespace detail

// Full closed-loop run. Deterministic given the configs and seed.
inline RunLog run_closed_loop(const Track& track, const VehicleParams& params,
                              const EstimatorConfig& est_cfg, const SamplingConfig& samp_cfg,
                              const ControlConfig& ctl_cfg, const SensorConfig& sensor_cfg,
                              const SimConfig& sim) {
    RunLog log;
    log.track_length = track.length();

    CartesianState car;
    {
        const PlanarPose start = track.start_pose();
        car.x = start.x - sim.initial_lateral * std::sin(start.alpha);
        car.y = start.y + sim.initial_lateral * std::cos(start.alpha);
        car.psi = wrap_angle(start.alpha + sim.initial_heading);
        car.vx = sim.initial_speed;
        car.tau = sim.initial_tau;
    }

    MpccController controller(ctl_cfg, params);
    std::optional<CenterlineMap> est_map;
    std::optional<Polyline> naive_chain;      // per-tick estimate of the baselines
    std::vector<double> naive_kappa;
    std::optional<ScenarioSet> scenarios;
    std::optional<Solution> warm;
    detail::ProgressTracker tracker;
    int consecutive_failures = 0;
    const double target = sim.laps * track.length();

    for (int tick = 0; tick < sim.max_ticks; ++tick) {
        // --- sense ---
        Measurement meas = sense(car, track, sensor_cfg, tick);

        // --- estimate ---
        TickRecord rec;
        rec.tick = tick;
        bool map_updated = false;
        if (sim.method == EstimationMethod::sigmoid_fit) {
            if (!meas.points.empty()) {
                auto res = estimation_step(car, meas, est_map, est_cfg);
                rec.est_status = static_cast<int>(res.status);
                if (res.status == EstimationStatus::initial ||
                    res.status == EstimationStatus::updated) {
                    est_map = res.map;
                    map_updated = true;
                } else if (est_map) {
                    est_map = res.map;  // unchanged content, same map
                }
            }
            if (map_updated && est_map) {
                EstimateRecord er;
                er.tick = tick;
                er.points = est_map->polyline();
                er.kappa.clear();
                for (double s : est_map->grid()) er.kappa.push_back(est_map->kappa_at(s));
                er.anchor_s = track.project(er.points.points.front()).first;
                er.model = est_map->model();
                log.estimates.push_back(std::move(er));
            }
        } else if (!meas.points.empty() && meas.points.size() >= 5) {
            Polyline pts = subsample(meas.points, est_cfg.delta_lambda);
            if (sim.method == EstimationMethod::smooth_naive) pts = savitzky_golay5(pts);
            if (pts.size() >= 3) {
                naive_kappa = discrete_curvature(pts);
                naive_chain = pts;
                map_updated = true;
                EstimateRecord er;
                er.tick = tick;
                er.points = pts;
                er.kappa = naive_kappa;
                er.anchor_s = track.project(pts.points.front()).first;
                log.estimates.push_back(std::move(er));
            }
        }

        // --- how far ahead is the road known ---
        const auto [s_car, d_car] = track.project(Vec2(car.x, car.y));
        (void)d_car;
        double s_limit_ahead = 0.0;  // visible road ahead of the car, m
        if (sim.method == EstimationMethod::sigmoid_fit) {
            if (est_map) {
                const double end_s = track.project(est_map->poses().back().position()).first;
                double ahead = end_s - s_car;
                if (ahead < 0.0) ahead += track.length();
                s_limit_ahead = std::min(ahead, est_map->length());
            }
        } else if (naive_chain) {
            const double end_s = track.project(naive_chain->points.back()).first;
            double ahead = end_s - s_car;
            if (ahead < 0.0) ahead += track.length();
            s_limit_ahead = std::min(ahead, naive_chain->length() + 1.0);
        }

        // --- control ---
        ControlInput u{0.0, -5.0};  // cautious fallback: hold steering, back off
        bool solved = false;
        Solution sol;
        try {
            if (sim.mode == RunMode::ground_truth_reference) {
                if (s_limit_ahead > 0.4) {
                    const double back = 0.2;
                    auto window =
                        track_reference_window(track, s_car - back, s_limit_ahead + back);
                    FrenetState init = cartesian_to_frenet(car, window);
                    sol = controller.solve_nominal(init, window, warm);
                    solved = true;
                }
            } else if (sim.mode == RunMode::nominal_estimate) {
                if (est_map) {
                    FrenetState init = cartesian_to_frenet(car, *est_map);
                    sol = controller.solve_nominal(init, *est_map, warm);
                    solved = true;
                }
            } else {
                if (est_map) {
                    if (map_updated || !scenarios) {
                        SamplingConfig sc = samp_cfg;
                        sc.seed = samp_cfg.seed ^ (0xabc0ULL + tick);
                        scenarios = sc.m > 1 ? sample_scenarios(*est_map, sc)
                                             : select_scenarios({}, *est_map, sc);
                    }
                    sol = controller.solve_scenario(car, *scenarios, warm);
                    solved = true;
                }
            }
        } catch (const std::exception&) {
            solved = false;
        }

        if (solved) {
            rec.solve_status = static_cast<int>(sol.status);
            rec.solve_kkt = sol.kkt_residual;
            rec.solve_slack = sol.slack_usage;
            rec.solve_cost = sol.cost;
            rec.sqp_iters = sol.sqp_iters;
            if (sol.status == SolveStatus::max_iter) {
                ++log.solver_failures;
                ++consecutive_failures;
            } else {
                consecutive_failures = 0;
            }
            if (consecutive_failures < 2) {
                u = sol.inputs.front();
                warm = sol;
            } else {
                u = ControlInput{0.0, -5.0};
                warm.reset();
            }
        } else {
            rec.solve_status = -1;
            ++consecutive_failures;
            warm.reset();
        }

        // --- actuate ground truth ---
        // the plant saturates its physical actuators: no negative drivetrain
        // command and bounded steering, whatever the controller asked for
        if (car.tau <= ctl_cfg.tau_min && u.tau_rate < 0.0) u.tau_rate = 0.0;
        if (car.tau >= ctl_cfg.tau_max && u.tau_rate > 0.0) u.tau_rate = 0.0;
        if (car.delta <= -ctl_cfg.delta_abs && u.delta_rate < 0.0) u.delta_rate = 0.0;
        if (car.delta >= ctl_cfg.delta_abs && u.delta_rate > 0.0) u.delta_rate = 0.0;
        try {
            car = step(car, u, params, sim.dt, sim.truth_substeps);
        } catch (const std::exception&) {
            log.diverged = true;  // the model left its valid domain
        }
        car.tau = std::clamp(car.tau, ctl_cfg.tau_min, ctl_cfg.tau_max);
        car.delta = std::clamp(car.delta, -ctl_cfg.delta_abs, ctl_cfg.delta_abs);
        car.vx = std::max(car.vx, 0.05);  // creep floor keeps the model evaluable
        if (log.diverged) {
            log.ticks.push_back(rec);
            break;
        }

        // --- truth-frame bookkeeping ---
        const auto [s_now, dist_now] = track.project(Vec2(car.x, car.y));
        const PlanarPose ref = track.pose_at(s_now);
        const double eta =
            (Vec2(car.x, car.y) - ref.position()).dot(Vec2(-std::sin(ref.alpha), std::cos(ref.alpha)));
        rec.car = car;
        rec.s_truth = s_now;
        rec.eta_truth = eta;
        rec.phi_truth = angle_diff(car.psi, ref.alpha);
        rec.progress = tracker.update(track, s_now);
        log.ticks.push_back(rec);
        (void)dist_now;

        if (std::abs(eta) > sim.divergence_eta) {
            log.diverged = true;
            break;
        }
        if (rec.progress >= target) {
            log.lap_complete = true;
            log.lap_time = (tick + 1) * sim.dt;
            break;
        }
    }
    if (!log.lap_complete && !log.ticks.empty()) log.lap_time = log.ticks.size() * sim.dt;
    return log;
}

// Metrics against the ground truth: per-estimate Hausdorff distance over the
// matched arc window, curvature MAE by projection, lateral statistics over
// the driven trajectory.
inline RunMetrics compute_metrics(const RunLog& log, const Track& track) {
    if (log.ticks.empty()) throw std::invalid_argument("compute_metrics: empty log");
    RunMetrics m;
    m.solver_failures = log.solver_failures;
    m.lap_time = log.lap_time;
    m.success = log.lap_complete && !log.diverged;

    double acc_eta = 0.0;
    for (const auto& t : log.ticks) {
        acc_eta += std::abs(t.eta_truth);
        m.max_eta = std::max(m.max_eta, std::abs(t.eta_truth));
    }
    m.mean_abs_eta = acc_eta / log.ticks.size();

    if (!log.estimates.empty()) {
        double acc_hd = 0.0, acc_mae = 0.0;
        for (const auto& est : log.estimates) {
            // matched ground-truth section over the same arc window
            const double len = est.points.length();
            std::vector<Vec2> section;
            for (double u = 0.0; u <= len + 1e-9; u += 0.02)
                section.push_back(track.pose_at(est.anchor_s + u).position());
            const double hd = hausdorff_distance(est.points, Polyline(section));
            acc_hd += hd;
            m.worst_hausdorff = std::max(m.worst_hausdorff, hd);

            double mae = 0.0;
            for (std::size_t i = 0; i < est.points.size(); ++i) {
                const double s = track.project(est.points.points[i]).first;
                mae += std::abs(est.kappa[i] - track.kappa_at(s + 1e-9));
            }
            acc_mae += mae / est.points.size();
        }
        m.mean_hausdorff = acc_hd / log.estimates.size();
        m.kappa_mae = acc_mae / log.estimates.size();
    }
    return m;
}

// --- ablation machinery ---

struct MethodSpec {
    EstimationMethod method{EstimationMethod::sigmoid_fit};
    bool init_enabled{true};
    bool reg_enabled{false};
    std::string name;
};

inline std::vector<MethodSpec> ablation_methods() {
    return {
        {EstimationMethod::naive, true, false, "naive"},
        {EstimationMethod::smooth_naive, true, false, "smooth-naive"},
        {EstimationMethod::sigmoid_fit, false, false, "ours"},
        {EstimationMethod::sigmoid_fit, false, true, "ours+reg"},
        {EstimationMethod::sigmoid_fit, true, false, "ours+init"},
        {EstimationMethod::sigmoid_fit, true, true, "ours+init+reg"},
    };
}

struct AblationCell {
    std::string track;
    std::string method;
    std::vector<RunMetrics> runs;

    double mean_hd() const { return mean([](const RunMetrics& r) { return r.mean_hausdorff; }); }
    double std_hd() const { return stdev([](const RunMetrics& r) { return r.mean_hausdorff; }); }
    double mean_mae() const { return mean([](const RunMetrics& r) { return r.kappa_mae; }); }
    double std_mae() const { return stdev([](const RunMetrics& r) { return r.kappa_mae; }); }
    double success_rate() const {
        double s = 0.0;
        for (const auto& r : runs) s += r.success ? 1.0 : 0.0;
        return runs.empty() ? 0.0 : 100.0 * s / runs.size();
    }
    double worst_hd() const {
        double w = 0.0;
        for (const auto& r : runs) w = std::max(w, r.worst_hausdorff);
        return w;
    }

private:
    double mean(const std::function<double(const RunMetrics&)>& f) const {
        if (runs.empty()) return 0.0;
        double acc = 0.0;
        for (const auto& r : runs) acc += f(r);
        return acc / runs.size();
    }
    double stdev(const std::function<double(const RunMetrics&)>& f) const {
        if (runs.size() < 2) return 0.0;
        const double mu = mean(f);
        double acc = 0.0;
        for (const auto& r : runs) acc += (f(r) - mu) * (f(r) - mu);
        return std::sqrt(acc / (runs.size() - 1));
    }
};

struct AblationConfig {
    std::vector<std::string> tracks{"trackA", "trackB"};
    int runs_per_cell{10};
    std::uint64_t seed{0};
    int jobs{1};
    EstimatorConfig estimator;
    SensorConfig sensor;
    ControlConfig control;  // the ground-truth reference controller
    VehicleParams vehicle;
    SamplingConfig sampling;
    int max_ticks{6000};
};

// One perturbed ablation run: initial state and controller parameters are
// jittered per run as in the study protocol.
inline RunMetrics ablation_run(const std::string& track_name, const MethodSpec& spec, int run_idx,
                               const AblationConfig& cfg) {
    Rng rng = Rng::stream(cfg.seed, 0x9000 + run_idx * 131 + std::hash<std::string>{}(track_name + spec.name) % 1024);
    Track track = track_by_name(track_name);

    SimConfig sim;
    sim.mode = RunMode::ground_truth_reference;
    sim.method = spec.method;
    sim.max_ticks = cfg.max_ticks;
    sim.initial_lateral = rng.uniform(-0.1, 0.1);
    sim.initial_heading = rng.uniform(-0.15, 0.15);
    sim.seed = cfg.seed + run_idx;

    EstimatorConfig est = cfg.estimator;
    est.init_enabled = spec.init_enabled;
    est.reg_weight = spec.reg_enabled ? 0.0005 : 0.0;

    ControlConfig ctl = cfg.control;
    ctl.q_s *= rng.uniform(0.8, 1.25);
    ctl.q_eta *= rng.uniform(0.8, 1.25);
    ctl.q_phi *= rng.uniform(0.8, 1.25);

    VehicleParams veh = cfg.vehicle;
    veh.m *= rng.uniform(0.9, 1.1);
    veh.inertia_z *= rng.uniform(0.9, 1.1);

    SensorConfig sensor = cfg.sensor;
    sensor.seed = cfg.seed * 7919 + run_idx;

    auto log = run_closed_loop(track, veh, est, cfg.sampling, ctl, sensor, sim);
    return compute_metrics(log, track);
}

// Runs the full method matrix; failures of single runs are recorded in the
// metrics, never propagate.
inline std::vector<AblationCell> ablation_suite(const AblationConfig& cfg,
                                                const std::vector<MethodSpec>& methods) {
    struct Job {
        std::string track;
        const MethodSpec* spec;
        int run_idx;
        std::size_t cell;
    };
    std::vector<AblationCell> cells;
    std::vector<Job> jobs;
    for (const auto& track : cfg.tracks)
        for (const auto& spec : methods) {
            AblationCell cell;
            cell.track = track;
            cell.method = spec.name;
            cell.runs.resize(cfg.runs_per_cell);
            const std::size_t idx = cells.size();
            cells.push_back(std::move(cell));
            for (int r = 0; r < cfg.runs_per_cell; ++r) jobs.push_back({track, &spec, r, idx});
        }

    const int workers = std::max(1, cfg.jobs);
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
        while (true) {
            const std::size_t j = next.fetch_add(1);
            if (j >= jobs.size()) break;
            const Job& job = jobs[j];
            RunMetrics m;
            try {
                m = ablation_run(job.track, *job.spec, job.run_idx, cfg);
            } catch (const std::exception&) {
                m.success = false;  // recorded as a failed run, suite continues
            }
            cells[job.cell].runs[job.run_idx] = m;
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    return cells;
}

}  // namespace uarc
