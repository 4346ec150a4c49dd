#pragma once
// Receding-horizon contouring controllers. One core solver handles both the
// nominal single-reference problem and the multi-scenario uncertainty-aware
// problem: a shared input sequence drives one predicted trajectory per
// curvature realization, the cost averages the per-scenario stage costs, and
// the track constraints must hold for every realization.
//
// Transcription: direct multiple shooting (states of all scenarios are
// decision variables, shooting-gap equalities close the dynamics), quadratic
// cost taken exactly, dynamics relinearized each SQP iteration, QP subproblems
// solved by the interior-point solver in qp.hpp, globalized by an L1 merit
// line search. Track/heading constraints are softened by one shared
// nonnegative slack per stage; every other state/input box is hard.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "uarc/centerline_map.hpp"
#include "uarc/curvature_model.hpp"
#include "uarc/qp.hpp"
#include "uarc/sampling.hpp"
#include "uarc/vehicle.hpp"

namespace uarc {

struct ControlConfig {
    int horizon{35};  // N
    double q_s{100.0};
    double q_eta{75.0};
    double q_phi{1000.0};
    double q_vx{10.0};
    double q_vy{10.0};
    double r_delta{0.01};   // input weight on the steering rate
    double r_tau{0.001};    // input weight on the drivetrain rate
    double track_width{0.5};
    bool phi_bounds_enabled{true};
    double phi_min{-M_PI / 2.0};
    double phi_max{M_PI / 2.0};
    double vx_min{0.2}, vx_max{5.0};
    double vy_abs{1.0};
    double r_abs{5.0};
    double delta_abs{0.41};
    double tau_min{0.0}, tau_max{0.5};
    double delta_rate_abs{5.0};
    double tau_rate_abs{5.0};
    double dt{1.0 / 30.0};
    double slack_penalty{1e4};
    int max_sqp_iters{30};
    int prediction_substeps{5};

    static ControlConfig nominal() { return ControlConfig{}; }

    static ControlConfig uncertainty_aware() {
        ControlConfig c;
        c.q_s = 400.0;
        c.q_eta = 100.0;
        c.q_phi = 300.0;
        c.q_vx = 5.0;
        c.q_vy = 5.0;
        c.phi_bounds_enabled = false;
        return c;
    }
};

enum class SolveStatus { optimal, max_iter, infeasible_relaxed };

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::optimal: return "optimal";
        case SolveStatus::max_iter: return "max-iter";
        case SolveStatus::infeasible_relaxed: return "infeasible-relaxed";
    }
    return "?";
}

struct Solution {
    std::vector<ControlInput> inputs;                    // N
    std::vector<std::vector<FrenetState>> trajectories;  // per scenario, N+1 states
    SolveStatus status{SolveStatus::max_iter};
    double kkt_residual{0.0};
    double max_constraint_violation{0.0};
    double slack_usage{0.0};
    double cost{0.0};
    int sqp_iters{0};
    int qp_iters{0};
    std::vector<std::size_t> dropped_scenarios;
};

// Stage cost for i >= 1: progress reward plus lateral/heading/input penalties.
inline double stage_cost(const FrenetState& prev, const FrenetState& curr, const ControlInput& u,
                         const ControlConfig& cfg) {
    return -cfg.q_s * (curr.s - prev.s) + cfg.q_eta * curr.eta * curr.eta +
           cfg.q_phi * curr.phi * curr.phi + cfg.r_delta * u.delta_rate * u.delta_rate +
           cfg.r_tau * u.tau_rate * u.tau_rate;
}

// Stage 0 carries only the input penalty.
inline double initial_stage_cost(const ControlInput& u, const ControlConfig& cfg) {
    return cfg.r_delta * u.delta_rate * u.delta_rate + cfg.r_tau * u.tau_rate * u.tau_rate;
}

inline double terminal_cost(const FrenetState& x, const ControlConfig& cfg) {
    return cfg.q_vx * x.vx * x.vx + cfg.q_vy * x.vy * x.vy;
}

namespace detail {

// RK4 step with Jacobians composed over several substeps.
template <class Kappa>
FrenetState predict_step(const FrenetState& x, const ControlInput& u, const Kappa& kappa,
                         const VehicleParams& p, double dt, int substeps, Mat8& A, Mat82& B) {
    const double h = dt / substeps;
    Mat8 Ak;
    Mat82 Bk;
    A = Mat8::Identity();
    B = Mat82::Zero();
    FrenetState cur = x;
    for (int k = 0; k < substeps; ++k) {
        cur = step_with_jacobian(cur, u, kappa, p, h, Ak, Bk);
        A = Ak * A;
        B = Ak * B + Bk;
    }
    return cur;
}

}  // namespace detail

class MpccController {
public:
    MpccController(ControlConfig cfg, VehicleParams params)
        : cfg_(std::move(cfg)), params_(std::move(params)) {}

    const ControlConfig& config() const { return cfg_; }

    // Nominal contouring control against a single reference map.
    Solution solve_nominal(const FrenetState& initial, const CenterlineMap& reference,
                           const std::optional<Solution>& warm = std::nullopt) {
        std::vector<FrenetState> inits{clip_initial(initial)};
        std::vector<CurvatureModel> kappas{reference.model()};
        return solve_core(inits, kappas, reference.length(), warm);
    }

    // Scenario control: the Cartesian state is converted into the frame of
    // every realization; realizations whose conversion fails are dropped.
    Solution solve_scenario(const CartesianState& initial, const ScenarioSet& scenarios,
                            const std::optional<Solution>& warm = std::nullopt) {
        std::vector<FrenetState> inits;
        std::vector<CurvatureModel> kappas;
        std::vector<std::size_t> dropped;
        for (std::size_t l = 0; l < scenarios.size(); ++l) {
            try {
                CenterlineMap ref = scenarios.reconstruct(l);
                inits.push_back(clip_initial(cartesian_to_frenet(initial, ref)));
                kappas.push_back(scenarios.models[l]);
            } catch (const std::exception&) {
                dropped.push_back(l);
            }
        }
        if (inits.empty())
            throw std::domain_error("solve_scenario: no scenario admits a curvilinear state (" +
                                    std::to_string(dropped.size()) + " dropped)");
        Solution sol = solve_core(inits, kappas, scenarios.s_max, warm);
        sol.dropped_scenarios = dropped;
        return sol;
    }

private:
    FrenetState clip_initial(FrenetState x) const {
        x.delta = std::clamp(x.delta, -cfg_.delta_abs, cfg_.delta_abs);
        x.tau = std::clamp(x.tau, cfg_.tau_min, cfg_.tau_max);
        x.vx = std::max(x.vx, 0.05);
        return x;
    }

    // variable layout: [states scenario-major, inputs, slacks]
    int xi(int l, int i) const { return (l * (N_ + 1) + i) * 8; }
    int ui(int i) const { return m_ * (N_ + 1) * 8 + 2 * i; }
    int si(int i) const { return m_ * (N_ + 1) * 8 + 2 * N_ + i; }
    int nz() const { return m_ * (N_ + 1) * 8 + 2 * N_ + (N_ + 1); }

    Solution solve_core(const std::vector<FrenetState>& inits,
                        const std::vector<CurvatureModel>& kappas, double s_max,
                        const std::optional<Solution>& warm) {
        m_ = static_cast<int>(inits.size());
        N_ = cfg_.horizon;
        s_max_ = s_max;
        const int n = nz();

        // initial input guess: shifted warm start when shapes match
        std::vector<ControlInput> u(N_);
        if (warm && static_cast<int>(warm->inputs.size()) == N_) {
            for (int i = 0; i + 1 < N_; ++i) u[i] = warm->inputs[i + 1];
            u[N_ - 1] = warm->inputs[N_ - 1];
        }

        Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
        rollout_into(inits, kappas, u, z);
        seed_slacks(z);

        QpProblem qp;
        build_cost(qp);
        build_bounds(qp, inits, s_max);
        build_soft_rows(qp);

        QpSolver qps;
        Solution sol;
        sol.inputs.resize(N_);

        // proximal damping on the QP step, adapted by step quality; the
        // Gauss-Newton direction alone overshoots near tire saturation
        double prox = 1e-3;
        const Eigen::SparseMatrix<double> H0 = qp.H;
        const Eigen::VectorXd g0 = qp.g;
        Eigen::SparseMatrix<double> eye(nz(), nz());
        eye.setIdentity();

        // The iterate is the input sequence; states are always the exact
        // rollout of the inputs, so the shooting gaps stay closed along the
        // whole iteration and the line search descends one scalar merit: the
        // true trajectory cost plus the penalized soft-constraint violation.
        double m_cur = rollout_merit(z, kappas, inits);
        bool converged = false;
        int stagnant = 0;
        for (int it = 0; it < cfg_.max_sqp_iters; ++it) {
            sol.sqp_iters = it + 1;
            build_equalities(qp, inits, kappas, z);
            qp.H = H0 + prox * eye;
            qp.g = g0 - prox * z;
            QpResult qr = qps.solve(qp, &z);
            sol.qp_iters += qr.iters;

            Eigen::VectorXd du(2 * N_);
            for (int i = 0; i < N_; ++i) {
                du[2 * i] = qr.z[ui(i)] - z[ui(i)];
                du[2 * i + 1] = qr.z[ui(i) + 1] - z[ui(i) + 1];
            }
            const double step_inf = du.lpNorm<Eigen::Infinity>();

            const double m_before = m_cur;
            double alpha = 1.0;
            bool accepted = false;
            for (int ls = 0; ls < 10 && !accepted; ++ls) {
                std::vector<ControlInput> u_try(N_);
                for (int i = 0; i < N_; ++i)
                    u_try[i] = ControlInput{
                        std::clamp(z[ui(i)] + alpha * du[2 * i], -cfg_.delta_rate_abs,
                                   cfg_.delta_rate_abs),
                        std::clamp(z[ui(i) + 1] + alpha * du[2 * i + 1], -cfg_.tau_rate_abs,
                                   cfg_.tau_rate_abs)};
                Eigen::VectorXd z_try = Eigen::VectorXd::Zero(nz());
                bool ok = true;
                rollout_into(inits, kappas, u_try, z_try, &ok);
                seed_slacks(z_try);
                const double m_try = ok ? rollout_merit(z_try, kappas, inits)
                                        : std::numeric_limits<double>::infinity();
                if (m_try <= m_cur - 1e-10 * std::max(1.0, std::abs(m_cur))) {
                    z = z_try;
                    m_cur = m_try;
                    accepted = true;
                } else {
                    alpha *= 0.5;
                }
            }

            if (!accepted)
                prox = std::min(prox * 10.0, 1e4);
            else if (alpha == 1.0)
                prox = std::max(prox / 2.0, 1e-6);
            else if (alpha <= 0.25)
                prox = std::min(prox * 5.0, 1e4);

            sol.kkt_residual = qr.dual_res;
#ifdef UARC_MPC_DEBUG
            std::printf("sqp %d: qpit=%d acc=%d alpha=%.4g step=%.3g prox=%.2g merit=%.6f\n", it,
                        qr.iters, accepted, alpha, step_inf, prox, m_cur);
#endif
            stagnant = (m_before - m_cur) <= 1e-9 * std::max(1.0, std::abs(m_cur)) ? stagnant + 1 : 0;
            if ((accepted && alpha * step_inf <= 3e-5) || stagnant >= 2) {
                converged = true;
                break;
            }
            if (!accepted && prox >= 1e4) {
                // heavily damped directions no longer help: stationary at
                // working precision when the remaining step is small
                converged = step_inf <= 1e-2;
                break;
            }
        }

        // re-simulate the returned inputs: the published trajectories satisfy
        // the shooting dynamics exactly by construction
        for (int i = 0; i < N_; ++i)
            sol.inputs[i] = ControlInput{std::clamp(z[ui(i)], -cfg_.delta_rate_abs, cfg_.delta_rate_abs),
                                         std::clamp(z[ui(i) + 1], -cfg_.tau_rate_abs, cfg_.tau_rate_abs)};
        sol.trajectories.assign(m_, {});
        for (int l = 0; l < m_; ++l) {
            sol.trajectories[l].reserve(N_ + 1);
            FrenetState x = inits[l];
            sol.trajectories[l].push_back(x);
            for (int i = 0; i < N_; ++i) {
                try {
                    x = step(x, sol.inputs[i], kappas[l], params_, cfg_.dt,
                             cfg_.prediction_substeps);
                } catch (const std::exception&) {
                    converged = false;  // prediction left the valid domain
                }
                sol.trajectories[l].push_back(x);
            }
        }

        // slack actually required by the returned trajectories (the decision
        // variable carries a small seeding epsilon on top)
        double slack_total = 0.0;
        for (int i = 0; i <= N_; ++i) {
            double need = 0.0;
            for (int l = 0; l < m_; ++l) {
                const auto& x = sol.trajectories[l][i];
                need = std::max(need, std::abs(x.eta) - 0.5 * cfg_.track_width);
                need = std::max(need, x.s - s_max_);
                if (cfg_.phi_bounds_enabled)
                    need = std::max({need, x.phi - cfg_.phi_max, cfg_.phi_min - x.phi});
            }
            slack_total += std::max(0.0, need);
        }
        sol.slack_usage = slack_total;
        sol.cost = trajectory_cost(sol);
        sol.max_constraint_violation = rollout_violation(sol, s_max);
        if (!converged)
            sol.status = SolveStatus::max_iter;
        else
            sol.status = slack_total > 1e-6 ? SolveStatus::infeasible_relaxed : SolveStatus::optimal;
        return sol;
    }

    // Exact rollout of the inputs; on a model-domain exception the last valid
    // state is held and ok (when given) reports the failure.
    void rollout_into(const std::vector<FrenetState>& inits,
                      const std::vector<CurvatureModel>& kappas,
                      const std::vector<ControlInput>& u, Eigen::VectorXd& z,
                      bool* ok = nullptr) const {
        if (ok) *ok = true;
        for (int l = 0; l < m_; ++l) {
            FrenetState x = inits[l];
            z.segment<8>(xi(l, 0)) = x.vector();
            for (int i = 0; i < N_; ++i) {
                try {
                    x = step(x, u[i], kappas[l], params_, cfg_.dt, cfg_.prediction_substeps);
                } catch (const std::exception&) {
                    if (ok) *ok = false;
                }
                z.segment<8>(xi(l, i + 1)) = x.vector();
            }
        }
        for (int i = 0; i < N_; ++i) {
            z[ui(i)] = u[i].delta_rate;
            z[ui(i) + 1] = u[i].tau_rate;
        }
    }

    // Penalized merit of a rolled-out iterate: the decision cost already
    // carries the shared-slack penalty; hard-box excursions of the rollout
    // are charged at the same rate.
    double rollout_merit(const Eigen::VectorXd& z, const std::vector<CurvatureModel>&,
                         const std::vector<FrenetState>&) const {
        double pen = 0.0;
        for (int l = 0; l < m_; ++l)
            for (int i = 1; i <= N_; ++i) {
                const int o = xi(l, i);
                pen += std::max(0.0, cfg_.vx_min - z[o + 3]) + std::max(0.0, z[o + 3] - cfg_.vx_max);
                pen += std::max(0.0, std::abs(z[o + 4]) - cfg_.vy_abs);
                pen += std::max(0.0, std::abs(z[o + 5]) - cfg_.r_abs);
                pen += std::max(0.0, std::abs(z[o + 6]) - cfg_.delta_abs);
                pen += std::max(0.0, cfg_.tau_min - z[o + 7]) + std::max(0.0, z[o + 7] - cfg_.tau_max);
                pen += std::max(0.0, -z[o]);
            }
        return decision_cost(z) + cfg_.slack_penalty * pen;
    }

    void seed_slacks(Eigen::VectorXd& z) const {
        for (int i = 0; i <= N_; ++i) {
            double need = 0.0;
            for (int l = 0; l < m_; ++l) {
                const double eta = z[xi(l, i) + 1];
                const double phi = z[xi(l, i) + 2];
                need = std::max(need, std::abs(eta) - 0.5 * cfg_.track_width);
                need = std::max(need, z[xi(l, i)] - s_max_);
                if (cfg_.phi_bounds_enabled)
                    need = std::max({need, phi - cfg_.phi_max, cfg_.phi_min - phi});
            }
            z[si(i)] = std::max(need, 0.0) + 1e-6;
        }
    }

    void build_cost(QpProblem& qp) const {
        const int n = nz();
        std::vector<Eigen::Triplet<double>> h;
        qp.g = Eigen::VectorXd::Zero(n);
        const double inv_m = 1.0 / m_;
        for (int l = 0; l < m_; ++l) {
            for (int i = 1; i <= N_ - 1; ++i) {
                h.emplace_back(xi(l, i) + 1, xi(l, i) + 1, 2.0 * cfg_.q_eta * inv_m);
                h.emplace_back(xi(l, i) + 2, xi(l, i) + 2, 2.0 * cfg_.q_phi * inv_m);
            }
            h.emplace_back(xi(l, N_) + 3, xi(l, N_) + 3, 2.0 * cfg_.q_vx * inv_m);
            h.emplace_back(xi(l, N_) + 4, xi(l, N_) + 4, 2.0 * cfg_.q_vy * inv_m);
            // progress telescopes to -q_s (s_{N-1} - s_0)
            qp.g[xi(l, N_ - 1)] -= cfg_.q_s * inv_m;
            qp.g[xi(l, 0)] += cfg_.q_s * inv_m;
        }
        for (int i = 0; i < N_; ++i) {
            h.emplace_back(ui(i), ui(i), 2.0 * cfg_.r_delta);
            h.emplace_back(ui(i) + 1, ui(i) + 1, 2.0 * cfg_.r_tau);
        }
        for (int i = 0; i <= N_; ++i) qp.g[si(i)] = cfg_.slack_penalty;
        qp.H.resize(n, n);
        qp.H.setFromTriplets(h.begin(), h.end());
    }

    void build_bounds(QpProblem& qp, const std::vector<FrenetState>& inits, double s_max) const {
        const int n = nz();
        const double INF = std::numeric_limits<double>::infinity();
        qp.lb = Eigen::VectorXd::Constant(n, -INF);
        qp.ub = Eigen::VectorXd::Constant(n, INF);
        for (int l = 0; l < m_; ++l) {
            for (int i = 1; i <= N_; ++i) {
                const int o = xi(l, i);
                qp.lb[o] = 0.0;  // the s <= s_max side is soft, see build_soft_rows
                qp.lb[o + 3] = cfg_.vx_min;
                qp.ub[o + 3] = cfg_.vx_max;
                qp.lb[o + 4] = -cfg_.vy_abs;
                qp.ub[o + 4] = cfg_.vy_abs;
                qp.lb[o + 5] = -cfg_.r_abs;
                qp.ub[o + 5] = cfg_.r_abs;
                qp.lb[o + 6] = -cfg_.delta_abs;
                qp.ub[o + 6] = cfg_.delta_abs;
                qp.lb[o + 7] = cfg_.tau_min;
                qp.ub[o + 7] = cfg_.tau_max;
            }
            // stage 0 is pinned by the initial-state equality; if the seed s
            // exceeds the perceived range the bound still applies
            (void)inits;
        }
        for (int i = 0; i < N_; ++i) {
            qp.lb[ui(i)] = -cfg_.delta_rate_abs;
            qp.ub[ui(i)] = cfg_.delta_rate_abs;
            qp.lb[ui(i) + 1] = -cfg_.tau_rate_abs;
            qp.ub[ui(i) + 1] = cfg_.tau_rate_abs;
        }
        for (int i = 0; i <= N_; ++i) qp.lb[si(i)] = 0.0;
    }

    // Track, heading and perceived-road-end constraints share one nonnegative
    // slack per stage. The s <= s_max side must be soft: when perception
    // shrinks or the road ends inside the braking distance a hard bound has
    // no feasible point, and the penalized overshoot is the safe fallback.
    void build_soft_rows(QpProblem& qp) const {
        const int rows_per = (cfg_.phi_bounds_enabled ? 4 : 2) + 1;
        const int mr = m_ * (N_ + 1) * rows_per;
        std::vector<Eigen::Triplet<double>> c;
        qp.d = Eigen::VectorXd::Zero(mr);
        int r = 0;
        const double half_w = 0.5 * cfg_.track_width;
        for (int l = 0; l < m_; ++l)
            for (int i = 0; i <= N_; ++i) {
                c.emplace_back(r, xi(l, i) + 1, 1.0);
                c.emplace_back(r, si(i), -1.0);
                qp.d[r++] = half_w;
                c.emplace_back(r, xi(l, i) + 1, -1.0);
                c.emplace_back(r, si(i), -1.0);
                qp.d[r++] = half_w;
                c.emplace_back(r, xi(l, i), 1.0);
                c.emplace_back(r, si(i), -1.0);
                qp.d[r++] = s_max_;
                if (cfg_.phi_bounds_enabled) {
                    c.emplace_back(r, xi(l, i) + 2, 1.0);
                    c.emplace_back(r, si(i), -1.0);
                    qp.d[r++] = cfg_.phi_max;
                    c.emplace_back(r, xi(l, i) + 2, -1.0);
                    c.emplace_back(r, si(i), -1.0);
                    qp.d[r++] = -cfg_.phi_min;
                }
            }
        qp.C.resize(mr, nz());
        qp.C.setFromTriplets(c.begin(), c.end());
    }

    void build_equalities(QpProblem& qp, const std::vector<FrenetState>& inits,
                          const std::vector<CurvatureModel>& kappas,
                          const Eigen::VectorXd& z) const {
        const int me = m_ * (N_ + 1) * 8;
        std::vector<Eigen::Triplet<double>> a;
        qp.b = Eigen::VectorXd::Zero(me);
        int row = 0;
        Mat8 A;
        Mat82 B;
        for (int l = 0; l < m_; ++l) {
            for (int k = 0; k < 8; ++k) {
                a.emplace_back(row + k, xi(l, 0) + k, 1.0);
                qp.b[row + k] = inits[l].vector()[k];
            }
            row += 8;
            for (int i = 0; i < N_; ++i) {
                const FrenetState xbar = FrenetState::from_vector(z.segment<8>(xi(l, i)));
                const ControlInput ubar{z[ui(i)], z[ui(i) + 1]};
                const FrenetState fbar =
                    detail::predict_step(xbar, ubar, kappas[l], params_, cfg_.dt,
                                         cfg_.prediction_substeps, A, B);
                // x_{i+1} - A x_i - B u_i = f(xbar, ubar) - A xbar - B ubar
                Vec8 rhs = fbar.vector() - A * xbar.vector();
                rhs -= B * Eigen::Vector2d(ubar.delta_rate, ubar.tau_rate);
                for (int k = 0; k < 8; ++k) {
                    a.emplace_back(row + k, xi(l, i + 1) + k, 1.0);
                    for (int j = 0; j < 8; ++j)
                        if (A(k, j) != 0.0) a.emplace_back(row + k, xi(l, i) + j, -A(k, j));
                    for (int j = 0; j < 2; ++j)
                        if (B(k, j) != 0.0) a.emplace_back(row + k, ui(i) + j, -B(k, j));
                    qp.b[row + k] = rhs[k];
                }
                row += 8;
            }
        }
        qp.A.resize(me, nz());
        qp.A.setFromTriplets(a.begin(), a.end());
    }

    // quadratic cost + slack penalty, evaluated on raw decision variables
    double decision_cost(const Eigen::VectorXd& z) const {
        double cost = 0.0;
        const double inv_m = 1.0 / m_;
        for (int l = 0; l < m_; ++l) {
            for (int i = 1; i <= N_ - 1; ++i) {
                const double eta = z[xi(l, i) + 1], phi = z[xi(l, i) + 2];
                cost += inv_m * (cfg_.q_eta * eta * eta + cfg_.q_phi * phi * phi);
            }
            cost -= inv_m * cfg_.q_s * (z[xi(l, N_ - 1)] - z[xi(l, 0)]);
            const double vx = z[xi(l, N_) + 3], vy = z[xi(l, N_) + 4];
            cost += inv_m * (cfg_.q_vx * vx * vx + cfg_.q_vy * vy * vy);
        }
        for (int i = 0; i < N_; ++i) {
            cost += cfg_.r_delta * z[ui(i)] * z[ui(i)];
            cost += cfg_.r_tau * z[ui(i) + 1] * z[ui(i) + 1];
        }
        for (int i = 0; i <= N_; ++i) cost += cfg_.slack_penalty * std::max(0.0, z[si(i)]);
        return cost;
    }

    double trajectory_cost(const Solution& sol) const {
        double cost = 0.0;
        const double inv_m = 1.0 / static_cast<double>(sol.trajectories.size());
        for (const auto& traj : sol.trajectories) {
            cost += inv_m * initial_stage_cost(sol.inputs[0], cfg_);
            for (int i = 1; i <= N_ - 1; ++i)
                cost += inv_m * stage_cost(traj[i - 1], traj[i], sol.inputs[i], cfg_);
            cost += inv_m * terminal_cost(traj[N_], cfg_);
        }
        return cost;
    }

    double rollout_violation(const Solution& sol, double s_max) const {
        double worst = 0.0;
        for (const auto& traj : sol.trajectories) {
            for (int i = 0; i <= N_; ++i) {
                const FrenetState& x = traj[i];
                const double slack = 0.0;  // violations are reported raw
                (void)slack;
                worst = std::max(worst, std::abs(x.eta) - 0.5 * cfg_.track_width);
                if (cfg_.phi_bounds_enabled)
                    worst = std::max({worst, x.phi - cfg_.phi_max, cfg_.phi_min - x.phi});
                if (i >= 1) {
                    worst = std::max({worst, x.s - s_max, -x.s});
                    worst = std::max({worst, cfg_.vx_min - x.vx, x.vx - cfg_.vx_max});
                    worst = std::max({worst, std::abs(x.vy) - cfg_.vy_abs});
                    worst = std::max({worst, std::abs(x.r) - cfg_.r_abs});
                    worst = std::max({worst, std::abs(x.delta) - cfg_.delta_abs});
                    worst = std::max({worst, cfg_.tau_min - x.tau, x.tau - cfg_.tau_max});
                }
            }
        }
        return std::max(worst, 0.0);
    }

    ControlConfig cfg_;
    VehicleParams params_;
    int m_{1};
    int N_{35};
    double s_max_{0.0};
};

}  // namespace uarc
