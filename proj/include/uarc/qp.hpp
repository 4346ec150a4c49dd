#pragma once
// Sparse convex QP solver:
//
//   minimize    1/2 z'Hz + g'z
//   subject to  A z = b,   C z <= d,   lb <= z <= ub
//
// Mehrotra predictor-corrector primal-dual interior point method on the
// condensed KKT system, factorized with a regularized sparse LDL'. Built for
// the multiple-shooting control subproblems: H positive semidefinite,
// thousands of variables, block-banded equality structure.

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

namespace uarc {

struct QpProblem {
    Eigen::SparseMatrix<double> H;  // n x n, symmetric
    Eigen::VectorXd g;
    Eigen::SparseMatrix<double> A;  // m_eq x n
    Eigen::VectorXd b;
    Eigen::SparseMatrix<double> C;  // m_in x n
    Eigen::VectorXd d;
    Eigen::VectorXd lb, ub;  // +-inf where absent

    int n() const { return static_cast<int>(g.size()); }
    int m_eq() const { return static_cast<int>(b.size()); }
    int m_in() const { return static_cast<int>(d.size()); }
};

struct QpResult {
    Eigen::VectorXd z;
    Eigen::VectorXd y_eq;   // equality multipliers
    Eigen::VectorXd y_in;   // inequality multipliers (>= 0)
    int iters{0};
    bool converged{false};
    double gap{0.0};
    double primal_res{0.0};
    double dual_res{0.0};
    double objective{0.0};
};

class QpSolver {
public:
    QpResult solve(const QpProblem& qp, const Eigen::VectorXd* warm = nullptr) {
        const int n = qp.n(), me = qp.m_eq(), mi = qp.m_in();
        const double INF = std::numeric_limits<double>::infinity();

        std::vector<int> lo_idx, up_idx;
        for (int i = 0; i < n; ++i) {
            if (qp.lb.size() && qp.lb[i] > -INF) lo_idx.push_back(i);
            if (qp.ub.size() && qp.ub[i] < INF) up_idx.push_back(i);
        }
        const int nl = static_cast<int>(lo_idx.size());
        const int nu = static_cast<int>(up_idx.size());

        // objective scaling: the solution is invariant, the duals scale with
        // it; keeps slack-penalty-sized costs from starving the dual updates
        const double obj_scale =
            1.0 / std::max(1.0, qp.g.size() ? qp.g.lpNorm<Eigen::Infinity>() / 10.0 : 1.0);
        const Eigen::SparseMatrix<double> Hs = qp.H * obj_scale;
        const Eigen::VectorXd gs = qp.g * obj_scale;

        Eigen::VectorXd z = warm ? *warm : Eigen::VectorXd::Zero(n);
        // keep the start strictly inside the box
        for (int k = 0; k < nl; ++k) {
            const int i = lo_idx[k];
            const double hi = (qp.ub.size() && qp.ub[i] < INF) ? qp.ub[i] : qp.lb[i] + 2.0;
            const double margin = std::min(1e-3, 0.25 * (hi - qp.lb[i]));
            z[i] = std::max(z[i], qp.lb[i] + margin);
        }
        for (int k = 0; k < nu; ++k) {
            const int i = up_idx[k];
            const double lo = (qp.lb.size() && qp.lb[i] > -INF) ? qp.lb[i] : qp.ub[i] - 2.0;
            const double margin = std::min(1e-3, 0.25 * (qp.ub[i] - lo));
            z[i] = std::min(z[i], qp.ub[i] - margin);
        }

        Eigen::VectorXd y = Eigen::VectorXd::Zero(me);
        Eigen::VectorXd sc(mi), yc(mi), sl(nl), zl(nl), su(nu), zu(nu);
        if (mi) {
            const Eigen::VectorXd cz = qp.C * z;
            for (int k = 0; k < mi; ++k) sc[k] = std::max(qp.d[k] - cz[k], 0.1);
            yc.setConstant(0.1);
        }
        for (int k = 0; k < nl; ++k) sl[k] = std::max(z[lo_idx[k]] - qp.lb[lo_idx[k]], 1e-3);
        zl.setConstant(nl ? 0.1 : 0.0);
        for (int k = 0; k < nu; ++k) su[k] = std::max(qp.ub[up_idx[k]] - z[up_idx[k]], 1e-3);
        zu.setConstant(nu ? 0.1 : 0.0);

        const int comp_total = mi + nl + nu;
        const int dim = n + me;
        const double delta = 1e-9;

        // row lists of C for the eliminated-inequality terms
        std::vector<std::vector<std::pair<int, double>>> c_rows(mi);
        for (int col = 0; col < qp.C.outerSize(); ++col)
            for (Eigen::SparseMatrix<double>::InnerIterator it(qp.C, col); it; ++it)
                c_rows[it.row()].emplace_back(col, it.value());

        Eigen::SparseMatrix<double> K(dim, dim);
        bool analyzed = false;
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;

        QpResult res;
        const double gnorm = 1.0 + gs.lpNorm<Eigen::Infinity>();
        const double bnorm = 1.0 + (me ? qp.b.lpNorm<Eigen::Infinity>() : 0.0);

        for (int iter = 0; iter < 100; ++iter) {
            res.iters = iter + 1;

            // residuals
            Eigen::VectorXd rd = Hs.selfadjointView<Eigen::Lower>() * z + gs;
            if (me) rd += qp.A.transpose() * y;
            if (mi) rd += qp.C.transpose() * yc;
            for (int k = 0; k < nl; ++k) rd[lo_idx[k]] -= zl[k];
            for (int k = 0; k < nu; ++k) rd[up_idx[k]] += zu[k];
            Eigen::VectorXd rp = me ? Eigen::VectorXd(qp.A * z - qp.b) : Eigen::VectorXd();
            Eigen::VectorXd rc = mi ? Eigen::VectorXd(qp.C * z + sc - qp.d) : Eigen::VectorXd();

            double mu = 0.0;
            if (comp_total) {
                if (mi) mu += sc.dot(yc);
                if (nl) mu += sl.dot(zl);
                if (nu) mu += su.dot(zu);
                mu /= comp_total;
            }

            res.dual_res = rd.lpNorm<Eigen::Infinity>() / gnorm;
            res.primal_res = std::max(me ? rp.lpNorm<Eigen::Infinity>() / bnorm : 0.0,
                                      mi ? rc.lpNorm<Eigen::Infinity>() : 0.0);
            res.gap = mu;
            if (res.dual_res < 1e-8 && res.primal_res < 1e-8 && mu < 1e-10) {
                res.converged = true;
                break;
            }

            // assemble the condensed KKT matrix
            Eigen::VectorXd sigma_diag = Eigen::VectorXd::Constant(n, delta);
            for (int k = 0; k < nl; ++k) sigma_diag[lo_idx[k]] += zl[k] / sl[k];
            for (int k = 0; k < nu; ++k) sigma_diag[up_idx[k]] += zu[k] / su[k];

            std::vector<Eigen::Triplet<double>> trips;
            trips.reserve(Hs.nonZeros() + (me ? qp.A.nonZeros() : 0) * 2 +
                          (mi ? qp.C.nonZeros() * 4 : 0) + dim);
            for (int col = 0; col < Hs.outerSize(); ++col)
                for (Eigen::SparseMatrix<double>::InnerIterator it(Hs, col); it; ++it)
                    trips.emplace_back(it.row(), it.col(), it.value());
            for (int i = 0; i < n; ++i) trips.emplace_back(i, i, sigma_diag[i]);
            // C' W C, W = yc / sc, row by row (rows are tiny)
            for (int r = 0; r < mi; ++r) {
                const double w = yc[r] / sc[r];
                for (const auto& [ci, vi] : c_rows[r])
                    for (const auto& [cj, vj] : c_rows[r])
                        if (ci >= cj) trips.emplace_back(ci, cj, w * vi * vj);
            }
            if (me)
                for (int col = 0; col < qp.A.outerSize(); ++col)
                    for (Eigen::SparseMatrix<double>::InnerIterator it(qp.A, col); it; ++it)
                        trips.emplace_back(n + it.row(), it.col(), it.value());
            for (int i = 0; i < me; ++i) trips.emplace_back(n + i, n + i, -delta);
            K.setFromTriplets(trips.begin(), trips.end());

            if (!analyzed) {
                ldlt.analyzePattern(K);
                analyzed = true;
            }
            ldlt.factorize(K);
            if (ldlt.info() != Eigen::Success) {
                res.converged = false;
                break;
            }

            auto solve_kkt = [&](const Eigen::VectorXd& rhs_z, const Eigen::VectorXd& rhs_y,
                                 Eigen::VectorXd& dz, Eigen::VectorXd& dy) {
                Eigen::VectorXd rhs(dim);
                rhs.head(n) = rhs_z;
                if (me) rhs.tail(me) = rhs_y;
                Eigen::VectorXd sol = ldlt.solve(rhs);
                // one round of iterative refinement
                Eigen::VectorXd resid = rhs - K.selfadjointView<Eigen::Lower>() * sol;
                sol += ldlt.solve(resid);
                dz = sol.head(n);
                dy = me ? Eigen::VectorXd(sol.tail(me)) : Eigen::VectorXd();
            };

            auto build_rhs = [&](const Eigen::VectorXd& rsy, const Eigen::VectorXd& rszl,
                                 const Eigen::VectorXd& rszu) {
                Eigen::VectorXd rhs = -rd;
                for (int k = 0; k < mi; ++k) {
                    // contribution of the eliminated inequality block
                    const double t = (yc[k] * rc[k] - rsy[k]) / sc[k];
                    for (const auto& [col, val] : c_rows[k]) rhs[col] -= val * t;
                }
                for (int k = 0; k < nl; ++k) rhs[lo_idx[k]] -= rszl[k] / sl[k];
                for (int k = 0; k < nu; ++k) rhs[up_idx[k]] += rszu[k] / su[k];
                return rhs;
            };

            auto recover = [&](const Eigen::VectorXd& dz, const Eigen::VectorXd& rsy,
                               const Eigen::VectorXd& rszl, const Eigen::VectorXd& rszu,
                               Eigen::VectorXd& dsc, Eigen::VectorXd& dyc, Eigen::VectorXd& dzl,
                               Eigen::VectorXd& dzu) {
                if (mi) {
                    dsc = -rc - qp.C * dz;
                    dyc.resize(mi);
                    for (int k = 0; k < mi; ++k) dyc[k] = (-rsy[k] - yc[k] * dsc[k]) / sc[k];
                }
                dzl.resize(nl);
                for (int k = 0; k < nl; ++k)
                    dzl[k] = (-rszl[k] - zl[k] * dz[lo_idx[k]]) / sl[k];
                dzu.resize(nu);
                for (int k = 0; k < nu; ++k)
                    dzu[k] = (-rszu[k] + zu[k] * dz[up_idx[k]]) / su[k];
            };

            auto step_len = [&](const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
                double a = 1.0;
                for (int k = 0; k < v.size(); ++k)
                    if (dv[k] < 0.0) a = std::min(a, -v[k] / dv[k]);
                return a;
            };

            // affine (predictor) step
            Eigen::VectorXd rsy_a(mi), rszl_a(nl), rszu_a(nu);
            for (int k = 0; k < mi; ++k) rsy_a[k] = sc[k] * yc[k];
            for (int k = 0; k < nl; ++k) rszl_a[k] = sl[k] * zl[k];
            for (int k = 0; k < nu; ++k) rszu_a[k] = su[k] * zu[k];

            Eigen::VectorXd dz_a, dy_a, dsc_a, dyc_a, dzl_a, dzu_a;
            solve_kkt(build_rhs(rsy_a, rszl_a, rszu_a), me ? Eigen::VectorXd(-rp) : Eigen::VectorXd(),
                      dz_a, dy_a);
            recover(dz_a, rsy_a, rszl_a, rszu_a, dsc_a, dyc_a, dzl_a, dzu_a);

            Eigen::VectorXd dsl_a(nl), dsu_a(nu);
            for (int k = 0; k < nl; ++k) dsl_a[k] = dz_a[lo_idx[k]];
            for (int k = 0; k < nu; ++k) dsu_a[k] = -dz_a[up_idx[k]];

            double ap = 1.0, ad = 1.0;
            if (mi) {
                ap = std::min(ap, step_len(sc, dsc_a));
                ad = std::min(ad, step_len(yc, dyc_a));
            }
            ap = std::min({ap, step_len(sl, dsl_a), step_len(su, dsu_a)});
            ad = std::min({ad, step_len(zl, dzl_a), step_len(zu, dzu_a)});

            double mu_aff = 0.0;
            if (comp_total) {
                for (int k = 0; k < mi; ++k)
                    mu_aff += (sc[k] + ap * dsc_a[k]) * (yc[k] + ad * dyc_a[k]);
                for (int k = 0; k < nl; ++k)
                    mu_aff += (sl[k] + ap * dsl_a[k]) * (zl[k] + ad * dzl_a[k]);
                for (int k = 0; k < nu; ++k)
                    mu_aff += (su[k] + ap * dsu_a[k]) * (zu[k] + ad * dzu_a[k]);
                mu_aff /= comp_total;
            }
            const double sigma =
                (comp_total && mu > 0.0) ? std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3.0) : 0.0;

            // corrector step
            Eigen::VectorXd rsy(mi), rszl(nl), rszu(nu);
            for (int k = 0; k < mi; ++k)
                rsy[k] = sc[k] * yc[k] + dsc_a[k] * dyc_a[k] - sigma * mu;
            for (int k = 0; k < nl; ++k)
                rszl[k] = sl[k] * zl[k] + dsl_a[k] * dzl_a[k] - sigma * mu;
            for (int k = 0; k < nu; ++k)
                rszu[k] = su[k] * zu[k] + dsu_a[k] * dzu_a[k] - sigma * mu;

            Eigen::VectorXd dz, dy, dsc, dyc, dzl, dzu;
            solve_kkt(build_rhs(rsy, rszl, rszu), me ? Eigen::VectorXd(-rp) : Eigen::VectorXd(), dz,
                      dy);
            recover(dz, rsy, rszl, rszu, dsc, dyc, dzl, dzu);

            Eigen::VectorXd dsl(nl), dsu(nu);
            for (int k = 0; k < nl; ++k) dsl[k] = dz[lo_idx[k]];
            for (int k = 0; k < nu; ++k) dsu[k] = -dz[up_idx[k]];

            const double tau = 0.995;
            double a_p = 1.0, a_d = 1.0;
            if (mi) {
                a_p = std::min(a_p, step_len(sc, dsc));
                a_d = std::min(a_d, step_len(yc, dyc));
            }
            a_p = std::min({a_p, step_len(sl, dsl), step_len(su, dsu)});
            a_d = std::min({a_d, step_len(zl, dzl), step_len(zu, dzu)});
            a_p = std::min(1.0, tau * a_p);
            a_d = std::min(1.0, tau * a_d);
            if (comp_total == 0) a_p = a_d = 1.0;

            z += a_p * dz;
            if (me) y += a_d * dy;
            if (mi) {
                sc += a_p * dsc;
                yc += a_d * dyc;
            }
            sl += a_p * dsl;
            zl += a_d * dzl;
            su += a_p * dsu;
            zu += a_d * dzu;
            if (comp_total == 0 && me) {
                // pure equality QP: one Newton step solves it
            }
        }

        // clamp the last interior iterate exactly onto the box
        for (int k = 0; k < nl; ++k) z[lo_idx[k]] = std::max(z[lo_idx[k]], qp.lb[lo_idx[k]]);
        for (int k = 0; k < nu; ++k) z[up_idx[k]] = std::min(z[up_idx[k]], qp.ub[up_idx[k]]);

        res.z = z;
        res.y_eq = y / obj_scale;
        res.y_in = mi ? Eigen::VectorXd(yc / obj_scale) : Eigen::VectorXd();
        res.objective = 0.5 * z.dot(qp.H.selfadjointView<Eigen::Lower>() * z) + qp.g.dot(z);
        return res;
    }
};

}  // namespace uarc
