#pragma once
// Dynamic bicycle model: simplified Pacejka lateral tire forces, polynomial
// drivetrain force, curvilinear-frame and Cartesian-frame ODEs sharing the
// body-acceleration rows bit-exactly, analytic Jacobians, and fixed-step RK4
// integration. Pure functions over immutable parameters.

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "uarc/geometry.hpp"

namespace uarc {

using Vec8 = Eigen::Matrix<double, 8, 1>;
using Mat8 = Eigen::Matrix<double, 8, 8>;
using Mat82 = Eigen::Matrix<double, 8, 2>;

struct VehicleParams {
    double m{0.2};        // kg
    double inertia_z{0.0004};  // kg m^2
    double l_f{0.056};    // m, CoG to front axle
    double l_r{0.045};    // m, CoG to rear axle
    double tire_b_f{8.0};
    double tire_b_r{8.0};
    double tire_c_f{1.4};
    double tire_c_r{1.7};
    double tire_d_f{0.43};  // N
    double tire_d_r{0.6};   // N
    // drivetrain force polynomial F_x = c1 tau + c2 tau^2 + c3 vx + c4 vx^2
    //                                 + c5 tau vx + c6. Resistance terms carry
    //                                 negative coefficients: with tau >= 0
    //                                 only, braking comes entirely from drag
    //                                 and rolling resistance.
    double c1{0.98};
    double c2{0.0};
    double c3{0.0};
    double c4{-0.03};
    double c5{-0.02};
    double c6{-0.08};
};

// Miniature racing car parameter set used throughout the built-in
// experiments ("miniature-paper" preset).
inline VehicleParams miniature_params() { return VehicleParams{}; }

struct FrenetState {
    double s{0.0};      // progress along reference, m
    double eta{0.0};    // lateral offset, m, positive left
    double phi{0.0};    // heading error, rad
    double vx{0.0};     // body longitudinal velocity, m/s
    double vy{0.0};     // body lateral velocity, m/s
    double r{0.0};      // yaw rate, rad/s
    double delta{0.0};  // steering angle, rad
    double tau{0.0};    // drivetrain input

    Vec8 vector() const { return (Vec8() << s, eta, phi, vx, vy, r, delta, tau).finished(); }
    static FrenetState from_vector(const Vec8& v) {
        return FrenetState{v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7]};
    }
};

struct CartesianState {
    double x{0.0};
    double y{0.0};
    double psi{0.0};  // yaw, rad, (-pi, pi]
    double vx{0.0};
    double vy{0.0};
    double r{0.0};
    double delta{0.0};
    double tau{0.0};

    Vec8 vector() const { return (Vec8() << x, y, psi, vx, vy, r, delta, tau).finished(); }
    static CartesianState from_vector(const Vec8& v) {
        return CartesianState{v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7]};
    }
    PlanarPose pose() const { return PlanarPose{wrap_angle(psi), x, y}; }
};

struct ControlInput {
    double delta_rate{0.0};  // rad/s
    double tau_rate{0.0};    // 1/s
};

// Constant-curvature reference, handy for tests and straight/circular setups.
struct ConstantCurvature {
    double kappa{0.0};
    double evaluate(double) const { return kappa; }
    double evaluate_rate(double) const { return 0.0; }
};

struct TireForces {
    double f_front{0.0};    // N
    double f_rear{0.0};     // N
    double slip_front{0.0};  // rad
    double slip_rear{0.0};   // rad
};

// Slip angles use the restoring-force convention (positive slip produces a
// positive, leftward lateral force on a left steer): the front slip is
// delta - atan((vy + l_f r)/vx), the rear -atan((vy - l_r r)/vx). The
// resulting side-slip mode is damped; the sign-flipped variant is
// anti-damped and diverges even in straight running.
inline TireForces tire_forces(double vx, double vy, double r, double delta,
                              const VehicleParams& p) {
    if (!(vx > 0.0)) throw std::domain_error("tire_forces: vx must be positive");
    TireForces t;
    t.slip_front = delta - std::atan((vy + p.l_f * r) / vx);
    t.slip_rear = -std::atan((vy - p.l_r * r) / vx);
    t.f_front = p.tire_d_f * std::sin(p.tire_c_f * std::atan(p.tire_b_f * t.slip_front));
    t.f_rear = p.tire_d_r * std::sin(p.tire_c_r * std::atan(p.tire_b_r * t.slip_rear));
    return t;
}

inline TireForces tire_forces(const FrenetState& x, const VehicleParams& p) {
    return tire_forces(x.vx, x.vy, x.r, x.delta, p);
}
inline TireForces tire_forces(const CartesianState& x, const VehicleParams& p) {
    return tire_forces(x.vx, x.vy, x.r, x.delta, p);
}

inline double longitudinal_force(double tau, double vx, const VehicleParams& p) {
    return p.c1 * tau + p.c2 * tau * tau + p.c3 * vx + p.c4 * vx * vx + p.c5 * tau * vx + p.c6;
}

namespace detail {

// Body-frame accelerations (vxdot, vydot, rdot); identical rows of both frame
// variants. When jac is non-null it receives d(ax, ay, rdot)/d(vx, vy, r,
// delta, tau) as a 3x5 block.
inline Eigen::Vector3d body_accelerations(double vx, double vy, double r, double delta,
                                          double tau, const VehicleParams& p,
                                          Eigen::Matrix<double, 3, 5>* jac = nullptr) {
    if (!(vx > 0.0)) throw std::domain_error("body_accelerations: vx must be positive");
    const double qf = (vy + p.l_f * r) / vx;
    const double qr = (vy - p.l_r * r) / vx;
    const double af = delta - std::atan(qf);
    const double ar = -std::atan(qr);
    const double inner_f = p.tire_c_f * std::atan(p.tire_b_f * af);
    const double inner_r = p.tire_c_r * std::atan(p.tire_b_r * ar);
    const double fyf = p.tire_d_f * std::sin(inner_f);
    const double fyr = p.tire_d_r * std::sin(inner_r);
    const double fx = longitudinal_force(tau, vx, p);
    const double sd = std::sin(delta), cd = std::cos(delta);

    Eigen::Vector3d acc;
    acc[0] = (fx - fyf * sd + p.m * vy * r) / p.m;
    acc[1] = (fyr + fyf * cd - p.m * vx * r) / p.m;
    acc[2] = (fyf * p.l_f * cd - fyr * p.l_r) / p.inertia_z;

    if (jac) {
        const double dqf_dvx = -qf / vx, dqf_dvy = 1.0 / vx, dqf_dr = p.l_f / vx;
        const double dqr_dvx = -qr / vx, dqr_dvy = 1.0 / vx, dqr_dr = -p.l_r / vx;
        const double daf = -1.0 / (1.0 + qf * qf);  // d(slip_f)/dq
        const double dar = -1.0 / (1.0 + qr * qr);
        const double dfyf_daf =
            p.tire_d_f * std::cos(inner_f) * p.tire_c_f * p.tire_b_f / (1.0 + p.tire_b_f * p.tire_b_f * af * af);
        const double dfyr_dar =
            p.tire_d_r * std::cos(inner_r) * p.tire_c_r * p.tire_b_r / (1.0 + p.tire_b_r * p.tire_b_r * ar * ar);
        const double fyf_vx = dfyf_daf * daf * dqf_dvx;
        const double fyf_vy = dfyf_daf * daf * dqf_dvy;
        const double fyf_r = dfyf_daf * daf * dqf_dr;
        const double fyf_delta = dfyf_daf;
        const double fyr_vx = dfyr_dar * dar * dqr_dvx;
        const double fyr_vy = dfyr_dar * dar * dqr_dvy;
        const double fyr_r = dfyr_dar * dar * dqr_dr;
        const double dfx_dvx = p.c3 + 2.0 * p.c4 * vx + p.c5 * tau;
        const double dfx_dtau = p.c1 + 2.0 * p.c2 * tau + p.c5 * vx;

        (*jac)(0, 0) = (dfx_dvx - sd * fyf_vx) / p.m;
        (*jac)(0, 1) = (-sd * fyf_vy) / p.m + r;
        (*jac)(0, 2) = (-sd * fyf_r) / p.m + vy;
        (*jac)(0, 3) = (-fyf * cd - sd * fyf_delta) / p.m;
        (*jac)(0, 4) = dfx_dtau / p.m;

        (*jac)(1, 0) = (fyr_vx + cd * fyf_vx) / p.m - r;
        (*jac)(1, 1) = (fyr_vy + cd * fyf_vy) / p.m;
        (*jac)(1, 2) = (fyr_r + cd * fyf_r) / p.m - vx;
        (*jac)(1, 3) = (-fyf * sd + cd * fyf_delta) / p.m;
        (*jac)(1, 4) = 0.0;

        (*jac)(2, 0) = (p.l_f * cd * fyf_vx - p.l_r * fyr_vx) / p.inertia_z;
        (*jac)(2, 1) = (p.l_f * cd * fyf_vy - p.l_r * fyr_vy) / p.inertia_z;
        (*jac)(2, 2) = (p.l_f * cd * fyf_r - p.l_r * fyr_r) / p.inertia_z;
        (*jac)(2, 3) = (-p.l_f * sd * fyf + p.l_f * cd * fyf_delta) / p.inertia_z;
        (*jac)(2, 4) = 0.0;
    }
    return acc;
}

}  // namespace detail

// Curvilinear-frame state derivative. Kappa must provide evaluate(s) and
// evaluate_rate(s).
template <class Kappa>
FrenetState frenet_derivative(const FrenetState& x, const ControlInput& u, const Kappa& kappa,
                              const VehicleParams& p) {
    const double k = kappa.evaluate(x.s);
    const double denom = 1.0 - x.eta * k;
    if (!(denom > 0.0))
        throw std::domain_error("frenet_derivative: curvilinear frame singular (1 - eta*kappa <= 0)");
    const auto acc = detail::body_accelerations(x.vx, x.vy, x.r, x.delta, x.tau, p);
    const double num = x.vx * std::cos(x.phi) - x.vy * std::sin(x.phi);
    FrenetState d;
    d.s = num / denom;
    d.eta = x.vx * std::sin(x.phi) + x.vy * std::cos(x.phi);
    d.phi = x.r - k * d.s;
    d.vx = acc[0];
    d.vy = acc[1];
    d.r = acc[2];
    d.delta = u.delta_rate;
    d.tau = u.tau_rate;
    return d;
}

// Continuous-time Jacobians of frenet_derivative w.r.t. state and input.
template <class Kappa>
void frenet_jacobian(const FrenetState& x, const ControlInput&, const Kappa& kappa,
                     const VehicleParams& p, Mat8& A, Mat82& B) {
    const double k = kappa.evaluate(x.s);
    const double kp = kappa.evaluate_rate(x.s);
    const double denom = 1.0 - x.eta * k;
    if (!(denom > 0.0))
        throw std::domain_error("frenet_jacobian: curvilinear frame singular");
    const double cphi = std::cos(x.phi), sphi = std::sin(x.phi);
    const double num = x.vx * cphi - x.vy * sphi;
    const double sdot = num / denom;

    Eigen::Matrix<double, 3, 5> acc_jac;
    detail::body_accelerations(x.vx, x.vy, x.r, x.delta, x.tau, p, &acc_jac);

    A.setZero();
    B.setZero();
    // row 0: sdot
    A(0, 0) = num * x.eta * kp / (denom * denom);
    A(0, 1) = num * k / (denom * denom);
    A(0, 2) = (-x.vx * sphi - x.vy * cphi) / denom;
    A(0, 3) = cphi / denom;
    A(0, 4) = -sphi / denom;
    // row 1: etadot
    A(1, 2) = num;
    A(1, 3) = sphi;
    A(1, 4) = cphi;
    // row 2: phidot = r - k sdot
    A(2, 0) = -kp * sdot - k * A(0, 0);
    A(2, 1) = -k * A(0, 1);
    A(2, 2) = -k * A(0, 2);
    A(2, 3) = -k * A(0, 3);
    A(2, 4) = -k * A(0, 4);
    A(2, 5) = 1.0;
    // rows 3-5: body accelerations w.r.t. (vx, vy, r, delta, tau)
    A.block<3, 5>(3, 3) = acc_jac;
    // rows 6-7: input passthrough
    B(6, 0) = 1.0;
    B(7, 1) = 1.0;
}

// Cartesian ground-truth derivative; body-acceleration rows share the
// implementation with the curvilinear variant.
inline CartesianState cartesian_derivative(const CartesianState& x, const ControlInput& u,
                                           const VehicleParams& p) {
    const auto acc = detail::body_accelerations(x.vx, x.vy, x.r, x.delta, x.tau, p);
    CartesianState d;
    const double c = std::cos(x.psi), s = std::sin(x.psi);
    d.x = x.vx * c - x.vy * s;
    d.y = x.vx * s + x.vy * c;
    d.psi = x.r;
    d.vx = acc[0];
    d.vy = acc[1];
    d.r = acc[2];
    d.delta = u.delta_rate;
    d.tau = u.tau_rate;
    return d;
}

namespace detail {

template <class State, class Deriv>
Vec8 rk4_step_vec(const Vec8& x0, const ControlInput& u, double h, Deriv&& f) {
    const Vec8 k1 = f(State::from_vector(x0), u).vector();
    const Vec8 k2 = f(State::from_vector(Vec8(x0 + 0.5 * h * k1)), u).vector();
    const Vec8 k3 = f(State::from_vector(Vec8(x0 + 0.5 * h * k2)), u).vector();
    const Vec8 k4 = f(State::from_vector(Vec8(x0 + h * k3)), u).vector();
    return x0 + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace detail

// Classical RK4 with zero-order-hold inputs, dt split into substeps.
template <class Kappa>
FrenetState step(const FrenetState& x, const ControlInput& u, const Kappa& kappa,
                 const VehicleParams& p, double dt, int substeps = 1) {
    if (!(dt > 0.0) || substeps < 1) throw std::invalid_argument("step: bad dt/substeps");
    Vec8 v = x.vector();
    const double h = dt / substeps;
    for (int i = 0; i < substeps; ++i)
        v = detail::rk4_step_vec<FrenetState>(v, u, h, [&](const FrenetState& xs, const ControlInput& us) {
            return frenet_derivative(xs, us, kappa, p);
        });
    if (!v.allFinite()) throw std::runtime_error("step: integration diverged");
    return FrenetState::from_vector(v);
}

inline CartesianState step(const CartesianState& x, const ControlInput& u, const VehicleParams& p,
                           double dt, int substeps = 1) {
    if (!(dt > 0.0) || substeps < 1) throw std::invalid_argument("step: bad dt/substeps");
    Vec8 v = x.vector();
    const double h = dt / substeps;
    for (int i = 0; i < substeps; ++i)
        v = detail::rk4_step_vec<CartesianState>(v, u, h, [&](const CartesianState& xs, const ControlInput& us) {
            return cartesian_derivative(xs, us, p);
        });
    if (!v.allFinite()) throw std::runtime_error("step: integration diverged");
    CartesianState out = CartesianState::from_vector(v);
    out.psi = wrap_angle(out.psi);
    return out;
}

// One RK4 step of the curvilinear model together with the discrete-time
// Jacobians d x+ / d x and d x+ / d u (single substep; the MPC prediction
// model).
template <class Kappa>
FrenetState step_with_jacobian(const FrenetState& x, const ControlInput& u, const Kappa& kappa,
                               const VehicleParams& p, double h, Mat8& A, Mat82& B) {
    Mat8 fx;
    Mat82 fu;
    const Mat8 eye = Mat8::Identity();

    const Vec8 x0 = x.vector();
    const FrenetState s1 = FrenetState::from_vector(x0);
    const Vec8 k1 = frenet_derivative(s1, u, kappa, p).vector();
    frenet_jacobian(s1, u, kappa, p, fx, fu);
    const Mat8 A1 = fx;
    const Mat82 B1 = fu;

    const FrenetState s2 = FrenetState::from_vector(Vec8(x0 + 0.5 * h * k1));
    const Vec8 k2 = frenet_derivative(s2, u, kappa, p).vector();
    frenet_jacobian(s2, u, kappa, p, fx, fu);
    const Mat8 A2 = fx * (eye + 0.5 * h * A1);
    const Mat82 B2 = fu + fx * (0.5 * h * B1);

    const FrenetState s3 = FrenetState::from_vector(Vec8(x0 + 0.5 * h * k2));
    const Vec8 k3 = frenet_derivative(s3, u, kappa, p).vector();
    frenet_jacobian(s3, u, kappa, p, fx, fu);
    const Mat8 A3 = fx * (eye + 0.5 * h * A2);
    const Mat82 B3 = fu + fx * (0.5 * h * B2);

    const FrenetState s4 = FrenetState::from_vector(Vec8(x0 + h * k3));
    const Vec8 k4 = frenet_derivative(s4, u, kappa, p).vector();
    frenet_jacobian(s4, u, kappa, p, fx, fu);
    const Mat8 A4 = fx * (eye + h * A3);
    const Mat82 B4 = fu + fx * (h * B3);

    A = eye + (h / 6.0) * (A1 + 2.0 * A2 + 2.0 * A3 + A4);
    B = (h / 6.0) * (B1 + 2.0 * B2 + 2.0 * B3 + B4);
    return FrenetState::from_vector(Vec8(x0 + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)));
}

}  // namespace uarc
