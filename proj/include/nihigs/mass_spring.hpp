#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "nihigs/lti.hpp"
#include "nihigs/ni.hpp"

// Built-in demo scenario: a two-mass spring chain with a force actuator on the
// second mass and its displacement as output. State ordering is
// [x_a, v_a, x_c, v_c] (displacement and velocity of each mass).

namespace nihigs {

struct MassSpringParams {
    double m1 = 0.04;  // kg
    double m2 = 0.02;  // kg
    double k1 = 2.0;   // N/m, wall spring
    double k2 = 1.0;   // N/m, coupling spring
};

template <typename Scalar>
ContinuousModel<Scalar> mass_spring_continuous(const MassSpringParams& p = {}) {
    MatrixX<Scalar> Ac = MatrixX<Scalar>::Zero(4, 4);
    Ac(0, 1) = Scalar(1);
    Ac(1, 0) = Scalar(-(p.k1 + p.k2) / p.m1);
    Ac(1, 2) = Scalar(p.k2 / p.m1);
    Ac(2, 3) = Scalar(1);
    Ac(3, 0) = Scalar(p.k2 / p.m2);
    Ac(3, 2) = Scalar(-p.k2 / p.m2);

    MatrixX<Scalar> Bc = MatrixX<Scalar>::Zero(4, 1);
    Bc(3, 0) = Scalar(1.0 / p.m2);

    MatrixX<Scalar> C = MatrixX<Scalar>::Zero(1, 4);
    C(0, 2) = Scalar(1);
    return {Ac, Bc, C};
}

/// Nominal sampling period of the demo scenario.
inline constexpr double mass_spring_period = 0.04;

/// Closed-form ZOH discretization of the nominal chain at h = 0.04, written in
/// the modal frequencies 5 and 10 rad/s (c1 = cos 0.2, s2 = sin 0.4, ...).
/// Used as an independent reference for the matrix-exponential path.
template <typename Scalar>
StateSpaceModel<Scalar> mass_spring_reference_discrete() {
    const Scalar c1 = std::cos(Scalar(0.2));
    const Scalar c2 = std::cos(Scalar(0.4));
    const Scalar s1 = std::sin(Scalar(0.2));
    const Scalar s2 = std::sin(Scalar(0.4));

    MatrixX<Scalar> A(4, 4);
    A << c1 / 3 + 2 * c2 / 3, s1 / 15 + s2 / 15, c1 / 3 - c2 / 3, s1 / 15 - s2 / 30,
        -5 * s1 / 3 - 20 * s2 / 3, c1 / 3 + 2 * c2 / 3, -5 * s1 / 3 + 10 * s2 / 3,
        c1 / 3 - c2 / 3,
        2 * c1 / 3 - 2 * c2 / 3, 2 * s1 / 15 - s2 / 15, 2 * c1 / 3 + c2 / 3,
        2 * s1 / 15 + s2 / 30,
        -10 * s1 / 3 + 20 * s2 / 3, 2 * c1 / 3 - 2 * c2 / 3, -10 * s1 / 3 - 10 * s2 / 3,
        2 * c1 / 3 + c2 / 3;

    MatrixX<Scalar> B(4, 1);
    B << -2 * c1 / 3 + c2 / 6 + Scalar(0.5),
        10 * s1 / 3 - 5 * s2 / 3,
        -4 * c1 / 3 - c2 / 6 + Scalar(1.5),
        20 * s1 / 3 + 5 * s2 / 3;

    MatrixX<Scalar> C(1, 4);
    C << Scalar(0), Scalar(0), Scalar(1), Scalar(0);
    return {A, B, C};
}

/// Mechanical energy weight of the nominal chain: with V(x) = x'Px/2 this is
/// kinetic plus potential energy, the natural storage for the sampled system.
template <typename Scalar>
MatrixX<Scalar> mass_spring_storage() {
    MatrixX<Scalar> P(4, 4);
    P << Scalar(3), Scalar(0), Scalar(-1), Scalar(0),
        Scalar(0), Scalar(0.04), Scalar(0), Scalar(0),
        Scalar(-1), Scalar(0), Scalar(1), Scalar(0),
        Scalar(0), Scalar(0), Scalar(0), Scalar(0.02);
    return P;
}

/// A quoted storage matrix is only determined up to the quadratic-form
/// convention (x'Px versus x'Px/2). Resolves the scale by direct computation:
/// returns the candidate alpha whose alpha*P has the smallest output-map
/// equality residual against the model.
template <typename Scalar>
Scalar resolve_storage_scale(const StateSpaceModel<Scalar>& m, const MatrixX<Scalar>& P,
                             const std::vector<Scalar>& candidates = {Scalar(1),
                                                                      Scalar(0.5)}) {
    Scalar best_alpha = candidates.front();
    Scalar best_residual = std::numeric_limits<Scalar>::infinity();
    for (const Scalar alpha : candidates) {
        const NICertificate<Scalar> cert((alpha * P).eval());
        const auto report = check_ni_certificate(m, cert, Scalar(1e-9));
        if (report.equality_residual < best_residual) {
            best_residual = report.equality_residual;
            best_alpha = alpha;
        }
    }
    return best_alpha;
}

/// Demo initial conditions and controller constants.
template <typename Scalar>
VectorX<Scalar> mass_spring_x0() {
    VectorX<Scalar> x0(4);
    x0 << Scalar(3), Scalar(-2), Scalar(5), Scalar(-1);
    return x0;
}

inline constexpr double mass_spring_omega_h = 0.1;
inline constexpr double mass_spring_k_h = 0.6;
inline constexpr int mass_spring_demo_steps = 2000;

}  // namespace nihigs
