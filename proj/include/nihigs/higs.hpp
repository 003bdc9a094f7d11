#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nihigs {

enum class HigsMode { Integrator, Gain, Unset };

inline char mode_char(HigsMode m) {
    switch (m) {
        case HigsMode::Integrator: return 'I';
        case HigsMode::Gain: return 'G';
        default: return '?';
    }
}

/// Hybrid integrator-gain element: integrates its input with rate omega_h
/// while the sector constraint holds, otherwise acts as the static gain k_h.
/// omega_h is the per-step (discrete-time) integrator frequency; no sampling
/// period is applied internally.
template <typename Scalar>
struct HigsParams {
    Scalar omega_h;
    Scalar k_h;

    HigsParams(Scalar omega_h_, Scalar k_h_) : omega_h(omega_h_), k_h(k_h_) {
        if (!(std::isfinite(static_cast<double>(omega_h)) && omega_h >= Scalar(0))) {
            throw std::invalid_argument("omega_h: must be finite and >= 0");
        }
        if (!(std::isfinite(static_cast<double>(k_h)) && k_h > Scalar(0))) {
            throw std::invalid_argument("k_h: must be finite and > 0");
        }
    }
};

template <typename Scalar>
struct HigsState {
    Scalar x_tilde = Scalar(0);
    HigsMode last_mode = HigsMode::Unset;
};

/// Sector test on the would-be integrator successor w = x_tilde + omega_h e:
///   w e >= w^2 / k_h  within a magnitude-scaled round-off slack.
/// Boundary points count as inside, so exact-boundary steps integrate.
template <typename Scalar>
bool in_sector(const HigsParams<Scalar>& p, Scalar x_tilde, Scalar e) {
    const Scalar w = x_tilde + p.omega_h * e;
    const Scalar slack =
        Scalar(1e-14) * std::max({Scalar(1), e * e, x_tilde * x_tilde});
    return w * e >= w * w / p.k_h - slack;
}

template <typename Scalar>
struct HigsStepResult {
    HigsState<Scalar> state;
    Scalar y;  // output at step k equals the next state x_tilde_{k+1}
    HigsMode mode;
};

template <typename Scalar>
HigsStepResult<Scalar> higs_step(const HigsParams<Scalar>& p, const HigsState<Scalar>& s,
                                 Scalar e) {
    if (!std::isfinite(static_cast<double>(e))) {
        throw std::invalid_argument("higs_step: non-finite input e");
    }
    Scalar x_next;
    HigsMode mode;
    if (in_sector(p, s.x_tilde, e)) {
        x_next = s.x_tilde + p.omega_h * e;
        mode = HigsMode::Integrator;
    } else {
        x_next = p.k_h * e;
        mode = HigsMode::Gain;
    }
    return {HigsState<Scalar>{x_next, mode}, x_next, mode};
}

/// Storage function x_tilde^2 / (2 k_h); zero exactly at x_tilde = 0.
template <typename Scalar>
Scalar sani_storage(const HigsParams<Scalar>& p, Scalar x_tilde) {
    return x_tilde * x_tilde / (Scalar(2) * p.k_h);
}

template <typename Scalar>
struct SaniStepCheck {
    Scalar slack;  // e (x' - x) - (V(x') - V(x)), nonnegative when dissipation holds
    bool holds;
    HigsMode mode;
};

/// Per-step dissipation check: V(x_{k+1}) - V(x_k) <= e_k (x_{k+1} - x_k),
/// which must hold for every state and input in both modes.
template <typename Scalar>
SaniStepCheck<Scalar> check_sani_step(const HigsParams<Scalar>& p, Scalar x_tilde,
                                      Scalar e) {
    const auto step = higs_step(p, HigsState<Scalar>{x_tilde, HigsMode::Unset}, e);
    const Scalar x_next = step.state.x_tilde;
    const Scalar slack = e * (x_next - x_tilde) -
                         (sani_storage(p, x_next) - sani_storage(p, x_tilde));
    const Scalar tol =
        Scalar(1e-12) * std::max({Scalar(1), e * e, x_tilde * x_tilde});
    return {slack, slack >= -tol, step.mode};
}

}  // namespace nihigs
