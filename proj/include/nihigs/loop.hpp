#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "nihigs/higs.hpp"
#include "nihigs/lti.hpp"
#include "nihigs/ni.hpp"

namespace nihigs {

/// Verdict on the closed-loop design hypotheses: positive feedback of the
/// plant with the integrator-gain element is asymptotically stable when the
/// plant is a minimal certified-dissipative system, 0 < omega_h <= k_h, and
/// k_h G(1) < 1. The gain condition is evaluated in the product form, which
/// stays meaningful when G(1) <= 0; gain_sign_warning flags that regime
/// (the reciprocal form k_h < 1/G(1) presumes G(1) > 0).
template <typename Scalar>
struct DesignReport {
    Scalar g1 = Scalar(0);  // DC value G(1) = C (I - A)^{-1} B
    bool condition_omega = false;
    bool condition_gain = false;
    bool minimal = false;
    bool det_ima_ok = false;
    bool certificate_ok = false;
    bool lyapunov_pd = false;  // [[P, -C'], [-C, 1/k_h]] positive definite
    bool gain_sign_warning = false;
    bool verdict = false;
};

template <typename Scalar>
DesignReport<Scalar> validate_design(const StateSpaceModel<Scalar>& m,
                                     const NICertificate<Scalar>& cert,
                                     const HigsParams<Scalar>& p,
                                     Scalar cert_tol = Scalar(1e-9)) {
    DesignReport<Scalar> r;
    r.g1 = transfer_eval(m, Scalar(1));  // throws when I - A is (near-)singular
    r.det_ima_ok = true;
    r.gain_sign_warning = (r.g1 <= Scalar(0));
    r.condition_omega = (p.omega_h > Scalar(0)) && (p.omega_h <= p.k_h);
    r.condition_gain = (p.k_h * r.g1 < Scalar(1));
    r.minimal = is_minimal(m).minimal;
    r.certificate_ok = check_ni_certificate(m, cert, cert_tol).verdict;

    const Eigen::Index n = m.n();
    MatrixX<Scalar> block(n + 1, n + 1);
    block.topLeftCorner(n, n) = cert.P;
    block.topRightCorner(n, 1) = -m.C.transpose();
    block.bottomLeftCorner(1, n) = -m.C;
    block(n, n) = Scalar(1) / p.k_h;
    r.lyapunov_pd = (detail::eig_min_sym<Scalar>(block) > Scalar(0));

    r.verdict = r.condition_omega && r.condition_gain && r.minimal && r.det_ima_ok &&
                r.certificate_ok && r.lyapunov_pd;
    return r;
}

/// Picks controller constants that satisfy the design hypotheses with the
/// requested margin in (0, 1): k_h = margin / G(1) and omega_h = k_h / 2 when
/// G(1) > 0. When G(1) <= 0 the gain condition holds for any k_h > 0, so the
/// defaults (1, 1/2) are returned.
template <typename Scalar>
HigsParams<Scalar> design_higs(const StateSpaceModel<Scalar>& m, Scalar margin) {
    if (!(margin > Scalar(0) && margin < Scalar(1))) {
        throw std::invalid_argument("margin: must lie in (0, 1)");
    }
    const Scalar g1 = transfer_eval(m, Scalar(1));
    if (g1 > Scalar(0)) {
        const Scalar k_h = margin / g1;
        return HigsParams<Scalar>(k_h / Scalar(2), k_h);
    }
    return HigsParams<Scalar>(Scalar(0.5), Scalar(1));
}

/// Closed-loop energy  W(x, x_tilde) = x'Px/2 + x_tilde^2/(2 k_h) - (Cx) x_tilde,
/// positive definite exactly when the design report's block matrix is.
template <typename Scalar>
Scalar lyapunov_w(const StateSpaceModel<Scalar>& m, const NICertificate<Scalar>& cert,
                  const HigsParams<Scalar>& p, const VectorX<Scalar>& x, Scalar x_tilde) {
    if (x.size() != m.n() || cert.n() != m.n()) {
        throw std::invalid_argument("lyapunov_w: dimension mismatch");
    }
    const Scalar quad = Scalar(0.5) * (x.transpose() * cert.P * x)(0);
    return quad + x_tilde * x_tilde / (Scalar(2) * p.k_h) - (m.C * x)(0)*x_tilde;
}

/// Per-step record of the positive-feedback interconnection e = y, u = y_higs.
/// Row k holds the pre-update pair (x_k, x_tilde_k) together with the signals
/// of step k; the state reached after the last step is kept separately.
template <typename Scalar>
struct ClosedLoopTrace {
    MatrixX<Scalar> states;        // steps x n, row k = x_k'
    VectorX<Scalar> x_tilde;       // controller state x_tilde_k
    VectorX<Scalar> e;             // e_k = C x_k (equals the plant output y_k)
    VectorX<Scalar> u;             // u_k = x_tilde_{k+1}
    std::vector<HigsMode> mode;    // branch taken at step k
    VectorX<Scalar> w;             // Lyapunov value W(x_k, x_tilde_k); empty without certificate
    bool has_w = false;

    VectorX<Scalar> x_final;       // plant state after the last recorded step
    Scalar xh_final = Scalar(0);
    bool diverged = false;

    int n_steps_requested = 0;
    HigsParams<Scalar> params{Scalar(0), Scalar(1)};
    VectorX<Scalar> x0;
    Scalar xh0 = Scalar(0);

    Eigen::Index steps() const { return e.size(); }
};

/// Runs the loop for n_steps steps. Update order per step k:
///   e_k = C x_k;  controller step on (x_tilde_k, e_k) gives x_tilde_{k+1};
///   u_k = x_tilde_{k+1};  x_{k+1} = A x_k + B u_k.
/// The plant has no feedthrough, so the loop is explicit (no algebraic
/// iteration). A non-finite state truncates the trace and sets `diverged`.
template <typename Scalar>
ClosedLoopTrace<Scalar> simulate(const StateSpaceModel<Scalar>& m,
                                 const HigsParams<Scalar>& p, const VectorX<Scalar>& x0,
                                 Scalar xh0, int n_steps,
                                 const NICertificate<Scalar>* cert = nullptr) {
    if (n_steps < 1) {
        throw std::invalid_argument("n_steps: must be >= 1");
    }
    if (x0.size() != m.n()) {
        throw std::invalid_argument("x0: length " + std::to_string(x0.size()) +
                                    " does not match model dimension " +
                                    std::to_string(m.n()));
    }
    if (!x0.allFinite() || !std::isfinite(static_cast<double>(xh0))) {
        throw std::invalid_argument("initial state: non-finite entry");
    }
    if (cert != nullptr && cert->n() != m.n()) {
        throw std::invalid_argument("certificate dimension does not match model");
    }

    const Eigen::Index n = m.n();
    ClosedLoopTrace<Scalar> t;
    t.n_steps_requested = n_steps;
    t.params = p;
    t.x0 = x0;
    t.xh0 = xh0;
    t.has_w = (cert != nullptr);

    t.states.resize(n_steps, n);
    t.x_tilde.resize(n_steps);
    t.e.resize(n_steps);
    t.u.resize(n_steps);
    t.mode.reserve(n_steps);
    if (t.has_w) {
        t.w.resize(n_steps);
    }

    VectorX<Scalar> x = x0;
    HigsState<Scalar> hs{xh0, HigsMode::Unset};
    Eigen::Index recorded = 0;

    for (int k = 0; k < n_steps; ++k) {
        const Scalar e = (m.C * x)(0);
        t.states.row(k) = x.transpose();
        t.x_tilde(k) = hs.x_tilde;
        t.e(k) = e;
        if (t.has_w) {
            t.w(k) = lyapunov_w(m, *cert, p, x, hs.x_tilde);
        }

        const auto step = higs_step(p, hs, e);
        t.u(k) = step.y;
        t.mode.push_back(step.mode);
        ++recorded;

        x = (m.A * x + m.B * step.y).eval();
        hs = step.state;

        if (!x.allFinite() || !std::isfinite(static_cast<double>(hs.x_tilde))) {
            t.diverged = true;
            x = t.states.row(recorded - 1).transpose();  // last finite state
            hs.x_tilde = t.x_tilde(recorded - 1);
            break;
        }
    }

    if (recorded < n_steps) {
        t.states.conservativeResize(recorded, n);
        t.x_tilde.conservativeResize(recorded);
        t.e.conservativeResize(recorded);
        t.u.conservativeResize(recorded);
        if (t.has_w) {
            t.w.conservativeResize(recorded);
        }
    }
    t.x_final = x;
    t.xh_final = hs.x_tilde;
    return t;
}

template <typename Scalar>
struct TraceAnalysis {
    bool converged = false;
    Scalar initial_norm = Scalar(0);
    Scalar final_norm = Scalar(0);
    Eigen::Index w_monotone_from = -1;  // -1 when no Lyapunov column is present
    Scalar max_w_increase = Scalar(0);  // over steps k >= 1
    long modes_integrator = 0;
    long modes_gain = 0;
    bool diverged = false;
};

/// Desk-scale stability verdict on a recorded trace: converged when the
/// combined terminal norm ||(x, x_tilde)|| falls below threshold_rel times
/// the initial combined norm. Lyapunov monotonicity is judged from step 1,
/// since the controller may start outside its sector.
template <typename Scalar>
TraceAnalysis<Scalar> analyze_trace(const ClosedLoopTrace<Scalar>& t,
                                    Scalar threshold_rel = Scalar(1e-3)) {
    if (t.steps() < 1) {
        throw std::invalid_argument("analyze_trace: empty trace");
    }
    TraceAnalysis<Scalar> a;
    a.diverged = t.diverged;
    a.initial_norm = std::sqrt(t.x0.squaredNorm() + t.xh0 * t.xh0);
    a.final_norm = std::sqrt(t.x_final.squaredNorm() + t.xh_final * t.xh_final);
    a.converged = !t.diverged && (a.final_norm <= threshold_rel * a.initial_norm);

    for (const HigsMode mode : t.mode) {
        (mode == HigsMode::Integrator ? a.modes_integrator : a.modes_gain)++;
    }

    if (t.has_w && t.steps() >= 2) {
        const Scalar tol_w =
            Scalar(1e-10) * std::max(Scalar(1), std::abs(t.w(1)));
        a.max_w_increase = -std::numeric_limits<Scalar>::infinity();
        for (Eigen::Index k = 1; k + 1 < t.steps(); ++k) {
            a.max_w_increase = std::max(a.max_w_increase, t.w(k + 1) - t.w(k));
        }
        if (t.steps() == 2) {
            a.max_w_increase = Scalar(0);
        }
        Eigen::Index from = t.steps() - 1;
        while (from > 0 && t.w(from) - t.w(from - 1) <= tol_w) {
            --from;
        }
        a.w_monotone_from = from;
    }
    return a;
}

}  // namespace nihigs
