#pragma once

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace nihigs {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Discrete-time SISO plant  x_{k+1} = A x_k + B u_k,  y_k = C x_k.
/// No direct feedthrough: the output at step k depends on x_k only.
template <typename Scalar>
struct StateSpaceModel {
    MatrixX<Scalar> A;  // n x n
    MatrixX<Scalar> B;  // n x 1
    MatrixX<Scalar> C;  // 1 x n

    Eigen::Index n() const { return A.rows(); }
};

/// Continuous-time SISO plant  dx/dt = Ac x + Bc u,  y = C x.
template <typename Scalar>
struct ContinuousModel {
    MatrixX<Scalar> Ac;
    MatrixX<Scalar> Bc;
    MatrixX<Scalar> C;

    Eigen::Index n() const { return Ac.rows(); }
};

namespace detail {

inline std::string shape_str(Eigen::Index r, Eigen::Index c) {
    std::ostringstream os;
    os << r << "x" << c;
    return os.str();
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* name) {
    if (!m.allFinite()) {
        throw std::invalid_argument(std::string(name) + ": non-finite entry");
    }
}

template <typename DA, typename DB, typename DC>
void require_siso_shapes(const Eigen::MatrixBase<DA>& A,
                         const Eigen::MatrixBase<DB>& B,
                         const Eigen::MatrixBase<DC>& C) {
    const Eigen::Index n = A.rows();
    if (n < 1 || A.cols() != n) {
        throw std::invalid_argument("A: must be square and non-empty, got " +
                                    shape_str(A.rows(), A.cols()));
    }
    if (B.rows() != n || B.cols() != 1) {
        throw std::invalid_argument("B: expected " + shape_str(n, 1) + ", got " +
                                    shape_str(B.rows(), B.cols()));
    }
    if (C.rows() != 1 || C.cols() != n) {
        throw std::invalid_argument("C: expected " + shape_str(1, n) + ", got " +
                                    shape_str(C.rows(), C.cols()));
    }
    require_finite(A, "A");
    require_finite(B, "B");
    require_finite(C, "C");
}

}  // namespace detail

/// Validates shapes (A square, B n x 1, C 1 x n, all finite) and builds a model.
template <typename DA, typename DB, typename DC>
StateSpaceModel<typename DA::Scalar> make_model(const Eigen::MatrixBase<DA>& A,
                                                const Eigen::MatrixBase<DB>& B,
                                                const Eigen::MatrixBase<DC>& C) {
    detail::require_siso_shapes(A, B, C);
    return {A.eval(), B.eval(), C.eval()};
}

template <typename DA, typename DB, typename DC>
ContinuousModel<typename DA::Scalar> make_continuous_model(const Eigen::MatrixBase<DA>& Ac,
                                                           const Eigen::MatrixBase<DB>& Bc,
                                                           const Eigen::MatrixBase<DC>& C) {
    detail::require_siso_shapes(Ac, Bc, C);
    return {Ac.eval(), Bc.eval(), C.eval()};
}

/// Matrix exponential by scaling and squaring with a diagonal Pade approximant
/// of order 6. The argument is scaled so its 1-norm is at most 1/4 before the
/// approximant is applied, which keeps the truncation error far below double
/// round-off at the sizes used here.
template <typename Scalar>
MatrixX<Scalar> expm(const MatrixX<Scalar>& M) {
    if (M.rows() != M.cols()) {
        throw std::invalid_argument("expm: matrix must be square, got " +
                                    detail::shape_str(M.rows(), M.cols()));
    }
    detail::require_finite(M, "expm");
    const Eigen::Index n = M.rows();
    const Scalar norm1 = M.cwiseAbs().colwise().sum().maxCoeff();

    int squarings = 0;
    if (norm1 > Scalar(0.25)) {
        squarings = static_cast<int>(std::ceil(std::log2(static_cast<double>(norm1) / 0.25)));
    }
    const MatrixX<Scalar> S = M / std::pow(Scalar(2), Scalar(squarings));

    // Pade(6,6) coefficients: c[j] = (12-j)! 6! / (12! j! (6-j)!)
    constexpr double c[7] = {1.0,         1.0 / 2.0,     5.0 / 44.0,   1.0 / 66.0,
                             1.0 / 792.0, 1.0 / 15840.0, 1.0 / 665280.0};

    const MatrixX<Scalar> I = MatrixX<Scalar>::Identity(n, n);
    const MatrixX<Scalar> S2 = S * S;
    const MatrixX<Scalar> S4 = S2 * S2;
    const MatrixX<Scalar> S6 = S4 * S2;
    const MatrixX<Scalar> U =
        S * (Scalar(c[1]) * I + Scalar(c[3]) * S2 + Scalar(c[5]) * S4);
    const MatrixX<Scalar> V =
        Scalar(c[0]) * I + Scalar(c[2]) * S2 + Scalar(c[4]) * S4 + Scalar(c[6]) * S6;

    MatrixX<Scalar> E = (V - U).partialPivLu().solve(V + U);
    for (int i = 0; i < squarings; ++i) {
        E = (E * E).eval();
    }
    return E;
}

/// Zero-order-hold discretization over period h:
///   A = exp(Ac h),  B = (integral_0^h exp(Ac s) ds) Bc,
/// both read off the exponential of the augmented matrix [[Ac, Bc], [0, 0]] h.
template <typename Scalar>
StateSpaceModel<Scalar> zoh_discretize(const ContinuousModel<Scalar>& cm, Scalar h) {
    if (!(h > Scalar(0))) {
        throw std::invalid_argument("h: sampling period must be > 0");
    }
    const Eigen::Index n = cm.n();
    MatrixX<Scalar> aug = MatrixX<Scalar>::Zero(n + 1, n + 1);
    aug.topLeftCorner(n, n) = cm.Ac * h;
    aug.topRightCorner(n, 1) = cm.Bc * h;

    const MatrixX<Scalar> E = expm<Scalar>(aug);
    StateSpaceModel<Scalar> m{E.topLeftCorner(n, n), E.topRightCorner(n, 1), cm.C};
    if (!m.A.allFinite() || !m.B.allFinite()) {
        throw std::runtime_error("zoh_discretize: non-finite result (||Ac h|| too large)");
    }
    return m;
}

/// Evaluates the transfer function G(z) = C (zI - A)^{-1} B at a real z.
/// Errors out when the reciprocal condition of zI - A falls below rcond_cap;
/// the error reports the smallest singular value.
template <typename Scalar>
Scalar transfer_eval(const StateSpaceModel<Scalar>& m, Scalar z,
                     Scalar rcond_cap = Scalar(1e-12)) {
    const Eigen::Index n = m.n();
    const MatrixX<Scalar> zIA = z * MatrixX<Scalar>::Identity(n, n) - m.A;
    Eigen::JacobiSVD<MatrixX<Scalar>> svd(zIA, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Scalar smax = svd.singularValues()(0);
    const Scalar smin = svd.singularValues()(n - 1);
    if (!(smax > Scalar(0)) || smin < rcond_cap * smax) {
        std::ostringstream os;
        os << "transfer_eval: zI - A is singular or near-singular at z = " << z
           << " (smallest singular value " << smin << ")";
        throw std::runtime_error(os.str());
    }
    return (m.C * svd.solve(m.B))(0, 0);
}

struct MinimalityReport {
    bool controllable = false;
    bool observable = false;
    bool minimal = false;
    Eigen::Index controllability_rank = 0;
    Eigen::Index observability_rank = 0;
};

namespace detail {

// Numerical rank: sigma_i counts as nonzero iff sigma_i > n * sigma_max * 1e-12.
template <typename Scalar>
Eigen::Index svd_rank(const MatrixX<Scalar>& M) {
    Eigen::JacobiSVD<MatrixX<Scalar>> svd(M);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || !(s(0) > Scalar(0))) return 0;
    const Scalar thresh = Scalar(M.rows()) * s(0) * Scalar(1e-12);
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) > thresh) ++r;
    }
    return r;
}

}  // namespace detail

/// Kalman rank tests on the n-block controllability and observability matrices.
template <typename Scalar>
MinimalityReport is_minimal(const StateSpaceModel<Scalar>& m) {
    const Eigen::Index n = m.n();
    MatrixX<Scalar> ctrb(n, n);
    MatrixX<Scalar> obsv(n, n);
    ctrb.col(0) = m.B;
    obsv.row(0) = m.C;
    for (Eigen::Index i = 1; i < n; ++i) {
        ctrb.col(i) = m.A * ctrb.col(i - 1);
        obsv.row(i) = obsv.row(i - 1) * m.A;
    }
    MinimalityReport r;
    r.controllability_rank = detail::svd_rank(ctrb);
    r.observability_rank = detail::svd_rank(obsv);
    r.controllable = (r.controllability_rank == n);
    r.observable = (r.observability_rank == n);
    r.minimal = r.controllable && r.observable;
    return r;
}

template <typename Scalar>
struct PlantStep {
    VectorX<Scalar> x_next;
    Scalar y;  // output of the current step, y = C x (before the update)
};

template <typename Scalar>
PlantStep<Scalar> plant_step(const StateSpaceModel<Scalar>& m, const VectorX<Scalar>& x,
                             Scalar u) {
    if (x.size() != m.n()) {
        throw std::invalid_argument("plant_step: state has length " +
                                    std::to_string(x.size()) + ", expected " +
                                    std::to_string(m.n()));
    }
    return {m.A * x + m.B * u, (m.C * x)(0)};
}

}  // namespace nihigs
