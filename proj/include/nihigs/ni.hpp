#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nihigs/lti.hpp"

namespace nihigs {

/// Storage-function weight certifying the dissipation inequality
///   V(x_{k+1}) - V(x_k) <= u_k (y_{k+1} - y_k)   with  V(x) = x' P x / 2,
/// which holds iff  A' P A - P <= 0  and  C = B' (I - A)^{-T} P.
/// The matrix is symmetrized on construction; definiteness is graded by the
/// checker, not enforced here.
template <typename Scalar>
struct NICertificate {
    MatrixX<Scalar> P;

    template <typename Derived>
    explicit NICertificate(const Eigen::MatrixBase<Derived>& candidate) {
        if (candidate.rows() != candidate.cols() || candidate.rows() < 1) {
            throw std::invalid_argument("P: must be square and non-empty, got " +
                                        detail::shape_str(candidate.rows(), candidate.cols()));
        }
        detail::require_finite(candidate, "P");
        P = ((candidate + candidate.transpose()) / Scalar(2)).eval();
    }

    Eigen::Index n() const { return P.rows(); }
};

/// Certificate for the bilinear-transform characterization:
///   X - A' X A >= 0  and  C = -B' (A' - I)^{-1} X (A + I).
template <typename Scalar>
struct BilinearCertificate {
    MatrixX<Scalar> X;

    template <typename Derived>
    explicit BilinearCertificate(const Eigen::MatrixBase<Derived>& candidate) {
        if (candidate.rows() != candidate.cols() || candidate.rows() < 1) {
            throw std::invalid_argument("X: must be square and non-empty, got " +
                                        detail::shape_str(candidate.rows(), candidate.cols()));
        }
        detail::require_finite(candidate, "X");
        X = ((candidate + candidate.transpose()) / Scalar(2)).eval();
    }

    Eigen::Index n() const { return X.rows(); }
};

template <typename Scalar>
struct CertificateReport {
    Scalar lmi_residual = Scalar(0);       // largest eigenvalue of A'PA - P
    Scalar equality_residual = Scalar(0);  // inf-norm of the output-map defect
    Scalar pd_margin = Scalar(0);          // smallest eigenvalue of P
    bool lmi_ok = false;
    bool equality_ok = false;
    bool pd_ok = false;
    bool verdict = false;
    Scalar tol = Scalar(0);
};

namespace detail {

template <typename Scalar>
Scalar eig_max_sym(const MatrixX<Scalar>& S) {
    Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(S, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

template <typename Scalar>
Scalar eig_min_sym(const MatrixX<Scalar>& S) {
    Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(S, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

template <typename Scalar>
Eigen::FullPivLU<MatrixX<Scalar>> invertible_lu(const MatrixX<Scalar>& M,
                                                const std::string& what) {
    Eigen::FullPivLU<MatrixX<Scalar>> lu(M);
    if (!lu.isInvertible()) {
        throw std::runtime_error(what + " is singular");
    }
    return lu;
}

template <typename Scalar>
CertificateReport<Scalar> grade_report(Scalar lmi_residual, Scalar equality_residual,
                                       const MatrixX<Scalar>& P, Scalar tol) {
    Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(P, Eigen::EigenvaluesOnly);
    const Scalar lo = es.eigenvalues().minCoeff();
    const Scalar hi = es.eigenvalues().maxCoeff();
    const Scalar norm = std::max(std::abs(lo), std::abs(hi));

    CertificateReport<Scalar> r;
    r.lmi_residual = lmi_residual;
    r.equality_residual = equality_residual;
    r.pd_margin = lo;
    r.tol = tol;
    r.lmi_ok = (lmi_residual <= tol);
    r.equality_ok = (equality_residual <= tol);
    r.pd_ok = (lo > Scalar(1e-12) * norm);
    r.verdict = r.lmi_ok && r.equality_ok && r.pd_ok;
    return r;
}

}  // namespace detail

/// Grades a certificate against the step-difference characterization.
/// Requires det(I - A) != 0.
template <typename Scalar>
CertificateReport<Scalar> check_ni_certificate(const StateSpaceModel<Scalar>& m,
                                               const NICertificate<Scalar>& cert,
                                               Scalar tol = Scalar(1e-9)) {
    const Eigen::Index n = m.n();
    if (cert.n() != n) {
        throw std::invalid_argument("certificate dimension " + std::to_string(cert.n()) +
                                    " does not match model dimension " + std::to_string(n));
    }
    const MatrixX<Scalar> I = MatrixX<Scalar>::Identity(n, n);
    const auto lu = detail::invertible_lu<Scalar>((I - m.A).transpose(), "I - A");

    const MatrixX<Scalar> S = m.A.transpose() * cert.P * m.A - cert.P;
    const Scalar lmi = detail::eig_max_sym<Scalar>(((S + S.transpose()) / Scalar(2)).eval());
    // C - B' (I - A)^{-T} P, evaluated as B' solve((I-A)', P)
    const MatrixX<Scalar> defect = m.C - m.B.transpose() * lu.solve(cert.P);
    const Scalar eq = defect.cwiseAbs().maxCoeff();
    return detail::grade_report<Scalar>(lmi, eq, cert.P, tol);
}

/// Grades a certificate against the bilinear-transform characterization.
/// Requires det(I + A) != 0 and det(I - A) != 0. The LMI residual keeps the
/// same sign convention as check_ni_certificate: largest eigenvalue of
/// A'XA - X, which must be <= tol.
template <typename Scalar>
CertificateReport<Scalar> check_bilinear_certificate(const StateSpaceModel<Scalar>& m,
                                                     const BilinearCertificate<Scalar>& cert,
                                                     Scalar tol = Scalar(1e-9)) {
    const Eigen::Index n = m.n();
    if (cert.n() != n) {
        throw std::invalid_argument("certificate dimension " + std::to_string(cert.n()) +
                                    " does not match model dimension " + std::to_string(n));
    }
    const MatrixX<Scalar> I = MatrixX<Scalar>::Identity(n, n);
    detail::invertible_lu<Scalar>(I + m.A, "I + A");
    const auto lu = detail::invertible_lu<Scalar>((m.A.transpose() - I).eval(), "A' - I");

    const MatrixX<Scalar> S = m.A.transpose() * cert.X * m.A - cert.X;
    const Scalar lmi = detail::eig_max_sym<Scalar>(((S + S.transpose()) / Scalar(2)).eval());
    const MatrixX<Scalar> defect =
        m.C + m.B.transpose() * lu.solve((cert.X * (m.A + I)).eval());
    const Scalar eq = defect.cwiseAbs().maxCoeff();
    return detail::grade_report<Scalar>(lmi, eq, cert.X, tol);
}

struct CertificateSearchOptions {
    double eps = 1e-6;      // enforced lower bound on the spectrum of P
    int max_iters = 50000;  // subgradient iteration budget
    double tol = 1e-6;      // success threshold on the violation measure
};

template <typename Scalar>
struct CertificateSearchResult {
    std::optional<NICertificate<Scalar>> certificate;
    Scalar best_residual = Scalar(0);  // smallest violation measure seen
    int iterations = 0;

    bool found() const { return certificate.has_value(); }
};

namespace detail {

// phi(P) = max( lambda_max(A'PA - P), lambda_max(eps I - P) ): nonpositive
// exactly on the feasible candidates.
template <typename Scalar>
Scalar cert_violation(const MatrixX<Scalar>& A, const MatrixX<Scalar>& P, Scalar eps) {
    const Eigen::Index n = A.rows();
    const MatrixX<Scalar> S = A.transpose() * P * A - P;
    const Scalar f1 = eig_max_sym<Scalar>(((S + S.transpose()) / Scalar(2)).eval());
    const MatrixX<Scalar> T =
        eps * MatrixX<Scalar>::Identity(n, n) - P;
    return std::max(f1, eig_max_sym<Scalar>(T));
}

// Orthogonal (Frobenius) projection of a symmetric Q onto {P = P' : P m = c}.
template <typename Scalar>
MatrixX<Scalar> project_affine(const MatrixX<Scalar>& Q, const VectorX<Scalar>& m,
                               const VectorX<Scalar>& c) {
    const Scalar s = m.squaredNorm();
    const VectorX<Scalar> r = c - Q * m;
    const Scalar t = m.dot(r) / s;
    const VectorX<Scalar> lam = (Scalar(2) * r - t * m) / s;
    return Q + (lam * m.transpose() + m * lam.transpose()) / Scalar(2);
}

// Closed-form candidate for the lossless family: the least-squares symmetric
// solution of A'PA - P = 0 on the affine set {P m = c}. Energy-preserving
// plants have their entire feasible set on that linear manifold, out of reach
// of the subgradient phase. The caller accepts the candidate only if the
// violation measure clears the tolerance.
template <typename Scalar>
MatrixX<Scalar> lossless_candidate(const MatrixX<Scalar>& A, const VectorX<Scalar>& m,
                                   const VectorX<Scalar>& c) {
    const Eigen::Index n = A.rows();
    const Eigen::Index nsym = n * (n + 1) / 2;

    std::vector<MatrixX<Scalar>> basis;
    basis.reserve(nsym);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            MatrixX<Scalar> E = MatrixX<Scalar>::Zero(n, n);
            E(i, j) = Scalar(1);
            E(j, i) = Scalar(1);
            basis.push_back(std::move(E));
        }
    }

    MatrixX<Scalar> L(n * n, nsym);   // vectorized P -> vec(A'PA - P)
    MatrixX<Scalar> Em(n, nsym);      // vectorized P -> P m
    for (Eigen::Index k = 0; k < nsym; ++k) {
        const MatrixX<Scalar> LE = A.transpose() * basis[k] * A - basis[k];
        L.col(k) = Eigen::Map<const VectorX<Scalar>>(LE.data(), n * n);
        Em.col(k) = basis[k] * m;
    }

    // KKT system of  min ||L p||^2  s.t.  Em p = c.
    MatrixX<Scalar> kkt = MatrixX<Scalar>::Zero(nsym + n, nsym + n);
    kkt.topLeftCorner(nsym, nsym) = Scalar(2) * L.transpose() * L;
    kkt.topRightCorner(nsym, n) = Em.transpose();
    kkt.bottomLeftCorner(n, nsym) = Em;
    VectorX<Scalar> rhs = VectorX<Scalar>::Zero(nsym + n);
    rhs.tail(n) = c;

    const VectorX<Scalar> sol =
        kkt.completeOrthogonalDecomposition().solve(rhs).head(nsym);
    MatrixX<Scalar> P = MatrixX<Scalar>::Zero(n, n);
    for (Eigen::Index k = 0; k < nsym; ++k) {
        P += sol(k) * basis[k];
    }
    return project_affine<Scalar>(((P + P.transpose()) / Scalar(2)).eval(), m, c);
}

}  // namespace detail

/// Searches for a certificate P by minimizing the violation measure
///   phi(P) = max( lambda_max(A'PA - P), lambda_max(eps I - P) )
/// over the affine set {P = P' : P m = C'} with m = (I - A)^{-1} B, by
/// projected subgradient descent (step c/sqrt(k)), preceded by a closed-form
/// least-squares candidate for the lossless boundary case. Success means
/// phi(P) <= tol; exhausting the budget yields a non-certifying failure
/// report ("search failed", not "proven not NI").
template <typename Scalar>
CertificateSearchResult<Scalar> find_ni_certificate(
    const StateSpaceModel<Scalar>& m, const CertificateSearchOptions& opts = {}) {
    const Eigen::Index n = m.n();
    const MatrixX<Scalar> I = MatrixX<Scalar>::Identity(n, n);
    const auto lu = detail::invertible_lu<Scalar>((I - m.A).eval(), "I - A");

    const auto minimality = is_minimal(m);
    if (!minimality.minimal) {
        throw std::invalid_argument(
            "find_ni_certificate: model is not minimal "
            "(controllable and observable realization required)");
    }

    const VectorX<Scalar> mvec = lu.solve(m.B).col(0);
    const VectorX<Scalar> cvec = m.C.transpose().col(0);
    const Scalar eps = Scalar(opts.eps);
    const Scalar tol = Scalar(opts.tol);

    CertificateSearchResult<Scalar> result;

    const MatrixX<Scalar> P_ls = detail::lossless_candidate<Scalar>(m.A, mvec, cvec);
    Scalar best = detail::cert_violation<Scalar>(m.A, P_ls, eps);
    MatrixX<Scalar> best_P = P_ls;
    if (best <= tol) {
        result.certificate.emplace(best_P);
        result.best_residual = best;
        return result;
    }

    const Scalar step_scale = cvec.norm() / mvec.norm();
    MatrixX<Scalar> P = detail::project_affine<Scalar>(
        (step_scale * MatrixX<Scalar>::Identity(n, n)).eval(), mvec, cvec);

    for (int k = 1; k <= opts.max_iters; ++k) {
        result.iterations = k;

        const MatrixX<Scalar> lyap = m.A.transpose() * P * m.A - P;
        Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es1(
            ((lyap + lyap.transpose()) / Scalar(2)).eval());
        const Scalar f1 = es1.eigenvalues().maxCoeff();
        Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es2((eps * I - P).eval());
        const Scalar f2 = es2.eigenvalues().maxCoeff();
        const Scalar phi = std::max(f1, f2);

        if (phi < best) {
            best = phi;
            best_P = P;
        }
        if (best <= tol) {
            break;
        }

        MatrixX<Scalar> grad;
        if (f1 >= f2) {
            const VectorX<Scalar> v = es1.eigenvectors().col(n - 1);
            grad = m.A * (v * v.transpose()) * m.A.transpose() - v * v.transpose();
        } else {
            const VectorX<Scalar> v = es2.eigenvectors().col(n - 1);
            grad = -(v * v.transpose());
        }

        const Scalar step = step_scale / std::sqrt(Scalar(k));
        P = detail::project_affine<Scalar>((P - step * grad).eval(), mvec, cvec);
        P = ((P + P.transpose()) / Scalar(2)).eval();
    }

    result.best_residual = best;
    if (best <= tol) {
        result.certificate.emplace(best_P);
    }
    return result;
}

template <typename Scalar>
struct EmpiricalNIResult {
    bool pass = false;
    Scalar worst_slack = Scalar(0);  // most negative margin of the dissipation inequality
    long violations = 0;
};

namespace detail {

// SplitMix64: fixed, implementation-independent stream so trial t of seed s
// is the same sequence on every platform and in any evaluation order.
struct SplitMix64 {
    std::uint64_t state;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // uniform double in [-1, 1]
    double sym() { return 2.0 * ((next() >> 11) * 0x1.0p-53) - 1.0; }
};

inline std::uint64_t trial_stream(std::uint64_t seed, std::uint64_t trial) {
    SplitMix64 mix(seed ^ (0xD1B54A32D192ED03ull * (trial + 1)));
    return mix.next();
}

}  // namespace detail

/// Monte-Carlo falsification of the dissipation inequality itself:
/// simulates random input sequences and checks, at every step,
///   V(x_{k+1}) - V(x_k) <= u_k (y_{k+1} - y_k) + 1e-10
/// with V(x) = x' P x / 2. Per-trial streams depend only on (seed, trial),
/// so trials may run in any order.
template <typename Scalar>
EmpiricalNIResult<Scalar> empirical_ni_test(const StateSpaceModel<Scalar>& m,
                                            const NICertificate<Scalar>& cert, int trials,
                                            int horizon, std::uint64_t seed) {
    if (trials < 1 || horizon < 1) {
        throw std::invalid_argument("empirical_ni_test: trials and horizon must be >= 1");
    }
    const Eigen::Index n = m.n();
    const auto V = [&](const VectorX<Scalar>& x) {
        return Scalar(0.5) * (x.transpose() * cert.P * x)(0);
    };

    EmpiricalNIResult<Scalar> result;
    result.worst_slack = std::numeric_limits<Scalar>::infinity();
    const Scalar tol = Scalar(1e-10);

    for (int t = 0; t < trials; ++t) {
        detail::SplitMix64 rng(detail::trial_stream(seed, static_cast<std::uint64_t>(t)));
        VectorX<Scalar> x(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            x(i) = Scalar(rng.sym());
        }
        Scalar v = V(x);
        Scalar y = (m.C * x)(0);
        for (int k = 0; k < horizon; ++k) {
            const Scalar u = Scalar(rng.sym());
            const VectorX<Scalar> x_next = m.A * x + m.B * u;
            const Scalar y_next = (m.C * x_next)(0);
            const Scalar v_next = V(x_next);
            const Scalar slack = u * (y_next - y) - (v_next - v);
            if (slack < result.worst_slack) {
                result.worst_slack = slack;
            }
            if (slack < -tol) {
                ++result.violations;
            }
            x = x_next;
            y = y_next;
            v = v_next;
        }
    }
    result.pass = (result.violations == 0);
    return result;
}

}  // namespace nihigs
