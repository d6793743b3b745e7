#pragma once

/** @file
 * Dense linear-algebra utilities shared by every other module: symmetric
 * eigenvalue extremes, SVD pseudo-inverse, log-determinants, finite Gramian
 * sums and the filtering Riccati fixed point.
 *
 * All functions are pure and reject non-finite input.
 */

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "sysid/error.hpp"

namespace sysid {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

namespace numerics {

inline constexpr double kSymmetryTol = 1e-10;

inline void require_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) {
        throw ContractError(std::string(what) + ": matrix contains NaN or Inf");
    }
}

inline void require_square(const Matrix& m, const char* what) {
    if (m.rows() != m.cols()) {
        throw DimensionError(std::string(what) + ": expected a square matrix, got " +
                             std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
}

/// Throws unless `m` is square, finite and symmetric within `kSymmetryTol`
/// relative to its largest entry.
inline void require_symmetric(const Matrix& m, const char* what) {
    require_square(m, what);
    require_finite(m, what);
    if (m.size() == 0) return;
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > kSymmetryTol * scale) {
        throw ContractError(std::string(what) + ": matrix is not symmetric (max |M - M^T| = " +
                            std::to_string(asym) + ")");
    }
}

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

struct EigExtremes {
    double lambda_min;
    double lambda_max;
};

/// Smallest and largest eigenvalue of the symmetrized input.
inline EigExtremes sym_eig_extremes(const Matrix& m) {
    require_symmetric(m, "sym_eig_extremes");
    if (m.size() == 0) throw DimensionError("sym_eig_extremes: empty matrix");
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(m), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericError("sym_eig_extremes: eigen-solver failed");
    const auto& ev = es.eigenvalues();
    return {ev(0), ev(ev.size() - 1)};
}

inline double lambda_min(const Matrix& m) { return sym_eig_extremes(m).lambda_min; }
inline double lambda_max(const Matrix& m) { return sym_eig_extremes(m).lambda_max; }

/// Largest singular value; 0 for empty matrices.
inline double op_norm(const Matrix& m) {
    require_finite(m, "op_norm");
    if (m.size() == 0) return 0.0;
    if (m.rows() == 1 || m.cols() == 1) return m.norm();
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
}

/// Matrix power by repeated squaring.
inline Matrix matrix_power(const Matrix& a, long k) {
    require_square(a, "matrix_power");
    Matrix result = Matrix::Identity(a.rows(), a.cols());
    Matrix base = a;
    while (k > 0) {
        if (k & 1) result = result * base;
        base = base * base;
        k >>= 1;
    }
    return result;
}

struct PseudoInverse {
    Matrix pinv;
    Index rank;
};

/// Default rank cutoff: max(rows, cols) * machine-epsilon * sigma_1.
inline double default_pinv_tol(Index rows, Index cols, double sigma1) {
    return static_cast<double>(std::max(rows, cols)) * std::numeric_limits<double>::epsilon() *
           sigma1;
}

/// Moore-Penrose pseudo-inverse together with the numerical rank. A negative
/// `tol` selects the default cutoff; singular values <= tol count as zero.
inline PseudoInverse pinv_with_rank(const Matrix& m, double tol = -1.0) {
    require_finite(m, "pinv");
    if (m.size() == 0) return {Matrix::Zero(m.cols(), m.rows()), 0};
    Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    if (tol < 0.0) tol = default_pinv_tol(m.rows(), m.cols(), sv(0));
    Vector inv = Vector::Zero(sv.size());
    Index rank = 0;
    for (Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > tol) {
            inv(i) = 1.0 / sv(i);
            ++rank;
        }
    }
    return {svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose(), rank};
}

inline Matrix pinv(const Matrix& m, double tol = -1.0) { return pinv_with_rank(m, tol).pinv; }

/// log det of a symmetric positive definite matrix via Cholesky.
inline double logdet_psd(const Matrix& m) {
    require_symmetric(m, "logdet_psd");
    if (m.size() == 0) return 0.0;
    Eigen::LLT<Matrix> llt(symmetrized(m));
    if (llt.info() != Eigen::Success) {
        throw SingularityError("logdet_psd: matrix is not positive definite");
    }
    const auto diag = llt.matrixLLT().diagonal();
    if ((diag.array() <= 0.0).any()) {
        throw SingularityError("logdet_psd: matrix is singular");
    }
    return 2.0 * diag.array().log().sum();
}

/// Symmetric PSD square root via eigendecomposition (negative round-off
/// eigenvalues are clipped to zero).
inline Matrix psd_sqrt(const Matrix& m) {
    require_symmetric(m, "psd_sqrt");
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(m));
    if (es.info() != Eigen::Success) throw NumericError("psd_sqrt: eigen-solver failed");
    const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

/// sum_{t=1}^{T} sum_{k=0}^{t-1} A^k Q (A^T)^k, using G_{t+1} = A G_t A^T + Q.
inline Matrix gramian_sum(const Matrix& a, const Matrix& q, long horizon) {
    require_square(a, "gramian_sum");
    require_finite(a, "gramian_sum");
    require_symmetric(q, "gramian_sum");
    if (q.rows() != a.rows()) throw DimensionError("gramian_sum: Q does not conform with A");
    if (horizon < 1) throw ContractError("gramian_sum: horizon T must be >= 1");
    Matrix g = q;
    Matrix total = q;
    for (long t = 2; t <= horizon; ++t) {
        g = a * g * a.transpose() + q;
        total += g;
    }
    return total;
}

struct RiccatiSolution {
    Matrix P_star;
    Matrix F_star;
    Matrix Sigma_E;
    double residual;
    long iterations;
};

namespace detail {

struct RiccatiStep {
    Matrix next;
    Matrix gain;
    Matrix innovation_cov;
};

inline RiccatiStep riccati_step(const Matrix& a, const Matrix& c, const Matrix& sigma_w,
                                const Matrix& sigma_v, const Matrix& p) {
    const Matrix s = c * p * c.transpose() + sigma_v;
    Eigen::LDLT<Matrix> ldlt(symmetrized(s));
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
        throw SingularityError("riccati: innovation covariance C P C^T + Sigma_V is singular");
    }
    const Matrix apc = a * p * c.transpose();
    // K = A P C^T S^{-1}, computed as (S^{-1} C P A^T)^T.
    const Matrix gain = ldlt.solve(apc.transpose()).transpose();
    Matrix next = a * p * a.transpose() + sigma_w - gain * apc.transpose();
    return {symmetrized(next), gain, symmetrized(s)};
}

}  // namespace detail

/// Riccati operator RIC(P) = A P A^T + Sigma_W - A P C^T (C P C^T + Sigma_V)^{-1} C P A^T.
inline Matrix riccati_operator(const Matrix& a, const Matrix& c, const Matrix& sigma_w,
                               const Matrix& sigma_v, const Matrix& p) {
    return detail::riccati_step(a, c, sigma_w, sigma_v, p).next;
}

/// Fixed point of the filtering Riccati map by iterating P <- RIC(P) from
/// P_0 = Sigma_W. The returned gain F = A P C^T (C P C^T + Sigma_V)^{-1} makes
/// A - F C the steady-state predictor closed loop.
inline RiccatiSolution riccati_fixed_point(const Matrix& a, const Matrix& c,
                                           const Matrix& sigma_w, const Matrix& sigma_v,
                                           double tol = 1e-12, long max_iter = 100000) {
    require_square(a, "riccati_fixed_point");
    require_finite(a, "riccati_fixed_point");
    require_finite(c, "riccati_fixed_point");
    require_symmetric(sigma_w, "riccati_fixed_point(Sigma_W)");
    require_symmetric(sigma_v, "riccati_fixed_point(Sigma_V)");
    const Index dx = a.rows();
    const Index dy = c.rows();
    if (c.cols() != dx || sigma_w.rows() != dx || sigma_v.rows() != dy) {
        throw DimensionError("riccati_fixed_point: A, C, Sigma_W, Sigma_V do not conform");
    }
    if (tol < 0.0 || max_iter < 1) {
        throw ContractError("riccati_fixed_point: tol must be >= 0 and max_iter >= 1");
    }
    {
        Eigen::LLT<Matrix> llt(symmetrized(sigma_v));
        if (llt.info() != Eigen::Success) {
            throw SingularityError("riccati_fixed_point: Sigma_V must be positive definite");
        }
    }

    Matrix p = symmetrized(sigma_w);
    double residual = std::numeric_limits<double>::infinity();
    for (long it = 1; it <= max_iter; ++it) {
        auto step = detail::riccati_step(a, c, sigma_w, sigma_v, p);
        residual = op_norm(step.next - p);
        if (!std::isfinite(residual)) break;
        if (residual <= tol) {
            return {p, step.gain, step.innovation_cov, residual, it};
        }
        p = std::move(step.next);
    }
    throw ConvergenceError("riccati_fixed_point: no convergence (is (C, A) detectable and "
                           "(A, Sigma_W^{1/2}) stabilizable?); last residual " +
                               std::to_string(residual),
                           residual, max_iter);
}

}  // namespace numerics
}  // namespace sysid
