#pragma once

/** @file
 * Least-squares estimators: ordinary (minimum norm) least squares, exhaustive
 * sparse least squares, the SSARX Markov-parameter regression and least
 * squares over a finite hypothesis class.
 *
 * Data are stacked row-wise: X is T x d_X with row t equal to X_t^T and Y is
 * T x d_Y with row t equal to Y_t^T.
 */

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "sysid/error.hpp"
#include "sysid/numerics.hpp"
#include "sysid/systems.hpp"

namespace sysid {

struct Estimate {
    Matrix theta_hat;  ///< d_Y x d_X
    Matrix emp_cov;    ///< (1/T) sum X_t X_t^T
    Index rank = 0;
    double min_eig = 0.0;
    std::optional<std::vector<Index>> support;
};

namespace detail {

inline void require_stacks(const Matrix& x, const Matrix& y, const char* what) {
    if (x.rows() != y.rows()) {
        throw DimensionError(std::string(what) + ": X has " + std::to_string(x.rows()) +
                             " rows but Y has " + std::to_string(y.rows()));
    }
    if (x.rows() < 1) throw ContractError(std::string(what) + ": need T >= 1 samples");
    if (x.cols() < 1) throw DimensionError(std::string(what) + ": empty regressor");
    numerics::require_finite(x, what);
    numerics::require_finite(y, what);
}

inline Matrix gram(const Matrix& x) {
    Matrix g = Matrix::Zero(x.cols(), x.cols());
    g.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
    return g.selfadjointView<Eigen::Lower>();
}

}  // namespace detail

/// theta = (sum Y_t X_t^T)(sum X_t X_t^T)^+.
inline Estimate ols(const Matrix& x, const Matrix& y) {
    detail::require_stacks(x, y, "ols");
    const double t = static_cast<double>(x.rows());
    const Matrix g = detail::gram(x);
    const auto pi = numerics::pinv_with_rank(g);
    Estimate est;
    est.theta_hat = (y.transpose() * x) * pi.pinv;
    est.emp_cov = g / t;
    est.rank = pi.rank;
    est.min_eig = numerics::lambda_min(est.emp_cov);
    return est;
}

namespace detail {

/// sum_{j=1}^{s} C(p, j), saturating at +inf.
inline double support_count(Index p, Index s) {
    double total = 0.0, c = 1.0;
    for (Index j = 1; j <= s; ++j) {
        c = c * static_cast<double>(p - j + 1) / static_cast<double>(j);
        total += c;
    }
    return total;
}

/// Advances a sorted index set to its lexicographic successor among the
/// size-|idx| subsets of {0..p-1}; false when exhausted.
inline bool next_combination(std::vector<Index>& idx, Index p) {
    const Index s = static_cast<Index>(idx.size());
    for (Index i = s - 1; i >= 0; --i) {
        if (idx[i] < p - s + i) {
            ++idx[i];
            for (Index j = i + 1; j < s; ++j) idx[j] = idx[j - 1] + 1;
            return true;
        }
    }
    return false;
}

}  // namespace detail

inline constexpr double kSparseEnumerationCap = 1e6;

/// Exact least squares over all theta with at most s nonzero entries, by
/// enumerating every support of size 1..s. Among supports with equal residual
/// the lexicographically smallest wins.
inline Estimate sparse_lse(const Matrix& x, const Matrix& y, Index s,
                           double cap = kSparseEnumerationCap) {
    detail::require_stacks(x, y, "sparse_lse");
    const Index p = x.cols();
    if (y.cols() != 1) throw DimensionError("sparse_lse: targets must be one-dimensional");
    if (s < 1 || s > p) throw ContractError("sparse_lse: need 1 <= s <= regressor dimension");
    const double count = detail::support_count(p, s);
    if (count > cap) {
        throw CapacityError("sparse_lse: " + std::to_string(count) +
                            " supports exceed the enumeration cap " + std::to_string(cap));
    }
    const Matrix g = detail::gram(x);
    const Vector b = x.transpose() * y.col(0);
    const Vector yv = y.col(0);

    double best_res = std::numeric_limits<double>::infinity();
    std::vector<Index> best_support;
    Vector best_theta;
    Index best_rank = 0;

    for (Index size = 1; size <= s; ++size) {
        std::vector<Index> idx(static_cast<std::size_t>(size));
        for (Index i = 0; i < size; ++i) idx[i] = i;
        do {
            Matrix gs(size, size);
            Vector bs(size);
            for (Index i = 0; i < size; ++i) {
                bs(i) = b(idx[i]);
                for (Index j = 0; j < size; ++j) gs(i, j) = g(idx[i], idx[j]);
            }
            const auto pi = numerics::pinv_with_rank(gs);
            const Vector th = pi.pinv * bs;
            Vector r = yv;
            for (Index i = 0; i < size; ++i) r.noalias() -= th(i) * x.col(idx[i]);
            const double res = r.squaredNorm();
            if (res < best_res || (res == best_res && idx < best_support)) {
                best_res = res;
                best_support = idx;
                best_theta = th;
                best_rank = pi.rank;
            }
        } while (detail::next_combination(idx, p));
    }

    Estimate est;
    est.theta_hat = Matrix::Zero(1, p);
    for (std::size_t i = 0; i < best_support.size(); ++i)
        est.theta_hat(0, best_support[i]) = best_theta(static_cast<Index>(i));
    est.emp_cov = g / static_cast<double>(x.rows());
    est.rank = best_rank;
    est.min_eig = numerics::lambda_min(est.emp_cov);
    est.support = std::move(best_support);
    return est;
}

/// Least squares of Y_t on Z_t = [Y_{t-1..t-p}; U_{t-1..t-p}], returned in
/// Markov-parameter layout [U-lag coefficients, Y-lag coefficients] so that
/// it is directly comparable with markov_params(sys, p). emp_cov is permuted
/// to the same layout.
inline Estimate ssarx_fit(const Trajectory& tr, Index p) {
    if (p < 1) throw ContractError("ssarx_fit: past horizon p must be >= 1");
    if (tr.T <= p) throw ContractError("ssarx_fit: need T > p");
    const auto st = regressors(tr, p, p);
    Estimate raw = ols(st.X, st.Y);
    const Index dy = tr.Y.cols(), du = tr.U.cols();
    const Index ny = p * dy, nu = p * du, n = ny + nu;
    // perm[k] = regressor column holding Markov column k.
    std::vector<Index> perm(static_cast<std::size_t>(n));
    for (Index k = 0; k < nu; ++k) perm[k] = ny + k;
    for (Index k = 0; k < ny; ++k) perm[nu + k] = k;
    Estimate est = raw;
    for (Index k = 0; k < n; ++k) {
        est.theta_hat.col(k) = raw.theta_hat.col(perm[k]);
        for (Index l = 0; l < n; ++l) est.emp_cov(k, l) = raw.emp_cov(perm[k], perm[l]);
    }
    return est;
}

// ---------------------------------------------------------------------------
// Finite hypothesis classes

struct Hypothesis {
    std::string name;
    std::function<Vector(const Vector&)> fn;
};

struct FiniteClass {
    std::vector<Hypothesis> members;
    Index cardinality() const { return static_cast<Index>(members.size()); }
};

/// {x -> g x : g in gains}, named "gain=<g>".
inline FiniteClass scalar_gain_class(const std::vector<double>& gains) {
    FiniteClass fc;
    for (double g : gains) {
        fc.members.push_back({"gain=" + fmt17(g), [g](const Vector& v) -> Vector { return g * v; }});
    }
    return fc;
}

struct ClassFit {
    Index best;
    std::string name;
    double emp_risk;
    std::vector<double> risks;
};

/// Minimizer of (1/T) sum ||Y_t - f(X_t)||^2 over the class; ties go to the
/// lowest member index.
inline ClassFit finite_class_lse(const FiniteClass& fc, const Matrix& x, const Matrix& y) {
    if (fc.members.empty()) throw ContractError("finite_class_lse: hypothesis class is empty");
    detail::require_stacks(x, y, "finite_class_lse");
    ClassFit fit{0, "", std::numeric_limits<double>::infinity(), {}};
    const double t = static_cast<double>(x.rows());
    for (Index m = 0; m < fc.cardinality(); ++m) {
        const auto& h = fc.members[m];
        double risk = 0.0;
        for (Index i = 0; i < x.rows(); ++i) {
            const Vector out = h.fn(x.row(i).transpose());
            if (out.size() != y.cols())
                throw DimensionError("finite_class_lse: member '" + h.name + "' output size mismatch");
            if (!out.allFinite())
                throw EvaluationError("finite_class_lse: member '" + h.name +
                                      "' produced a non-finite value");
            risk += (y.row(i).transpose() - out).squaredNorm();
        }
        risk /= t;
        fit.risks.push_back(risk);
        if (risk < fit.emp_risk) {
            fit.best = m;
            fit.emp_risk = risk;
        }
    }
    fit.name = fc.members[fit.best].name;
    return fit;
}

// ---------------------------------------------------------------------------

struct ErrorNorms {
    double op;
    double frob;
    std::optional<double> mahalanobis;
};

/// Norms of theta_hat - theta_star; mahalanobis = ||(theta_hat - theta_star) W^{1/2}||_F.
inline ErrorNorms error_norms(const Matrix& theta_hat, const Matrix& theta_star,
                              const std::optional<Matrix>& weight = std::nullopt) {
    if (theta_hat.rows() != theta_star.rows() || theta_hat.cols() != theta_star.cols())
        throw DimensionError("error_norms: estimate and truth differ in shape");
    const Matrix d = theta_hat - theta_star;
    ErrorNorms out{numerics::op_norm(d), d.norm(), std::nullopt};
    if (weight) {
        numerics::require_symmetric(*weight, "error_norms(weight)");
        if (weight->rows() != d.cols()) throw DimensionError("error_norms: weight does not conform");
        const double scale = std::max(1.0, weight->cwiseAbs().maxCoeff());
        if (numerics::lambda_min(*weight) < -1e-10 * scale)
            throw ContractError("error_norms: weight must be positive semidefinite");
        out.mahalanobis = std::sqrt(std::max(0.0, (d * (*weight) * d.transpose()).trace()));
    }
    return out;
}

inline nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json arr = nlohmann::json::array();
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) arr.push_back(m(i, j));
    return arr;
}

/// {theta_hat: row-major array, shape: [rows, cols], rank, min_eig, support?}
inline nlohmann::json to_json(const Estimate& est) {
    nlohmann::json j;
    j["theta_hat"] = matrix_to_json(est.theta_hat);
    j["shape"] = {est.theta_hat.rows(), est.theta_hat.cols()};
    j["rank"] = est.rank;
    j["min_eig"] = est.min_eig;
    if (est.support) j["support"] = *est.support;
    return j;
}

}  // namespace sysid
