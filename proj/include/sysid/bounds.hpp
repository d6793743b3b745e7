#pragma once

/** @file
 * Closed-form tail bounds, burn-in times and error bounds.
 *
 * Scalar functions return raw values. Probability-valued functions may
 * exceed 1; the *_report builders clamp to [0, 1], keep the raw value under
 * "pre_clamp" and flag vacuous results.
 */

#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "sysid/error.hpp"
#include "sysid/numerics.hpp"
#include "sysid/systems.hpp"

namespace sysid {

struct BoundReport {
    std::string name;
    double value = 0.0;
    std::map<std::string, double> inputs;
    bool valid = true;
    bool vacuous = false;
};

/// Bound paired with its burn-in condition.
struct GatedBound {
    double bound;
    bool burn_in_ok;
};

inline constexpr double kDefaultC = 128.0;
inline constexpr double kDefaultC1 = 128.0;

namespace bounds {

namespace detail {

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw ContractError(msg);
}

inline void require_delta(double delta, const char* what) {
    require(delta > 0.0 && delta < 1.0, std::string(what) + ": delta must lie in (0, 1)");
}

inline void require_divides(long k, long t, const char* what) {
    require(k >= 1 && t >= 1 && t % k == 0,
            std::string(what) + ": block length k must divide the horizon T");
}

}  // namespace detail

inline BoundReport probability_report(std::string name, double raw,
                                      std::map<std::string, double> inputs) {
    BoundReport r;
    r.name = std::move(name);
    r.inputs = std::move(inputs);
    r.inputs["pre_clamp"] = raw;
    r.value = std::clamp(raw, 0.0, 1.0);
    r.vacuous = raw >= 1.0;
    r.valid = std::isfinite(raw);
    return r;
}

inline BoundReport value_report(std::string name, double value,
                                std::map<std::string, double> inputs, bool valid = true) {
    BoundReport r;
    r.name = std::move(name);
    r.value = value;
    r.inputs = std::move(inputs);
    r.valid = valid && std::isfinite(value);
    return r;
}

// ---------------------------------------------------------------------------
// Concentration

/// exp(-s^2 / (2 sigma^2)).
inline double gaussian_tail(double s, double sigma2) {
    detail::require(s >= 0.0, "gaussian_tail: deviation s must be >= 0");
    detail::require(sigma2 > 0.0, "gaussian_tail: sigma^2 must be > 0");
    return std::exp(-s * s / (2.0 * sigma2));
}

/// Hanson-Wright: 2 exp(-min(s^2 / (144 sigma^4 |M|_F^2), s / (16 sqrt2 sigma^2 |M|_op))).
inline double hw_tail(double s, double sigma2, double m_frob, double m_op) {
    detail::require(s >= 0.0, "hw_tail: deviation s must be >= 0");
    detail::require(sigma2 > 0.0 && m_frob > 0.0 && m_op > 0.0,
                    "hw_tail: sigma^2 and the norms of M must be > 0");
    const double quad = s * s / (144.0 * sigma2 * sigma2 * m_frob * m_frob);
    const double lin = s / (16.0 * std::numbers::sqrt2 * sigma2 * m_op);
    return 2.0 * std::exp(-std::min(quad, lin));
}

/// Deviation at which the two Hanson-Wright regimes meet.
inline double hw_switch_point(double sigma2, double m_frob, double m_op) {
    return 144.0 * sigma2 * m_frob * m_frob / (16.0 * std::numbers::sqrt2 * m_op);
}

/// log of the quadratic-form MGF bound, 36 lambda^2 sigma^4 |M|_F^2, valid for
/// |lambda| <= 1 / (8 sqrt2 sigma^2 |M|_op).
inline double hw_mgf_exponent(double lambda, double sigma2, double m_frob, double m_op) {
    detail::require(sigma2 > 0.0 && m_op > 0.0 && m_frob >= 0.0,
                    "hw_mgf_exponent: sigma^2 and |M|_op must be > 0");
    const double limit = 1.0 / (8.0 * std::numbers::sqrt2 * sigma2 * m_op);
    if (std::abs(lambda) > limit) {
        throw ContractError("hw_mgf_exponent: |lambda| = " + fmt17(std::abs(lambda)) +
                            " exceeds the admissible limit 1/(8 sqrt2 sigma^2 |M|_op) = " +
                            fmt17(limit));
    }
    return 36.0 * lambda * lambda * sigma2 * sigma2 * m_frob * m_frob;
}

/// (1 + 2/eps)^d, the size of an eps-net of the unit sphere in R^d.
inline double covering_cardinality_bound(double eps, long d) {
    detail::require(eps > 0.0, "covering_cardinality_bound: eps must be > 0");
    detail::require(d >= 0, "covering_cardinality_bound: d must be >= 0");
    if (std::isinf(eps)) return 1.0;
    return std::pow(1.0 + 2.0 / eps, static_cast<double>(d));
}

/// exp(-eps^2 / (576 K^2 |M|^2 |L|^2) + d_X log 18).
inline double spectrum_deviation_failure(double eps, double k2, double m_op, double l_op,
                                         long d_x) {
    detail::require(eps >= 0.0, "spectrum_deviation_failure: eps must be >= 0");
    detail::require(k2 > 0.0 && m_op > 0.0 && l_op > 0.0 && d_x >= 1,
                    "spectrum_deviation_failure: K^2, |M|, |L| and d_X must be positive");
    return std::exp(-eps * eps / (576.0 * k2 * m_op * m_op * l_op * l_op) +
                    static_cast<double>(d_x) * std::log(18.0));
}

// ---------------------------------------------------------------------------
// Lower tail of the empirical covariance

/// C_sys = 1 + 4 sqrt2 (T |L L^T| / (18 k lmin(sum E X X^T)) + 9) lmax(sum E X X^T)
///         / lmin(sum E X~ X~^T).
inline double csys(long t, long k, double l_op2, double sum_cov_min, double sum_cov_max,
                   double sum_decoupled_min) {
    detail::require(t >= 1 && k >= 1, "csys: T and k must be >= 1");
    detail::require(l_op2 >= 0.0 && sum_cov_max >= 0.0, "csys: norms must be >= 0");
    if (!(sum_cov_min > 0.0) || !(sum_decoupled_min > 0.0)) {
        throw ExcitationError(
            "csys: lambda_min of the covariance sums must be > 0 (degenerate excitation)");
    }
    const double inner = static_cast<double>(t) * l_op2 /
                             (18.0 * static_cast<double>(k) * sum_cov_min) +
                         9.0;
    return 1.0 + 4.0 * std::numbers::sqrt2 * inner * sum_cov_max / sum_decoupled_min;
}

/// c_sys^d exp(-T / (576 K^2 k)).
inline double lower_tail_failure(long t, long k, double k2, long d, double c_sys) {
    detail::require_divides(k, t, "lower_tail_failure");
    detail::require(k2 > 0.0 && d >= 0 && c_sys >= 1.0,
                    "lower_tail_failure: need K^2 > 0, d >= 0, C_sys >= 1");
    return std::exp(static_cast<double>(d) * std::log(c_sys) -
                    static_cast<double>(t) / (576.0 * k2 * static_cast<double>(k)));
}

// ---------------------------------------------------------------------------
// Self-normalized martingales

/// d_Y sigma^2 log(det(S + sum X X^T) / det S) + 2 sigma^2 log(1/delta).
inline double selfnorm_frobenius_bound(long d_y, double sigma2, double logdet_ratio,
                                       double delta) {
    detail::require(d_y >= 1 && sigma2 > 0.0, "selfnorm_frobenius_bound: need d_Y >= 1, sigma^2 > 0");
    detail::require(logdet_ratio >= 0.0, "selfnorm_frobenius_bound: log-det ratio must be >= 0");
    detail::require_delta(delta, "selfnorm_frobenius_bound");
    return static_cast<double>(d_y) * sigma2 * logdet_ratio + 2.0 * sigma2 * std::log(1.0 / delta);
}

/// 4 sigma^2 log-det ratio + 8 d_Y sigma^2 log 5 + 8 sigma^2 log(1/delta).
inline double selfnorm_operator_bound(long d_y, double sigma2, double logdet_ratio,
                                      double delta) {
    detail::require(d_y >= 1 && sigma2 > 0.0, "selfnorm_operator_bound: need d_Y >= 1, sigma^2 > 0");
    detail::require(logdet_ratio >= 0.0, "selfnorm_operator_bound: log-det ratio must be >= 0");
    detail::require_delta(delta, "selfnorm_operator_bound");
    return 4.0 * sigma2 * logdet_ratio + 8.0 * static_cast<double>(d_y) * sigma2 * std::log(5.0) +
           8.0 * sigma2 * std::log(1.0 / delta);
}

// ---------------------------------------------------------------------------
// ARX

struct SnrContext {
    double sigma_tau_min_eig;
    double noise_op_norm;
    double K2;
    long tau;
};

/// lambda_min(Sigma_tau) / (|Sigma_W| K^2).
inline double snr(const SnrContext& ctx) {
    detail::require(ctx.sigma_tau_min_eig > 0.0 && ctx.noise_op_norm > 0.0 && ctx.K2 > 0.0 &&
                        ctx.tau >= 1,
                    "snr: all context entries must be strictly positive");
    return ctx.sigma_tau_min_eig / (ctx.noise_op_norm * ctx.K2);
}

struct BurnIn {
    double T0;
    bool satisfied;
    double c_sys;
};

/// T0 = 1152 tau max(K^2, 1) (dims log C_sys(T, tau) + log(1/delta)) with
/// C_sys(T, tau) = (2T / (3 tau)) |Sigma_T|^2 / lambda_min(Sigma_tau)^2.
inline BurnIn arx_burn_in(long t, double delta, long tau, double k2, long dims,
                          double sigma_t_op, double sigma_tau_min) {
    detail::require(t >= 1 && tau >= 1 && dims >= 1, "arx_burn_in: T, tau and dims must be >= 1");
    detail::require_delta(delta, "arx_burn_in");
    detail::require(k2 > 0.0, "arx_burn_in: K^2 must be > 0");
    if (!(sigma_tau_min > 0.0)) {
        throw ExcitationError("arx_burn_in: lambda_min(Sigma_tau) must be > 0 "
                              "(inputs do not excite the system by time tau)");
    }
    const double c = (2.0 * static_cast<double>(t) / (3.0 * static_cast<double>(tau))) *
                     (sigma_t_op * sigma_t_op) / (sigma_tau_min * sigma_tau_min);
    const double t0 = 1152.0 * static_cast<double>(tau) * std::max(k2, 1.0) *
                      (static_cast<double>(dims) * std::log(c) + std::log(1.0 / delta));
    return {t0, static_cast<double>(t) >= t0, c};
}

inline constexpr long kPeSearchCap = 10'000'000;

/// Smallest t >= tau with t >= T0(t, delta, tau), scanning upward with the
/// covariance recursion of the companion embedding.
inline long arx_pe_horizon(const ArxSystem& sys, double delta, long tau, double k2,
                           long cap = kPeSearchCap) {
    detail::require(tau >= std::max<long>(sys.p(), sys.q()) && tau >= 1,
                    "arx_pe_horizon: tau must be >= max(p, q)");
    const LiftedSystem lift = companion_embed(sys);
    const Matrix q = lift.B * lift.drive_cov * lift.B.transpose();
    const long dims = sys.regressor_dim();
    Matrix sig = Matrix::Zero(lift.A.rows(), lift.A.rows());
    for (long t = 1; t <= tau; ++t) sig = numerics::symmetrized(lift.A * sig * lift.A.transpose() + q);
    const double tau_min = numerics::lambda_min(sig);
    for (long t = tau; t <= cap; ++t) {
        if (t > tau) sig = numerics::symmetrized(lift.A * sig * lift.A.transpose() + q);
        const auto b = arx_burn_in(t, delta, tau, k2, dims, numerics::lambda_max(sig), tau_min);
        if (b.satisfied) return t;
    }
    throw CapacityError("arx_pe_horizon: no t <= " + std::to_string(cap) +
                        " satisfies the burn-in inequality");
}

/// (C / (SNR_tau T)) (dims log(dims / delta) + log det(Sigma_T Sigma_tau^{-1})).
inline double arx_error_bound(double snr_tau, long t, long dims, double delta,
                              double logdet_cond, double c = kDefaultC) {
    detail::require(t >= 1 && dims >= 1, "arx_error_bound: T and dims must be >= 1");
    detail::require(snr_tau > 0.0 && c > 0.0, "arx_error_bound: SNR and C must be > 0");
    detail::require_delta(delta, "arx_error_bound");
    const double d = static_cast<double>(dims);
    return c / (snr_tau * static_cast<double>(t)) * (d * std::log(d / delta) + logdet_cond);
}

/// dims / delta.
inline double matrix_markov_factor(long dims, double delta) {
    detail::require(dims >= 1, "matrix_markov_factor: dims must be >= 1");
    detail::require_delta(delta, "matrix_markov_factor");
    return static_cast<double>(dims) / delta;
}

/// (e k)^{d-1} max(M^d, 1).
inline double power_norm_bound(long k, long d, double m) {
    detail::require(k >= 1 && d >= 1 && m > 0.0, "power_norm_bound: need k, d >= 1 and M > 0");
    const double dd = static_cast<double>(d);
    return std::pow(std::numbers::e * static_cast<double>(k), dd - 1.0) *
           std::max(std::pow(m, dd), 1.0);
}

// ---------------------------------------------------------------------------
// State space

/// p = max(1, ceil(beta ln T)).
inline long ss_horizon(double beta, long t) {
    detail::require(beta > 0.0, "ss_horizon: beta must be > 0");
    detail::require(t >= 3, "ss_horizon: T must be >= 3");
    return std::max(1L, static_cast<long>(std::ceil(beta * std::log(static_cast<double>(t)))));
}

struct BiasCheck {
    double lhs;  ///< |C A_cl^p| |Sigma_{X,T}|
    double rhs;  ///< T^{-3}
    bool ok;
};

/// Checks |C A_cl^p| |Sigma_{X,T}| <= T^{-3}.
inline BiasCheck ss_bias_ok(const StateSpaceInnovation& ss, long p, long t) {
    detail::require(p >= 1 && t >= 1, "ss_bias_ok: p and T must be >= 1");
    const double cp = numerics::op_norm(ss.C() * numerics::matrix_power(ss.a_cl(), p));
    const auto sx = state_covariance_sequence(ss, t);
    const double lhs = cp * numerics::lambda_max(sx.back());
    const double rhs = std::pow(static_cast<double>(t), -3.0);
    return {lhs, rhs, lhs <= rhs};
}

/// (C1 / (SNR_pp T)) (p d log(p d / delta) + log det(Sigma_{p,T} Sigma_{p,p}^{-1})),
/// d = d_Y + d_U. Holds with probability 1 - 2 delta.
inline double ss_error_bound(double snr_pp, long t, long p, long d_sum, double delta,
                             double logdet_cond, double c1 = kDefaultC1) {
    detail::require(p >= 1 && d_sum >= 1, "ss_error_bound: p and d_Y + d_U must be >= 1");
    return arx_error_bound(snr_pp, t, p * d_sum, delta, logdet_cond, c1);
}

// ---------------------------------------------------------------------------
// Sparse and nonlinear least squares

/// bound = c sigma^2 (s log(p cond / s) + log(1/delta)) / T,
/// burn-in T/k >= c' sigma^2 (s (log cond + log(p/s)) + log(1/delta)).
inline GatedBound sparse_bound(double sigma2, long s, long p, double cond_sys, double delta,
                               long t, long k, double c = 1.0, double c_prime = 1.0) {
    detail::require(s >= 1 && s <= p, "sparse_bound: need 1 <= s <= p");
    detail::require(sigma2 > 0.0 && cond_sys > 0.0, "sparse_bound: sigma^2 and cond_sys must be > 0");
    detail::require_delta(delta, "sparse_bound");
    detail::require_divides(k, t, "sparse_bound");
    const double sd = static_cast<double>(s), pd = static_cast<double>(p);
    const double bound =
        c * sigma2 * (sd * std::log(pd * cond_sys / sd) + std::log(1.0 / delta)) / static_cast<double>(t);
    const double need =
        c_prime * sigma2 * (sd * (std::log(cond_sys) + std::log(pd / sd)) + std::log(1.0 / delta));
    return {bound, static_cast<double>(t) / static_cast<double>(k) >= need};
}

/// cond_sys(T, k) = (1 + |L L^T| / (k lmin(Sigma_T))) lmax(Sigma_T) / lmin(Sigma_k)
/// with Sigma_j = (1/j) sum_{t=1}^{j} E X_t X_t^T.
inline double sparse_cond_sys(const std::vector<Matrix>& cov, long t, long k, double ll_op) {
    detail::require_divides(k, t, "sparse_cond_sys");
    detail::require(static_cast<long>(cov.size()) > t,
                    "sparse_cond_sys: covariance list must hold Sigma_0..Sigma_T");
    Matrix sum_k = Matrix::Zero(cov[0].rows(), cov[0].cols());
    Matrix sum_t = sum_k;
    for (long j = 1; j <= t; ++j) {
        sum_t += cov[j];
        if (j == k) sum_k = sum_t;
    }
    const auto et = numerics::sym_eig_extremes(sum_t / static_cast<double>(t));
    const double lk = numerics::lambda_min(sum_k / static_cast<double>(k));
    if (!(et.lambda_min > 0.0) || !(lk > 0.0))
        throw ExcitationError("sparse_cond_sys: averaged covariances must be positive definite");
    return (1.0 + ll_op / (static_cast<double>(k) * et.lambda_min)) * et.lambda_max / lk;
}

/// bound = 16 sigma^2 (log|F| + log(2/delta)) / T,
/// burn-in T/k >= 4 cond_F^2 (log|F| + log(2/delta)).
inline GatedBound nonlinear_bound(double sigma2, double class_size, double delta, long t,
                                  long k, double cond_f) {
    detail::require(class_size >= 1.0, "nonlinear_bound: class size must be >= 1");
    detail::require(sigma2 > 0.0 && cond_f > 0.0, "nonlinear_bound: sigma^2 and cond_F must be > 0");
    detail::require_delta(delta, "nonlinear_bound");
    detail::require_divides(k, t, "nonlinear_bound");
    const double comp = std::log(class_size) + std::log(2.0 / delta);
    return {16.0 * sigma2 * comp / static_cast<double>(t),
            static_cast<double>(t) / static_cast<double>(k) >= 4.0 * cond_f * cond_f * comp};
}

/// cond_F = max over t and shifted members g of sqrt(E g^4) / E g^2, where
/// `sq_norms[t]` holds samples of ||g(X_t)||^2 for each member (one column per
/// member, one row per independent draw). Times and members with zero second
/// moment are skipped.
inline double estimate_cond_f(const std::vector<Matrix>& sq_norms) {
    double best = 0.0;
    for (const auto& m : sq_norms) {
        for (Index c = 0; c < m.cols(); ++c) {
            const double m2 = m.col(c).mean();
            if (!(m2 > 0.0)) continue;
            const double m4 = m.col(c).array().square().mean();
            best = std::max(best, std::sqrt(m4) / m2);
        }
    }
    if (!(best > 0.0)) throw ExcitationError("estimate_cond_f: every member has zero second moment");
    return best;
}

}  // namespace bounds

// ---------------------------------------------------------------------------
// Named evaluation (CLI front end)

namespace bounds {

namespace detail {

class Inputs {
public:
    explicit Inputs(const std::map<std::string, double>& m) : m_(m) {}

    double get(const std::string& key) {
        auto it = m_.find(key);
        if (it == m_.end()) throw ConfigError("bound input '" + key + "' is missing");
        used_[key] = it->second;
        return it->second;
    }
    double get(const std::string& key, double fallback) {
        auto it = m_.find(key);
        const double v = it == m_.end() ? fallback : it->second;
        used_[key] = v;
        return v;
    }
    long count(const std::string& key) {
        const double v = get(key);
        if (v != std::floor(v)) throw ConfigError("bound input '" + key + "' must be an integer");
        return static_cast<long>(v);
    }
    const std::map<std::string, double>& used() const { return used_; }

private:
    const std::map<std::string, double>& m_;
    std::map<std::string, double> used_;
};

}  // namespace detail

inline const std::vector<std::string>& bound_names() {
    static const std::vector<std::string> names = {
        "gaussian_tail",       "hw_tail",          "hw_mgf_exponent", "covering_cardinality",
        "spectrum_deviation",  "csys",             "lower_tail",      "selfnorm_frobenius",
        "selfnorm_operator",   "snr",              "arx_burn_in",     "arx_error",
        "matrix_markov",       "power_norm",       "ss_horizon",      "ss_error",
        "sparse",              "nonlinear"};
    return names;
}

/// Evaluates the bound called `name` on the scalar inputs `in`.
inline BoundReport evaluate_bound(const std::string& name, const std::map<std::string, double>& in) {
    detail::Inputs x(in);
    if (name == "gaussian_tail") {
        const double v = gaussian_tail(x.get("s"), x.get("sigma2"));
        return probability_report(name, v, x.used());
    }
    if (name == "hw_tail") {
        const double v = hw_tail(x.get("s"), x.get("sigma2"), x.get("m_frob"), x.get("m_op"));
        return probability_report(name, v, x.used());
    }
    if (name == "hw_mgf_exponent") {
        const double v =
            hw_mgf_exponent(x.get("lambda"), x.get("sigma2"), x.get("m_frob"), x.get("m_op"));
        return value_report(name, v, x.used());
    }
    if (name == "covering_cardinality") {
        const double v = covering_cardinality_bound(x.get("eps"), x.count("d"));
        return value_report(name, v, x.used());
    }
    if (name == "spectrum_deviation") {
        const double v = spectrum_deviation_failure(x.get("eps"), x.get("K2"), x.get("m_op"),
                                                    x.get("l_op"), x.count("d_x"));
        return probability_report(name, v, x.used());
    }
    if (name == "csys") {
        const double v = csys(x.count("T"), x.count("k"), x.get("l_op2"), x.get("sum_cov_min"),
                              x.get("sum_cov_max"), x.get("sum_decoupled_min"));
        return value_report(name, v, x.used());
    }
    if (name == "lower_tail") {
        const double v = lower_tail_failure(x.count("T"), x.count("k"), x.get("K2"), x.count("d"),
                                            x.get("c_sys"));
        return probability_report(name, v, x.used());
    }
    if (name == "selfnorm_frobenius") {
        const double v = selfnorm_frobenius_bound(x.count("d_y"), x.get("sigma2"),
                                                  x.get("logdet_ratio"), x.get("delta"));
        return value_report(name, v, x.used());
    }
    if (name == "selfnorm_operator") {
        const double v = selfnorm_operator_bound(x.count("d_y"), x.get("sigma2"),
                                                 x.get("logdet_ratio"), x.get("delta"));
        return value_report(name, v, x.used());
    }
    if (name == "snr") {
        const double v = snr({x.get("sigma_tau_min_eig"), x.get("noise_op_norm"), x.get("K2"),
                              x.count("tau")});
        return value_report(name, v, x.used());
    }
    if (name == "arx_burn_in") {
        const auto b = arx_burn_in(x.count("T"), x.get("delta"), x.count("tau"), x.get("K2"),
                                   x.count("dims"), x.get("sigma_T_op"), x.get("sigma_tau_min"));
        auto used = x.used();
        used["c_sys"] = b.c_sys;
        used["satisfied"] = b.satisfied ? 1.0 : 0.0;
        return value_report(name, b.T0, used, b.satisfied);
    }
    if (name == "arx_error") {
        const double v = arx_error_bound(x.get("snr_tau"), x.count("T"), x.count("dims"),
                                         x.get("delta"), x.get("logdet_cond"), x.get("C", kDefaultC));
        return value_report(name, v, x.used());
    }
    if (name == "matrix_markov") {
        return value_report(name, matrix_markov_factor(x.count("dims"), x.get("delta")), x.used());
    }
    if (name == "power_norm") {
        return value_report(name, power_norm_bound(x.count("k"), x.count("d"), x.get("M")),
                            x.used());
    }
    if (name == "ss_horizon") {
        return value_report(name, static_cast<double>(ss_horizon(x.get("beta"), x.count("T"))),
                            x.used());
    }
    if (name == "ss_error") {
        const double v = ss_error_bound(x.get("snr_pp"), x.count("T"), x.count("p"),
                                        x.count("d_sum"), x.get("delta"), x.get("logdet_cond"),
                                        x.get("C1", kDefaultC1));
        return value_report(name, v, x.used());
    }
    if (name == "sparse") {
        const auto g = sparse_bound(x.get("sigma2"), x.count("s"), x.count("p"), x.get("cond_sys"),
                                    x.get("delta"), x.count("T"), x.count("k"), x.get("c", 1.0),
                                    x.get("c_prime", 1.0));
        auto used = x.used();
        used["burn_in_ok"] = g.burn_in_ok ? 1.0 : 0.0;
        return value_report(name, g.bound, used, g.burn_in_ok);
    }
    if (name == "nonlinear") {
        const auto g = nonlinear_bound(x.get("sigma2"), x.get("class_size"), x.get("delta"),
                                       x.count("T"), x.count("k"), x.get("cond_f"));
        auto used = x.used();
        used["burn_in_ok"] = g.burn_in_ok ? 1.0 : 0.0;
        return value_report(name, g.bound, used, g.burn_in_ok);
    }
    throw ConfigError("unknown bound '" + name + "'");
}

}  // namespace bounds

inline nlohmann::json to_json(const BoundReport& r) {
    nlohmann::json j;
    j["name"] = r.name;
    j["value"] = r.value;
    j["valid"] = r.valid;
    j["vacuous"] = r.vacuous;
    nlohmann::json inputs = nlohmann::json::object();
    for (const auto& [k, v] : r.inputs) inputs[k] = v;
    j["inputs"] = inputs;
    return j;
}

}  // namespace sysid
