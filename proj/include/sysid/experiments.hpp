#pragma once

/** @file
 * Seeded Monte Carlo campaigns: coverage of high-probability bounds,
 * convergence-rate fits and Hanson-Wright tail comparisons.
 *
 * Trial i of a campaign draws from derive_stream(base_seed, i) and writes
 * only to its own result slot; reports are folded in trial order afterwards,
 * so the output does not depend on the number of threads or on scheduling.
 *
 * Sample alignment. ARX campaigns simulate T_max + 1 steps and use regressor
 * rows t = 1..T for horizon T, so the empirical covariance is
 * (1/T) sum_{t=1}^{T} X_t X_t^T with X_1 = [Y_0, U_0, 0...]. The nonlinear
 * campaign simulates T_max steps restarted every k steps and uses rows
 * t = 0..T-1, so each block of k rows is an independent copy.
 */

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "sysid/bounds.hpp"
#include "sysid/error.hpp"
#include "sysid/estimators.hpp"
#include "sysid/format.hpp"
#include "sysid/numerics.hpp"
#include "sysid/rng.hpp"
#include "sysid/systems.hpp"

namespace sysid {

inline constexpr const char* kArtifactVersion = "1.0.0";

/// Absolute/relative slack applied to every bound event (round-off allowance).
inline constexpr double kEventSlack = 1e-10;

/// Estimators/events a coverage campaign can run.
inline const std::vector<std::string>& campaign_estimators() {
    static const std::vector<std::string> names = {"arx_ols", "arx_pe", "selfnorm", "sparse",
                                                   "nonlinear"};
    return names;
}

struct ExperimentConfig {
    std::string name = "experiment";
    std::string estimator = "arx_ols";
    std::optional<ArxSystem> system;
    NoiseSpec noise;
    std::vector<long> horizons;
    long trials = 1;
    std::vector<double> delta_grid;
    std::uint64_t base_seed = 0;
    long tau_or_p = 1;
    std::optional<long> restart_k;
    long sparsity = 1;                 ///< s for the sparse estimator
    std::vector<double> class_gains;   ///< nonlinear: scalar gain class
    double selfnorm_reg = 1.0;         ///< regularizer Sigma = selfnorm_reg * I
    double C = kDefaultC;
    double c = 1.0;
    double c_prime = 1.0;
    long cond_samples = 4000;          ///< nonlinear: draws used to estimate cond_F
    unsigned threads = 0;              ///< 0 = hardware concurrency

    void validate() const {
        if (!system) throw ContractError(name + ": campaign needs a system");
        if (trials < 1) throw ContractError(name + ": trials must be >= 1");
        if (horizons.empty()) throw ContractError(name + ": horizons must be nonempty");
        for (std::size_t i = 0; i < horizons.size(); ++i) {
            if (horizons[i] < 1) throw ContractError(name + ": horizons must be >= 1");
            if (i > 0 && horizons[i] <= horizons[i - 1])
                throw ContractError(name + ": horizons must be strictly increasing");
        }
        for (double d : delta_grid)
            if (!(d > 0.0 && d < 1.0)) throw ContractError(name + ": every delta must lie in (0, 1)");
        if (delta_grid.empty()) throw ContractError(name + ": delta grid must be nonempty");
        noise.validate();
        if (std::find(campaign_estimators().begin(), campaign_estimators().end(), estimator) ==
            campaign_estimators().end())
            throw ConfigError(name + ": unknown estimator '" + estimator + "'");
    }
};

struct CoverageCell {
    std::string experiment;  ///< "<name>:<metric>"
    long T = 0;
    double delta = 0.0;
    long trials = 0;
    long violations = 0;
    double empirical_rate = 0.0;
    double wilson_upper = 0.0;
    double bound_value = 0.0;
    bool valid = true;
    std::optional<double> empirical_constant;
};

struct CoverageReport {
    std::vector<CoverageCell> cells;
};

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    std::vector<long> horizons;
    std::vector<double> medians_per_T;
};

// ---------------------------------------------------------------------------
// Statistics helpers

inline constexpr double kWilsonZ95 = 1.959963984540054;

/// Upper end of the two-sided 95% Wilson score interval for k successes in n.
inline double wilson_upper(long k, long n, double z = kWilsonZ95) {
    if (n < 1 || k < 0 || k > n) throw ContractError("wilson_upper: need 0 <= k <= n, n >= 1");
    const double nn = static_cast<double>(n);
    const double ph = static_cast<double>(k) / nn;
    const double z2 = z * z;
    const double centre = ph + z2 / (2.0 * nn);
    const double half = z * std::sqrt(ph * (1.0 - ph) / nn + z2 / (4.0 * nn * nn));
    return std::min(1.0, (centre + half) / (1.0 + z2 / nn));
}

/// Ordinary least squares line through (log x, log y).
inline RateFit fit_loglog(const std::vector<long>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw DimensionError("fit_loglog: length mismatch");
    if (xs.size() < 4) throw ContractError("fit_loglog: need at least 4 horizons");
    const std::size_t n = xs.size();
    std::vector<double> lx(n), ly(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(ys[i] > 0.0) || !std::isfinite(ys[i]))
            throw NumericError("fit_loglog: median error at T = " + std::to_string(xs[i]) +
                               " is zero or non-finite (degenerate rate cell)");
        lx[i] = std::log(static_cast<double>(xs[i]));
        ly[i] = std::log(ys[i]);
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    RateFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r2 = syy > 0.0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 1.0;
    fit.horizons = xs;
    fit.medians_per_T = ys;
    return fit;
}

inline double median(std::vector<double> v) {
    if (v.empty()) throw ContractError("median: empty sample");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Smallest c with #{i : v_i > c} <= floor(delta n): the empirical constant
/// that makes a bound proportional to c hold at level delta.
inline double upper_quantile(std::vector<double> v, double delta) {
    if (v.empty()) throw ContractError("upper_quantile: empty sample");
    std::sort(v.begin(), v.end());
    const long n = static_cast<long>(v.size());
    const long allowed = static_cast<long>(std::floor(delta * static_cast<double>(n)));
    const long idx = std::max(0L, n - 1 - allowed);
    return v[static_cast<std::size_t>(idx)];
}

// ---------------------------------------------------------------------------
// Trial runner

/// Runs `trial(i, stream)` for i = 0..trials-1, each on derive_stream(seed, i),
/// and returns the results in trial order.
template <class Result>
std::vector<Result> run_trials(long trials, std::uint64_t base_seed, unsigned threads,
                               const std::function<Result(long, Stream&)>& trial) {
    std::vector<Result> out(static_cast<std::size_t>(trials));
    unsigned nthreads = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
    nthreads = static_cast<unsigned>(std::min<long>(nthreads, trials));
    std::atomic<long> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    auto worker = [&]() {
        for (;;) {
            const long i = next.fetch_add(1);
            if (i >= trials || failed.load()) return;
            try {
                Stream s = derive_stream(base_seed, static_cast<std::uint64_t>(i));
                out[static_cast<std::size_t>(i)] = trial(i, s);
            } catch (...) {
                if (!failed.exchange(true)) failure = std::current_exception();
                return;
            }
        }
    };
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < nthreads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

namespace detail {

/// E X_t X_t^T, t = 0..T, with the noise drive scaled by `noise_var`.
inline std::vector<Matrix> arx_covariances(const ArxSystem& sys, double noise_var, long horizon) {
    LiftedSystem lift = companion_embed(sys);
    lift.drive_cov.topLeftCorner(sys.d_y(), sys.d_y()) *= noise_var;
    return lifted_covariances(lift, horizon);
}

inline double noise_var(const NoiseSpec& n) { return n.scale * n.scale; }

inline void push_cells(CoverageReport& rep, const std::string& exp, long t, double delta,
                       const std::vector<char>& violated, double bound, bool valid,
                       std::optional<double> constant = std::nullopt) {
    CoverageCell c;
    c.experiment = exp;
    c.T = t;
    c.delta = delta;
    c.trials = static_cast<long>(violated.size());
    for (char v : violated) c.violations += v ? 1 : 0;
    c.empirical_rate = static_cast<double>(c.violations) / static_cast<double>(c.trials);
    c.wilson_upper = wilson_upper(c.violations, c.trials);
    c.bound_value = bound;
    c.valid = valid;
    c.empirical_constant = constant;
    rep.cells.push_back(std::move(c));
}

inline bool exceeds(double stat, double bound) {
    return stat > bound + kEventSlack * std::max(1.0, std::abs(bound));
}

inline long max_lag(const ArxSystem& s) { return std::max<long>(s.p(), s.q()); }

inline Trajectory simulate_arx_prefix(const ExperimentConfig& cfg, Stream& s) {
    return simulate(*cfg.system, cfg.noise, cfg.horizons.back() + 1, s);
}

using PerHorizon = std::vector<std::vector<double>>;  // [horizon][statistic]

// -- arx_ols: squared operator-norm error -----------------------------------

inline PerHorizon ols_errors(const ExperimentConfig& cfg, Stream& s) {
    const auto& sys = *cfg.system;
    const Trajectory tr = simulate_arx_prefix(cfg, s);
    const auto st = regressors(tr, sys.p(), sys.q());
    const Matrix theta = sys.theta_star();
    PerHorizon out;
    for (long t : cfg.horizons) {
        const Estimate e = ols(st.X.middleRows(1, t), st.Y.middleRows(1, t));
        const double err = numerics::op_norm(e.theta_hat - theta);
        out.push_back({err * err});
    }
    return out;
}

inline CoverageReport coverage_arx_ols(const ExperimentConfig& cfg) {
    const auto& sys = *cfg.system;
    const long tau = cfg.tau_or_p;
    if (tau < max_lag(sys)) throw ContractError(cfg.name + ": tau must be >= max(p, q)");
    const double k2 = cfg.noise.variance_proxy_K2();
    const double nv = noise_var(cfg.noise);
    const auto cov = arx_covariances(sys, nv, std::max(cfg.horizons.back(), tau));
    const double tau_min = numerics::lambda_min(cov[tau]);
    if (!(tau_min > 0.0))
        throw ExcitationError(cfg.name + ": lambda_min(Sigma_tau) = 0 (system not excited by tau)");
    const double noise_op = nv * numerics::lambda_max(sys.sigma_w());
    const double snr_tau = noise_op > 0.0 ? bounds::snr({tau_min, noise_op, k2, tau})
                                          : std::numeric_limits<double>::infinity();
    const long dims = sys.regressor_dim();

    const auto results = run_trials<PerHorizon>(
        cfg.trials, cfg.base_seed, cfg.threads,
        [&](long, Stream& s) { return ols_errors(cfg, s); });

    CoverageReport rep;
    for (double delta : cfg.delta_grid) {
        // The bound is certified from T_pe(delta / 3, tau) onward.
        long t_pe = -1;
        if (nv > 0.0) t_pe = bounds::arx_pe_horizon(sys, delta / 3.0, tau, k2);
        for (std::size_t h = 0; h < cfg.horizons.size(); ++h) {
            const long t = cfg.horizons[h];
            const double logdet = numerics::logdet_psd(cov[t]) - numerics::logdet_psd(cov[tau]);
            const double bound = bounds::arx_error_bound(snr_tau, t, dims, delta, logdet, cfg.C);
            std::vector<char> viol;
            std::vector<double> ratios;
            for (const auto& r : results) {
                viol.push_back(exceeds(r[h][0], bound));
                if (bound > 0.0) ratios.push_back(r[h][0] / (bound / cfg.C));
            }
            std::optional<double> constant;
            if (!ratios.empty()) constant = upper_quantile(ratios, delta);
            push_cells(rep, cfg.name + ":op_error_sq", t, delta, viol, bound, t >= t_pe, constant);
        }
    }
    return rep;
}

// -- arx_pe: lambda_min(Sigma_hat_T - Sigma_tau / 16) ------------------------

inline CoverageReport coverage_arx_pe(const ExperimentConfig& cfg) {
    const auto& sys = *cfg.system;
    const long tau = cfg.tau_or_p;
    if (tau < max_lag(sys)) throw ContractError(cfg.name + ": tau must be >= max(p, q)");
    const double k2 = cfg.noise.variance_proxy_K2();
    const double nv = noise_var(cfg.noise);
    const auto cov = arx_covariances(sys, nv, std::max(cfg.horizons.back(), tau));
    const Matrix target = cov[tau] / 16.0;
    const double tau_min = numerics::lambda_min(cov[tau]);
    if (!(tau_min > 0.0))
        throw ExcitationError(cfg.name + ": lambda_min(Sigma_tau) = 0 (system not excited by tau)");

    const auto results = run_trials<PerHorizon>(
        cfg.trials, cfg.base_seed, cfg.threads, [&](long, Stream& s) {
            const Trajectory tr = simulate_arx_prefix(cfg, s);
            const auto st = regressors(tr, sys.p(), sys.q());
            PerHorizon out;
            for (long t : cfg.horizons) {
                const Matrix emp = ::sysid::detail::gram(st.X.middleRows(1, t)) / static_cast<double>(t);
                out.push_back({numerics::lambda_min(numerics::symmetrized(emp - target))});
            }
            return out;
        });

    CoverageReport rep;
    const long dims = sys.regressor_dim();
    for (double delta : cfg.delta_grid) {
        for (std::size_t h = 0; h < cfg.horizons.size(); ++h) {
            const long t = cfg.horizons[h];
            const auto b = bounds::arx_burn_in(t, delta, tau, k2, dims,
                                               numerics::lambda_max(cov[t]), tau_min);
            std::vector<char> viol;
            for (const auto& r : results) viol.push_back(r[h][0] < -kEventSlack);
            push_cells(rep, cfg.name + ":pe", t, delta, viol, b.T0, b.satisfied);
        }
    }
    return rep;
}

// -- selfnorm: both self-normalized displays ---------------------------------

inline CoverageReport coverage_selfnorm(const ExperimentConfig& cfg) {
    const auto& sys = *cfg.system;
    if (!(cfg.selfnorm_reg > 0.0)) throw ContractError(cfg.name + ": selfnorm regularizer must be > 0");
    const double sigma2 = noise_var(cfg.noise) * cfg.noise.variance_proxy_K2() *
                          numerics::lambda_max(sys.sigma_w());
    const long dy = sys.d_y();
    const Index dx = sys.regressor_dim();

    // Per horizon: frobenius statistic, operator statistic, log-det ratio.
    const auto results = run_trials<PerHorizon>(
        cfg.trials, cfg.base_seed, cfg.threads, [&](long, Stream& s) {
            const Trajectory tr = simulate_arx_prefix(cfg, s);
            const auto st = regressors(tr, sys.p(), sys.q());
            const Matrix v = tr.W * sys.sigma_w_sqrt().transpose();  // row t = V_t^T
            PerHorizon out;
            const Matrix reg = cfg.selfnorm_reg * Matrix::Identity(dx, dx);
            for (long t : cfg.horizons) {
                const auto x = st.X.middleRows(1, t);
                const Matrix g = reg + ::sysid::detail::gram(x);
                const Matrix sv = v.middleRows(1, t).transpose() * x;  // d_Y x d_X
                Eigen::LLT<Matrix> llt(g);
                const Matrix q = sv * llt.solve(sv.transpose());
                const double frob = q.trace();
                const double op = numerics::lambda_max(numerics::symmetrized(q));
                const double ratio = numerics::logdet_psd(g) - numerics::logdet_psd(reg);
                out.push_back({frob, op, std::max(0.0, ratio)});
            }
            return out;
        });

    CoverageReport rep;
    if (!(sigma2 > 0.0)) {
        // Noiseless: the martingale is identically zero.
        for (double delta : cfg.delta_grid)
            for (std::size_t h = 0; h < cfg.horizons.size(); ++h)
                for (const char* m : {":frobenius", ":operator"}) {
                    std::vector<char> viol;
                    for (const auto& r : results) viol.push_back(r[h][m[1] == 'f' ? 0 : 1] > kEventSlack);
                    push_cells(rep, cfg.name + m, cfg.horizons[h], delta, viol, 0.0, true);
                }
        return rep;
    }
    for (double delta : cfg.delta_grid) {
        for (std::size_t h = 0; h < cfg.horizons.size(); ++h) {
            const long t = cfg.horizons[h];
            std::vector<char> vf, vo;
            double sum_f = 0.0, sum_o = 0.0;
            for (const auto& r : results) {
                const double bf = bounds::selfnorm_frobenius_bound(dy, sigma2, r[h][2], delta);
                const double bo = bounds::selfnorm_operator_bound(dy, sigma2, r[h][2], delta);
                vf.push_back(exceeds(r[h][0], bf));
                vo.push_back(exceeds(r[h][1], bo));
                sum_f += bf;
                sum_o += bo;
            }
            const double n = static_cast<double>(results.size());
            push_cells(rep, cfg.name + ":frobenius", t, delta, vf, sum_f / n, true);
            push_cells(rep, cfg.name + ":operator", t, delta, vo, sum_o / n, true);
        }
    }
    return rep;
}

// -- sparse: Mahalanobis error under Sigma_k, and comparison with OLS --------

inline CoverageReport coverage_sparse(const ExperimentConfig& cfg) {
    const auto& sys = *cfg.system;
    if (sys.d_y() != 1) throw ContractError(cfg.name + ": sparse campaign needs scalar outputs");
    const long k = cfg.restart_k.value_or(cfg.horizons.front());
    for (long t : cfg.horizons)
        if (t % k != 0) throw ContractError(cfg.name + ": block length k must divide every horizon");
    const double nv = noise_var(cfg.noise);
    const double sigma2 = nv * cfg.noise.variance_proxy_K2() * numerics::lambda_max(sys.sigma_w());
    const auto cov = arx_covariances(sys, nv, cfg.horizons.back());
    Matrix sigma_k = Matrix::Zero(cov[0].rows(), cov[0].cols());
    for (long j = 1; j <= k; ++j) sigma_k += cov[j];
    sigma_k /= static_cast<double>(k);
    const Matrix theta = sys.theta_star();
    const long s = cfg.sparsity;

    // Per horizon: sparse Mahalanobis^2, OLS Mahalanobis^2.
    const auto results = run_trials<PerHorizon>(
        cfg.trials, cfg.base_seed, cfg.threads, [&](long, Stream& st) {
            const Trajectory tr = simulate_arx_prefix(cfg, st);
            const auto rs = regressors(tr, sys.p(), sys.q());
            PerHorizon out;
            for (long t : cfg.horizons) {
                const auto x = rs.X.middleRows(1, t);
                const auto y = rs.Y.middleRows(1, t);
                const auto es = error_norms(sparse_lse(x, y, s).theta_hat, theta, sigma_k);
                const auto eo = error_norms(ols(x, y).theta_hat, theta, sigma_k);
                out.push_back({*es.mahalanobis * *es.mahalanobis, *eo.mahalanobis * *eo.mahalanobis});
            }
            return out;
        });

    CoverageReport rep;
    const LiftedSystem lift = companion_embed(sys);
    for (std::size_t h = 0; h < cfg.horizons.size(); ++h) {
        const long t = cfg.horizons[h];
        std::vector<char> worse;
        for (const auto& r : results) worse.push_back(r[h][0] > r[h][1]);
        push_cells(rep, cfg.name + ":sparse_worse_than_ols", t,
                   std::numeric_limits<double>::quiet_NaN(), worse,
                   std::numeric_limits<double>::quiet_NaN(), true);
    }
    if (!(sigma2 > 0.0)) return rep;
    LiftedSystem scaled = lift;
    scaled.B.leftCols(sys.d_y()) *= cfg.noise.scale;
    std::vector<double> conds;
    for (long t : cfg.horizons) {
        const CausalOperator op(scaled.A, scaled.B, t, k);
        conds.push_back(bounds::sparse_cond_sys(cov, t, k, op.gram_op_norm()));
    }
    for (double delta : cfg.delta_grid) {
        for (std::size_t h = 0; h < cfg.horizons.size(); ++h) {
            const long t = cfg.horizons[h];
            const double cond = conds[h];
            const auto g = bounds::sparse_bound(sigma2, s, sys.regressor_dim(), cond, delta, t, k,
                                                cfg.c, cfg.c_prime);
            std::vector<char> viol;
            std::vector<double> ratios;
            for (const auto& r : results) {
                viol.push_back(exceeds(r[h][0], g.bound));
                ratios.push_back(r[h][0] / (g.bound / cfg.c));
            }
            push_cells(rep, cfg.name + ":mahalanobis_sq", t, delta, viol, g.bound, g.burn_in_ok,
                       upper_quantile(ratios, delta));
        }
    }
    return rep;
}

// -- nonlinear: finite scalar-gain class on a restarted AR(1) ----------------

inline CoverageReport coverage_nonlinear(const ExperimentConfig& cfg) {
    const auto& sys = *cfg.system;
    if (sys.p() != 1 || sys.q() != 0 || sys.d_y() != 1)
        throw ContractError(cfg.name + ": nonlinear campaign needs a scalar AR(1) system");
    if (cfg.class_gains.empty()) throw ContractError(cfg.name + ": class gains must be nonempty");
    if (!cfg.restart_k) throw ContractError(cfg.name + ": nonlinear campaign needs restart blocks k");
    const long k = *cfg.restart_k;
    for (long t : cfg.horizons)
        if (t % k != 0) throw ContractError(cfg.name + ": block length k must divide every horizon");
    const double g_star = sys.a_coeffs()[0](0, 0);
    const auto it = std::find(cfg.class_gains.begin(), cfg.class_gains.end(), g_star);
    if (it == cfg.class_gains.end())
        throw ContractError(cfg.name + ": the true gain must belong to the class (realizability)");
    const FiniteClass fc = scalar_gain_class(cfg.class_gains);
    const double nv = noise_var(cfg.noise);
    const double sigma2 = nv * cfg.noise.variance_proxy_K2() * numerics::lambda_max(sys.sigma_w());

    // Mean second moment of X_t over one restart block.
    const auto cov = arx_covariances(sys, nv, k);
    double mean_m2 = 0.0;
    for (long j = 0; j < k; ++j) mean_m2 += cov[j](0, 0);
    mean_m2 /= static_cast<double>(k);

    // cond_F from independent restart blocks; f - f* = (g - g*) x, so every
    // member shares the ratio and a single column suffices.
    double cond_f = 1.0;
    if (nv > 0.0) {
        std::vector<Matrix> sq(static_cast<std::size_t>(k), Matrix(cfg.cond_samples, 1));
        Stream cs = derive_stream(cfg.base_seed ^ 0xC0DDF00DULL, std::uint64_t(-1));
        for (long i = 0; i < cfg.cond_samples; ++i) {
            const Trajectory b = simulate(sys, cfg.noise, k, cs);
            for (long j = 0; j < k; ++j) {
                const double x = j == 0 ? 0.0 : b.Y(j - 1, 0);
                sq[j](i, 0) = x * x;
            }
        }
        cond_f = bounds::estimate_cond_f(sq);
    }

    const auto results = run_trials<PerHorizon>(
        cfg.trials, cfg.base_seed, cfg.threads, [&](long, Stream& s) {
            const Trajectory tr = simulate(sys, cfg.noise, cfg.horizons.back(), s, k);
            const auto rs = regressors(tr, 1, 0);
            PerHorizon out;
            for (long t : cfg.horizons) {
                const ClassFit fit = finite_class_lse(fc, rs.X.topRows(t), rs.Y.topRows(t));
                const double d = cfg.class_gains[fit.best] - g_star;
                out.push_back({d * d * mean_m2});
            }
            return out;
        });

    CoverageReport rep;
    for (double delta : cfg.delta_grid) {
        for (std::size_t h = 0; h < cfg.horizons.size(); ++h) {
            const long t = cfg.horizons[h];
            std::vector<char> viol;
            if (!(sigma2 > 0.0)) {
                for (const auto& r : results) viol.push_back(r[h][0] > kEventSlack);
                push_cells(rep, cfg.name + ":l2_error_sq", t, delta, viol, 0.0, true);
                continue;
            }
            const auto g = bounds::nonlinear_bound(sigma2, static_cast<double>(fc.cardinality()),
                                                   delta, t, k, cond_f);
            for (const auto& r : results) viol.push_back(exceeds(r[h][0], g.bound));
            push_cells(rep, cfg.name + ":l2_error_sq", t, delta, viol, g.bound, g.burn_in_ok);
        }
    }
    return rep;
}

}  // namespace detail

/// Runs the coverage campaign selected by cfg.estimator.
inline CoverageReport mc_coverage(const ExperimentConfig& cfg) {
    cfg.validate();
    if (cfg.estimator == "arx_ols") return detail::coverage_arx_ols(cfg);
    if (cfg.estimator == "arx_pe") return detail::coverage_arx_pe(cfg);
    if (cfg.estimator == "selfnorm") return detail::coverage_selfnorm(cfg);
    if (cfg.estimator == "sparse") return detail::coverage_sparse(cfg);
    if (cfg.estimator == "nonlinear") return detail::coverage_nonlinear(cfg);
    throw ConfigError(cfg.name + ": unknown estimator '" + cfg.estimator + "'");
}

/// Median over trials of the OLS operator-norm error at every horizon, fitted
/// on log-log axes.
inline RateFit rate_fit(const ExperimentConfig& cfg) {
    if (!cfg.system) throw ContractError(cfg.name + ": rate fit needs a system");
    if (cfg.horizons.size() < 4) throw ContractError(cfg.name + ": rate fit needs >= 4 horizons");
    ExperimentConfig c = cfg;
    c.delta_grid = cfg.delta_grid.empty() ? std::vector<double>{0.1} : cfg.delta_grid;
    c.estimator = "arx_ols";
    c.validate();
    const auto results = run_trials<detail::PerHorizon>(
        c.trials, c.base_seed, c.threads,
        [&](long, Stream& s) { return detail::ols_errors(c, s); });
    std::vector<double> meds;
    for (std::size_t h = 0; h < c.horizons.size(); ++h) {
        std::vector<double> v;
        for (const auto& r : results) v.push_back(std::sqrt(r[h][0]));
        meds.push_back(median(std::move(v)));
    }
    return fit_loglog(c.horizons, meds);
}

// ---------------------------------------------------------------------------
// Hanson-Wright tail comparison

struct TailPoint {
    double s;
    double empirical_ccdf;
    double hw_bound;      ///< clamped to [0, 1]
    double hw_pre_clamp;
};

/// Empirical P(|W^T M W - E W^T M W| > s) against the Hanson-Wright bound,
/// for W with iid entries drawn from `noise`.
inline std::vector<TailPoint> tail_compare(const Matrix& m, const NoiseSpec& noise, long samples,
                                           const std::vector<double>& s_grid, Stream& stream) {
    numerics::require_symmetric(m, "tail_compare(M)");
    noise.validate();
    if (samples < 1000) throw ContractError("tail_compare: need at least 1000 samples");
    const Index d = m.rows();
    const double var = noise.scale * noise.scale;
    const double mean = var * m.trace();
    std::vector<double> dev(static_cast<std::size_t>(samples));
    Vector w(d);
    for (long i = 0; i < samples; ++i) {
        for (Index j = 0; j < d; ++j) w(j) = noise.draw(stream);
        dev[static_cast<std::size_t>(i)] = std::abs(w.dot(m * w) - mean);
    }
    std::sort(dev.begin(), dev.end());
    const double sigma2 = noise.effective_variance_proxy();
    const double frob = m.norm();
    const double op = numerics::op_norm(m);
    std::vector<TailPoint> out;
    for (double s : s_grid) {
        const auto above = dev.end() - std::upper_bound(dev.begin(), dev.end(), s);
        const double ccdf = static_cast<double>(above) / static_cast<double>(samples);
        double raw = 2.0;
        if (frob > 0.0 && sigma2 > 0.0) raw = bounds::hw_tail(s, sigma2, frob, op);
        else if (s > 0.0) raw = 0.0;
        out.push_back({s, ccdf, std::clamp(raw, 0.0, 1.0), raw});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Serialization

inline const char* kCoverageCsvHeader =
    "experiment,T,delta,trials,violations,empirical_rate,wilson_upper,bound_value,valid";

inline void write_coverage_csv(std::ostream& os, const CoverageReport& rep) {
    os << kCoverageCsvHeader << '\n';
    for (const auto& c : rep.cells) {
        os << c.experiment << ',' << c.T << ',' << fmt17(c.delta) << ',' << c.trials << ','
           << c.violations << ',' << fmt17(c.empirical_rate) << ',' << fmt17(c.wilson_upper)
           << ',' << fmt17(c.bound_value) << ',' << (c.valid ? "true" : "false") << '\n';
    }
}

inline nlohmann::json to_json(const CoverageReport& rep) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : rep.cells) {
        nlohmann::json j;
        j["experiment"] = c.experiment;
        j["T"] = c.T;
        j["delta"] = std::isfinite(c.delta) ? nlohmann::json(c.delta) : nlohmann::json(nullptr);
        j["trials"] = c.trials;
        j["violations"] = c.violations;
        j["empirical_rate"] = c.empirical_rate;
        j["wilson_upper"] = c.wilson_upper;
        j["bound_value"] =
            std::isfinite(c.bound_value) ? nlohmann::json(c.bound_value) : nlohmann::json(nullptr);
        j["valid"] = c.valid;
        if (c.empirical_constant) j["empirical_constant"] = *c.empirical_constant;
        arr.push_back(j);
    }
    return arr;
}

inline void write_rate_csv(std::ostream& os, const RateFit& fit) {
    os << "T,median_error\n";
    for (std::size_t i = 0; i < fit.horizons.size(); ++i)
        os << fit.horizons[i] << ',' << fmt17(fit.medians_per_T[i]) << '\n';
}

inline void write_tail_csv(std::ostream& os, const std::vector<TailPoint>& pts) {
    os << "s,empirical_ccdf,hw_bound,hw_pre_clamp,dominated\n";
    for (const auto& p : pts) {
        const bool dominated = p.hw_bound >= 1.0 || p.empirical_ccdf <= p.hw_bound;
        os << fmt17(p.s) << ',' << fmt17(p.empirical_ccdf) << ',' << fmt17(p.hw_bound) << ','
           << fmt17(p.hw_pre_clamp) << ',' << (dominated ? "true" : "false") << '\n';
    }
}

}  // namespace sysid
