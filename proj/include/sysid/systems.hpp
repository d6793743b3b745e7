#pragma once

/** @file
 * Linear system models (ARX and innovation-form state space), their
 * structural constructions and trajectory simulation.
 *
 * Time indexing: a trajectory of horizon T holds Y_t, U_t, W_t for
 * t = 0, ..., T-1 with all signals before t = 0 equal to zero. The ARX
 * regressor is X_t = [Y_{t-1}; ...; Y_{t-p}; U_{t-1}; ...; U_{t-q}], so
 * X_0 = 0 and the covariance list returned by covariance_sequence is indexed
 * the same way (entry t is E X_t X_t^T, entry 0 is zero).
 */

#include <algorithm>
#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "sysid/error.hpp"
#include "sysid/format.hpp"
#include "sysid/numerics.hpp"
#include "sysid/rng.hpp"

namespace sysid {

inline constexpr double kSpectralRadiusTol = 1e-8;

// ---------------------------------------------------------------------------
// Noise

enum class NoiseFamily { gaussian, rademacher, uniform };

inline std::string to_string(NoiseFamily f) {
    switch (f) {
        case NoiseFamily::gaussian: return "gaussian";
        case NoiseFamily::rademacher: return "rademacher";
        case NoiseFamily::uniform: return "uniform";
    }
    return "unknown";
}

inline NoiseFamily parse_noise_family(const std::string& name) {
    if (name == "gaussian") return NoiseFamily::gaussian;
    if (name == "rademacher") return NoiseFamily::rademacher;
    if (name == "uniform") return NoiseFamily::uniform;
    throw ConfigError("unknown noise family '" + name +
                        "' (expected gaussian, rademacher or uniform)");
}

/// Sub-Gaussian driving noise. Draws are mean zero with unit variance before
/// multiplication by `scale`; `scale = 0` gives a noiseless stream that still
/// consumes random numbers, so streams stay aligned across configurations.
struct NoiseSpec {
    NoiseFamily family = NoiseFamily::gaussian;
    double scale = 1.0;

    void validate() const {
        if (!(scale >= 0.0) || !std::isfinite(scale)) {
            throw ContractError("NoiseSpec: scale must be finite and >= 0");
        }
    }

    /// Variance proxy K^2 of the unit-variance draws, clamped to >= 1.
    /// Uniform draws live on [-sqrt 3, sqrt 3]; Hoeffding gives (width)^2 / 4 = 3.
    double variance_proxy_K2() const {
        switch (family) {
            case NoiseFamily::gaussian: return 1.0;
            case NoiseFamily::rademacher: return 1.0;
            case NoiseFamily::uniform: return 3.0;
        }
        return 1.0;
    }

    /// Variance proxy of the scaled draws.
    double effective_variance_proxy() const { return scale * scale * variance_proxy_K2(); }

    double draw(Stream& s) const {
        double z = 0.0;
        switch (family) {
            case NoiseFamily::gaussian: z = s.normal(); break;
            case NoiseFamily::rademacher: z = s.rademacher(); break;
            case NoiseFamily::uniform: z = std::sqrt(3.0) * (2.0 * s.uniform01() - 1.0); break;
        }
        return scale * z;
    }
};

/// rows x cols matrix of iid draws, filled row by row.
inline Matrix sample_noise(const NoiseSpec& spec, Index rows, Index cols, Stream& stream) {
    spec.validate();
    if (rows < 0 || cols < 0) throw DimensionError("sample_noise: negative size");
    Matrix out(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) out(i, j) = spec.draw(stream);
    return out;
}

// ---------------------------------------------------------------------------
// Spectral radius

/// Largest eigenvalue modulus (eigenvalues may be complex).
inline double spectral_radius(const Matrix& a) {
    numerics::require_square(a, "spectral_radius");
    numerics::require_finite(a, "spectral_radius");
    if (a.size() == 0) return 0.0;
    if (a.rows() == 1) return std::abs(a(0, 0));
    Eigen::EigenSolver<Matrix> es(a, false);
    if (es.info() != Eigen::Success) throw NumericError("spectral_radius: eigen-solver failed");
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

namespace detail {

inline void require_pd_factor(const Matrix& root, const char* what) {
    numerics::require_square(root, what);
    numerics::require_finite(root, what);
    const Matrix cov = root * root.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> es(numerics::symmetrized(cov), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success || es.eigenvalues()(0) <= 0.0) {
        throw ContractError(std::string(what) + ": covariance factor must give a positive "
                                                "definite covariance");
    }
}

inline void require_non_explosive(double rho, const char* what) {
    if (rho > 1.0 + kSpectralRadiusTol) {
        throw ContractError(std::string(what) + ": spectral radius " + std::to_string(rho) +
                            " exceeds 1 (explosive systems are not supported)");
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// ARX systems

/// Y_t = sum_i A_i Y_{t-i} + sum_j B_j U_{t-j} + Sigma_W^{1/2} W_t, with white
/// Gaussian inputs U_t ~ N(0, sigma_u^2 I).
class ArxSystem {
public:
    /// `d_u` is needed only when there are no input lags (q = 0).
    ArxSystem(std::vector<Matrix> a_coeffs, std::vector<Matrix> b_coeffs, Matrix sigma_w_sqrt,
              double sigma_u, Index d_u = -1)
        : a_(std::move(a_coeffs)),
          b_(std::move(b_coeffs)),
          sigma_w_sqrt_(std::move(sigma_w_sqrt)),
          sigma_u_(sigma_u) {
        if (a_.empty()) throw ContractError("ArxSystem: at least one output lag (p >= 1) required");
        d_y_ = a_.front().rows();
        if (!b_.empty()) {
            d_u_ = b_.front().cols();
            if (d_u >= 0 && d_u != d_u_) throw DimensionError("ArxSystem: d_u disagrees with B");
        } else {
            d_u_ = std::max<Index>(d_u, 0);
        }
        for (const auto& a : a_) {
            if (a.rows() != d_y_ || a.cols() != d_y_)
                throw DimensionError("ArxSystem: every A_i must be d_Y x d_Y");
            numerics::require_finite(a, "ArxSystem(A)");
        }
        for (const auto& b : b_) {
            if (b.rows() != d_y_ || b.cols() != d_u_)
                throw DimensionError("ArxSystem: every B_j must be d_Y x d_U");
            numerics::require_finite(b, "ArxSystem(B)");
        }
        if (sigma_w_sqrt_.rows() != d_y_ || sigma_w_sqrt_.cols() != d_y_)
            throw DimensionError("ArxSystem: Sigma_W^{1/2} must be d_Y x d_Y");
        detail::require_pd_factor(sigma_w_sqrt_, "ArxSystem(Sigma_W^{1/2})");
        if (!(sigma_u_ >= 0.0) || !std::isfinite(sigma_u_))
            throw ContractError("ArxSystem: sigma_u must be finite and >= 0");
        detail::require_non_explosive(spectral_radius(output_companion()), "ArxSystem");
    }

    Index p() const { return static_cast<Index>(a_.size()); }
    Index q() const { return static_cast<Index>(b_.size()); }
    Index d_y() const { return d_y_; }
    Index d_u() const { return d_u_; }
    Index regressor_dim() const { return p() * d_y_ + q() * d_u_; }
    const std::vector<Matrix>& a_coeffs() const { return a_; }
    const std::vector<Matrix>& b_coeffs() const { return b_; }
    const Matrix& sigma_w_sqrt() const { return sigma_w_sqrt_; }
    Matrix sigma_w() const { return sigma_w_sqrt_ * sigma_w_sqrt_.transpose(); }
    double sigma_u() const { return sigma_u_; }

    /// theta* = [A_1 ... A_p  B_1 ... B_q], matching the regressor layout.
    Matrix theta_star() const {
        Matrix theta(d_y_, regressor_dim());
        Index col = 0;
        for (const auto& a : a_) {
            theta.middleCols(col, d_y_) = a;
            col += d_y_;
        }
        for (const auto& b : b_) {
            theta.middleCols(col, d_u_) = b;
            col += d_u_;
        }
        return theta;
    }

    /// Block companion of the output recursion (top row A_1..A_p, identity
    /// sub-diagonal).
    Matrix output_companion() const {
        const Index n = p() * d_y_;
        Matrix c = Matrix::Zero(n, n);
        for (Index i = 0; i < p(); ++i) c.block(0, i * d_y_, d_y_, d_y_) = a_[i];
        if (p() > 1) c.bottomLeftCorner(n - d_y_, n - d_y_).setIdentity();
        return c;
    }

private:
    std::vector<Matrix> a_;
    std::vector<Matrix> b_;
    Matrix sigma_w_sqrt_;
    double sigma_u_;
    Index d_y_ = 0;
    Index d_u_ = 0;
};

/// First-order lift X_{t+1} = A X_t + B V_t of a linear model, with V_t a
/// white drive of covariance `drive_cov`.
struct LiftedSystem {
    Matrix A;
    Matrix B;
    Matrix drive_cov;
};

/// Companion embedding of an ARX model: state X_t (the regressor), drive
/// V_t = [W_t; U_t], drive covariance blkdiag(I, sigma_u^2 I).
inline LiftedSystem companion_embed(const ArxSystem& sys) {
    const Index dy = sys.d_y(), du = sys.d_u(), p = sys.p(), q = sys.q();
    const Index ny = p * dy, n = ny + q * du;
    Matrix a = Matrix::Zero(n, n);
    a.topLeftCorner(ny, ny) = sys.output_companion();
    for (Index j = 0; j < q; ++j) a.block(0, ny + j * du, dy, du) = sys.b_coeffs()[j];
    if (q > 1) a.block(ny + du, ny, (q - 1) * du, (q - 1) * du).setIdentity();

    Matrix b = Matrix::Zero(n, dy + du);
    b.topLeftCorner(dy, dy) = sys.sigma_w_sqrt();
    if (q > 0) b.block(ny, dy, du, du).setIdentity();

    Matrix gamma = Matrix::Zero(dy + du, dy + du);
    gamma.topLeftCorner(dy, dy).setIdentity();
    gamma.bottomRightCorner(du, du) =
        (sys.sigma_u() * sys.sigma_u()) * Matrix::Identity(du, du);
    return {std::move(a), std::move(b), std::move(gamma)};
}

/// Sigma_0, ..., Sigma_T of the lifted state from a zero initial condition.
inline std::vector<Matrix> lifted_covariances(const LiftedSystem& sys, long horizon) {
    if (horizon < 0) throw ContractError("covariance_sequence: T must be >= 0");
    const Index n = sys.A.rows();
    const Matrix q = sys.B * sys.drive_cov * sys.B.transpose();
    std::vector<Matrix> out;
    out.reserve(static_cast<std::size_t>(horizon) + 1);
    out.push_back(Matrix::Zero(n, n));
    for (long t = 1; t <= horizon; ++t) {
        out.push_back(numerics::symmetrized(sys.A * out.back() * sys.A.transpose() + q));
    }
    return out;
}

/// E X_t X_t^T for t = 0..T of the ARX regressor.
inline std::vector<Matrix> covariance_sequence(const ArxSystem& sys, long horizon) {
    if (horizon < 1) throw ContractError("covariance_sequence: T must be >= 1");
    return lifted_covariances(companion_embed(sys), horizon);
}

// ---------------------------------------------------------------------------
// Innovation-form state space

/// X_{t+1} = A X_t + B U_t + F Sigma_E^{1/2} E_t,  Y_t = C X_t + Sigma_E^{1/2} E_t.
class StateSpaceInnovation {
public:
    StateSpaceInnovation(Matrix a, Matrix b, Matrix c, Matrix f, Matrix sigma_e_sqrt,
                         double sigma_u)
        : a_(std::move(a)),
          b_(std::move(b)),
          c_(std::move(c)),
          f_(std::move(f)),
          sigma_e_sqrt_(std::move(sigma_e_sqrt)),
          sigma_u_(sigma_u) {
        numerics::require_square(a_, "StateSpaceInnovation(A)");
        const Index dx = a_.rows(), dy = c_.rows();
        if (b_.rows() != dx) throw DimensionError("StateSpaceInnovation: B must have d_X rows");
        if (c_.cols() != dx) throw DimensionError("StateSpaceInnovation: C must be d_Y x d_X");
        if (f_.rows() != dx || f_.cols() != dy)
            throw DimensionError("StateSpaceInnovation: F must be d_X x d_Y");
        if (sigma_e_sqrt_.rows() != dy || sigma_e_sqrt_.cols() != dy)
            throw DimensionError("StateSpaceInnovation: Sigma_E^{1/2} must be d_Y x d_Y");
        for (const Matrix* m : {&a_, &b_, &c_, &f_})
            numerics::require_finite(*m, "StateSpaceInnovation");
        detail::require_pd_factor(sigma_e_sqrt_, "StateSpaceInnovation(Sigma_E^{1/2})");
        if (!(sigma_u_ >= 0.0) || !std::isfinite(sigma_u_))
            throw ContractError("StateSpaceInnovation: sigma_u must be finite and >= 0");
        detail::require_non_explosive(spectral_radius(a_), "StateSpaceInnovation");
        const double rho_cl = spectral_radius(a_cl());
        if (!(rho_cl < 1.0)) {
            throw ContractError("StateSpaceInnovation: A - F C has spectral radius " +
                                std::to_string(rho_cl) + " >= 1 (system is not minimum phase)");
        }
    }

    const Matrix& A() const { return a_; }
    const Matrix& B() const { return b_; }
    const Matrix& C() const { return c_; }
    const Matrix& F() const { return f_; }
    const Matrix& sigma_e_sqrt() const { return sigma_e_sqrt_; }
    Matrix sigma_e() const { return sigma_e_sqrt_ * sigma_e_sqrt_.transpose(); }
    double sigma_u() const { return sigma_u_; }
    Matrix a_cl() const { return a_ - f_ * c_; }
    Index d_x() const { return a_.rows(); }
    Index d_y() const { return c_.rows(); }
    Index d_u() const { return b_.cols(); }

private:
    Matrix a_, b_, c_, f_, sigma_e_sqrt_;
    double sigma_u_;
};

/// Lift of the innovation form whose state is [X_t; Y_{t-1..t-p}; U_{t-1..t-p}]
/// and whose drive is [E_t; U_t].
inline LiftedSystem ssarx_lift(const StateSpaceInnovation& ss, Index p) {
    if (p < 1) throw ContractError("ssarx_lift: past horizon p must be >= 1");
    const Index dx = ss.d_x(), dy = ss.d_y(), du = ss.d_u();
    const Index oy = dx, ou = dx + p * dy, n = dx + p * (dy + du);
    Matrix a = Matrix::Zero(n, n);
    Matrix b = Matrix::Zero(n, dy + du);
    const Matrix fs = ss.F() * ss.sigma_e_sqrt();

    a.topLeftCorner(dx, dx) = ss.A();
    b.topLeftCorner(dx, dy) = fs;
    b.block(0, dy, dx, du) = ss.B();
    // Newest output lag Y_t = C X_t + Sigma_E^{1/2} E_t.
    a.block(oy, 0, dy, dx) = ss.C();
    b.block(oy, 0, dy, dy) = ss.sigma_e_sqrt();
    if (p > 1) a.block(oy + dy, oy, (p - 1) * dy, (p - 1) * dy).setIdentity();
    b.block(ou, dy, du, du).setIdentity();
    if (p > 1) a.block(ou + du, ou, (p - 1) * du, (p - 1) * du).setIdentity();

    Matrix gamma = Matrix::Zero(dy + du, dy + du);
    gamma.topLeftCorner(dy, dy).setIdentity();
    gamma.bottomRightCorner(du, du) = (ss.sigma_u() * ss.sigma_u()) * Matrix::Identity(du, du);
    return {std::move(a), std::move(b), std::move(gamma)};
}

/// E Z_t Z_t^T for t = 0..T with Z_t = [Y_{t-1..t-p}; U_{t-1..t-p}].
inline std::vector<Matrix> covariance_sequence(const StateSpaceInnovation& ss, long horizon,
                                               Index p) {
    if (horizon < 1) throw ContractError("covariance_sequence: T must be >= 1");
    const auto full = lifted_covariances(ssarx_lift(ss, p), horizon);
    const Index nz = p * (ss.d_y() + ss.d_u());
    std::vector<Matrix> out;
    out.reserve(full.size());
    for (const auto& s : full) out.push_back(s.bottomRightCorner(nz, nz));
    return out;
}

/// E X_t X_t^T for t = 0..T of the hidden state.
inline std::vector<Matrix> state_covariance_sequence(const StateSpaceInnovation& ss,
                                                     long horizon) {
    if (horizon < 1) throw ContractError("state_covariance_sequence: T must be >= 1");
    const Matrix fs = ss.F() * ss.sigma_e_sqrt();
    LiftedSystem lift{ss.A(), Matrix(ss.d_x(), ss.d_y() + ss.d_u()), Matrix()};
    lift.B << fs, ss.B();
    lift.drive_cov = Matrix::Zero(ss.d_y() + ss.d_u(), ss.d_y() + ss.d_u());
    lift.drive_cov.topLeftCorner(ss.d_y(), ss.d_y()).setIdentity();
    lift.drive_cov.bottomRightCorner(ss.d_u(), ss.d_u()) =
        (ss.sigma_u() * ss.sigma_u()) * Matrix::Identity(ss.d_u(), ss.d_u());
    return lifted_covariances(lift, horizon);
}

/// [C B, C A_cl B, ..., C A_cl^{p-1} B, C F, ..., C A_cl^{p-1} F].
inline Matrix markov_params(const StateSpaceInnovation& ss, Index p) {
    if (p < 1) throw ContractError("markov_params: p must be >= 1");
    const Index dy = ss.d_y(), du = ss.d_u();
    Matrix out(dy, p * (du + dy));
    const Matrix acl = ss.a_cl();
    Matrix cpow = ss.C();
    for (Index i = 0; i < p; ++i) {
        out.middleCols(i * du, du) = cpow * ss.B();
        out.middleCols(p * du + i * dy, dy) = cpow * ss.F();
        cpow = cpow * acl;
    }
    return out;
}

/// Innovation form equivalent to S_{t+1} = A S_t + B U_t + W_t, Y_t = C S_t + V_t
/// through the steady-state Kalman predictor.
inline StateSpaceInnovation innovation_from_standard(const Matrix& a, const Matrix& b,
                                                     const Matrix& c, const Matrix& sigma_w,
                                                     const Matrix& sigma_v, double sigma_u,
                                                     double tol = 1e-12,
                                                     long max_iter = 100000) {
    const auto ric = numerics::riccati_fixed_point(a, c, sigma_w, sigma_v, tol, max_iter);
    Eigen::LLT<Matrix> llt(ric.Sigma_E);
    if (llt.info() != Eigen::Success)
        throw SingularityError("innovation_from_standard: Sigma_E is not positive definite");
    return StateSpaceInnovation(a, b, c, ric.F_star, llt.matrixL(), sigma_u);
}

// ---------------------------------------------------------------------------
// Trajectories

struct Trajectory {
    Index T = 0;
    Matrix Y;  ///< T x d_Y
    Matrix U;  ///< T x d_U; U_t drives Y_{t+1}
    Matrix W;  ///< T x d_W driving shocks as drawn (before Sigma^{1/2})
    std::optional<Index> restart_block_k;

    /// First time index of the restart block containing t (0 without restarts).
    Index block_start(Index t) const {
        return restart_block_k ? (t / *restart_block_k) * *restart_block_k : 0;
    }
};

namespace detail {

inline std::optional<Index> check_restart(Index horizon, std::optional<Index> restart_k) {
    if (horizon < 1) throw ContractError("simulate: horizon T must be >= 1");
    if (restart_k) {
        if (*restart_k < 1 || horizon % *restart_k != 0) {
            throw ContractError("simulate: restart block length k must divide T");
        }
    }
    return restart_k;
}

}  // namespace detail

/// Simulates an ARX model from zero initial conditions. Per time step the
/// stream yields d_Y noise draws then d_U input draws. With `restart_k`, all
/// lags are treated as zero at multiples of k while the stream continues.
inline Trajectory simulate(const ArxSystem& sys, const NoiseSpec& noise, Index horizon,
                           Stream& stream, std::optional<Index> restart_k = std::nullopt) {
    noise.validate();
    Trajectory tr;
    tr.restart_block_k = detail::check_restart(horizon, restart_k);
    tr.T = horizon;
    const Index dy = sys.d_y(), du = sys.d_u(), p = sys.p(), q = sys.q();
    tr.Y.setZero(horizon, dy);
    tr.U.setZero(horizon, du);
    tr.W.setZero(horizon, dy);
    const auto& as = sys.a_coeffs();
    const auto& bs = sys.b_coeffs();
    const Matrix& sw = sys.sigma_w_sqrt();
    const double su = sys.sigma_u();

    for (Index t = 0; t < horizon; ++t) {
        for (Index j = 0; j < dy; ++j) tr.W(t, j) = noise.draw(stream);
        for (Index j = 0; j < du; ++j) tr.U(t, j) = su * stream.normal();
        const Index start = tr.block_start(t);
        const Index pmax = std::min<Index>(p, t - start);
        const Index qmax = std::min<Index>(q, t - start);
        for (Index i = 0; i < dy; ++i) {
            double acc = 0.0;
            for (Index lag = 1; lag <= pmax; ++lag) {
                const Matrix& a = as[lag - 1];
                for (Index j = 0; j < dy; ++j) acc += a(i, j) * tr.Y(t - lag, j);
            }
            for (Index lag = 1; lag <= qmax; ++lag) {
                const Matrix& b = bs[lag - 1];
                for (Index j = 0; j < du; ++j) acc += b(i, j) * tr.U(t - lag, j);
            }
            for (Index j = 0; j < dy; ++j) acc += sw(i, j) * tr.W(t, j);
            tr.Y(t, i) = acc;
        }
    }
    return tr;
}

/// Simulates the innovation form from X_0 = 0. With `restart_k`, the state
/// is reset to zero at multiples of k.
inline Trajectory simulate(const StateSpaceInnovation& ss, const NoiseSpec& noise,
                           Index horizon, Stream& stream,
                           std::optional<Index> restart_k = std::nullopt) {
    noise.validate();
    Trajectory tr;
    tr.restart_block_k = detail::check_restart(horizon, restart_k);
    tr.T = horizon;
    const Index dx = ss.d_x(), dy = ss.d_y(), du = ss.d_u();
    tr.Y.setZero(horizon, dy);
    tr.U.setZero(horizon, du);
    tr.W.setZero(horizon, dy);
    Vector x = Vector::Zero(dx);
    Vector e(dy), u(du);
    const double su = ss.sigma_u();
    for (Index t = 0; t < horizon; ++t) {
        if (tr.restart_block_k && t % *tr.restart_block_k == 0) x.setZero();
        for (Index j = 0; j < dy; ++j) e(j) = noise.draw(stream);
        for (Index j = 0; j < du; ++j) u(j) = su * stream.normal();
        const Vector innov = ss.sigma_e_sqrt() * e;
        tr.Y.row(t) = (ss.C() * x + innov).transpose();
        tr.U.row(t) = u.transpose();
        tr.W.row(t) = e.transpose();
        x = ss.A() * x + ss.B() * u + ss.F() * innov;
    }
    return tr;
}

struct RegressorStack {
    Matrix X;  ///< T x (p d_Y + q d_U), row t is X_t^T
    Matrix Y;  ///< T x d_Y, row t is the target Y_t^T
};

/// Stacks X_t = [Y_{t-1..t-p}; U_{t-1..t-q}] (newest lag first) for
/// t = 0..T-1, zero-padding lags that precede time 0 or the current restart
/// block.
inline RegressorStack regressors(const Trajectory& tr, Index p, Index q) {
    if (p < 0 || q < 0 || p + q < 1) throw ContractError("regressors: need p, q >= 0, p + q >= 1");
    if (tr.T <= std::max(p, q)) {
        throw ContractError("regressors: horizon T = " + std::to_string(tr.T) +
                            " must exceed max(p, q) = " + std::to_string(std::max(p, q)));
    }
    const Index dy = tr.Y.cols(), du = tr.U.cols();
    RegressorStack st;
    st.X.setZero(tr.T, p * dy + q * du);
    st.Y = tr.Y;
    for (Index t = 0; t < tr.T; ++t) {
        const Index start = tr.block_start(t);
        for (Index lag = 1; lag <= p && t - lag >= start; ++lag)
            st.X.row(t).segment((lag - 1) * dy, dy) = tr.Y.row(t - lag);
        for (Index lag = 1; lag <= q && t - lag >= start; ++lag)
            st.X.row(t).segment(p * dy + (lag - 1) * du, du) = tr.U.row(t - lag);
    }
    return st;
}

// ---------------------------------------------------------------------------
// Causal (block lower-triangular Toeplitz) operator

/// Linear map from V_{0:T-1} to X_{1:T} for X_{t+1} = A X_t + B V_t, X_0 = 0,
/// partitioned into T/k x T/k blocks of size (n k) x (m k). Only the LTI band
/// (one block per offset i - j) is stored.
class CausalOperator {
public:
    CausalOperator(const Matrix& a_cal, const Matrix& b_cal, Index horizon, Index k)
        : n_(a_cal.rows()), m_(b_cal.cols()), k_(k), blocks_(0) {
        numerics::require_square(a_cal, "causal_operator");
        if (b_cal.rows() != n_) throw DimensionError("causal_operator: B must have n rows");
        if (k < 1 || horizon < 1 || horizon % k != 0) {
            throw ContractError("causal_operator: block length k must divide T");
        }
        blocks_ = horizon / k;
        std::vector<Matrix> markov;  // A^j B, j = 0..T-1
        markov.reserve(static_cast<std::size_t>(horizon));
        Matrix cur = b_cal;
        for (Index j = 0; j < horizon; ++j) {
            markov.push_back(cur);
            cur = a_cal * cur;
        }
        band_.reserve(static_cast<std::size_t>(blocks_));
        for (Index d = 0; d < blocks_; ++d) {
            Matrix blk = Matrix::Zero(n_ * k_, m_ * k_);
            for (Index r = 0; r < k_; ++r)
                for (Index c = 0; c < k_; ++c) {
                    const Index power = d * k_ + r - c;
                    if (power >= 0) blk.block(r * n_, c * m_, n_, m_) = markov[power];
                }
            band_.push_back(std::move(blk));
        }
    }

    Index block_rows() const { return blocks_; }
    Index block_cols() const { return blocks_; }
    Index block_height() const { return n_ * k_; }
    Index block_width() const { return m_ * k_; }

    /// Block (i, j); zero above the diagonal.
    Matrix block(Index i, Index j) const {
        if (i < 0 || j < 0 || i >= blocks_ || j >= blocks_)
            throw DimensionError("CausalOperator::block: index out of range");
        if (j > i) return Matrix::Zero(block_height(), block_width());
        return band_[i - j];
    }

    Matrix dense() const { return assemble(false); }

    /// Block-diagonal part (the operator of the process restarted every k steps).
    Matrix decoupled_dense() const { return assemble(true); }

    /// Largest singular value.
    double op_norm() const { return std::sqrt(gram_op_norm()); }

    /// || L L^T ||, computed on the smaller Gram matrix.
    double gram_op_norm() const {
        const Matrix l = dense();
        const Matrix g = (l.rows() <= l.cols()) ? Matrix(l * l.transpose())
                                                : Matrix(l.transpose() * l);
        return std::max(0.0, numerics::lambda_max(numerics::symmetrized(g)));
    }

    /// X_{1:T} = L V_{0:T-1} with stacked column vectors.
    Vector apply(const Vector& v) const {
        if (v.size() != blocks_ * block_width())
            throw DimensionError("CausalOperator::apply: input length mismatch");
        Vector out = Vector::Zero(blocks_ * block_height());
        for (Index i = 0; i < blocks_; ++i)
            for (Index j = 0; j <= i; ++j)
                out.segment(i * block_height(), block_height()) +=
                    band_[i - j] * v.segment(j * block_width(), block_width());
        return out;
    }

private:
    Matrix assemble(bool diagonal_only) const {
        Matrix out = Matrix::Zero(blocks_ * block_height(), blocks_ * block_width());
        for (Index i = 0; i < blocks_; ++i)
            for (Index j = diagonal_only ? i : 0; j <= i; ++j)
                out.block(i * block_height(), j * block_width(), block_height(), block_width()) =
                    band_[i - j];
        return out;
    }

    Index n_, m_, k_, blocks_;
    std::vector<Matrix> band_;
};

inline CausalOperator causal_operator(const Matrix& a_cal, const Matrix& b_cal, Index horizon,
                                      Index k) {
    return CausalOperator(a_cal, b_cal, horizon, k);
}

// ---------------------------------------------------------------------------
// Trajectory CSV: header t,y_0..y_{dY-1},u_0..u_{dU-1}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
    os << "t";
    for (Index j = 0; j < tr.Y.cols(); ++j) os << ",y_" << j;
    for (Index j = 0; j < tr.U.cols(); ++j) os << ",u_" << j;
    os << '\n';
    for (Index t = 0; t < tr.T; ++t) {
        os << t;
        for (Index j = 0; j < tr.Y.cols(); ++j) os << ',' << fmt17(tr.Y(t, j));
        for (Index j = 0; j < tr.U.cols(); ++j) os << ',' << fmt17(tr.U(t, j));
        os << '\n';
    }
}

/// Reads the CSV written by write_trajectory_csv. W is left empty.
inline Trajectory read_trajectory_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ContractError("trajectory CSV: missing header");
    std::vector<std::string> cols;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cols.push_back(cell);
    }
    if (cols.empty() || cols[0] != "t") throw ContractError("trajectory CSV: header must start with t");
    Index dy = 0, du = 0;
    for (std::size_t i = 1; i < cols.size(); ++i) {
        const std::string expect_y = "y_" + std::to_string(dy);
        const std::string expect_u = "u_" + std::to_string(du);
        if (du == 0 && cols[i] == expect_y) ++dy;
        else if (cols[i] == expect_u) ++du;
        else throw ContractError("trajectory CSV: unexpected column '" + cols[i] + "'");
    }
    std::vector<std::vector<double>> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(ss, cell, ',')) {
            try {
                vals.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ContractError("trajectory CSV: bad number '" + cell + "'");
            }
        }
        if (vals.size() != cols.size()) throw ContractError("trajectory CSV: ragged row");
        if (static_cast<Index>(vals[0]) != static_cast<Index>(rows.size()))
            throw ContractError("trajectory CSV: time column must count 0, 1, 2, ...");
        rows.push_back(std::move(vals));
    }
    Trajectory tr;
    tr.T = static_cast<Index>(rows.size());
    tr.Y.resize(tr.T, dy);
    tr.U.resize(tr.T, du);
    for (Index t = 0; t < tr.T; ++t) {
        for (Index j = 0; j < dy; ++j) tr.Y(t, j) = rows[t][1 + j];
        for (Index j = 0; j < du; ++j) tr.U(t, j) = rows[t][1 + dy + j];
    }
    return tr;
}

}  // namespace sysid
