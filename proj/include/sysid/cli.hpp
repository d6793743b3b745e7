#pragma once

/** @file
 * Command-line front end.
 *
 *     sysid <subcommand> --config <path> --out <dir> [--seed <u64>]
 *
 * Exit status: 0 on success, 1 on domain or contract errors, 2 on
 * configuration errors. Machine outputs go to files in --out (written to a
 * temporary name and renamed); standard output carries a short summary.
 */

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "sysid/bounds.hpp"
#include "sysid/config.hpp"
#include "sysid/error.hpp"
#include "sysid/estimators.hpp"
#include "sysid/experiments.hpp"
#include "sysid/numerics.hpp"
#include "sysid/systems.hpp"

namespace sysid::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitConfig = 2;

// ---------------------------------------------------------------------------
// Config -> library objects

namespace detail {

inline Matrix matrix_from(const Config& cfg, const std::string& key, Index rows, Index cols) {
    const auto v = cfg.get_doubles(key);
    if (static_cast<Index>(v.size()) != rows * cols) {
        throw ConfigError("line " + std::to_string(cfg.line_of(key)) + ": key '" + key + "' needs " +
                          std::to_string(rows * cols) + " values (" + std::to_string(rows) + "x" +
                          std::to_string(cols) + " row-major), got " + std::to_string(v.size()));
    }
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = v[static_cast<std::size_t>(i * cols + j)];
    return m;
}

inline Matrix matrix_or_identity(const Config& cfg, const std::string& key, Index n) {
    return cfg.has(key) ? matrix_from(cfg, key, n, n) : Matrix(Matrix::Identity(n, n));
}

/// Splits a row-major list of `count` stacked rows x cols blocks.
inline std::vector<Matrix> blocks_from(const Config& cfg, const std::string& key, Index count,
                                       Index rows, Index cols) {
    std::vector<Matrix> out;
    if (count == 0) return out;
    const Matrix all = matrix_from(cfg, key, count * rows, cols);
    for (Index i = 0; i < count; ++i) out.push_back(all.middleRows(i * rows, rows));
    return out;
}

inline long positive(const Config& cfg, const std::string& key, long fallback, long min = 1) {
    const long v = cfg.get_long(key, fallback);
    if (v < min)
        throw ConfigError("key '" + key + "' must be >= " + std::to_string(min));
    return v;
}

}  // namespace detail

inline NoiseSpec noise_from(const Config& cfg) {
    NoiseSpec n;
    n.family = cfg.has("noise.family") ? parse_noise_family(cfg.get_string("noise.family"))
                                       : NoiseFamily::gaussian;
    n.scale = cfg.get_double("noise.scale", 1.0);
    return n;
}

/// ARX from system.{p,q,d_y,d_u,a,b,sigma_w_sqrt,sigma_u}. A_i are stacked as
/// p consecutive d_Y x d_Y row-major blocks, likewise B_j.
inline ArxSystem arx_from(const Config& cfg) {
    const std::string type = cfg.get_string("system.type", "arx");
    if (type != "arx") throw ConfigError("system.type must be 'arx' for this subcommand");
    const long p = detail::positive(cfg, "system.p", 1);
    const long q = detail::positive(cfg, "system.q", 0, 0);
    const long dy = detail::positive(cfg, "system.d_y", 1);
    const long du = detail::positive(cfg, "system.d_u", q > 0 ? 1 : 0, 0);
    if (q > 0 && du < 1) throw ConfigError("system.d_u must be >= 1 when system.q > 0");
    auto a = detail::blocks_from(cfg, "system.a", p, dy, dy);
    std::vector<Matrix> b;
    if (q > 0) b = detail::blocks_from(cfg, "system.b", q, dy, du);
    return ArxSystem(std::move(a), std::move(b), detail::matrix_or_identity(cfg, "system.sigma_w_sqrt", dy),
                     cfg.get_double("system.sigma_u", 1.0), du);
}

/// Innovation-form system, either given directly (system.form = innovation:
/// a, b, c, f, sigma_e_sqrt) or converted from a standard model
/// (system.form = standard: a, b, c, sigma_w, sigma_v).
inline StateSpaceInnovation state_space_from(const Config& cfg) {
    const long dx = detail::positive(cfg, "system.d_x", 1);
    const long dy = detail::positive(cfg, "system.d_y", 1);
    const long du = detail::positive(cfg, "system.d_u", 1, 0);
    const Matrix a = detail::matrix_from(cfg, "system.a", dx, dx);
    const Matrix b = du > 0 ? detail::matrix_from(cfg, "system.b", dx, du) : Matrix(dx, 0);
    const Matrix c = detail::matrix_from(cfg, "system.c", dy, dx);
    const double su = cfg.get_double("system.sigma_u", 1.0);
    const std::string form = cfg.get_string("system.form", "innovation");
    if (form == "innovation") {
        return StateSpaceInnovation(a, b, c, detail::matrix_from(cfg, "system.f", dx, dy),
                                    detail::matrix_or_identity(cfg, "system.sigma_e_sqrt", dy), su);
    }
    if (form == "standard") {
        return innovation_from_standard(a, b, c, detail::matrix_or_identity(cfg, "system.sigma_w", dx),
                                        detail::matrix_or_identity(cfg, "system.sigma_v", dy), su);
    }
    throw ConfigError("system.form must be 'innovation' or 'standard'");
}

inline ExperimentConfig experiment_from(const Config& cfg, std::uint64_t seed) {
    ExperimentConfig e;
    e.name = cfg.get_string("experiment.name", "experiment");
    e.estimator = cfg.get_string("experiment.estimator", "arx_ols");
    e.system = arx_from(cfg);
    e.noise = noise_from(cfg);
    e.horizons = cfg.get_longs("experiment.horizons");
    e.trials = detail::positive(cfg, "experiment.trials", 1);
    e.delta_grid = cfg.has("experiment.deltas") ? cfg.get_doubles("experiment.deltas")
                                                : std::vector<double>{0.1};
    e.base_seed = seed;
    e.tau_or_p = detail::positive(cfg, "experiment.tau", std::max<long>(e.system->p(), e.system->q()));
    if (cfg.has("experiment.restart_k")) e.restart_k = detail::positive(cfg, "experiment.restart_k", 1);
    e.sparsity = detail::positive(cfg, "experiment.sparsity", 1);
    if (cfg.has("experiment.class_gains")) e.class_gains = cfg.get_doubles("experiment.class_gains");
    e.selfnorm_reg = cfg.get_double("experiment.selfnorm_reg", 1.0);
    e.C = cfg.get_double("constants.C", kDefaultC);
    e.c = cfg.get_double("constants.c", 1.0);
    e.c_prime = cfg.get_double("constants.c_prime", 1.0);
    e.cond_samples = detail::positive(cfg, "experiment.cond_samples", 4000);
    e.threads = static_cast<unsigned>(detail::positive(cfg, "experiment.threads", 0, 0));
    if (std::find(campaign_estimators().begin(), campaign_estimators().end(), e.estimator) ==
        campaign_estimators().end())
        throw ConfigError("experiment.estimator '" + e.estimator + "' is unknown");
    return e;
}

// ---------------------------------------------------------------------------
// Output

/// Stages files in memory and commits them with temp-file + rename.
class OutputSet {
public:
    explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {}

    void add(const std::string& name, std::string content) { files_.push_back({name, std::move(content)}); }

    std::vector<fs::path> commit() const {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw ConfigError("cannot create output directory '" + dir_.string() + "': " + ec.message());
        std::vector<fs::path> written;
        for (const auto& [name, content] : files_) {
            const fs::path final_path = dir_ / name;
            const fs::path tmp = dir_ / ("." + name + ".tmp");
            {
                std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
                if (!f) throw ConfigError("output directory '" + dir_.string() + "' is not writable");
                f << content;
                if (!f) throw ConfigError("failed writing '" + tmp.string() + "'");
            }
            fs::rename(tmp, final_path, ec);
            if (ec) throw ConfigError("cannot rename into '" + final_path.string() + "': " + ec.message());
            written.push_back(final_path);
        }
        return written;
    }

private:
    fs::path dir_;
    std::vector<std::pair<std::string, std::string>> files_;
};

inline std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

inline nlohmann::json config_echo(const Config& cfg) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, e] : cfg.entries()) j[k] = e.value;
    return j;
}

inline std::string table(const std::vector<std::pair<std::string, std::string>>& rows) {
    std::size_t w = 0;
    for (const auto& r : rows) w = std::max(w, r.first.size());
    std::ostringstream os;
    for (const auto& [k, v] : rows) os << "  " << std::left << std::setw(static_cast<int>(w)) << k << "  " << v << '\n';
    return os.str();
}

// ---------------------------------------------------------------------------
// Subcommands

struct Invocation {
    std::string subcommand;
    std::string config_path;
    std::string output_dir;
    std::optional<std::uint64_t> seed_override;
};

namespace detail {

inline std::uint64_t resolve_seed(const Invocation& inv, const Config& cfg) {
    if (inv.seed_override) return *inv.seed_override;
    if (cfg.has("seed")) return cfg.get_u64("seed");
    throw ConfigError("no seed: pass --seed or set 'seed' in the config (runs are never seeded "
                      "from the clock)");
}

inline void cmd_simulate(const Invocation& inv, const Config& cfg, OutputSet& out, std::ostream& log) {
    const std::uint64_t seed = resolve_seed(inv, cfg);
    const long t = positive(cfg, "simulate.T", 1);
    std::optional<Index> restart;
    if (cfg.has("simulate.restart_k")) restart = positive(cfg, "simulate.restart_k", 1);
    const NoiseSpec noise = noise_from(cfg);
    Stream s(seed);
    Trajectory tr;
    if (cfg.get_string("system.type", "arx") == "state_space")
        tr = simulate(state_space_from(cfg), noise, t, s, restart);
    else
        tr = simulate(arx_from(cfg), noise, t, s, restart);
    std::ostringstream csv;
    write_trajectory_csv(csv, tr);
    out.add("trajectory.csv", csv.str());
    log << "simulate: T = " << t << ", d_Y = " << tr.Y.cols() << ", d_U = " << tr.U.cols() << '\n';
}

inline Trajectory trajectory_for_identify(const Invocation& inv, const Config& cfg) {
    if (cfg.has("identify.trajectory")) {
        std::ifstream f(cfg.get_string("identify.trajectory"));
        if (!f) throw ConfigError("cannot open identify.trajectory '" + cfg.get_string("identify.trajectory") + "'");
        return read_trajectory_csv(f);
    }
    const std::uint64_t seed = resolve_seed(inv, cfg);
    const long t = positive(cfg, "identify.T", 2);
    Stream s(seed);
    if (cfg.get_string("system.type", "arx") == "state_space")
        return simulate(state_space_from(cfg), noise_from(cfg), t, s);
    return simulate(arx_from(cfg), noise_from(cfg), t, s);
}

inline void cmd_identify(const Invocation& inv, const Config& cfg, OutputSet& out, std::ostream& log) {
    const std::string est = cfg.get_string("identify.estimator", "ols");
    if (est != "ols" && est != "sparse" && est != "ssarx")
        throw ConfigError("identify.estimator must be ols, sparse or ssarx");
    const Trajectory tr = trajectory_for_identify(inv, cfg);
    Estimate e;
    if (est == "ssarx") {
        e = ssarx_fit(tr, positive(cfg, "identify.p", 1));
    } else {
        const long p = positive(cfg, "identify.p", cfg.get_long("system.p", 1), 0);
        const long q = positive(cfg, "identify.q", cfg.get_long("system.q", 0), 0);
        const auto st = regressors(tr, p, q);
        e = est == "ols" ? ols(st.X, st.Y) : sparse_lse(st.X, st.Y, positive(cfg, "identify.s", 1));
    }
    nlohmann::json j = to_json(e);
    j["estimator"] = est;
    j["T"] = tr.T;
    out.add("estimate.json", dump(j));
    log << "identify (" << est << "): theta_hat " << e.theta_hat.rows() << "x" << e.theta_hat.cols()
        << ", rank " << e.rank << ", min_eig " << fmt17(e.min_eig) << '\n';
}

inline void cmd_bounds(const Invocation&, const Config& cfg, OutputSet& out, std::ostream& log) {
    const auto names = cfg.get_strings("bounds");
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& name : names) {
        std::map<std::string, double> inputs;
        for (const auto& [k, e] : cfg.section(name)) inputs[k] = cfg.get_double(name + "." + k);
        const BoundReport r = bounds::evaluate_bound(name, inputs);
        arr.push_back(to_json(r));
        std::vector<std::pair<std::string, std::string>> rows = {
            {"value", fmt17(r.value)}, {"valid", r.valid ? "true" : "false"},
            {"vacuous", r.vacuous ? "true" : "false"}};
        for (const auto& [k, v] : r.inputs) rows.push_back({k, fmt17(v)});
        log << r.name << '\n' << table(rows);
    }
    out.add("bounds.json", dump(arr));
}

inline void cmd_mc_coverage(const Invocation& inv, const Config& cfg, OutputSet& out, std::ostream& log) {
    const std::uint64_t seed = resolve_seed(inv, cfg);
    const ExperimentConfig e = experiment_from(cfg, seed);
    const CoverageReport rep = mc_coverage(e);
    std::ostringstream csv;
    write_coverage_csv(csv, rep);
    out.add("coverage.csv", csv.str());
    nlohmann::json side;
    side["artifact_version"] = kArtifactVersion;
    side["base_seed"] = seed;
    side["config"] = config_echo(cfg);
    side["cells"] = to_json(rep);
    out.add("coverage.json", dump(side));
    long worst_valid_fail = 0;
    for (const auto& c : rep.cells)
        if (c.valid && std::isfinite(c.delta) && c.wilson_upper > c.delta) ++worst_valid_fail;
    log << "mc-coverage " << e.name << ": " << rep.cells.size() << " cells, " << worst_valid_fail
        << " certified cells with Wilson upper bound above delta\n";
}

inline void cmd_rate(const Invocation& inv, const Config& cfg, OutputSet& out, std::ostream& log) {
    const std::uint64_t seed = resolve_seed(inv, cfg);
    const ExperimentConfig e = experiment_from(cfg, seed);
    const RateFit fit = rate_fit(e);
    std::ostringstream csv;
    write_rate_csv(csv, fit);
    out.add("rate.csv", csv.str());
    nlohmann::json j;
    j["artifact_version"] = kArtifactVersion;
    j["base_seed"] = seed;
    j["config"] = config_echo(cfg);
    j["slope"] = fit.slope;
    j["intercept"] = fit.intercept;
    j["r2"] = fit.r2;
    out.add("rate.json", dump(j));
    log << "rate " << e.name << ": slope " << fmt17(fit.slope) << ", r2 " << fmt17(fit.r2) << '\n';
}

inline void cmd_tail(const Invocation& inv, const Config& cfg, OutputSet& out, std::ostream& log) {
    const std::uint64_t seed = resolve_seed(inv, cfg);
    const long d = positive(cfg, "tail.dim", 1);
    const std::string kind = cfg.get_string("tail.matrix", "identity");
    Stream s(seed);
    Matrix m;
    if (kind == "identity") {
        m = Matrix::Identity(d, d);
    } else if (kind == "random") {
        Matrix g(d, d);
        for (Index i = 0; i < d; ++i)
            for (Index j = 0; j < d; ++j) g(i, j) = s.normal();
        m = numerics::symmetrized(g);
    } else if (kind == "explicit") {
        m = matrix_from(cfg, "tail.entries", d, d);
    } else {
        throw ConfigError("tail.matrix must be identity, random or explicit");
    }
    const auto pts = tail_compare(m, noise_from(cfg), positive(cfg, "tail.samples", 1000),
                                  cfg.get_doubles("tail.s_grid"), s);
    std::ostringstream csv;
    write_tail_csv(csv, pts);
    out.add("tail.csv", csv.str());
    long bad = 0;
    for (const auto& p : pts)
        if (p.hw_bound < 1.0 && p.empirical_ccdf > p.hw_bound) ++bad;
    log << "tail: " << pts.size() << " grid points, " << bad << " above the bound\n";
}

inline void cmd_riccati(const Invocation&, const Config& cfg, OutputSet& out, std::ostream& log) {
    const long dx = positive(cfg, "system.d_x", 1);
    const long dy = positive(cfg, "system.d_y", 1);
    const Matrix a = matrix_from(cfg, "system.a", dx, dx);
    const Matrix c = matrix_from(cfg, "system.c", dy, dx);
    const Matrix sw = matrix_or_identity(cfg, "system.sigma_w", dx);
    const Matrix sv = matrix_or_identity(cfg, "system.sigma_v", dy);
    const auto sol = numerics::riccati_fixed_point(a, c, sw, sv, cfg.get_double("riccati.tol", 1e-12),
                                                   positive(cfg, "riccati.max_iter", 100000));
    nlohmann::json j;
    j["P_star"] = matrix_to_json(sol.P_star);
    j["F_star"] = matrix_to_json(sol.F_star);
    j["Sigma_E"] = matrix_to_json(sol.Sigma_E);
    j["d_x"] = dx;
    j["d_y"] = dy;
    j["residual"] = sol.residual;
    j["iterations"] = sol.iterations;
    out.add("riccati.json", dump(j));
    log << "riccati: converged in " << sol.iterations << " iterations, residual "
        << fmt17(sol.residual) << '\n';
}

}  // namespace detail

inline const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names = {"simulate", "identify", "bounds", "mc-coverage",
                                                   "rate",     "tail",     "riccati"};
    return names;
}

inline const std::map<std::string, std::string>& subcommand_help() {
    static const std::map<std::string, std::string> help = {
        {"simulate", "simulate a trajectory -> trajectory.csv"},
        {"identify", "fit ols, sparse or ssarx -> estimate.json"},
        {"bounds", "evaluate closed-form bounds -> bounds.json"},
        {"mc-coverage", "Monte Carlo coverage campaign -> coverage.csv, coverage.json"},
        {"rate", "OLS error decay fit -> rate.csv, rate.json"},
        {"tail", "quadratic-form tail vs Hanson-Wright -> tail.csv"},
        {"riccati", "Kalman fixed point -> riccati.json"}};
    return help;
}

/// Executes a parsed invocation; returns the exit status.
inline int run(const Invocation& inv, std::ostream& log, std::ostream& err) {
    try {
        const Config cfg = Config::load(inv.config_path);
        OutputSet out(inv.output_dir);
        const std::map<std::string, std::function<void(const Invocation&, const Config&, OutputSet&, std::ostream&)>>
            table = {{"simulate", detail::cmd_simulate},       {"identify", detail::cmd_identify},
                     {"bounds", detail::cmd_bounds},           {"mc-coverage", detail::cmd_mc_coverage},
                     {"rate", detail::cmd_rate},               {"tail", detail::cmd_tail},
                     {"riccati", detail::cmd_riccati}};
        auto it = table.find(inv.subcommand);
        if (it == table.end()) throw ConfigError("unknown subcommand '" + inv.subcommand + "'");
        it->second(inv, cfg, out, log);
        for (const auto& p : out.commit()) log << "wrote " << p.string() << '\n';
        return kExitOk;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitDomain;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitDomain;
    }
}

/// Parses argv and runs the subcommand.
inline int main(int argc, const char* const* argv, std::ostream& log = std::cout,
                std::ostream& err = std::cerr) {
    CLI::App app{"Finite-sample system identification laboratory"};
    app.require_subcommand(1);
    Invocation inv;
    std::uint64_t seed = 0;
    for (const auto& name : subcommands()) {
        auto* sub = app.add_subcommand(name, subcommand_help().at(name));
        sub->add_option("--config", inv.config_path, "configuration file")->required();
        sub->add_option("--out", inv.output_dir, "output directory")->required();
        sub->add_option("--seed", seed, "base seed (overrides the config)");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, log, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, log, err);
        return kExitConfig;
    }
    for (auto* sub : app.get_subcommands()) {
        inv.subcommand = sub->get_name();
        if (sub->count("--seed") > 0) inv.seed_override = seed;
    }
    return run(inv, log, err);
}

}  // namespace sysid::cli
