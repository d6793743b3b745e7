#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "oracles.hpp"
#include "sysid/cli.hpp"

namespace fs = std::filesystem;
using namespace sysid;

namespace {

const std::string kConfigs = SYSID_CONFIG_DIR;

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "sysid");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::main(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("sysid_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path write_config(const std::string& name, const std::string& text) {
        const fs::path p = dir_ / name;
        std::ofstream(p) << text;
        return p;
    }

    fs::path dir_;
};

}  // namespace

TEST_F(CliTest, BoundsGoldens) {
    const auto out = dir_ / "out";
    const auto r = run_cli({"bounds", "--config", kConfigs + "/bounds_goldens.cfg", "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(slurp(out / "bounds.json"));
    std::map<std::string, double> got;
    for (const auto& e : j) got[e["name"]] = e["value"];
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
    EXPECT_LT(rel(got["hw_tail"], oracle::kHwTail120), 1e-9);
    EXPECT_LT(rel(got["csys"], oracle::kCsysAllOnes), 1e-9);
    EXPECT_LT(rel(got["covering_cardinality"], 8.0), 1e-9);
    EXPECT_LT(rel(got["matrix_markov"], 30.0), 1e-9);
    EXPECT_LT(rel(got["power_norm"], oracle::kTwoE), 1e-9);
    EXPECT_LT(rel(got["nonlinear"], 1.0), 1e-9);
    EXPECT_LT(rel(got["selfnorm_operator"], oracle::kSelfnormOpExample), 1e-9);
    EXPECT_NE(r.out.find("csys"), std::string::npos);
    EXPECT_EQ(j[0]["inputs"]["s"], 120.0);
}

TEST_F(CliTest, SimulateZeroNoiseGivesZeroOutputs) {
    const auto out = dir_ / "out";
    const auto r = run_cli({"simulate", "--config", kConfigs + "/simulate_zero_noise.cfg", "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    std::ifstream f(out / "trajectory.csv");
    std::string line;
    std::getline(f, line);
    EXPECT_EQ(line, "t,y_0,u_0");
    int rows = 0;
    while (std::getline(f, line)) {
        ++rows;
        EXPECT_EQ(line.substr(line.find(',')), ",0,0");
    }
    EXPECT_EQ(rows, 50);
}

TEST_F(CliTest, MissingConfigExitsTwoWithoutOutputs) {
    const auto out = dir_ / "out";
    const auto r = run_cli({"simulate", "--config", (dir_ / "absent.cfg").string(), "--out", out.string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_FALSE(fs::exists(out));
}

TEST_F(CliTest, MissingSeedIsConfigError) {
    const auto cfg = write_config("s.cfg", "system.a = 0.5\nsimulate.T = 10\n");
    const auto r = run_cli({"simulate", "--config", cfg.string(), "--out", (dir_ / "o").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("seed"), std::string::npos);
    const auto ok = run_cli({"simulate", "--config", cfg.string(), "--out", (dir_ / "o").string(), "--seed", "4"});
    EXPECT_EQ(ok.code, 0) << ok.err;
}

TEST_F(CliTest, SeedOverrideBeatsConfig) {
    const std::string cfg = kConfigs + "/simulate_arx.cfg";
    run_cli({"simulate", "--config", cfg, "--out", (dir_ / "a").string()});
    run_cli({"simulate", "--config", cfg, "--out", (dir_ / "b").string(), "--seed", "7"});
    run_cli({"simulate", "--config", cfg, "--out", (dir_ / "c").string(), "--seed", "8"});
    EXPECT_EQ(slurp(dir_ / "a/trajectory.csv"), slurp(dir_ / "b/trajectory.csv"));
    EXPECT_NE(slurp(dir_ / "a/trajectory.csv"), slurp(dir_ / "c/trajectory.csv"));
}

TEST_F(CliTest, MalformedConfigAndUsageErrors) {
    const auto bad = write_config("bad.cfg", "seed = 1\nthis line has no equals\n");
    EXPECT_EQ(run_cli({"simulate", "--config", bad.string(), "--out", (dir_ / "o").string()}).code, 2);
    const auto dup = write_config("dup.cfg", "seed = 1\nseed = 2\n");
    EXPECT_EQ(run_cli({"simulate", "--config", dup.string(), "--out", (dir_ / "o").string()}).code, 2);
    EXPECT_EQ(run_cli({"explode", "--config", bad.string(), "--out", "x"}).code, 2);
    EXPECT_EQ(run_cli({"simulate", "--out", "x"}).code, 2);
    const auto badnum = write_config("n.cfg", "seed = 1\nsystem.a = 0.5x\nsimulate.T = 5\n");
    const auto r = run_cli({"simulate", "--config", badnum.string(), "--out", (dir_ / "o").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("line 2"), std::string::npos);
}

TEST_F(CliTest, DomainErrorsExitOne) {
    const auto explosive = write_config("e.cfg", "seed = 1\nsystem.a = 1.5\nsimulate.T = 5\n");
    EXPECT_EQ(run_cli({"simulate", "--config", explosive.string(), "--out", (dir_ / "o").string()}).code, 1);
    const auto ric = write_config("r.cfg",
                                  "system.d_x = 2\nsystem.d_y = 1\nsystem.a = 1.5, 0, 0, 0.5\n"
                                  "system.c = 0, 1\nriccati.max_iter = 50\n");
    const auto r = run_cli({"riccati", "--config", ric.string(), "--out", (dir_ / "o").string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_FALSE(fs::exists(dir_ / "o" / "riccati.json"));
    const auto bnd = write_config("b.cfg", "bounds = hw_mgf_exponent\nhw_mgf_exponent.lambda = 1\n"
                                           "hw_mgf_exponent.sigma2 = 1\nhw_mgf_exponent.m_frob = 1\n"
                                           "hw_mgf_exponent.m_op = 1\n");
    EXPECT_EQ(run_cli({"bounds", "--config", bnd.string(), "--out", (dir_ / "o").string()}).code, 1);
}

TEST_F(CliTest, RiccatiScalar) {
    const auto out = dir_ / "out";
    const auto r = run_cli({"riccati", "--config", kConfigs + "/riccati_scalar.cfg", "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(slurp(out / "riccati.json"));
    EXPECT_NEAR(j["P_star"][0].get<double>(), oracle::kRiccatiP, 1e-10);
    EXPECT_NEAR(j["F_star"][0].get<double>(), oracle::kRiccatiF, 1e-10);
    EXPECT_NEAR(j["Sigma_E"][0].get<double>(), oracle::kRiccatiSigmaE, 1e-10);
}

TEST_F(CliTest, IdentifyEstimators) {
    for (const char* name : {"identify_ols.cfg", "identify_sparse.cfg", "identify_ssarx.cfg"}) {
        const auto out = dir_ / name;
        const auto r = run_cli({"identify", "--config", kConfigs + "/" + name, "--out", out.string()});
        ASSERT_EQ(r.code, 0) << name << ": " << r.err;
        const auto j = nlohmann::json::parse(slurp(out / "estimate.json"));
        EXPECT_EQ(j["theta_hat"].size(), j["shape"][0].get<std::size_t>() * j["shape"][1].get<std::size_t>());
    }
    const auto j = nlohmann::json::parse(slurp(dir_ / "identify_sparse.cfg" / "estimate.json"));
    EXPECT_EQ(j["support"], nlohmann::json({0, 3}));
}

TEST_F(CliTest, IdentifyFromTrajectoryFile) {
    const auto sim = dir_ / "sim";
    ASSERT_EQ(run_cli({"simulate", "--config", kConfigs + "/simulate_arx.cfg", "--out", sim.string()}).code, 0);
    const auto cfg = write_config("id.cfg", "identify.trajectory = " + (sim / "trajectory.csv").string() +
                                                "\nidentify.p = 2\nidentify.q = 1\n");
    const auto r = run_cli({"identify", "--config", cfg.string(), "--out", (dir_ / "o").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(slurp(dir_ / "o" / "estimate.json"));
    EXPECT_EQ(j["T"], 200);
}

TEST_F(CliTest, StateSpaceSimulation) {
    const auto r = run_cli({"simulate", "--config", kConfigs + "/simulate_state_space.cfg", "--out",
                            (dir_ / "o").string()});
    ASSERT_EQ(r.code, 0) << r.err;
}

TEST_F(CliTest, CoverageAndRateAreReproducible) {
    const auto cfg = write_config("c.cfg",
                                  "seed = 5\nexperiment.estimator = selfnorm\nsystem.a = 0.5\n"
                                  "experiment.horizons = 64, 128, 256, 512\nexperiment.trials = 30\n"
                                  "experiment.deltas = 0.1\n");
    const auto before = slurp(cfg);
    for (const char* d : {"a", "b"}) {
        ASSERT_EQ(run_cli({"mc-coverage", "--config", cfg.string(), "--out", (dir_ / d).string()}).code, 0);
        ASSERT_EQ(run_cli({"rate", "--config", cfg.string(), "--out", (dir_ / d).string()}).code, 0);
    }
    for (const char* f : {"coverage.csv", "coverage.json", "rate.csv", "rate.json"})
        EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
    EXPECT_EQ(slurp(cfg), before);
    const auto side = nlohmann::json::parse(slurp(dir_ / "a" / "coverage.json"));
    EXPECT_EQ(side["base_seed"], 5);
    EXPECT_EQ(side["artifact_version"], kArtifactVersion);
    EXPECT_EQ(side["config"]["system.a"], "0.5");
    for (const auto& e : fs::directory_iterator(dir_ / "a"))
        EXPECT_NE(e.path().filename().string().front(), '.') << "temporary file left behind";
}

TEST_F(CliTest, UnknownEstimatorIsConfigError) {
    const auto cfg = write_config("c.cfg", "seed = 5\nexperiment.estimator = lasso\nsystem.a = 0.5\n"
                                           "experiment.horizons = 64\n");
    EXPECT_EQ(run_cli({"mc-coverage", "--config", cfg.string(), "--out", (dir_ / "o").string()}).code, 2);
}

TEST_F(CliTest, Tail) {
    const auto cfg = write_config("t.cfg", "seed = 3\ntail.matrix = random\ntail.dim = 4\ntail.samples = 2000\n"
                                           "tail.s_grid = 0, 5, 10, 50\nnoise.family = rademacher\n");
    const auto r = run_cli({"tail", "--config", cfg.string(), "--out", (dir_ / "o").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const std::string csv = slurp(dir_ / "o" / "tail.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "s,empirical_ccdf,hw_bound,hw_pre_clamp,dominated");
    EXPECT_EQ(csv.find("false"), std::string::npos);
}
