#include "cli.hpp"

#include "aidi/predictor.hpp"
#include "aidi/tensor_io.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "aidi");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    const int code = aidi::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

double field(const std::string& line, const std::string& key) {
    const auto pos = line.find(key + "=");
    REQUIRE(pos != std::string::npos);
    return std::stod(line.substr(pos + key.size() + 1));
}

}  // namespace

TEST_CASE("parse_config") {
    std::istringstream in("# header\nsteps = 10\nomega_e=5 # inline\n\n  method =  aidi_a \n");
    const auto kv = aidi::cli::parse_config(in);
    CHECK(kv.at("steps") == "10");
    CHECK(kv.at("omega-e") == "5");
    CHECK(kv.at("method") == "aidi_a");
    std::istringstream bad("steps 10\n");
    CHECK_THROWS(aidi::cli::parse_config(bad));
}

TEST_CASE("usage errors exit with 1") {
    CHECK(run({}).code == aidi::cli::kExitUsage);
    CHECK(run({"frobnicate"}).code == aidi::cli::kExitUsage);
    const auto bogus = run({"invert", "--bogus", "1"});
    CHECK(bogus.code == aidi::cli::kExitUsage);
    CHECK_FALSE(bogus.err.empty());
    CHECK(run({"invert", "--steps", "abc"}).code == aidi::cli::kExitUsage);
    CHECK(run({"invert", "--method", "edict"}).code == aidi::cli::kExitUsage);
    CHECK(run({"invert", "--in", testutil::temp_path("missing.txt").string()}).code == aidi::cli::kExitUsage);
    CHECK(run({"invert", "--help"}).code == aidi::cli::kExitOk);
}

TEST_CASE("invert summary and outputs") {
    const auto out = testutil::temp_path("cli_zT.txt");
    const auto report = testutil::temp_path("cli_report.csv");
    const auto r = run({"invert", "--out", out.string(), "--report", report.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("invert method=aidi_e steps=20", 0) == 0);
    CHECK(field(r.out, "nfe") == 280.0);
    CHECK(field(r.out, "round_trip_relative_l2") <= 1e-4);
    CHECK(aidi::load_tensor(out).size() == 64);
    CHECK(slurp(report).rfind("step_t,iteration,residual_norm\n", 0) == 0);

    const auto euler = run({"invert", "--method", "euler", "--omega", "7"});
    REQUIRE(euler.code == 0);
    CHECK(field(euler.out, "round_trip_relative_l2") > 1e-2);
}

TEST_CASE("flags override the config file") {
    const auto cfg = testutil::temp_path("cli.cfg");
    std::ofstream(cfg) << "# run settings\nsteps = 10\nmethod = euler\n";
    const auto from_cfg = run({"invert", "--config", cfg.string()});
    REQUIRE(from_cfg.code == 0);
    CHECK(from_cfg.out.find("method=euler steps=10") != std::string::npos);
    CHECK(field(from_cfg.out, "nfe") == 20.0);
    const auto overridden = run({"invert", "--config", cfg.string(), "--steps", "50"});
    CHECK(overridden.out.find("steps=50") != std::string::npos);

    const auto bad = testutil::temp_path("cli_bad.cfg");
    std::ofstream(bad) << "stepz = 10\n";
    CHECK(run({"invert", "--config", bad.string()}).code == aidi::cli::kExitUsage);
}

TEST_CASE("reconstruct on a saved latent") {
    const auto in = testutil::temp_path("cli_z0.txt");
    aidi::save_tensor(testutil::randn({1, 8, 8}, 5), in);
    const auto r = run({"reconstruct", "--in", in.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("reconstruct method=aidi_e", 0) == 0);
    CHECK(field(r.out, "relative_l2") <= 1e-4);
    CHECK(field(r.out, "nfe") == 320.0);
}

TEST_CASE("edit writes candidate scores") {
    const auto scores = testutil::temp_path("cli_scores.csv");
    const auto r = run({"edit", "--eta", "0.1", "--n-candidates", "3", "--scores", scores.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("candidates=3") != std::string::npos);
    CHECK(slurp(scores).rfind("candidate,score,rank\n", 0) == 0);
}

TEST_CASE("grid output is byte-identical across runs") {
    const auto a = testutil::temp_path("g_a.csv");
    const auto b = testutil::temp_path("g_b.csv");
    const std::vector<std::string> axes{"--steps", "10,20", "--omega", "0,7", "--method", "euler,aidi_e"};
    auto args_a = axes, args_b = axes;
    args_a.insert(args_a.begin(), {"grid", "--seed", "7", "--out", a.string()});
    args_b.insert(args_b.begin(), {"grid", "--seed", "7", "--out", b.string()});
    const auto ra = run(args_a);
    REQUIRE(ra.code == 0);
    CHECK(ra.out.rfind("grid rows=8", 0) == 0);
    REQUIRE(run(args_b).code == 0);
    CHECK(slurp(a) == slurp(b));
    CHECK(slurp(a).rfind("method,steps,omega,round_trip_relative_l2,psnr,nfe,wall_ms,seed\n", 0) == 0);

    auto to_stdout = axes;
    to_stdout.insert(to_stdout.begin(), {"grid", "--seed", "7"});
    CHECK(run(to_stdout).out == slurp(a));
}

TEST_CASE("numeric failures exit with 2") {
    const auto path = testutil::temp_path("cli_wild.txt");
    const aidi::AffinePredictor wild({aidi::DenseMatrix::identity(64, 1e300), aidi::DenseMatrix::identity(64, 1e300),
                                      aidi::DenseMatrix::identity(64, 1e300)},
                                     {});
    aidi::save_predictor(wild, path);
    const auto r = run({"invert", "--predictor", path.string(), "--method", "plain", "--iters", "20"});
    CHECK(r.code == aidi::cli::kExitNumeric);
    CHECK(r.err.find("divergence") != std::string::npos);
}
