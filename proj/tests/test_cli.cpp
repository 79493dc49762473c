#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "polycred/credibility.hpp"

using namespace polycred;
namespace fs = std::filesystem;

namespace {

struct Invocation {
    int code = -1;
    std::string out;
};

fs::path scratch() {
    static fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / ("credsim_cli_" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

Invocation credsim(const std::string& args, const std::string& env = "") {
    const fs::path out = scratch() / "stdout.txt";
    const std::string cmd = env + " " + CREDSIM_PATH + " " + args + " > " + out.string() + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    Invocation r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(out);
    std::stringstream ss;
    ss << in.rdbuf();
    r.out = ss.str();
    return r;
}

fs::path write(const std::string& name, const std::string& body) {
    fs::path p = scratch() / name;
    std::ofstream(p) << body;
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path small_config() {
    return write("small.json", R"({"schema_version": 1, "rounds": 3, "seeds": [17, 42]})");
}

}  // namespace

TEST(Cli, PerturbWorkedExample) {
    auto bids = write("worked_example.json", R"({"bids": [10, 5], "rank_table": [0, 2, 2, 3], "delta": 1})");
    Invocation r = credsim("perturb --bids " + bids.string());
    ASSERT_EQ(r.code, 0);
    auto j = nlohmann::json::parse(r.out);
    EXPECT_DOUBLE_EQ(j["increment"].get<double>(), 1.0);
    EXPECT_DOUBLE_EQ(j["gamma"].get<double>(), 1.0);
    EXPECT_DOUBLE_EQ(j["honest_payment"].get<double>(), 5.0);
    EXPECT_DOUBLE_EQ(j["perturbed_payment"].get<double>(), 6.0);
    // The flag wins over the file.
    auto k = nlohmann::json::parse(credsim("perturb --delta 0.5 --bids " + bids.string()).out);
    EXPECT_DOUBLE_EQ(k["increment"].get<double>(), 0.5);
    EXPECT_EQ(credsim("perturb --delta 7 --bids " + bids.string()).code, 1);
}

TEST(Cli, PerturbOnNetwork) {
    nlohmann::json j;
    j["bids"] = {10, 5};
    j["network"] = to_json(fx::worked_example());
    Invocation r = credsim("perturb --format csv --bids " + write("net.json", j.dump()).string());
    ASSERT_EQ(r.code, 0);
    // Default delta: half the window b_1 - b_2 = 5.
    EXPECT_NE(r.out.find("0,1,2.5,1,2.5"), std::string::npos) << r.out;
}

TEST(Cli, VerifyCleanAndTampered) {
    auto f = make_oracle(fx::worked_example());
    ClinchResult run = clinching_with_broadcast({10, 5}, *f, 0.5);
    auto clean = write("clean.json", to_json(run.transcript).dump());
    Invocation ok = credsim("verify --transcript " + clean.string());
    EXPECT_EQ(ok.code, 0);
    EXPECT_TRUE(nlohmann::json::parse(ok.out)["violations"].empty());

    ClinchTranscript t = run.transcript;
    apply_tamper(t, Tamper::inflate_clinch);
    Invocation bad = credsim("verify --transcript " + write("tampered.json", to_json(t).dump()).string());
    EXPECT_EQ(bad.code, 2);
    EXPECT_FALSE(nlohmann::json::parse(bad.out)["violations"].empty());

    EXPECT_EQ(credsim("verify --transcript " + clean.string() + " --root deadbeef").code, 2);
    EXPECT_EQ(credsim("verify --transcript " + write("junk.json", "{").string()).code, 1);
}

TEST(Cli, RunWritesOutputsDeterministically) {
    const fs::path out1 = scratch() / "out1", out2 = scratch() / "out2";
    const std::string cfg = small_config().string();
    Invocation a = credsim("run --exp exp2 --config " + cfg + " --out " + out1.string());
    ASSERT_EQ(a.code, 0);
    Invocation b = credsim("run --exp exp2 --config " + cfg + " --out " + out2.string() + " --jobs 2");
    ASSERT_EQ(b.code, 0);
    EXPECT_EQ(a.out, b.out);
    ASSERT_TRUE(fs::exists(out1 / "exp2_summary.json"));
    ASSERT_TRUE(fs::exists(out1 / "exp2_rounds.csv"));
    EXPECT_EQ(slurp(out1 / "exp2_summary.json"), slurp(out2 / "exp2_summary.json"));
    EXPECT_EQ(slurp(out1 / "exp2_rounds.csv"), slurp(out2 / "exp2_rounds.csv"));
    auto j = nlohmann::json::parse(slurp(out1 / "exp2_summary.json"));
    EXPECT_EQ(j["conditions"][0]["detection_rate"], 1.0);
}

TEST(Cli, SeedOverrideAndCsv) {
    Invocation r = credsim("run --exp exp1 --format csv --seed 5 --config " + small_config().string());
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(r.out.substr(0, r.out.find(',')), "condition");
    EXPECT_NE(r.out.find("tree/vcg/ghost"), std::string::npos);
}

TEST(Cli, SweepAndGamma) {
    Invocation s = credsim("sweep --class series --grid 1,2,3,4 --seed 3");
    ASSERT_EQ(s.code, 0);
    EXPECT_EQ(nlohmann::json::parse(s.out)["params"].size(), 4u);
    Invocation csv = credsim("sweep --class parallel --format csv --seed 3");
    ASSERT_EQ(csv.code, 0);
    EXPECT_EQ(csv.out.substr(0, csv.out.find('\n')), "param,seed,concabs,rev_base");
    Invocation g = credsim("gamma --class tree --samples 20");
    ASSERT_EQ(g.code, 0);
    EXPECT_EQ(nlohmann::json::parse(g.out)["samples"].size(), 20u);
}

TEST(Cli, ConfigErrorsExitOne) {
    EXPECT_EQ(credsim("frobnicate").code, 1);
    EXPECT_EQ(credsim("").code, 1);
    EXPECT_EQ(credsim("run --exp exp9").code, 1);
    EXPECT_EQ(credsim("run --config " + write("bad.json", R"({"colour": 1})").string()).code, 1);
    EXPECT_EQ(credsim("run --config /nonexistent/config.json").code, 1);
    EXPECT_EQ(credsim("sweep --class tree --grid 1,2,3").code, 1);
    EXPECT_EQ(credsim("sweep --class ring").code, 1);
    EXPECT_EQ(credsim("perturb").code, 1);
    EXPECT_EQ(credsim("perturb --bids " + write("typo.json", R"({"bids": "ten", "rank_table": []})").string()).code, 1);
    EXPECT_EQ(credsim("run --exp exp1 --config " + small_config().string(), "CRED_SIM_JOBS=zero").code, 1);
    EXPECT_EQ(credsim("run --exp exp1 --config " + small_config().string(), "CRED_SIM_JOBS=2").code, 0);
    EXPECT_EQ(credsim("--help").code, 0);
}
