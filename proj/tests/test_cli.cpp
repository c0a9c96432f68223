#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include <gwap/cli.hpp>

#include "support.hpp"

using namespace gwap;

namespace {

struct Run {
    int code = 0;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    std::ostringstream out, err;
    Run r;
    r.code = cli::run_cli(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

// Copies a fixture directory so the CLI can write next to it.
std::filesystem::path staged(const std::string& name) {
    const auto dir = test::scratch_dir("cli_" + name);
    for (const auto& e : std::filesystem::directory_iterator(test::fixture(name))) {
        std::filesystem::copy_file(e.path(), dir / e.path().filename());
    }
    return dir;
}

std::vector<std::string> db_flags(const std::filesystem::path& dir) {
    return {"--playerdb",   (dir / "playerdb.json").string(), "--resultdb",   (dir / "resultdb.json").string(),
            "--manifest",   (dir / "manifest.json").string(), "--vocabulary", (dir / "vocabulary.json").string()};
}

std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

const std::string kReplayPlayer = "2D3C4B5A-6978-4A5B-9C8D-7E6F5A4B3C2D";

} // namespace

TEST(Config, ParsesKeysAndComments) {
    std::istringstream in("# comment\nn = 3\nsolver = power   # inline\nseed=9\ntheta_accept = 2\n");
    const auto cfg = parse_config(in);
    EXPECT_EQ(cfg.n, 3);
    EXPECT_EQ(cfg.rating.solver, TrustSolver::power);
    EXPECT_EQ(cfg.seed, std::optional<std::uint64_t>(9));
    EXPECT_EQ(cfg.theta_accept, std::optional<int>(2));
}

TEST(Config, RejectsBadInput) {
    std::istringstream unknown("colour = blue\n");
    EXPECT_THROW(parse_config(unknown), InvalidArgument);
    std::istringstream no_eq("n 3\n");
    EXPECT_THROW(parse_config(no_eq), InvalidArgument);
    std::istringstream bad_num("n = three\n");
    EXPECT_THROW(parse_config(bad_num), InvalidArgument);
    RunConfig cfg;
    cfg.rating.tolerance = 0;
    EXPECT_THROW(validate(cfg), InvalidArgument);
}

TEST(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(run({}).code, cli::kExitUsage);
    EXPECT_EQ(run({"frobnicate"}).code, cli::kExitUsage);
    EXPECT_EQ(run({"--set", "colour=blue", "simulate", "--seed", "1"}).code, cli::kExitUsage);
    EXPECT_EQ(run({"simulate"}).code, cli::kExitUsage);
    EXPECT_EQ(run({"--set", "tolerance=2", "tile", "--width", "10", "--height", "10"}).code, cli::kExitUsage);
}

TEST(Cli, MissingFilesFail) {
    const auto dir = test::scratch_dir("cli_missing");
    EXPECT_EQ(run(cat({"rate", "--player", "P"}, db_flags(dir))).code, cli::kExitFailure);
}

TEST(Cli, RateReplayIsReliable) {
    const auto dir = staged("replay");
    const auto r = run(cat({"rate", "--player", kReplayPlayer, "-n", "1", "--seed", "3"}, db_flags(dir)));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["reliable"], true);
    EXPECT_EQ(j["counter"], 1);
}

TEST(Cli, RateCommitPromotes) {
    const auto dir = staged("replay");
    const auto before = ResultDb::load(dir / "resultdb.json");
    const auto r = run(cat({"rate", "--player", kReplayPlayer, "-n", "1", "--seed", "3", "--commit"}, db_flags(dir)));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto players = PlayerDb::load(dir / "playerdb.json");
    for (const auto& t : players.find(kReplayPlayer)->tasks) EXPECT_EQ(t.reliable, std::optional<bool>(true));
    EXPECT_FALSE(ResultDb::load(dir / "resultdb.json") == before);
}

TEST(Cli, DisasterQuarter) {
    const auto dir = staged("disaster50");
    const auto r = run(cat({"disaster", "--region", "C0FFEE00-1111-4222-8333-444455556666", "--now",
                            "2020-03-02 00:00:00"},
                           db_flags(dir)));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_DOUBLE_EQ(j["delta"].get<double>(), 0.25);
    EXPECT_EQ(j["timestamp"], "2020-03-02 00:00:00");
}

TEST(Cli, TileWritesBothLayers) {
    const auto r = run({"--seed", "1", "tile", "--width", "100", "--height", "100", "--tile-width", "50",
                        "--tile-height", "50"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j.size(), 5u);
}

TEST(Cli, SimulateIsByteIdenticalUnderSeed) {
    const auto dir = test::scratch_dir("cli_sim");
    auto sim = [&](const std::string& tag) {
        const auto csv = (dir / (tag + ".csv")).string();
        const auto json = (dir / (tag + ".json")).string();
        const auto r = run({"simulate", "--seed", "5", "--honest", "15", "--malicious", "15", "-n", "3",
                            "--csv", csv, "--json", json});
        EXPECT_EQ(r.code, 0) << r.err;
        std::ifstream a(csv), b(json);
        std::stringstream s;
        s << a.rdbuf() << b.rdbuf();
        return s.str();
    };
    const auto first = sim("a");
    EXPECT_EQ(first, sim("b"));
    EXPECT_NE(first.find("mode,parameter,fpr,tpr"), std::string::npos);
}
