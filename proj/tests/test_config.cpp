#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cwbsim/config.hpp"
#include "cwbsim/report.hpp"

using namespace cwbsim;
namespace fs = std::filesystem;

namespace {

std::string error_of(std::string_view text) {
    try {
        parse_config_text(text, "t.toml");
    } catch (const InvalidConfig& e) {
        return e.what();
    }
    return {};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("cwbsim_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int cli(const std::string& args) {
    const std::string cmd = std::string(CWBSIM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

} // namespace

TEST(ParseConfig, EmptyGivesDefaults) {
    EXPECT_EQ(parse_config_text(""), SimConfig{});
    EXPECT_EQ(parse_config_text("# only a comment\n\n"), SimConfig{});
}

TEST(ParseConfig, RangeErrorNamesKey) {
    EXPECT_NE(error_of("[dynamics]\nmu = 1.5\n").find("dynamics.mu"), std::string::npos);
    EXPECT_NE(error_of("dynamics.mu = -0.1\n").find("dynamics.mu"), std::string::npos);
    EXPECT_NE(error_of("[detector.toxicity]\ntpr = 2\n").find("detector.toxicity"), std::string::npos);
    EXPECT_NE(error_of("[graph]\nn = 3\nm = 3\n").find("graph.n"), std::string::npos);
}

TEST(ParseConfig, UnknownKeysAndSyntax) {
    EXPECT_NE(error_of("[dynamics]\nmuu = 0.1\n").find("unknown key 'dynamics.muu'"), std::string::npos);
    EXPECT_NE(error_of("[graph]\nn = 100\nn = 50\n").find("t.toml:3"), std::string::npos);
    EXPECT_FALSE(error_of("[graph\nn = 1\n").empty());
    EXPECT_FALSE(error_of("graph.n = 100 x\n").empty());
    EXPECT_FALSE(error_of("graph.n = \"100\"\n").empty());
    EXPECT_FALSE(error_of("graph.n = 1.5\n").empty());
    EXPECT_FALSE(error_of("run.recommenders = [\"random\", \"bogus\"]\n").empty());
    EXPECT_FALSE(error_of("run.recommenders = []\n").empty());
    EXPECT_FALSE(error_of("sweep.cwb.time_mode = [1, 2]\n").empty());
    EXPECT_FALSE(error_of("sweep.dynamics.mu = [0.1, 3.0]\n").empty());
}

TEST(ParseConfig, ValuesLand) {
    auto c = parse_config_text(R"(
[run]
steps = 1_000
seed = 7
rankers = ["chronological", "cwbrs"]   # trailing comment

[dynamics]
mu = 0.25
"lambda" = 0.5

[cwb]
q = -inf
time_mode = "ema"
)");
    EXPECT_EQ(c.base.steps, 1000);
    EXPECT_EQ(c.master_seed, 7u);
    EXPECT_EQ(c.rankers.size(), 2u);
    EXPECT_EQ(c.base.dynamics.mu, 0.25);
    EXPECT_EQ(c.base.dynamics.lambda, 0.5);
    EXPECT_TRUE(std::isinf(c.base.cwb.q));
    EXPECT_EQ(c.base.cwb.time_mode, TimeMode::ema);
}

TEST(ParseConfig, MissingFile) {
    EXPECT_THROW(parse_config("/nonexistent/cwbsim.toml"), IoError);
}

TEST(EchoConfig, RoundTripsEveryPreset) {
    for (const auto& p : presets()) {
        const auto c = p.make();
        const auto text = echo_config(c);
        EXPECT_EQ(parse_config_text(text), c) << p.name;
        EXPECT_EQ(echo_config(parse_config_text(text)), text) << p.name;
    }
}

TEST(EchoConfig, RoundTripsAwkwardValues) {
    SimConfig c;
    c.base.dynamics.mu = 0.1 + 0.2;
    c.base.cwb.q = -std::numeric_limits<double>::infinity();
    c.base.cwb.q_inf = 1e300;
    c.master_seed = std::numeric_limits<std::uint64_t>::max();
    c.sweep = {{"graph.h", {0.1, 1.0 / 3.0}}, {"cwb.beta", {0.0}}};
    EXPECT_EQ(parse_config_text(echo_config(c)), c);
}

TEST(EchoConfig, EveryKeyIsEchoed) {
    const auto text = echo_config(SimConfig{});
    const auto c = parse_config_text(text);
    for (const auto& key : config_keys()) {
        const auto dot = key.rfind('.');
        EXPECT_NE(text.find("\n" + key.substr(dot + 1) + " = "), std::string::npos) << key;
    }
    EXPECT_EQ(c, SimConfig{});
}

TEST(Presets, Fig6) {
    const auto c = preset("fig6");
    EXPECT_EQ(c.base.graph.n, 100u);
    EXPECT_EQ(c.runs, 10u);
    EXPECT_EQ(c.recommenders, (std::vector<ConnectionKind>{ConnectionKind::random, ConnectionKind::overlap,
                                                           ConnectionKind::diversified}));
    EXPECT_EQ(c.rankers, std::vector<FeedKind>{FeedKind::chronological});
    EXPECT_EQ(c.base.content.exogenous_per_user, 0u);
    EXPECT_EQ(c.base.dynamics, DynamicsParams{});
    EXPECT_EQ(c.base.cwb, CWBConfig{});
}

TEST(Presets, Others) {
    const auto r = preset("cwbrs-vs-chrono");
    EXPECT_EQ(r.base.content.exogenous_toxicity, 0.2);
    EXPECT_GT(r.base.content.exogenous_per_user, 0u);
    EXPECT_EQ(r.base.ranker.s_min, 0.5);
    EXPECT_EQ(r.rankers, (std::vector<FeedKind>{FeedKind::chronological, FeedKind::cwbrs}));
    const auto s = preset("sensitivity");
    EXPECT_EQ(expand_arms(s).size(), 3u * 4u * 3u);
    EXPECT_THROW(preset("nope"), NotFound);
}

TEST(Presets, SampleConfigsMatch) {
    const fs::path dir = fs::path(CWBSIM_SOURCE_DIR) / "configs";
    EXPECT_EQ(parse_config(dir / "fig6.toml"), preset_fig6());
    EXPECT_EQ(parse_config(dir / "cwbrs-vs-chrono.toml"), preset_cwbrs_vs_chrono());
    EXPECT_EQ(parse_config(dir / "sensitivity.toml"), preset_sensitivity());
}

TEST(ExpandArms, LabelsAndPoints) {
    auto c = preset_sensitivity();
    auto arms = expand_arms(c);
    EXPECT_EQ(arms.front().label, "random/dynamics.d_backfire=0.6/dynamics.lambda=0.02");
    EXPECT_EQ(arms.front().cfg.dynamics.d_backfire, 0.6);
    EXPECT_EQ(arms.front().cfg.recommender.kind, ConnectionKind::random);
    EXPECT_EQ(arms.back().cfg.dynamics.lambda, 0.1);
    EXPECT_EQ(arms.back().point.size(), 2u);
    EXPECT_EQ(expand_arms(preset_fig6())[1].label, "overlap");
    EXPECT_EQ(expand_arms(preset_cwbrs_vs_chrono())[0].label, "random/chronological");
}

TEST(Reports, MetricsCsvRowCount) {
    auto c = preset_fig6();
    c.runs = 2;
    c.base.steps = 200;
    c.base.graph.n = 20;
    c.base.graph.m = 2;
    auto results = run_experiment(c);
    std::ostringstream os;
    write_metrics_csv(os, results);
    const auto csv = os.str();
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 5 * 3 * 200);
    EXPECT_EQ(csv.find('\r'), std::string::npos);
    EXPECT_EQ(csv.rfind("step,recommender,metric,mean,std\n0,random,satisfaction,", 0), 0u);
    for (const auto& name : core_metric_names())
        EXPECT_NE(csv.find("199,diversified," + name + ","), std::string::npos) << name;
}

TEST(Reports, EmptyStatsGiveHeaderOnly) {
    std::ostringstream os;
    write_metrics_csv(os, {});
    EXPECT_EQ(os.str(), "step,recommender,metric,mean,std\n");
    SimConfig c;
    c.base.steps = 0;
    c.runs = 1;
    std::ostringstream zero;
    write_metrics_csv(zero, run_experiment(c));
    EXPECT_EQ(zero.str(), "step,recommender,metric,mean,std\n");
}

TEST(Reports, SingleRunLeavesStdEmpty) {
    SimConfig c;
    c.base.steps = 3;
    c.base.graph.n = 10;
    c.base.graph.m = 2;
    c.runs = 1;
    std::ostringstream os;
    write_metrics_csv(os, run_experiment(c));
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line))
        EXPECT_EQ(line.back(), ',') << line;
}

TEST(Reports, EmitWritesFilesAndSummary) {
    auto c = preset_cwbrs_vs_chrono();
    c.runs = 2;
    c.base.steps = 10;
    c.base.graph.n = 20;
    c.write_graph = true;
    const auto dir = scratch("emit");
    auto files = emit_reports(run_experiment(c), c, dir);
    for (const auto* name : {"metrics.csv", "summary.json", "config.effective.toml", "cwb/random_chronological.json",
                             "cwb/random_cwbrs.csv", "graph_final.random_cwbrs.edgelist",
                             "nodes_final.random_chronological.csv"})
        EXPECT_TRUE(fs::exists(dir / name)) << name;
    EXPECT_EQ(parse_config(dir / "config.effective.toml"), c);
    auto j = nlohmann::json::parse(slurp(dir / "summary.json"));
    EXPECT_EQ(j["runs"], 2);
    EXPECT_EQ(j["arms"].size(), 2u);
    EXPECT_EQ(j["arms"][1]["ranker"], "cwbrs");
    EXPECT_EQ(j["arms"][0]["final"]["edges"]["n"], 2);
    EXPECT_EQ(j["config"], echo_config(c));
    std::ifstream edges(dir / "graph_final.random_chronological.edgelist");
    const auto graph = read_edgelist(edges, 20);
    EXPECT_GT(graph.edge_count(), 0u);
    fs::remove_all(dir);
}

TEST(Reports, UnwritableDirectory) {
    const auto dir = scratch("blocked");
    std::ofstream(dir / "file") << "x";
    SimConfig c;
    c.base.steps = 1;
    c.base.graph.n = 10;
    c.base.graph.m = 2;
    c.runs = 1;
    try {
        emit_reports(run_experiment(c), c, dir / "file" / "sub");
        FAIL();
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("sub"), std::string::npos);
    }
    fs::remove_all(dir);
}

TEST(Cli, ExitCodes) {
    const auto dir = scratch("cli");
    EXPECT_EQ(cli("list-presets"), 0);
    EXPECT_EQ(cli(""), 2);
    EXPECT_EQ(cli("run"), 2);
    EXPECT_EQ(cli("run --preset nope --out " + dir.string()), 2);
    EXPECT_EQ(cli("run --preset fig6 --config x.toml"), 2);
    EXPECT_EQ(cli("validate --config " + std::string(CWBSIM_SOURCE_DIR) + "/configs/fig6.toml"), 0);

    std::ofstream(dir / "bad.toml") << "[dynamics]\nmu = 1.5\n";
    EXPECT_EQ(cli("validate --config " + (dir / "bad.toml").string()), 2);
    EXPECT_EQ(cli("run --config " + (dir / "bad.toml").string() + " --out " + (dir / "o").string()), 2);
    EXPECT_FALSE(fs::exists(dir / "o"));

    std::ofstream(dir / "tiny.toml") << "[run]\nsteps = 4\nruns = 2\n[graph]\nn = 12\nm = 2\n";
    EXPECT_EQ(cli("run -q --config " + (dir / "tiny.toml").string() + " --out " + (dir / "o").string()), 0);
    EXPECT_TRUE(fs::exists(dir / "o" / "metrics.csv"));
    EXPECT_TRUE(fs::exists(dir / "o" / "summary.json"));

    std::ofstream(dir / "blocker") << "x";
    EXPECT_EQ(cli("run -q --config " + (dir / "tiny.toml").string() + " --out " + (dir / "blocker").string()),
              1);
    fs::remove_all(dir);
}

TEST(Cli, SeedOverrideIsDeterministic) {
    const auto dir = scratch("seed");
    std::ofstream(dir / "tiny.toml") << "[run]\nsteps = 5\nruns = 3\n[graph]\nn = 15\nm = 2\n";
    const auto cfg = (dir / "tiny.toml").string();
    ASSERT_EQ(cli("run -q --seed 5 --config " + cfg + " --out " + (dir / "a").string()), 0);
    ASSERT_EQ(cli("run -q --seed 5 --threads 3 --config " + cfg + " --out " + (dir / "b").string()), 0);
    ASSERT_EQ(cli("run -q --seed 6 --config " + cfg + " --out " + (dir / "c").string()), 0);
    EXPECT_EQ(slurp(dir / "a" / "metrics.csv"), slurp(dir / "b" / "metrics.csv"));
    EXPECT_EQ(slurp(dir / "a" / "summary.json"), slurp(dir / "b" / "summary.json"));
    EXPECT_NE(slurp(dir / "a" / "metrics.csv"), slurp(dir / "c" / "metrics.csv"));
    EXPECT_EQ(nlohmann::json::parse(slurp(dir / "a" / "summary.json"))["master_seed"], 5);
    fs::remove_all(dir);
}
