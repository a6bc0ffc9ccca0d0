#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "crv/scenario.hpp"

using namespace crv;

namespace {

const char* kSmallScenario = R"({
  "node_count": [8, 12],
  "area_side_m": 1200,
  "run_time_s": 10,
  "seeds": [1, 2],
  "protocols": ["nhdf", "greedy"],
  "flows": {"count": 2, "rate_pps": 4}
})";

} // namespace

TEST_CASE("empty file yields defaults but demands traffic") {
    CHECK_THROWS_AS(parse_scenario_text(""), ConfigError);
    CHECK_THROWS_AS(parse_scenario_text("{}"), ConfigError);
    // Explicit zero-flow flag makes the empty config legal.
    ScenarioFile sc = parse_scenario_text(R"({"allow_zero_flows": true})");
    // Stock evaluation defaults.
    CHECK(sc.node_counts == std::vector<int>{120, 140, 160, 180, 200});
    CHECK(sc.seeds == std::vector<std::uint64_t>{1, 2, 3, 4, 5});
    CHECK(sc.base.area_side_m == 4000.0);
    CHECK(sc.base.channel_count == 100);
    CHECK(sc.base.run_time_s == 150.0);
    CHECK(sc.base.packet_size_bytes == 512);
    CHECK(sc.base.data_rate_bps == 2e6);
    CHECK(sc.base.queue_capacity == 50);
    CHECK(sc.base.tx_range_m == 500.0);
    CHECK(sc.base.max_speed_mps == 2.0);
    CHECK(sc.protocols.size() == 2);
    CHECK(resolve_flows(sc, 120, 1).empty());
}

TEST_CASE("field validation names the problem") {
    CHECK_THROWS_WITH_AS(parse_scenario_text(R"({"node_count": 0, "allow_zero_flows": true})"),
                         doctest::Contains("node_count"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_scenario_text(R"({"tx_range_m": -5, "allow_zero_flows": true})"),
                         doctest::Contains("tx_range_m"), ConfigError);
    CHECK_THROWS_WITH_AS(
        parse_scenario_text(R"({"flows": {"count": 0}})"),
        doctest::Contains("allow_zero_flows"), ConfigError);
}

TEST_CASE("duplicate keys are a parse error") {
    CHECK_THROWS_WITH_AS(
        parse_scenario_text(R"({"run_time_s": 10, "run_time_s": 20, "allow_zero_flows": true})"),
        doctest::Contains("duplicate key"), ConfigError);
    // Nested duplicates too.
    CHECK_THROWS_WITH_AS(
        parse_scenario_text(
            R"({"pu": {"mean_on_s": 1, "mean_on_s": 2}, "allow_zero_flows": true})"),
        doctest::Contains("duplicate key"), ConfigError);
}

TEST_CASE("unknown keys are rejected") {
    CHECK_THROWS_WITH_AS(parse_scenario_text(R"({"node_cout": 100})"),
                         doctest::Contains("unknown key"), ConfigError);
    CHECK_THROWS_WITH_AS(
        parse_scenario_text(R"({"pu": {"mean_on": 5}, "allow_zero_flows": true})"),
        doctest::Contains("unknown key"), ConfigError);
}

TEST_CASE("malformed syntax reports a position") {
    CHECK_THROWS_WITH_AS(parse_scenario_text("{\n  \"node_count\": [120,\n}"),
                         doctest::Contains("parse error"), ConfigError);
}

TEST_CASE("random flows are deterministic per (node_count, seed) and in range") {
    ScenarioFile sc = parse_scenario_text(kSmallScenario);
    auto a = resolve_flows(sc, 12, 2);
    auto b = resolve_flows(sc, 12, 2);
    REQUIRE(a.size() == 2);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].source == b[i].source);
        CHECK(a[i].dest == b[i].dest);
        CHECK(a[i].source != a[i].dest);
        CHECK(a[i].source < 12);
        CHECK(a[i].dest < 12);
    }
    auto c = resolve_flows(sc, 8, 1);
    for (const auto& f : c) {
        CHECK(f.source < 8);
        CHECK(f.dest < 8);
    }
}

TEST_CASE("sweep produces the full cell product in deterministic order") {
    ScenarioFile sc = parse_scenario_text(kSmallScenario);
    auto rows = run_sweep(sc);
    REQUIRE(rows.size() == 2 * 2 * 2); // protocols x node counts x seeds
    CHECK(rows[0].protocol == "nhdf");
    CHECK(rows[0].node_count == 8);
    CHECK(rows[0].seed == 1);
    CHECK(rows[3].node_count == 12);
    CHECK(rows[4].protocol == "greedy");

    auto again = run_sweep(sc);
    CHECK(rows_to_csv(rows) == rows_to_csv(again)); // byte-identical rerun
}

TEST_CASE("protocol filter and seed override trim the sweep") {
    ScenarioFile sc = parse_scenario_text(kSmallScenario);
    SweepOptions opts;
    opts.protocol_filter = std::vector<ProtocolKind>{ProtocolKind::greedy_baseline};
    opts.seed_override = std::vector<std::uint64_t>{7};
    auto rows = run_sweep(sc, opts);
    REQUIRE(rows.size() == 2);
    for (const auto& r : rows) {
        CHECK(r.protocol == "greedy");
        CHECK(r.seed == 7);
    }
}

TEST_CASE("CSV round-trips every field exactly") {
    ScenarioFile sc = parse_scenario_text(kSmallScenario);
    auto rows = run_sweep(sc);
    std::string csv = rows_to_csv(rows);
    auto parsed = parse_csv(csv);
    REQUIRE(parsed.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(parsed[i].protocol == rows[i].protocol);
        CHECK(parsed[i].node_count == rows[i].node_count);
        CHECK(parsed[i].seed == rows[i].seed);
        CHECK(parsed[i].report.to_json_string() == rows[i].report.to_json_string());
    }
}

TEST_CASE("outputs: one CSV plus one plot file per comparison axis") {
    namespace fs = std::filesystem;
    ScenarioFile sc = parse_scenario_text(kSmallScenario);
    auto rows = run_sweep(sc);
    fs::path dir = fs::temp_directory_path() / "crvsim_test_out";
    fs::remove_all(dir);
    emit_outputs(rows, dir.string());
    CHECK(fs::exists(dir / "results.csv"));
    CHECK(fs::exists(dir / "pdr.dat"));
    CHECK(fs::exists(dir / "delay.dat"));
    CHECK(fs::exists(dir / "throughput.dat"));
    // Plot files carry one line per node count plus the header.
    std::ifstream pdr(dir / "pdr.dat");
    std::string line;
    int lines = 0;
    while (std::getline(pdr, line)) ++lines;
    CHECK(lines == 1 + 2);
    fs::remove_all(dir);

    std::string summary = console_summary(rows);
    CHECK(summary.find("nhdf") != std::string::npos);
    CHECK(summary.find("greedy") != std::string::npos);
    // Ordering contract: protocol blocks, node counts ascending inside.
    CHECK(summary.find("nhdf") < summary.find("greedy"));
}

TEST_CASE("sweep trace emission writes one parseable JSONL file per cell") {
    namespace fs = std::filesystem;
    ScenarioFile sc = parse_scenario_text(R"({
      "node_count": 6, "area_side_m": 800, "run_time_s": 5,
      "seeds": [1], "protocols": ["nhdf"], "flows": {"count": 1}
    })");
    fs::path dir = fs::temp_directory_path() / "crvsim_trace_out";
    fs::remove_all(dir);
    fs::create_directories(dir);
    SweepOptions opts;
    opts.trace_dir = dir.string();
    run_sweep(sc, opts);
    fs::path trace = dir / "trace_nhdf_6_1.jsonl";
    REQUIRE(fs::exists(trace));
    std::ifstream in(trace);
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        CHECK(j.contains("t"));
        CHECK(j.contains("ev"));
        ++lines;
    }
    CHECK(lines > 0);
    fs::remove_all(dir);
}

TEST_CASE("single-cell sweep summary equals that cell") {
    ScenarioFile sc = parse_scenario_text(R"({
      "node_count": 6, "area_side_m": 800, "run_time_s": 8,
      "seeds": [3], "protocols": ["greedy"], "flows": {"count": 1}
    })");
    auto rows = run_sweep(sc);
    REQUIRE(rows.size() == 1);
    SimConfig cfg = cell_config(sc, 6, 3);
    MetricsReport direct = run_simulation(cfg, ProtocolKind::greedy_baseline);
    CHECK(rows[0].report.to_json_string() == direct.to_json_string());
}

TEST_CASE("explicit flow lists are honored and bounds-checked") {
    ScenarioFile sc = parse_scenario_text(R"({
      "node_count": 10, "flows": [{"source": 1, "dest": 2, "rate_pps": 8}]
    })");
    auto flows = resolve_flows(sc, 10, 1);
    REQUIRE(flows.size() == 1);
    CHECK(flows[0].source == 1);
    CHECK(flows[0].rate_pps == 8.0);
    CHECK_THROWS_AS(parse_scenario_text(R"({
      "node_count": 3, "flows": [{"source": 1, "dest": 9}]
    })"),
                    ConfigError);
    // A flow to oneself is a self-route.
    CHECK_THROWS_WITH_AS(parse_scenario_text(R"({
      "node_count": 10, "flows": [{"source": 2, "dest": 2}]
    })"),
                         doctest::Contains("self-route"), ConfigError);
}

TEST_CASE("command line: exit codes and fail-fast output checking") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "crvsim_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    fs::path scen = dir / "scen.json";
    {
        std::ofstream f(scen);
        f << R"({"node_count": 6, "area_side_m": 800, "run_time_s": 5,
                 "seeds": [1], "protocols": ["greedy"], "flows": {"count": 1}})";
    }
    auto run = [&](const std::string& args) {
        std::string cmd = std::string(CRVSIM_BIN) + " " + args + " >/dev/null 2>&1";
        int rc = std::system(cmd.c_str());
        return WEXITSTATUS(rc);
    };

    // Happy path: exit 0 and the four output files.
    fs::path out = dir / "out";
    CHECK(run("--scenario " + scen.string() + " --out " + out.string()) == 0);
    CHECK(fs::exists(out / "results.csv"));
    CHECK(fs::exists(out / "pdr.dat"));
    CHECK(fs::exists(out / "delay.dat"));
    CHECK(fs::exists(out / "throughput.dat"));

    // Config error category.
    fs::path bad = dir / "bad.json";
    {
        std::ofstream f(bad);
        f << R"({"node_count": 0})";
    }
    CHECK(run("--scenario " + bad.string() + " --out " + out.string()) == 2);

    // Fail fast: an output path that collides with a file stops before runs.
    fs::path blocker = dir / "blocker";
    {
        std::ofstream f(blocker);
        f << "x";
    }
    CHECK(run("--scenario " + scen.string() + " --out " + (blocker / "sub").string()) == 2);

    // Missing required flag: CLI parse failure is nonzero.
    CHECK(run("--out " + out.string()) != 0);

    // The stock scenario file shipped with the tool parses cleanly.
    ScenarioFile stock = parse_scenario(std::string(CRVSIM_SCENARIO_DIR) + "/default.json");
    CHECK(stock.node_counts.size() == 5);
    CHECK(stock.protocols.size() == 2);
    fs::remove_all(dir);
}
